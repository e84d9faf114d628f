#include "adcn/continual.hpp"

#include <numeric>

namespace adcn {

TaskMemory::TaskMemory(double beta) : beta_(beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("TaskMemory: beta must be > 0");
}

void TaskMemory::snapshot_task(const EvolvingNetwork& net, std::size_t classes_in_task) {
    snapshots_.push_back(std::make_shared<const EvolvingNetwork>(net));
    class_counts_.push_back(classes_in_task);
}

double lambda_value(std::span<const std::size_t> class_counts, std::size_t current_task, double beta) {
    if (current_task < 1) throw std::invalid_argument("lambda: current_task is 1-based");
    if (class_counts.size() < current_task) throw std::invalid_argument("lambda: missing class counts");
    if (current_task == 1) return 0.0;
    const std::size_t cumulative =
        std::accumulate(class_counts.begin(), class_counts.begin() + static_cast<std::ptrdiff_t>(current_task),
                        std::size_t{0});
    if (cumulative == 0) throw std::invalid_argument("lambda: zero cumulative classes");
    const double current = static_cast<double>(class_counts[current_task - 1]);
    return beta * (1.0 - current / static_cast<double>(cumulative));
}

std::vector<double> lambda_schedule(std::span<const std::size_t> class_counts, std::size_t current_task,
                                    double beta) {
    const double value = lambda_value(class_counts, current_task, beta);
    return std::vector<double>(current_task - 1, value);
}

std::vector<double> lambda_for(const TaskMemory& mem, std::size_t current_task, std::size_t current_classes) {
    std::vector<std::size_t> counts(mem.class_counts().begin(), mem.class_counts().end());
    if (counts.size() + 1 != current_task) {
        throw std::invalid_argument("lambda_for: memory must hold exactly the previous tasks");
    }
    counts.push_back(current_classes);
    return lambda_schedule(counts, current_task, mem.beta());
}

RegularizerResult ucl_regularizer(const TaskMemory& mem, std::span<const double> lambdas, ConstSpan x,
                                  ConstSpan xhat_current) {
    require_same_size(lambdas.size(), mem.size(), "ucl_regularizer lambdas");
    require_same_size(xhat_current.size(), x.size(), "ucl_regularizer reconstruction");
    RegularizerResult out{0.0, Vector(x.size(), 0.0)};
    for (std::size_t t = 0; t < mem.size(); ++t) {
        const EvolvingNetwork& snap = mem.snapshot(t);
        require_same_size(snap.input_dim(), x.size(), "ucl_regularizer snapshot input");
        if (lambdas[t] == 0.0) continue;
        const Vector target = extractor_forward(snap.extractor, x).xhat;
        out.loss += lambdas[t] * bce(target, xhat_current);
        const Vector g = bce_gradient(target, xhat_current);
        for (std::size_t i = 0; i < g.size(); ++i) out.grad_at_xhat[i] += lambdas[t] * g[i];
    }
    return out;
}

}  // namespace adcn
