#pragma once

// Task memory for continual learning: frozen per-task network snapshots, the
// per-task regularization strengths and the reconstruction-stability penalty.

#include <memory>
#include <vector>

#include "adcn/autoencoder.hpp"

namespace adcn {

class TaskMemory {
public:
    explicit TaskMemory(double beta = 5.0);

    // Stores a deep, immutable copy of `net` for the task that just ended.
    void snapshot_task(const EvolvingNetwork& net, std::size_t classes_in_task);

    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] std::size_t size() const noexcept { return snapshots_.size(); }
    [[nodiscard]] bool empty() const noexcept { return snapshots_.empty(); }
    [[nodiscard]] const EvolvingNetwork& snapshot(std::size_t task) const { return *snapshots_.at(task); }
    [[nodiscard]] const std::vector<std::size_t>& class_counts() const noexcept { return class_counts_; }

private:
    double beta_;
    std::vector<std::shared_ptr<const EvolvingNetwork>> snapshots_;
    std::vector<std::size_t> class_counts_;
};

/// Regularization strength applied to each previous task while training task
/// `current_task` (1-based): beta (1 - M_current / sum_{j <= current} M_j),
/// and 0 while only one task has been seen. `class_counts` lists the class
/// count of every task up to and including the current one.
[[nodiscard]] double lambda_value(std::span<const std::size_t> class_counts, std::size_t current_task, double beta);

// One lambda per previous task.
[[nodiscard]] std::vector<double> lambda_schedule(std::span<const std::size_t> class_counts,
                                                  std::size_t current_task, double beta);

// Convenience wrapper: previous-task counts come from `mem`, and the current
// task contributes `current_classes`.
[[nodiscard]] std::vector<double> lambda_for(const TaskMemory& mem, std::size_t current_task,
                                             std::size_t current_classes);

struct RegularizerResult {
    double loss = 0.0;
    Vector grad_at_xhat;
};

// sum_iT lambda_iT * bce(target = snapshot_iT reconstruction of x, pred = xhat_current)
// and its gradient with respect to xhat_current.
[[nodiscard]] RegularizerResult ucl_regularizer(const TaskMemory& mem, std::span<const double> lambdas,
                                                ConstSpan x, ConstSpan xhat_current);

}  // namespace adcn
