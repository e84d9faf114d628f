// adcn: stream generation and experiment runner.
//
//   adcn gen sea --n 100000 --seed 1 --out sea.csv
//   adcn run --config exp.json --override sgd.learning_rate=0.02 [--ablate-lcl]
//   adcn run --config exp.json --seeds 5 --jobs 5

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "adcn/harness.hpp"

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

struct GenArgs {
    std::string kind;
    std::size_t n = 100000;
    std::uint64_t seed = 1;
    double noise = 0.1;
    std::size_t u = 4;
    double drift_rate = 0.001;
    std::string out;
};

struct RunArgs {
    std::string config;
    std::vector<std::string> overrides;
    bool ablate_lcl = false;
    std::size_t seeds = 1;
    std::size_t jobs = 1;
    bool quiet = false;
};

int gen(const GenArgs& a) {
    const adcn::LabeledData data = a.kind == "sea" ? adcn::gen_sea(a.n, a.noise, a.seed)
                                                   : adcn::gen_hyperplane(a.n, a.u, a.drift_rate, a.seed);
    adcn::write_csv(a.out, data);
    std::cout << "wrote " << data.size() << " samples to " << a.out << '\n';
    return 0;
}

void print_summary(const adcn::MetricsReport& r, const adcn::ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::cout << "seed " << cfg.seed << ": preq_acc " << r.preq_mean << " over " << r.batches.size() << " batches";
    if (r.rmatrix.tasks() > 0) std::cout << ", task_acc " << r.task_acc;
    if (r.transfer.defined) std::cout << ", bwt " << r.transfer.bwt << ", fwt " << r.transfer.fwt;
    std::cout << ", audits " << (r.audit.ok() ? "ok" : "FAILED") << ", " << r.wall_seconds << " s -> "
              << dir.string() << '\n';
    for (const auto& f : r.audit.failures) std::cout << "  audit: " << f << '\n';
}

int run(const RunArgs& a) {
    if (!std::filesystem::exists(a.config)) {
        std::cerr << "adcn run: config not found: " << a.config << '\n';
        return kUsageError;
    }
    adcn::ExperimentConfig base;
    try {
        nlohmann::json doc = adcn::load_config_document(a.config);
        for (const auto& o : a.overrides) adcn::apply_override(doc, o);
        base = adcn::config_from_json(doc);
        if (a.ablate_lcl) base.enable_lcl = !base.enable_lcl;
    } catch (const adcn::ConfigError& e) {
        std::cerr << "adcn run: " << e.what() << '\n';
        return kUsageError;
    }

    std::vector<adcn::ExperimentConfig> configs;
    for (std::size_t s = 0; s < a.seeds; ++s) {
        adcn::ExperimentConfig c = base;
        c.seed = base.seed + s;
        if (a.seeds > 1) c.output_dir = (std::filesystem::path(base.output_dir) / ("seed" + std::to_string(c.seed))).string();
        configs.push_back(std::move(c));
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex io;
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            const adcn::ExperimentConfig& c = configs[i];
            try {
                const adcn::ExperimentData data = adcn::load_experiment_data(c);
                const std::size_t dim = std::visit(
                    [](const auto& d) {
                        if constexpr (std::is_same_v<std::decay_t<decltype(d)>, adcn::LabeledData>) return d.dim();
                        else return d.dim;
                    },
                    data);
                const adcn::ExperimentConfig resolved = c.resolved(dim);
                const adcn::MetricsReport report = std::holds_alternative<adcn::LabeledData>(data)
                                                       ? adcn::run_ul(std::get<adcn::LabeledData>(data), resolved)
                                                       : adcn::run_ucl(std::get<adcn::TaskStream>(data), resolved);
                adcn::write_outputs(report, resolved, resolved.output_dir);
                std::lock_guard lock(io);
                if (!a.quiet) print_summary(report, resolved, resolved.output_dir);
                if (!report.audit.ok()) failed = true;
            } catch (const std::exception& e) {
                std::lock_guard lock(io);
                std::cerr << "adcn run (seed " << c.seed << "): " << e.what() << '\n';
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < std::max<std::size_t>(1, std::min(a.jobs, configs.size())); ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return failed ? kRuntimeFailure : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ADCN streaming learner: stream generation and experiment runs"};
    app.require_subcommand(1);

    GenArgs g;
    auto* gen_cmd = app.add_subcommand("gen", "write a synthetic stream as CSV");
    gen_cmd->add_option("kind", g.kind, "sea or hyperplane")->required()->check(CLI::IsMember({"sea", "hyperplane"}));
    gen_cmd->add_option("--n", g.n, "number of samples")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", g.seed, "generator seed");
    gen_cmd->add_option("--noise", g.noise, "SEA label noise fraction")->capture_default_str()->check(CLI::Range(0.0, 0.999999));
    gen_cmd->add_option("--u", g.u, "hyperplane dimension")->check(CLI::Range(2, 1 << 20));
    gen_cmd->add_option("--drift-rate", g.drift_rate, "hyperplane weight drift per sample");
    gen_cmd->add_option("--out", g.out, "output CSV path")->required();

    RunArgs r;
    auto* run_cmd = app.add_subcommand("run", "run an experiment from a JSON config");
    run_cmd->add_option("--config", r.config, "experiment config (JSON)")->required();
    run_cmd->add_option("--override", r.overrides, "key=value, dotted keys for nested fields");
    run_cmd->add_flag("--ablate-lcl", r.ablate_lcl, "flip enable_lcl");
    run_cmd->add_option("--seeds", r.seeds, "run seeds seed..seed+K-1 into per-seed directories")->check(CLI::PositiveNumber);
    run_cmd->add_option("--jobs", r.jobs, "worker threads for multi-seed runs")->check(CLI::PositiveNumber);
    run_cmd->add_flag("--quiet", r.quiet, "no summary lines");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (*gen_cmd) return gen(g);
        return run(r);
    } catch (const std::exception& e) {
        std::cerr << "adcn: " << e.what() << '\n';
        return kRuntimeFailure;
    }
}
