#pragma once

// Experiment orchestration: configuration, the learner state machine
// (pretrain, test-then-train batches, task lifecycle), continual-learning
// metrics and CSV reporting.

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "adcn/clustering.hpp"
#include "adcn/continual.hpp"
#include "adcn/streams.hpp"
#include "adcn/structural.hpp"

namespace adcn {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Which data the experiment streams. Single-task types (sea, hyperplane,
/// csv, idx, gaussian) run the unsupervised scenario; task types (rotation,
/// permutation, split) run the continual scenario over `source`.
struct StreamSpec {
    std::string type = "sea";
    std::uint64_t seed = 1;
    // sea / hyperplane
    std::size_t n = 100000;
    double noise = 0.1;
    std::size_t u = 4;
    double drift_rate = 0.001;
    // csv / idx files
    std::string path;
    std::string images;
    std::string labels;
    // gaussian classes
    std::size_t per_class = 1500;
    std::size_t classes = 10;
    std::size_t dim = 8;
    double spread = 0.05;
    // task construction
    std::string source = "gaussian";  // csv | idx | gaussian
    std::size_t tasks = 4;
    std::vector<AngleRange> angles;
    std::vector<std::vector<std::size_t>> class_sets;  // empty -> consecutive pairs

    [[nodiscard]] bool is_task_stream() const noexcept;
    [[nodiscard]] bool is_image() const noexcept;
};

struct ExperimentConfig {
    StreamSpec stream;
    std::size_t batch_size = 1000;  // N
    std::size_t n_init = 1000;      // pretraining samples, split across tasks
    std::size_t n_m = 500;          // labeled samples per class, split across tasks
    std::size_t epochs = 50;        // nE
    std::size_t sae_width = 0;      // R1; 0 -> 2u, or 96 for images
    std::array<std::size_t, 2> extractor_widths{0, 0};  // 0 -> 4u, or {1000, 500} for images
    SgdConfig sgd;
    std::size_t learning_batch = 16;
    double alpha = 0.01;
    DriftConfig drift;
    double beta = 5.0;
    std::uint64_t seed = 0;
    bool enable_lcl = true;
    std::string output_dir = "adcn_out";
    std::size_t width_cap_factor = 10;
    std::size_t baseline_seeds = 3;

    void validate() const;
    // Replaces automatic widths for an input of dimension `input_dim`.
    [[nodiscard]] ExperimentConfig resolved(std::size_t input_dim) const;
};

[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json config_to_json(const ExperimentConfig& cfg);
// "a.b.c=value": the value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, std::string_view assignment);
[[nodiscard]] nlohmann::json load_config_document(const std::filesystem::path& path);

/// Data for one experiment: a single labeled stream or a task stream.
using ExperimentData = std::variant<LabeledData, TaskStream>;
[[nodiscard]] ExperimentData load_experiment_data(const ExperimentConfig& cfg);

/// Per-run counters backing the single-pass and labeled-data audits.
struct LearnerCounters {
    std::uint64_t streamed = 0;        // streaming samples received
    std::uint64_t gradient_passes = 0; // streaming samples used in a gradient pass
    std::uint64_t cluster_updates = 0; // streaming samples routed through the cluster loop
    std::uint64_t labeled = 0;         // labeled samples revealed
    std::uint64_t replay_checks = 0;
    std::uint64_t replay_mismatches = 0;
};

struct BatchOutcome {
    double accuracy = 0.0;
    DriftState drift = DriftState::stable;
    std::size_t depth = 0;
    std::size_t total_width = 0;
    std::size_t total_clusters = 0;
};

class Learner {
public:
    Learner(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t num_classes);

    // Starts task `task_index` (0-based) with `classes_in_task` classes:
    // protects existing clusters, resets winner statistics and the drift
    // detector, and refreshes the regularization strengths.
    void begin_task(std::size_t task_index, std::size_t classes_in_task);
    // nE epochs of layer-wise reconstruction and clustering over `x`.
    void pretrain(const Matrix& x);
    // Adds labeled samples to the allegiance pool and recomputes allegiances.
    void reveal_labels(const LabeledData& pool);
    // Predict, drift check, one training pass, cluster loop, reassignment.
    BatchOutcome process_batch(const StreamBatch& batch);
    // Freezes the current network into task memory.
    void end_task();

    [[nodiscard]] std::size_t predict(ConstSpan x) const;
    [[nodiscard]] double evaluate(const LabeledData& data) const;
    // Accuracy with allegiances recomputed over the revealed pool plus `extra`;
    // the learner itself is left untouched.
    [[nodiscard]] double evaluate_with_pool(const LabeledData& data, const LabeledData& extra) const;
    // Seeds empty cluster sets from the first two rows of `x`.
    void seed_clusters(const Matrix& x);

    [[nodiscard]] const EvolvingNetwork& network() const noexcept { return net_; }
    [[nodiscard]] const std::vector<LayerClusters>& clusters() const noexcept { return clusters_; }
    [[nodiscard]] const TaskMemory& memory() const noexcept { return memory_; }
    [[nodiscard]] const std::vector<double>& lambdas() const noexcept { return lambdas_; }
    [[nodiscard]] const std::vector<EvolutionEvent>& events() const noexcept { return events_; }
    [[nodiscard]] const LearnerCounters& counters() const noexcept { return counters_; }
    [[nodiscard]] const LabeledData& revealed() const noexcept { return revealed_; }
    [[nodiscard]] std::size_t batch_index() const noexcept { return batch_index_; }
    [[nodiscard]] std::size_t total_clusters() const noexcept;
    void set_replay_audit(bool on) noexcept { replay_audit_ = on; }

private:
    struct Snapshot {
        EvolvingNetwork net;
        std::vector<LayerClusters> clusters;
    };

    void adapt_width(const Matrix& x, std::size_t first, std::size_t count);
    void train_minibatch(const Matrix& x, std::size_t first, std::size_t count, bool streaming);
    void cluster_rows(const Matrix& x, std::size_t first, std::size_t count,
                      std::vector<std::vector<std::uint64_t>>& counts, bool streaming);
    void reassign(std::vector<std::vector<std::uint64_t>>& counts);
    void add_depth(const Matrix& x);
    void train_new_layer(const Matrix& x);
    void refresh_allegiance(std::vector<LayerClusters>& target, const LabeledData& pool) const;
    void seed_layer(std::size_t layer, const Matrix& x);
    [[nodiscard]] bool lcl_active() const noexcept;
    [[nodiscard]] Vector batch_signal(const Matrix& x) const;
    void log(std::size_t layer, EvolutionKind kind);

    ExperimentConfig cfg_;
    std::size_t num_classes_;
    Rng rng_;
    EvolvingNetwork net_;
    std::vector<LayerClusters> clusters_;
    DriftDetector detector_;
    TaskMemory memory_;
    std::vector<double> lambdas_;
    LabeledData revealed_;
    std::vector<EvolutionEvent> events_;
    LearnerCounters counters_;
    std::size_t batch_index_ = 0;
    std::size_t task_classes_ = 0;
    bool replay_audit_ = true;
};

/// Accuracy matrix over tasks: r[i][j] is the accuracy on task j's holdout
/// after training through task i; NaN where not evaluated.
struct RMatrix {
    std::vector<std::vector<double>> r;
    std::vector<double> baseline;  // b_bar per task

    [[nodiscard]] std::size_t tasks() const noexcept { return r.size(); }
};

struct TransferMetrics {
    double bwt = 0.0;
    double fwt = 0.0;
    bool defined = false;  // false when only one task exists
};

// 100 * mean_{i < T-1}(r[T-1][i] - r[i][i]) and 100 * mean_{i >= 1}(r[i-1][i] - b_bar[i]).
[[nodiscard]] TransferMetrics transfer_metrics(const RMatrix& m);

struct BatchRecord {
    std::size_t batch = 0;
    double preq_acc = 0.0;
    std::size_t task = 0;
    std::size_t depth = 0;
    std::size_t total_width = 0;
    std::size_t total_clusters = 0;
};

struct ClusterRecord {
    std::size_t batch = 0;
    std::size_t layer = 0;
    std::size_t cluster_count = 0;
    std::uint64_t total_support = 0;
};

struct AuditReport {
    bool test_then_train = true;
    bool single_pass = true;
    bool labeled_data = true;
    std::uint64_t labeled_consumed = 0;
    std::uint64_t labeled_expected = 0;
    std::vector<std::string> failures;

    [[nodiscard]] bool ok() const noexcept { return test_then_train && single_pass && labeled_data; }
};

struct MetricsReport {
    std::vector<BatchRecord> batches;
    double preq_mean = 0.0;
    double task_acc = 0.0;
    TransferMetrics transfer;
    RMatrix rmatrix;
    std::vector<EvolutionEvent> evolution;
    std::vector<ClusterRecord> clusters;
    AuditReport audit;
    double wall_seconds = 0.0;
    std::vector<EvolvingNetwork> snapshots;  // one per completed task (continual runs)
};

[[nodiscard]] MetricsReport run_ul(const LabeledData& stream, const ExperimentConfig& cfg);
[[nodiscard]] MetricsReport run_ucl(const TaskStream& tasks, const ExperimentConfig& cfg);
[[nodiscard]] MetricsReport run_experiment(const ExperimentConfig& cfg);

// accuracy of a freshly initialized model whose allegiance comes from the
// task's labeled pool, averaged over cfg.baseline_seeds seeds.
[[nodiscard]] double baseline_accuracy(const TaskData& task, const ExperimentConfig& cfg, std::size_t input_dim,
                                       std::size_t num_classes);

// metrics.csv, evolution.csv, clusters.csv, rmatrix.csv (continual runs),
// config.resolved.json and one snapshot_task<i>.json per completed task.
void write_outputs(const MetricsReport& report, const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace adcn
