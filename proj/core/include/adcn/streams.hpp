#pragma once

// Synthetic stream generators, task-stream construction, dataset loaders and
// batch iteration.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adcn/math.hpp"

namespace adcn {

using Labels = std::vector<std::size_t>;

/// Feature matrix (one sample per row) with aligned class labels.
struct LabeledData {
    Matrix x;
    Labels labels;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return x.cols(); }
    [[nodiscard]] bool empty() const noexcept { return labels.empty(); }
    // 1 + largest label; 0 when empty.
    [[nodiscard]] std::size_t num_classes() const noexcept;

    void push_back(ConstSpan features, std::size_t label);
    // Rows [first, first + count).
    [[nodiscard]] LabeledData slice(std::size_t first, std::size_t count) const;
    void append(const LabeledData& other);

    friend bool operator==(const LabeledData&, const LabeledData&) = default;
};

/// One streamed batch. Labels travel alongside the features for evaluation
/// only; every training routine takes the feature matrix alone.
struct StreamBatch {
    Matrix x;
    std::optional<Labels> labels;

    [[nodiscard]] std::size_t size() const noexcept { return x.rows(); }
};

struct TaskData {
    LabeledData pretrain;
    std::vector<StreamBatch> stream;
    LabeledData labeled_pool;
    LabeledData holdout;
    std::vector<std::size_t> classes;  // sorted distinct labels of the task
    // Row index ranges inside the task's source chunk, for disjointness audits.
    std::array<std::size_t, 2> pretrain_rows{0, 0};
    std::array<std::size_t, 2> stream_rows{0, 0};
    std::array<std::size_t, 2> holdout_rows{0, 0};
};

struct TaskStream {
    std::vector<TaskData> tasks;
    std::vector<std::size_t> classes_per_task;
    std::size_t num_classes = 0;
    std::size_t dim = 0;
};

/// Per-task split sizes. `n_init` and `n_m` are already divided by the task
/// count when they reach this struct.
struct TaskSplit {
    std::size_t n_init = 1000;   // pretraining samples
    std::size_t n_m = 500;       // labeled samples per class
    std::size_t batch_size = 1000;
    bool holdout = true;         // withhold the last batch_size samples
};

// Splits one ordered chunk into pretrain / stream / holdout and picks the
// labeled pool from the pretraining rows and the first streamed batch.
[[nodiscard]] TaskData build_task(const LabeledData& chunk, const TaskSplit& split);

// SEA concepts: 3 features in [0,10], class = f1 + f2 > theta with theta
// cycling through {8, 9, 7, 9.5} over four equal segments; `noise` flips labels.
// Features are returned divided by 10.
[[nodiscard]] LabeledData gen_sea(std::size_t n, double noise, std::uint64_t seed);
[[nodiscard]] double sea_threshold(std::size_t index, std::size_t n) noexcept;
inline constexpr std::array<double, 4> kSeaThresholds{8.0, 9.0, 7.0, 9.5};

// Rotating hyperplane: x uniform in [0,1]^u, class = sum w_i x_i > sum w_i / 2.
// Weights start at 1 and move by drift_rate * direction per sample; every 1000
// samples each direction flips with probability 0.1.
[[nodiscard]] LabeledData gen_hyperplane(std::size_t n, std::size_t u, double drift_rate, std::uint64_t seed);

// `num_classes` isotropic gaussians in [0,1]^dim with well separated means;
// samples come out in random class order and are clamped to [0,1].
[[nodiscard]] LabeledData gen_gaussian_classes(std::size_t samples_per_class, std::size_t num_classes,
                                               std::size_t dim, double spread, std::uint64_t seed);

// Bilinear rotation of a flattened side x side image about its center;
// samples falling outside the image read as zero.
[[nodiscard]] Vector rotate_image(ConstSpan image, std::size_t side, double degrees);

using AngleRange = std::array<double, 2>;

// Task iT holds the iT-th of nT equal chunks of `base`, each sample rotated
// by an angle drawn uniformly from angles[iT].
[[nodiscard]] TaskStream make_rotation_tasks(const LabeledData& base, std::span<const AngleRange> angles,
                                             std::uint64_t seed, const TaskSplit& split);
// Task iT holds the iT-th chunk with one fixed pixel permutation (identity for
// the first task).
[[nodiscard]] TaskStream make_permutation_tasks(const LabeledData& base, std::size_t num_tasks,
                                                std::uint64_t seed, const TaskSplit& split);
[[nodiscard]] std::vector<std::vector<std::size_t>> make_permutations(std::size_t dim, std::size_t num_tasks,
                                                                      std::uint64_t seed);
// Task iT holds the samples whose class is in class_sets[iT], in base order.
[[nodiscard]] TaskStream make_split_tasks(const LabeledData& base,
                                          std::span<const std::vector<std::size_t>> class_sets,
                                          const TaskSplit& split);

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Header row, feature columns, final `label` column. Every feature column is
// min-max scaled over the file.
[[nodiscard]] LabeledData load_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const LabeledData& data);
[[nodiscard]] LabeledData minmax_scale(const LabeledData& data);

// Big-endian IDX files (0x00000803 images, 0x00000801 labels); pixels / 255.
[[nodiscard]] LabeledData load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               std::span<const std::uint8_t> pixels, std::size_t count, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> label_bytes);

// Consecutive batches in stream order; the final partial batch is kept.
[[nodiscard]] std::vector<StreamBatch> batch_iter(const LabeledData& samples, std::size_t batch_size);

}  // namespace adcn
