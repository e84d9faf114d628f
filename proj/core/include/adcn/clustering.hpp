#pragma once

// Evolving per-layer cluster sets: winner search, growth test, winner-takes-all
// centroid update, empty-cluster reassignment and allegiance-based scoring.

#include <utility>
#include <vector>

#include "adcn/autoencoder.hpp"

namespace adcn {

struct Cluster {
    Vector centroid;
    std::uint64_t support = 1;
    Vector class_allegiance;  // empty until labeled samples have been seen

    friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct LayerClusters {
    std::vector<Cluster> clusters;
    RunningStat win_stat;
    // Clusters [0, protected_prefix) belong to earlier tasks and are never
    // reassigned.
    std::size_t protected_prefix = 0;

    [[nodiscard]] std::size_t size() const noexcept { return clusters.size(); }
    [[nodiscard]] std::uint64_t total_support() const noexcept;

    friend bool operator==(const LayerClusters&, const LayerClusters&) = default;
};

struct Winner {
    std::size_t index = 0;
    double distance = 0.0;
};

// Nearest centroid in L2; ties go to the lowest index.
[[nodiscard]] Winner winning_cluster(const LayerClusters& lc, ConstSpan h);

// distance > mean + k_win std, k_win = 2 exp(-distance) + 2.
[[nodiscard]] bool check_cluster_grow(double distance, const RunningStat& win_stat) noexcept;

void add_cluster(LayerClusters& lc, ConstSpan h);

// c <- c - (c - h)/(support + 1); support <- support + 1
void update_centroid(Cluster& c, ConstSpan h);

/// Outcome of routing one latent through the cluster set.
struct ClusterStep {
    std::size_t index = 0;  // cluster that received the sample
    bool grew = false;
};

// Winner search, win_stat update, growth test, then grow or update.
ClusterStep cluster_step(LayerClusters& lc, ConstSpan h);

// Clusters outside the protected prefix that received no sample in the last
// batch are re-seeded near a randomly chosen cluster from the top-populated
// quartile (gaussian perturbation, std 1e-4); their support resets to 1.
void reassign_empty(LayerClusters& lc, std::span<const std::uint64_t> assignment_counts, Rng& rng);

// a_j = exp(-||c_j - h||) / max_j exp(-||c_j - h||)
[[nodiscard]] Vector allegiance(const LayerClusters& lc, ConstSpan h);

struct LabeledLatent {
    ConstSpan latent;
    std::size_t label = 0;
};

// A_{j,m}: mean cluster allegiance over the labeled latents of class m.
void compute_class_allegiance(LayerClusters& lc, std::span<const LabeledLatent> labeled, std::size_t num_classes);

// softmax over classes of sum_j A_j exp(-||c_j - h||); clusters without an
// allegiance row vote uniformly.
[[nodiscard]] Vector layer_score(const LayerClusters& lc, ConstSpan h, std::size_t num_classes);

struct Prediction {
    std::size_t label = 0;
    Vector score;  // summed over layers
};

[[nodiscard]] Prediction predict_from_latents(std::span<const LayerClusters> per_layer,
                                              std::span<const Vector> latents, std::size_t num_classes);
[[nodiscard]] Prediction predict(const EvolvingNetwork& net, std::span<const LayerClusters> per_layer,
                                 ConstSpan x, std::size_t num_classes);

// Coordinate edits mirroring width changes of the owning layer.
void append_coordinate(LayerClusters& lc);
void erase_coordinate(LayerClusters& lc, std::size_t index);

}  // namespace adcn
