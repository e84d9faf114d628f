#pragma once

// Width adaptation from the network-significance (bias/variance) signal and
// Hoeffding-bound drift detection governing depth growth.

#include <optional>
#include <string_view>
#include <vector>

#include "adcn/autoencoder.hpp"

namespace adcn {

inline constexpr double kReconMomentDecay = 0.999;

struct NsEstimate {
    double bias2 = 0.0;
    double variance = 0.0;
};

// Folds `recon` into the moments (the first observation initializes them) and
// returns bias^2 = mean_i (target_i - E[recon_i])^2 and
// variance = mean_i (E[recon_i^2] - E[recon_i]^2).
[[nodiscard]] NsEstimate ns_update(ReconMoments& moments, ConstSpan target, ConstSpan recon,
                                   double decay = kReconMomentDecay);

// Network significance of SAE layer `layer_index` for one sample; `input` is
// the layer's input h^{l-1}. Updates that layer's reconstruction moments.
[[nodiscard]] NsEstimate ns_estimate(EvolvingNetwork& net, std::size_t layer_index, ConstSpan input);

[[nodiscard]] double dynamic_confidence(double signal) noexcept;  // 1.3 exp(-s) + 0.7

// mean + std >= min_mean + k1 * min_std, with k1 driven by the current bias^2.
[[nodiscard]] bool check_grow(const RunningStat& bias_stat, double bias2_now) noexcept;
// mean + std >= min_mean + 2 k2 * min_std, with k2 driven by the current variance.
[[nodiscard]] bool check_prune(const RunningStat& var_stat, double var_now) noexcept;

// Appends one hidden node (new weight row, zero bias, zero velocity).
void grow_node(AeLayer& layer, Rng& rng);
// Appends one input column to a downstream layer after its upstream layer grew.
void grow_input(AeLayer& layer, Rng& rng);

// Removes the node with the smallest mean |activation| (ties -> lowest index).
// Returns the removed index, or nullopt when the layer has a single node.
[[nodiscard]] std::optional<std::size_t> prune_node(AeLayer& layer, ConstSpan activation_means);
[[nodiscard]] std::size_t prune_target(ConstSpan activation_means);
void prune_input(AeLayer& layer, std::size_t column);

// Network-level edits that also keep the next layer and the per-layer
// evolution state aligned. Cluster coordinates are the caller's business.
void grow_network_node(EvolvingNetwork& net, std::size_t layer_index, Rng& rng);
[[nodiscard]] std::optional<std::size_t> prune_network_node(EvolvingNetwork& net, std::size_t layer_index);

// sqrt(ln(1/alpha) / (2 size)) * range
[[nodiscard]] double hoeffding_epsilon(std::size_t size, double alpha, double range = 1.0);

enum class DriftState { stable, warning, drift };
[[nodiscard]] std::string_view to_string(DriftState s) noexcept;

struct DriftConfig {
    double alpha_x = 0.001;
    double alpha_w = 0.005;
    double alpha_d = 0.001;

    void validate() const;
};

/// Compares the per-sample signal of the previous and the current batch.
/// The previous batch is kept for exactly one call.
class DriftDetector {
public:
    DriftDetector() = default;
    explicit DriftDetector(DriftConfig cfg);

    DriftState detect(ConstSpan current_signal);
    // Replaces the stored batch without testing; the state is kept.
    void remember(ConstSpan signal);

    [[nodiscard]] DriftState state() const noexcept { return state_; }
    [[nodiscard]] const DriftConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] const std::optional<Vector>& previous() const noexcept { return prev_; }
    void reset();

private:
    DriftConfig cfg_{};
    std::optional<Vector> prev_;
    DriftState state_ = DriftState::stable;
};

// Raw test on an already concatenated signal, without warning escalation.
[[nodiscard]] DriftState drift_test(ConstSpan signal, const DriftConfig& cfg);

// Appends a layer with floor(R_L/2) nodes (at least 2) fed by the last layer.
void add_layer(EvolvingNetwork& net, Rng& rng, std::size_t width_cap_factor = 10);

enum class EvolutionKind { grow_node, prune_node, add_layer, drift, warning, add_cluster };
[[nodiscard]] std::string_view to_string(EvolutionKind k) noexcept;

struct EvolutionEvent {
    std::size_t batch_index = 0;
    std::size_t layer = 0;
    EvolutionKind kind = EvolutionKind::grow_node;
    std::size_t width_after = 0;
    std::size_t depth_after = 0;

    friend bool operator==(const EvolutionEvent&, const EvolutionEvent&) = default;
};

}  // namespace adcn
