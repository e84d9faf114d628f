#pragma once

// Tied-weight autoencoder layers, the two-layer MLP feature extractor and the
// evolving stacked autoencoder built on top of it.

#include <optional>
#include <vector>

#include "adcn/math.hpp"

namespace adcn {

enum class Activation { relu, sigmoid, linear };

/// One tied-weight autoencoder layer. The decoder applies weight^T; there is
/// no separate decoder matrix.
struct AeLayer {
    Matrix weight;    // hidden x input
    Vector enc_bias;  // hidden
    Vector dec_bias;  // input
    Matrix vel_weight;
    Vector vel_enc_bias;
    Vector vel_dec_bias;

    [[nodiscard]] std::size_t hidden_dim() const noexcept { return weight.rows(); }
    [[nodiscard]] std::size_t input_dim() const noexcept { return weight.cols(); }

    friend bool operator==(const AeLayer&, const AeLayer&) = default;
};

// Weights uniform in [-1/sqrt(input), 1/sqrt(input)], biases and velocities zero.
[[nodiscard]] AeLayer make_layer(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
// Wraps explicit parameters, zeroing the momentum buffers.
[[nodiscard]] AeLayer make_layer(Matrix weight, Vector enc_bias, Vector dec_bias);

[[nodiscard]] Vector activate(ConstSpan pre, Activation act);
// Derivative of `act` given its output value (relu'(0) = 0).
[[nodiscard]] double activation_derivative(double out, Activation act) noexcept;

[[nodiscard]] Vector encode(const AeLayer& layer, ConstSpan input, Activation act);
[[nodiscard]] Vector decode(const AeLayer& layer, ConstSpan hidden, Activation act);

struct LayerGradients {
    Matrix weight;
    Vector enc_bias;
    Vector dec_bias;
    double loss = 0.0;

    void accumulate(const LayerGradients& other);
    void scale(double factor);
};

[[nodiscard]] LayerGradients zero_gradients(const AeLayer& layer);

struct LayerActivations {
    Activation encoder = Activation::relu;
    Activation decoder = Activation::relu;
};

/// Gradients of mse(input, decode(encode(input))) + alpha/2 ||encode(input) - pull||^2
/// with respect to the layer's weight (both tied paths), encoder bias and
/// decoder bias.
[[nodiscard]] LayerGradients layer_gradients(const AeLayer& layer, ConstSpan input,
                                             const std::optional<Vector>& centroid_pull,
                                             double alpha, LayerActivations acts = {});

struct SgdConfig {
    double learning_rate = 0.01;
    double momentum = 0.95;
    double weight_decay = 5e-5;

    void validate() const;
};

// Momentum SGD; weight decay on the weight matrix only.
void sgd_step(AeLayer& layer, const LayerGradients& grads, const SgdConfig& cfg);

/// Two stacked tied-weight layers trained end to end; the innermost code is Z.
/// Hidden units are ReLU, the final reconstruction is sigmoid.
struct FeatureExtractor {
    AeLayer first;
    AeLayer second;

    [[nodiscard]] std::size_t input_dim() const noexcept { return first.input_dim(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return second.hidden_dim(); }

    friend bool operator==(const FeatureExtractor&, const FeatureExtractor&) = default;
};

[[nodiscard]] FeatureExtractor make_extractor(std::size_t input_dim, std::size_t width1,
                                              std::size_t width2, Rng& rng);

struct ExtractorPass {
    Vector hidden1;  // relu(W1 x + b1)
    Vector z;        // relu(W2 hidden1 + b2)
    Vector recon1;   // relu(W2^T z + d2)
    Vector xhat;     // sigmoid(W1^T recon1 + d1)
};

[[nodiscard]] ExtractorPass extractor_forward(const FeatureExtractor& fe, ConstSpan x);

struct ExtractorGradients {
    LayerGradients first;
    LayerGradients second;

    void accumulate(const ExtractorGradients& other);
    void scale(double factor);
};

[[nodiscard]] ExtractorGradients zero_gradients(const FeatureExtractor& fe);

/// Gradients of mse(x, xhat). `extra_recon_grad`, when present, is added to
/// d loss / d xhat before backpropagation.
[[nodiscard]] ExtractorGradients extractor_gradients(const FeatureExtractor& fe, ConstSpan x,
                                                     const std::optional<Vector>& extra_recon_grad);

void sgd_step(FeatureExtractor& fe, const ExtractorGradients& grads, const SgdConfig& cfg);

/// Exponentially weighted first and second moments of a layer's reconstruction.
struct ReconMoments {
    Vector mean;
    Vector mean_sq;
    bool initialized = false;

    friend bool operator==(const ReconMoments&, const ReconMoments&) = default;
};

/// Per-node running mean of |activation|, used to pick the node to prune.
struct NodeActivity {
    Vector mean_abs;
    std::vector<std::uint64_t> count;

    void observe(ConstSpan h);
    friend bool operator==(const NodeActivity&, const NodeActivity&) = default;
};

/// Evolution bookkeeping that travels with each SAE layer.
struct LayerEvolution {
    RunningStat bias_stat;
    RunningStat var_stat;
    ReconMoments recon;
    NodeActivity activity;
    std::size_t max_width = 0;

    friend bool operator==(const LayerEvolution&, const LayerEvolution&) = default;
};

struct EvolvingNetwork {
    FeatureExtractor extractor;
    std::vector<AeLayer> sae;
    std::vector<LayerEvolution> evolution;  // aligned with sae

    [[nodiscard]] std::size_t depth() const noexcept { return sae.size(); }
    [[nodiscard]] std::size_t input_dim() const noexcept { return extractor.input_dim(); }
    [[nodiscard]] std::size_t total_width() const noexcept;

    // Throws std::logic_error when layer shapes do not chain.
    void check_consistency() const;

    friend bool operator==(const EvolvingNetwork&, const EvolvingNetwork&) = default;
};

struct NetworkShape {
    std::size_t input_dim = 0;
    std::size_t extractor_width1 = 0;
    std::size_t extractor_width2 = 0;
    std::size_t sae_width = 0;
    std::size_t width_cap_factor = 10;
};

[[nodiscard]] EvolvingNetwork make_network(const NetworkShape& shape, Rng& rng);
[[nodiscard]] LayerEvolution make_evolution(std::size_t hidden_dim, std::size_t input_dim,
                                            std::size_t max_width);

struct ForwardRecord {
    Vector z;
    std::vector<Vector> latents;  // h^1..h^L
    std::vector<Vector> recons;   // reconstruction of each layer's input
    Vector xhat;
};

[[nodiscard]] ForwardRecord forward_stack(const EvolvingNetwork& net, ConstSpan x);
// Extracted feature Z only.
[[nodiscard]] Vector extract(const EvolvingNetwork& net, ConstSpan x);
// h^1..h^L without reconstructions.
[[nodiscard]] std::vector<Vector> latents(const EvolvingNetwork& net, ConstSpan x);

}  // namespace adcn
