#include "adcn/autoencoder.hpp"

#include <cmath>

namespace adcn {

AeLayer make_layer(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    if (input_dim == 0 || hidden_dim == 0) throw DimensionError("make_layer: zero dimension");
    const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(hidden_dim, input_dim);
    for (double& v : w.data()) v = dist(rng);
    return make_layer(std::move(w), Vector(hidden_dim, 0.0), Vector(input_dim, 0.0));
}

AeLayer make_layer(Matrix weight, Vector enc_bias, Vector dec_bias) {
    require_same_size(enc_bias.size(), weight.rows(), "make_layer encoder bias");
    require_same_size(dec_bias.size(), weight.cols(), "make_layer decoder bias");
    AeLayer layer;
    layer.vel_weight = Matrix(weight.rows(), weight.cols());
    layer.vel_enc_bias = Vector(enc_bias.size(), 0.0);
    layer.vel_dec_bias = Vector(dec_bias.size(), 0.0);
    layer.weight = std::move(weight);
    layer.enc_bias = std::move(enc_bias);
    layer.dec_bias = std::move(dec_bias);
    return layer;
}

Vector activate(ConstSpan pre, Activation act) {
    switch (act) {
        case Activation::relu: return relu(pre);
        case Activation::sigmoid: return sigmoid(pre);
        case Activation::linear: break;
    }
    return Vector(pre.begin(), pre.end());
}

double activation_derivative(double out, Activation act) noexcept {
    switch (act) {
        case Activation::relu: return out > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return out * (1.0 - out);
        case Activation::linear: break;
    }
    return 1.0;
}

Vector encode(const AeLayer& layer, ConstSpan input, Activation act) {
    Vector pre = matvec(layer.weight, input);
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += layer.enc_bias[i];
    return activate(pre, act);
}

Vector decode(const AeLayer& layer, ConstSpan hidden, Activation act) {
    Vector pre = matvec_transposed(layer.weight, hidden);
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += layer.dec_bias[i];
    return activate(pre, act);
}

void LayerGradients::accumulate(const LayerGradients& other) {
    require_same_size(weight.data().size(), other.weight.data().size(), "gradient accumulate");
    auto& w = weight.data();
    const auto& ow = other.weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += ow[i];
    for (std::size_t i = 0; i < enc_bias.size(); ++i) enc_bias[i] += other.enc_bias[i];
    for (std::size_t i = 0; i < dec_bias.size(); ++i) dec_bias[i] += other.dec_bias[i];
    loss += other.loss;
}

void LayerGradients::scale(double factor) {
    for (double& v : weight.data()) v *= factor;
    for (double& v : enc_bias) v *= factor;
    for (double& v : dec_bias) v *= factor;
    loss *= factor;
}

LayerGradients zero_gradients(const AeLayer& layer) {
    return {Matrix(layer.hidden_dim(), layer.input_dim()), Vector(layer.hidden_dim(), 0.0),
            Vector(layer.input_dim(), 0.0), 0.0};
}

LayerGradients layer_gradients(const AeLayer& layer, ConstSpan input,
                               const std::optional<Vector>& centroid_pull, double alpha,
                               LayerActivations acts) {
    require_same_size(input.size(), layer.input_dim(), "layer_gradients input");
    if (centroid_pull) require_same_size(centroid_pull->size(), layer.hidden_dim(), "layer_gradients centroid");

    const Vector h = encode(layer, input, acts.encoder);
    const Vector y = decode(layer, h, acts.decoder);
    const double n = static_cast<double>(input.size());

    LayerGradients g = zero_gradients(layer);
    g.loss = mse(input, y);

    Vector delta_r(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) {
        delta_r[j] = 2.0 * (y[j] - input[j]) / n * activation_derivative(y[j], acts.decoder);
    }
    g.dec_bias = delta_r;
    add_outer(g.weight, h, delta_r);

    Vector delta_h = matvec(layer.weight, delta_r);
    if (centroid_pull) {
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double diff = h[i] - (*centroid_pull)[i];
            delta_h[i] += alpha * diff;
            g.loss += 0.5 * alpha * diff * diff;
        }
    }
    for (std::size_t i = 0; i < h.size(); ++i) delta_h[i] *= activation_derivative(h[i], acts.encoder);
    g.enc_bias = delta_h;
    add_outer(g.weight, delta_h, input);
    return g;
}

void SgdConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("sgd: learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("sgd: momentum must be in [0,1)");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("sgd: weight_decay must be >= 0");
}

void sgd_step(AeLayer& layer, const LayerGradients& grads, const SgdConfig& cfg) {
    require_same_size(grads.weight.rows(), layer.weight.rows(), "sgd_step weight rows");
    require_same_size(grads.weight.cols(), layer.weight.cols(), "sgd_step weight cols");
    require_same_size(grads.enc_bias.size(), layer.enc_bias.size(), "sgd_step encoder bias");
    require_same_size(grads.dec_bias.size(), layer.dec_bias.size(), "sgd_step decoder bias");

    auto& w = layer.weight.data();
    auto& vw = layer.vel_weight.data();
    const auto& gw = grads.weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
        vw[i] = cfg.momentum * vw[i] + gw[i] + cfg.weight_decay * w[i];
        w[i] -= cfg.learning_rate * vw[i];
    }
    for (std::size_t i = 0; i < layer.enc_bias.size(); ++i) {
        layer.vel_enc_bias[i] = cfg.momentum * layer.vel_enc_bias[i] + grads.enc_bias[i];
        layer.enc_bias[i] -= cfg.learning_rate * layer.vel_enc_bias[i];
    }
    for (std::size_t i = 0; i < layer.dec_bias.size(); ++i) {
        layer.vel_dec_bias[i] = cfg.momentum * layer.vel_dec_bias[i] + grads.dec_bias[i];
        layer.dec_bias[i] -= cfg.learning_rate * layer.vel_dec_bias[i];
    }
}

FeatureExtractor make_extractor(std::size_t input_dim, std::size_t width1, std::size_t width2, Rng& rng) {
    FeatureExtractor fe;
    fe.first = make_layer(input_dim, width1, rng);
    fe.second = make_layer(width1, width2, rng);
    return fe;
}

ExtractorPass extractor_forward(const FeatureExtractor& fe, ConstSpan x) {
    ExtractorPass p;
    p.hidden1 = encode(fe.first, x, Activation::relu);
    p.z = encode(fe.second, p.hidden1, Activation::relu);
    p.recon1 = decode(fe.second, p.z, Activation::relu);
    p.xhat = decode(fe.first, p.recon1, Activation::sigmoid);
    return p;
}

void ExtractorGradients::accumulate(const ExtractorGradients& other) {
    first.accumulate(other.first);
    second.accumulate(other.second);
}

void ExtractorGradients::scale(double factor) {
    first.scale(factor);
    second.scale(factor);
}

ExtractorGradients zero_gradients(const FeatureExtractor& fe) {
    return {zero_gradients(fe.first), zero_gradients(fe.second)};
}

ExtractorGradients extractor_gradients(const FeatureExtractor& fe, ConstSpan x,
                                       const std::optional<Vector>& extra_recon_grad) {
    require_same_size(x.size(), fe.input_dim(), "extractor_gradients input");
    if (extra_recon_grad) require_same_size(extra_recon_grad->size(), x.size(), "extractor_gradients extra");

    const ExtractorPass p = extractor_forward(fe, x);
    ExtractorGradients g = zero_gradients(fe);
    g.first.loss = mse(x, p.xhat);
    const double n = static_cast<double>(x.size());

    // Output reconstruction: sigmoid(W1^T recon1 + d1).
    Vector delta_out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        double dy = 2.0 * (p.xhat[j] - x[j]) / n;
        if (extra_recon_grad) dy += (*extra_recon_grad)[j];
        delta_out[j] = dy * p.xhat[j] * (1.0 - p.xhat[j]);
    }
    g.first.dec_bias = delta_out;
    add_outer(g.first.weight, p.recon1, delta_out);

    // recon1 = relu(W2^T z + d2).
    Vector delta_r1 = matvec(fe.first.weight, delta_out);
    for (std::size_t i = 0; i < delta_r1.size(); ++i) delta_r1[i] *= p.recon1[i] > 0.0 ? 1.0 : 0.0;
    g.second.dec_bias = delta_r1;
    add_outer(g.second.weight, p.z, delta_r1);

    // z = relu(W2 hidden1 + b2).
    Vector delta_z = matvec(fe.second.weight, delta_r1);
    for (std::size_t i = 0; i < delta_z.size(); ++i) delta_z[i] *= p.z[i] > 0.0 ? 1.0 : 0.0;
    g.second.enc_bias = delta_z;
    add_outer(g.second.weight, delta_z, p.hidden1);

    // hidden1 = relu(W1 x + b1).
    Vector delta_h1 = matvec_transposed(fe.second.weight, delta_z);
    for (std::size_t i = 0; i < delta_h1.size(); ++i) delta_h1[i] *= p.hidden1[i] > 0.0 ? 1.0 : 0.0;
    g.first.enc_bias = delta_h1;
    add_outer(g.first.weight, delta_h1, x);
    return g;
}

void sgd_step(FeatureExtractor& fe, const ExtractorGradients& grads, const SgdConfig& cfg) {
    sgd_step(fe.first, grads.first, cfg);
    sgd_step(fe.second, grads.second, cfg);
}

void NodeActivity::observe(ConstSpan h) {
    require_same_size(h.size(), mean_abs.size(), "node activity");
    for (std::size_t i = 0; i < h.size(); ++i) {
        ++count[i];
        mean_abs[i] += (std::abs(h[i]) - mean_abs[i]) / static_cast<double>(count[i]);
    }
}

std::size_t EvolvingNetwork::total_width() const noexcept {
    std::size_t w = 0;
    for (const auto& l : sae) w += l.hidden_dim();
    return w;
}

namespace {

void check_layer_shape(const AeLayer& l) {
    const std::size_t h = l.hidden_dim(), u = l.input_dim();
    if (l.enc_bias.size() != h || l.dec_bias.size() != u || l.vel_weight.rows() != h || l.vel_weight.cols() != u ||
        l.vel_enc_bias.size() != h || l.vel_dec_bias.size() != u) {
        throw std::logic_error("layer parameters do not match its weight shape");
    }
}

}  // namespace

void EvolvingNetwork::check_consistency() const {
    if (sae.empty()) throw std::logic_error("network has no SAE layer");
    check_layer_shape(extractor.first);
    check_layer_shape(extractor.second);
    for (const auto& l : sae) check_layer_shape(l);
    if (evolution.size() != sae.size()) throw std::logic_error("evolution state misaligned with layers");
    if (extractor.first.hidden_dim() != extractor.second.input_dim()) {
        throw std::logic_error("extractor layers do not chain");
    }
    std::size_t in = extractor.output_dim();
    for (std::size_t l = 0; l < sae.size(); ++l) {
        if (sae[l].input_dim() != in) throw std::logic_error("SAE layer input does not match previous output");
        if (evolution[l].activity.mean_abs.size() != sae[l].hidden_dim()) {
            throw std::logic_error("node activity misaligned with layer width");
        }
        if (sae[l].hidden_dim() > evolution[l].max_width) throw std::logic_error("SAE layer exceeds width cap");
        in = sae[l].hidden_dim();
    }
}

LayerEvolution make_evolution(std::size_t hidden_dim, std::size_t input_dim, std::size_t max_width) {
    LayerEvolution ev;
    ev.recon.mean.assign(input_dim, 0.0);
    ev.recon.mean_sq.assign(input_dim, 0.0);
    ev.activity.mean_abs.assign(hidden_dim, 0.0);
    ev.activity.count.assign(hidden_dim, 0);
    ev.max_width = max_width;
    return ev;
}

EvolvingNetwork make_network(const NetworkShape& shape, Rng& rng) {
    EvolvingNetwork net;
    net.extractor = make_extractor(shape.input_dim, shape.extractor_width1, shape.extractor_width2, rng);
    net.sae.push_back(make_layer(shape.extractor_width2, shape.sae_width, rng));
    net.evolution.push_back(
        make_evolution(shape.sae_width, shape.extractor_width2, shape.sae_width * shape.width_cap_factor));
    return net;
}

ForwardRecord forward_stack(const EvolvingNetwork& net, ConstSpan x) {
    require_same_size(x.size(), net.input_dim(), "forward_stack input");
    ExtractorPass p = extractor_forward(net.extractor, x);
    ForwardRecord rec;
    rec.z = std::move(p.z);
    rec.xhat = std::move(p.xhat);
    rec.latents.reserve(net.sae.size());
    rec.recons.reserve(net.sae.size());
    const Vector* input = &rec.z;
    for (const auto& layer : net.sae) {
        rec.latents.push_back(encode(layer, *input, Activation::relu));
        rec.recons.push_back(decode(layer, rec.latents.back(), Activation::relu));
        input = &rec.latents.back();
    }
    return rec;
}

Vector extract(const EvolvingNetwork& net, ConstSpan x) {
    require_same_size(x.size(), net.input_dim(), "extract input");
    const Vector h1 = encode(net.extractor.first, x, Activation::relu);
    return encode(net.extractor.second, h1, Activation::relu);
}

std::vector<Vector> latents(const EvolvingNetwork& net, ConstSpan x) {
    std::vector<Vector> out;
    out.reserve(net.sae.size());
    Vector input = extract(net, x);
    for (const auto& layer : net.sae) {
        out.push_back(encode(layer, input, Activation::relu));
        input = out.back();
    }
    return out;
}

}  // namespace adcn
