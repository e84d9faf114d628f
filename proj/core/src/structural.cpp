#include "adcn/structural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adcn {

NsEstimate ns_update(ReconMoments& moments, ConstSpan target, ConstSpan recon, double decay) {
    require_same_size(target.size(), recon.size(), "ns target/reconstruction");
    if (!moments.initialized) {
        moments.mean.assign(recon.begin(), recon.end());
        moments.mean_sq.resize(recon.size());
        for (std::size_t i = 0; i < recon.size(); ++i) moments.mean_sq[i] = recon[i] * recon[i];
        moments.initialized = true;
    } else {
        require_same_size(moments.mean.size(), recon.size(), "ns moments");
        for (std::size_t i = 0; i < recon.size(); ++i) {
            moments.mean[i] = decay * moments.mean[i] + (1.0 - decay) * recon[i];
            moments.mean_sq[i] = decay * moments.mean_sq[i] + (1.0 - decay) * recon[i] * recon[i];
        }
    }
    NsEstimate ns;
    if (recon.empty()) return ns;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        const double b = target[i] - moments.mean[i];
        ns.bias2 += b * b;
        ns.variance += std::max(0.0, moments.mean_sq[i] - moments.mean[i] * moments.mean[i]);
    }
    const double n = static_cast<double>(recon.size());
    ns.bias2 /= n;
    ns.variance /= n;
    return ns;
}

NsEstimate ns_estimate(EvolvingNetwork& net, std::size_t layer_index, ConstSpan input) {
    if (layer_index >= net.sae.size()) throw std::out_of_range("ns_estimate: invalid layer index");
    const AeLayer& layer = net.sae[layer_index];
    const Vector h = encode(layer, input, Activation::relu);
    const Vector recon = decode(layer, h, Activation::relu);
    return ns_update(net.evolution[layer_index].recon, input, recon);
}

double dynamic_confidence(double signal) noexcept { return 1.3 * std::exp(-signal) + 0.7; }

bool check_grow(const RunningStat& bias_stat, double bias2_now) noexcept {
    const double k1 = dynamic_confidence(bias2_now);
    return bias_stat.mean + bias_stat.std() >= bias_stat.min_mean + k1 * bias_stat.min_std;
}

bool check_prune(const RunningStat& var_stat, double var_now) noexcept {
    const double k2 = dynamic_confidence(var_now);
    return var_stat.mean + var_stat.std() >= var_stat.min_mean + 2.0 * k2 * var_stat.min_std;
}

namespace {

Vector uniform_init(std::size_t n, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Vector v(n);
    for (double& e : v) e = dist(rng);
    return v;
}

}  // namespace

void grow_node(AeLayer& layer, Rng& rng) {
    const std::size_t u = layer.input_dim();
    layer.weight.append_row(uniform_init(u, u, rng));
    layer.vel_weight.append_row(Vector(u, 0.0));
    layer.enc_bias.push_back(0.0);
    layer.vel_enc_bias.push_back(0.0);
}

void grow_input(AeLayer& layer, Rng& rng) {
    const std::size_t u = layer.input_dim() + 1;
    layer.weight.append_col(uniform_init(layer.hidden_dim(), u, rng));
    layer.vel_weight.append_col(Vector(layer.hidden_dim(), 0.0));
    layer.dec_bias.push_back(0.0);
    layer.vel_dec_bias.push_back(0.0);
}

std::size_t prune_target(ConstSpan activation_means) {
    if (activation_means.empty()) throw std::invalid_argument("prune_target: no nodes");
    std::size_t best = 0;
    for (std::size_t i = 1; i < activation_means.size(); ++i) {
        if (activation_means[i] < activation_means[best]) best = i;
    }
    return best;
}

std::optional<std::size_t> prune_node(AeLayer& layer, ConstSpan activation_means) {
    require_same_size(activation_means.size(), layer.hidden_dim(), "prune_node activation means");
    if (layer.hidden_dim() < 2) return std::nullopt;
    const std::size_t idx = prune_target(activation_means);
    layer.weight.erase_row(idx);
    layer.vel_weight.erase_row(idx);
    layer.enc_bias.erase(layer.enc_bias.begin() + static_cast<std::ptrdiff_t>(idx));
    layer.vel_enc_bias.erase(layer.vel_enc_bias.begin() + static_cast<std::ptrdiff_t>(idx));
    return idx;
}

void prune_input(AeLayer& layer, std::size_t column) {
    layer.weight.erase_col(column);
    layer.vel_weight.erase_col(column);
    layer.dec_bias.erase(layer.dec_bias.begin() + static_cast<std::ptrdiff_t>(column));
    layer.vel_dec_bias.erase(layer.vel_dec_bias.begin() + static_cast<std::ptrdiff_t>(column));
}

void grow_network_node(EvolvingNetwork& net, std::size_t layer_index, Rng& rng) {
    if (layer_index >= net.sae.size()) throw std::out_of_range("grow: invalid layer index");
    LayerEvolution& ev = net.evolution[layer_index];
    if (net.sae[layer_index].hidden_dim() + 1 > ev.max_width) {
        throw std::length_error("grow: layer width cap exceeded");
    }
    grow_node(net.sae[layer_index], rng);
    ev.activity.mean_abs.push_back(0.0);
    ev.activity.count.push_back(0);
    if (layer_index + 1 < net.sae.size()) {
        grow_input(net.sae[layer_index + 1], rng);
        ReconMoments& next = net.evolution[layer_index + 1].recon;
        next.mean.push_back(0.0);
        next.mean_sq.push_back(0.0);
    }
}

std::optional<std::size_t> prune_network_node(EvolvingNetwork& net, std::size_t layer_index) {
    if (layer_index >= net.sae.size()) throw std::out_of_range("prune: invalid layer index");
    LayerEvolution& ev = net.evolution[layer_index];
    const auto removed = prune_node(net.sae[layer_index], ev.activity.mean_abs);
    if (!removed) return std::nullopt;
    const auto at = static_cast<std::ptrdiff_t>(*removed);
    ev.activity.mean_abs.erase(ev.activity.mean_abs.begin() + at);
    ev.activity.count.erase(ev.activity.count.begin() + at);
    if (layer_index + 1 < net.sae.size()) {
        prune_input(net.sae[layer_index + 1], *removed);
        ReconMoments& next = net.evolution[layer_index + 1].recon;
        next.mean.erase(next.mean.begin() + at);
        next.mean_sq.erase(next.mean_sq.begin() + at);
    }
    return removed;
}

double hoeffding_epsilon(std::size_t size, double alpha, double range) {
    if (size < 1) throw std::invalid_argument("hoeffding_epsilon: size must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("hoeffding_epsilon: alpha must be in (0,1)");
    if (!(range >= 0.0)) throw std::invalid_argument("hoeffding_epsilon: range must be >= 0");
    return range * std::sqrt(std::log(1.0 / alpha) / (2.0 * static_cast<double>(size)));
}

std::string_view to_string(DriftState s) noexcept {
    switch (s) {
        case DriftState::stable: return "stable";
        case DriftState::warning: return "warning";
        case DriftState::drift: return "drift";
    }
    return "unknown";
}

void DriftConfig::validate() const {
    auto in_unit = [](double a) { return a > 0.0 && a < 1.0; };
    if (!in_unit(alpha_x)) throw std::invalid_argument("drift: alpha_x must be in (0,1)");
    if (!in_unit(alpha_w) || !in_unit(alpha_d)) throw std::invalid_argument("drift: alphas must be in (0,1)");
    if (!(alpha_d < alpha_w)) throw std::invalid_argument("drift: alpha_d must be smaller than alpha_w");
}

DriftDetector::DriftDetector(DriftConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void DriftDetector::reset() {
    prev_.reset();
    state_ = DriftState::stable;
}

DriftState drift_test(ConstSpan s, const DriftConfig& cfg) {
    if (s.empty()) throw std::invalid_argument("drift_test: empty signal");
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double range = *hi - *lo;
    if (range < 1e-12) return DriftState::stable;

    const std::size_t n = s.size();
    const double s_mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
    const double eps_s = hoeffding_epsilon(n, cfg.alpha_x, range);

    for (const double frac : {0.25, 0.5, 0.75}) {
        const auto cut = std::max<std::size_t>(1, static_cast<std::size_t>(frac * static_cast<double>(n)));
        if (cut >= n) continue;
        const double t_mean = std::accumulate(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(cut), 0.0) /
                              static_cast<double>(cut);
        const double eps_t = hoeffding_epsilon(cut, cfg.alpha_x, range);
        // The prefix sits below the whole window: the mean rose after the cut.
        if (t_mean + eps_t > s_mean + eps_s) continue;

        const double gap = std::abs(s_mean - t_mean);
        const double shape = static_cast<double>(n - cut) / (2.0 * static_cast<double>(cut) * static_cast<double>(n));
        const double eps_d = range * std::sqrt(shape * std::log(1.0 / cfg.alpha_d));
        const double eps_w = range * std::sqrt(shape * std::log(1.0 / cfg.alpha_w));
        if (gap >= eps_d) return DriftState::drift;
        if (gap >= eps_w) return DriftState::warning;
        return DriftState::stable;
    }
    return DriftState::stable;
}

DriftState DriftDetector::detect(ConstSpan current) {
    if (current.empty()) throw std::invalid_argument("detect_drift: empty signal");
    if (!prev_) {
        prev_ = Vector(current.begin(), current.end());
        state_ = DriftState::stable;
        return state_;
    }
    Vector window;
    window.reserve(prev_->size() + current.size());
    window.insert(window.end(), prev_->begin(), prev_->end());
    window.insert(window.end(), current.begin(), current.end());
    prev_ = Vector(current.begin(), current.end());

    DriftState raw = drift_test(window, cfg_);
    if (state_ == DriftState::warning && raw != DriftState::stable) raw = DriftState::drift;
    state_ = raw;
    return state_;
}

void DriftDetector::remember(ConstSpan signal) {
    if (signal.empty()) throw std::invalid_argument("detect_drift: empty signal");
    prev_ = Vector(signal.begin(), signal.end());
}

void add_layer(EvolvingNetwork& net, Rng& rng, std::size_t width_cap_factor) {
    if (net.sae.empty()) throw std::logic_error("add_layer: network has no SAE layer");
    const std::size_t in = net.sae.back().hidden_dim();
    const std::size_t width = std::max<std::size_t>(2, in / 2);
    net.sae.push_back(make_layer(in, width, rng));
    net.evolution.push_back(make_evolution(width, in, width * width_cap_factor));
}

std::string_view to_string(EvolutionKind k) noexcept {
    switch (k) {
        case EvolutionKind::grow_node: return "grow_node";
        case EvolutionKind::prune_node: return "prune_node";
        case EvolutionKind::add_layer: return "add_layer";
        case EvolutionKind::drift: return "drift";
        case EvolutionKind::warning: return "warning";
        case EvolutionKind::add_cluster: return "add_cluster";
    }
    return "unknown";
}

}  // namespace adcn
