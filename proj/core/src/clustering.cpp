#include "adcn/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adcn {

std::uint64_t LayerClusters::total_support() const noexcept {
    std::uint64_t s = 0;
    for (const auto& c : clusters) s += c.support;
    return s;
}

Winner winning_cluster(const LayerClusters& lc, ConstSpan h) {
    if (lc.clusters.empty()) throw std::logic_error("winning_cluster: no clusters");
    Winner w{0, l2_distance(lc.clusters[0].centroid, h)};
    for (std::size_t j = 1; j < lc.clusters.size(); ++j) {
        const double d = l2_distance(lc.clusters[j].centroid, h);
        if (d < w.distance) w = {j, d};
    }
    return w;
}

bool check_cluster_grow(double distance, const RunningStat& win_stat) noexcept {
    const double k_win = 2.0 * std::exp(-distance) + 2.0;
    return distance > win_stat.mean + k_win * win_stat.std();
}

void add_cluster(LayerClusters& lc, ConstSpan h) {
    if (!lc.clusters.empty()) require_same_size(h.size(), lc.clusters.front().centroid.size(), "add_cluster");
    lc.clusters.push_back(Cluster{Vector(h.begin(), h.end()), 1, {}});
}

void update_centroid(Cluster& c, ConstSpan h) {
    require_same_size(h.size(), c.centroid.size(), "update_centroid");
    const double step = static_cast<double>(c.support + 1);
    for (std::size_t i = 0; i < h.size(); ++i) c.centroid[i] -= (c.centroid[i] - h[i]) / step;
    ++c.support;
}

ClusterStep cluster_step(LayerClusters& lc, ConstSpan h) {
    const Winner w = winning_cluster(lc, h);
    lc.win_stat = stat_update(lc.win_stat, w.distance);
    if (check_cluster_grow(w.distance, lc.win_stat)) {
        add_cluster(lc, h);
        return {lc.clusters.size() - 1, true};
    }
    update_centroid(lc.clusters[w.index], h);
    return {w.index, false};
}

void reassign_empty(LayerClusters& lc, std::span<const std::uint64_t> counts, Rng& rng) {
    require_same_size(counts.size(), lc.clusters.size(), "reassign_empty counts");
    std::vector<std::size_t> order(counts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    if (order.empty() || counts[order.front()] == 0) return;

    std::size_t quartile = (order.size() + 3) / 4;
    while (quartile > 1 && counts[order[quartile - 1]] == 0) --quartile;
    std::uniform_int_distribution<std::size_t> pick(0, quartile - 1);
    std::normal_distribution<double> noise(0.0, 1e-4);

    for (std::size_t j = lc.protected_prefix; j < lc.clusters.size(); ++j) {
        if (counts[j] != 0) continue;
        const std::size_t donor = order[pick(rng)];
        Vector c = lc.clusters[donor].centroid;
        for (double& v : c) v += noise(rng);
        lc.clusters[j].centroid = std::move(c);
        lc.clusters[j].support = 1;
    }
}

Vector allegiance(const LayerClusters& lc, ConstSpan h) {
    if (lc.clusters.empty()) throw std::logic_error("allegiance: no clusters");
    Vector dist(lc.clusters.size());
    for (std::size_t j = 0; j < dist.size(); ++j) dist[j] = l2_distance(lc.clusters[j].centroid, h);

    Vector a(dist.size());
    double peak = 0.0;
    for (std::size_t j = 0; j < dist.size(); ++j) {
        a[j] = std::exp(-dist[j]);
        peak = std::max(peak, a[j]);
    }
    if (peak > 0.0 && std::isnormal(peak)) {
        for (double& v : a) v /= peak;
        return a;
    }
    // Every centroid is far enough for exp to underflow: use the shifted form.
    const double nearest = *std::min_element(dist.begin(), dist.end());
    for (std::size_t j = 0; j < dist.size(); ++j) a[j] = std::exp(nearest - dist[j]);
    return a;
}

void compute_class_allegiance(LayerClusters& lc, std::span<const LabeledLatent> labeled, std::size_t num_classes) {
    if (num_classes == 0) throw std::invalid_argument("compute_class_allegiance: zero classes");
    std::vector<std::size_t> per_class(num_classes, 0);
    for (const auto& s : labeled) {
        if (s.label >= num_classes) throw std::out_of_range("compute_class_allegiance: label out of range");
        ++per_class[s.label];
    }
    for (auto& c : lc.clusters) c.class_allegiance.assign(num_classes, 0.0);
    for (const auto& s : labeled) {
        const Vector a = allegiance(lc, s.latent);
        for (std::size_t j = 0; j < a.size(); ++j) lc.clusters[j].class_allegiance[s.label] += a[j];
    }
    for (auto& c : lc.clusters) {
        for (std::size_t m = 0; m < num_classes; ++m) {
            if (per_class[m] > 0) c.class_allegiance[m] /= static_cast<double>(per_class[m]);
        }
    }
}

Vector layer_score(const LayerClusters& lc, ConstSpan h, std::size_t num_classes) {
    if (num_classes == 0) throw std::invalid_argument("layer_score: zero classes");
    const double uniform = 1.0 / static_cast<double>(num_classes);
    Vector raw(num_classes, 0.0);
    for (const auto& c : lc.clusters) {
        const double affinity = std::exp(-l2_distance(c.centroid, h));
        if (c.class_allegiance.size() == num_classes) {
            for (std::size_t m = 0; m < num_classes; ++m) raw[m] += c.class_allegiance[m] * affinity;
        } else {
            for (std::size_t m = 0; m < num_classes; ++m) raw[m] += uniform * affinity;
        }
    }
    return softmax(raw);
}

Prediction predict_from_latents(std::span<const LayerClusters> per_layer, std::span<const Vector> latents,
                                std::size_t num_classes) {
    require_same_size(per_layer.size(), latents.size(), "predict layer count");
    Prediction p{0, Vector(num_classes, 0.0)};
    for (std::size_t l = 0; l < latents.size(); ++l) {
        const Vector s = layer_score(per_layer[l], latents[l], num_classes);
        for (std::size_t m = 0; m < num_classes; ++m) p.score[m] += s[m];
    }
    p.label = argmax(p.score);
    return p;
}

Prediction predict(const EvolvingNetwork& net, std::span<const LayerClusters> per_layer, ConstSpan x,
                   std::size_t num_classes) {
    require_same_size(per_layer.size(), net.depth(), "predict layer count");
    const std::vector<Vector> h = latents(net, x);
    return predict_from_latents(per_layer, h, num_classes);
}

void append_coordinate(LayerClusters& lc) {
    for (auto& c : lc.clusters) c.centroid.push_back(0.0);
}

void erase_coordinate(LayerClusters& lc, std::size_t index) {
    for (auto& c : lc.clusters) {
        if (index >= c.centroid.size()) throw std::out_of_range("erase_coordinate");
        c.centroid.erase(c.centroid.begin() + static_cast<std::ptrdiff_t>(index));
    }
}

}  // namespace adcn
