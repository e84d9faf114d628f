#include "adcn/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace adcn {

using nlohmann::json;

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double null_is_inf(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

void to_json(json& j, const Matrix& m) { j = json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

void from_json(const json& j, Matrix& m) {
    m = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
               j.at("data").get<std::vector<double>>());
}

void to_json(json& j, const RunningStat& s) {
    j = json{{"count", s.count},
             {"mean", s.mean},
             {"m2", s.m2},
             {"min_mean", finite_or_null(s.min_mean)},
             {"min_std", finite_or_null(s.min_std)}};
}

void from_json(const json& j, RunningStat& s) {
    s.count = j.at("count").get<std::uint64_t>();
    s.mean = j.at("mean").get<double>();
    s.m2 = j.at("m2").get<double>();
    s.min_mean = null_is_inf(j.at("min_mean"));
    s.min_std = null_is_inf(j.at("min_std"));
}

void to_json(json& j, const AeLayer& l) {
    j = json{{"weight", l.weight},         {"enc_bias", l.enc_bias},         {"dec_bias", l.dec_bias},
             {"vel_weight", l.vel_weight}, {"vel_enc_bias", l.vel_enc_bias}, {"vel_dec_bias", l.vel_dec_bias}};
}

void from_json(const json& j, AeLayer& l) {
    j.at("weight").get_to(l.weight);
    j.at("enc_bias").get_to(l.enc_bias);
    j.at("dec_bias").get_to(l.dec_bias);
    j.at("vel_weight").get_to(l.vel_weight);
    j.at("vel_enc_bias").get_to(l.vel_enc_bias);
    j.at("vel_dec_bias").get_to(l.vel_dec_bias);
}

void to_json(json& j, const LayerEvolution& ev) {
    j = json{{"bias_stat", ev.bias_stat},
             {"var_stat", ev.var_stat},
             {"recon_mean", ev.recon.mean},
             {"recon_mean_sq", ev.recon.mean_sq},
             {"recon_initialized", ev.recon.initialized},
             {"activity_mean_abs", ev.activity.mean_abs},
             {"activity_count", ev.activity.count},
             {"max_width", ev.max_width}};
}

void from_json(const json& j, LayerEvolution& ev) {
    j.at("bias_stat").get_to(ev.bias_stat);
    j.at("var_stat").get_to(ev.var_stat);
    j.at("recon_mean").get_to(ev.recon.mean);
    j.at("recon_mean_sq").get_to(ev.recon.mean_sq);
    j.at("recon_initialized").get_to(ev.recon.initialized);
    j.at("activity_mean_abs").get_to(ev.activity.mean_abs);
    j.at("activity_count").get_to(ev.activity.count);
    j.at("max_width").get_to(ev.max_width);
}

void to_json(json& j, const EvolvingNetwork& net) {
    j = json{{"extractor", {net.extractor.first, net.extractor.second}},
             {"sae", net.sae},
             {"evolution", net.evolution}};
}

void from_json(const json& j, EvolvingNetwork& net) {
    const auto& fe = j.at("extractor");
    if (!fe.is_array() || fe.size() != 2) throw std::runtime_error("network document: extractor needs two layers");
    fe.at(0).get_to(net.extractor.first);
    fe.at(1).get_to(net.extractor.second);
    j.at("sae").get_to(net.sae);
    j.at("evolution").get_to(net.evolution);
    net.check_consistency();
}

void to_json(json& j, const Cluster& c) {
    j = json{{"centroid", c.centroid}, {"support", c.support}, {"class_allegiance", c.class_allegiance}};
}

void from_json(const json& j, Cluster& c) {
    j.at("centroid").get_to(c.centroid);
    j.at("support").get_to(c.support);
    j.at("class_allegiance").get_to(c.class_allegiance);
}

void to_json(json& j, const LayerClusters& lc) {
    j = json{{"clusters", lc.clusters}, {"win_stat", lc.win_stat}, {"protected_prefix", lc.protected_prefix}};
}

void from_json(const json& j, LayerClusters& lc) {
    j.at("clusters").get_to(lc.clusters);
    j.at("win_stat").get_to(lc.win_stat);
    j.at("protected_prefix").get_to(lc.protected_prefix);
}

json network_document(const EvolvingNetwork& net) {
    return json{{"format", "adcn-network"}, {"version", kNetworkFormatVersion}, {"network", net}};
}

EvolvingNetwork network_from_document(const json& doc) {
    if (doc.value("format", "") != "adcn-network") throw std::runtime_error("not an adcn-network document");
    if (doc.value("version", 0) != kNetworkFormatVersion) {
        throw std::runtime_error("unsupported adcn-network version");
    }
    return doc.at("network").get<EvolvingNetwork>();
}

void save_network(const std::filesystem::path& path, const EvolvingNetwork& net) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot write");
    out << network_document(net).dump() << '\n';
}

EvolvingNetwork load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open");
    return network_from_document(json::parse(in));
}

}  // namespace adcn
