#pragma once

// JSON documents for networks and cluster sets. Doubles are written with
// round-trip precision, so save/load is bit-exact; +inf sentinels are stored
// as null.

#include <filesystem>

#include <nlohmann/json.hpp>

#include "adcn/autoencoder.hpp"
#include "adcn/clustering.hpp"

namespace adcn {

inline constexpr int kNetworkFormatVersion = 1;

void to_json(nlohmann::json& j, const Matrix& m);
void from_json(const nlohmann::json& j, Matrix& m);
void to_json(nlohmann::json& j, const RunningStat& s);
void from_json(const nlohmann::json& j, RunningStat& s);
void to_json(nlohmann::json& j, const AeLayer& layer);
void from_json(const nlohmann::json& j, AeLayer& layer);
void to_json(nlohmann::json& j, const LayerEvolution& ev);
void from_json(const nlohmann::json& j, LayerEvolution& ev);
void to_json(nlohmann::json& j, const EvolvingNetwork& net);
void from_json(const nlohmann::json& j, EvolvingNetwork& net);
void to_json(nlohmann::json& j, const Cluster& c);
void from_json(const nlohmann::json& j, Cluster& c);
void to_json(nlohmann::json& j, const LayerClusters& lc);
void from_json(const nlohmann::json& j, LayerClusters& lc);

[[nodiscard]] nlohmann::json network_document(const EvolvingNetwork& net);
// Throws std::runtime_error on a wrong format tag or version.
[[nodiscard]] EvolvingNetwork network_from_document(const nlohmann::json& doc);

void save_network(const std::filesystem::path& path, const EvolvingNetwork& net);
[[nodiscard]] EvolvingNetwork load_network(const std::filesystem::path& path);

}  // namespace adcn
