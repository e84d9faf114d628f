#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "adcn/harness.hpp"
#include "adcn/serialize.hpp"

using namespace adcn;
using nlohmann::json;

namespace {

// A learner that has pretrained, streamed and grown, so every field is populated.
Learner trained_learner() {
    ExperimentConfig c;
    c.batch_size = 200;
    c.epochs = 3;
    c.seed = 11;
    c = c.resolved(3);
    const LabeledData data = gen_sea(2000, 0.1, 2);
    Learner l(c, 3, 2);
    l.pretrain(data.slice(0, 200).x);
    l.reveal_labels(data.slice(0, 200));
    for (const auto& b : batch_iter(data.slice(200, 1800), 200)) (void)l.process_batch(b);
    return l;
}

}  // namespace

TEST_CASE("matrix") {
    Matrix m(2, 3, {1.0, -2.5, 1e-300, 0.1, 1.0 / 3.0, -0.0});
    const json j = m;
    CHECK(j.at("rows") == 2);
    CHECK(j.at("cols") == 3);
    const Matrix back = j.get<Matrix>();
    CHECK(back == m);
    CHECK(std::signbit(back(1, 2)));
    CHECK(json(Matrix(0, 4)).get<Matrix>() == Matrix(0, 4));
    CHECK_THROWS(json({{"rows", 2}, {"cols", 2}, {"data", {1.0}}}).get<Matrix>());
}

TEST_CASE("running stat keeps infinite minima") {
    RunningStat fresh;
    const json j = fresh;
    CHECK(j.at("min_mean").is_null());
    CHECK(j.at("min_std").is_null());
    const RunningStat back = j.get<RunningStat>();
    CHECK(std::isinf(back.min_mean));
    CHECK(std::isinf(back.min_std));
    CHECK(back.count == 0);

    RunningStat s;
    for (double v : {0.3, 0.1, 0.7, 0.2}) s = stat_update(s, v);
    REQUIRE(s.count == 4);
    const RunningStat t = json(s).get<RunningStat>();
    CHECK(t.count == s.count);
    CHECK(t.mean == s.mean);
    CHECK(t.m2 == s.m2);
    CHECK(t.min_mean == s.min_mean);
    CHECK(t.min_std == s.min_std);
}

TEST_CASE("network and clusters round trip bit-exactly") {
    const Learner l = trained_learner();
    const EvolvingNetwork& net = l.network();
    REQUIRE(net.depth() >= 1);

    const EvolvingNetwork back = network_from_document(json::parse(network_document(net).dump()));
    CHECK(back == net);
    const Vector x{0.2, 0.9, 0.4};
    CHECK(forward_stack(back, x).latents == forward_stack(net, x).latents);

    for (const auto& lc : l.clusters()) {
        const LayerClusters copy = json::parse(json(lc).dump()).get<LayerClusters>();
        CHECK(copy == lc);
    }
}

TEST_CASE("documents are checked") {
    const json doc = network_document(trained_learner().network());
    CHECK(doc.at("format") == "adcn-network");
    CHECK(doc.at("version") == kNetworkFormatVersion);

    json wrong_format = doc;
    wrong_format["format"] = "something-else";
    CHECK_THROWS_AS((void)network_from_document(wrong_format), std::runtime_error);

    json wrong_version = doc;
    wrong_version["version"] = kNetworkFormatVersion + 1;
    CHECK_THROWS_AS((void)network_from_document(wrong_version), std::runtime_error);

    json one_layer = doc;
    one_layer["network"]["extractor"].erase(1);
    CHECK_THROWS((void)network_from_document(one_layer));

    json misaligned = doc;
    misaligned["network"]["sae"][0]["enc_bias"].push_back(0.0);
    CHECK_THROWS((void)network_from_document(misaligned));
}

TEST_CASE("save and load files") {
    const auto dir = std::filesystem::temp_directory_path() / "adcn_serialize_test";
    std::filesystem::create_directories(dir);
    const Learner l = trained_learner();
    save_network(dir / "net.json", l.network());
    CHECK(load_network(dir / "net.json") == l.network());
    CHECK_THROWS((void)load_network(dir / "missing.json"));
    {
        std::ofstream(dir / "garbage.json") << "{ not json";
    }
    CHECK_THROWS((void)load_network(dir / "garbage.json"));
    std::filesystem::remove_all(dir);
}
