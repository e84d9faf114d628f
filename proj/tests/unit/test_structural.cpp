#include <doctest.h>

#include <cmath>
#include <random>

#include "adcn/structural.hpp"
#include "gradcheck.hpp"

using namespace adcn;

namespace {

Vector uniform_batch(Rng& rng, std::size_t n, double lo, double hi) { return gradcheck::uniform(rng, n, lo, hi); }

RunningStat stat_of(std::initializer_list<double> values) {
    RunningStat s;
    for (double v : values) s = stat_update(s, v);
    return s;
}

EvolvingNetwork small_network(Rng& rng) {
    EvolvingNetwork net = make_network(NetworkShape{4, 8, 6, 5, 10}, rng);
    net.sae.push_back(make_layer(5, 3, rng));
    net.evolution.push_back(make_evolution(3, 5, 30));
    net.check_consistency();
    return net;
}

}  // namespace

TEST_CASE("ns_estimate: first sample has zero variance") {
    Rng rng(1);
    EvolvingNetwork net = small_network(rng);
    const Vector in = gradcheck::uniform(rng, 6, 0.0, 1.0);
    const NsEstimate ns = ns_estimate(net, 0, in);
    const Vector recon = decode(net.sae[0], encode(net.sae[0], in, Activation::relu), Activation::relu);
    CHECK(ns.variance == 0.0);
    CHECK(ns.bias2 == doctest::Approx(mse(in, recon)).epsilon(1e-12));
    CHECK_THROWS_AS((void)ns_estimate(net, 2, in), std::out_of_range);
}

TEST_CASE("ns_estimate: constant input with frozen parameters") {
    Rng rng(2);
    EvolvingNetwork net = small_network(rng);
    const Vector in = gradcheck::uniform(rng, 6, 0.0, 1.0);
    NsEstimate ns;
    for (int i = 0; i < 2000; ++i) ns = ns_estimate(net, 0, in);
    CHECK(ns.variance <= 1e-12);
}

TEST_CASE("ns_update matches a scalar EWMA oracle") {
    ReconMoments m;
    const Vector target{0.5, 1.0};
    const Vector r1{0.2, 0.9}, r2{0.6, 0.3};
    (void)ns_update(m, target, r1);
    const NsEstimate ns = ns_update(m, target, r2);
    double bias2 = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        const double e1 = 0.999 * r1[i] + 0.001 * r2[i];
        const double e2 = 0.999 * r1[i] * r1[i] + 0.001 * r2[i] * r2[i];
        bias2 += (target[i] - e1) * (target[i] - e1) / 2.0;
        var += (e2 - e1 * e1) / 2.0;
    }
    CHECK(std::abs(ns.bias2 - bias2) <= 1e-10);
    CHECK(std::abs(ns.variance - var) <= 1e-10);
}

TEST_CASE("dynamic confidence") {
    CHECK(dynamic_confidence(0.0) == 2.0);
    CHECK(dynamic_confidence(1e6) == doctest::Approx(0.7));
    CHECK(dynamic_confidence(5.0) > 0.7);
    CHECK(dynamic_confidence(5.0) < dynamic_confidence(1.0));
}

TEST_CASE("check_grow") {
    SUBCASE("constant bias signal holds with equality") {
        const RunningStat s = stat_of({0.3, 0.3, 0.3});
        CHECK(s.min_std == 0.0);
        CHECK(check_grow(s, 0.3));
    }
    SUBCASE("needs a second observation") {
        CHECK_FALSE(check_grow(stat_of({0.3}), 0.3));
    }
    SUBCASE("a falling bias never grows") {
        RunningStat s;
        for (int i = 0; i < 200; ++i) {
            const double b = 1.0 / (1.0 + i);
            s = stat_update(s, b);
            if (i > 2) CHECK_FALSE(check_grow(s, b));
        }
    }
    SUBCASE("a jump in bias grows") {
        RunningStat s;
        Rng rng(3);
        std::uniform_real_distribution<double> u(0.09, 0.11);
        for (int i = 0; i < 500; ++i) s = stat_update(s, u(rng));
        for (int i = 0; i < 200; ++i) s = stat_update(s, 2.0);
        CHECK(check_grow(s, 2.0));
    }
}

TEST_CASE("check_prune") {
    SUBCASE("just after a reset it cannot fire") {
        const RunningStat s = stat_reset_minima(stat_of({0.1, 0.5, 0.9}));
        CHECK_FALSE(check_prune(s, 0.9));
    }
    SUBCASE("boundary around min_mean + 2 k2 min_std") {
        RunningStat s;
        s.count = 10;
        s.min_mean = 1.0;
        s.min_std = 0.1;
        const double var_now = 0.0;  // k2 = 2, threshold 1 + 0.4
        s.m2 = 0.1 * 0.1 * 10.0;     // std 0.1
        s.mean = 1.3 - 1e-9;
        CHECK_FALSE(check_prune(s, var_now));
        s.mean = 1.3 + 1e-9;
        CHECK(check_prune(s, var_now));
    }
}

TEST_CASE("grow after reset never prunes on the same sample") {
    Rng rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t grows = 0;
    for (int stream = 0; stream < 10000; ++stream) {
        RunningStat bias, var;
        for (int i = 0; i < 30; ++i) {
            const double b = u(rng) * (1.0 + i % 7), v = u(rng) * u(rng);
            bias = stat_update(bias, b);
            var = stat_update(var, v);
            if (check_grow(bias, b)) {
                ++grows;
                bias = stat_reset_minima(bias);
                var = stat_reset_minima(var);
                CHECK_FALSE(check_prune(var, v));
            }
        }
    }
    CHECK(grows > 0);
}

TEST_CASE("grow_node") {
    Rng rng(5);
    AeLayer l = make_layer(4, 3, rng);
    gradcheck::randomize_biases(l, rng);
    const AeLayer before = l;
    grow_node(l, rng);
    CHECK(l.hidden_dim() == 4);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 4; ++c) CHECK(l.weight(r, c) == before.weight(r, c));
    }
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(l.weight(3, c)) <= 0.5);
    CHECK(l.enc_bias[3] == 0.0);
    CHECK(l.dec_bias == before.dec_bias);
    CHECK(l.vel_weight.rows() == 4);
    CHECK(l.vel_enc_bias.size() == 4);

    // Zeroing the new row gives back the old reconstruction.
    const Vector x{0.1, 0.4, 0.6, 0.9};
    AeLayer ablated = l;
    for (std::size_t c = 0; c < 4; ++c) ablated.weight(3, c) = 0.0;
    CHECK(decode(ablated, encode(ablated, x, Activation::relu), Activation::relu) ==
          decode(before, encode(before, x, Activation::relu), Activation::relu));
}

TEST_CASE("grow_network_node keeps the stack aligned") {
    Rng rng(6);
    EvolvingNetwork net = small_network(rng);
    const EvolvingNetwork before = net;
    grow_network_node(net, 0, rng);
    net.check_consistency();
    CHECK(net.sae[0].hidden_dim() == 6);
    CHECK(net.sae[1].input_dim() == 6);
    CHECK(net.evolution[0].activity.mean_abs.size() == 6);
    CHECK(net.extractor == before.extractor);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 5; ++c) CHECK(net.sae[1].weight(r, c) == before.sae[1].weight(r, c));
    }

    EvolvingNetwork capped = small_network(rng);
    capped.evolution[1].max_width = 3;
    CHECK_THROWS_AS(grow_network_node(capped, 1, rng), std::length_error);
}

TEST_CASE("prune_node") {
    Rng rng(7);
    SUBCASE("dead node goes first") {
        AeLayer l = make_layer(3, 4, rng);
        const auto removed = prune_node(l, Vector{0.4, 0.0, 0.2, 0.9});
        REQUIRE(removed.has_value());
        CHECK(*removed == 1);
        CHECK(l.hidden_dim() == 3);
    }
    SUBCASE("ties take the lowest index") {
        CHECK(prune_target(Vector{0.5, 0.5, 0.5}) == 0);
    }
    SUBCASE("a single node is never removed") {
        AeLayer l = make_layer(3, 1, rng);
        CHECK_FALSE(prune_node(l, Vector{0.0}).has_value());
        CHECK(l.hidden_dim() == 1);
    }
    SUBCASE("removing a zero-output node keeps reconstructions") {
        AeLayer l = make_layer(3, 4, rng);
        for (std::size_t c = 0; c < 3; ++c) l.weight(2, c) = -std::abs(l.weight(2, c));
        l.enc_bias[2] = -1.0;  // inputs are nonnegative, so node 2 never fires
        const Vector x{0.3, 0.8, 0.1};
        const Vector before = decode(l, encode(l, x, Activation::relu), Activation::relu);
        const auto removed = prune_node(l, Vector{0.5, 0.4, 0.0, 0.3});
        CHECK(*removed == 2);
        const Vector after = decode(l, encode(l, x, Activation::relu), Activation::relu);
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(after[i] - before[i]) <= 1e-12);
    }
    SUBCASE("network prune removes the downstream column") {
        EvolvingNetwork net = small_network(rng);
        net.evolution[0].activity.mean_abs = {0.3, 0.2, 0.1, 0.05, 0.4};
        const EvolvingNetwork before = net;
        const auto removed = prune_network_node(net, 0);
        CHECK(*removed == 3);
        net.check_consistency();
        CHECK(net.sae[1].input_dim() == 4);
        CHECK(net.sae[1].weight(0, 3) == before.sae[1].weight(0, 4));
    }
}

TEST_CASE("hoeffding_epsilon") {
    CHECK(hoeffding_epsilon(2000, 0.001) == doctest::Approx(0.041557).epsilon(1e-5));
    CHECK(hoeffding_epsilon(10, 1.0 - 1e-12) < 1e-5);
    CHECK(hoeffding_epsilon(400, 0.01) == doctest::Approx(2.0 * hoeffding_epsilon(1600, 0.01)).epsilon(1e-14));
    CHECK(hoeffding_epsilon(100, 0.05, 3.0) == doctest::Approx(3.0 * hoeffding_epsilon(100, 0.05)).epsilon(1e-14));
    CHECK_THROWS((void)hoeffding_epsilon(0, 0.1));
    CHECK_THROWS((void)hoeffding_epsilon(10, 0.0));
    CHECK_THROWS((void)hoeffding_epsilon(10, 1.0));
}

TEST_CASE("detect_drift") {
    SUBCASE("identical constant batches are stable") {
        DriftDetector det;
        CHECK(det.detect(Vector(500, 0.4)) == DriftState::stable);
        CHECK(det.detect(Vector(500, 0.4)) == DriftState::stable);
    }
    SUBCASE("a jump from U(0,0.1) to U(0.9,1) is drift") {
        Rng rng(8);
        DriftDetector det;
        CHECK(det.detect(uniform_batch(rng, 500, 0.0, 0.1)) == DriftState::stable);
        CHECK(det.detect(uniform_batch(rng, 500, 0.9, 1.0)) == DriftState::drift);
    }
    SUBCASE("first batch only stores the signal") {
        DriftDetector det;
        CHECK_FALSE(det.previous().has_value());
        CHECK(det.detect(Vector{1, 2, 3}) == DriftState::stable);
        CHECK(det.previous() == Vector{1, 2, 3});
        det.remember(Vector{4});
        CHECK(det.previous() == Vector{4});
        CHECK_THROWS(det.detect(Vector{}));
        CHECK_THROWS(det.remember(Vector{}));
    }
    SUBCASE("zero-variance signals are always stable") {
        Rng rng(9);
        std::uniform_real_distribution<double> u(-5, 5);
        for (int i = 0; i < 50; ++i) {
            const double c = u(rng);
            CHECK(drift_test(Vector(100 + i, c), DriftConfig{}) == DriftState::stable);
        }
    }
    SUBCASE("stationary uniform noise rarely alarms") {
        std::size_t flagged = 0, tested = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(1000 + seed);
            DriftDetector det;
            for (int b = 0; b < 100; ++b) {
                const DriftState s = det.detect(uniform_batch(rng, 1000, 0.0, 1.0));
                if (b > 0) {
                    ++tested;
                    flagged += s == DriftState::drift;
                }
            }
        }
        CHECK(static_cast<double>(flagged) <= 0.05 * static_cast<double>(tested));
    }
    SUBCASE("warning followed by warning escalates") {
        // Build a window whose gap lands between the warning and drift bounds.
        DriftConfig cfg{0.001, 0.4, 0.001};
        Rng rng(10);
        std::size_t escalations = 0;
        for (int trial = 0; trial < 200; ++trial) {
            DriftDetector det(cfg);
            const double step = 0.03;
            (void)det.detect(uniform_batch(rng, 1000, 0.0, 1.0));
            const DriftState first = det.detect(uniform_batch(rng, 1000, step, 1.0 + step));
            if (first != DriftState::warning) continue;
            const DriftState second = det.detect(uniform_batch(rng, 1000, 2 * step, 1.0 + 2 * step));
            CHECK(second != DriftState::warning);
            escalations += second == DriftState::drift;
        }
        CHECK(escalations > 0);
    }
    SUBCASE("invalid significance levels") {
        CHECK_THROWS(DriftDetector(DriftConfig{0.001, 0.001, 0.005}));
        CHECK_THROWS(DriftDetector(DriftConfig{0.0, 0.005, 0.001}));
    }
}

TEST_CASE("add_layer") {
    Rng rng(11);
    EvolvingNetwork wide = make_network(NetworkShape{4, 8, 6, 96, 10}, rng);
    add_layer(wide, rng);
    CHECK(wide.sae.back().hidden_dim() == 48);
    CHECK(wide.sae.back().input_dim() == 96);
    CHECK(wide.evolution.size() == 2);

    EvolvingNetwork narrow = make_network(NetworkShape{4, 8, 6, 3, 10}, rng);
    add_layer(narrow, rng);
    CHECK(narrow.sae.back().hidden_dim() == 2);

    EvolvingNetwork net = small_network(rng);
    const Vector x{0.2, 0.4, 0.6, 0.8};
    const ForwardRecord before = forward_stack(net, x);
    const EvolvingNetwork copy = net;
    add_layer(net, rng);
    net.check_consistency();
    const ForwardRecord after = forward_stack(net, x);
    CHECK(after.latents.size() == before.latents.size() + 1);
    for (std::size_t l = 0; l < before.latents.size(); ++l) {
        CHECK(after.latents[l] == before.latents[l]);
        CHECK(net.sae[l] == copy.sae[l]);
    }
}
