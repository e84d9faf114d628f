#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "adcn/streams.hpp"

using namespace adcn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("adcn_streams_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

LabeledData labeled_range(std::size_t n, std::size_t classes, std::size_t dim = 2) {
    LabeledData d;
    d.x = Matrix(0, dim);
    for (std::size_t i = 0; i < n; ++i) d.push_back(Vector(dim, static_cast<double>(i)), i % classes);
    return d;
}

}  // namespace

TEST_CASE("gen_sea") {
    const std::size_t n = 40000;
    const LabeledData sea = gen_sea(n, 0.0, 7);
    CHECK(sea.size() == n);
    CHECK(sea.dim() == 3);
    for (double v : sea.x.data()) CHECK((v >= 0.0 && v <= 1.0));

    SUBCASE("labels follow f1 + f2 > theta per segment") {
        for (std::size_t i = 0; i < n; ++i) {
            const double theta = kSeaThresholds[i / (n / 4)];
            const bool above = 10.0 * sea.x(i, 0) + 10.0 * sea.x(i, 1) > theta;
            REQUIRE(sea.labels[i] == (above ? 1u : 0u));
        }
    }
    SUBCASE("thresholds switch exactly at quarter boundaries") {
        CHECK(sea_threshold(n / 4 - 1, n) == 8.0);
        CHECK(sea_threshold(n / 4, n) == 9.0);
        CHECK(sea_threshold(n / 2 - 1, n) == 9.0);
        CHECK(sea_threshold(n / 2, n) == 7.0);
        CHECK(sea_threshold(3 * n / 4, n) == 9.5);
        CHECK(sea_threshold(n - 1, n) == 9.5);
        // (5, 5) under theta = 8 is class 1.
        CHECK(5.0 + 5.0 > sea_threshold(0, n));
    }
    SUBCASE("class balance per segment") {
        // P(f1 + f2 <= theta) = theta^2 / 200 on [0,10]^2 for theta <= 10.
        const LabeledData big = gen_sea(40000, 0.0, 3);
        for (std::size_t s = 0; s < 4; ++s) {
            std::size_t ones = 0;
            for (std::size_t i = s * 10000; i < (s + 1) * 10000; ++i) ones += big.labels[i];
            const double theta = kSeaThresholds[s];
            const double expected = 1.0 - theta * theta / 200.0;
            CHECK(static_cast<double>(ones) / 10000.0 == doctest::Approx(expected).epsilon(0.03));
            CHECK(ones >= 3000);
        }
    }
    SUBCASE("noise flips roughly that fraction") {
        const LabeledData clean = gen_sea(20000, 0.0, 5);
        const LabeledData noisy = gen_sea(20000, 0.1, 5);
        std::size_t flipped = 0;
        for (std::size_t i = 0; i < clean.size(); ++i) {
            const double theta = sea_threshold(i, 20000);
            const bool above = 10.0 * noisy.x(i, 0) + 10.0 * noisy.x(i, 1) > theta;
            flipped += noisy.labels[i] != (above ? 1u : 0u);
        }
        CHECK(flipped == doctest::Approx(2000).epsilon(0.1));
    }
    SUBCASE("seeded and validated") {
        CHECK(gen_sea(500, 0.1, 9) == gen_sea(500, 0.1, 9));
        CHECK_FALSE(gen_sea(500, 0.1, 9) == gen_sea(500, 0.1, 10));
        CHECK_THROWS((void)gen_sea(10, 1.0, 1));
        CHECK_THROWS((void)gen_sea(10, -0.1, 1));
        CHECK_THROWS((void)gen_sea(0, 0.0, 1));
    }
}

TEST_CASE("gen_hyperplane") {
    SUBCASE("no drift: label is mean(x) > 0.5") {
        const LabeledData hp = gen_hyperplane(5000, 4, 0.0, 11);
        for (std::size_t i = 0; i < hp.size(); ++i) {
            const auto row = hp.x.row(i);
            const double mean = std::accumulate(row.begin(), row.end(), 0.0) / 4.0;
            REQUIRE(hp.labels[i] == (4.0 * mean > 2.0 ? 1u : 0u));
        }
        for (double v : hp.x.data()) CHECK((v >= 0.0 && v <= 1.0));
    }
    SUBCASE("the boundary moves under drift") {
        // Near the start the weights are still close to 1, so the labels follow
        // the mean rule; by the end the boundary has moved away from it.
        const std::size_t n = 100000;
        const LabeledData hp = gen_hyperplane(n, 4, 0.001, 12);
        std::size_t start_agree = 0, end_agree = 0;
        const std::size_t window = 100;
        for (std::size_t i = 0; i < window; ++i) {
            const auto a = hp.x.row(i);
            const auto b = hp.x.row(n - window + i);
            const double ma = std::accumulate(a.begin(), a.end(), 0.0) / 4.0;
            const double mb = std::accumulate(b.begin(), b.end(), 0.0) / 4.0;
            start_agree += hp.labels[i] == (ma > 0.5 ? 1u : 0u);
            end_agree += hp.labels[n - window + i] == (mb > 0.5 ? 1u : 0u);
        }
        CHECK(start_agree >= window * 95 / 100);
        CHECK(end_agree <= window * 95 / 100);
    }
    SUBCASE("seeded and validated") {
        CHECK(gen_hyperplane(800, 5, 0.001, 1) == gen_hyperplane(800, 5, 0.001, 1));
        CHECK(gen_hyperplane(800, 5, 0.001, 1).dim() == 5);
        CHECK_THROWS((void)gen_hyperplane(10, 1, 0.0, 1));
    }
}

TEST_CASE("gen_gaussian_classes") {
    const LabeledData g = gen_gaussian_classes(300, 10, 8, 0.05, 4);
    CHECK(g.size() == 3000);
    CHECK(g.num_classes() == 10);
    for (double v : g.x.data()) CHECK((v >= 0.0 && v <= 1.0));
    std::vector<std::size_t> count(10, 0);
    for (auto y : g.labels) ++count[y];
    for (auto c : count) CHECK(c == 300);

    // Class means are far apart compared to the spread.
    std::vector<Vector> mean(10, Vector(8, 0.0));
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t k = 0; k < 8; ++k) mean[g.labels[i]][k] += g.x(i, k) / 300.0;
    }
    for (std::size_t a = 0; a < 10; ++a) {
        for (std::size_t b = a + 1; b < 10; ++b) CHECK(l2_distance(mean[a], mean[b]) > 0.5);
    }
    CHECK(gen_gaussian_classes(10, 3, 2, 0.1, 1) == gen_gaussian_classes(10, 3, 2, 0.1, 1));
}

TEST_CASE("rotate_image") {
    SUBCASE("zero degrees is the identity") {
        Vector img(16);
        std::iota(img.begin(), img.end(), 0.0);
        const Vector out = rotate_image(img, 4, 0.0);
        for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(out[i] - img[i]) <= 1e-9);
    }
    SUBCASE("ninety degrees matches a hand rotation") {
        const double pattern[4][4] = {{1, 2, 0, 0}, {0, 3, 0, 0}, {0, 0, 0, 4}, {5, 0, 0, 6}};
        Vector img;
        for (auto& row : pattern) img.insert(img.end(), std::begin(row), std::end(row));
        const Vector out = rotate_image(img, 4, 90.0);
        // Counter-clockwise in row-down image coordinates: out[r][c] = in[c][3 - r].
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(out[r * 4 + c] - pattern[c][3 - r]) <= 1e-9);
        }
    }
    SUBCASE("mass of a centered blob is conserved") {
        const std::size_t side = 28;
        Vector blob(side * side);
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) {
                const double dr = r - 13.5, dc = c - 13.5;
                blob[r * side + c] = std::exp(-(dr * dr + dc * dc) / (2.0 * 9.0));
            }
        }
        const double before = std::accumulate(blob.begin(), blob.end(), 0.0);
        for (double deg : {17.0, 45.0, 77.0, 120.0}) {
            const Vector out = rotate_image(blob, side, deg);
            CHECK(std::accumulate(out.begin(), out.end(), 0.0) == doctest::Approx(before).epsilon(0.02));
        }
    }
}

TEST_CASE("make_rotation_tasks") {
    LabeledData base;
    base.x = Matrix(0, 16);
    Rng rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < 400; ++i) {
        Vector v(16);
        for (auto& e : v) e = u(rng);
        base.push_back(v, i % 2);
    }
    const TaskSplit split{20, 5, 20, true};
    const std::vector<AngleRange> zero{{0.0, 0.0}, {0.0, 0.0}};
    const TaskStream same = make_rotation_tasks(base, zero, 3, split);
    CHECK(same.tasks.size() == 2);
    CHECK(same.tasks[0].pretrain.x.row(0)[5] == base.x.row(0)[5]);
    CHECK(same.tasks[1].pretrain.x.row(0)[7] == base.x.row(200)[7]);

    const std::vector<AngleRange> angles{{0, 30}, {31, 60}};
    const TaskStream rot = make_rotation_tasks(base, angles, 3, split);
    CHECK(rot.tasks[1].pretrain.labels == same.tasks[1].pretrain.labels);
    CHECK_FALSE(rot.tasks[1].pretrain.x == same.tasks[1].pretrain.x);

    LabeledData odd;
    odd.x = Matrix(0, 5);
    odd.push_back(Vector(5, 0.1), 0);
    CHECK_THROWS((void)make_rotation_tasks(odd, zero, 1, split));
}

TEST_CASE("make_permutation_tasks") {
    LabeledData base;
    base.x = Matrix(0, 9);
    for (std::size_t i = 0; i < 300; ++i) {
        Vector v(9);
        for (std::size_t k = 0; k < 9; ++k) v[k] = static_cast<double>((i * 7 + k * 3) % 11) / 10.0;
        base.push_back(v, i % 3);
    }
    const TaskSplit split{30, 5, 30, true};
    const TaskStream ts = make_permutation_tasks(base, 3, 5, split);
    CHECK(ts.tasks.size() == 3);
    CHECK(ts.tasks[0].pretrain == base.slice(0, 30));
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t i = 0; i < ts.tasks[t].pretrain.size(); ++i) {
            Vector got(ts.tasks[t].pretrain.x.row(i).begin(), ts.tasks[t].pretrain.x.row(i).end());
            const auto src = base.x.row(t * 100 + i);
            Vector want(src.begin(), src.end());
            std::sort(got.begin(), got.end());
            std::sort(want.begin(), want.end());
            CHECK(got == want);
        }
    }
    CHECK(make_permutations(9, 3, 5) == make_permutations(9, 3, 5));
    const auto perms = make_permutations(9, 3, 5);
    for (const auto& p : perms) CHECK(std::set<std::size_t>(p.begin(), p.end()).size() == 9);
}

TEST_CASE("make_split_tasks") {
    const LabeledData base = gen_gaussian_classes(200, 10, 4, 0.05, 6);
    const std::vector<std::vector<std::size_t>> pairs{{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}};
    const TaskSplit split{100, 20, 100, true};
    const TaskStream ts = make_split_tasks(base, pairs, split);
    CHECK(ts.tasks.size() == 5);
    CHECK(ts.classes_per_task == std::vector<std::size_t>(5, 2));
    CHECK(ts.num_classes == 10);
    std::size_t total = 0;
    for (std::size_t t = 0; t < 5; ++t) {
        const TaskData& task = ts.tasks[t];
        const std::set<std::size_t> allowed(pairs[t].begin(), pairs[t].end());
        auto inside = [&](const LabeledData& d) {
            return std::all_of(d.labels.begin(), d.labels.end(), [&](std::size_t y) { return allowed.count(y) > 0; });
        };
        CHECK(inside(task.pretrain));
        CHECK(inside(task.holdout));
        CHECK(inside(task.labeled_pool));
        total += task.pretrain.size() + task.holdout.size();
        for (const auto& b : task.stream) {
            total += b.size();
            CHECK(inside(LabeledData{b.x, *b.labels}));
        }
        CHECK(task.classes == std::vector<std::size_t>(pairs[t].begin(), pairs[t].end()));
    }
    CHECK(total == base.size());

    const std::vector<std::vector<std::size_t>> overlap{{0, 1}, {1, 2}};
    CHECK_THROWS((void)make_split_tasks(base, overlap, split));
}

TEST_CASE("build_task partitions and the labeled pool") {
    const LabeledData chunk = labeled_range(2750, 3);
    const TaskSplit split{500, 40, 1000, true};
    const TaskData t = build_task(chunk, split);
    CHECK(t.pretrain.size() == 500);
    CHECK(t.holdout.size() == 1000);
    CHECK(t.stream.size() == 2);
    CHECK(t.stream[0].size() == 1000);
    CHECK(t.stream[1].size() == 250);
    CHECK(t.pretrain_rows[1] == t.stream_rows[0]);
    CHECK(t.stream_rows[1] == t.holdout_rows[0]);
    CHECK(t.holdout_rows[1] == 2750);
    CHECK(t.labeled_pool.size() == 120);
    for (std::size_t i = 0; i < t.labeled_pool.size(); ++i) {
        // Labeled rows come only from the pretraining data and the first batch.
        CHECK(t.labeled_pool.x(i, 0) < 1500.0);
    }

    TaskSplit no_hold = split;
    no_hold.holdout = false;
    CHECK(build_task(chunk, no_hold).holdout.empty());

    LabeledData late = labeled_range(3000, 1);
    late.labels.back() = 1;  // class 1 only shows up in the holdout
    CHECK_THROWS((void)build_task(late, split));
}

TEST_CASE("batch_iter") {
    const LabeledData s = labeled_range(2500, 2);
    const auto batches = batch_iter(s, 1000);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 1000);
    CHECK(batches[1].size() == 1000);
    CHECK(batches[2].size() == 500);
    CHECK(batches[1].x(0, 0) == 1000.0);
    LabeledData joined;
    joined.x = Matrix(0, 2);
    for (const auto& b : batches) joined.append(LabeledData{b.x, *b.labels});
    CHECK(joined == s);
    CHECK_THROWS((void)batch_iter(s, 0));
}

TEST_CASE("csv loading") {
    const fs::path dir = scratch_dir("csv");
    SUBCASE("min-max scaling per column") {
        write_text(dir / "a.csv", "f0,f1,label\n0,3,1\n10,3,0\n");
        const LabeledData d = load_csv(dir / "a.csv");
        CHECK(d.x(0, 0) == 0.0);
        CHECK(d.x(1, 0) == 1.0);
        CHECK(d.x(0, 1) == 0.0);
        CHECK(d.labels == Labels{1, 0});
    }
    SUBCASE("round trip of a SEA stream") {
        const LabeledData sea = gen_sea(3000, 0.1, 8);
        write_csv(dir / "sea.csv", sea);
        CHECK(load_csv(dir / "sea.csv") == minmax_scale(sea));
    }
    SUBCASE("malformed files") {
        write_text(dir / "h.csv", "f0,f1,y\n1,2,0\n");
        CHECK_THROWS_AS((void)load_csv(dir / "h.csv"), FormatError);
        write_text(dir / "r.csv", "f0,f1,label\n1,2,0\n1,0\n");
        CHECK_THROWS_WITH_AS((void)load_csv(dir / "r.csv"), doctest::Contains(":3:"), FormatError);
        write_text(dir / "n.csv", "f0,label\nabc,0\n");
        CHECK_THROWS_WITH_AS((void)load_csv(dir / "n.csv"), doctest::Contains("non-numeric"), FormatError);
        write_text(dir / "l.csv", "f0,label\n0.5,-1\n");
        CHECK_THROWS_AS((void)load_csv(dir / "l.csv"), FormatError);
        CHECK_THROWS_AS((void)load_csv(dir / "missing.csv"), FormatError);
    }
}

TEST_CASE("idx loading") {
    const fs::path dir = scratch_dir("idx");
    const std::vector<std::uint8_t> pixels{0, 255, 51, 102, 0, 0, 0, 255};
    const std::vector<std::uint8_t> labels{3, 7};
    write_idx(dir / "img", dir / "lab", pixels, 2, 2, 2, labels);
    const LabeledData d = load_idx(dir / "img", dir / "lab");
    CHECK(d.size() == 2);
    CHECK(d.dim() == 4);
    CHECK(d.x(0, 1) == 1.0);
    CHECK(d.x(0, 2) == doctest::Approx(0.2));
    CHECK(d.labels == Labels{3, 7});

    CHECK_THROWS_AS((void)load_idx(dir / "lab", dir / "lab"), FormatError);
    CHECK_THROWS_AS((void)load_idx(dir / "img", dir / "img"), FormatError);
    write_idx(dir / "img1", dir / "lab1", std::vector<std::uint8_t>(4, 1), 1, 2, 2, std::vector<std::uint8_t>{0});
    CHECK_THROWS_AS((void)load_idx(dir / "img", dir / "lab1"), FormatError);
}
