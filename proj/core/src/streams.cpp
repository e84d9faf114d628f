#include "adcn/streams.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace adcn {

std::size_t LabeledData::num_classes() const noexcept {
    if (labels.empty()) return 0;
    return *std::max_element(labels.begin(), labels.end()) + 1;
}

void LabeledData::push_back(ConstSpan features, std::size_t label) {
    x.append_row(features);
    labels.push_back(label);
}

LabeledData LabeledData::slice(std::size_t first, std::size_t count) const {
    if (first + count > size()) throw std::out_of_range("LabeledData::slice");
    LabeledData out;
    const auto begin = x.data().begin() + static_cast<std::ptrdiff_t>(first * x.cols());
    out.x = Matrix(count, x.cols(), std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * x.cols())));
    out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(first),
                      labels.begin() + static_cast<std::ptrdiff_t>(first + count));
    return out;
}

void LabeledData::append(const LabeledData& other) {
    for (std::size_t i = 0; i < other.size(); ++i) push_back(other.x.row(i), other.labels[i]);
}

std::vector<StreamBatch> batch_iter(const LabeledData& samples, std::size_t batch_size) {
    if (batch_size < 1) throw std::invalid_argument("batch_iter: batch_size must be >= 1");
    std::vector<StreamBatch> out;
    for (std::size_t first = 0; first < samples.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, samples.size() - first);
        LabeledData part = samples.slice(first, count);
        out.push_back(StreamBatch{std::move(part.x), std::move(part.labels)});
    }
    return out;
}

TaskData build_task(const LabeledData& chunk, const TaskSplit& split) {
    if (split.batch_size < 1) throw std::invalid_argument("build_task: batch_size must be >= 1");
    const std::size_t n = chunk.size();
    const std::size_t hold = split.holdout ? std::min(split.batch_size, n) : 0;
    const std::size_t pre = std::min(split.n_init, n - hold);
    const std::size_t streamed = n - hold - pre;

    TaskData task;
    task.pretrain = chunk.slice(0, pre);
    task.stream = batch_iter(chunk.slice(pre, streamed), split.batch_size);
    task.holdout = chunk.slice(pre + streamed, hold);
    task.pretrain_rows = {0, pre};
    task.stream_rows = {pre, pre + streamed};
    task.holdout_rows = {pre + streamed, n};

    std::set<std::size_t> present(chunk.labels.begin(), chunk.labels.end());
    task.classes.assign(present.begin(), present.end());

    // Labels are revealed for the pretraining rows and the first streamed batch.
    const std::size_t visible = pre + std::min(split.batch_size, streamed);
    std::vector<std::size_t> taken(chunk.num_classes(), 0);
    for (std::size_t i = 0; i < visible; ++i) {
        const std::size_t y = chunk.labels[i];
        if (taken[y] < split.n_m) {
            task.labeled_pool.push_back(chunk.x.row(i), y);
            ++taken[y];
        }
    }
    for (const std::size_t c : task.classes) {
        if (taken[c] == 0) {
            throw std::runtime_error("build_task: class " + std::to_string(c) + " has no labeled sample");
        }
    }
    return task;
}

double sea_threshold(std::size_t index, std::size_t n) noexcept {
    const std::size_t segment = std::min<std::size_t>(3, index * 4 / std::max<std::size_t>(n, 1));
    return kSeaThresholds[segment];
}

LabeledData gen_sea(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_sea: n must be >= 1");
    if (!(noise >= 0.0 && noise < 1.0)) throw std::invalid_argument("gen_sea: noise must be in [0,1)");
    Rng rng(seed);
    std::uniform_real_distribution<double> feature(0.0, 10.0);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    LabeledData out;
    out.x = Matrix(n, 3);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double f1 = feature(rng), f2 = feature(rng), f3 = feature(rng);
        std::size_t y = f1 + f2 > sea_threshold(i, n) ? 1 : 0;
        if (coin(rng) < noise) y = 1 - y;
        out.x(i, 0) = f1 / 10.0;
        out.x(i, 1) = f2 / 10.0;
        out.x(i, 2) = f3 / 10.0;
        out.labels[i] = y;
    }
    return out;
}

LabeledData gen_hyperplane(std::size_t n, std::size_t u, double drift_rate, std::uint64_t seed) {
    if (u < 2) throw std::invalid_argument("gen_hyperplane: u must be >= 2");
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector w(u, 1.0);
    Vector direction(u);
    for (double& d : direction) d = unit(rng) < 0.5 ? -1.0 : 1.0;

    LabeledData out;
    out.x = Matrix(n, u);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double weighted = 0.0, total = 0.0;
        for (std::size_t k = 0; k < u; ++k) {
            const double v = unit(rng);
            out.x(i, k) = v;
            weighted += w[k] * v;
            total += w[k];
        }
        out.labels[i] = weighted > total / 2.0 ? 1 : 0;
        for (std::size_t k = 0; k < u; ++k) w[k] += drift_rate * direction[k];
        if ((i + 1) % 1000 == 0) {
            for (double& d : direction) {
                if (unit(rng) < 0.1) d = -d;
            }
        }
    }
    return out;
}

LabeledData gen_gaussian_classes(std::size_t samples_per_class, std::size_t num_classes, std::size_t dim,
                                 double spread, std::uint64_t seed) {
    if (num_classes == 0 || dim == 0) throw std::invalid_argument("gen_gaussian_classes: empty shape");
    Rng rng(seed);
    // Means sit on vertices of the [0.2, 0.8] cube, pairwise at least
    // ceil(dim/3) coordinates apart.
    std::bernoulli_distribution bit(0.5);
    const std::size_t min_hamming = std::max<std::size_t>(1, (dim + 2) / 3);
    std::vector<std::vector<bool>> codes;
    std::size_t attempts = 0;
    while (codes.size() < num_classes) {
        std::vector<bool> b(dim);
        for (std::size_t k = 0; k < dim; ++k) b[k] = bit(rng);
        const bool far = std::all_of(codes.begin(), codes.end(), [&](const std::vector<bool>& o) {
            std::size_t d = 0;
            for (std::size_t k = 0; k < dim; ++k) d += o[k] != b[k];
            return d >= min_hamming;
        });
        if (far || ++attempts > 100000) {
            codes.push_back(std::move(b));
            attempts = 0;
        }
    }
    std::vector<Vector> means;
    for (const auto& b : codes) {
        Vector m(dim);
        for (std::size_t k = 0; k < dim; ++k) m[k] = b[k] ? 0.8 : 0.2;
        means.push_back(std::move(m));
    }

    Labels order;
    order.reserve(samples_per_class * num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) order.insert(order.end(), samples_per_class, c);
    std::shuffle(order.begin(), order.end(), rng);

    std::normal_distribution<double> noise(0.0, spread);
    LabeledData out;
    out.x = Matrix(order.size(), dim);
    out.labels = order;
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (std::size_t k = 0; k < dim; ++k) {
            out.x(i, k) = std::clamp(means[order[i]][k] + noise(rng), 0.0, 1.0);
        }
    }
    return out;
}

namespace {

std::size_t square_side(std::size_t dim) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
    if (side * side != dim) throw std::invalid_argument("rotation: input dimension is not a square image");
    return side;
}

std::vector<LabeledData> equal_chunks(const LabeledData& base, std::size_t parts) {
    if (parts == 0) throw std::invalid_argument("task construction: zero tasks");
    std::vector<LabeledData> out;
    const std::size_t per = base.size() / parts;
    for (std::size_t t = 0; t < parts; ++t) out.push_back(base.slice(t * per, per));
    return out;
}

TaskStream assemble(std::vector<LabeledData> chunks, const TaskSplit& split, std::size_t dim) {
    TaskStream ts;
    ts.dim = dim;
    for (auto& chunk : chunks) {
        ts.num_classes = std::max(ts.num_classes, chunk.num_classes());
        ts.tasks.push_back(build_task(chunk, split));
        ts.classes_per_task.push_back(ts.tasks.back().classes.size());
    }
    return ts;
}

}  // namespace

Vector rotate_image(ConstSpan image, std::size_t side, double degrees) {
    require_same_size(image.size(), side * side, "rotate_image");
    const double theta = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double center = (static_cast<double>(side) - 1.0) / 2.0;
    auto pixel = [&](long r, long col) -> double {
        if (r < 0 || col < 0 || r >= static_cast<long>(side) || col >= static_cast<long>(side)) return 0.0;
        return image[static_cast<std::size_t>(r) * side + static_cast<std::size_t>(col)];
    };
    Vector out(image.size(), 0.0);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t col = 0; col < side; ++col) {
            const double dr = static_cast<double>(r) - center;
            const double dc = static_cast<double>(col) - center;
            const double sr = center + c * dr + s * dc;
            const double sc = center - s * dr + c * dc;
            const double r0 = std::floor(sr), c0 = std::floor(sc);
            const double fr = sr - r0, fc = sc - c0;
            const auto ir = static_cast<long>(r0), ic = static_cast<long>(c0);
            out[r * side + col] = (1 - fr) * (1 - fc) * pixel(ir, ic) + (1 - fr) * fc * pixel(ir, ic + 1) +
                                  fr * (1 - fc) * pixel(ir + 1, ic) + fr * fc * pixel(ir + 1, ic + 1);
        }
    }
    return out;
}

TaskStream make_rotation_tasks(const LabeledData& base, std::span<const AngleRange> angles, std::uint64_t seed,
                               const TaskSplit& split) {
    const std::size_t side = square_side(base.dim());
    auto chunks = equal_chunks(base, angles.size());
    Rng rng(seed);
    for (std::size_t t = 0; t < chunks.size(); ++t) {
        std::uniform_real_distribution<double> angle(angles[t][0], angles[t][1]);
        for (std::size_t i = 0; i < chunks[t].size(); ++i) {
            const double deg = angles[t][0] == angles[t][1] ? angles[t][0] : angle(rng);
            const Vector rotated = rotate_image(chunks[t].x.row(i), side, deg);
            std::copy(rotated.begin(), rotated.end(), chunks[t].x.row(i).begin());
        }
    }
    return assemble(std::move(chunks), split, base.dim());
}

std::vector<std::vector<std::size_t>> make_permutations(std::size_t dim, std::size_t num_tasks, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> perms;
    for (std::size_t t = 0; t < num_tasks; ++t) {
        std::vector<std::size_t> p(dim);
        std::iota(p.begin(), p.end(), std::size_t{0});
        if (t > 0) std::shuffle(p.begin(), p.end(), rng);
        perms.push_back(std::move(p));
    }
    return perms;
}

TaskStream make_permutation_tasks(const LabeledData& base, std::size_t num_tasks, std::uint64_t seed,
                                  const TaskSplit& split) {
    auto chunks = equal_chunks(base, num_tasks);
    const auto perms = make_permutations(base.dim(), num_tasks, seed);
    Vector scratch(base.dim());
    for (std::size_t t = 0; t < chunks.size(); ++t) {
        for (std::size_t i = 0; i < chunks[t].size(); ++i) {
            auto row = chunks[t].x.row(i);
            for (std::size_t k = 0; k < row.size(); ++k) scratch[k] = row[perms[t][k]];
            std::copy(scratch.begin(), scratch.end(), row.begin());
        }
    }
    return assemble(std::move(chunks), split, base.dim());
}

TaskStream make_split_tasks(const LabeledData& base, std::span<const std::vector<std::size_t>> class_sets,
                            const TaskSplit& split) {
    std::vector<int> owner(std::max<std::size_t>(base.num_classes(), 1), -1);
    for (std::size_t t = 0; t < class_sets.size(); ++t) {
        for (const std::size_t c : class_sets[t]) {
            if (c >= owner.size()) owner.resize(c + 1, -1);
            if (owner[c] != -1) throw std::invalid_argument("make_split_tasks: overlapping class sets");
            owner[c] = static_cast<int>(t);
        }
    }
    std::vector<LabeledData> chunks(class_sets.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        const int t = owner[base.labels[i]];
        if (t >= 0) chunks[static_cast<std::size_t>(t)].push_back(base.x.row(i), base.labels[i]);
    }
    return assemble(std::move(chunks), split, base.dim());
}

LabeledData minmax_scale(const LabeledData& data) {
    LabeledData out = data;
    for (std::size_t k = 0; k < data.dim(); ++k) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < data.size(); ++i) {
            lo = std::min(lo, data.x(i, k));
            hi = std::max(hi, data.x(i, k));
        }
        const double span = hi - lo;
        for (std::size_t i = 0; i < data.size(); ++i) {
            out.x(i, k) = span > 0.0 ? (data.x(i, k) - lo) / span : 0.0;
        }
    }
    return out;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

LabeledData load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path.string() + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ":1: missing header");
    const auto header = split_csv(line);
    if (header.size() < 2 || header.back() != "label") {
        throw FormatError(path.string() + ":1: header must end with a 'label' column");
    }
    const std::size_t features = header.size() - 1;

    LabeledData raw;
    raw.x = Matrix(0, features);
    std::size_t line_no = 1;
    Vector row(features);
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (cells.size() != header.size()) throw FormatError(where + ": expected " + std::to_string(header.size()) + " cells");
        for (std::size_t k = 0; k < features; ++k) {
            std::size_t used = 0;
            try {
                row[k] = std::stod(cells[k], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != cells[k].size() || !std::isfinite(row[k])) {
                throw FormatError(where + ": non-numeric cell '" + cells[k] + "'");
            }
        }
        std::size_t label = 0;
        const auto& lc = cells.back();
        const auto res = std::from_chars(lc.data(), lc.data() + lc.size(), label);
        if (res.ec != std::errc() || res.ptr != lc.data() + lc.size()) {
            throw FormatError(where + ": label '" + lc + "' is not a class index");
        }
        raw.push_back(row, label);
    }
    std::clog << "warning: " << path.string()
              << ": features min-max scaled over the whole file (offline convenience, not streaming-safe)\n";
    return minmax_scale(raw);
}

void write_csv(const std::filesystem::path& path, const LabeledData& data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot write");
    for (std::size_t k = 0; k < data.dim(); ++k) out << 'f' << k << ',';
    out << "label\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t k = 0; k < data.dim(); ++k) out << data.x(i, k) << ',';
        out << data.labels[i] << '\n';
    }
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& where) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(where + ": truncated header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                       static_cast<char>(v)};
    out.write(b, 4);
}

}  // namespace

LabeledData load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    std::ifstream img(images, std::ios::binary);
    std::ifstream lab(labels, std::ios::binary);
    if (!img) throw FormatError(images.string() + ": cannot open");
    if (!lab) throw FormatError(labels.string() + ": cannot open");

    if (const auto magic = read_be32(img, images.string()); magic != 0x00000803) {
        throw FormatError(images.string() + ": offset 0: bad image magic");
    }
    const std::uint32_t count = read_be32(img, images.string());
    const std::uint32_t rows = read_be32(img, images.string());
    const std::uint32_t cols = read_be32(img, images.string());
    if (const auto magic = read_be32(lab, labels.string()); magic != 0x00000801) {
        throw FormatError(labels.string() + ": offset 0: bad label magic");
    }
    if (read_be32(lab, labels.string()) != count) throw FormatError(labels.string() + ": offset 4: count mismatch");

    const std::size_t dim = std::size_t{rows} * cols;
    std::vector<unsigned char> pixels(std::size_t{count} * dim);
    std::vector<unsigned char> ys(count);
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
        throw FormatError(images.string() + ": offset 16: truncated pixel data");
    }
    if (!lab.read(reinterpret_cast<char*>(ys.data()), static_cast<std::streamsize>(ys.size()))) {
        throw FormatError(labels.string() + ": offset 8: truncated label data");
    }
    LabeledData out;
    out.x = Matrix(count, dim);
    auto& d = out.x.data();
    for (std::size_t i = 0; i < pixels.size(); ++i) d[i] = static_cast<double>(pixels[i]) / 255.0;
    out.labels.assign(ys.begin(), ys.end());
    return out;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               std::span<const std::uint8_t> pixels, std::size_t count, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> label_bytes) {
    require_same_size(pixels.size(), count * rows * cols, "write_idx pixels");
    require_same_size(label_bytes.size(), count, "write_idx labels");
    std::ofstream img(images, std::ios::binary);
    write_be32(img, 0x00000803);
    write_be32(img, static_cast<std::uint32_t>(count));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    img.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    std::ofstream lab(labels, std::ios::binary);
    write_be32(lab, 0x00000801);
    write_be32(lab, static_cast<std::uint32_t>(count));
    lab.write(reinterpret_cast<const char*>(label_bytes.data()), static_cast<std::streamsize>(label_bytes.size()));
}

}  // namespace adcn
