#include "adcn/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "adcn/serialize.hpp"

namespace adcn {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::set<std::string, std::less<>> kSingleTypes{"sea", "hyperplane", "csv", "idx", "gaussian"};
const std::set<std::string, std::less<>> kTaskTypes{"rotation", "permutation", "split"};

std::vector<AngleRange> default_angles() { return {{0, 30}, {31, 60}, {61, 90}, {91, 120}}; }

std::size_t get_count(const json& v, std::string_view key) {
    if (!v.is_number_unsigned()) throw ConfigError(std::string(key) + ": expected a non-negative integer");
    return v.get<std::size_t>();
}

double get_real(const json& v, std::string_view key) {
    if (!v.is_number()) throw ConfigError(std::string(key) + ": expected a number");
    return v.get<double>();
}

std::string get_string(const json& v, std::string_view key) {
    if (!v.is_string()) throw ConfigError(std::string(key) + ": expected a string");
    return v.get<std::string>();
}

bool get_bool(const json& v, std::string_view key) {
    if (!v.is_boolean()) throw ConfigError(std::string(key) + ": expected true or false");
    return v.get<bool>();
}

void require_object(const json& v, std::string_view key) {
    if (!v.is_object()) throw ConfigError(std::string(key) + ": expected an object");
}

StreamSpec stream_from_json(const json& doc) {
    require_object(doc, "stream");
    StreamSpec s;
    for (const auto& [k, v] : doc.items()) {
        const std::string key = "stream." + k;
        if (k == "type") s.type = get_string(v, key);
        else if (k == "seed") s.seed = get_count(v, key);
        else if (k == "n") s.n = get_count(v, key);
        else if (k == "noise") s.noise = get_real(v, key);
        else if (k == "u") s.u = get_count(v, key);
        else if (k == "drift_rate") s.drift_rate = get_real(v, key);
        else if (k == "path") s.path = get_string(v, key);
        else if (k == "images") s.images = get_string(v, key);
        else if (k == "labels") s.labels = get_string(v, key);
        else if (k == "per_class") s.per_class = get_count(v, key);
        else if (k == "classes") s.classes = get_count(v, key);
        else if (k == "dim") s.dim = get_count(v, key);
        else if (k == "spread") s.spread = get_real(v, key);
        else if (k == "source") s.source = get_string(v, key);
        else if (k == "tasks") s.tasks = get_count(v, key);
        else if (k == "angles") {
            if (!v.is_array()) throw ConfigError(key + ": expected a list of [lo, hi] pairs");
            s.angles.clear();
            for (const auto& a : v) {
                if (!a.is_array() || a.size() != 2) throw ConfigError(key + ": expected [lo, hi] pairs");
                s.angles.push_back({get_real(a[0], key), get_real(a[1], key)});
            }
        } else if (k == "class_sets") {
            if (!v.is_array()) throw ConfigError(key + ": expected a list of class lists");
            s.class_sets.clear();
            for (const auto& set : v) {
                if (!set.is_array()) throw ConfigError(key + ": expected a list of class lists");
                std::vector<std::size_t> classes;
                for (const auto& c : set) classes.push_back(get_count(c, key));
                s.class_sets.push_back(std::move(classes));
            }
        } else {
            throw ConfigError("unknown config key: " + key);
        }
    }
    return s;
}

json stream_to_json(const StreamSpec& s) {
    json angles = json::array();
    for (const auto& a : s.angles) angles.push_back({a[0], a[1]});
    return json{{"type", s.type},
                {"seed", s.seed},
                {"n", s.n},
                {"noise", s.noise},
                {"u", s.u},
                {"drift_rate", s.drift_rate},
                {"path", s.path},
                {"images", s.images},
                {"labels", s.labels},
                {"per_class", s.per_class},
                {"classes", s.classes},
                {"dim", s.dim},
                {"spread", s.spread},
                {"source", s.source},
                {"tasks", s.tasks},
                {"angles", angles},
                {"class_sets", s.class_sets}};
}

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot write");
    return out;
}

double mean_of(ConstSpan v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Labeled samples the split is entitled to reveal, recounted from the task's
// pretraining rows and first streamed batch.
std::uint64_t expected_labeled(const TaskData& task, std::size_t n_m) {
    std::vector<std::uint64_t> per_class;
    auto count = [&](std::size_t y) {
        if (y >= per_class.size()) per_class.resize(y + 1, 0);
        ++per_class[y];
    };
    for (const std::size_t y : task.pretrain.labels) count(y);
    if (!task.stream.empty() && task.stream.front().labels) {
        for (const std::size_t y : *task.stream.front().labels) count(y);
    }
    std::uint64_t total = 0;
    for (const auto c : per_class) total += std::min<std::uint64_t>(c, n_m);
    return total;
}

}  // namespace

bool StreamSpec::is_task_stream() const noexcept { return kTaskTypes.contains(type); }

bool StreamSpec::is_image() const noexcept {
    return type == "idx" || (is_task_stream() && source == "idx");
}

void ExperimentConfig::validate() const {
    if (!kSingleTypes.contains(stream.type) && !kTaskTypes.contains(stream.type)) {
        throw ConfigError("stream.type: unknown stream type '" + stream.type + "'");
    }
    if (stream.is_task_stream() && (stream.source == "sea" || stream.source == "hyperplane" ||
                                    !kSingleTypes.contains(stream.source))) {
        throw ConfigError("stream.source: must be csv, idx or gaussian");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (learning_batch < 1) throw ConfigError("learning_batch must be >= 1");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
    if (width_cap_factor < 1) throw ConfigError("width_cap_factor must be >= 1");
    if (baseline_seeds < 1) throw ConfigError("baseline_seeds must be >= 1");
    try {
        sgd.validate();
        drift.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

ExperimentConfig ExperimentConfig::resolved(std::size_t input_dim) const {
    ExperimentConfig c = *this;
    const bool image = stream.is_image();
    if (c.sae_width == 0) c.sae_width = image ? 96 : 2 * input_dim;
    if (c.extractor_widths[0] == 0) c.extractor_widths[0] = image ? 1000 : 4 * input_dim;
    if (c.extractor_widths[1] == 0) c.extractor_widths[1] = image ? 500 : 4 * input_dim;
    return c;
}

ExperimentConfig config_from_json(const json& doc) {
    require_object(doc, "config");
    ExperimentConfig c;
    for (const auto& [k, v] : doc.items()) {
        if (k == "stream") c.stream = stream_from_json(v);
        else if (k == "batch_size") c.batch_size = get_count(v, k);
        else if (k == "n_init") c.n_init = get_count(v, k);
        else if (k == "n_m") c.n_m = get_count(v, k);
        else if (k == "epochs") c.epochs = get_count(v, k);
        else if (k == "sae_width") c.sae_width = get_count(v, k);
        else if (k == "extractor_widths") {
            if (!v.is_array() || v.size() != 2) throw ConfigError("extractor_widths: expected two widths");
            c.extractor_widths = {get_count(v[0], k), get_count(v[1], k)};
        } else if (k == "sgd") {
            require_object(v, k);
            for (const auto& [sk, sv] : v.items()) {
                const std::string key = "sgd." + sk;
                if (sk == "learning_rate") c.sgd.learning_rate = get_real(sv, key);
                else if (sk == "momentum") c.sgd.momentum = get_real(sv, key);
                else if (sk == "weight_decay") c.sgd.weight_decay = get_real(sv, key);
                else throw ConfigError("unknown config key: " + key);
            }
        } else if (k == "learning_batch") c.learning_batch = get_count(v, k);
        else if (k == "alpha") c.alpha = get_real(v, k);
        else if (k == "alpha_x") c.drift.alpha_x = get_real(v, k);
        else if (k == "alpha_w") c.drift.alpha_w = get_real(v, k);
        else if (k == "alpha_d") c.drift.alpha_d = get_real(v, k);
        else if (k == "beta") c.beta = get_real(v, k);
        else if (k == "seed") c.seed = get_count(v, k);
        else if (k == "enable_lcl") c.enable_lcl = get_bool(v, k);
        else if (k == "output_dir") c.output_dir = get_string(v, k);
        else if (k == "width_cap_factor") c.width_cap_factor = get_count(v, k);
        else if (k == "baseline_seeds") c.baseline_seeds = get_count(v, k);
        else throw ConfigError("unknown config key: " + k);
    }
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    return json{{"stream", stream_to_json(c.stream)},
                {"batch_size", c.batch_size},
                {"n_init", c.n_init},
                {"n_m", c.n_m},
                {"epochs", c.epochs},
                {"sae_width", c.sae_width},
                {"extractor_widths", c.extractor_widths},
                {"sgd",
                 {{"learning_rate", c.sgd.learning_rate},
                  {"momentum", c.sgd.momentum},
                  {"weight_decay", c.sgd.weight_decay}}},
                {"learning_batch", c.learning_batch},
                {"alpha", c.alpha},
                {"alpha_x", c.drift.alpha_x},
                {"alpha_w", c.drift.alpha_w},
                {"alpha_d", c.drift.alpha_d},
                {"beta", c.beta},
                {"seed", c.seed},
                {"enable_lcl", c.enable_lcl},
                {"output_dir", c.output_dir},
                {"width_cap_factor", c.width_cap_factor},
                {"baseline_seeds", c.baseline_seeds}};
}

void apply_override(json& doc, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw ConfigError("override '" + std::string(assignment) + "': expected key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string raw(assignment.substr(eq + 1));
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + key + "': empty key segment");
        if (!node->is_object()) throw ConfigError("override '" + key + "': '" + part + "' is not inside an object");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

json load_config_document(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

namespace {

LabeledData load_single(const StreamSpec& s, std::string_view type) {
    if (type == "sea") return gen_sea(s.n, s.noise, s.seed);
    if (type == "hyperplane") return gen_hyperplane(s.n, s.u, s.drift_rate, s.seed);
    if (type == "csv") return load_csv(s.path);
    if (type == "idx") return load_idx(s.images, s.labels);
    if (type == "gaussian") return gen_gaussian_classes(s.per_class, s.classes, s.dim, s.spread, s.seed);
    throw ConfigError("stream: unknown source '" + std::string(type) + "'");
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
    const StreamSpec& s = cfg.stream;
    if (!s.is_task_stream()) return load_single(s, s.type);

    const LabeledData base = load_single(s, s.source);
    std::size_t tasks = s.tasks;
    std::vector<AngleRange> angles = s.angles.empty() ? default_angles() : s.angles;
    std::vector<std::vector<std::size_t>> sets = s.class_sets;
    if (s.type == "split" && sets.empty()) {
        const std::size_t m = base.num_classes();
        for (std::size_t c = 0; c < m; c += 2) {
            sets.push_back(c + 1 < m ? std::vector<std::size_t>{c, c + 1} : std::vector<std::size_t>{c});
        }
    }
    if (s.type == "split") tasks = sets.size();
    if (s.type == "rotation") tasks = angles.size();
    if (tasks == 0) throw ConfigError("stream: task stream needs at least one task");

    const TaskSplit split{cfg.n_init / tasks, cfg.n_m / tasks, cfg.batch_size, true};
    if (s.type == "rotation") return make_rotation_tasks(base, angles, s.seed, split);
    if (s.type == "permutation") return make_permutation_tasks(base, tasks, s.seed, split);
    return make_split_tasks(base, sets, split);
}

// --- Learner -----------------------------------------------------------------

Learner::Learner(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t num_classes)
    : cfg_(cfg.resolved(input_dim)),
      num_classes_(num_classes),
      rng_(cfg.seed),
      detector_(cfg.drift),
      memory_(cfg.beta) {
    cfg_.validate();
    if (num_classes_ == 0) throw std::invalid_argument("Learner: zero classes");
    net_ = make_network({input_dim, cfg_.extractor_widths[0], cfg_.extractor_widths[1], cfg_.sae_width,
                         cfg_.width_cap_factor},
                        rng_);
    clusters_.resize(net_.depth());
}

std::size_t Learner::total_clusters() const noexcept {
    std::size_t n = 0;
    for (const auto& lc : clusters_) n += lc.size();
    return n;
}

void Learner::log(std::size_t layer, EvolutionKind kind) {
    const std::size_t width = layer < net_.depth() ? net_.sae[layer].hidden_dim() : 0;
    events_.push_back({batch_index_, layer, kind, width, net_.depth()});
}

bool Learner::lcl_active() const noexcept {
    return cfg_.enable_lcl && !memory_.empty() &&
           std::any_of(lambdas_.begin(), lambdas_.end(), [](double l) { return l != 0.0; });
}

void Learner::begin_task(std::size_t task_index, std::size_t classes_in_task) {
    if (task_index != memory_.size()) throw std::logic_error("begin_task: tasks must be started in order");
    task_classes_ = classes_in_task;
    if (task_index > 0) {
        for (auto& lc : clusters_) {
            lc.protected_prefix = lc.size();
            lc.win_stat = RunningStat{};
        }
    }
    lambdas_ = lambda_for(memory_, task_index + 1, classes_in_task);
}

void Learner::end_task() { memory_.snapshot_task(net_, task_classes_); }

void Learner::seed_layer(std::size_t layer, const Matrix& x) {
    for (std::size_t r = 0; r < std::min<std::size_t>(2, x.rows()); ++r) {
        const std::vector<Vector> h = latents(net_, x.row(r));
        add_cluster(clusters_[layer], h[layer]);
    }
}

void Learner::seed_clusters(const Matrix& x) {
    if (x.rows() == 0) throw std::invalid_argument("seed_clusters: no samples");
    for (std::size_t l = 0; l < clusters_.size(); ++l) {
        if (clusters_[l].clusters.empty()) seed_layer(l, x);
    }
}

Vector Learner::batch_signal(const Matrix& x) const {
    Vector s(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) s[i] = mean_of(extract(net_, x.row(i)));
    return s;
}

void Learner::adapt_width(const Matrix& x, std::size_t first, std::size_t count) {
    for (std::size_t i = first; i < first + count; ++i) {
        ForwardRecord rec = forward_stack(net_, x.row(i));
        for (std::size_t l = 0; l < net_.depth(); ++l) {
            LayerEvolution& ev = net_.evolution[l];
            ev.activity.observe(rec.latents[l]);
            const Vector& input = l == 0 ? rec.z : rec.latents[l - 1];
            const NsEstimate ns = ns_estimate(net_, l, input);
            ev.bias_stat = stat_update(ev.bias_stat, ns.bias2);
            ev.var_stat = stat_update(ev.var_stat, ns.variance);

            bool changed = false;
            if (check_grow(ev.bias_stat, ns.bias2) && net_.sae[l].hidden_dim() < ev.max_width) {
                grow_network_node(net_, l, rng_);
                append_coordinate(clusters_[l]);
                LayerEvolution& grown = net_.evolution[l];
                grown.bias_stat = stat_reset_minima(grown.bias_stat);
                grown.var_stat = stat_reset_minima(grown.var_stat);
                log(l, EvolutionKind::grow_node);
                changed = true;
            } else if (check_prune(ev.var_stat, ns.variance)) {
                if (const auto removed = prune_network_node(net_, l)) {
                    erase_coordinate(clusters_[l], *removed);
                    net_.evolution[l].var_stat = stat_reset_minima(net_.evolution[l].var_stat);
                    log(l, EvolutionKind::prune_node);
                    changed = true;
                }
            }
            if (changed) rec = forward_stack(net_, x.row(i));
        }
    }
}

void Learner::train_minibatch(const Matrix& x, std::size_t first, std::size_t count, bool streaming) {
    ExtractorGradients eg = zero_gradients(net_.extractor);
    std::vector<LayerGradients> lg;
    for (const auto& layer : net_.sae) lg.push_back(zero_gradients(layer));
    const bool lcl = lcl_active();

    for (std::size_t i = first; i < first + count; ++i) {
        const ConstSpan xi = x.row(i);
        const ForwardRecord rec = forward_stack(net_, xi);
        std::optional<Vector> extra;
        if (lcl) extra = ucl_regularizer(memory_, lambdas_, xi, rec.xhat).grad_at_xhat;
        eg.accumulate(extractor_gradients(net_.extractor, xi, extra));
        for (std::size_t l = 0; l < net_.depth(); ++l) {
            const Vector& input = l == 0 ? rec.z : rec.latents[l - 1];
            std::optional<Vector> pull;
            if (!clusters_[l].clusters.empty()) {
                pull = clusters_[l].clusters[winning_cluster(clusters_[l], rec.latents[l]).index].centroid;
            }
            lg[l].accumulate(layer_gradients(net_.sae[l], input, pull, cfg_.alpha));
        }
        if (streaming) ++counters_.gradient_passes;
    }
    const double scale = 1.0 / static_cast<double>(count);
    eg.scale(scale);
    sgd_step(net_.extractor, eg, cfg_.sgd);
    for (std::size_t l = 0; l < net_.depth(); ++l) {
        lg[l].scale(scale);
        sgd_step(net_.sae[l], lg[l], cfg_.sgd);
    }
}

void Learner::cluster_rows(const Matrix& x, std::size_t first, std::size_t count,
                           std::vector<std::vector<std::uint64_t>>& counts, bool streaming) {
    counts.resize(clusters_.size());
    for (std::size_t i = first; i < first + count; ++i) {
        const std::vector<Vector> h = latents(net_, x.row(i));
        for (std::size_t l = 0; l < clusters_.size(); ++l) {
            const ClusterStep step = cluster_step(clusters_[l], h[l]);
            counts[l].resize(clusters_[l].size(), 0);
            ++counts[l][step.index];
            if (step.grew) log(l, EvolutionKind::add_cluster);
        }
        if (streaming) ++counters_.cluster_updates;
    }
}

void Learner::reassign(std::vector<std::vector<std::uint64_t>>& counts) {
    for (std::size_t l = 0; l < clusters_.size(); ++l) {
        counts[l].resize(clusters_[l].size(), 0);
        reassign_empty(clusters_[l], counts[l], rng_);
    }
}

void Learner::add_depth(const Matrix& x) {
    add_layer(net_, rng_, cfg_.width_cap_factor);
    clusters_.emplace_back();
    seed_layer(net_.depth() - 1, x);
    log(net_.depth() - 1, EvolutionKind::add_layer);
}

void Learner::train_new_layer(const Matrix& x) {
    const std::size_t l = net_.depth() - 1;
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        for (std::size_t first = 0; first < x.rows(); first += cfg_.learning_batch) {
            const std::size_t count = std::min(cfg_.learning_batch, x.rows() - first);
            LayerGradients g = zero_gradients(net_.sae[l]);
            for (std::size_t i = first; i < first + count; ++i) {
                const ForwardRecord rec = forward_stack(net_, x.row(i));
                const Vector& input = l == 0 ? rec.z : rec.latents[l - 1];
                const auto& pull = clusters_[l].clusters[winning_cluster(clusters_[l], rec.latents[l]).index].centroid;
                g.accumulate(layer_gradients(net_.sae[l], input, pull, cfg_.alpha));
            }
            g.scale(1.0 / static_cast<double>(count));
            sgd_step(net_.sae[l], g, cfg_.sgd);
        }
    }
}

void Learner::refresh_allegiance(std::vector<LayerClusters>& target, const LabeledData& pool) const {
    if (pool.empty()) return;
    std::vector<std::vector<Vector>> h(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) h[i] = latents(net_, pool.x.row(i));
    for (std::size_t l = 0; l < target.size(); ++l) {
        std::vector<LabeledLatent> labeled;
        labeled.reserve(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) labeled.push_back({h[i][l], pool.labels[i]});
        compute_class_allegiance(target[l], labeled, num_classes_);
    }
}

void Learner::pretrain(const Matrix& x) {
    if (x.rows() == 0) throw std::invalid_argument("pretrain: empty batch");
    require_same_size(x.cols(), net_.input_dim(), "pretrain input");
    seed_clusters(x);
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        // Depth is checked against the preceding data batch, so at most once.
        if (epoch == 0 && detector_.previous()) {
            const DriftState state = detector_.detect(batch_signal(x));
            if (state == DriftState::warning) log(net_.depth() - 1, EvolutionKind::warning);
            if (state == DriftState::drift) {
                log(net_.depth() - 1, EvolutionKind::drift);
                add_depth(x);
            }
        }
        for (std::size_t first = 0; first < x.rows(); first += cfg_.learning_batch) {
            const std::size_t count = std::min(cfg_.learning_batch, x.rows() - first);
            adapt_width(x, first, count);
            train_minibatch(x, first, count, false);
        }
        std::vector<std::vector<std::uint64_t>> counts;
        cluster_rows(x, 0, x.rows(), counts, false);
        reassign(counts);
    }
    detector_.remember(batch_signal(x));
    refresh_allegiance(clusters_, revealed_);
}

void Learner::reveal_labels(const LabeledData& pool) {
    if (!pool.empty()) require_same_size(pool.dim(), net_.input_dim(), "labeled pool");
    for (const std::size_t y : pool.labels) {
        if (y >= num_classes_) throw std::out_of_range("reveal_labels: label out of range");
    }
    revealed_.append(pool);
    counters_.labeled += pool.size();
    refresh_allegiance(clusters_, revealed_);
}

std::size_t Learner::predict(ConstSpan x) const { return adcn::predict(net_, clusters_, x, num_classes_).label; }

double Learner::evaluate(const LabeledData& data) const {
    if (data.empty()) return kNaN;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) correct += predict(data.x.row(i)) == data.labels[i];
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double Learner::evaluate_with_pool(const LabeledData& data, const LabeledData& extra) const {
    if (data.empty()) return kNaN;
    std::vector<LayerClusters> scratch = clusters_;
    LabeledData pool = revealed_;
    pool.append(extra);
    refresh_allegiance(scratch, pool);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        correct += adcn::predict(net_, scratch, data.x.row(i), num_classes_).label == data.labels[i];
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

BatchOutcome Learner::process_batch(const StreamBatch& batch) {
    const Matrix& x = batch.x;
    if (x.rows() == 0) throw std::invalid_argument("process_batch: empty batch");
    require_same_size(x.cols(), net_.input_dim(), "batch input");
    if (!batch.labels || batch.labels->size() != x.rows()) {
        throw std::invalid_argument("process_batch: evaluation labels missing");
    }
    std::optional<Snapshot> before;
    if (replay_audit_) before = Snapshot{net_, clusters_};

    // (1) test
    const Labels& y = *batch.labels;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) correct += predict(x.row(i)) == y[i];
    BatchOutcome out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(x.rows());
    counters_.streamed += x.rows();

    // (2) depth
    out.drift = detector_.detect(batch_signal(x));
    if (out.drift == DriftState::warning) log(net_.depth() - 1, EvolutionKind::warning);
    if (out.drift == DriftState::drift) {
        log(net_.depth() - 1, EvolutionKind::drift);
        add_depth(x);
        train_new_layer(x);
    }

    // (3)-(4) one pass: width, parameters, clusters per minibatch
    std::vector<std::vector<std::uint64_t>> counts;
    for (std::size_t first = 0; first < x.rows(); first += cfg_.learning_batch) {
        const std::size_t count = std::min(cfg_.learning_batch, x.rows() - first);
        adapt_width(x, first, count);
        train_minibatch(x, first, count, true);
        cluster_rows(x, first, count, counts, true);
    }
    // (5)
    reassign(counts);
    refresh_allegiance(clusters_, revealed_);

    if (before) {
        std::size_t replay = 0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            replay += adcn::predict(before->net, before->clusters, x.row(i), num_classes_).label == y[i];
        }
        ++counters_.replay_checks;
        if (replay != correct) ++counters_.replay_mismatches;
    }

    ++batch_index_;
    out.depth = net_.depth();
    out.total_width = net_.total_width();
    out.total_clusters = total_clusters();
    return out;
}

// --- metrics and runs ----------------------------------------------------------

TransferMetrics transfer_metrics(const RMatrix& m) {
    const std::size_t t = m.tasks();
    TransferMetrics out;
    if (t < 2) return out;
    if (m.baseline.size() != t) throw std::invalid_argument("transfer_metrics: baseline size");
    double bwt = 0.0, fwt = 0.0;
    for (std::size_t i = 0; i + 1 < t; ++i) bwt += m.r[t - 1][i] - m.r[i][i];
    for (std::size_t i = 1; i < t; ++i) fwt += m.r[i - 1][i] - m.baseline[i];
    out.bwt = 100.0 * bwt / static_cast<double>(t - 1);
    out.fwt = 100.0 * fwt / static_cast<double>(t - 1);
    out.defined = true;
    return out;
}

namespace {

void record_clusters(MetricsReport& report, const Learner& learner, std::size_t batch) {
    for (std::size_t l = 0; l < learner.clusters().size(); ++l) {
        const LayerClusters& lc = learner.clusters()[l];
        report.clusters.push_back({batch, l, lc.size(), lc.total_support()});
    }
}

void stream_task(MetricsReport& report, Learner& learner, const TaskData& task, std::size_t task_index) {
    for (const StreamBatch& b : task.stream) {
        const BatchOutcome o = learner.process_batch(b);
        const std::size_t index = learner.batch_index() - 1;
        report.batches.push_back({index, o.accuracy, task_index, o.depth, o.total_width, o.total_clusters});
        record_clusters(report, learner, index);
    }
}

void finish(MetricsReport& report, const Learner& learner, std::uint64_t labeled_expected) {
    std::vector<double> accs;
    for (const auto& b : report.batches) accs.push_back(b.preq_acc);
    report.preq_mean = mean_of(accs);
    report.evolution = learner.events();

    const LearnerCounters& c = learner.counters();
    AuditReport& a = report.audit;
    a.test_then_train = c.replay_mismatches == 0 && c.replay_checks == report.batches.size();
    if (!a.test_then_train) a.failures.push_back("test-then-train replay mismatch");
    a.single_pass = c.gradient_passes == c.streamed && c.cluster_updates == c.streamed;
    if (!a.single_pass) a.failures.push_back("streaming samples not used exactly once");
    a.labeled_consumed = c.labeled;
    a.labeled_expected = labeled_expected;
    a.labeled_data = c.labeled == labeled_expected;
    if (!a.labeled_data) a.failures.push_back("labeled sample count differs from the split");
}

}  // namespace

MetricsReport run_ul(const LabeledData& stream, const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    if (stream.empty()) throw std::invalid_argument("run_ul: empty stream");
    const ExperimentConfig c = cfg.resolved(stream.dim());
    const TaskData task = build_task(stream, TaskSplit{c.n_init, c.n_m, c.batch_size, false});

    Learner learner(c, stream.dim(), stream.num_classes());
    learner.begin_task(0, task.classes.size());
    if (task.pretrain.empty()) {
        learner.seed_clusters(task.stream.front().x);
    } else {
        learner.pretrain(task.pretrain.x);
    }
    learner.reveal_labels(task.labeled_pool);

    MetricsReport report;
    stream_task(report, learner, task, 0);
    finish(report, learner, expected_labeled(task, c.n_m));
    report.task_acc = report.preq_mean;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

double baseline_accuracy(const TaskData& task, const ExperimentConfig& cfg, std::size_t input_dim,
                         std::size_t num_classes) {
    if (task.holdout.empty() || task.labeled_pool.empty()) return kNaN;
    double total = 0.0;
    for (std::size_t s = 0; s < cfg.baseline_seeds; ++s) {
        ExperimentConfig c = cfg;
        c.seed = cfg.seed + 7919 * (s + 1);
        Learner fresh(c, input_dim, num_classes);
        fresh.seed_clusters(task.labeled_pool.x);
        fresh.reveal_labels(task.labeled_pool);
        total += fresh.evaluate(task.holdout);
    }
    return total / static_cast<double>(cfg.baseline_seeds);
}

MetricsReport run_ucl(const TaskStream& ts, const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t nt = ts.tasks.size();
    if (nt == 0) throw std::invalid_argument("run_ucl: no tasks");
    const ExperimentConfig c = cfg.resolved(ts.dim);
    const std::size_t n_m = c.n_m / nt;

    MetricsReport report;
    report.rmatrix.r.assign(nt, std::vector<double>(nt, kNaN));
    for (const TaskData& task : ts.tasks) report.rmatrix.baseline.push_back(baseline_accuracy(task, c, ts.dim, ts.num_classes));

    Learner learner(c, ts.dim, ts.num_classes);
    std::uint64_t expected = 0;
    for (std::size_t t = 0; t < nt; ++t) {
        const TaskData& task = ts.tasks[t];
        learner.begin_task(t, ts.classes_per_task[t]);
        if (task.pretrain.empty()) {
            if (task.stream.empty()) throw std::invalid_argument("run_ucl: task without samples");
            learner.seed_clusters(task.stream.front().x);
        } else {
            learner.pretrain(task.pretrain.x);
        }
        learner.reveal_labels(task.labeled_pool);
        expected += expected_labeled(task, n_m);
        stream_task(report, learner, task, t);

        for (std::size_t j = 0; j <= t; ++j) report.rmatrix.r[t][j] = learner.evaluate(ts.tasks[j].holdout);
        if (t + 1 < nt) {
            const TaskData& next = ts.tasks[t + 1];
            report.rmatrix.r[t][t + 1] = learner.evaluate_with_pool(next.holdout, next.labeled_pool);
        }
        learner.end_task();
        report.snapshots.push_back(learner.memory().snapshot(t));
    }

    finish(report, learner, expected);
    Vector last(report.rmatrix.r.back());
    report.task_acc = mean_of(last);
    report.transfer = transfer_metrics(report.rmatrix);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const ExperimentData data = load_experiment_data(cfg);
    if (const auto* single = std::get_if<LabeledData>(&data)) return run_ul(*single, cfg);
    return run_ucl(std::get<TaskStream>(data), cfg);
}

void write_outputs(const MetricsReport& report, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_output(dir / "metrics.csv");
        out << "batch,preq_acc,task,depth,total_width,total_clusters\n";
        for (const auto& b : report.batches) {
            out << b.batch << ',' << format_number(b.preq_acc) << ',' << b.task << ',' << b.depth << ','
                << b.total_width << ',' << b.total_clusters << '\n';
        }
    }
    {
        auto out = open_output(dir / "evolution.csv");
        out << "batch_index,layer,event,width_after,depth_after\n";
        for (const auto& e : report.evolution) {
            out << e.batch_index << ',' << e.layer << ',' << to_string(e.kind) << ',' << e.width_after << ','
                << e.depth_after << '\n';
        }
    }
    {
        auto out = open_output(dir / "clusters.csv");
        out << "batch,layer,cluster_count,total_support\n";
        for (const auto& c : report.clusters) {
            out << c.batch << ',' << c.layer << ',' << c.cluster_count << ',' << c.total_support << '\n';
        }
    }
    const RMatrix& m = report.rmatrix;
    if (m.tasks() > 0) {
        auto out = open_output(dir / "rmatrix.csv");
        out << "after_task";
        for (std::size_t j = 0; j < m.tasks(); ++j) out << ",task" << j;
        out << '\n';
        for (std::size_t i = 0; i < m.tasks(); ++i) {
            out << i;
            for (std::size_t j = 0; j < m.tasks(); ++j) out << ',' << format_number(m.r[i][j]);
            out << '\n';
        }
        out << "b_bar";
        for (const double b : m.baseline) out << ',' << format_number(b);
        out << '\n';
    }
    {
        auto out = open_output(dir / "summary.csv");
        out << "metric,value\n";
        out << "preq_mean," << format_number(report.preq_mean) << '\n';
        out << "task_acc," << format_number(report.task_acc) << '\n';
        out << "bwt," << (report.transfer.defined ? format_number(report.transfer.bwt) : "") << '\n';
        out << "fwt," << (report.transfer.defined ? format_number(report.transfer.fwt) : "") << '\n';
        out << "transfer_defined," << (report.transfer.defined ? 1 : 0) << '\n';
        out << "audit_ok," << (report.audit.ok() ? 1 : 0) << '\n';
    }
    {
        auto out = open_output(dir / "config.resolved.json");
        out << config_to_json(cfg).dump(2) << '\n';
    }
    for (std::size_t t = 0; t < report.snapshots.size(); ++t) {
        save_network(dir / ("snapshot_task" + std::to_string(t) + ".json"), report.snapshots[t]);
    }
}

}  // namespace adcn
