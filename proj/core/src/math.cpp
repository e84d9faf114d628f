#include "adcn/math.hpp"

#include <algorithm>
#include <cmath>

namespace adcn {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("matrix data length does not match rows x cols");
    }
}

void Matrix::append_row(ConstSpan values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    require_same_size(values.size(), cols_, "append_row");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

void Matrix::erase_row(std::size_t r) {
    if (r >= rows_) throw std::out_of_range("erase_row index");
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>(r * cols_);
    data_.erase(first, first + static_cast<std::ptrdiff_t>(cols_));
    --rows_;
}

void Matrix::append_col(ConstSpan values) {
    require_same_size(values.size(), rows_, "append_col");
    std::vector<double> next;
    next.reserve(rows_ * (cols_ + 1));
    for (std::size_t r = 0; r < rows_; ++r) {
        const auto src = row(r);
        next.insert(next.end(), src.begin(), src.end());
        next.push_back(values[r]);
    }
    data_ = std::move(next);
    ++cols_;
}

void Matrix::erase_col(std::size_t c) {
    if (c >= cols_) throw std::out_of_range("erase_col index");
    std::vector<double> next;
    next.reserve(rows_ * (cols_ - 1));
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t k = 0; k < cols_; ++k) {
            if (k != c) next.push_back((*this)(r, k));
        }
    }
    data_ = std::move(next);
    --cols_;
}

void Matrix::set_zero() noexcept { std::fill(data_.begin(), data_.end(), 0.0); }

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

Vector matvec(const Matrix& w, ConstSpan x) {
    require_same_size(x.size(), w.cols(), "matvec");
    Vector y(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto wr = w.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < wr.size(); ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
    return y;
}

Vector matvec_transposed(const Matrix& w, ConstSpan x) {
    require_same_size(x.size(), w.rows(), "matvec_transposed");
    Vector y(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto wr = w.row(r);
        const double xr = x[r];
        for (std::size_t c = 0; c < wr.size(); ++c) y[c] += wr[c] * xr;
    }
    return y;
}

void add_outer(Matrix& acc, ConstSpan a, ConstSpan b, double scale) {
    require_same_size(a.size(), acc.rows(), "add_outer rows");
    require_same_size(b.size(), acc.cols(), "add_outer cols");
    for (std::size_t r = 0; r < acc.rows(); ++r) {
        const double ar = a[r] * scale;
        if (ar == 0.0) continue;
        auto row = acc.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += ar * b[c];
    }
}

double dot(ConstSpan a, ConstSpan b) {
    require_same_size(a.size(), b.size(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

Vector relu(ConstSpan x) {
    Vector out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
    return out;
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector sigmoid(ConstSpan x) {
    Vector out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [](double v) { return sigmoid(v); });
    return out;
}

Vector softmax(ConstSpan x) {
    if (x.empty()) throw std::invalid_argument("softmax of an empty vector");
    const double peak = *std::max_element(x.begin(), x.end());
    Vector out(x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - peak);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

double squared_distance(ConstSpan x, ConstSpan y) {
    require_same_size(x.size(), y.size(), "distance");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double l2_distance(ConstSpan x, ConstSpan y) { return std::sqrt(squared_distance(x, y)); }

double mse(ConstSpan x, ConstSpan xhat) {
    require_same_size(x.size(), xhat.size(), "mse");
    if (x.empty()) return 0.0;
    return squared_distance(x, xhat) / static_cast<double>(x.size());
}

namespace {

void require_unit_interval(ConstSpan v, const char* what) {
    for (double e : v) {
        if (!(e >= 0.0 && e <= 1.0)) {
            throw std::domain_error(std::string(what) + ": entry outside [0,1]");
        }
    }
}

}  // namespace

double bce(ConstSpan target, ConstSpan pred) {
    require_same_size(target.size(), pred.size(), "bce");
    require_unit_interval(target, "bce target");
    require_unit_interval(pred, "bce prediction");
    if (target.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double p = std::clamp(pred[i], kBceClamp, 1.0 - kBceClamp);
        acc += target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
    }
    return -acc / static_cast<double>(target.size());
}

Vector bce_gradient(ConstSpan target, ConstSpan pred) {
    require_same_size(target.size(), pred.size(), "bce_gradient");
    Vector g(target.size(), 0.0);
    const double n = static_cast<double>(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double p = pred[i];
        if (p < kBceClamp || p > 1.0 - kBceClamp) continue;
        g[i] = (p - target[i]) / (p * (1.0 - p) * n);
    }
    return g;
}

std::size_t argmax(ConstSpan x) {
    if (x.empty()) throw std::invalid_argument("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (x[i] > x[best]) best = i;
    }
    return best;
}

double RunningStat::std() const noexcept { return std::sqrt(variance()); }

RunningStat stat_update(RunningStat s, double x) {
    if (!std::isfinite(x)) throw std::domain_error("stat_update: non-finite sample");
    ++s.count;
    const double delta = x - s.mean;
    s.mean += delta / static_cast<double>(s.count);
    s.m2 += delta * (x - s.mean);
    if (s.m2 < 0.0) s.m2 = 0.0;
    s.min_mean = std::min(s.min_mean, s.mean);
    // A single observation always has zero spread; it would pin min_std at 0.
    if (s.count > 1) s.min_std = std::min(s.min_std, s.std());
    return s;
}

RunningStat stat_reset(const RunningStat&) { return RunningStat{}; }

RunningStat stat_reset_minima(RunningStat s) {
    s.min_mean = std::numeric_limits<double>::infinity();
    s.min_std = std::numeric_limits<double>::infinity();
    return s;
}

}  // namespace adcn
