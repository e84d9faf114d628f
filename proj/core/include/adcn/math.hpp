#pragma once

// Dense linear algebra, activations, losses and streaming statistics shared by
// every other part of the library. Everything is 64-bit and row-major.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adcn {

using Vector = std::vector<double>;
using ConstSpan = std::span<const double>;
using Rng = std::mt19937_64;

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<double> row(std::size_t r) noexcept {
        return {data_.data() + r * cols_, cols_};
    }
    [[nodiscard]] ConstSpan row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& data() noexcept { return data_; }

    void append_row(ConstSpan values);
    void erase_row(std::size_t r);
    // Inserts a column at the right edge, one value per row.
    void append_col(ConstSpan values);
    void erase_col(std::size_t c);

    void set_zero() noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Throws DimensionError with `what` when the sizes differ.
void require_same_size(std::size_t a, std::size_t b, const char* what);

// y = W x
[[nodiscard]] Vector matvec(const Matrix& w, ConstSpan x);
// y = W^T x
[[nodiscard]] Vector matvec_transposed(const Matrix& w, ConstSpan x);
// acc += scale * a b^T
void add_outer(Matrix& acc, ConstSpan a, ConstSpan b, double scale = 1.0);

[[nodiscard]] double dot(ConstSpan a, ConstSpan b);

[[nodiscard]] Vector relu(ConstSpan x);
[[nodiscard]] Vector sigmoid(ConstSpan x);
[[nodiscard]] double sigmoid(double x) noexcept;
// Max-shifted; throws on empty input.
[[nodiscard]] Vector softmax(ConstSpan x);

[[nodiscard]] double l2_distance(ConstSpan x, ConstSpan y);
[[nodiscard]] double squared_distance(ConstSpan x, ConstSpan y);
[[nodiscard]] double mse(ConstSpan x, ConstSpan xhat);

inline constexpr double kBceClamp = 1e-7;

// Binary cross-entropy averaged over entries. Entries outside [0,1] are
// rejected; predictions are clamped to [1e-7, 1-1e-7] before the logs.
[[nodiscard]] double bce(ConstSpan target, ConstSpan pred);
// d bce / d pred (mean-reduced), zero where the clamp is active.
[[nodiscard]] Vector bce_gradient(ConstSpan target, ConstSpan pred);

[[nodiscard]] std::size_t argmax(ConstSpan x);

// Recursive mean/std of a scalar signal (Welford), with running minima of the
// mean and of the standard deviation since the last reset.
struct RunningStat {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    double min_mean = std::numeric_limits<double>::infinity();
    double min_std = std::numeric_limits<double>::infinity();

    [[nodiscard]] double variance() const noexcept { return count > 0 ? m2 / static_cast<double>(count) : 0.0; }
    [[nodiscard]] double std() const noexcept;

    friend bool operator==(const RunningStat&, const RunningStat&) = default;
};

[[nodiscard]] RunningStat stat_update(RunningStat s, double x);
// Zeroes the moments and puts both minima back at the +inf sentinel.
[[nodiscard]] RunningStat stat_reset(const RunningStat& s);
// Puts only the minima back at the sentinel; the moments keep accumulating.
[[nodiscard]] RunningStat stat_reset_minima(RunningStat s);

}  // namespace adcn
