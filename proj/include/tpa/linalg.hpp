#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace tpa {

// Additive mask sentinel. We use the most-negative finite double instead of
// -inf so that "logit + mask" stays finite and exp() underflows to an exact
// zero without NaN propagation. Adding any logit |x| < 2^970 to the sentinel
// rounds back to the sentinel bit-exactly, which is what makes masked
// entries insensitive to the values they hide.
inline constexpr double kMaskedLogit = -1.7976931348623157e308;

// Threshold below which a logit is treated as masked (guards the
// fully-masked-block case in blocked softmax).
inline constexpr double kMaskedThreshold = -8.98e307;

// Dense row-major matrix of doubles. Values are immutable by convention once
// built; all free functions below are pure.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    bool all_finite() const;

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Standard product, fixed i-k-j loop order so summation is deterministic.
// Throws ShapeError (std::invalid_argument) on a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// result[i][j] = u[i] * v[j]
Matrix outer(std::span<const double> u, std::span<const double> v);

// y = M x for a length-cols vector x.
std::vector<double> matvec(const Matrix& m, std::span<const double> x);

struct SoftmaxResult {
    std::vector<double> probs;
    double lse = 0.0;  // log sum exp of the unmasked logits
};

// Row softmax with explicit log-sum-exp. `mask`, when present, holds 0 for
// live entries and kMaskedLogit for dead ones; dead entries get probability
// exactly 0. Throws std::domain_error when every entry is masked.
SoftmaxResult softmax_lse(std::span<const double> logits,
                          std::optional<std::span<const double>> mask = std::nullopt);

double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace tpa
