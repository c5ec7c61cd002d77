#pragma once

#include <cstdint>
#include <vector>

#include "tpa/factor.hpp"
#include "tpa/linalg.hpp"

namespace tpa {

// Precomputed rotary angles for an even dimension. Convention used across
// the project: vectors are rows and the rotation post-multiplies,
// rope(v) = v * R_t. Angles follow theta_j = base^(-2j/dim) for
// j in [0, dim/2); negative positions are allowed and give the transpose
// rotation (R_{-t} = R_t^T).
class RopeTable {
public:
    RopeTable(std::size_t dim, double base = 10000.0);
    // Explicit angle schedule, dim = 2 * angles.size(). The relative-position
    // identity holds for any fixed schedule.
    explicit RopeTable(std::vector<double> angles);

    std::size_t dim() const { return 2 * angles_.size(); }
    double base() const { return base_; }
    const std::vector<double>& angles() const { return angles_; }

private:
    double base_;
    std::vector<double> angles_;
};

// Block-diagonal rotation R_t, dim x dim, orthogonal.
Matrix rotation_matrix(const RopeTable& table, std::int64_t t);

// Each row v of m replaced by v * R_t. Row norms are preserved.
Matrix apply_rope_rows(const RopeTable& table, std::int64_t t, const Matrix& m);

// Pre-rotated key factors per the caching rule: B <- rope_t(B), A untouched.
FactorBlock pre_rotate_key(const FactorBlock& block, std::int64_t t, const RopeTable& table);

// Higher-order transform T_t = I_{d_c} (x) R_t^T over d_h = d_b * d_c,
// block-diagonal with d_c copies of R_t^T. Post-multiplying a row vec(b c^T)
// by T_t rotates the b component: vec((R_t b) c^T).
Matrix higher_order_transform(const RopeTable& table, std::int64_t t, std::size_t d_c);

}  // namespace tpa
