#pragma once

#include <cstdint>
#include <span>

#include "tpa/config.hpp"
#include "tpa/linalg.hpp"

namespace tpa {

// One token's factor pair for Q, K or V: A holds the head factors (rank x h),
// B the feature factors (rank x d_h). Third order adds C (rank x d_c) and
// narrows B to rank x d_b.
struct FactorBlock {
    Matrix a;
    Matrix b;
    Matrix c;  // empty unless third order

    std::size_t rank() const { return a.rows(); }
};

// Factor maps for one attention layer, merged-rank layout: a single
// (R*h) x d_model matrix per A map and (R*d_h) x d_model per B map, reshaped
// per token. Which members are populated depends on cfg.variant:
//   Full            w_a_*, w_b_* for q/k/v
//   KVonly          w_query_dense instead of w_a_q/w_b_q
//   NonContextualA  fixed_a_* instead of w_a_*
//   NonContextualB  fixed_b_* instead of w_b_*
//   SharedB         K and V share one B map; value_b_map() aliases w_b_k
struct FactorWeights {
    TpaConfig cfg;

    Matrix w_a_q, w_b_q, w_c_q;
    Matrix w_a_k, w_b_k, w_c_k;
    Matrix w_a_v, w_b_v, w_c_v;

    Matrix w_query_dense;                      // (h*d_h) x d_model
    Matrix fixed_a_q, fixed_a_k, fixed_a_v;    // R x h
    Matrix fixed_b_q, fixed_b_k, fixed_b_v;    // R x d_h

    Matrix w_out;  // (h*d_h) x d_model

    const Matrix& key_b_map() const { return w_b_k; }
    const Matrix& value_b_map() const {
        return cfg.variant == TpaVariant::SharedB ? w_b_k : w_b_v;
    }

    // Xavier-initialized weights, deterministic for a given seed.
    static FactorWeights init(const TpaConfig& cfg, std::uint64_t seed);
};

// Per-token factor output. `q` is empty for KVonly, which produces a dense
// h x d_h query matrix instead.
struct TokenFactors {
    FactorBlock q;
    Matrix q_dense;
    FactorBlock k;
    FactorBlock v;
};

// U(-bound, bound) with bound = sqrt(6/(n_in+n_out)); the draw sequence is
// fixed by the seed and independent of the standard library.
Matrix xavier_init(std::size_t n_in, std::size_t n_out, std::uint64_t seed);

// Latent factor maps applied to one hidden state: a(x) = W_a x reshaped to
// R x h, b(x) = W_b x reshaped to R x d_h (plus c(x) for third order).
// Non-contextual variants return their fixed blocks unchanged.
TokenFactors compute_factors(const FactorWeights& w, const TpaConfig& cfg,
                             std::span<const double> x_t);

// (1/R) * A^T B, i.e. (1/R) * sum_r outer(a_r, b_r)  ->  h x d_h
Matrix materialize(const FactorBlock& block);

// Third order: row contribution per r is vec(b_r c_r^T) with column stacking;
// result = (1/R) * sum_r outer(a_r, vec_r)  ->  h x (d_b*d_c)
Matrix materialize_third_order(const FactorBlock& block);

}  // namespace tpa
