#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tpa/factor.hpp"
#include "tpa/rope.hpp"

namespace tpa {

// Pre-norm residual transformer block weights: attention sublayer (TPA with
// its output projection) and a SwiGLU feed-forward.
struct BlockWeights {
    FactorWeights tpa;
    std::vector<double> rms_gain_attn;  // d_model
    std::vector<double> rms_gain_ffn;   // d_model
    Matrix w1, w2;  // d_model x d_ff
    Matrix w3;      // d_ff x d_model

    static BlockWeights init(const TpaConfig& cfg, std::size_t d_ff, std::uint64_t seed);
};

// SwiGLU convention: 8/3 * d_model rounded up to a multiple of 8.
std::size_t default_ffn_dim(std::size_t d_model);

// x / sqrt(mean(x^2) + eps) * gain, eps = 1e-6
std::vector<double> rms_norm(std::span<const double> x, std::span<const double> gain);

// [silu(x W1) (*) (x W2)] W3, x as a row vector
std::vector<double> swiglu_ffn(std::span<const double> x, const Matrix& w1, const Matrix& w2,
                               const Matrix& w3);

// One block: x <- x + TPA(rmsnorm(x)); x <- x + FFN(rmsnorm(x)).
// The attention sublayer factorizes every row, pre-rotates the Q and K
// feature factors at each row's position (+ position_offset) and runs the
// causal factor-space attention, then projects through W_O.
Matrix block_forward(const Matrix& x, const BlockWeights& w, const TpaConfig& cfg,
                     const RopeTable& rope, bool causal = true,
                     std::int64_t position_offset = 0);

}  // namespace tpa
