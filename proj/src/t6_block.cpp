#include "tpa/t6_block.hpp"

#include <cmath>
#include <stdexcept>

#include "tpa/flash_decode.hpp"

namespace tpa {

namespace {
constexpr double kRmsEps = 1e-6;
}

std::size_t default_ffn_dim(std::size_t d_model) {
    const std::size_t raw = (8 * d_model + 2) / 3;  // ceil(8/3 * d_model)
    return (raw + 7) / 8 * 8;
}

BlockWeights BlockWeights::init(const TpaConfig& cfg, std::size_t d_ff, std::uint64_t seed) {
    if (d_ff < 1) {
        throw std::invalid_argument("BlockWeights: d_ff must be >= 1");
    }
    BlockWeights w;
    w.tpa = FactorWeights::init(cfg, seed);
    w.rms_gain_attn.assign(cfg.d_model, 1.0);
    w.rms_gain_ffn.assign(cfg.d_model, 1.0);
    w.w1 = xavier_init(cfg.d_model, d_ff, seed + 1);
    w.w1 = transpose(w.w1);  // stored d_model x d_ff for row-vector products
    w.w2 = transpose(xavier_init(cfg.d_model, d_ff, seed + 2));
    w.w3 = transpose(xavier_init(d_ff, cfg.d_model, seed + 3));
    return w;
}

std::vector<double> rms_norm(std::span<const double> x, std::span<const double> gain) {
    if (x.size() != gain.size()) {
        throw std::invalid_argument("rms_norm: gain length mismatch");
    }
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(ms + kRmsEps);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gain[i];
    return out;
}

std::vector<double> swiglu_ffn(std::span<const double> x, const Matrix& w1, const Matrix& w2,
                               const Matrix& w3) {
    if (w1.rows() != x.size() || w2.rows() != x.size() || w1.cols() != w2.cols() ||
        w3.rows() != w1.cols()) {
        throw std::invalid_argument("swiglu_ffn: weight shapes disagree");
    }
    const std::size_t d_ff = w1.cols();
    std::vector<double> gated(d_ff);
    for (std::size_t j = 0; j < d_ff; ++j) {
        double u = 0.0, g = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            u += x[i] * w1(i, j);
            g += x[i] * w2(i, j);
        }
        const double silu = u / (1.0 + std::exp(-u));
        gated[j] = silu * g;
    }
    std::vector<double> out(w3.cols(), 0.0);
    for (std::size_t j = 0; j < d_ff; ++j) {
        const double gj = gated[j];
        const auto row = w3.row(j);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += gj * row[k];
    }
    return out;
}

Matrix block_forward(const Matrix& x, const BlockWeights& w, const TpaConfig& cfg,
                     const RopeTable& rope, bool causal, std::int64_t position_offset) {
    cfg.validate();
    if (x.rows() < 1 || x.cols() != cfg.d_model) {
        throw std::invalid_argument("block_forward: input must be T x d_model, T >= 1");
    }
    const std::size_t tokens = x.rows();
    const std::size_t h = cfg.heads, dh = cfg.head_dim;

    // attention sublayer on the pre-normed rows
    std::vector<FactorBlock> q_blocks, k_blocks, v_blocks;
    q_blocks.reserve(tokens);
    k_blocks.reserve(tokens);
    v_blocks.reserve(tokens);
    for (std::size_t t = 0; t < tokens; ++t) {
        const auto normed = rms_norm(x.row(t), w.rms_gain_attn);
        TokenFactors f = compute_factors(w.tpa, cfg, normed);
        const std::int64_t pos = static_cast<std::int64_t>(t) + position_offset;
        if (cfg.variant == TpaVariant::KVonly) {
            // dense query expressed as a rank-h block with head factors h*e_i,
            // which materializes back to the rotated query exactly
            FactorBlock q;
            q.a = Matrix(h, h);
            for (std::size_t i = 0; i < h; ++i) q.a(i, i) = static_cast<double>(h);
            q.b = apply_rope_rows(rope, pos, f.q_dense);
            q_blocks.push_back(std::move(q));
        } else {
            FactorBlock q = f.q;
            q.b = apply_rope_rows(rope, pos, q.b);
            q_blocks.push_back(std::move(q));
        }
        k_blocks.push_back(pre_rotate_key(f.k, pos, rope));
        v_blocks.push_back(std::move(f.v));
    }

    const Matrix mask = causal ? causal_mask(tokens) : Matrix(tokens, tokens, 0.0);
    const HeadTensor attn = specialized_full_attention(q_blocks, k_blocks, v_blocks, mask);

    // concat heads, project through W_O, add residuals
    Matrix out(tokens, cfg.d_model);
    std::vector<double> concat(h * dh);
    for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t i = 0; i < h; ++i) {
            const auto hv = attn.vec(t, i);
            std::copy(hv.begin(), hv.end(), concat.begin() + i * dh);
        }
        auto orow = out.row(t);
        const auto xrow = x.row(t);
        for (std::size_t d = 0; d < cfg.d_model; ++d) orow[d] = xrow[d];
        for (std::size_t j = 0; j < concat.size(); ++j) {
            const double cj = concat[j];
            const auto wrow = w.tpa.w_out.row(j);
            for (std::size_t d = 0; d < cfg.d_model; ++d) orow[d] += cj * wrow[d];
        }
    }

    // feed-forward sublayer
    for (std::size_t t = 0; t < tokens; ++t) {
        auto orow = out.row(t);
        const auto normed = rms_norm(orow, w.rms_gain_ffn);
        const auto f = swiglu_ffn(normed, w.w1, w.w2, w.w3);
        for (std::size_t d = 0; d < cfg.d_model; ++d) orow[d] += f[d];
    }
    return out;
}

}  // namespace tpa
