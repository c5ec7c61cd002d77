#include "tpa/attention_ref.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tpa {

HeadTensor materialize_sequence(std::span<const FactorBlock> blocks) {
    if (blocks.empty()) {
        throw std::invalid_argument("materialize_sequence: empty sequence");
    }
    const Matrix first = materialize(blocks[0]);
    HeadTensor out(blocks.size(), first.rows(), first.cols());
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        const Matrix m = t == 0 ? first : materialize(blocks[t]);
        if (m.rows() != out.heads || m.cols() != out.head_dim) {
            throw std::invalid_argument("materialize_sequence: inconsistent block shapes");
        }
        for (std::size_t i = 0; i < out.heads; ++i) {
            auto dst = out.vec(t, i);
            auto src = m.row(i);
            std::copy(src.begin(), src.end(), dst.begin());
        }
    }
    return out;
}

HeadTensor attention_reference(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                               bool causal) {
    if (q.tokens == 0 || k.tokens == 0) {
        throw std::invalid_argument("attention_reference: empty sequence");
    }
    if (q.heads != k.heads || q.heads != v.heads || q.head_dim != k.head_dim) {
        throw std::invalid_argument("attention_reference: head shape mismatch");
    }
    if (k.tokens != v.tokens) {
        throw std::invalid_argument("attention_reference: K/V token count mismatch");
    }
    if (causal && q.tokens != k.tokens) {
        throw std::invalid_argument("attention_reference: causal requires equal lengths");
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(q.head_dim));
    HeadTensor out(q.tokens, q.heads, v.head_dim);
    std::vector<double> logits(k.tokens);
    std::vector<double> mask(k.tokens);

    for (std::size_t i = 0; i < q.heads; ++i) {
        for (std::size_t t = 0; t < q.tokens; ++t) {
            const auto qv = q.vec(t, i);
            for (std::size_t s = 0; s < k.tokens; ++s) {
                const auto kv = k.vec(s, i);
                double dot = 0.0;
                for (std::size_t j = 0; j < q.head_dim; ++j) dot += qv[j] * kv[j];
                logits[s] = scale * dot;
                mask[s] = causal && s > t ? kMaskedLogit : 0.0;
            }
            const auto sm = softmax_lse(logits, std::span<const double>(mask));
            auto o = out.vec(t, i);
            for (std::size_t s = 0; s < k.tokens; ++s) {
                const double p = sm.probs[s];
                if (p == 0.0) continue;
                const auto vv = v.vec(s, i);
                for (std::size_t j = 0; j < v.head_dim; ++j) o[j] += p * vv[j];
            }
        }
    }
    return out;
}

namespace {

// Merged-rank B map whose rank-r slice is (W_r)^T, so b_r(x) = (W_r)^T x.
Matrix stack_projections(const std::vector<Matrix>& w, std::size_t d_model, std::size_t d_h) {
    Matrix out(w.size() * d_h, d_model);
    for (std::size_t r = 0; r < w.size(); ++r) {
        if (w[r].rows() != d_model || w[r].cols() != d_h) {
            throw std::invalid_argument("as_tpa: projection must be d_model x d_h");
        }
        for (std::size_t i = 0; i < d_h; ++i) {
            for (std::size_t j = 0; j < d_model; ++j) {
                out(r * d_h + i, j) = w[r](j, i);
            }
        }
    }
    return out;
}

}  // namespace

FactorWeights mha_as_tpa(const MhaWeights& w, std::size_t d_model) {
    const std::size_t h = w.w_q.size();
    if (h == 0 || w.w_k.size() != h || w.w_v.size() != h) {
        throw std::invalid_argument("mha_as_tpa: need one Q/K/V projection per head");
    }
    const std::size_t d_h = w.w_q[0].cols();

    FactorWeights fw;
    fw.cfg = TpaConfig{d_model, h, d_h, h, h, h, TpaVariant::NonContextualA};
    fw.cfg.validate();

    // a_i = h * e_i; the 1/R = 1/h prefactor cancels the scaling exactly
    Matrix basis(h, h);
    for (std::size_t i = 0; i < h; ++i) basis(i, i) = static_cast<double>(h);
    fw.fixed_a_q = basis;
    fw.fixed_a_k = basis;
    fw.fixed_a_v = basis;

    fw.w_b_q = stack_projections(w.w_q, d_model, d_h);
    fw.w_b_k = stack_projections(w.w_k, d_model, d_h);
    fw.w_b_v = stack_projections(w.w_v, d_model, d_h);
    fw.w_out = w.w_out;
    return fw;
}

FactorWeights mqa_as_tpa(const MqaWeights& w, std::size_t d_model) {
    const std::size_t h = w.w_q.size();
    if (h == 0) {
        throw std::invalid_argument("mqa_as_tpa: need one Q projection per head");
    }
    const std::size_t d_h = w.w_k.cols();

    FactorWeights fw;
    fw.cfg = TpaConfig{d_model, h, d_h, h, 1, 1, TpaVariant::NonContextualA};
    fw.cfg.validate();

    Matrix basis(h, h);
    for (std::size_t i = 0; i < h; ++i) basis(i, i) = static_cast<double>(h);
    fw.fixed_a_q = basis;
    // single shared K/V head: a = 1_h, rank 1, no extra scaling
    fw.fixed_a_k = Matrix(1, h, 1.0);
    fw.fixed_a_v = Matrix(1, h, 1.0);

    fw.w_b_q = stack_projections(w.w_q, d_model, d_h);
    fw.w_b_k = stack_projections({w.w_k}, d_model, d_h);
    fw.w_b_v = stack_projections({w.w_v}, d_model, d_h);
    fw.w_out = w.w_out;
    return fw;
}

FactorWeights gqa_as_tpa(const GqaWeights& w, std::size_t d_model, std::size_t groups) {
    const std::size_t h = w.w_q.size();
    if (h == 0 || groups == 0 || h % groups != 0) {
        throw std::invalid_argument("gqa_as_tpa: head count must divide into groups");
    }
    if (w.w_k.size() != groups || w.w_v.size() != groups) {
        throw std::invalid_argument("gqa_as_tpa: need one K/V projection per group");
    }
    const std::size_t d_h = w.w_k[0].cols();
    const std::size_t per_group = h / groups;

    FactorWeights fw;
    fw.cfg = TpaConfig{d_model, h, d_h, h, groups, groups, TpaVariant::NonContextualA};
    fw.cfg.validate();

    Matrix basis(h, h);
    for (std::size_t i = 0; i < h; ++i) basis(i, i) = static_cast<double>(h);
    fw.fixed_a_q = basis;

    // a_j = G * mask_j over the j-th contiguous block of h/G heads
    Matrix group_mask(groups, h);
    for (std::size_t j = 0; j < groups; ++j) {
        for (std::size_t i = j * per_group; i < (j + 1) * per_group; ++i) {
            group_mask(j, i) = static_cast<double>(groups);
        }
    }
    fw.fixed_a_k = group_mask;
    fw.fixed_a_v = group_mask;

    fw.w_b_q = stack_projections(w.w_q, d_model, d_h);
    fw.w_b_k = stack_projections(w.w_k, d_model, d_h);
    fw.w_b_v = stack_projections(w.w_v, d_model, d_h);
    fw.w_out = w.w_out;
    return fw;
}

}  // namespace tpa
