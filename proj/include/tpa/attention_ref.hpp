#pragma once

#include <span>
#include <vector>

#include "tpa/factor.hpp"
#include "tpa/linalg.hpp"

namespace tpa {

// Dense T x h x d_h tensor. Only the reference path materializes these; the
// decode paths stay in factor space.
struct HeadTensor {
    std::size_t tokens = 0;
    std::size_t heads = 0;
    std::size_t head_dim = 0;
    std::vector<double> data;  // [t][head][feature]

    HeadTensor() = default;
    HeadTensor(std::size_t t, std::size_t h, std::size_t d)
        : tokens(t), heads(h), head_dim(d), data(t * h * d, 0.0) {}

    double& at(std::size_t t, std::size_t i, std::size_t j) {
        return data[(t * heads + i) * head_dim + j];
    }
    double at(std::size_t t, std::size_t i, std::size_t j) const {
        return data[(t * heads + i) * head_dim + j];
    }
    std::span<double> vec(std::size_t t, std::size_t i) {
        return {data.data() + (t * heads + i) * head_dim, head_dim};
    }
    std::span<const double> vec(std::size_t t, std::size_t i) const {
        return {data.data() + (t * heads + i) * head_dim, head_dim};
    }
};

// Stack per-token materialized factor blocks into a HeadTensor.
HeadTensor materialize_sequence(std::span<const FactorBlock> blocks);

// Ground-truth scaled dot-product attention over materialized tensors,
// per head: softmax(Q K^T / sqrt(d_h)) V. Causal masking requires
// Q.tokens == K.tokens. Output is T x h x d_h; the W_O projection is the
// caller's business. O(T^2), test/oracle use only.
HeadTensor attention_reference(const HeadTensor& q, const HeadTensor& k, const HeadTensor& v,
                               bool causal);

// Per-head projections, column convention q_i = (W_i^Q)^T x. Each matrix is
// d_model x d_h.
struct MhaWeights {
    std::vector<Matrix> w_q, w_k, w_v;  // h entries each
    Matrix w_out;                       // (h*d_h) x d_model
};

struct MqaWeights {
    std::vector<Matrix> w_q;  // h entries
    Matrix w_k, w_v;          // shared, d_model x d_h
    Matrix w_out;
};

struct GqaWeights {
    std::vector<Matrix> w_q;       // h entries
    std::vector<Matrix> w_k, w_v;  // one per group
    Matrix w_out;
};

// Non-contextual TPA constructions: rank h with head factors h*e_i for MHA,
// rank 1 with 1_h for MQA, rank G with G*mask_j for GQA. Materializing the
// results reproduces each mechanism's per-token head matrices exactly.
FactorWeights mha_as_tpa(const MhaWeights& w, std::size_t d_model);
FactorWeights mqa_as_tpa(const MqaWeights& w, std::size_t d_model);
FactorWeights gqa_as_tpa(const GqaWeights& w, std::size_t d_model, std::size_t groups);

}  // namespace tpa
