#include "tpa/mechanisms.hpp"

#include <cmath>
#include <stdexcept>

namespace tpa {

namespace {

// Per-head masked attention over already-projected T x d_h matrices.
void attend_head(const Matrix& q, const Matrix& k, const Matrix& v, bool causal,
                 std::size_t head, HeadTensor& out) {
    const std::size_t tokens = q.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    std::vector<double> logits(tokens), mask(tokens);
    for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t s = 0; s < tokens; ++s) {
            double dot = 0.0;
            for (std::size_t j = 0; j < q.cols(); ++j) dot += q(t, j) * k(s, j);
            logits[s] = scale * dot;
            mask[s] = causal && s > t ? kMaskedLogit : 0.0;
        }
        const auto sm = softmax_lse(logits, std::span<const double>(mask));
        auto o = out.vec(t, head);
        for (std::size_t s = 0; s < tokens; ++s) {
            const double p = sm.probs[s];
            if (p == 0.0) continue;
            for (std::size_t j = 0; j < v.cols(); ++j) o[j] += p * v(s, j);
        }
    }
}

// rows of X projected through a d_model x d_h matrix: (X W)
Matrix project(const Matrix& x, const Matrix& w) {
    if (w.rows() != x.cols()) {
        throw std::invalid_argument("mechanism projection must be d_model x d_h");
    }
    return matmul(x, w);
}

}  // namespace

HeadTensor mha_forward(const Matrix& x, const MhaWeights& w, bool causal) {
    const std::size_t h = w.w_q.size();
    HeadTensor out(x.rows(), h, w.w_q[0].cols());
    for (std::size_t i = 0; i < h; ++i) {
        attend_head(project(x, w.w_q[i]), project(x, w.w_k[i]), project(x, w.w_v[i]), causal, i,
                    out);
    }
    return out;
}

HeadTensor mqa_forward(const Matrix& x, const MqaWeights& w, bool causal) {
    const std::size_t h = w.w_q.size();
    const Matrix k = project(x, w.w_k);
    const Matrix v = project(x, w.w_v);
    HeadTensor out(x.rows(), h, w.w_k.cols());
    for (std::size_t i = 0; i < h; ++i) {
        attend_head(project(x, w.w_q[i]), k, v, causal, i, out);
    }
    return out;
}

HeadTensor gqa_forward(const Matrix& x, const GqaWeights& w, std::size_t groups, bool causal) {
    const std::size_t h = w.w_q.size();
    if (groups == 0 || h % groups != 0) {
        throw std::invalid_argument("gqa_forward: heads must divide into groups");
    }
    const std::size_t per_group = h / groups;
    std::vector<Matrix> k, v;
    for (std::size_t j = 0; j < groups; ++j) {
        k.push_back(project(x, w.w_k[j]));
        v.push_back(project(x, w.w_v[j]));
    }
    HeadTensor out(x.rows(), h, w.w_k[0].cols());
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t g = i / per_group;
        attend_head(project(x, w.w_q[i]), k[g], v[g], causal, i, out);
    }
    return out;
}

}  // namespace tpa
