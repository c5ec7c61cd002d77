#include "tpa/flash_decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

namespace tpa {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Token-major views over the four cached factor arrays.
struct FactorView {
    std::size_t count = 0;
    std::size_t rank_k = 0, rank_v = 0;
    std::size_t heads = 0, dh = 0, e = 0;
    const double* a_k = nullptr;  // count x (rank_k * heads)
    const double* b_k = nullptr;  // count x (rank_k * dh)
    const double* a_v = nullptr;  // count x (rank_v * heads)
    const double* b_v = nullptr;  // count x (rank_v * e)
};

FactorView view_of(const FactorizedKvCache& cache) {
    FactorView v;
    v.count = cache.size();
    v.rank_k = cache.config().rank_k;
    v.rank_v = cache.config().rank_v;
    v.heads = cache.config().heads;
    v.dh = cache.config().head_dim;
    v.e = cache.config().head_dim;
    v.a_k = cache.raw_a_k().data();
    v.b_k = cache.raw_b_k().data();
    v.a_v = cache.raw_a_v().data();
    v.b_v = cache.raw_b_v().data();
    return v;
}

// Query side: either factorized (a,b) or dense h x dh rows.
struct QueryView {
    std::size_t rank_q = 0;  // 0 => dense
    const Matrix* a = nullptr;
    const Matrix* b = nullptr;
    const Matrix* dense = nullptr;
};

// Process cache tokens [begin, end) in blocks of `block_size`, fusing each
// block into `st` with the online log-sum-exp update.
//
// Counting runs always take the rank-general path so the three counters stay
// aligned with the score/mix/value contractions; uncounted rank-1 K/V decode
// takes the Hadamard-structured fast path (S1 -> S2 -> S2 (*) a_K).
template <bool Counting>
void run_blocks(const QueryView& q, const FactorView& kv, std::span<const double> mask,
                std::size_t begin, std::size_t end, std::size_t block_size, DecodeState& st,
                MacCounters* counters) {
    const std::size_t h = kv.heads, dh = kv.dh, e = kv.e;
    const std::size_t rk = kv.rank_k, rv = kv.rank_v;
    const double s_k = 1.0 / static_cast<double>(rk);
    const double s_total = 1.0 / std::sqrt(static_cast<double>(dh));
    const double c_scale =
        q.rank_q > 0 ? s_total * s_k / static_cast<double>(q.rank_q) : s_total * s_k;
    const bool rank1_fast = !Counting && q.rank_q > 0 && rk == 1 && rv == 1;

    std::uint64_t n_score = 0, n_mix = 0, n_value = 0;

    std::vector<double> p(q.rank_q > 0 ? q.rank_q * rk : 0);  // feature dots, R_Q x R_K
    std::vector<double> s1(q.rank_q);                         // rank-1 chunk dots
    std::vector<double> logits;                               // h x block
    std::vector<double> m_blk(h), s_blk(h);
    std::vector<double> v_mix(e);

    for (std::size_t b0 = begin; b0 < end; b0 += block_size) {
        const std::size_t b1 = std::min(b0 + block_size, end);
        const std::size_t blk = b1 - b0;
        logits.assign(h * blk, 0.0);

        // (1) head-shared feature dots and (2) per-head rank mixing
        for (std::size_t j = 0; j < blk; ++j) {
            const std::size_t tok = b0 + j;
            const double* bk = kv.b_k + tok * rk * dh;
            const double* ak = kv.a_k + tok * rk * h;
            const double mask_add = mask.empty() ? 0.0 : mask[tok];

            if (rank1_fast) {
                // S1 <- b_K . B_Q rows; S2 <- S1 A_Q; S3 <- S2 (*) a_K * scale
                const std::size_t rq = q.rank_q;
                for (std::size_t r = 0; r < rq; ++r) {
                    const auto bq = q.b->row(r);
                    double acc = 0.0;
                    for (std::size_t d = 0; d < dh; ++d) acc += bq[d] * bk[d];
                    s1[r] = acc;
                }
                for (std::size_t i = 0; i < h; ++i) {
                    double s2 = 0.0;
                    for (std::size_t r = 0; r < rq; ++r) s2 += s1[r] * (*q.a)(r, i);
                    logits[i * blk + j] = c_scale * s2 * ak[i] + mask_add;
                }
            } else if (q.rank_q > 0) {
                const std::size_t rq = q.rank_q;
                for (std::size_t r = 0; r < rq; ++r) {
                    const auto bq = q.b->row(r);
                    for (std::size_t s = 0; s < rk; ++s) {
                        const double* bks = bk + s * dh;
                        double acc = 0.0;
                        for (std::size_t d = 0; d < dh; ++d) {
                            acc += bq[d] * bks[d];
                            if constexpr (Counting) ++n_score;
                        }
                        p[r * rk + s] = acc;
                    }
                }
                for (std::size_t i = 0; i < h; ++i) {
                    double acc = 0.0;
                    for (std::size_t s = 0; s < rk; ++s) {
                        const double aks = ak[s * h + i];
                        for (std::size_t r = 0; r < rq; ++r) {
                            acc += (*q.a)(r, i) * aks * p[r * rk + s];
                            if constexpr (Counting) ++n_mix;
                        }
                    }
                    logits[i * blk + j] = c_scale * acc + mask_add;
                }
            } else {
                // dense query: per-head feature dots, no head sharing
                for (std::size_t i = 0; i < h; ++i) {
                    const auto qrow = q.dense->row(i);
                    double acc = 0.0;
                    for (std::size_t s = 0; s < rk; ++s) {
                        const double* bks = bk + s * dh;
                        double dot = 0.0;
                        for (std::size_t d = 0; d < dh; ++d) {
                            dot += qrow[d] * bks[d];
                            if constexpr (Counting) ++n_score;
                        }
                        acc += ak[s * h + i] * dot;
                        if constexpr (Counting) ++n_mix;
                    }
                    logits[i * blk + j] = c_scale * acc + mask_add;
                }
            }
        }

        // (3) block max + exp; (4) value mixing; (5) log-sum-exp fuse
        for (std::size_t i = 0; i < h; ++i) {
            double mb = kNegInf;
            for (std::size_t j = 0; j < blk; ++j) mb = std::max(mb, logits[i * blk + j]);
            m_blk[i] = mb;
        }
        for (std::size_t i = 0; i < h; ++i) {
            if (m_blk[i] <= kMaskedThreshold) continue;  // fully masked block: no update
            double sb = 0.0;
            for (std::size_t j = 0; j < blk; ++j) {
                const double l = logits[i * blk + j];
                const double pe = l <= kMaskedThreshold ? 0.0 : std::exp(l - m_blk[i]);
                logits[i * blk + j] = pe;  // reuse as probabilities
                sb += pe;
            }
            s_blk[i] = sb;
        }

        for (std::size_t i = 0; i < h; ++i) {
            if (m_blk[i] <= kMaskedThreshold) continue;
            // ties keep the new block max
            const double m_new = m_blk[i] >= st.m[i] ? m_blk[i] : st.m[i];
            const double scale_old = std::exp(st.m[i] - m_new);
            const double scale_blk = std::exp(m_blk[i] - m_new);

            auto yrow = st.y.row(i);
            for (std::size_t d = 0; d < e; ++d) yrow[d] *= scale_old;

            for (std::size_t j = 0; j < blk; ++j) {
                const double pe = logits[i * blk + j];
                if (pe == 0.0) continue;
                const std::size_t tok = b0 + j;
                const double* av = kv.a_v + tok * rv * h;
                const double* bv = kv.b_v + tok * rv * e;
                if (rank1_fast) {
                    const double w = scale_blk * pe * av[i];
                    for (std::size_t d = 0; d < e; ++d) yrow[d] += w * bv[d];
                    continue;
                }
                std::fill(v_mix.begin(), v_mix.end(), 0.0);
                for (std::size_t u = 0; u < rv; ++u) {
                    const double avu = av[u * h + i];
                    const double* bvu = bv + u * e;
                    for (std::size_t d = 0; d < e; ++d) {
                        v_mix[d] += avu * bvu[d];
                        if constexpr (Counting) ++n_value;
                    }
                }
                const double w = scale_blk * pe;
                for (std::size_t d = 0; d < e; ++d) yrow[d] += w * v_mix[d];
            }

            st.norm[i] = st.norm[i] * scale_old + s_blk[i] * scale_blk;
            st.m[i] = m_new;
        }
    }

    if constexpr (Counting) {
        counters->score += n_score;
        counters->mix += n_mix;
        counters->value += n_value;
    }
}

void run_blocks_dispatch(const QueryView& q, const FactorView& kv, std::span<const double> mask,
                         std::size_t begin, std::size_t end, std::size_t block_size,
                         DecodeState& st, MacCounters* counters) {
    if (counters != nullptr) {
        run_blocks<true>(q, kv, mask, begin, end, block_size, st, counters);
    } else {
        run_blocks<false>(q, kv, mask, begin, end, block_size, st, nullptr);
    }
}

Matrix finalize(const DecodeState& st, std::size_t rank_v) {
    const double s_v = 1.0 / static_cast<double>(rank_v);
    Matrix out(st.y.rows(), st.y.cols());
    for (std::size_t i = 0; i < st.y.rows(); ++i) {
        if (st.norm[i] == 0.0) {
            throw std::domain_error("flash_decode: every cache entry masked for head " +
                                    std::to_string(i));
        }
        const double inv = s_v / st.norm[i];
        auto o = out.row(i);
        auto y = st.y.row(i);
        for (std::size_t d = 0; d < st.y.cols(); ++d) o[d] = y[d] * inv;
    }
    if (!out.all_finite()) {
        throw std::domain_error("flash_decode: non-finite output rows");
    }
    return out;
}

void check_decode_args(const QueryView& q, const FactorizedKvCache& cache, std::size_t block_size,
                       std::span<const double> mask) {
    if (cache.empty()) {
        throw std::invalid_argument("flash_decode: empty cache");
    }
    if (block_size < 1) {
        throw std::invalid_argument("flash_decode: block_size must be >= 1");
    }
    if (!mask.empty() && mask.size() != cache.size()) {
        throw std::invalid_argument("flash_decode: mask length != cache length");
    }
    const auto& cfg = cache.config();
    if (q.rank_q > 0) {
        if (q.a->cols() != cfg.heads || q.b->cols() != cfg.head_dim ||
            q.a->rows() != q.b->rows()) {
            throw std::invalid_argument("flash_decode: query factor shape mismatch");
        }
        if (!q.a->all_finite() || !q.b->all_finite()) {
            throw std::invalid_argument("flash_decode: non-finite query factors");
        }
    } else {
        if (q.dense->rows() != cfg.heads || q.dense->cols() != cfg.head_dim) {
            throw std::invalid_argument("flash_decode: dense query must be h x d_h");
        }
        if (!q.dense->all_finite()) {
            throw std::invalid_argument("flash_decode: non-finite query");
        }
    }
}

}  // namespace

std::string MacCounters::to_json() const {
    return "{\"mac_score\": " + std::to_string(score) + ", \"mac_mix\": " + std::to_string(mix) +
           ", \"mac_value\": " + std::to_string(value) + "}";
}

DecodeState DecodeState::initial(std::size_t heads, std::size_t e) {
    DecodeState st;
    st.y = Matrix(heads, e);
    st.norm.assign(heads, 0.0);
    st.m.assign(heads, kNegInf);
    return st;
}

double DecodeState::log_sum_exp(std::size_t head) const {
    return std::log(norm[head]) + m[head];
}

void merge_state(DecodeState& acc, const DecodeState& later) {
    for (std::size_t i = 0; i < acc.norm.size(); ++i) {
        if (later.norm[i] == 0.0) continue;
        if (acc.norm[i] == 0.0) {
            acc.m[i] = later.m[i];
            acc.norm[i] = later.norm[i];
            auto dst = acc.y.row(i);
            auto src = later.y.row(i);
            std::copy(src.begin(), src.end(), dst.begin());
            continue;
        }
        const double m_new = later.m[i] >= acc.m[i] ? later.m[i] : acc.m[i];
        const double sa = std::exp(acc.m[i] - m_new);
        const double sb = std::exp(later.m[i] - m_new);
        auto ya = acc.y.row(i);
        auto yb = later.y.row(i);
        for (std::size_t d = 0; d < ya.size(); ++d) ya[d] = ya[d] * sa + yb[d] * sb;
        acc.norm[i] = acc.norm[i] * sa + later.norm[i] * sb;
        acc.m[i] = m_new;
    }
}

Matrix flash_decode(const FactorBlock& q, const FactorizedKvCache& cache, std::size_t block_size,
                    std::span<const double> mask, MacCounters* counters) {
    if (q.rank() == 0) {
        throw std::invalid_argument("flash_decode: empty query factors");
    }
    QueryView qv{q.rank(), &q.a, &q.b, nullptr};
    check_decode_args(qv, cache, block_size, mask);
    const auto kv = view_of(cache);
    DecodeState st = DecodeState::initial(kv.heads, kv.e);
    run_blocks_dispatch(qv, kv, mask, 0, kv.count, block_size, st, counters);
    return finalize(st, kv.rank_v);
}

DecodeState decode_partial(const FactorBlock& q, const FactorizedKvCache& cache,
                           std::size_t block_size, std::size_t begin, std::size_t end,
                           std::span<const double> mask) {
    if (q.rank() == 0) {
        throw std::invalid_argument("decode_partial: empty query factors");
    }
    QueryView qv{q.rank(), &q.a, &q.b, nullptr};
    check_decode_args(qv, cache, block_size, mask);
    if (begin > end || end > cache.size()) {
        throw std::invalid_argument("decode_partial: bad token range");
    }
    const auto kv = view_of(cache);
    DecodeState st = DecodeState::initial(kv.heads, kv.e);
    run_blocks<false>(qv, kv, mask, begin, end, block_size, st, nullptr);
    return st;
}

Matrix decode_finalize(const DecodeState& st, std::size_t rank_v) {
    return finalize(st, rank_v);
}

Matrix flash_decode_dense(const Matrix& q_dense, const FactorizedKvCache& cache,
                          std::size_t block_size, std::span<const double> mask,
                          MacCounters* counters) {
    QueryView qv{0, nullptr, nullptr, &q_dense};
    check_decode_args(qv, cache, block_size, mask);
    const auto kv = view_of(cache);
    DecodeState st = DecodeState::initial(kv.heads, kv.e);
    run_blocks_dispatch(qv, kv, mask, 0, kv.count, block_size, st, counters);
    return finalize(st, kv.rank_v);
}

Matrix flash_decode_parallel(const FactorBlock& q, const FactorizedKvCache& cache,
                             std::size_t block_size, std::size_t threads,
                             std::span<const double> mask) {
    if (q.rank() == 0) {
        throw std::invalid_argument("flash_decode: empty query factors");
    }
    QueryView qv{q.rank(), &q.a, &q.b, nullptr};
    check_decode_args(qv, cache, block_size, mask);
    const auto kv = view_of(cache);

    const std::size_t n_blocks = (kv.count + block_size - 1) / block_size;
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n_blocks));
    const std::size_t blocks_per = (n_blocks + workers - 1) / workers;

    std::vector<DecodeState> partials;
    partials.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        partials.push_back(DecodeState::initial(kv.heads, kv.e));
    }

    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(w * blocks_per * block_size, kv.count);
        const std::size_t end = std::min((w + 1) * blocks_per * block_size, kv.count);
        if (begin >= end) continue;
        pool.emplace_back([&, w, begin, end] {
            run_blocks<false>(qv, kv, mask, begin, end, block_size, partials[w], nullptr);
        });
    }
    for (auto& t : pool) t.join();

    DecodeState acc = std::move(partials[0]);
    for (std::size_t w = 1; w < workers; ++w) merge_state(acc, partials[w]);
    return finalize(acc, kv.rank_v);
}

HeadTensor specialized_full_attention(std::span<const FactorBlock> q_blocks,
                                      std::span<const FactorBlock> k_blocks,
                                      std::span<const FactorBlock> v_blocks, const Matrix& mask,
                                      std::size_t block_size, MacCounters* counters) {
    if (q_blocks.empty() || k_blocks.empty() || k_blocks.size() != v_blocks.size()) {
        throw std::invalid_argument("specialized_full_attention: empty or mismatched inputs");
    }
    if (mask.rows() != q_blocks.size() || mask.cols() != k_blocks.size()) {
        throw std::invalid_argument("specialized_full_attention: mask must be T_q x T_k");
    }

    const std::size_t h = k_blocks[0].a.cols();
    const std::size_t dh = k_blocks[0].b.cols();
    const std::size_t e = v_blocks[0].b.cols();
    const std::size_t rk = k_blocks[0].rank();
    const std::size_t rv = v_blocks[0].rank();

    // pack K/V factors token-major so the block engine can stream them
    std::vector<double> a_k, b_k, a_v, b_v;
    a_k.reserve(k_blocks.size() * rk * h);
    b_k.reserve(k_blocks.size() * rk * dh);
    a_v.reserve(v_blocks.size() * rv * h);
    b_v.reserve(v_blocks.size() * rv * e);
    for (std::size_t t = 0; t < k_blocks.size(); ++t) {
        if (k_blocks[t].a.cols() != h || k_blocks[t].b.cols() != dh ||
            k_blocks[t].rank() != rk || v_blocks[t].rank() != rv ||
            v_blocks[t].a.cols() != h || v_blocks[t].b.cols() != e) {
            throw std::invalid_argument("specialized_full_attention: inconsistent factor shapes");
        }
        auto push = [](std::vector<double>& dst, const Matrix& m) {
            dst.insert(dst.end(), m.data().begin(), m.data().end());
        };
        push(a_k, k_blocks[t].a);
        push(b_k, k_blocks[t].b);
        push(a_v, v_blocks[t].a);
        push(b_v, v_blocks[t].b);
    }

    FactorView kv;
    kv.count = k_blocks.size();
    kv.rank_k = rk;
    kv.rank_v = rv;
    kv.heads = h;
    kv.dh = dh;
    kv.e = e;
    kv.a_k = a_k.data();
    kv.b_k = b_k.data();
    kv.a_v = a_v.data();
    kv.b_v = b_v.data();

    HeadTensor out(q_blocks.size(), h, e);
    for (std::size_t tq = 0; tq < q_blocks.size(); ++tq) {
        QueryView qv{q_blocks[tq].rank(), &q_blocks[tq].a, &q_blocks[tq].b, nullptr};
        if (qv.rank_q == 0 || qv.a->cols() != h || qv.b->cols() != dh) {
            throw std::invalid_argument("specialized_full_attention: query factor shape mismatch");
        }
        DecodeState st = DecodeState::initial(h, e);
        run_blocks_dispatch(qv, kv, mask.row(tq), 0, kv.count, block_size, st, counters);
        Matrix row;
        try {
            row = finalize(st, rv);
        } catch (const std::domain_error&) {
            throw std::domain_error("specialized_full_attention: query row " + std::to_string(tq) +
                                    " is fully masked");
        }
        for (std::size_t i = 0; i < h; ++i) {
            auto dst = out.vec(tq, i);
            auto src = row.row(i);
            std::copy(src.begin(), src.end(), dst.begin());
        }
    }
    return out;
}

Matrix causal_mask(std::size_t tokens) {
    Matrix m(tokens, tokens);
    for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t s = t + 1; s < tokens; ++s) {
            m(t, s) = kMaskedLogit;
        }
    }
    return m;
}

DecodeLoopResult decode_loop(std::span<const std::vector<double>> tokens, const FactorWeights& w,
                             const TpaConfig& cfg, const RopeTable& rope,
                             std::size_t block_size) {
    if (tokens.empty()) {
        throw std::invalid_argument("decode_loop: empty token stream");
    }
    DecodeLoopResult res{{}, FactorizedKvCache(cfg)};
    res.outputs.reserve(tokens.size());

    for (std::size_t t = 0; t < tokens.size(); ++t) {
        TokenFactors f = compute_factors(w, cfg, tokens[t]);
        const auto pos = static_cast<std::int64_t>(t);
        const FactorBlock k_rot = pre_rotate_key(f.k, pos, rope);
        res.cache.append(k_rot, f.v, t);

        if (cfg.variant == TpaVariant::KVonly) {
            const Matrix q_rot = apply_rope_rows(rope, pos, f.q_dense);
            res.outputs.push_back(flash_decode_dense(q_rot, res.cache, block_size));
        } else {
            FactorBlock q_rot = f.q;
            q_rot.b = apply_rope_rows(rope, pos, f.q.b);
            res.outputs.push_back(flash_decode(q_rot, res.cache, block_size));
        }
    }
    return res;
}

Matrix materialized_decode(const Matrix& q_heads, const HeadTensor& k, const HeadTensor& v,
                           MacCounters* counters) {
    if (k.tokens == 0) {
        throw std::invalid_argument("materialized_decode: empty cache");
    }
    if (q_heads.rows() != k.heads || q_heads.cols() != k.head_dim) {
        throw std::invalid_argument("materialized_decode: query must be h x d_h");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(k.head_dim));
    Matrix out(k.heads, v.head_dim);
    std::vector<double> logits(k.tokens);
    std::uint64_t n_score = 0, n_value = 0;

    for (std::size_t i = 0; i < k.heads; ++i) {
        const auto qrow = q_heads.row(i);
        for (std::size_t s = 0; s < k.tokens; ++s) {
            const auto kv = k.vec(s, i);
            double dot = 0.0;
            for (std::size_t j = 0; j < k.head_dim; ++j) {
                dot += qrow[j] * kv[j];
                ++n_score;
            }
            logits[s] = scale * dot;
        }
        const auto sm = softmax_lse(logits);
        auto o = out.row(i);
        for (std::size_t s = 0; s < k.tokens; ++s) {
            const double p = sm.probs[s];
            const auto vv = v.vec(s, i);
            for (std::size_t j = 0; j < v.head_dim; ++j) {
                o[j] += p * vv[j];
                ++n_value;
            }
        }
    }
    if (counters != nullptr) {
        counters->score += n_score;
        counters->value += n_value;
    }
    return out;
}

}  // namespace tpa
