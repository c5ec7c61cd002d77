#include "tpa/verify.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "json.hpp"
#include "tpa/attention_ref.hpp"
#include "tpa/cost_model.hpp"
#include "tpa/factor.hpp"
#include "tpa/flash_decode.hpp"
#include "tpa/kv_cache.hpp"
#include "tpa/linalg.hpp"
#include "tpa/mechanisms.hpp"
#include "tpa/rope.hpp"
#include "tpa/t6_block.hpp"

namespace tpa {

namespace {

struct Ctx {
    std::mt19937_64 gen;
    std::string fault;
    std::ostringstream why;

    explicit Ctx(std::uint64_t seed, std::string fault_name)
        : gen(seed), fault(std::move(fault_name)) {}

    double unit() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    double sym() { return 2.0 * unit() - 1.0; }

    Matrix rand_matrix(std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& v : m.data()) v = sym();
        return m;
    }
    std::vector<double> rand_vec(std::size_t n) {
        std::vector<double> v(n);
        for (double& x : v) x = sym();
        return v;
    }
    FactorBlock rand_block(std::size_t rank, std::size_t h, std::size_t dh) {
        return {rand_matrix(rank, h), rand_matrix(rank, dh), {}};
    }

    bool close(double measured, double tol, const char* what) {
        if (std::abs(measured) <= tol) return true;
        why << what << ": |" << measured << "| > " << tol << "; ";
        return false;
    }
};

using PropertyFn = std::function<bool(Ctx&)>;

// --- linalg ---------------------------------------------------------------

bool p_matmul_associativity(Ctx& c) {
    bool ok = true;
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix a = c.rand_matrix(4, 3), b = c.rand_matrix(3, 5), d = c.rand_matrix(5, 2);
        ok &= c.close(max_abs_diff(matmul(matmul(a, b), d), matmul(a, matmul(b, d))), 1e-10,
                      "(ab)d vs a(bd)");
    }
    return ok;
}

bool p_softmax_simplex(Ctx& c) {
    bool ok = true;
    for (int rep = 0; rep < 50; ++rep) {
        const auto logits = c.rand_vec(9);
        const auto sm = softmax_lse(logits);
        double sum = 0.0;
        for (double p : sm.probs) {
            sum += p;
            ok &= p >= 0.0;
        }
        ok &= c.close(sum - 1.0, 1e-12, "prob sum");
        auto shifted = logits;
        for (double& v : shifted) v += 3.25;
        const auto sm2 = softmax_lse(shifted);
        ok &= c.close(max_abs_diff(std::span<const double>(sm.probs), sm2.probs), 1e-12,
                      "shift invariance");
    }
    return ok;
}

bool p_outer_matches_matmul(Ctx& c) {
    const auto u = c.rand_vec(6), v = c.rand_vec(4);
    const Matrix col(u.size(), 1, u), row(1, v.size(), v);
    return c.close(max_abs_diff(outer(u, v), matmul(col, row)), 0.0, "outer vs matmul");
}

// --- tpa-factor -----------------------------------------------------------

bool p_factorization_outer_sum(Ctx& c) {
    bool ok = true;
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t rank = 1 + c.gen() % 4, h = 1 + c.gen() % 6, dh = 1 + c.gen() % 8;
        const FactorBlock blk = c.rand_block(rank, h, dh);
        Matrix expect(h, dh);
        for (std::size_t r = 0; r < rank; ++r) {
            const Matrix o = outer(blk.a.row(r), blk.b.row(r));
            for (std::size_t i = 0; i < expect.size(); ++i) {
                expect.data()[i] += o.data()[i] / static_cast<double>(rank);
            }
        }
        ok &= c.close(max_abs_diff(materialize(blk), expect), 1e-12, "materialize vs outer sum");
    }
    return ok;
}

bool p_factor_linearity(Ctx& c) {
    TpaConfig cfg{16, 2, 4, 2, 2, 2};
    const FactorWeights w = FactorWeights::init(cfg, c.gen());
    const auto x = c.rand_vec(cfg.d_model);
    auto scaled = x;
    for (double& v : scaled) v *= 3.0;
    const auto f = compute_factors(w, cfg, x);
    const auto g = compute_factors(w, cfg, scaled);
    Matrix want = f.q.a;
    for (double& v : want.data()) v *= 3.0;
    return c.close(max_abs_diff(g.q.a, want), 1e-12, "a(3x) vs 3a(x)");
}

bool p_shared_b_identity(Ctx& c) {
    TpaConfig cfg{12, 2, 4, 2, 2, 2, TpaVariant::SharedB};
    const FactorWeights w = FactorWeights::init(cfg, c.gen());
    if (&w.key_b_map() != &w.value_b_map()) {
        c.why << "B maps not aliased; ";
        return false;
    }
    const auto f = compute_factors(w, cfg, c.rand_vec(cfg.d_model));
    return c.close(max_abs_diff(f.k.b, f.v.b), 0.0, "k.B vs v.B");
}

bool p_kvonly_dense_query(Ctx& c) {
    TpaConfig cfg{12, 3, 4, 1, 1, 1, TpaVariant::KVonly};
    const FactorWeights w = FactorWeights::init(cfg, c.gen());
    const auto x = c.rand_vec(cfg.d_model);
    const auto f = compute_factors(w, cfg, x);
    const auto flat = matvec(w.w_query_dense, x);
    return c.close(max_abs_diff(f.q_dense.data(), flat), 0.0, "dense query vs projection");
}

// --- rope -------------------------------------------------------------------

bool p_rotation_orthogonality(Ctx& c) {
    const RopeTable table(8);
    bool ok = true;
    for (int rep = 0; rep < 10; ++rep) {
        const auto t = static_cast<std::int64_t>(c.gen() % 1024);
        const Matrix r = rotation_matrix(table, t);
        ok &= c.close(max_abs_diff(matmul(r, transpose(r)), Matrix::identity(8)), 1e-12,
                      "R R^T vs I");
    }
    return ok;
}

bool p_relative_position_identity(Ctx& c) {
    const std::size_t h = 3, dh = 6, rank = 2;
    const RopeTable table(dh);
    bool ok = true;
    for (int rep = 0; rep < 10; ++rep) {
        const auto t = static_cast<std::int64_t>(c.gen() % 512);
        const auto s = static_cast<std::int64_t>(c.gen() % 512);
        const FactorBlock qb = c.rand_block(rank, h, dh), kb = c.rand_block(rank, h, dh);
        const Matrix q = materialize(qb), k = materialize(kb);
        const Matrix lhs = matmul(apply_rope_rows(table, t, q),
                                  transpose(apply_rope_rows(table, s, k)));
        const Matrix rhs = matmul(apply_rope_rows(table, t - s, q), transpose(k));
        ok &= c.close(max_abs_diff(lhs, rhs), 1e-10, "rope relative identity");
    }
    return ok;
}

bool p_pre_rotation_commutes(Ctx& c) {
    const std::size_t h = 4, dh = 8, rank = 3;
    const RopeTable table(dh);
    const auto t = static_cast<std::int64_t>(1 + c.gen() % 300);
    const FactorBlock blk = c.rand_block(rank, h, dh);
    const Matrix via_factors = materialize(pre_rotate_key(blk, t, table));
    const Matrix via_rows = apply_rope_rows(table, t, materialize(blk));
    return c.close(max_abs_diff(via_factors, via_rows), 1e-12, "pre-rotation vs row rope");
}

bool p_higher_order_transform(Ctx& c) {
    const std::size_t db = 4, dc = 3;
    const RopeTable table(db);
    const auto t = static_cast<std::int64_t>(1 + c.gen() % 100);
    const Matrix kr = higher_order_transform(table, t, dc);
    // (I (x) R^T)^T == I (x) R
    const Matrix back = higher_order_transform(table, -t, dc);
    bool ok = c.close(max_abs_diff(transpose(kr), back), 1e-12, "(I(x)R^T)^T vs I(x)R");

    FactorBlock blk;
    blk.a = c.rand_matrix(2, 3);
    blk.b = c.rand_matrix(2, db);
    blk.c = c.rand_matrix(2, dc);
    const Matrix lhs = matmul(materialize_third_order(blk), kr);
    FactorBlock rotated = blk;
    const Matrix r = rotation_matrix(table, t);
    rotated.b = matmul(blk.b, transpose(r));  // row b -> (R b)^T
    ok &= c.close(max_abs_diff(lhs, materialize_third_order(rotated)), 1e-11,
                  "third-order rope factorization");
    return ok;
}

// --- attention-ref ----------------------------------------------------------

bool p_convex_combination(Ctx& c) {
    const std::size_t tokens = 5, h = 2, dh = 3;
    HeadTensor q(tokens, h, dh), k(tokens, h, dh), v(tokens, h, dh);
    for (double& x : q.data) x = c.sym();
    for (double& x : k.data) x = c.sym();
    for (double& x : v.data) x = c.sym();
    const HeadTensor out = attention_reference(q, k, v, true);
    bool ok = true;
    for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < dh; ++j) {
                double lo = 1e300, hi = -1e300;
                for (std::size_t s = 0; s <= t; ++s) {
                    lo = std::min(lo, v.at(s, i, j));
                    hi = std::max(hi, v.at(s, i, j));
                }
                const double val = out.at(t, i, j);
                ok &= val >= lo - 1e-12 && val <= hi + 1e-12;
            }
        }
    }
    if (!ok) c.why << "output escapes the value hull; ";
    return ok;
}

bool p_causal_future_invariance(Ctx& c) {
    const std::size_t tokens = 6, h = 2, dh = 4;
    HeadTensor q(tokens, h, dh), k(tokens, h, dh), v(tokens, h, dh);
    for (double& x : q.data) x = c.sym();
    for (double& x : k.data) x = c.sym();
    for (double& x : v.data) x = c.sym();
    const HeadTensor base = attention_reference(q, k, v, true);
    HeadTensor k2 = k, v2 = v;
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < dh; ++j) {
            k2.at(tokens - 1, i, j) += 10.0 * c.sym();
            v2.at(tokens - 1, i, j) += 10.0 * c.sym();
        }
    }
    const HeadTensor mod = attention_reference(q, k2, v2, true);
    double d = 0.0;
    for (std::size_t t = 0; t + 1 < tokens; ++t) {
        for (std::size_t i = 0; i < h; ++i) {
            d = std::max(d, max_abs_diff(base.vec(t, i), mod.vec(t, i)));
        }
    }
    return c.close(d, 0.0, "rows before a future change");
}

bool p_mechanism_reductions(Ctx& c) {
    const std::size_t d_model = 12, h = 4, dh = 3, tokens = 5, groups = 2;
    const Matrix x = c.rand_matrix(tokens, d_model);

    MhaWeights mha;
    for (std::size_t i = 0; i < h; ++i) {
        mha.w_q.push_back(c.rand_matrix(d_model, dh));
        mha.w_k.push_back(c.rand_matrix(d_model, dh));
        mha.w_v.push_back(c.rand_matrix(d_model, dh));
    }
    MqaWeights mqa{mha.w_q, c.rand_matrix(d_model, dh), c.rand_matrix(d_model, dh), {}};
    GqaWeights gqa{mha.w_q,
                   {c.rand_matrix(d_model, dh), c.rand_matrix(d_model, dh)},
                   {c.rand_matrix(d_model, dh), c.rand_matrix(d_model, dh)},
                   {}};

    auto tpa_forward = [&](const FactorWeights& fw) {
        std::vector<FactorBlock> qb, kb, vb;
        for (std::size_t t = 0; t < tokens; ++t) {
            const auto f = compute_factors(fw, fw.cfg, x.row(t));
            qb.push_back(f.q);
            kb.push_back(f.k);
            vb.push_back(f.v);
        }
        HeadTensor qh = materialize_sequence(qb), kh = materialize_sequence(kb),
                   vh = materialize_sequence(vb);
        return attention_reference(qh, kh, vh, true);
    };

    bool ok = true;
    ok &= c.close(max_abs_diff(std::span<const double>(tpa_forward(mha_as_tpa(mha, d_model)).data),
                               mha_forward(x, mha, true).data),
                  1e-12, "mha reduction");
    ok &= c.close(max_abs_diff(std::span<const double>(tpa_forward(mqa_as_tpa(mqa, d_model)).data),
                               mqa_forward(x, mqa, true).data),
                  1e-12, "mqa reduction");
    ok &= c.close(
        max_abs_diff(std::span<const double>(tpa_forward(gqa_as_tpa(gqa, d_model, groups)).data),
                     gqa_forward(x, gqa, groups, true).data),
        1e-12, "gqa reduction");
    return ok;
}

// --- kv-cache -----------------------------------------------------------------

bool p_cache_accounting(Ctx& c) {
    TpaConfig cfg{8, 2, 4, 1, 1, 2};
    FactorizedKvCache cache(cfg);
    const RopeTable table(cfg.head_dim);
    for (std::size_t t = 0; t < 64; ++t) {
        cache.append(pre_rotate_key(c.rand_block(cfg.rank_k, cfg.heads, cfg.head_dim),
                                    static_cast<std::int64_t>(t), table),
                     c.rand_block(cfg.rank_v, cfg.heads, cfg.head_dim), t);
    }
    const std::size_t want = bytes_per_token(cfg) * cache.size();
    if (cache.total_bytes() != want) {
        c.why << "bytes " << cache.total_bytes() << " != " << want << "; ";
        return false;
    }
    return true;
}

bool p_cache_position_bearing(Ctx& c) {
    TpaConfig cfg{6, 2, 4, 1, 1, 1};
    const FactorWeights w = FactorWeights::init(cfg, c.gen());
    const RopeTable table(cfg.head_dim);
    std::vector<std::vector<double>> tokens;
    for (int t = 0; t < 3; ++t) tokens.push_back(c.rand_vec(cfg.d_model));
    auto straight = decode_loop(tokens, w, cfg, table);
    std::swap(tokens[0], tokens[1]);
    auto permuted = decode_loop(tokens, w, cfg, table);
    const double d =
        max_abs_diff(straight.outputs.back(), permuted.outputs.back());
    if (d <= 1e-12) {
        c.why << "permuting appends left the decode unchanged; ";
        return false;
    }
    return true;
}

// --- flash-decode -------------------------------------------------------------

struct DecodeFixture {
    TpaConfig cfg;
    FactorizedKvCache cache;
    FactorBlock query;
};

DecodeFixture make_decode_fixture(Ctx& c, std::size_t m, std::size_t rq = 2, std::size_t rk = 2,
                                  std::size_t rv = 2) {
    TpaConfig cfg{16, 3, 6, rq, rk, rv};
    DecodeFixture fx{cfg, FactorizedKvCache(cfg), c.rand_block(rq, cfg.heads, cfg.head_dim)};
    for (std::size_t t = 0; t < m; ++t) {
        fx.cache.append(c.rand_block(rk, cfg.heads, cfg.head_dim),
                        c.rand_block(rv, cfg.heads, cfg.head_dim), t);
    }
    return fx;
}

bool p_block_size_invariance(Ctx& c) {
    auto fx = make_decode_fixture(c, 23);
    const Matrix base = flash_decode(fx.query, fx.cache, 1);
    bool ok = true;
    for (std::size_t bs : {2, 7, 64}) {
        ok &= c.close(max_abs_diff(base, flash_decode(fx.query, fx.cache, bs)), 1e-12,
                      "block size change");
    }
    return ok;
}

bool p_mask_correctness(Ctx& c) {
    auto fx = make_decode_fixture(c, 12);
    std::vector<double> mask(12, 0.0);
    for (std::size_t i = 7; i < 12; ++i) mask[i] = kMaskedLogit;
    const Matrix base = flash_decode(fx.query, fx.cache, 4, mask);

    // rebuild the cache with the masked-out tail perturbed
    FactorizedKvCache perturbed(fx.cfg);
    for (std::size_t t = 0; t < 12; ++t) {
        FactorBlock k = fx.cache.k_block(t), v = fx.cache.v_block(t);
        std::size_t flip = t;
        if (!c.fault.empty() && c.fault == "corrupt-mask") flip = 11 - t;  // hits live entries
        if (flip >= 7) {
            for (double& x : k.b.data()) x += 1.0;
            for (double& x : v.b.data()) x -= 2.0;
        }
        perturbed.append(k, v, t);
    }
    const Matrix mod = flash_decode(fx.query, perturbed, 4, mask);
    return c.close(max_abs_diff(base, mod), 0.0, "masked entries leaked into the output");
}

bool p_decode_oracle_equivalence(Ctx& c) {
    auto fx = make_decode_fixture(c, 17);
    std::vector<FactorBlock> ks, vs;
    for (std::size_t t = 0; t < fx.cache.size(); ++t) {
        ks.push_back(fx.cache.k_block(t));
        vs.push_back(fx.cache.v_block(t));
    }
    const HeadTensor kh = materialize_sequence(ks), vh = materialize_sequence(vs);
    const Matrix ref = materialized_decode(materialize(fx.query), kh, vh);
    return c.close(max_abs_diff(flash_decode(fx.query, fx.cache, 5), ref), 1e-10,
                   "flash decode vs materialized oracle");
}

bool p_monotone_running_max(Ctx& c) {
    auto fx = make_decode_fixture(c, 31);
    DecodeState acc = DecodeState::initial(fx.cfg.heads, fx.cfg.head_dim);
    std::vector<double> prev(fx.cfg.heads, -1e308);
    bool ok = true;
    bool first = true;
    for (std::size_t begin = 0; begin < 31; begin += 4) {
        const std::size_t end = std::min<std::size_t>(begin + 4, 31);
        const DecodeState part = decode_partial(fx.query, fx.cache, 4, begin, end);
        merge_state(acc, part);
        for (std::size_t i = 0; i < fx.cfg.heads; ++i) {
            if (!first && acc.m[i] < prev[i]) {
                c.why << "running max decreased at block " << begin << "; ";
                ok = false;
            }
            prev[i] = acc.m[i];
        }
        first = false;
    }
    // the merged cover must agree with the one-shot decode
    ok &= c.close(max_abs_diff(decode_finalize(acc, fx.cfg.rank_v),
                               flash_decode(fx.query, fx.cache, 4)),
                  1e-12, "partial merge vs one-shot decode");
    return ok;
}

bool p_path_consistency(Ctx& c) {
    TpaConfig cfg{10, 2, 4, 2, 1, 1};
    const FactorWeights w = FactorWeights::init(cfg, c.gen());
    const RopeTable table(cfg.head_dim);
    std::vector<std::vector<double>> tokens;
    for (int t = 0; t < 9; ++t) tokens.push_back(c.rand_vec(cfg.d_model));
    const auto loop = decode_loop(tokens, w, cfg, table);

    std::vector<FactorBlock> qb, kb, vb;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        auto f = compute_factors(w, cfg, tokens[t]);
        FactorBlock q = f.q;
        q.b = apply_rope_rows(table, static_cast<std::int64_t>(t), q.b);
        qb.push_back(q);
        kb.push_back(pre_rotate_key(f.k, static_cast<std::int64_t>(t), table));
        vb.push_back(f.v);
    }
    const HeadTensor full = specialized_full_attention(qb, kb, vb, causal_mask(tokens.size()));
    bool ok = true;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        for (std::size_t i = 0; i < cfg.heads; ++i) {
            ok &= c.close(max_abs_diff(full.vec(t, i), loop.outputs[t].row(i)), 1e-10,
                          "decode loop vs specialized path");
        }
    }
    return ok;
}

// --- cost-model ---------------------------------------------------------------

bool p_cost_example_i(Ctx& c) {
    (void)c;
    MechanismSpec mha{MechanismKind::MHA, 2048, 32, 64};
    MechanismSpec tpa{MechanismKind::TPA, 2048, 32, 64, 0, 16, 1, 1};
    bool ok = attention_params(mha) == 16777216 && decode_flops(mha).attention_per_token_coeff == 4096;
    ok &= attention_params(tpa) == 7733248 && decode_flops(tpa).attention_per_token_coeff == 3648;
    if (!ok) c.why << "Example I numbers drifted; ";
    return ok;
}

bool p_gqa_collapse(Ctx& c) {
    bool ok = true;
    for (int rep = 0; rep < 10; ++rep) {
        const std::uint64_t h = 1 + c.gen() % 16;
        const std::uint64_t dh = 1 + c.gen() % 64;
        const std::uint64_t dm = (1 + c.gen() % 64) * 8;
        MechanismSpec mha{MechanismKind::MHA, dm, h, dh};
        MechanismSpec mqa{MechanismKind::MQA, dm, h, dh};
        MechanismSpec as_mha{MechanismKind::GQA, dm, h, dh, h};
        MechanismSpec as_mqa{MechanismKind::GQA, dm, h, dh, 1};
        ok &= attention_params(as_mha) == attention_params(mha);
        ok &= attention_params(as_mqa) == attention_params(mqa);
        ok &= kv_cache_numbers_per_token(as_mha) == kv_cache_numbers_per_token(mha);
        ok &= kv_cache_numbers_per_token(as_mqa) == kv_cache_numbers_per_token(mqa);
        ok &= decode_flops(as_mha).projection == decode_flops(mha).projection;
        ok &= decode_flops(as_mqa).projection == decode_flops(mqa).projection;
    }
    if (!ok) c.why << "GQA boundary cases do not collapse; ";
    return ok;
}

bool p_speedup_vs_counters(Ctx& c) {
    auto fx = make_decode_fixture(c, 16, 3, 2, 1);
    MacCounters ctr;
    (void)flash_decode(fx.query, fx.cache, 8, {}, &ctr);
    MechanismSpec spec{MechanismKind::TPA, fx.cfg.d_model, fx.cfg.heads, fx.cfg.head_dim,
                       0, fx.cfg.rank_q, fx.cfg.rank_k, fx.cfg.rank_v};
    const auto check = specialized_speedup_holds(spec, fx.cfg.head_dim, fx.cfg.head_dim);
    const double measured = static_cast<double>(ctr.total()) / 16.0;
    const double predicted = static_cast<double>(check.lhs);
    return c.close(measured / predicted - 1.0, 0.05, "counter vs closed-form coefficient");
}

// --- t6-block ---------------------------------------------------------------

bool p_block_causality(Ctx& c) {
    TpaConfig cfg{8, 2, 4, 1, 1, 1};
    const BlockWeights w = BlockWeights::init(cfg, 16, c.gen());
    const RopeTable table(cfg.head_dim);
    Matrix x = c.rand_matrix(5, cfg.d_model);
    const Matrix base = block_forward(x, w, cfg, table);
    Matrix x2 = x;
    for (std::size_t d = 0; d < cfg.d_model; ++d) x2(4, d) += c.sym();
    const Matrix mod = block_forward(x2, w, cfg, table);
    double d = 0.0;
    for (std::size_t t = 0; t < 4; ++t) d = std::max(d, max_abs_diff(base.row(t), mod.row(t)));
    return c.close(d, 0.0, "early rows saw a future edit");
}

bool p_block_shift_invariance(Ctx& c) {
    TpaConfig cfg{8, 2, 4, 1, 1, 1};
    const BlockWeights w = BlockWeights::init(cfg, 16, c.gen());
    const RopeTable table(cfg.head_dim);
    const Matrix x = c.rand_matrix(4, cfg.d_model);
    const Matrix base = block_forward(x, w, cfg, table, true, 0);
    const Matrix shifted = block_forward(x, w, cfg, table, true, 11);
    return c.close(max_abs_diff(base, shifted), 1e-10, "global position shift");
}

struct Property {
    const char* suite;
    const char* name;
    PropertyFn fn;
};

const Property kProperties[] = {
    {"linalg", "matmul_associativity", p_matmul_associativity},
    {"linalg", "softmax_simplex_and_shift", p_softmax_simplex},
    {"linalg", "outer_matches_matmul", p_outer_matches_matmul},
    {"factor", "factorization_outer_sum", p_factorization_outer_sum},
    {"factor", "factor_linearity", p_factor_linearity},
    {"factor", "shared_b_identity", p_shared_b_identity},
    {"factor", "kvonly_dense_query", p_kvonly_dense_query},
    {"rope", "rotation_orthogonality", p_rotation_orthogonality},
    {"rope", "relative_position_identity", p_relative_position_identity},
    {"rope", "pre_rotation_commutes", p_pre_rotation_commutes},
    {"rope", "higher_order_transform", p_higher_order_transform},
    {"attention", "convex_combination", p_convex_combination},
    {"attention", "causal_future_invariance", p_causal_future_invariance},
    {"attention", "mechanism_reductions", p_mechanism_reductions},
    {"kv_cache", "accounting_exact", p_cache_accounting},
    {"kv_cache", "position_bearing", p_cache_position_bearing},
    {"flash_decode", "block_size_invariance", p_block_size_invariance},
    {"flash_decode", "mask_correctness", p_mask_correctness},
    {"flash_decode", "oracle_equivalence", p_decode_oracle_equivalence},
    {"flash_decode", "monotone_running_max", p_monotone_running_max},
    {"flash_decode", "path_consistency", p_path_consistency},
    {"cost_model", "example_i_exact", p_cost_example_i},
    {"cost_model", "gqa_boundary_collapse", p_gqa_collapse},
    {"cost_model", "speedup_vs_counters", p_speedup_vs_counters},
    {"t6_block", "block_causality", p_block_causality},
    {"t6_block", "position_shift_invariance", p_block_shift_invariance},
};

}  // namespace

std::vector<PropertyResult> run_verify(const VerifyOptions& opts) {
    std::vector<PropertyResult> results;
    for (const auto& prop : kProperties) {
        if (!opts.filter.empty() &&
            std::string(prop.suite).find(opts.filter) == std::string::npos) {
            continue;
        }
        Ctx ctx(opts.seed ^ std::hash<std::string>{}(std::string(prop.suite) + prop.name),
                opts.inject_fault);
        PropertyResult res;
        res.suite = prop.suite;
        res.name = prop.name;
        try {
            res.passed = prop.fn(ctx);
            res.detail = ctx.why.str();
        } catch (const std::exception& e) {
            res.passed = false;
            res.detail = std::string("exception: ") + e.what();
        }
        results.push_back(std::move(res));
    }
    return results;
}

std::string verify_report_json(const std::vector<PropertyResult>& results) {
    nlohmann::json arr = nlohmann::json::array();
    std::size_t failed = 0;
    for (const auto& r : results) {
        nlohmann::json j;
        j["suite"] = r.suite;
        j["property"] = r.name;
        j["passed"] = r.passed;
        if (!r.detail.empty()) j["detail"] = r.detail;
        arr.push_back(j);
        if (!r.passed) ++failed;
    }
    nlohmann::json report;
    report["properties"] = arr;
    report["total"] = results.size();
    report["failed"] = failed;
    return report.dump(2);
}

}  // namespace tpa
