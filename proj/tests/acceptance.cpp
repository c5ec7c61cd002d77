// Acceptance suite: one criterion per function, one pass/fail line each.
// Run everything or a single criterion with --criterion N.
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "tpa/attention_ref.hpp"
#include "tpa/bench.hpp"
#include "tpa/cost_model.hpp"
#include "tpa/factor.hpp"
#include "tpa/flash_decode.hpp"
#include "tpa/kv_cache.hpp"
#include "tpa/mechanisms.hpp"
#include "tpa/rope.hpp"

using namespace tpa;

namespace {

struct Criterion {
    int id;
    const char* title;
    std::function<bool(std::ostringstream&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool check_tol(std::ostringstream& why, double measured, double tol, const char* what) {
    if (measured <= tol) return true;
    why << what << " " << measured << " > " << tol << "; ";
    return false;
}

bool check_runtime(std::ostringstream& why, double elapsed, double budget) {
    if (elapsed < budget) return true;
    why << "runtime " << elapsed << "s over the " << budget << "s budget; ";
    return false;
}

// ---- 1: factorization oracle ------------------------------------------------

bool criterion_factorization(std::ostringstream& why) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(1001);
    double worst = 0.0;
    for (int cfg_i = 0; cfg_i < 1000; ++cfg_i) {
        const std::size_t h = 1 + gen() % 8;
        const std::size_t dh = 1 + gen() % 16;
        const std::size_t rank = 1 + gen() % 4;
        const std::size_t tokens = 1 + gen() % 32;
        for (std::size_t t = 0; t < tokens; ++t) {
            FactorBlock blk{oracle::rand_matrix(rank, h, gen), oracle::rand_matrix(rank, dh, gen),
                            {}};
            Matrix expect(h, dh);
            for (std::size_t r = 0; r < rank; ++r) {
                const Matrix o = outer(blk.a.row(r), blk.b.row(r));
                for (std::size_t i = 0; i < expect.size(); ++i) {
                    expect.data()[i] += o.data()[i] / static_cast<double>(rank);
                }
            }
            worst = std::max(worst, max_abs_diff(materialize(blk), expect));
        }
    }
    bool ok = check_tol(why, worst, 1e-12, "max abs diff");
    ok &= check_runtime(why, seconds_since(t0), 10.0);
    why << "1000 configs, worst " << worst;
    return ok;
}

// ---- 2: rope theorem --------------------------------------------------------

bool criterion_rope(std::ostringstream& why) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(1002);
    double worst_factor = 0.0, worst_rel = 0.0;
    for (int rep = 0; rep < 300; ++rep) {
        const std::size_t h = 1 + gen() % 6, dh = 2 * (1 + gen() % 8);
        const std::size_t rq = 1 + gen() % 4, rk = 1 + gen() % 4;
        const RopeTable table(dh);
        const auto t = static_cast<std::int64_t>(gen() % 1025);
        const auto s = static_cast<std::int64_t>(gen() % 1025);

        FactorBlock qb{oracle::rand_matrix(rq, h, gen), oracle::rand_matrix(rq, dh, gen), {}};
        FactorBlock kb{oracle::rand_matrix(rk, h, gen), oracle::rand_matrix(rk, dh, gen), {}};

        // pre-rotated factors materialize to the row-rotated tensor
        const Matrix lhs = materialize(pre_rotate_key(qb, t, table));
        const Matrix rhs = apply_rope_rows(table, t, materialize(qb));
        worst_factor = std::max(worst_factor, max_abs_diff(lhs, rhs));

        // relative position identity at head level
        const Matrix q = materialize(qb), k = materialize(kb);
        const Matrix rot =
            matmul(apply_rope_rows(table, t, q), transpose(apply_rope_rows(table, s, k)));
        const Matrix rel = matmul(apply_rope_rows(table, t - s, q), transpose(k));
        worst_rel = std::max(worst_rel, max_abs_diff(rot, rel));
    }
    bool ok = check_tol(why, worst_factor, 1e-12, "factor/rows mismatch");
    ok &= check_tol(why, worst_rel, 1e-10, "relative identity");
    ok &= check_runtime(why, seconds_since(t0), 5.0);
    why << "worst factor " << worst_factor << ", relative " << worst_rel;
    return ok;
}

// ---- 3: higher-order theorem -------------------------------------------------

bool criterion_higher_order(std::ostringstream& why) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(1003);
    double worst = 0.0;
    for (std::size_t db : {2, 4, 8}) {
        for (std::size_t dc : {1, 2, 4}) {
            const RopeTable table(db);
            for (int rep = 0; rep < 40; ++rep) {
                const std::size_t h = 1 + gen() % 6, rank = 1 + gen() % 4;
                const auto t = static_cast<std::int64_t>(gen() % 2048);
                FactorBlock blk{oracle::rand_matrix(rank, h, gen),
                                oracle::rand_matrix(rank, db, gen),
                                oracle::rand_matrix(rank, dc, gen)};
                const Matrix lhs = matmul(materialize_third_order(blk),
                                          higher_order_transform(table, t, dc));
                FactorBlock rotated = blk;
                rotated.b = matmul(blk.b, transpose(rotation_matrix(table, t)));
                worst = std::max(worst, max_abs_diff(lhs, materialize_third_order(rotated)));
            }
        }
    }
    bool ok = check_tol(why, worst, 1e-11, "kronecker transform mismatch");
    ok &= check_runtime(why, seconds_since(t0), 5.0);
    why << "d_b x d_c grid, worst " << worst;
    return ok;
}

// ---- 4: mechanism reductions ---------------------------------------------------

bool criterion_reductions(std::ostringstream& why) {
    std::mt19937_64 gen(1004);
    double worst = 0.0;
    for (int rep = 0; rep < 8; ++rep) {
        const std::size_t h = 2 * (1 + gen() % 4);  // even so groups divide
        const std::size_t dh = 2 + gen() % 6;
        const std::size_t d_model = 4 + gen() % 12;
        const std::size_t tokens = 1 + gen() % 32;
        const std::size_t groups = h / 2;
        const Matrix x = oracle::rand_matrix(tokens, d_model, gen);

        MhaWeights mha;
        for (std::size_t i = 0; i < h; ++i) {
            mha.w_q.push_back(oracle::rand_matrix(d_model, dh, gen));
            mha.w_k.push_back(oracle::rand_matrix(d_model, dh, gen));
            mha.w_v.push_back(oracle::rand_matrix(d_model, dh, gen));
        }
        MqaWeights mqa{mha.w_q, oracle::rand_matrix(d_model, dh, gen),
                       oracle::rand_matrix(d_model, dh, gen), {}};
        GqaWeights gqa;
        gqa.w_q = mha.w_q;
        for (std::size_t j = 0; j < groups; ++j) {
            gqa.w_k.push_back(oracle::rand_matrix(d_model, dh, gen));
            gqa.w_v.push_back(oracle::rand_matrix(d_model, dh, gen));
        }

        auto tpa_forward = [&](const FactorWeights& fw) {
            std::vector<FactorBlock> qb, kb, vb;
            for (std::size_t t = 0; t < tokens; ++t) {
                const auto f = compute_factors(fw, fw.cfg, x.row(t));
                qb.push_back(f.q);
                kb.push_back(f.k);
                vb.push_back(f.v);
            }
            return attention_reference(materialize_sequence(qb), materialize_sequence(kb),
                                       materialize_sequence(vb), true);
        };

        const HeadTensor m1 = mha_forward(x, mha, true);
        const HeadTensor m2 = tpa_forward(mha_as_tpa(mha, d_model));
        const HeadTensor q1 = mqa_forward(x, mqa, true);
        const HeadTensor q2 = tpa_forward(mqa_as_tpa(mqa, d_model));
        const HeadTensor g1 = gqa_forward(x, gqa, groups, true);
        const HeadTensor g2 = tpa_forward(gqa_as_tpa(gqa, d_model, groups));
        worst = std::max({worst,
                          max_abs_diff(std::span<const double>(m1.data), m2.data),
                          max_abs_diff(std::span<const double>(q1.data), q2.data),
                          max_abs_diff(std::span<const double>(g1.data), g2.data)});
    }

    bool ok = check_tol(why, worst, 1e-12, "native vs tpa construction");

    // boundary collapse: G=h and G=1 constructions equal the MHA/MQA ones
    {
        const std::size_t d_model = 8, h = 4, dh = 3;
        std::vector<Matrix> w_q, w_k, w_v;
        for (std::size_t i = 0; i < h; ++i) {
            w_q.push_back(oracle::rand_matrix(d_model, dh, gen));
            w_k.push_back(oracle::rand_matrix(d_model, dh, gen));
            w_v.push_back(oracle::rand_matrix(d_model, dh, gen));
        }
        const FactorWeights as_mha = gqa_as_tpa({w_q, w_k, w_v, {}}, d_model, h);
        const FactorWeights mha = mha_as_tpa({w_q, w_k, w_v, {}}, d_model);
        const FactorWeights as_mqa = gqa_as_tpa({w_q, {w_k[0]}, {w_v[0]}, {}}, d_model, 1);
        const FactorWeights mqa = mqa_as_tpa({w_q, w_k[0], w_v[0], {}}, d_model);
        const bool collapse = max_abs_diff(as_mha.fixed_a_k, mha.fixed_a_k) == 0.0 &&
                              max_abs_diff(as_mha.w_b_k, mha.w_b_k) == 0.0 &&
                              max_abs_diff(as_mqa.fixed_a_k, mqa.fixed_a_k) == 0.0 &&
                              max_abs_diff(as_mqa.w_b_v, mqa.w_b_v) == 0.0;
        if (!collapse) why << "boundary groups failed to collapse; ";
        ok &= collapse;
    }
    why << "worst " << worst;
    return ok;
}

// ---- 5: flash decode correctness ----------------------------------------------

bool criterion_flash(std::ostringstream& why) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(1005);
    double worst_oracle = 0.0, worst_blocking = 0.0;
    const std::size_t block_sizes[] = {1, 2, 7, 64};

    struct Case {
        std::size_t m, h, dh, rq, rk, rv;
    };
    const Case cases[] = {
        {1, 2, 4, 1, 1, 1},   {7, 2, 8, 2, 1, 1},    {64, 4, 8, 4, 2, 2},
        {333, 4, 16, 8, 2, 1}, {1024, 2, 16, 16, 2, 2}, {4096, 2, 8, 16, 2, 2},
    };
    for (const auto& cs : cases) {
        TpaConfig cfg{cs.h * cs.dh, cs.h, cs.dh, cs.rq, cs.rk, cs.rv};
        FactorizedKvCache cache(cfg);
        std::vector<FactorBlock> ks, vs;
        for (std::size_t t = 0; t < cs.m; ++t) {
            ks.push_back({oracle::rand_matrix(cs.rk, cs.h, gen),
                          oracle::rand_matrix(cs.rk, cs.dh, gen),
                          {}});
            vs.push_back({oracle::rand_matrix(cs.rv, cs.h, gen),
                          oracle::rand_matrix(cs.rv, cs.dh, gen),
                          {}});
            cache.append(ks.back(), vs.back(), t);
        }
        FactorBlock q{oracle::rand_matrix(cs.rq, cs.h, gen),
                      oracle::rand_matrix(cs.rq, cs.dh, gen),
                      {}};

        const Matrix ref = materialized_decode(materialize(q), materialize_sequence(ks),
                                               materialize_sequence(vs));
        Matrix first;
        for (std::size_t bi = 0; bi < 4; ++bi) {
            const Matrix out = flash_decode(q, cache, block_sizes[bi]);
            if (bi == 0) {
                first = out;
            } else {
                worst_blocking = std::max(worst_blocking, max_abs_diff(out, first));
            }
            worst_oracle = std::max(worst_oracle, max_abs_diff(out, ref));
        }
    }
    bool ok = check_tol(why, worst_oracle, 1e-10, "oracle mismatch");
    ok &= check_tol(why, worst_blocking, 1e-12, "blocking mismatch");
    ok &= check_runtime(why, seconds_since(t0), 60.0);
    why << "M up to 4096, worst oracle " << worst_oracle << ", blocking " << worst_blocking;
    return ok;
}

// ---- 6: path consistency -------------------------------------------------------

bool criterion_paths(std::ostringstream& why) {
    std::mt19937_64 gen(1006);
    TpaConfig cfg{32, 4, 8, 4, 2, 2};
    const FactorWeights w = FactorWeights::init(cfg, 1007);
    const RopeTable table(cfg.head_dim);
    const std::size_t tokens = 256;

    std::vector<std::vector<double>> stream;
    for (std::size_t t = 0; t < tokens; ++t) stream.push_back(oracle::rand_vec(cfg.d_model, gen));
    const auto loop = decode_loop(stream, w, cfg, table);

    std::vector<FactorBlock> qs, ks, vs;
    for (std::size_t t = 0; t < tokens; ++t) {
        auto f = compute_factors(w, cfg, stream[t]);
        f.q.b = apply_rope_rows(table, static_cast<std::int64_t>(t), f.q.b);
        qs.push_back(f.q);
        ks.push_back(pre_rotate_key(f.k, static_cast<std::int64_t>(t), table));
        vs.push_back(f.v);
    }
    const HeadTensor full = specialized_full_attention(qs, ks, vs, causal_mask(tokens));

    double worst = 0.0;
    for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t i = 0; i < cfg.heads; ++i) {
            worst = std::max(worst, max_abs_diff(full.vec(t, i), loop.outputs[t].row(i)));
        }
    }
    const bool ok = check_tol(why, worst, 1e-10, "row mismatch");
    why << "T=256, worst " << worst;
    return ok;
}

// ---- 7: cost model exactness ----------------------------------------------------

bool criterion_cost_model(std::ostringstream& why) {
    bool ok = true;
    auto exact = [&](std::uint64_t got, std::uint64_t want, const char* what) {
        if (got != want) {
            why << what << " " << got << " != " << want << "; ";
            ok = false;
        }
    };
    auto rounded = [&](std::uint64_t got, double paper, double tol, const char* what) {
        const double rel = std::abs(static_cast<double>(got) - paper) / paper;
        if (rel > tol) {
            why << what << " " << got << " vs " << paper << " (rel " << rel << "); ";
            ok = false;
        }
    };
    auto tpa = [](std::uint64_t dm, std::uint64_t h, std::uint64_t dh, std::uint64_t rq,
                  std::uint64_t rk, std::uint64_t rv) {
        return MechanismSpec{MechanismKind::TPA, dm, h, dh, 0, rq, rk, rv};
    };
    auto mla = [](std::uint64_t dm, std::uint64_t h, std::uint64_t dh, std::uint64_t dc,
                  std::uint64_t dcp, std::uint64_t dr) {
        MechanismSpec s{MechanismKind::MLA, dm, h, dh};
        s.mla_d_c = dc;
        s.mla_d_c_prime = dcp;
        s.mla_d_h_rope = dr;
        return s;
    };

    // d_model 2048 example set
    {
        const MechanismSpec mha{MechanismKind::MHA, 2048, 32, 64};
        exact(decode_flops(mha).attention_per_token_coeff, 4096, "mha coeff");
        exact(attention_params(mha), 16777216, "mha params");
        rounded(attention_params(mha), 16.8e6, 0.01, "mha params approx");
        exact(decode_flops(mha).projection, 12582912, "mha proj");
        rounded(decode_flops(mha).projection, 12.6e6, 0.01, "mha proj approx");

        const MechanismSpec gqa{MechanismKind::GQA, 2048, 32, 64, 4};
        exact(attention_params(gqa), 9437184, "gqa params");
        exact(decode_flops(gqa).projection, 5242880, "gqa proj");
        exact(decode_flops(gqa).attention_per_token_coeff, 4096, "gqa coeff");
        rounded(attention_params(gqa), 9.4e6, 0.01, "gqa params approx");

        const auto m = mla(2048, 32, 64, 256, 768, 32);
        exact(attention_params(m), 9764864, "mla params");
        rounded(attention_params(m), 9.8e6, 0.01, "mla params approx");
        exact(decode_flops(m).projection, 19464192, "mla proj");
        rounded(decode_flops(m).projection, 19.5e6, 0.01, "mla proj approx");
        exact(decode_flops(m).attention_per_token_coeff, 17408, "mla coeff");

        exact(decode_flops(tpa(2048, 32, 64, 16, 1, 1)).attention_per_token_coeff, 3648,
              "tpa(16,1,1) coeff");
        exact(attention_params(tpa(2048, 32, 64, 16, 1, 1)), 7733248, "tpa(16,1,1) params");
        rounded(attention_params(tpa(2048, 32, 64, 16, 1, 1)), 7.7e6, 0.01,
                "tpa(16,1,1) params approx");
        exact(decode_flops(tpa(2048, 32, 64, 16, 1, 1)).projection, 3538944, "tpa(16,1,1) proj");
        rounded(decode_flops(tpa(2048, 32, 64, 16, 1, 1)).projection, 3.5e6, 0.02,
                "tpa(16,1,1) proj approx");
        exact(decode_flops(tpa(2048, 32, 64, 16, 2, 2)).attention_per_token_coeff, 7296,
              "tpa(16,2,2) coeff");
        exact(attention_params(tpa(2048, 32, 64, 16, 2, 2)), 8126464, "tpa(16,2,2) params");
        exact(decode_flops(tpa(2048, 32, 64, 8, 1, 1)).attention_per_token_coeff, 2880,
              "tpa(8,1,1) coeff");
        exact(attention_params(tpa(2048, 32, 64, 8, 1, 1)), 6160384, "tpa(8,1,1) params");
        exact(decode_flops(tpa(2048, 32, 64, 8, 2, 2)).attention_per_token_coeff, 5760,
              "tpa(8,2,2) coeff");
        exact(attention_params(tpa(2048, 32, 64, 8, 2, 2)), 6553600, "tpa(8,2,2) params");
    }

    // d_model 4096 example set
    {
        exact(decode_flops(MechanismSpec{MechanismKind::MHA, 4096, 32, 128})
                  .attention_per_token_coeff,
              8192, "mha 4096 coeff");
        exact(attention_params(MechanismSpec{MechanismKind::MHA, 4096, 32, 128}), 67108864,
              "mha 4096 params");
        exact(attention_params(MechanismSpec{MechanismKind::GQA, 4096, 32, 128, 4}), 37748736,
              "gqa 4096 params");
        const auto m = mla(4096, 32, 128, 512, 1536, 64);
        exact(attention_params(m), 39059456, "mla 4096 params");
        exact(decode_flops(m).attention_per_token_coeff, 34816, "mla 4096 coeff");
        exact(decode_flops(tpa(4096, 32, 128, 16, 1, 1)).attention_per_token_coeff, 6720,
              "tpa 4096 (16,1,1) coeff");
        exact(decode_flops(tpa(4096, 32, 128, 16, 2, 2)).attention_per_token_coeff, 13440,
              "tpa 4096 (16,2,2) coeff");
        exact(decode_flops(tpa(4096, 32, 128, 8, 1, 1)).attention_per_token_coeff, 5440,
              "tpa 4096 (8,1,1) coeff");
        exact(decode_flops(tpa(4096, 32, 128, 8, 2, 2)).attention_per_token_coeff, 10880,
              "tpa 4096 (8,2,2) coeff");
        rounded(attention_params(tpa(4096, 32, 128, 16, 1, 1)), 28.6e6, 0.01,
                "tpa 4096 params approx");
    }

    // d_model 7168 example set (d_model != h*d_h)
    {
        const MechanismSpec mha{MechanismKind::MHA, 7168, 64, 128};
        exact(attention_params(mha), 234881024, "mha 7168 params");
        rounded(attention_params(mha), 235e6, 0.01, "mha 7168 params approx");
        exact(decode_flops(mha).attention_per_token_coeff, 16384, "mha 7168 coeff");
        exact(attention_params(MechanismSpec{MechanismKind::GQA, 7168, 64, 128, 8}), 132120576,
              "gqa 7168 params");
        const auto m = mla(7168, 64, 128, 512, 1536, 64);
        exact(attention_params(m), 101122048, "mla 7168 params");
        exact(decode_flops(m).projection, 268369920, "mla 7168 proj");
        exact(decode_flops(m).attention_per_token_coeff, 69632, "mla 7168 coeff");
        exact(attention_params(tpa(7168, 64, 128, 16, 1, 1)), 83492864, "tpa 7168 params");
        rounded(attention_params(tpa(7168, 64, 128, 16, 1, 1)), 83.5e6, 0.01,
                "tpa 7168 params approx");
        exact(decode_flops(tpa(7168, 64, 128, 16, 1, 1)).attention_per_token_coeff, 11392,
              "tpa 7168 (16,1,1) coeff");
        exact(decode_flops(tpa(7168, 64, 128, 8, 1, 1)).attention_per_token_coeff, 9856,
              "tpa 7168 (8,1,1) coeff");
        exact(decode_flops(tpa(7168, 64, 128, 16, 2, 2)).attention_per_token_coeff, 22784,
              "tpa 7168 (16,2,2) coeff");
        exact(decode_flops(tpa(7168, 64, 128, 8, 2, 2)).attention_per_token_coeff, 19712,
              "tpa 7168 (8,2,2) coeff");
    }

    // cache-size formulas verified symbolically over random parameters
    std::mt19937_64 gen(1008);
    for (int rep = 0; rep < 500; ++rep) {
        const std::uint64_t h = 1 + gen() % 128, dh = 1 + gen() % 256;
        const std::uint64_t g = 1 + gen() % h;
        const std::uint64_t rk = 1 + gen() % 16, rv = 1 + gen() % 16;
        const std::uint64_t dc = 1 + gen() % 1024, dr = 1 + gen() % 128;
        exact(kv_cache_numbers_per_token({MechanismKind::MHA, 64, h, dh}), 2 * h * dh, "kv mha");
        exact(kv_cache_numbers_per_token({MechanismKind::MQA, 64, h, dh}), 2 * dh, "kv mqa");
        if (h % g == 0) {
            exact(kv_cache_numbers_per_token({MechanismKind::GQA, 64, h, dh, g}), 2 * g * dh,
                  "kv gqa");
        }
        MechanismSpec m{MechanismKind::MLA, 64, h, dh};
        m.mla_d_c = dc;
        m.mla_d_c_prime = 1;
        m.mla_d_h_rope = dr;
        exact(kv_cache_numbers_per_token(m), dc + dr, "kv mla");
        exact(kv_cache_numbers_per_token({MechanismKind::TPA, 64, h, dh, 0, 1, rk, rv}),
              (rk + rv) * (h + dh), "kv tpa");
        exact(kv_cache_numbers_per_token({MechanismKind::TPA_NonCtxA, 64, h, dh, 0, 1, rk, rv}),
              (rk + rv) * dh, "kv nonctx a");
        exact(kv_cache_numbers_per_token({MechanismKind::TPA_NonCtxB, 64, h, dh, 0, 1, rk, rv}),
              (rk + rv) * h, "kv nonctx b");
    }
    return ok;
}

// ---- 8: kv memory ratio ---------------------------------------------------------

bool criterion_kv_memory(std::ostringstream& why) {
    bool ok = true;
    TpaConfig paper_cfg{2048, 32, 64, 1, 1, 1};
    if (compression_ratio(paper_cfg) != 0.046875) {
        why << "ratio " << compression_ratio(paper_cfg) << " != 0.046875; ";
        ok = false;
    }

    TpaConfig tiny{4, 2, 2, 1, 1, 1};
    FactorizedKvCache cache(tiny);
    std::mt19937_64 gen(1009);
    const std::size_t target = 100000;
    for (std::size_t t = 0; t < target; ++t) {
        cache.append({oracle::rand_matrix(1, 2, gen), oracle::rand_matrix(1, 2, gen), {}},
                     {oracle::rand_matrix(1, 2, gen), oracle::rand_matrix(1, 2, gen), {}}, t);
        if ((t & (t + 1)) == 0 || t + 1 == target) {  // powers of two and the end
            if (cache.total_bytes() != bytes_per_token(tiny) * cache.size()) {
                why << "accounting drifted at M=" << cache.size() << "; ";
                ok = false;
                break;
            }
        }
    }
    why << "M=" << cache.size() << ", bytes " << cache.total_bytes();
    return ok;
}

// ---- 9: speed inequality vs counters ----------------------------------------------

bool criterion_speed_inequality(std::ostringstream& why) {
    std::mt19937_64 gen(1010);
    bool ok = true;
    int configs = 0;
    double worst_rel = 0.0;
    const std::size_t m = 6;

    while (configs < 50) {
        const std::size_t h = 1 + gen() % 12;
        const std::size_t dh = 2 + gen() % 31;
        const std::size_t rq = 1 + gen() % 16;
        const std::size_t rk = 1 + gen() % 4;
        const std::size_t rv = 1 + gen() % 4;
        ++configs;

        TpaConfig cfg{h * dh, h, dh, rq, rk, rv};
        FactorizedKvCache cache(cfg);
        std::vector<FactorBlock> ks, vs;
        for (std::size_t t = 0; t < m; ++t) {
            ks.push_back({oracle::rand_matrix(rk, h, gen), oracle::rand_matrix(rk, dh, gen), {}});
            vs.push_back({oracle::rand_matrix(rv, h, gen), oracle::rand_matrix(rv, dh, gen), {}});
            cache.append(ks.back(), vs.back(), t);
        }
        FactorBlock q{oracle::rand_matrix(rq, h, gen), oracle::rand_matrix(rq, dh, gen), {}};

        MacCounters spec_ctr;
        (void)flash_decode(q, cache, 3, {}, &spec_ctr);
        MacCounters dense_ctr;
        (void)materialized_decode(materialize(q), materialize_sequence(ks),
                                  materialize_sequence(vs), &dense_ctr);

        const auto check = specialized_speedup_holds(
            MechanismSpec{MechanismKind::TPA, h * dh, h, dh, 0, rq, rk, rv}, dh, dh);
        const double meas_lhs = static_cast<double>(spec_ctr.total()) / m;
        const double meas_rhs = static_cast<double>(dense_ctr.total()) / m;
        const double rel_lhs = std::abs(meas_lhs - static_cast<double>(check.lhs)) /
                               static_cast<double>(check.lhs);
        const double rel_rhs = std::abs(meas_rhs - static_cast<double>(check.rhs)) /
                               static_cast<double>(check.rhs);
        worst_rel = std::max({worst_rel, rel_lhs, rel_rhs});
        if (rel_lhs > 0.05 || rel_rhs > 0.05) {
            why << "coefficient drift at config " << configs << "; ";
            ok = false;
        }
        if ((meas_lhs < meas_rhs) != check.holds) {
            why << "dominance disagreement at config " << configs << " (measured " << meas_lhs
                << " vs " << meas_rhs << ", evaluator " << check.lhs << " vs " << check.rhs
                << "); ";
            ok = false;
        }
    }
    why << "50 configs, worst coefficient deviation " << worst_rel;
    return ok;
}

// ---- 10: benchmark scaling ---------------------------------------------------------

bool criterion_bench_scaling(std::ostringstream& why) {
    const auto t0 = std::chrono::steady_clock::now();
    BenchPlan plan;
    plan.mechanisms = {"tpa"};
    plan.batch_sizes = {1};
    plan.d_models = {2048};
    plan.head_dim = 64;
    plan.rank_q = 16;
    plan.rank_k = 1;
    plan.rank_v = 1;
    for (std::size_t p = 10; p <= 17; ++p) plan.seqlens.push_back(std::size_t{1} << p);
    plan.repetitions = 5;
    plan.warmup = 1;
    plan.threads = 1;
    plan.seed = 1011;
    plan.byte_budget = std::size_t{4} << 30;

    const auto rows = run_bench(plan);
    std::vector<BenchRow> top_half;
    for (const auto& r : rows) {
        if (r.status == "ok" && r.seqlen >= 16384) top_half.push_back(r);
    }
    if (top_half.size() < 4) {
        why << "sweep incomplete; ";
        return false;
    }
    const double slope = log_log_slope(top_half);
    bool ok = true;
    if (slope < 0.8 || slope > 1.3) {
        why << "slope " << slope << " outside [0.8, 1.3]; ";
        ok = false;
    }
    ok &= check_runtime(why, seconds_since(t0), 600.0);
    why << "slope " << slope << " over the top half, " << seconds_since(t0) << "s";
    return ok;
}

// ---- 11: xavier initialization -------------------------------------------------------

bool criterion_xavier(std::ostringstream& why) {
    bool ok = true;

    // bound formula, exact closed forms
    const Matrix m33 = xavier_init(3, 3, 77);  // bound = 1
    for (double v : m33.data()) {
        if (v < -1.0 || v > 1.0) {
            why << "3x3 bound violated; ";
            ok = false;
            break;
        }
    }
    const double bound = std::sqrt(6.0 / (768.0 + 64.0));
    const Matrix big = xavier_init(768, 64, 78);
    for (double v : big.data()) {
        if (std::abs(v) > bound) {
            why << "768/64 bound violated; ";
            ok = false;
            break;
        }
    }

    // empirical variance of 1e6 samples within 2% of 2/(n_in+n_out)
    const std::size_t n_in = 1000, n_out = 1000;
    const Matrix sample = xavier_init(n_in, n_out, 79);
    double var = 0.0;
    for (double v : sample.data()) var += v * v;
    var /= static_cast<double>(sample.size());
    const double want = 2.0 / static_cast<double>(n_in + n_out);
    const double rel = std::abs(var - want) / want;
    if (rel > 0.02) {
        why << "variance off by " << rel << "; ";
        ok = false;
    }
    why << "1e6 samples, variance rel err " << rel;
    return ok;
}

const Criterion kCriteria[] = {
    {1, "factorization equals the outer-product sum (1e-12)", criterion_factorization},
    {2, "rope pre-rotation and relative-position identity", criterion_rope},
    {3, "higher-order kronecker rope transform (1e-11)", criterion_higher_order},
    {4, "mha/mqa/gqa reductions to non-contextual tpa (1e-12)", criterion_reductions},
    {5, "flash decode vs materialized oracle across blockings", criterion_flash},
    {6, "decode loop matches the full-sequence path (T=256)", criterion_paths},
    {7, "cost model reproduces the worked examples exactly", criterion_cost_model},
    {8, "kv compression ratio and byte accounting", criterion_kv_memory},
    {9, "speed inequality agrees with instrumented counters", criterion_speed_inequality},
    {10, "decode time scales linearly in cache length", criterion_bench_scaling},
    {11, "xavier bound and variance", criterion_xavier},
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[i + 1]);
        }
    }

    int failures = 0;
    for (const auto& c : kCriteria) {
        if (only != 0 && c.id != only) continue;
        std::ostringstream why;
        bool passed = false;
        try {
            passed = c.run(why);
        } catch (const std::exception& e) {
            why << "exception: " << e.what();
        }
        std::cout << (passed ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.title
                  << " — " << why.str() << "\n";
        if (!passed) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
