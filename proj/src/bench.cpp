#include "tpa/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "tpa/attention_ref.hpp"
#include "tpa/flash_decode.hpp"
#include "tpa/kv_cache.hpp"

namespace tpa {

namespace {

using clock_type = std::chrono::steady_clock;

double to_ns(clock_type::duration d) {
    return static_cast<double>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(d).count());
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double next_unit(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

void fill_random(std::vector<double>& v, std::mt19937_64& gen) {
    for (double& x : v) x = 2.0 * next_unit(gen) - 1.0;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen) {
    Matrix m(rows, cols);
    for (double& x : m.data()) x = 2.0 * next_unit(gen) - 1.0;
    return m;
}

// Keep the timed no-op from being optimized away.
volatile double g_sink = 0.0;

}  // namespace

void BenchPlan::validate() const {
    if (repetitions < 3) {
        throw std::invalid_argument("BenchPlan: repetitions must be >= 3");
    }
    if (!std::is_sorted(seqlens.begin(), seqlens.end())) {
        throw std::invalid_argument("BenchPlan: seqlens must be sorted ascending");
    }
    for (std::size_t d : d_models) {
        if (d % head_dim != 0) {
            throw std::invalid_argument("BenchPlan: d_model must be a multiple of head_dim");
        }
    }
    for (const auto& m : mechanisms) {
        if (m != "tpa" && m != "mha" && m != "dryrun") {
            throw std::invalid_argument("BenchPlan: unknown mechanism " + m);
        }
    }
}

std::vector<BenchRow> run_bench(const BenchPlan& plan_in) {
    BenchPlan plan = plan_in;
    if (plan.seqlens.empty()) {
        for (std::size_t p = 10; p <= 17; ++p) plan.seqlens.push_back(std::size_t{1} << p);
    }
    plan.validate();

    std::vector<BenchRow> rows;
    for (const auto& mech : plan.mechanisms) {
        for (std::size_t batch : plan.batch_sizes) {
            for (std::size_t dm : plan.d_models) {
                const std::size_t heads = dm / plan.head_dim;
                for (std::size_t seqlen : plan.seqlens) {
                    BenchRow row;
                    row.mechanism = mech;
                    row.batch = batch;
                    row.d_model = dm;
                    row.heads = heads;
                    row.head_dim = plan.head_dim;
                    row.rank_q = plan.rank_q;
                    row.rank_k = plan.rank_k;
                    row.rank_v = plan.rank_v;
                    row.seqlen = seqlen;
                    row.log2_seqlen = std::log2(static_cast<double>(seqlen));
                    row.threads = plan.threads;
                    row.repetitions = plan.repetitions;
                    row.status = "ok";

                    TpaConfig cfg;
                    cfg.d_model = dm;
                    cfg.heads = heads;
                    cfg.head_dim = plan.head_dim;
                    cfg.rank_q = plan.rank_q;
                    cfg.rank_k = plan.rank_k;
                    cfg.rank_v = plan.rank_v;

                    const std::size_t cache_bytes =
                        mech == "mha" ? seqlen * 2 * heads * plan.head_dim * sizeof(double)
                                      : seqlen * bytes_per_token(cfg);
                    if (mech != "dryrun" && cache_bytes > plan.byte_budget) {
                        row.status = "skipped";
                        rows.push_back(row);
                        continue;
                    }

                    std::seed_seq seq{plan.seed, static_cast<std::uint64_t>(seqlen),
                                      static_cast<std::uint64_t>(dm),
                                      static_cast<std::uint64_t>(batch)};
                    std::mt19937_64 gen(seq);

                    std::vector<double> samples;
                    samples.reserve(plan.repetitions);

                    if (mech == "dryrun") {
                        for (std::size_t r = 0; r < plan.warmup + plan.repetitions; ++r) {
                            const auto t0 = clock_type::now();
                            for (std::size_t b = 0; b < batch; ++b) g_sink = g_sink + 0.0;
                            const auto t1 = clock_type::now();
                            if (r >= plan.warmup) samples.push_back(to_ns(t1 - t0));
                        }
                    } else if (mech == "tpa") {
                        // pre-generate cache + queries outside the timed region
                        FactorizedKvCache cache(cfg);
                        {
                            std::vector<double> a_k(seqlen * cfg.rank_k * heads);
                            std::vector<double> b_k(seqlen * cfg.rank_k * plan.head_dim);
                            std::vector<double> a_v(seqlen * cfg.rank_v * heads);
                            std::vector<double> b_v(seqlen * cfg.rank_v * plan.head_dim);
                            fill_random(a_k, gen);
                            fill_random(b_k, gen);
                            fill_random(a_v, gen);
                            fill_random(b_v, gen);
                            cache = FactorizedKvCache::from_raw(cfg, seqlen, a_k, b_k, a_v, b_v);
                        }
                        std::vector<FactorBlock> queries(batch);
                        for (auto& q : queries) {
                            q.a = random_matrix(cfg.rank_q, heads, gen);
                            q.b = random_matrix(cfg.rank_q, plan.head_dim, gen);
                        }
                        for (std::size_t r = 0; r < plan.warmup + plan.repetitions; ++r) {
                            const auto t0 = clock_type::now();
                            for (const auto& q : queries) {
                                Matrix out =
                                    plan.threads > 1
                                        ? flash_decode_parallel(q, cache, plan.block_size,
                                                                plan.threads)
                                        : flash_decode(q, cache, plan.block_size);
                                g_sink = out(0, 0);
                            }
                            const auto t1 = clock_type::now();
                            if (r >= plan.warmup) samples.push_back(to_ns(t1 - t0));
                        }
                    } else {  // mha: materialized decode over dense K/V
                        HeadTensor k(seqlen, heads, plan.head_dim);
                        HeadTensor v(seqlen, heads, plan.head_dim);
                        fill_random(k.data, gen);
                        fill_random(v.data, gen);
                        std::vector<Matrix> queries;
                        queries.reserve(batch);
                        for (std::size_t b = 0; b < batch; ++b) {
                            queries.push_back(random_matrix(heads, plan.head_dim, gen));
                        }
                        for (std::size_t r = 0; r < plan.warmup + plan.repetitions; ++r) {
                            const auto t0 = clock_type::now();
                            for (const auto& q : queries) {
                                Matrix out = materialized_decode(q, k, v);
                                g_sink = out(0, 0);
                            }
                            const auto t1 = clock_type::now();
                            if (r >= plan.warmup) samples.push_back(to_ns(t1 - t0));
                        }
                    }

                    row.median_ns = median(samples);
                    row.min_ns = *std::min_element(samples.begin(), samples.end());
                    rows.push_back(row);
                }
            }
        }
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << std::fixed;
    out << "mechanism,batch,d_model,heads,head_dim,rank_q,rank_k,rank_v,seqlen,log2_seqlen,"
           "threads,repetitions,median_ns,min_ns,status\r\n";
    for (const auto& r : rows) {
        out << r.mechanism << ',' << r.batch << ',' << r.d_model << ',' << r.heads << ','
            << r.head_dim << ',' << r.rank_q << ',' << r.rank_k << ',' << r.rank_v << ','
            << r.seqlen << ',' << std::setprecision(4) << r.log2_seqlen << ','
            << r.threads << ',' << r.repetitions << ',' << std::setprecision(1) << r.median_ns
            << ',' << r.min_ns << ',' << r.status << "\r\n";
    }
    return out.str();
}

double log_log_slope(const std::vector<BenchRow>& rows) {
    if (rows.size() < 2) {
        throw std::invalid_argument("log_log_slope: need at least two rows");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : rows) {
        const double x = r.log2_seqlen;
        const double y = std::log2(r.median_ns);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(rows.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace tpa
