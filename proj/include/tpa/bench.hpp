#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tpa {

// Decode-time sweep over (mechanism, batch, d_model, seqlen). Factors are
// generated outside the timed region; the timed region is the decode call
// alone. "batch" decodes B distinct queries against one shared cache per
// row, which keeps desk-scale memory bounded while preserving the per-token
// scaling being measured.
struct BenchPlan {
    std::vector<std::string> mechanisms = {"tpa"};     // tpa | mha | dryrun
    std::vector<std::size_t> batch_sizes = {1};
    std::vector<std::size_t> d_models = {2048};
    std::size_t head_dim = 64;                         // heads = d_model / head_dim
    std::size_t rank_q = 16, rank_k = 1, rank_v = 1;
    std::vector<std::size_t> seqlens;                  // default 2^10 .. 2^17
    std::size_t repetitions = 5;
    std::size_t warmup = 1;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t block_size = 256;
    std::size_t byte_budget = std::size_t{2} << 30;    // skip rows whose cache exceeds this

    void validate() const;  // throws std::invalid_argument
};

struct BenchRow {
    std::string mechanism;
    std::size_t batch = 0, d_model = 0, heads = 0, head_dim = 0;
    std::size_t rank_q = 0, rank_k = 0, rank_v = 0;
    std::size_t seqlen = 0;
    double log2_seqlen = 0.0;
    std::size_t threads = 0, repetitions = 0;
    double median_ns = 0.0, min_ns = 0.0;
    std::string status;  // "ok" or "skipped"
};

std::vector<BenchRow> run_bench(const BenchPlan& plan);

// Fixed column order, RFC 4180 line endings.
std::string bench_csv(const std::vector<BenchRow>& rows);

// Least-squares slope of log2(median time) vs log2(seqlen) over the given
// rows; used by the scaling sanity check.
double log_log_slope(const std::vector<BenchRow>& rows);

}  // namespace tpa
