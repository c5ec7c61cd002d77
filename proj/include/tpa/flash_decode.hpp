#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpa/attention_ref.hpp"
#include "tpa/factor.hpp"
#include "tpa/kv_cache.hpp"
#include "tpa/rope.hpp"

namespace tpa {

// Multiply-accumulate counts for the three dominant contractions of the
// factor-space decode: head-shared feature dots, per-head rank mixing, and
// value mixing. Incremented in the innermost loops when a sink is attached;
// counted runs take the rank-general path.
struct MacCounters {
    std::uint64_t score = 0;
    std::uint64_t mix = 0;
    std::uint64_t value = 0;

    std::uint64_t total() const { return score + mix + value; }
    std::string to_json() const;  // {"mac_score":..,"mac_mix":..,"mac_value":..}
};

// Running blocked-softmax accumulators per head. `m` never decreases across
// blocks; `norm` is the running sum of exp(logit - m).
struct DecodeState {
    Matrix y;                  // h x E weighted value sums
    std::vector<double> norm;  // per head
    std::vector<double> m;     // per head

    static DecodeState initial(std::size_t heads, std::size_t e);
    double log_sum_exp(std::size_t head) const;
};

// Fuse a later partial into an earlier one (same log-sum-exp rescaling the
// block loop uses). Merge order across partials is ascending block index.
void merge_state(DecodeState& acc, const DecodeState& later);

// One decode step in factor space (general ranks, masked, blocked online
// log-sum-exp). `mask`, when non-empty, holds one 0/kMaskedLogit entry per
// cached token. Output is h x d_h.
Matrix flash_decode(const FactorBlock& q, const FactorizedKvCache& cache, std::size_t block_size,
                    std::span<const double> mask = {}, MacCounters* counters = nullptr);

// Partial decode over cache tokens [begin, end): the (y, norm, m) triple a
// parallel worker produces. Merging partials for a disjoint ascending cover
// of [0, M) and finalizing reproduces flash_decode.
DecodeState decode_partial(const FactorBlock& q, const FactorizedKvCache& cache,
                           std::size_t block_size, std::size_t begin, std::size_t end,
                           std::span<const double> mask = {});

Matrix decode_finalize(const DecodeState& st, std::size_t rank_v);

// Dense-query path for the KVonly variant: q is the materialized h x d_h
// query, K/V stay factorized.
Matrix flash_decode_dense(const Matrix& q_dense, const FactorizedKvCache& cache,
                          std::size_t block_size, std::span<const double> mask = {},
                          MacCounters* counters = nullptr);

// Same result as flash_decode, computed by fanning contiguous block ranges
// out to `threads` workers and merging partials in ascending order.
Matrix flash_decode_parallel(const FactorBlock& q, const FactorizedKvCache& cache,
                             std::size_t block_size, std::size_t threads,
                             std::span<const double> mask = {});

// Full-sequence attention in factor space, never materializing Q/K/V.
// mask is T_q x T_k of {0, kMaskedLogit}; P tiles are evaluated blockwise
// over the key axis. Output T_q x h x E.
HeadTensor specialized_full_attention(std::span<const FactorBlock> q_blocks,
                                      std::span<const FactorBlock> k_blocks,
                                      std::span<const FactorBlock> v_blocks, const Matrix& mask,
                                      std::size_t block_size = 64, MacCounters* counters = nullptr);

Matrix causal_mask(std::size_t tokens);

struct DecodeLoopResult {
    std::vector<Matrix> outputs;  // one h x d_h matrix per step
    FactorizedKvCache cache;
};

// Autoregressive loop: per token, compute factors, pre-rotate the query and
// key feature factors at the token's position, append K/V to the cache and
// decode against everything cached so far.
DecodeLoopResult decode_loop(std::span<const std::vector<double>> tokens, const FactorWeights& w,
                             const TpaConfig& cfg, const RopeTable& rope,
                             std::size_t block_size = 64);

// Dense comparator: one query against materialized K/V, counting the
// 2*H*D-per-token multiply-accumulates of standard attention.
Matrix materialized_decode(const Matrix& q_heads, const HeadTensor& k, const HeadTensor& v,
                           MacCounters* counters = nullptr);

}  // namespace tpa
