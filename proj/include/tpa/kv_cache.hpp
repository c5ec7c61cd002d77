#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tpa/config.hpp"
#include "tpa/factor.hpp"

namespace tpa {

// (R_K + R_V) * (h + d_h) * element_bytes
std::size_t bytes_per_token(const TpaConfig& cfg, std::size_t element_bytes = sizeof(double));

// (R_K + R_V)(h + d_h) / (2 h d_h); may exceed 1, returned as-is.
double compression_ratio(const TpaConfig& cfg);

// Append-only store of per-token K/V factors: (A_K, B~_K, A_V, B_V), where
// B~_K was pre-rotated at the token's own position (position == append
// order). Structure-of-arrays so the decode loop streams each factor
// contiguously. Single writer; readers must not overlap an append.
class FactorizedKvCache {
public:
    explicit FactorizedKvCache(const TpaConfig& cfg);

    const TpaConfig& config() const { return cfg_; }
    std::size_t size() const { return length_; }
    bool empty() const { return length_ == 0; }

    // k_block must already be pre-rotated; `rotated_at` is the position used
    // for that rotation and must equal the current length.
    std::size_t append(const FactorBlock& k_block, const FactorBlock& v_block,
                       std::size_t rotated_at);

    // Per-token views, factor dims in row-major (rank x h) / (rank x d_h).
    std::span<const double> a_k(std::size_t token) const;
    std::span<const double> b_k(std::size_t token) const;
    std::span<const double> a_v(std::size_t token) const;
    std::span<const double> b_v(std::size_t token) const;

    FactorBlock k_block(std::size_t token) const;
    FactorBlock v_block(std::size_t token) const;

    // Logical bytes of cached factor state (capacity excluded).
    std::size_t total_bytes(std::size_t element_bytes = sizeof(double)) const {
        return bytes_per_token(cfg_, element_bytes) * length_;
    }

    // Raw factor arrays for serialization; layout is token-major.
    std::span<const double> raw_a_k() const { return a_k_; }
    std::span<const double> raw_b_k() const { return b_k_; }
    std::span<const double> raw_a_v() const { return a_v_; }
    std::span<const double> raw_b_v() const { return b_v_; }

    // Rebuild from raw arrays (snapshot restore).
    static FactorizedKvCache from_raw(const TpaConfig& cfg, std::size_t length,
                                      std::span<const double> a_k, std::span<const double> b_k,
                                      std::span<const double> a_v, std::span<const double> b_v);

private:
    TpaConfig cfg_;
    std::size_t length_ = 0;
    std::vector<double> a_k_, b_k_, a_v_, b_v_;
};

}  // namespace tpa
