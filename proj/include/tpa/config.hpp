#pragma once

#include <cstddef>
#include <string>

namespace tpa {

enum class TpaVariant {
    Full,            // contextual A and B factors for Q, K, V
    KVonly,          // dense query projection, factorized K/V
    NonContextualA,  // head factors are fixed parameters
    NonContextualB,  // feature factors are fixed parameters
    SharedB,         // K and V share one contextual B map
};

enum class FactorOrder { Second, Third };

std::string to_string(TpaVariant v);

// Dimensions and variant selection for one TPA attention layer. Every module
// validates its inputs against this.
struct TpaConfig {
    std::size_t d_model = 0;
    std::size_t heads = 0;     // h
    std::size_t head_dim = 0;  // d_h
    std::size_t rank_q = 1;
    std::size_t rank_k = 1;
    std::size_t rank_v = 1;
    TpaVariant variant = TpaVariant::Full;
    FactorOrder order = FactorOrder::Second;
    // Third-order split of head_dim = d_b * d_c; d_b must be even so the
    // 2x2 rotary blocks act inside the b factor.
    std::size_t d_b = 0;
    std::size_t d_c = 0;

    void validate() const;  // throws std::invalid_argument

    std::size_t kv_numbers_per_token() const {
        return (rank_k + rank_v) * (heads + head_dim);
    }
};

}  // namespace tpa
