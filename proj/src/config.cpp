#include "tpa/config.hpp"

#include <stdexcept>

namespace tpa {

std::string to_string(TpaVariant v) {
    switch (v) {
        case TpaVariant::Full: return "full";
        case TpaVariant::KVonly: return "kvonly";
        case TpaVariant::NonContextualA: return "non_contextual_a";
        case TpaVariant::NonContextualB: return "non_contextual_b";
        case TpaVariant::SharedB: return "shared_b";
    }
    return "?";
}

void TpaConfig::validate() const {
    if (d_model < 1 || heads < 1 || head_dim < 1) {
        throw std::invalid_argument("TpaConfig: d_model, heads, head_dim must be >= 1");
    }
    if (rank_k < 1 || rank_v < 1) {
        throw std::invalid_argument("TpaConfig: rank_k and rank_v must be >= 1");
    }
    // rank_q is ignored for KVonly (dense query projection) but must be
    // sane for every other variant.
    if (variant != TpaVariant::KVonly && rank_q < 1) {
        throw std::invalid_argument("TpaConfig: rank_q must be >= 1");
    }
    if (order == FactorOrder::Third) {
        if (d_b * d_c != head_dim) {
            throw std::invalid_argument("TpaConfig: third order requires d_b*d_c == head_dim");
        }
        if (d_b % 2 != 0) {
            throw std::invalid_argument("TpaConfig: third order requires even d_b");
        }
        if (variant != TpaVariant::Full) {
            throw std::invalid_argument("TpaConfig: third order supports the full variant only");
        }
    }
}

}  // namespace tpa
