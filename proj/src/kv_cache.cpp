#include "tpa/kv_cache.hpp"

#include <stdexcept>
#include <string>

namespace tpa {

FactorizedKvCache::FactorizedKvCache(const TpaConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.order != FactorOrder::Second) {
        throw std::invalid_argument("FactorizedKvCache: second-order factors only");
    }
}

std::size_t FactorizedKvCache::append(const FactorBlock& k_block, const FactorBlock& v_block,
                                      std::size_t rotated_at) {
    const std::size_t h = cfg_.heads, dh = cfg_.head_dim;
    if (k_block.a.rows() != cfg_.rank_k || k_block.a.cols() != h ||
        k_block.b.rows() != cfg_.rank_k || k_block.b.cols() != dh) {
        throw std::invalid_argument("append: K factor shape mismatch");
    }
    if (v_block.a.rows() != cfg_.rank_v || v_block.a.cols() != h ||
        v_block.b.rows() != cfg_.rank_v || v_block.b.cols() != dh) {
        throw std::invalid_argument("append: V factor shape mismatch");
    }
    if (rotated_at != length_) {
        throw std::invalid_argument("append: key pre-rotated at position " +
                                    std::to_string(rotated_at) + " but cache length is " +
                                    std::to_string(length_));
    }
    if (!k_block.a.all_finite() || !k_block.b.all_finite() || !v_block.a.all_finite() ||
        !v_block.b.all_finite()) {
        throw std::invalid_argument("append: non-finite factor entries");
    }

    a_k_.insert(a_k_.end(), k_block.a.data().begin(), k_block.a.data().end());
    b_k_.insert(b_k_.end(), k_block.b.data().begin(), k_block.b.data().end());
    a_v_.insert(a_v_.end(), v_block.a.data().begin(), v_block.a.data().end());
    b_v_.insert(b_v_.end(), v_block.b.data().begin(), v_block.b.data().end());
    return ++length_;
}

std::span<const double> FactorizedKvCache::a_k(std::size_t token) const {
    const std::size_t n = cfg_.rank_k * cfg_.heads;
    return {a_k_.data() + token * n, n};
}
std::span<const double> FactorizedKvCache::b_k(std::size_t token) const {
    const std::size_t n = cfg_.rank_k * cfg_.head_dim;
    return {b_k_.data() + token * n, n};
}
std::span<const double> FactorizedKvCache::a_v(std::size_t token) const {
    const std::size_t n = cfg_.rank_v * cfg_.heads;
    return {a_v_.data() + token * n, n};
}
std::span<const double> FactorizedKvCache::b_v(std::size_t token) const {
    const std::size_t n = cfg_.rank_v * cfg_.head_dim;
    return {b_v_.data() + token * n, n};
}

FactorBlock FactorizedKvCache::k_block(std::size_t token) const {
    if (token >= length_) throw std::out_of_range("k_block: token out of range");
    FactorBlock blk;
    const auto a = a_k(token), b = b_k(token);
    blk.a = Matrix(cfg_.rank_k, cfg_.heads, {a.begin(), a.end()});
    blk.b = Matrix(cfg_.rank_k, cfg_.head_dim, {b.begin(), b.end()});
    return blk;
}

FactorBlock FactorizedKvCache::v_block(std::size_t token) const {
    if (token >= length_) throw std::out_of_range("v_block: token out of range");
    FactorBlock blk;
    const auto a = a_v(token), b = b_v(token);
    blk.a = Matrix(cfg_.rank_v, cfg_.heads, {a.begin(), a.end()});
    blk.b = Matrix(cfg_.rank_v, cfg_.head_dim, {b.begin(), b.end()});
    return blk;
}

FactorizedKvCache FactorizedKvCache::from_raw(const TpaConfig& cfg, std::size_t length,
                                              std::span<const double> a_k,
                                              std::span<const double> b_k,
                                              std::span<const double> a_v,
                                              std::span<const double> b_v) {
    FactorizedKvCache cache(cfg);
    if (a_k.size() != length * cfg.rank_k * cfg.heads ||
        b_k.size() != length * cfg.rank_k * cfg.head_dim ||
        a_v.size() != length * cfg.rank_v * cfg.heads ||
        b_v.size() != length * cfg.rank_v * cfg.head_dim) {
        throw std::invalid_argument("from_raw: array lengths inconsistent with config");
    }
    cache.length_ = length;
    cache.a_k_.assign(a_k.begin(), a_k.end());
    cache.b_k_.assign(b_k.begin(), b_k.end());
    cache.a_v_.assign(a_v.begin(), a_v.end());
    cache.b_v_.assign(b_v.begin(), b_v.end());
    return cache;
}

std::size_t bytes_per_token(const TpaConfig& cfg, std::size_t element_bytes) {
    return (cfg.rank_k + cfg.rank_v) * (cfg.heads + cfg.head_dim) * element_bytes;
}

double compression_ratio(const TpaConfig& cfg) {
    const double factored =
        static_cast<double>((cfg.rank_k + cfg.rank_v) * (cfg.heads + cfg.head_dim));
    const double dense = 2.0 * static_cast<double>(cfg.heads * cfg.head_dim);
    return factored / dense;
}

}  // namespace tpa
