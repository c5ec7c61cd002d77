#include "tpa/factor.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace tpa {

namespace {

// Uniform double in [0,1) from the top 53 bits, so streams are reproducible
// across standard libraries.
double next_unit(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& gen) {
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = (2.0 * next_unit(gen) - 1.0) * bound;
    }
    return m;
}

Matrix reshape_rows(std::span<const double> v, std::size_t rows, std::size_t cols) {
    if (v.size() != rows * cols) {
        throw std::invalid_argument("reshape: length mismatch");
    }
    Matrix m(rows, cols);
    std::copy(v.begin(), v.end(), m.data().begin());
    return m;
}

void check_block_shape(const FactorBlock& b, const char* what) {
    if (b.a.rows() != b.b.rows() || (!b.c.empty() && b.c.rows() != b.a.rows())) {
        throw std::invalid_argument(std::string(what) + ": factor rank mismatch");
    }
}

}  // namespace

Matrix xavier_init(std::size_t n_in, std::size_t n_out, std::uint64_t seed) {
    if (n_in < 1 || n_out < 1) {
        throw std::invalid_argument("xavier_init: dimensions must be >= 1");
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(n_in + n_out));
    std::mt19937_64 gen(seed);
    return uniform_matrix(n_out, n_in, bound, gen);
}

FactorWeights FactorWeights::init(const TpaConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    FactorWeights w;
    w.cfg = cfg;

    std::mt19937_64 gen(seed);
    auto xavier = [&](std::size_t n_in, std::size_t n_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(n_in + n_out));
        return uniform_matrix(n_out, n_in, bound, gen);
    };

    const std::size_t h = cfg.heads, dh = cfg.head_dim, dm = cfg.d_model;
    const std::size_t feat_b = cfg.order == FactorOrder::Third ? cfg.d_b : dh;

    auto init_component = [&](std::size_t rank, Matrix& w_a, Matrix& w_b, Matrix& w_c,
                              Matrix& fixed_a, Matrix& fixed_b) {
        if (cfg.variant == TpaVariant::NonContextualA) {
            // fixed per-rank head vectors, Xavier bound over their own shape
            const double bound = std::sqrt(6.0 / static_cast<double>(rank + h));
            fixed_a = uniform_matrix(rank, h, bound, gen);
        } else {
            w_a = xavier(dm, rank * h);
        }
        if (cfg.variant == TpaVariant::NonContextualB) {
            const double bound = std::sqrt(6.0 / static_cast<double>(rank + feat_b));
            fixed_b = uniform_matrix(rank, feat_b, bound, gen);
        } else {
            w_b = xavier(dm, rank * feat_b);
        }
        if (cfg.order == FactorOrder::Third) {
            w_c = xavier(dm, rank * cfg.d_c);
        }
    };

    if (cfg.variant == TpaVariant::KVonly) {
        w.w_query_dense = xavier(dm, h * dh);
    } else {
        init_component(cfg.rank_q, w.w_a_q, w.w_b_q, w.w_c_q, w.fixed_a_q, w.fixed_b_q);
    }
    init_component(cfg.rank_k, w.w_a_k, w.w_b_k, w.w_c_k, w.fixed_a_k, w.fixed_b_k);
    if (cfg.variant == TpaVariant::SharedB) {
        // value B map aliases the key one; only the head factors differ
        w.w_a_v = xavier(dm, cfg.rank_v * h);
        if (cfg.rank_v != cfg.rank_k) {
            throw std::invalid_argument("FactorWeights: shared_b requires rank_k == rank_v");
        }
    } else {
        init_component(cfg.rank_v, w.w_a_v, w.w_b_v, w.w_c_v, w.fixed_a_v, w.fixed_b_v);
    }

    w.w_out = xavier(h * dh, dm);
    return w;
}

TokenFactors compute_factors(const FactorWeights& w, const TpaConfig& cfg,
                             std::span<const double> x_t) {
    cfg.validate();
    if (x_t.size() != cfg.d_model) {
        throw std::invalid_argument("compute_factors: x_t length " + std::to_string(x_t.size()) +
                                    " != d_model " + std::to_string(cfg.d_model));
    }

    const std::size_t h = cfg.heads, dh = cfg.head_dim;
    const std::size_t feat_b = cfg.order == FactorOrder::Third ? cfg.d_b : dh;

    auto component = [&](std::size_t rank, const Matrix& w_a, const Matrix& w_b,
                         const Matrix& w_c, const Matrix& fixed_a, const Matrix& fixed_b) {
        FactorBlock blk;
        if (cfg.variant == TpaVariant::NonContextualA) {
            blk.a = fixed_a;
        } else {
            blk.a = reshape_rows(matvec(w_a, x_t), rank, h);
        }
        if (cfg.variant == TpaVariant::NonContextualB) {
            blk.b = fixed_b;
        } else {
            blk.b = reshape_rows(matvec(w_b, x_t), rank, feat_b);
        }
        if (cfg.order == FactorOrder::Third) {
            blk.c = reshape_rows(matvec(w_c, x_t), rank, cfg.d_c);
        }
        return blk;
    };

    TokenFactors out;
    if (cfg.variant == TpaVariant::KVonly) {
        out.q_dense = reshape_rows(matvec(w.w_query_dense, x_t), h, dh);
    } else {
        out.q = component(cfg.rank_q, w.w_a_q, w.w_b_q, w.w_c_q, w.fixed_a_q, w.fixed_b_q);
    }
    out.k = component(cfg.rank_k, w.w_a_k, w.key_b_map(), w.w_c_k, w.fixed_a_k, w.fixed_b_k);
    out.v = component(cfg.rank_v, w.w_a_v, w.value_b_map(), w.w_c_v, w.fixed_a_v, w.fixed_b_v);
    return out;
}

Matrix materialize(const FactorBlock& block) {
    check_block_shape(block, "materialize");
    const std::size_t rank = block.a.rows();
    const std::size_t h = block.a.cols();
    const std::size_t dh = block.b.cols();
    const double scale = 1.0 / static_cast<double>(rank);

    Matrix out(h, dh);
    for (std::size_t r = 0; r < rank; ++r) {
        const auto ar = block.a.row(r);
        const auto br = block.b.row(r);
        for (std::size_t i = 0; i < h; ++i) {
            const double w = scale * ar[i];
            auto orow = out.row(i);
            for (std::size_t j = 0; j < dh; ++j) {
                orow[j] += w * br[j];
            }
        }
    }
    return out;
}

Matrix materialize_third_order(const FactorBlock& block) {
    check_block_shape(block, "materialize_third_order");
    if (block.c.empty()) {
        throw std::invalid_argument("materialize_third_order: missing c factor");
    }
    const std::size_t rank = block.a.rows();
    const std::size_t h = block.a.cols();
    const std::size_t db = block.b.cols();
    const std::size_t dc = block.c.cols();
    const double scale = 1.0 / static_cast<double>(rank);

    Matrix out(h, db * dc);
    std::vector<double> vec(db * dc);
    for (std::size_t r = 0; r < rank; ++r) {
        const auto br = block.b.row(r);
        const auto cr = block.c.row(r);
        // vec(b c^T), column stacking: column j of the d_b x d_c matrix lands
        // at [j*d_b, (j+1)*d_b)
        for (std::size_t j = 0; j < dc; ++j) {
            for (std::size_t i = 0; i < db; ++i) {
                vec[j * db + i] = br[i] * cr[j];
            }
        }
        const auto ar = block.a.row(r);
        for (std::size_t i = 0; i < h; ++i) {
            const double w = scale * ar[i];
            auto orow = out.row(i);
            for (std::size_t j = 0; j < vec.size(); ++j) {
                orow[j] += w * vec[j];
            }
        }
    }
    return out;
}

}  // namespace tpa
