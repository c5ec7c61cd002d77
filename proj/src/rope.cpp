#include "tpa/rope.hpp"

#include <cmath>
#include <stdexcept>

namespace tpa {

RopeTable::RopeTable(std::size_t dim, double base) : base_(base) {
    if (dim == 0 || dim % 2 != 0) {
        throw std::invalid_argument("RopeTable: dim must be even and positive");
    }
    angles_.resize(dim / 2);
    for (std::size_t j = 0; j < angles_.size(); ++j) {
        angles_[j] = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(dim));
    }
}

RopeTable::RopeTable(std::vector<double> angles) : base_(0.0), angles_(std::move(angles)) {
    if (angles_.empty()) {
        throw std::invalid_argument("RopeTable: at least one angle required");
    }
}

Matrix rotation_matrix(const RopeTable& table, std::int64_t t) {
    const std::size_t dim = table.dim();
    Matrix r(dim, dim);
    for (std::size_t j = 0; j < dim / 2; ++j) {
        const double a = static_cast<double>(t) * table.angles()[j];
        const double c = std::cos(a), s = std::sin(a);
        r(2 * j, 2 * j) = c;
        r(2 * j, 2 * j + 1) = -s;
        r(2 * j + 1, 2 * j) = s;
        r(2 * j + 1, 2 * j + 1) = c;
    }
    return r;
}

Matrix apply_rope_rows(const RopeTable& table, std::int64_t t, const Matrix& m) {
    const std::size_t dim = table.dim();
    if (m.cols() != dim) {
        throw std::invalid_argument("apply_rope_rows: cols != rope dim");
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto in = m.row(i);
        auto o = out.row(i);
        for (std::size_t j = 0; j < dim / 2; ++j) {
            const double a = static_cast<double>(t) * table.angles()[j];
            const double c = std::cos(a), s = std::sin(a);
            // (v R_t) for the 2x2 block [[c,-s],[s,c]]
            o[2 * j] = in[2 * j] * c + in[2 * j + 1] * s;
            o[2 * j + 1] = -in[2 * j] * s + in[2 * j + 1] * c;
        }
    }
    return out;
}

FactorBlock pre_rotate_key(const FactorBlock& block, std::int64_t t, const RopeTable& table) {
    FactorBlock out;
    out.a = block.a;
    out.b = apply_rope_rows(table, t, block.b);
    out.c = block.c;
    return out;
}

Matrix higher_order_transform(const RopeTable& table, std::int64_t t, std::size_t d_c) {
    if (d_c < 1) {
        throw std::invalid_argument("higher_order_transform: d_c must be >= 1");
    }
    const std::size_t db = table.dim();
    const Matrix rt = transpose(rotation_matrix(table, t));
    Matrix out(db * d_c, db * d_c);
    for (std::size_t k = 0; k < d_c; ++k) {
        const std::size_t off = k * db;
        for (std::size_t i = 0; i < db; ++i) {
            for (std::size_t j = 0; j < db; ++j) {
                out(off + i, off + j) = rt(i, j);
            }
        }
    }
    return out;
}

}  // namespace tpa
