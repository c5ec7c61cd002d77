#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "tpa/linalg.hpp"

using namespace tpa;

TEST_CASE("matmul identity and hand-checked products") {
    const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(max_abs_diff(matmul(Matrix::identity(2), m), m) == 0.0);

    const Matrix v = Matrix::from_rows({{0}, {1}});
    const Matrix prod = matmul(m, v);
    CHECK(prod(0, 0) == 2.0);
    CHECK(prod(1, 0) == 4.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
    std::mt19937_64 gen(11);
    const Matrix a = oracle::rand_matrix(7, 5, gen);
    const Matrix b = oracle::rand_matrix(5, 3, gen);
    CHECK(max_abs_diff(matmul(a, b), oracle::triple_loop_matmul(a, b)) < 1e-12);
}

TEST_CASE("matmul associativity on random small matrices") {
    std::mt19937_64 gen(12);
    for (int rep = 0; rep < 30; ++rep) {
        const Matrix a = oracle::rand_matrix(4, 6, gen);
        const Matrix b = oracle::rand_matrix(6, 3, gen);
        const Matrix c = oracle::rand_matrix(3, 5, gen);
        CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-10);
    }
}

TEST_CASE("matmul rejects mismatched shapes") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("Matrix construction enforces data length") {
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("outer products") {
    std::mt19937_64 gen(13);
    const auto v = oracle::rand_vec(5, gen);
    std::vector<double> e1(4, 0.0);
    e1[0] = 1.0;
    const Matrix o = outer(e1, v);
    for (std::size_t j = 0; j < 5; ++j) CHECK(o(0, j) == v[j]);
    for (std::size_t i = 1; i < 4; ++i) {
        for (std::size_t j = 0; j < 5; ++j) CHECK(o(i, j) == 0.0);
    }

    const Matrix small = outer(std::vector<double>{2, 3}, std::vector<double>{5});
    CHECK(small(0, 0) == 10.0);
    CHECK(small(1, 0) == 15.0);

    // rank 1 for nonzero u, v
    const auto u = oracle::rand_vec(6, gen);
    CHECK(oracle::gaussian_rank(outer(u, v)) == 1);

    // outer(u, v) == matmul(column(u), row(v))
    const Matrix col(u.size(), 1, u), row(1, v.size(), v);
    CHECK(max_abs_diff(outer(u, v), matmul(col, row)) == 0.0);
}

TEST_CASE("softmax of uniform logits is uniform") {
    const auto sm = softmax_lse(std::vector<double>{0, 0, 0});
    for (double p : sm.probs) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(sm.lse == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("softmax of a single entry is certain") {
    const auto sm = softmax_lse(std::vector<double>{-3.7});
    CHECK(sm.probs[0] == 1.0);
    CHECK(sm.lse == doctest::Approx(-3.7));
}

TEST_CASE("softmax shift invariance and simplex membership") {
    std::mt19937_64 gen(14);
    for (int rep = 0; rep < 40; ++rep) {
        auto logits = oracle::rand_vec(8, gen);
        for (double& v : logits) v *= 10.0;
        const auto sm = softmax_lse(logits);
        double sum = 0.0;
        for (double p : sm.probs) {
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);

        auto shifted = logits;
        const double c = 100.0 * oracle::sym(gen);
        for (double& v : shifted) v += c;
        const auto sm2 = softmax_lse(shifted);
        CHECK(max_abs_diff(std::span<const double>(sm.probs), sm2.probs) < 1e-12);
        CHECK(sm2.lse == doctest::Approx(sm.lse + c).epsilon(1e-12));
    }
}

TEST_CASE("softmax lse matches the brute-force definition") {
    std::mt19937_64 gen(15);
    const auto logits = oracle::rand_vec(6, gen);
    const auto sm = softmax_lse(logits);
    double direct = 0.0;
    for (double v : logits) direct += std::exp(v);
    CHECK(sm.lse == doctest::Approx(std::log(direct)).epsilon(1e-13));
}

TEST_CASE("masked entries get probability exactly zero") {
    std::vector<double> logits{1.0, 2.0, 3.0};
    std::vector<double> mask{0.0, kMaskedLogit, 0.0};
    const auto sm = softmax_lse(logits, std::span<const double>(mask));
    CHECK(sm.probs[1] == 0.0);
    CHECK(sm.probs[0] + sm.probs[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("fully masked rows are rejected") {
    std::vector<double> logits{1.0, 2.0};
    std::vector<double> mask{kMaskedLogit, kMaskedLogit};
    CHECK_THROWS_AS(softmax_lse(logits, std::span<const double>(mask)), std::domain_error);
    CHECK_THROWS_AS(softmax_lse(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("mask sentinel absorbs ordinary logits bit-exactly") {
    // the convention the blocked decode relies on
    CHECK(kMaskedLogit + 1e9 == kMaskedLogit);
    CHECK(std::exp(kMaskedLogit - 10.0) == 0.0);
}
