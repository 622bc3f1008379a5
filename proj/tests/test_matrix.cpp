#include <catch2/catch_amalgamated.hpp>

#include "ams/matrix.hpp"
#include "ams/rng.hpp"
#include "test_helpers.hpp"

using namespace ams;

TEST_CASE("matrix construction and indexing", "[matrix]") {
    Matrix m(2, 3, 1.5);
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 3);
    REQUIRE(m.size() == 6);
    CHECK(m(1, 2) == 1.5);
    m(0, 1) = -4.0;
    CHECK(m.row(0)[1] == -4.0);

    const Matrix id = Matrix::identity(3);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(id(r, c) == (r == c ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("matmul matches a naive triple loop", "[matrix]") {
    Rng rng(11);
    const Matrix a = test::random_matrix(rng, 4, 6);
    const Matrix b = test::random_matrix(rng, 6, 3);
    const Matrix c = matmul(a, b);
    REQUIRE(c.rows() == 4);
    REQUIRE(c.cols() == 3);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < 6; ++t) {
                acc += a(r, t) * b(t, j);
            }
            CHECK_THAT(c(r, j), Catch::Matchers::WithinAbs(acc, 1e-12));
        }
    }
}

TEST_CASE("matmul rejects incompatible shapes", "[matrix]") {
    const Matrix a(2, 3);
    const Matrix b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), dimension_error);
}

TEST_CASE("transpose round trip", "[matrix]") {
    Rng rng(12);
    const Matrix a = test::random_matrix(rng, 5, 2);
    const Matrix t = transpose(a);
    REQUIRE(t.rows() == 2);
    REQUIRE(t.cols() == 5);
    CHECK(test::bit_equal(transpose(t), a));
    CHECK(t(1, 4) == a(4, 1));
}

TEST_CASE("matvec agrees with matmul against a column", "[matrix]") {
    Rng rng(13);
    const Matrix a = test::random_matrix(rng, 3, 4);
    Vector x = {1.0, -2.0, 0.5, 3.0};
    const Vector y = matvec(a, x);
    REQUIRE(y.size() == 3);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK_THAT(y[r], Catch::Matchers::WithinAbs(dot(a.row(r), x), 1e-12));
    }
    Vector short_x = {1.0, 2.0};
    CHECK_THROWS_AS(matvec(a, short_x), dimension_error);
}

TEST_CASE("row_mean averages columns", "[matrix]") {
    Matrix m(2, 2);
    m(0, 0) = 1.0;
    m(0, 1) = 10.0;
    m(1, 0) = 3.0;
    m(1, 1) = 20.0;
    const Vector mean = row_mean(m);
    REQUIRE(mean.size() == 2);
    CHECK(mean[0] == 2.0);
    CHECK(mean[1] == 15.0);
}

TEST_CASE("norms and distances", "[matrix]") {
    Vector v = {3.0, 4.0};
    CHECK(l2_norm(v) == 5.0);
    Vector a = {1.0, 1.0};
    Vector b = {4.0, 5.0};
    CHECK(euclidean_distance(a, b) == 5.0);
    CHECK(euclidean_distance(a, a) == 0.0);
}

TEST_CASE("cosine similarity of identical vectors is 1", "[matrix]") {
    Rng rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        Vector v(6);
        for (double &x : v) {
            x = rng.gaussian();
        }
        CHECK_THAT(cosine_similarity(v, v),
                   Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("cosine similarity of orthogonal vectors is 0", "[matrix]") {
    Vector a = {1.0, 0.0};
    Vector b = {0.0, 1.0};
    CHECK(cosine_similarity(a, b) == 0.0);
}

TEST_CASE("cosine similarity of antiparallel vectors is -1", "[matrix]") {
    Vector a = {1.0, 2.0};
    Vector b = {-1.0, -2.0};
    CHECK_THAT(cosine_similarity(a, b),
               Catch::Matchers::WithinAbs(-1.0, 1e-12));
}

TEST_CASE("cosine similarity rejects zero-norm input", "[matrix]") {
    Vector zero = {0.0, 0.0};
    Vector v = {1.0, 2.0};
    CHECK_THROWS_AS(cosine_similarity(zero, v), numerical_error);
    CHECK_THROWS_AS(cosine_similarity(v, zero), numerical_error);
}

TEST_CASE("all_finite detects NaN and infinity", "[matrix]") {
    Matrix m(2, 2, 1.0);
    CHECK(m.all_finite());
    m(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(m.all_finite());
    m(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_FALSE(m.all_finite());
}
