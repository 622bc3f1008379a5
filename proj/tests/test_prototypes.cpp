#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ams/prototypes.hpp"
#include "test_helpers.hpp"

using namespace ams;

namespace {

/// Encoder stub: z = W x with no activation, code dimension = W rows.
AutoencoderModel encoder_stub(Matrix w) {
    AutoencoderModel model;
    model.layer_dims = {w.cols(), w.rows(), w.cols()};
    model.weights.push_back(w);
    model.weights.emplace_back(w.cols(), w.rows());
    model.biases.emplace_back(w.rows(), 0.0);
    model.biases.emplace_back(w.cols(), 0.0);
    model.hidden_activation = Activation::Identity;
    return model;
}

PrototypeTable random_table(Rng &rng, std::size_t m, std::size_t n,
                            std::size_t k) {
    PrototypeTable table;
    for (std::size_t i = 0; i < m; ++i) {
        table.class_ids.push_back(static_cast<ClassId>(i));
    }
    table.predefined = test::random_matrix(rng, m, n);
    table.expanded = test::random_matrix(rng, m, k);
    return table;
}

double combination_residual(const PrototypeTable &seen,
                            std::span<const double> query,
                            std::span<const std::size_t> neighbors,
                            std::span<const double> theta) {
    Vector fit(query.size(), 0.0);
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        const auto row = seen.predefined.row(neighbors[i]);
        for (std::size_t c = 0; c < fit.size(); ++c) {
            fit[c] += theta[i] * row[c];
        }
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < fit.size(); ++c) {
        const double d = query[c] - fit[c];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace

TEST_CASE("prototype table combines rows by concatenation", "[prototypes]") {
    Rng rng(91);
    const PrototypeTable table = random_table(rng, 3, 2, 2);
    CHECK_NOTHROW(table.validate());
    const Matrix all = table.combined();
    REQUIRE(all.rows() == 3);
    REQUIRE(all.cols() == 4);
    for (std::size_t j = 0; j < 3; ++j) {
        const Vector row = table.combined_row(j);
        REQUIRE(row.size() == 4);
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(row[c] == table.predefined(j, c));
            CHECK(row[2 + c] == table.expanded(j, c));
            CHECK(all(j, c) == row[c]);
            CHECK(all(j, 2 + c) == row[2 + c]);
        }
    }
    CHECK(table.index_of(1) == 1);
    CHECK_THROWS_AS(table.index_of(42), ingestion_error);
}

TEST_CASE("singleton classes expand to their own code", "[prototypes]") {
    Rng rng(92);
    const Dataset data = test::make_dataset(rng, {0, 1}, {1, 1}, 3, 2);
    const AutoencoderModel model = encoder_stub(test::random_matrix(rng, 2, 3));

    const PrototypeTable table = expand_seen_prototypes(model, data);
    REQUIRE(table.class_ids == data.class_ids);
    CHECK(test::bit_equal(table.predefined, data.prototypes));
    for (std::size_t j = 0; j < 2; ++j) {
        const Vector z = encode(model, data.features.row(j));
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(table.expanded(j, c) == z[c]);
        }
    }
}

TEST_CASE("two-example class expands to the code mean", "[prototypes]") {
    Dataset data;
    data.class_ids = {0, 1};
    data.features = Matrix(3, 2);
    data.features(0, 0) = 1.0; // class 0: codes [1,0] and [3,2]
    data.features(0, 1) = 0.0;
    data.features(1, 0) = 3.0;
    data.features(1, 1) = 2.0;
    data.features(2, 0) = -1.0;
    data.features(2, 1) = 4.0;
    data.labels = {0, 0, 1};
    data.prototypes = Matrix(2, 2, 0.25);

    const AutoencoderModel model = encoder_stub(Matrix::identity(2));
    const PrototypeTable table = expand_seen_prototypes(model, data);
    CHECK(table.expanded(0, 0) == 2.0);
    CHECK(table.expanded(0, 1) == 1.0);
    CHECK(table.expanded(1, 0) == -1.0);
    CHECK(table.expanded(1, 1) == 4.0);
}

TEST_CASE("expansion matches an accumulate-and-divide oracle",
          "[prototypes]") {
    Rng rng(93);
    const Dataset data =
        test::make_dataset(rng, {2, 5, 6}, {4, 2, 5}, 5, 3);
    const AutoencoderModel model = encoder_stub(test::random_matrix(rng, 2, 5));
    const PrototypeTable table = expand_seen_prototypes(model, data);

    for (std::size_t j = 0; j < 3; ++j) {
        const auto idx = examples_of_class(data, data.class_ids[j]);
        Vector mean(2, 0.0);
        for (std::size_t i : idx) {
            const Vector z = encode(model, data.features.row(i));
            for (std::size_t c = 0; c < 2; ++c) {
                mean[c] += z[c];
            }
        }
        for (std::size_t c = 0; c < 2; ++c) {
            mean[c] /= static_cast<double>(idx.size());
            CHECK_THAT(table.expanded(j, c),
                       Catch::Matchers::WithinAbs(mean[c], 1e-12));
        }
    }
}

TEST_CASE("expansion fails on a class without examples", "[prototypes]") {
    Rng rng(94);
    Dataset data = test::make_dataset(rng, {0, 1, 9}, {2, 2, 2}, 4, 2);
    data.labels = {0, 0, 1, 1, 1, 1}; // class 9 starved
    const AutoencoderModel model = encoder_stub(test::random_matrix(rng, 2, 4));
    CHECK_THROWS_MATCHES(expand_seen_prototypes(model, data), ingestion_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("9")));
}

TEST_CASE("a query equal to a prototype is its own first neighbor",
          "[prototypes]") {
    Rng rng(95);
    const PrototypeTable table = random_table(rng, 6, 3, 2);
    const Vector query(table.predefined.row(4).begin(),
                       table.predefined.row(4).end());
    const auto neighbors = find_neighbors(table, query, 3);
    REQUIRE(neighbors.size() == 3);
    CHECK(neighbors[0] == 4);
}

TEST_CASE("g equal to the class count returns every class", "[prototypes]") {
    Rng rng(96);
    const PrototypeTable table = random_table(rng, 5, 3, 2);
    Vector query(3, 0.1);
    auto neighbors = find_neighbors(table, query, 5);
    std::sort(neighbors.begin(), neighbors.end());
    CHECK(neighbors == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("neighbor search matches an exhaustive sort oracle",
          "[prototypes]") {
    Rng rng(97);
    const PrototypeTable table = random_table(rng, 12, 4, 2);
    for (int trial = 0; trial < 10; ++trial) {
        Vector query(4);
        for (double &v : query) {
            v = rng.gaussian();
        }
        const auto neighbors = find_neighbors(table, query, 3);

        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t j = 0; j < 12; ++j) {
            ranked.emplace_back(
                euclidean_distance(table.predefined.row(j), query), j);
        }
        std::sort(ranked.begin(), ranked.end());
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(neighbors[i] == ranked[i].second);
        }
    }
}

TEST_CASE("equidistant neighbors rank by ascending class id", "[prototypes]") {
    PrototypeTable table;
    table.class_ids = {5, 9};
    table.predefined = Matrix(2, 2);
    table.predefined(0, 0) = 1.0; // distance 1 from the origin
    table.predefined(1, 0) = -1.0;
    table.expanded = Matrix(2, 0);
    const Vector query = {0.0, 0.0};
    const auto neighbors = find_neighbors(table, query, 2);
    CHECK(table.class_ids[neighbors[0]] == 5);
    CHECK(table.class_ids[neighbors[1]] == 9);
}

TEST_CASE("g outside the valid range is rejected", "[prototypes]") {
    Rng rng(98);
    const PrototypeTable table = random_table(rng, 4, 3, 2);
    Vector query(3, 0.0);
    CHECK_THROWS_AS(find_neighbors(table, query, 0), parameter_error);
    CHECK_THROWS_AS(find_neighbors(table, query, 5), parameter_error);
    Vector bad(2, 0.0);
    CHECK_THROWS_AS(find_neighbors(table, bad, 2), dimension_error);
}

TEST_CASE("exact membership recovers an indicator coefficient",
          "[prototypes]") {
    Rng rng(99);
    const PrototypeTable table = random_table(rng, 5, 4, 2);
    const Vector query(table.predefined.row(2).begin(),
                       table.predefined.row(2).end());
    const std::vector<std::size_t> neighbors = {2, 0, 4};
    const NeighborCombination combo =
        solve_combination(table, query, neighbors, 100);
    CHECK(combo.unseen_id == 100);
    CHECK_THAT(combo.coefficients[0], Catch::Matchers::WithinAbs(1.0, 1e-6));
    CHECK_THAT(combo.coefficients[1], Catch::Matchers::WithinAbs(0.0, 1e-6));
    CHECK_THAT(combo.coefficients[2], Catch::Matchers::WithinAbs(0.0, 1e-6));
    CHECK(combo.residual <= 1e-10);
}

TEST_CASE("a midpoint splits its weight evenly", "[prototypes]") {
    PrototypeTable table;
    table.class_ids = {0, 1};
    table.predefined = Matrix(2, 2);
    table.predefined(0, 0) = 2.0; // independent: [2,0] and [0,4]
    table.predefined(1, 1) = 4.0;
    table.expanded = Matrix(2, 1);
    const Vector query = {1.0, 2.0};
    const NeighborCombination combo =
        solve_combination(table, query, std::vector<std::size_t>{0, 1}, 7);
    CHECK_THAT(combo.coefficients[0], Catch::Matchers::WithinAbs(0.5, 1e-10));
    CHECK_THAT(combo.coefficients[1], Catch::Matchers::WithinAbs(0.5, 1e-10));
    CHECK(combo.residual <= 1e-10);
}

TEST_CASE("combination residual beats a coarse grid oracle", "[prototypes]") {
    Rng rng(100);
    const PrototypeTable table = random_table(rng, 8, 4, 2);
    for (int trial = 0; trial < 5; ++trial) {
        Vector query(4);
        for (double &v : query) {
            v = rng.gaussian();
        }
        const auto neighbors = find_neighbors(table, query, 3);
        const NeighborCombination combo =
            solve_combination(table, query, neighbors, 50 + trial);
        CHECK_THAT(combo.residual,
                   Catch::Matchers::WithinAbs(
                       combination_residual(table, query, neighbors,
                                            combo.coefficients),
                       1e-10));

        Vector probe(3);
        for (int i = 0; i <= 20; ++i) {
            for (int j = 0; j <= 20; ++j) {
                for (int k = 0; k <= 20; ++k) {
                    probe[0] = -2.0 + 0.2 * i;
                    probe[1] = -2.0 + 0.2 * j;
                    probe[2] = -2.0 + 0.2 * k;
                    REQUIRE(combo.residual <=
                            combination_residual(table, query, neighbors,
                                                 probe) + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("perturbing theta never improves the residual", "[prototypes]") {
    Rng rng(101);
    const PrototypeTable table = random_table(rng, 8, 5, 2);
    Vector query(5);
    for (double &v : query) {
        v = rng.gaussian();
    }
    const auto neighbors = find_neighbors(table, query, 4);
    const NeighborCombination combo =
        solve_combination(table, query, neighbors, 60);
    for (std::size_t i = 0; i < combo.coefficients.size(); ++i) {
        for (double delta : {-1e-3, 1e-3}) {
            Vector probe = combo.coefficients;
            probe[i] += delta;
            const double perturbed =
                combination_residual(table, query, neighbors, probe);
            CHECK(perturbed >= combo.residual - 1e-9);
        }
    }
}

TEST_CASE("synthesis transfers an indicator onto the expanded block",
          "[prototypes]") {
    Rng rng(102);
    const PrototypeTable seen = random_table(rng, 6, 4, 3);
    // Unseen prototypes: one coincides with seen class 3.
    Matrix unseen_predefined(2, 4);
    for (std::size_t c = 0; c < 4; ++c) {
        unseen_predefined(0, c) = seen.predefined(3, c);
        unseen_predefined(1, c) = rng.gaussian();
    }
    const std::vector<ClassId> unseen_ids = {10, 11};

    const auto [table, combos] =
        synthesize_unseen_prototypes(seen, unseen_predefined, unseen_ids, 3);
    REQUIRE(table.class_ids == unseen_ids);
    REQUIRE(combos.size() == 2);
    CHECK(test::bit_equal(table.predefined, unseen_predefined));
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK_THAT(table.expanded(0, c),
                   Catch::Matchers::WithinAbs(seen.expanded(3, c), 1e-8));
    }
}

TEST_CASE("zero expanded rows synthesize to zero", "[prototypes]") {
    Rng rng(103);
    PrototypeTable seen = random_table(rng, 5, 3, 2);
    seen.expanded = Matrix(5, 2, 0.0);
    const Matrix unseen_predefined = test::random_matrix(rng, 2, 3);
    const auto [table, combos] = synthesize_unseen_prototypes(
        seen, unseen_predefined, std::vector<ClassId>{20, 21}, 3);
    for (std::size_t i = 0; i < table.expanded.size(); ++i) {
        CHECK(table.expanded.data()[i] == 0.0);
    }
}

TEST_CASE("synthesis matches the explicit linear combination",
          "[prototypes]") {
    Rng rng(104);
    const PrototypeTable seen = random_table(rng, 7, 4, 3);
    const Matrix unseen_predefined = test::random_matrix(rng, 3, 4);
    const std::vector<ClassId> unseen_ids = {30, 31, 32};
    const auto [table, combos] =
        synthesize_unseen_prototypes(seen, unseen_predefined, unseen_ids, 4);

    REQUIRE(combos.size() == 3);
    for (std::size_t u = 0; u < 3; ++u) {
        const NeighborCombination &combo = combos[u];
        CHECK(combo.unseen_id == unseen_ids[u]);
        Vector expect(3, 0.0);
        for (std::size_t i = 0; i < combo.neighbor_indices.size(); ++i) {
            const auto row = seen.expanded.row(combo.neighbor_indices[i]);
            for (std::size_t c = 0; c < 3; ++c) {
                expect[c] += combo.coefficients[i] * row[c];
            }
        }
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK_THAT(table.expanded(u, c),
                       Catch::Matchers::WithinAbs(expect[c], 1e-12));
        }
    }
}

TEST_CASE("synthesis is linear in the seen expanded block", "[prototypes]") {
    Rng rng(105);
    PrototypeTable seen = random_table(rng, 6, 4, 2);
    const Matrix unseen_predefined = test::random_matrix(rng, 2, 4);
    const std::vector<ClassId> ids = {40, 41};

    const auto [base, base_combos] =
        synthesize_unseen_prototypes(seen, unseen_predefined, ids, 3);
    for (std::size_t i = 0; i < seen.expanded.size(); ++i) {
        seen.expanded.data()[i] *= 2.5;
    }
    const auto [scaled, scaled_combos] =
        synthesize_unseen_prototypes(seen, unseen_predefined, ids, 3);

    for (std::size_t u = 0; u < 2; ++u) {
        CHECK(test::bit_equal(base_combos[u].coefficients,
                              scaled_combos[u].coefficients));
    }
    for (std::size_t i = 0; i < base.expanded.size(); ++i) {
        CHECK_THAT(scaled.expanded.data()[i],
                   Catch::Matchers::WithinRel(2.5 * base.expanded.data()[i],
                                              1e-12));
    }
}

TEST_CASE("g defaults to five or the class count", "[prototypes]") {
    Rng rng(106);
    const PrototypeTable seen = random_table(rng, 3, 3, 2);
    const Matrix unseen_predefined = test::random_matrix(rng, 2, 3);
    const auto [table, combos] = synthesize_unseen_prototypes(
        seen, unseen_predefined, std::vector<ClassId>{50, 51});
    CHECK(combos[0].coefficients.size() == 3); // min(5, 3)

    const PrototypeTable wide = random_table(rng, 9, 3, 2);
    const auto [t2, c2] = synthesize_unseen_prototypes(
        wide, unseen_predefined, std::vector<ClassId>{50, 51});
    CHECK(c2[0].coefficients.size() == 5);
}

TEST_CASE("synthesis rejects malformed label spaces", "[prototypes]") {
    Rng rng(107);
    const PrototypeTable seen = random_table(rng, 4, 3, 2);
    const Matrix unseen_predefined = test::random_matrix(rng, 2, 3);
    // Overlap with a seen id.
    CHECK_THROWS_AS(synthesize_unseen_prototypes(
                        seen, unseen_predefined, std::vector<ClassId>{2, 50}),
                    ingestion_error);
    // Duplicate unseen ids.
    CHECK_THROWS_AS(synthesize_unseen_prototypes(
                        seen, unseen_predefined, std::vector<ClassId>{50, 50}),
                    ingestion_error);
    // Empty unseen set.
    CHECK_THROWS_AS(synthesize_unseen_prototypes(seen, Matrix(0, 3),
                                                 std::vector<ClassId>{}),
                    parameter_error);
}

TEST_CASE("unseen table rows come out sorted by class id", "[prototypes]") {
    Rng rng(108);
    const PrototypeTable seen = random_table(rng, 4, 3, 2);
    Matrix unseen_predefined = test::random_matrix(rng, 2, 3);
    const Vector first(unseen_predefined.row(0).begin(),
                       unseen_predefined.row(0).end());
    const auto [table, combos] = synthesize_unseen_prototypes(
        seen, unseen_predefined, std::vector<ClassId>{60, 55}, 2);
    REQUIRE(table.class_ids == std::vector<ClassId>{55, 60});
    // Row for id 60 (given first) lands second after sorting.
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(table.predefined(1, c) == first[c]);
    }
}
