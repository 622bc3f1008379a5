#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <string>
#include <vector>

#include "ams/pipeline.hpp"
#include "ams/synthetic.hpp"
#include "test_helpers.hpp"

using namespace ams;

namespace {

/// Small dataset pair every end-to-end test here can afford to train on.
std::pair<SeenDataset, UnseenDataset> tiny_data(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.m_seen = 6;
    spec.v_unseen = 3;
    spec.d = 16;
    spec.n = 8;
    spec.examples_per_class = 8;
    spec.seed = seed;
    return generate_synthetic(spec);
}

PipelineConfig tiny_config(std::uint64_t seed) {
    PipelineConfig config;
    config.k = 4;
    config.epochs = 6;
    config.batch_size = 16;
    config.seed = seed;
    return config;
}

bool has_stage(const std::vector<std::string> &stages,
               const std::string &name) {
    return std::find(stages.begin(), stages.end(), name) != stages.end();
}

} // namespace

TEST_CASE("ablation mode names parse case-insensitively", "[pipeline]") {
    CHECK(ablation_from_string("P") == AblationMode::P);
    CHECK(ablation_from_string("p") == AblationMode::P);
    CHECK(ablation_from_string("E") == AblationMode::E);
    CHECK(ablation_from_string("e") == AblationMode::E);
    CHECK(ablation_from_string("P+E") == AblationMode::PE);
    CHECK(ablation_from_string("p+e") == AblationMode::PE);
    CHECK(ablation_from_string("PE") == AblationMode::PE);
    CHECK(ablation_from_string("pe") == AblationMode::PE);
    CHECK_THROWS_MATCHES(ablation_from_string("Q"), parameter_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring(
                                 "unknown ablation mode")));
}

TEST_CASE("ablation mode round-trips through its name", "[pipeline]") {
    for (const AblationMode mode :
         {AblationMode::P, AblationMode::E, AblationMode::PE}) {
        CHECK(ablation_from_string(to_string(mode)) == mode);
    }
    CHECK(std::string(to_string(AblationMode::PE)) == "P+E");
}

TEST_CASE("expanded dimension presets match the published table",
          "[pipeline]") {
    CHECK(expanded_dim_preset("AWA") == 65);
    CHECK(expanded_dim_preset("awa") == 65);
    CHECK(expanded_dim_preset("CUB") == 138);
    CHECK(expanded_dim_preset("aPa&Y") == 26);
    CHECK(expanded_dim_preset("apay") == 26);
    CHECK(expanded_dim_preset("SUN") == 58);
    CHECK(expanded_dim_preset("ImageNet") == 12);
    CHECK(expanded_dim_preset("imagenet-2") == 12);
    CHECK_THROWS_MATCHES(expanded_dim_preset("mnist"), parameter_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring(
                                 "unknown dataset preset")));
}

TEST_CASE("apply_config sets every recognized key", "[pipeline]") {
    std::map<std::string, std::string> settings{
        {"k", "12"},          {"g", "3"},
        {"alpha", "2.5"},     {"beta", "0.5"},
        {"learning_rate", "0.01"}, {"epochs", "42"},
        {"batch_size", "7"},  {"ridge_lambda", "0.25"},
        {"metric", "euclidean"},   {"seed", "99"},
        {"ablation_mode", "E"}};
    const PipelineConfig config = apply_config(PipelineConfig{}, settings);
    CHECK(config.k == 12);
    CHECK(config.g == 3);
    CHECK(config.alpha == 2.5);
    CHECK(config.beta == 0.5);
    CHECK(config.learning_rate == 0.01);
    CHECK(config.epochs == 42);
    CHECK(config.batch_size == 7);
    CHECK(config.ridge_lambda == 0.25);
    CHECK(config.metric == Metric::Euclidean);
    CHECK(config.seed == 99);
    CHECK(config.ablation_mode == AblationMode::E);
}

TEST_CASE("apply_config resolves k presets and rejects unknown keys",
          "[pipeline]") {
    const PipelineConfig config =
        apply_config(PipelineConfig{}, {{"k_preset", "sun"}});
    CHECK(config.k == 58);
    CHECK_THROWS_MATCHES(
        apply_config(PipelineConfig{}, {{"momentum", "0.9"}}),
        parameter_error,
        Catch::Matchers::MessageMatches(
            Catch::Matchers::ContainsSubstring("unknown config key")));
    CHECK_THROWS_AS(apply_config(PipelineConfig{}, {{"alpha", "fast"}}),
                    parameter_error);
}

TEST_CASE("config settings round-trip through apply_config", "[pipeline]") {
    PipelineConfig config;
    config.k = 9;
    config.g = 4;
    config.alpha = 1.25;
    config.beta = 80.5;
    config.learning_rate = 5e-4;
    config.epochs = 33;
    config.batch_size = 17;
    config.ridge_lambda = 2.0;
    config.metric = Metric::Euclidean;
    config.seed = 1234567;
    config.ablation_mode = AblationMode::E;

    const PipelineConfig back =
        apply_config(PipelineConfig{}, config_to_settings(config));
    CHECK(back.k == config.k);
    CHECK(back.g == config.g);
    CHECK(back.alpha == config.alpha);
    CHECK(back.beta == config.beta);
    CHECK(back.learning_rate == config.learning_rate);
    CHECK(back.epochs == config.epochs);
    CHECK(back.batch_size == config.batch_size);
    CHECK(back.ridge_lambda == config.ridge_lambda);
    CHECK(back.metric == config.metric);
    CHECK(back.seed == config.seed);
    CHECK(back.ablation_mode == config.ablation_mode);
}

TEST_CASE("pipeline configuration validation", "[pipeline]") {
    CHECK_NOTHROW(PipelineConfig{}.validate());
    PipelineConfig zero_k;
    zero_k.k = 0;
    CHECK_THROWS_AS(zero_k.validate(), parameter_error);
    PipelineConfig negative_ridge;
    negative_ridge.ridge_lambda = -1.0;
    CHECK_THROWS_AS(negative_ridge.validate(), parameter_error);
}

TEST_CASE("with_stage tags escaping errors and passes results through",
          "[pipeline]") {
    CHECK(with_stage("noop", [] { return 7; }) == 7);
    CHECK_THROWS_MATCHES(
        with_stage("custom-stage",
                   []() -> int { throw parameter_error("boom"); }),
        parameter_error,
        Catch::Matchers::MessageMatches(
            Catch::Matchers::StartsWith("[custom-stage] boom")));
}

TEST_CASE("predefined-only mode never builds the autoencoder", "[pipeline]") {
    const auto [seen, unseen] = tiny_data(11);
    PipelineConfig config = tiny_config(11);
    config.ablation_mode = AblationMode::P;

    const PipelineResult result = run_pipeline(config, seen, unseen);
    CHECK_FALSE(result.model.has_value());
    CHECK_FALSE(has_stage(result.stages, "train-autoencoder"));
    CHECK_FALSE(has_stage(result.stages, "class-centers"));
    CHECK(result.stages ==
          std::vector<std::string>{"fit-projection", "evaluate"});
    CHECK(result.projection.target_dim() == seen.prototype_dim());
    CHECK(result.seen_table.expanded.cols() == 0);
    CHECK(result.unseen_table.expanded.cols() == 0);
    CHECK(result.training.total_loss.empty());
}

TEST_CASE("full mode runs every stage in order", "[pipeline]") {
    const auto [seen, unseen] = tiny_data(12);
    const PipelineConfig config = tiny_config(12);

    const PipelineResult result = run_pipeline(config, seen, unseen);
    CHECK(result.stages ==
          std::vector<std::string>{
              "class-centers", "manifold-embedding", "train-autoencoder",
              "expand-seen-prototypes", "synthesize-unseen-prototypes",
              "fit-projection", "evaluate"});
    REQUIRE(result.model.has_value());
    CHECK(result.projection.target_dim() ==
          seen.prototype_dim() + config.k);
    CHECK(result.seen_table.expanded.cols() == config.k);
    CHECK(result.unseen_table.expanded.cols() == config.k);
    CHECK(result.combinations.size() == unseen.num_classes());
    CHECK(result.training.total_loss.size() == config.epochs);

    // Hit rates form a cumulative curve over a full candidate sweep.
    REQUIRE_FALSE(result.report.hit_at.empty());
    for (std::size_t i = 0; i < result.report.hit_at.size(); ++i) {
        CHECK(result.report.hit_at[i] >= 0.0);
        CHECK(result.report.hit_at[i] <= 1.0);
        if (i > 0) {
            CHECK(result.report.hit_at[i] >= result.report.hit_at[i - 1]);
        }
    }
    CHECK(result.report.hit_at.size() == unseen.num_classes());
    CHECK(result.report.hit_at.back() == 1.0);
    CHECK(result.report.confusion.rows() == unseen.num_classes());
    CHECK(result.report.confusion.cols() == unseen.num_classes());
    CHECK(result.report.num_examples == unseen.num_examples());
}

TEST_CASE("expanded-only mode projects into the expanded block alone",
          "[pipeline]") {
    const auto [seen, unseen] = tiny_data(13);
    PipelineConfig config = tiny_config(13);
    config.ablation_mode = AblationMode::E;

    const PipelineResult result = run_pipeline(config, seen, unseen);
    CHECK(has_stage(result.stages, "train-autoencoder"));
    CHECK(result.projection.target_dim() == config.k);
    CHECK(result.report.confusion.rows() == unseen.num_classes());
}

TEST_CASE("fixed seeds make the pipeline bit-reproducible", "[pipeline]") {
    const auto [seen, unseen] = tiny_data(14);
    const PipelineConfig config = tiny_config(14);

    const PipelineResult a = run_pipeline(config, seen, unseen);
    const PipelineResult b = run_pipeline(config, seen, unseen);
    REQUIRE(a.report.hit_at.size() == b.report.hit_at.size());
    for (std::size_t i = 0; i < a.report.hit_at.size(); ++i) {
        CHECK(a.report.hit_at[i] == b.report.hit_at[i]);
    }
    CHECK(test::bit_equal(a.report.confusion, b.report.confusion));
    CHECK(test::bit_equal(a.projection.w, b.projection.w));
    CHECK(test::bit_equal(a.unseen_table.expanded, b.unseen_table.expanded));
}

TEST_CASE("explicit top_k overrides the report depth", "[pipeline]") {
    const auto [seen, unseen] = tiny_data(15);
    const PipelineConfig config = tiny_config(15);
    const PipelineResult result = run_pipeline(config, seen, unseen, 2);
    CHECK(result.report.hit_at.size() == 2);
}

TEST_CASE("stage names prefix errors raised inside the pipeline",
          "[pipeline]") {
    SECTION("projection failure in predefined-only mode") {
        const auto [seen_base, unseen] = tiny_data(16);
        SeenDataset seen = seen_base;
        // A zero feature column makes the Gram matrix singular, which the
        // unregularized solve must report.
        for (std::size_t i = 0; i < seen.num_examples(); ++i) {
            seen.features(i, 0) = 0.0;
        }
        PipelineConfig config = tiny_config(16);
        config.ablation_mode = AblationMode::P;
        config.ridge_lambda = 0.0;
        CHECK_THROWS_MATCHES(
            run_pipeline(config, seen, unseen), numerical_error,
            Catch::Matchers::MessageMatches(
                Catch::Matchers::StartsWith("[fit-projection]")));
    }

    SECTION("synthesis failure when g exceeds the seen class count") {
        const auto [seen, unseen] = tiny_data(17);
        PipelineConfig config = tiny_config(17);
        config.g = seen.num_classes() + 1;
        CHECK_THROWS_MATCHES(
            run_pipeline(config, seen, unseen), parameter_error,
            Catch::Matchers::MessageMatches(Catch::Matchers::StartsWith(
                "[synthesize-unseen-prototypes]")));
    }

    SECTION("center failure when a seen class has no examples") {
        Rng rng(18);
        const Dataset seen =
            test::make_dataset(rng, {0, 1, 2, 4}, {4, 4, 4, 0}, 6, 3);
        const Dataset unseen =
            test::make_dataset(rng, {7, 9}, {3, 3}, 6, 3);
        const PipelineConfig config = tiny_config(18);
        CHECK_THROWS_MATCHES(
            run_pipeline(config, seen, unseen), ingestion_error,
            Catch::Matchers::MessageMatches(
                Catch::Matchers::StartsWith("[class-centers]") &&
                Catch::Matchers::ContainsSubstring("has no examples")));
    }
}

TEST_CASE("ablation sweep covers all three modes in order", "[pipeline]") {
    const auto [seen, unseen] = tiny_data(19);
    const PipelineConfig config = tiny_config(19);

    const AblationResult result = run_ablation(config, seen, unseen);
    REQUIRE(result.runs.size() == 3);
    CHECK(result.runs[0].first == AblationMode::P);
    CHECK(result.runs[1].first == AblationMode::E);
    CHECK(result.runs[2].first == AblationMode::PE);
    for (const auto &[mode, report] : result.runs) {
        CHECK(result.hit1(mode) == report.hit_at.front());
    }

    // Each sweep entry matches a standalone run of the same mode.
    PipelineConfig solo = config;
    solo.ablation_mode = AblationMode::E;
    const PipelineResult direct = run_pipeline(solo, seen, unseen);
    CHECK(result.hit1(AblationMode::E) == direct.report.hit_at.front());

    const AblationResult empty;
    CHECK_THROWS_AS(empty.hit1(AblationMode::P), parameter_error);
}

TEST_CASE("grid search scans the full grid and keeps the best point",
          "[pipeline]") {
    SyntheticSpec spec;
    spec.m_seen = 6;
    spec.v_unseen = 2;
    spec.d = 16;
    spec.n = 8;
    spec.examples_per_class = 8;
    spec.seed = 20;
    const auto [seen, unseen] = generate_synthetic(spec);
    PipelineConfig base = tiny_config(20);
    base.epochs = 4;

    const GridSearchResult result =
        grid_search(base, {9.0, 1.0}, {77.0, 5.0}, seen);
    REQUIRE(result.evaluated.size() == 4);
    // Scan order: ascending alpha outer, ascending beta inner.
    CHECK(result.evaluated[0][0] == 1.0);
    CHECK(result.evaluated[0][1] == 5.0);
    CHECK(result.evaluated[1][0] == 1.0);
    CHECK(result.evaluated[1][1] == 77.0);
    CHECK(result.evaluated[2][0] == 9.0);
    CHECK(result.evaluated[2][1] == 5.0);
    CHECK(result.evaluated[3][0] == 9.0);
    CHECK(result.evaluated[3][1] == 77.0);

    // The winner is the first scan entry attaining the maximum, which is
    // exactly the smallest-alpha-then-smallest-beta tie rule.
    double best = result.evaluated[0][2];
    std::size_t best_at = 0;
    for (std::size_t i = 1; i < result.evaluated.size(); ++i) {
        if (result.evaluated[i][2] > best) {
            best = result.evaluated[i][2];
            best_at = i;
        }
    }
    CHECK(result.best_hit1 == best);
    CHECK(result.alpha == result.evaluated[best_at][0]);
    CHECK(result.beta == result.evaluated[best_at][1]);
}

TEST_CASE("grid search deduplicates repeated grid values", "[pipeline]") {
    const auto [seen, unseen] = tiny_data(21);
    PipelineConfig base = tiny_config(21);
    base.epochs = 3;

    const GridSearchResult single = grid_search(base, {9.0}, {77.0}, seen);
    REQUIRE(single.evaluated.size() == 1);
    CHECK(single.alpha == 9.0);
    CHECK(single.beta == 77.0);
    CHECK(single.best_hit1 == single.evaluated[0][2]);

    const GridSearchResult dup =
        grid_search(base, {9.0, 9.0}, {77.0, 77.0, 77.0}, seen);
    REQUIRE(dup.evaluated.size() == 1);
    CHECK(dup.alpha == single.alpha);
    CHECK(dup.beta == single.beta);
    CHECK(dup.best_hit1 == single.best_hit1);
}

TEST_CASE("grid search is deterministic for a fixed base seed", "[pipeline]") {
    const auto [seen, unseen] = tiny_data(22);
    PipelineConfig base = tiny_config(22);
    base.epochs = 3;

    const GridSearchResult a = grid_search(base, {1.0, 9.0}, {5.0}, seen);
    const GridSearchResult b = grid_search(base, {1.0, 9.0}, {5.0}, seen);
    REQUIRE(a.evaluated.size() == b.evaluated.size());
    for (std::size_t i = 0; i < a.evaluated.size(); ++i) {
        CHECK(a.evaluated[i] == b.evaluated[i]);
    }
    CHECK(a.alpha == b.alpha);
    CHECK(a.beta == b.beta);
    CHECK(a.best_hit1 == b.best_hit1);
}

TEST_CASE("grid search rejects unusable grids and splits", "[pipeline]") {
    const auto [seen, unseen] = tiny_data(23);
    const PipelineConfig base = tiny_config(23);

    CHECK_THROWS_MATCHES(grid_search(base, {}, {77.0}, seen), parameter_error,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("empty")));
    CHECK_THROWS_AS(grid_search(base, {9.0}, {}, seen), parameter_error);
    CHECK_THROWS_AS(grid_search(base, {9.0}, {77.0}, seen, 0.0),
                    parameter_error);
    CHECK_THROWS_AS(grid_search(base, {9.0}, {77.0}, seen, 1.0),
                    parameter_error);
    CHECK_THROWS_AS(grid_search(base, {9.0}, {77.0}, seen, -0.5),
                    parameter_error);

    // Three classes cannot give up two for validation and keep two to train.
    Rng rng(23);
    const Dataset small =
        test::make_dataset(rng, {0, 1, 2}, {4, 4, 4}, 6, 3);
    CHECK_THROWS_MATCHES(
        grid_search(base, {9.0}, {77.0}, small), parameter_error,
        Catch::Matchers::MessageMatches(
            Catch::Matchers::ContainsSubstring("cannot spare")));
}

TEST_CASE("pipeline rejects mismatched seen and unseen dimensions",
          "[pipeline]") {
    Rng rng(24);
    const Dataset seen = test::make_dataset(rng, {0, 1}, {4, 4}, 6, 3);
    const Dataset narrow_features =
        test::make_dataset(rng, {5, 6}, {3, 3}, 5, 3);
    const Dataset narrow_prototypes =
        test::make_dataset(rng, {5, 6}, {3, 3}, 6, 2);
    PipelineConfig config = tiny_config(24);
    config.ablation_mode = AblationMode::P;
    CHECK_THROWS_AS(run_pipeline(config, seen, narrow_features),
                    dimension_error);
    CHECK_THROWS_AS(run_pipeline(config, seen, narrow_prototypes),
                    dimension_error);
}
