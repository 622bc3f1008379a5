#ifndef AMS_PIPELINE_HPP
#define AMS_PIPELINE_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ams/autoencoder.hpp"
#include "ams/dataset.hpp"
#include "ams/errors.hpp"
#include "ams/io.hpp"
#include "ams/manifold.hpp"
#include "ams/matrix.hpp"
#include "ams/projection.hpp"
#include "ams/prototypes.hpp"
#include "ams/rng.hpp"
#include "ams/synthetic.hpp"

namespace ams {

/** Which parts of the semantic space recognition runs in: pre-defined only
 * (P), expanded only (E), or the full combined space (P+E). */
enum class AblationMode : std::uint8_t { P, E, PE };

inline AblationMode ablation_from_string(const std::string &name) {
    if (name == "P" || name == "p") {
        return AblationMode::P;
    }
    if (name == "E" || name == "e") {
        return AblationMode::E;
    }
    if (name == "P+E" || name == "p+e" || name == "PE" || name == "pe") {
        return AblationMode::PE;
    }
    throw parameter_error("unknown ablation mode \"" + name +
                          "\" (expected P, E, or P+E)");
}

inline const char *to_string(AblationMode mode) {
    switch (mode) {
    case AblationMode::P:
        return "P";
    case AblationMode::E:
        return "E";
    default:
        return "P+E";
    }
}

/** Expanded-dimension presets matching the published per-dataset choices. */
inline std::size_t expanded_dim_preset(const std::string &dataset) {
    std::string lower;
    for (const char c : dataset) {
        lower.push_back(static_cast<char>(std::tolower(
            static_cast<unsigned char>(c))));
    }
    if (lower == "awa") {
        return 65;
    }
    if (lower == "cub") {
        return 138;
    }
    if (lower == "apa&y" || lower == "apay" || lower == "apascal-yahoo") {
        return 26;
    }
    if (lower == "sun") {
        return 58;
    }
    if (lower == "imagenet" || lower == "imagenet-2") {
        return 12;
    }
    throw parameter_error("unknown dataset preset \"" + dataset +
                          "\" (expected AWA, CUB, aPa&Y, SUN, or ImageNet)");
}

/** Every knob of the end-to-end pipeline. */
struct PipelineConfig {
    std::size_t k = 8; // expanded semantic dimension
    std::size_t g = 0; // synthesis neighbors; 0 means min(5, seen classes)
    double alpha = 9.0;
    double beta = 77.0;
    double learning_rate = 1e-3;
    std::size_t epochs = 500;
    std::size_t batch_size = 64;
    double ridge_lambda = 1.0;
    Metric metric = Metric::Cosine;
    std::uint64_t seed = 0;
    AblationMode ablation_mode = AblationMode::PE;

    TrainingConfig training() const {
        TrainingConfig t;
        t.alpha = alpha;
        t.beta = beta;
        t.learning_rate = learning_rate;
        t.batch_size = batch_size;
        t.epochs = epochs;
        t.seed = seed;
        return t;
    }

    void validate() const {
        if (k < 1) {
            throw parameter_error("pipeline: k must be at least 1");
        }
        if (ridge_lambda < 0.0) {
            throw parameter_error("pipeline: ridge_lambda must be >= 0");
        }
        training().validate();
    }
};

namespace detail {

inline double config_number(const std::string &key, const std::string &text) {
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw parameter_error("config key " + key + ": \"" + text +
                              "\" is not a number");
    }
    return value;
}

inline std::uint64_t config_integer(const std::string &key,
                                    const std::string &text) {
    std::uint64_t value = 0;
    const auto [ptr, ec] =
        std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw parameter_error("config key " + key + ": \"" + text +
                              "\" is not a non-negative integer");
    }
    return value;
}

} // namespace detail

/** Applies flat key=value settings onto a config. Unknown keys are
 * parameter errors so typos cannot silently fall back to defaults. */
inline PipelineConfig
apply_config(PipelineConfig config,
             const std::map<std::string, std::string> &settings) {
    for (const auto &[key, value] : settings) {
        if (key == "k") {
            config.k =
                static_cast<std::size_t>(detail::config_integer(key, value));
        } else if (key == "k_preset") {
            config.k = expanded_dim_preset(value);
        } else if (key == "g") {
            config.g =
                static_cast<std::size_t>(detail::config_integer(key, value));
        } else if (key == "alpha") {
            config.alpha = detail::config_number(key, value);
        } else if (key == "beta") {
            config.beta = detail::config_number(key, value);
        } else if (key == "learning_rate") {
            config.learning_rate = detail::config_number(key, value);
        } else if (key == "epochs") {
            config.epochs =
                static_cast<std::size_t>(detail::config_integer(key, value));
        } else if (key == "batch_size") {
            config.batch_size =
                static_cast<std::size_t>(detail::config_integer(key, value));
        } else if (key == "ridge_lambda") {
            config.ridge_lambda = detail::config_number(key, value);
        } else if (key == "metric") {
            config.metric = metric_from_string(value);
        } else if (key == "seed") {
            config.seed = detail::config_integer(key, value);
        } else if (key == "ablation_mode") {
            config.ablation_mode = ablation_from_string(value);
        } else {
            throw parameter_error("unknown config key \"" + key + "\"");
        }
    }
    return config;
}

inline std::map<std::string, std::string>
config_to_settings(const PipelineConfig &config) {
    std::map<std::string, std::string> settings;
    settings["k"] = std::to_string(config.k);
    settings["g"] = std::to_string(config.g);
    settings["alpha"] = detail::format_double(config.alpha);
    settings["beta"] = detail::format_double(config.beta);
    settings["learning_rate"] = detail::format_double(config.learning_rate);
    settings["epochs"] = std::to_string(config.epochs);
    settings["batch_size"] = std::to_string(config.batch_size);
    settings["ridge_lambda"] = detail::format_double(config.ridge_lambda);
    settings["metric"] = to_string(config.metric);
    settings["seed"] = std::to_string(config.seed);
    settings["ablation_mode"] = to_string(config.ablation_mode);
    return settings;
}

/** Runs fn, rethrowing any library error with the stage name prefixed so
 * diagnostics always identify the failing stage. */
template <typename F> auto with_stage(const char *name, F &&fn);

/** Everything a pipeline run produces. The stage trace lists executed
 * stages in order; mode P runs only the last two. */
struct PipelineResult {
    EvaluationReport report;
    PrototypeTable seen_table;
    PrototypeTable unseen_table;
    std::vector<NeighborCombination> combinations;
    std::optional<AutoencoderModel> model;
    TrainingReport training;
    LinearProjection projection;
    std::vector<std::string> stages;
};

namespace detail {

template <typename F>
auto run_stage(std::vector<std::string> &trace, const char *name, F &&fn) {
    trace.emplace_back(name);
    const auto tag = [name](const char *what) {
        return "[" + std::string(name) + "] " + what;
    };
    try {
        return fn();
    } catch (const ingestion_error &e) {
        throw ingestion_error(tag(e.what()));
    } catch (const numerical_error &e) {
        throw numerical_error(tag(e.what()));
    } catch (const dimension_error &e) {
        throw dimension_error(tag(e.what()));
    } catch (const parameter_error &e) {
        throw parameter_error(tag(e.what()));
    }
}

/// Per-example projection targets for the requested semantic parts.
inline Matrix projection_targets(const SeenDataset &seen, const Matrix *codes,
                                 AblationMode mode) {
    const std::size_t l = seen.num_examples();
    const std::size_t n = seen.prototype_dim();
    const std::size_t k = codes != nullptr ? codes->cols() : 0;
    const std::size_t width = mode == AblationMode::P   ? n
                              : mode == AblationMode::E ? k
                                                        : n + k;
    Matrix targets(l, width);
    for (std::size_t i = 0; i < l; ++i) {
        auto dst = targets.row(i);
        std::size_t at = 0;
        if (mode != AblationMode::E) {
            const auto proto =
                seen.prototypes.row(seen.class_index(seen.labels[i]));
            for (const double value : proto) {
                dst[at++] = value;
            }
        }
        if (mode != AblationMode::P) {
            const auto z = codes->row(i);
            for (const double value : z) {
                dst[at++] = value;
            }
        }
    }
    return targets;
}

/// Drops the parts recognition must not see in the given mode.
inline PrototypeTable restrict_table(const PrototypeTable &table,
                                     AblationMode mode) {
    if (mode == AblationMode::PE) {
        return table;
    }
    PrototypeTable out;
    out.class_ids = table.class_ids;
    if (mode == AblationMode::P) {
        out.predefined = table.predefined;
        out.expanded = Matrix(table.num_classes(), 0);
    } else {
        out.predefined = Matrix(table.num_classes(), 0);
        out.expanded = table.expanded;
    }
    return out;
}

} // namespace detail

template <typename F> auto with_stage(const char *name, F &&fn) {
    std::vector<std::string> trace;
    return detail::run_stage(trace, name, std::forward<F>(fn));
}

/** Runs the full method end to end and evaluates on the unseen classes.
 *
 * Stage order: class centers, manifold embedding into n+k dimensions,
 * autoencoder training, seen-prototype expansion, unseen-prototype
 * synthesis, projection fit, evaluation. Ablation mode P skips everything
 * ahead of the projection fit (the autoencoder is never built); mode E runs
 * every stage but restricts recognition to the expanded parts. Any stage
 * failure is rethrown with the stage name prefixed; no partial results
 * escape. */
inline PipelineResult run_pipeline(const PipelineConfig &config,
                                   const SeenDataset &seen,
                                   const UnseenDataset &unseen,
                                   std::size_t top_k = 0) {
    config.validate();
    seen.validate();
    unseen.validate();
    require_disjoint_classes(seen, unseen);
    if (seen.feature_dim() != unseen.feature_dim()) {
        throw dimension_error("pipeline: seen feature dimension " +
                              std::to_string(seen.feature_dim()) +
                              " against unseen " +
                              std::to_string(unseen.feature_dim()));
    }
    if (seen.prototype_dim() != unseen.prototype_dim()) {
        throw dimension_error("pipeline: seen prototype dimension " +
                              std::to_string(seen.prototype_dim()) +
                              " against unseen " +
                              std::to_string(unseen.prototype_dim()));
    }

    PipelineResult result;
    auto &trace = result.stages;
    const AblationMode mode = config.ablation_mode;

    std::optional<Matrix> codes; // per-example encoder outputs
    if (mode != AblationMode::P) {
        const ClassCenters centers =
            detail::run_stage(trace, "class-centers",
                              [&] { return compute_class_centers(seen); });
        const EmbeddedManifold manifold = detail::run_stage(
            trace, "manifold-embedding", [&] {
                return extract_manifold(centers,
                                        seen.prototype_dim() + config.k);
            });
        detail::run_stage(trace, "train-autoencoder", [&] {
            auto trained = train(seen, manifold, config.training());
            result.model = std::move(trained.first);
            result.training = std::move(trained.second);
            return 0;
        });
        detail::run_stage(trace, "expand-seen-prototypes", [&] {
            result.seen_table = expand_seen_prototypes(*result.model, seen);
            codes = encode_all(*result.model, seen.features);
            return 0;
        });
        detail::run_stage(trace, "synthesize-unseen-prototypes", [&] {
            auto synth = synthesize_unseen_prototypes(
                result.seen_table, unseen.prototypes, unseen.class_ids,
                config.g);
            result.unseen_table = std::move(synth.first);
            result.combinations = std::move(synth.second);
            return 0;
        });
    } else {
        result.seen_table.class_ids = seen.class_ids;
        result.seen_table.predefined = seen.prototypes;
        result.seen_table.expanded = Matrix(seen.num_classes(), 0);
        result.unseen_table.class_ids = unseen.class_ids;
        result.unseen_table.predefined = unseen.prototypes;
        result.unseen_table.expanded = Matrix(unseen.num_classes(), 0);
    }

    detail::run_stage(trace, "fit-projection", [&] {
        const Matrix targets = detail::projection_targets(
            seen, codes ? &*codes : nullptr, mode);
        result.projection =
            fit_projection(seen.features, targets, config.ridge_lambda);
        return 0;
    });
    detail::run_stage(trace, "evaluate", [&] {
        const PrototypeTable candidates =
            detail::restrict_table(result.unseen_table, mode);
        result.report = evaluate(result.projection, unseen, candidates,
                                 config.metric, top_k);
        return 0;
    });
    return result;
}

/** Hit@1 of each ablation mode under one config, in the order P, E, P+E. */
struct AblationResult {
    std::vector<std::pair<AblationMode, EvaluationReport>> runs;

    double hit1(AblationMode mode) const {
        for (const auto &[m, report] : runs) {
            if (m == mode) {
                return report.hit_at.front();
            }
        }
        throw parameter_error("ablation result lacks the requested mode");
    }
};

inline AblationResult run_ablation(PipelineConfig config,
                                   const SeenDataset &seen,
                                   const UnseenDataset &unseen,
                                   std::size_t top_k = 0) {
    AblationResult result;
    for (const AblationMode mode :
         {AblationMode::P, AblationMode::E, AblationMode::PE}) {
        config.ablation_mode = mode;
        result.runs.emplace_back(
            mode, run_pipeline(config, seen, unseen, top_k).report);
    }
    return result;
}

/** Outcome of a loss-weight grid search. `evaluated` holds one
 * (alpha, beta, hit@1) row per distinct grid point in scan order. */
struct GridSearchResult {
    double alpha = 0.0;
    double beta = 0.0;
    double best_hit1 = 0.0;
    std::vector<std::array<double, 3>> evaluated;
};

/** Picks the (alpha, beta) pair maximizing Hit@1 on a class-level holdout.
 *
 * A zero-shot validation split must hold out classes, not examples: 20% of
 * the seen classes (at least 2) act as pseudo-unseen. Ties resolve toward
 * the smaller alpha, then the smaller beta. */
inline GridSearchResult grid_search(const PipelineConfig &base,
                                    std::vector<double> alphas,
                                    std::vector<double> betas,
                                    const SeenDataset &seen,
                                    double holdout_fraction = 0.2) {
    if (alphas.empty() || betas.empty()) {
        throw parameter_error("grid search: empty alpha or beta grid");
    }
    if (!(holdout_fraction > 0.0) || !(holdout_fraction < 1.0)) {
        throw parameter_error("grid search: holdout fraction must be in "
                              "(0, 1)");
    }
    seen.validate();
    const std::size_t m = seen.num_classes();
    const std::size_t held = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(
               holdout_fraction * static_cast<double>(m))));
    if (m < held + 2) {
        throw parameter_error("grid search: " + std::to_string(m) +
                              " seen classes cannot spare " +
                              std::to_string(held) +
                              " validation classes and keep 2 for training");
    }

    std::sort(alphas.begin(), alphas.end());
    alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
    std::sort(betas.begin(), betas.end());
    betas.erase(std::unique(betas.begin(), betas.end()), betas.end());

    // Deterministic class-level split driven by the base seed.
    std::vector<std::size_t> order(m);
    for (std::size_t j = 0; j < m; ++j) {
        order[j] = j;
    }
    Rng rng(base.seed);
    rng.shuffle(order);
    std::vector<std::uint8_t> held_out(m, 0);
    for (std::size_t j = 0; j < held; ++j) {
        held_out[order[j]] = 1;
    }

    const auto subset = [&](bool validation) {
        Dataset part;
        std::vector<std::size_t> class_rows;
        for (std::size_t j = 0; j < m; ++j) {
            if (held_out[j] == (validation ? 1 : 0)) {
                part.class_ids.push_back(seen.class_ids[j]);
                class_rows.push_back(j);
            }
        }
        part.prototypes = Matrix(class_rows.size(), seen.prototype_dim());
        for (std::size_t j = 0; j < class_rows.size(); ++j) {
            const auto src = seen.prototypes.row(class_rows[j]);
            std::copy(src.begin(), src.end(), part.prototypes.row(j).begin());
        }
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < seen.num_examples(); ++i) {
            const bool in_validation =
                held_out[seen.class_index(seen.labels[i])] != 0;
            if (in_validation == validation) {
                rows.push_back(i);
            }
        }
        part.features = Matrix(rows.size(), seen.feature_dim());
        part.labels.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto src = seen.features.row(rows[i]);
            std::copy(src.begin(), src.end(), part.features.row(i).begin());
            part.labels.push_back(seen.labels[rows[i]]);
        }
        part.validate();
        return part;
    };
    const SeenDataset train_part = subset(false);
    const UnseenDataset validation_part = subset(true);

    GridSearchResult result;
    bool first = true;
    for (const double alpha : alphas) {
        for (const double beta : betas) {
            PipelineConfig config = base;
            config.alpha = alpha;
            config.beta = beta;
            config.ablation_mode = AblationMode::PE;
            const double hit1 =
                run_pipeline(config, train_part, validation_part)
                    .report.hit_at.front();
            result.evaluated.push_back({alpha, beta, hit1});
            if (first || hit1 > result.best_hit1) {
                result.alpha = alpha;
                result.beta = beta;
                result.best_hit1 = hit1;
                first = false;
            }
        }
    }
    return result;
}

} // namespace ams

#endif // AMS_PIPELINE_HPP
