// Command-line pipeline around the library: synthetic data generation,
// training, prototype expansion and synthesis, recognition, evaluation,
// ablation, and loss-weight grid search. Exit codes: 0 success, 2 ingestion
// error, 3 numerical failure, 4 parameter error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ams/ams.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> config_path;
    std::optional<std::string> metric;
    std::optional<std::string> ablation;
    std::string out_dir = ".";
};

struct ConfigFlags {
    std::optional<std::size_t> k;
    std::optional<std::string> k_preset;
    std::optional<std::size_t> g;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<double> learning_rate;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> ridge_lambda;
    std::optional<std::size_t> top_k;
};

struct DataFlags {
    std::string features;
    std::string labels;
    std::string prototypes;
};

void add_config_flags(CLI::App *cmd, ConfigFlags &f) {
    cmd->add_option("--k", f.k, "expanded semantic dimension");
    cmd->add_option("--k-preset", f.k_preset,
                    "named preset for --k (AWA, CUB, aPa&Y, SUN, ImageNet)");
    cmd->add_option("--g", f.g,
                    "neighbors used to synthesize unseen prototypes "
                    "(0 = min(5, seen classes))");
    cmd->add_option("--alpha", f.alpha, "reconstruction loss weight");
    cmd->add_option("--beta", f.beta, "alignment loss weight");
    cmd->add_option("--learning-rate", f.learning_rate, "Adam step size");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--batch-size", f.batch_size, "minibatch size");
    cmd->add_option("--ridge-lambda", f.ridge_lambda,
                    "ridge weight of the projection fit");
    cmd->add_option("--top-k", f.top_k,
                    "report Hit@1..Hit@K (0 = min(5, classes))");
}

void add_data_flags(CLI::App *cmd, const std::string &role, DataFlags &d) {
    const std::string prefix = role.empty() ? "--" : "--" + role + "-";
    cmd->add_option(prefix + "features", d.features,
                    "feature matrix (binary or CSV)")
        ->required();
    cmd->add_option(prefix + "labels", d.labels, "labels, one id per line")
        ->required();
    cmd->add_option(prefix + "prototypes", d.prototypes,
                    "per-class prototype CSV (class_id column first)")
        ->required();
}

/// Layered configuration: defaults, then config file, then explicit flags.
ams::PipelineConfig resolve_config(const GlobalFlags &global,
                                   const ConfigFlags &flags) {
    ams::PipelineConfig config;
    if (global.config_path) {
        config = ams::apply_config(
            config, ams::read_config_file(*global.config_path));
    }
    if (global.seed) {
        config.seed = *global.seed;
    }
    if (global.metric) {
        config.metric = ams::metric_from_string(*global.metric);
    }
    if (global.ablation) {
        config.ablation_mode = ams::ablation_from_string(*global.ablation);
    }
    if (flags.k_preset) {
        config.k = ams::expanded_dim_preset(*flags.k_preset);
    }
    if (flags.k) {
        config.k = *flags.k;
    }
    if (flags.g) {
        config.g = *flags.g;
    }
    if (flags.alpha) {
        config.alpha = *flags.alpha;
    }
    if (flags.beta) {
        config.beta = *flags.beta;
    }
    if (flags.learning_rate) {
        config.learning_rate = *flags.learning_rate;
    }
    if (flags.epochs) {
        config.epochs = *flags.epochs;
    }
    if (flags.batch_size) {
        config.batch_size = *flags.batch_size;
    }
    if (flags.ridge_lambda) {
        config.ridge_lambda = *flags.ridge_lambda;
    }
    return config;
}

ams::Dataset load_role(const DataFlags &flags, const char *stage) {
    return ams::with_stage(stage, [&] {
        return ams::load_dataset(flags.features, flags.labels,
                                 flags.prototypes);
    });
}

std::string fixed6(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

std::string render_report(const ams::EvaluationReport &report,
                          ams::AblationMode mode,
                          const std::vector<std::string> &stages) {
    std::ostringstream out;
    out << "recognition report\n";
    out << "  mode: " << ams::to_string(mode) << "\n";
    out << "  metric: " << ams::to_string(report.metric) << "\n";
    out << "  classes: " << report.class_ids.size() << "\n";
    out << "  examples: " << report.num_examples << "\n";
    for (std::size_t k = 0; k < report.hit_at.size(); ++k) {
        out << "  hit@" << (k + 1) << ": " << fixed6(report.hit_at[k]) << "\n";
    }
    if (!stages.empty()) {
        out << "  stages:";
        for (const auto &stage : stages) {
            out << " " << stage;
        }
        out << "\n";
    }
    return out.str();
}

void write_report_files(const fs::path &out_dir,
                        const ams::EvaluationReport &report,
                        const std::string &text) {
    ams::with_stage("write-outputs", [&] {
        ams::write_hits_csv(out_dir / "hits.csv", report);
        ams::write_confusion_csv(out_dir / "confusion.csv", report);
        auto out = ams::detail::open_output(out_dir / "report.txt");
        out << text;
        return 0;
    });
}

int cmd_synth(const GlobalFlags &global, const ams::SyntheticSpec &spec,
              bool binary_features) {
    auto [seen, unseen] = ams::generate_synthetic(spec);
    const fs::path out(global.out_dir);
    ams::with_stage("write-outputs", [&] {
        const char *ext = binary_features ? ".amsm" : ".csv";
        if (binary_features) {
            ams::write_matrix_binary(out / "seen_features.amsm",
                                     seen.features);
            ams::write_matrix_binary(out / "unseen_features.amsm",
                                     unseen.features);
        } else {
            ams::write_matrix_csv(out / "seen_features.csv", seen.features);
            ams::write_matrix_csv(out / "unseen_features.csv",
                                  unseen.features);
        }
        ams::write_labels(out / "seen_labels.txt", seen.labels);
        ams::write_labels(out / "unseen_labels.txt", unseen.labels);
        ams::write_class_matrix_csv(out / "seen_prototypes.csv",
                                    seen.class_ids, seen.prototypes);
        ams::write_class_matrix_csv(out / "unseen_prototypes.csv",
                                    unseen.class_ids, unseen.prototypes);
        std::cout << "synthetic dataset written to " << out.string() << "\n"
                  << "  seen: " << seen.num_examples() << " examples, "
                  << seen.num_classes() << " classes\n"
                  << "  unseen: " << unseen.num_examples() << " examples, "
                  << unseen.num_classes() << " classes\n"
                  << "  features: seen_features" << ext << ", unseen_features"
                  << ext << "\n";
        return 0;
    });
    return 0;
}

int cmd_train(const GlobalFlags &global, const ConfigFlags &flags,
              const DataFlags &data) {
    const ams::PipelineConfig config = resolve_config(global, flags);
    config.validate();
    const ams::SeenDataset seen = load_role(data, "load-seen-data");

    const auto centers = ams::with_stage(
        "class-centers", [&] { return ams::compute_class_centers(seen); });
    const auto manifold = ams::with_stage("manifold-embedding", [&] {
        return ams::extract_manifold(centers,
                                     seen.prototype_dim() + config.k);
    });
    auto trained = ams::with_stage("train-autoencoder", [&] {
        return ams::train(seen, manifold, config.training());
    });

    const fs::path out(global.out_dir);
    ams::with_stage("write-outputs", [&] {
        ams::write_checkpoint(out / "checkpoint.amsf", trained.first);
        ams::write_training_log(out / "training_log.csv", trained.second);
        return 0;
    });

    const auto &report = trained.second;
    std::cout << "trained " << config.epochs << " epochs on "
              << seen.num_examples() << " examples\n";
    if (!report.total_loss.empty()) {
        std::cout << "  final total loss: " << fixed6(report.total_loss.back())
                  << "\n  final reconstruction loss: "
                  << fixed6(report.reconstruction_loss.back())
                  << "\n  final alignment loss: "
                  << fixed6(report.alignment_loss.back()) << "\n";
    }
    for (const auto &warning : report.warnings) {
        std::cout << "  warning: " << warning << "\n";
    }
    std::cout << "checkpoint: " << (out / "checkpoint.amsf").string() << "\n";
    return 0;
}

int cmd_expand(const GlobalFlags &global, const DataFlags &data,
               const std::string &checkpoint_path) {
    const ams::SeenDataset seen = load_role(data, "load-seen-data");
    const auto model = ams::with_stage("load-checkpoint", [&] {
        return ams::read_checkpoint(checkpoint_path);
    });
    const auto table = ams::with_stage("expand-seen-prototypes", [&] {
        return ams::expand_seen_prototypes(model, seen);
    });
    const fs::path out(global.out_dir);
    ams::with_stage("write-outputs", [&] {
        ams::write_prototype_table(out / "prototypes_seen.csv", table);
        return 0;
    });
    std::cout << "expanded " << table.num_classes() << " seen prototypes to "
              << table.predefined_dim() << "+" << table.expanded_dim()
              << " dimensions\n"
              << "table: " << (out / "prototypes_seen.csv").string() << "\n";
    return 0;
}

int cmd_recognize(const GlobalFlags &global, const std::string &features_path,
                  const std::string &table_path,
                  const std::string &projection_path) {
    const auto features = ams::with_stage("load-features", [&] {
        return ams::read_matrix_auto(features_path);
    });
    const auto table = ams::with_stage("load-prototype-table", [&] {
        return ams::read_prototype_table(table_path);
    });
    ams::LinearProjection proj;
    proj.w = ams::with_stage("load-projection", [&] {
        return ams::read_matrix_auto(projection_path);
    });
    ams::Metric metric = ams::Metric::Cosine;
    if (global.metric) {
        metric = ams::metric_from_string(*global.metric);
    }
    const auto labels = ams::with_stage("recognize", [&] {
        return ams::recognize(proj, features, table, metric);
    });
    const fs::path out(global.out_dir);
    ams::with_stage("write-outputs", [&] {
        ams::write_labels(out / "predictions.txt", labels);
        return 0;
    });
    std::cout << "recognized " << labels.size() << " examples against "
              << table.num_classes() << " classes\n"
              << "predictions: " << (out / "predictions.txt").string() << "\n";
    return 0;
}

int cmd_evaluate(const GlobalFlags &global, const ConfigFlags &flags,
                 const std::string &features_path,
                 const std::string &labels_path, const std::string &table_path,
                 const std::string &projection_path) {
    ams::Dataset data;
    data.features = ams::with_stage("load-features", [&] {
        return ams::read_matrix_auto(features_path);
    });
    data.labels = ams::with_stage(
        "load-labels", [&] { return ams::read_labels(labels_path); });
    const auto table = ams::with_stage("load-prototype-table", [&] {
        return ams::read_prototype_table(table_path);
    });
    ams::LinearProjection proj;
    proj.w = ams::with_stage("load-projection", [&] {
        return ams::read_matrix_auto(projection_path);
    });
    ams::Metric metric = ams::Metric::Cosine;
    if (global.metric) {
        metric = ams::metric_from_string(*global.metric);
    }
    const auto report = ams::with_stage("evaluate", [&] {
        return ams::evaluate(proj, data, table, metric,
                             flags.top_k.value_or(0));
    });
    const std::string text =
        render_report(report, ams::AblationMode::PE, {});
    write_report_files(fs::path(global.out_dir), report, text);
    std::cout << text;
    return 0;
}

int cmd_run(const GlobalFlags &global, const ConfigFlags &flags,
            const DataFlags &seen_flags, const DataFlags &unseen_flags) {
    const ams::PipelineConfig config = resolve_config(global, flags);
    const ams::SeenDataset seen = load_role(seen_flags, "load-seen-data");
    const ams::UnseenDataset unseen =
        load_role(unseen_flags, "load-unseen-data");

    const ams::PipelineResult result =
        ams::run_pipeline(config, seen, unseen, flags.top_k.value_or(0));

    const fs::path out(global.out_dir);
    ams::with_stage("write-outputs", [&] {
        ams::write_config_file(out / "config.txt",
                               ams::config_to_settings(config));
        if (result.model) {
            ams::write_checkpoint(out / "checkpoint.amsf", *result.model);
            ams::write_training_log(out / "training_log.csv", result.training);
        }
        ams::write_prototype_table(out / "prototypes_seen.csv",
                                   result.seen_table);
        ams::write_prototype_table(out / "prototypes_unseen.csv",
                                   result.unseen_table);
        ams::write_matrix_binary(out / "projection.amsm", result.projection.w);
        return 0;
    });

    const std::string text =
        render_report(result.report, config.ablation_mode, result.stages);
    write_report_files(out, result.report, text);
    for (const auto &warning : result.training.warnings) {
        std::cout << "warning: " << warning << "\n";
    }
    std::cout << text;
    std::cout << "outputs: " << out.string() << "\n";
    return 0;
}

int cmd_ablate(const GlobalFlags &global, const ConfigFlags &flags,
               const DataFlags &seen_flags, const DataFlags &unseen_flags) {
    const ams::PipelineConfig config = resolve_config(global, flags);
    const ams::SeenDataset seen = load_role(seen_flags, "load-seen-data");
    const ams::UnseenDataset unseen =
        load_role(unseen_flags, "load-unseen-data");

    const ams::AblationResult result =
        ams::run_ablation(config, seen, unseen, flags.top_k.value_or(0));

    const fs::path out(global.out_dir);
    ams::with_stage("write-outputs", [&] {
        auto file = ams::detail::open_output(out / "ablation.csv");
        file << "mode,k,hit_at_k\n";
        for (const auto &[mode, report] : result.runs) {
            for (std::size_t k = 0; k < report.hit_at.size(); ++k) {
                file << ams::to_string(mode) << "," << (k + 1) << ","
                     << ams::detail::format_double(report.hit_at[k]) << "\n";
            }
        }
        return 0;
    });

    std::cout << "ablation on " << unseen.num_examples()
              << " unseen examples\n";
    for (const auto &[mode, report] : result.runs) {
        std::cout << "  mode " << ams::to_string(mode)
                  << ": hit@1 " << fixed6(report.hit_at.front()) << "\n";
    }
    std::cout << "table: " << (out / "ablation.csv").string() << "\n";
    return 0;
}

int cmd_grid_search(const GlobalFlags &global, const ConfigFlags &flags,
                    const DataFlags &seen_flags, std::vector<double> alphas,
                    std::vector<double> betas, double holdout) {
    const ams::PipelineConfig config = resolve_config(global, flags);
    const ams::SeenDataset seen = load_role(seen_flags, "load-seen-data");

    const ams::GridSearchResult result =
        ams::grid_search(config, std::move(alphas), std::move(betas), seen,
                         holdout);

    const fs::path out(global.out_dir);
    ams::with_stage("write-outputs", [&] {
        auto file = ams::detail::open_output(out / "grid.csv");
        file << "alpha,beta,hit_at_1\n";
        for (const auto &row : result.evaluated) {
            file << ams::detail::format_double(row[0]) << ","
                 << ams::detail::format_double(row[1]) << ","
                 << ams::detail::format_double(row[2]) << "\n";
        }
        return 0;
    });

    std::cout << "grid search over " << result.evaluated.size()
              << " points\n"
              << "  best alpha: " << ams::detail::format_double(result.alpha)
              << "\n  best beta: " << ams::detail::format_double(result.beta)
              << "\n  held-out hit@1: " << fixed6(result.best_hit1) << "\n"
              << "table: " << (out / "grid.csv").string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Zero-shot recognition via expanded semantic features: "
                 "manifold-aligned autoencoder training, prototype "
                 "synthesis, and nearest-prototype evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags global;
    app.add_option("--seed", global.seed, "random seed (overrides config)");
    app.add_option("--config", global.config_path,
                   "key=value config file applied before flags");
    app.add_option("--metric", global.metric,
                   "recognition metric: cosine or euclidean");
    app.add_option("--ablation", global.ablation,
                   "semantic parts used for recognition: P, E, or P+E");
    app.add_option("--out", global.out_dir, "output directory");

    // synth
    auto *synth = app.add_subcommand("synth", "generate a synthetic dataset");
    ams::SyntheticSpec spec;
    bool binary_features = false;
    synth->add_option("--m-seen", spec.m_seen, "seen classes");
    synth->add_option("--v-unseen", spec.v_unseen, "unseen classes");
    synth->add_option("--d", spec.d, "visual feature dimension");
    synth->add_option("--n", spec.n, "pre-defined semantic dimension");
    synth->add_option("--examples-per-class", spec.examples_per_class,
                      "examples per class");
    synth->add_option("--noise-sigma", spec.noise_sigma,
                      "feature and prototype noise level");
    synth->add_flag("--binary", binary_features,
                    "write features in the binary matrix format");

    // train
    auto *train = app.add_subcommand(
        "train", "train the expanding autoencoder on seen data");
    ConfigFlags train_cfg;
    DataFlags train_data;
    add_config_flags(train, train_cfg);
    add_data_flags(train, "", train_data);

    // expand
    auto *expand = app.add_subcommand(
        "expand", "expand seen prototypes with a trained checkpoint");
    DataFlags expand_data;
    std::string expand_checkpoint;
    add_data_flags(expand, "", expand_data);
    expand->add_option("--checkpoint", expand_checkpoint,
                       "trained model checkpoint")
        ->required();

    // recognize
    auto *recognize =
        app.add_subcommand("recognize", "classify feature rows against a "
                                        "prototype table");
    std::string rec_features;
    std::string rec_table;
    std::string rec_projection;
    recognize->add_option("--features", rec_features, "feature matrix")
        ->required();
    recognize->add_option("--table", rec_table, "prototype table CSV")
        ->required();
    recognize->add_option("--projection", rec_projection,
                          "projection matrix file")
        ->required();

    // evaluate
    auto *evaluate = app.add_subcommand(
        "evaluate", "score labeled features against a prototype table");
    ConfigFlags eval_cfg;
    std::string eval_features;
    std::string eval_labels;
    std::string eval_table;
    std::string eval_projection;
    evaluate->add_option("--features", eval_features, "feature matrix")
        ->required();
    evaluate->add_option("--labels", eval_labels, "true labels")->required();
    evaluate->add_option("--table", eval_table, "prototype table CSV")
        ->required();
    evaluate->add_option("--projection", eval_projection,
                         "projection matrix file")
        ->required();
    evaluate->add_option("--top-k", eval_cfg.top_k,
                         "report Hit@1..Hit@K (0 = min(5, classes))");

    // run
    auto *run = app.add_subcommand("run", "full pipeline on seen and unseen "
                                          "data");
    ConfigFlags run_cfg;
    DataFlags run_seen;
    DataFlags run_unseen;
    add_config_flags(run, run_cfg);
    add_data_flags(run, "seen", run_seen);
    add_data_flags(run, "unseen", run_unseen);

    // ablate
    auto *ablate = app.add_subcommand(
        "ablate", "compare recognition in P, E, and P+E semantic spaces");
    ConfigFlags ablate_cfg;
    DataFlags ablate_seen;
    DataFlags ablate_unseen;
    add_config_flags(ablate, ablate_cfg);
    add_data_flags(ablate, "seen", ablate_seen);
    add_data_flags(ablate, "unseen", ablate_unseen);

    // grid-search
    auto *grid = app.add_subcommand(
        "grid-search", "pick loss weights on a held-out class split");
    ConfigFlags grid_cfg;
    DataFlags grid_seen;
    std::vector<double> grid_alphas;
    std::vector<double> grid_betas;
    double grid_holdout = 0.2;
    add_config_flags(grid, grid_cfg);
    add_data_flags(grid, "seen", grid_seen);
    grid->add_option("--alphas", grid_alphas, "candidate alpha values")
        ->required()
        ->delimiter(',');
    grid->add_option("--betas", grid_betas, "candidate beta values")
        ->required()
        ->delimiter(',');
    grid->add_option("--holdout", grid_holdout,
                     "fraction of seen classes held out for validation");

    try {
        app.parse(argc, argv);
        if (synth->parsed()) {
            if (global.seed) {
                spec.seed = *global.seed;
            }
            return cmd_synth(global, spec, binary_features);
        }
        if (train->parsed()) {
            return cmd_train(global, train_cfg, train_data);
        }
        if (expand->parsed()) {
            return cmd_expand(global, expand_data, expand_checkpoint);
        }
        if (recognize->parsed()) {
            return cmd_recognize(global, rec_features, rec_table,
                                 rec_projection);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(global, eval_cfg, eval_features, eval_labels,
                                eval_table, eval_projection);
        }
        if (run->parsed()) {
            return cmd_run(global, run_cfg, run_seen, run_unseen);
        }
        if (ablate->parsed()) {
            return cmd_ablate(global, ablate_cfg, ablate_seen, ablate_unseen);
        }
        if (grid->parsed()) {
            return cmd_grid_search(global, grid_cfg, grid_seen, grid_alphas,
                                   grid_betas, grid_holdout);
        }
        std::cerr << "error: no subcommand selected\n";
        return 4;
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 4;
    } catch (const ams::ingestion_error &e) {
        std::cerr << "ingestion error: " << e.what() << "\n";
        return 2;
    } catch (const ams::numerical_error &e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const ams::parameter_error &e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 4;
    } catch (const ams::dimension_error &e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
