// Command-line front end: verification battery, training runs, interaction
// analysis, sweeps, heatmaps and the sampling-stability study.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "gti/checkpoint.hpp"
#include "gti/errors.hpp"
#include "gti/exact.hpp"
#include "gti/experiments.hpp"
#include "gti/serialize.hpp"
#include "gti/train.hpp"

using namespace gti;
namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    ExperimentSpec spec;

    void attach(CLI::App* cmd) {
        cmd->set_config("--config")->configurable(false);
        cmd->add_option("--out", spec.output_dir, "output directory");
        cmd->add_option("--seed", spec.seed, "master seed")->capture_default_str();
        cmd->add_option("--arch", spec.model.arch, "model preset: mlp|mlp_small|patch|bn_mlp")
            ->capture_default_str();
        cmd->add_option("--classes", spec.model.classes, "class count")->capture_default_str();
        cmd->add_option("--img-h", spec.model.img_h, "image height")->capture_default_str();
        cmd->add_option("--img-w", spec.model.img_w, "image width")->capture_default_str();
        cmd->add_option("--site", spec.model.site_ordinal,
                        "relu site (ordinal) for dropout, loss and measurement")
            ->capture_default_str();
        cmd->add_option("--dropout", spec.model.dropout_rate, "dropout rate at the site")
            ->capture_default_str();
        cmd->add_option("--per-class", spec.train_per_class, "training samples per class")
            ->capture_default_str();
        cmd->add_option("--test-per-class", spec.test_per_class, "test samples per class")
            ->capture_default_str();
        cmd->add_option("--idx-images", spec.idx_images, "IDX image file (default: synthetic)");
        cmd->add_option("--idx-labels", spec.idx_labels, "IDX label file");
        cmd->add_option("--epochs", spec.training.epochs, "training epochs")
            ->capture_default_str();
        cmd->add_option("--lr", spec.training.learning_rate, "learning rate")
            ->capture_default_str();
        cmd->add_option("--lr-decay", spec.training.lr_decay, "per-epoch lr decay factor")
            ->capture_default_str();
        cmd->add_option("--momentum", spec.training.momentum, "SGD momentum")
            ->capture_default_str();
        cmd->add_option("--batch", spec.training.batch_size, "batch size")
            ->capture_default_str();
        cmd->add_option("--lambda", spec.training.lambda, "interaction-loss weight")
            ->capture_default_str();
        cmd->add_option("--alpha", spec.training.loss.alpha, "unit-batch fraction")
            ->capture_default_str();
        cmd->add_option("--pairs-per-step", spec.training.loss.pairs_per_step,
                        "quad draws per training step")
            ->capture_default_str();
        cmd->add_option("--m", spec.sampler.sample_count, "contexts per estimate")
            ->capture_default_str();
        cmd->add_option("--pair-budget", spec.sampler.pair_budget, "pairs per image")
            ->capture_default_str();
        cmd->add_option("--image-budget", spec.sampler.image_budget, "images per aggregate")
            ->capture_default_str();
        cmd->add_option("--curve-every", spec.curve_every,
                        "checkpoint cadence for curves (0 = finals only)")
            ->capture_default_str();
        cmd->add_option("--mislabel", spec.mislabel_fraction,
                        "fraction of training labels replaced with wrong classes")
            ->capture_default_str();
        cmd->add_option("--epoch-budget", spec.epoch_budget,
                        "epoch cap for train-to-threshold experiments")
            ->capture_default_str();
    }

    void finalize() {
        spec.training.seed = spec.seed;
        spec.sampler.seed = spec.seed;
    }
};

void emit(const nlohmann::json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        fs::create_directories(fs::path(out_path).parent_path().empty()
                                   ? "."
                                   : fs::path(out_path).parent_path().string());
        std::ofstream out(out_path);
        out << j.dump(2) << "\n";
        std::cout << "wrote " << out_path << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"game-theoretic interaction toolkit"};
    app.require_subcommand(1);

    // verify
    auto* verify = app.add_subcommand(
        "verify", "run the axiom and identity battery on seeded games, report JSON");
    uint64_t verify_seed = 0;
    int verify_games = 50;
    std::string verify_out;
    verify->add_option("--seed", verify_seed)->capture_default_str();
    verify->add_option("--games", verify_games)->capture_default_str();
    verify->add_option("--out", verify_out, "report path (default: stdout)");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model, write metrics and checkpoint");
    CommonOptions train_opts;
    train_opts.attach(train_cmd);
    int save_every = 0;
    train_cmd->add_option("--save-every", save_every,
                          "checkpoint every N epochs (0 = final only)");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "interaction analysis of a trained model");
    CommonOptions analyze_opts;
    analyze_opts.attach(analyze);
    std::string analyze_kind = "strength";
    std::string checkpoint_path;
    analyze->add_option("--kind", analyze_kind, "strength|overfit|banzhaf")
        ->capture_default_str();
    analyze->add_option("--checkpoint", checkpoint_path,
                        "model checkpoint (strength analysis only)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "train across a parameter grid");
    CommonOptions sweep_opts;
    sweep_opts.attach(sweep);
    std::string sweep_kind = "lambda";
    std::vector<double> sweep_lambdas, sweep_rates;
    sweep->add_option("--kind", sweep_kind, "lambda|rate|compare")->capture_default_str();
    sweep->add_option("--lambdas", sweep_lambdas, "lambda grid");
    sweep->add_option("--rates", sweep_rates, "dropout-rate grid");

    // heatmap
    auto* heatmap = app.add_subcommand("heatmap", "grid-neighbor interaction heatmap");
    CommonOptions heatmap_opts;
    heatmap_opts.attach(heatmap);
    int grid_rows = 7, grid_cols = 7, heatmap_image = 0;
    heatmap->add_option("--grid-rows", grid_rows)->capture_default_str();
    heatmap->add_option("--grid-cols", grid_cols)->capture_default_str();
    heatmap->add_option("--image", heatmap_image, "sample index to explain")
        ->capture_default_str();

    // instability
    auto* instab = app.add_subcommand("instability", "sampling-stability study");
    CommonOptions instab_opts;
    instab_opts.attach(instab);
    std::vector<long> m_grid = {50, 200, 500};
    int repeats = 5;
    instab->add_option("--m-grid", m_grid, "sampling numbers")->capture_default_str();
    instab->add_option("--repeats", repeats, "repeated estimates per image")
        ->capture_default_str();

    // game: analyze a declarative game file
    auto* game_cmd = app.add_subcommand("game", "attributions/interactions of a game file");
    std::string game_file;
    std::vector<int> game_pair;
    long game_m = 0;  // 0 = exact
    uint64_t game_seed = 0;
    game_cmd->add_option("--file", game_file, "game text file (players/term lines)")
        ->required();
    game_cmd->add_option("--pair", game_pair, "player pair for the interaction")
        ->expected(2);
    game_cmd->add_option("--m", game_m, "sample count (0 = exact enumeration)")
        ->capture_default_str();
    game_cmd->add_option("--seed", game_seed)->capture_default_str();

    // make-data
    auto* make_data = app.add_subcommand("make-data", "write a synthetic IDX dataset");
    std::string data_dir = "data";
    int data_per_class = 100, data_classes = 10;
    uint64_t data_seed = 0;
    make_data->add_option("--out", data_dir)->capture_default_str();
    make_data->add_option("--per-class", data_per_class)->capture_default_str();
    make_data->add_option("--classes", data_classes)->capture_default_str();
    make_data->add_option("--seed", data_seed)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*verify) {
            auto outcomes = run_axiom_battery(verify_seed, verify_games, 4, 10);
            auto identities = run_identity_battery(verify_seed, std::max(4, verify_games / 4), 12);
            outcomes.insert(outcomes.end(), identities.begin(), identities.end());
            auto ratios = run_ratio_battery(verify_seed, 20, 12);
            outcomes.insert(outcomes.end(), ratios.begin(), ratios.end());
            auto report = battery_report(outcomes);
            emit(report, verify_out);
            return report["pass"].get<bool>() ? 0 : 1;
        }

        if (*train_cmd) {
            train_opts.finalize();
            ExperimentSpec& spec = train_opts.spec;
            if (spec.output_dir.empty()) spec.output_dir = "run";
            spec.kind = ExperimentKind::lambda_sweep;  // manifest tag only
            write_manifest(spec);
            Dataset data = experiment_train_data(spec);
            Dataset test = experiment_test_data(spec);
            Model model = build_model(spec.model, spec.seed);
            TrainingConfig cfg = spec.training;
            if (cfg.lambda > 0.0) cfg.loss.site = site_act_index(model, spec.model);
            Trainer trainer(model, cfg);
            ResultTable metrics;
            metrics.columns = {"epoch", "cls_loss", "int_loss", "accuracy"};
            for (int e = 0; e < cfg.epochs; ++e) {
                auto em = trainer.run_epoch(data, e);
                metrics.add_row({std::to_string(e), std::to_string(em.cls_loss),
                                 std::to_string(em.int_loss), std::to_string(em.accuracy)});
                if (save_every > 0 && e % save_every == 0)
                    save_checkpoint(model, (fs::path(spec.output_dir) /
                                            ("model_epoch" + std::to_string(e) + ".ckpt"))
                                               .string());
            }
            metrics.write_csv((fs::path(spec.output_dir) / "metrics.csv").string());
            write_step_log_csv(trainer.step_log(),
                               (fs::path(spec.output_dir) / "steps.csv").string());
            save_checkpoint(model, (fs::path(spec.output_dir) / "model.ckpt").string());
            std::vector<int> all(test.count);
            for (int i = 0; i < test.count; ++i) all[i] = i;
            Matrix logits = model.forward(test.gather(all), Mode::eval).out();
            std::cout << "final test accuracy: " << accuracy(logits, test.labels) << "\n";
            return 0;
        }

        if (*analyze) {
            analyze_opts.finalize();
            ExperimentSpec& spec = analyze_opts.spec;
            if (analyze_kind == "overfit") {
                spec.kind = ExperimentKind::overfit_table;
                auto result = run_overfit_table(spec);
                emit({{"clean_strength", result.clean_strength},
                      {"mislabeled_strength", result.mislabeled_strength},
                      {"direction_holds", result.direction_holds},
                      {"epochs", result.epochs_used}},
                     "");
            } else if (analyze_kind == "banzhaf") {
                spec.kind = ExperimentKind::banzhaf_correlation;
                auto result = run_banzhaf_correlation(spec);
                emit({{"pearson", result.pearson}, {"degenerate", result.degenerate}}, "");
            } else if (analyze_kind == "strength") {
                spec.kind = ExperimentKind::dropout_compare;
                Dataset data = experiment_train_data(spec);
                Model model = checkpoint_path.empty() ? build_model(spec.model, spec.seed)
                                                      : load_checkpoint(checkpoint_path);
                std::vector<int> analyzed;
                for (int i = 0; i < std::min(data.count, spec.sampler.image_budget); ++i)
                    analyzed.push_back(i);
                double strength =
                    activation_strength(model, site_act_index(model, spec.model), data,
                                        analyzed, spec.sampler, NormalizationMode::global);
                emit({{"strength", strength},
                      {"m", spec.sampler.sample_count},
                      {"images", analyzed.size()},
                      {"seed", spec.seed}},
                     "");
            } else {
                throw CLI::ValidationError("--kind", "unknown analysis kind");
            }
            return 0;
        }

        if (*sweep) {
            sweep_opts.finalize();
            ExperimentSpec& spec = sweep_opts.spec;
            if (!sweep_lambdas.empty()) spec.lambdas = sweep_lambdas;
            if (!sweep_rates.empty()) spec.dropout_rates = sweep_rates;
            if (spec.output_dir.empty()) spec.output_dir = "sweep";
            nlohmann::json summary;
            if (sweep_kind == "lambda") {
                spec.kind = ExperimentKind::lambda_sweep;
                auto result = run_lambda_sweep(spec);
                for (const auto& row : result.rows)
                    summary["rows"].push_back({{"lambda", row.parameter},
                                               {"strength", row.final_strength},
                                               {"accuracy", row.test_accuracy},
                                               {"failed", row.failed}});
            } else if (sweep_kind == "rate") {
                spec.kind = ExperimentKind::dropout_rate_sweep;
                auto result = run_dropout_rate_sweep(spec);
                for (const auto& row : result.rows)
                    summary["rows"].push_back({{"rate", row.parameter},
                                               {"strength", row.final_strength},
                                               {"accuracy", row.test_accuracy},
                                               {"failed", row.failed}});
            } else if (sweep_kind == "compare") {
                spec.kind = ExperimentKind::dropout_compare;
                auto result = run_dropout_compare(spec);
                summary = {{"with_dropout", result.with_dropout_final},
                           {"without_dropout", result.without_dropout_final},
                           {"with_accuracy", result.with_test_accuracy},
                           {"without_accuracy", result.without_test_accuracy}};
            } else {
                throw CLI::ValidationError("--kind", "unknown sweep kind");
            }
            emit(summary, "");
            return 0;
        }

        if (*heatmap) {
            heatmap_opts.finalize();
            ExperimentSpec& spec = heatmap_opts.spec;
            spec.kind = ExperimentKind::heatmap;
            spec.grid_rows = grid_rows;
            spec.grid_cols = grid_cols;
            spec.heatmap_image = heatmap_image;
            if (spec.output_dir.empty()) spec.output_dir = "heatmap";
            auto result = run_heatmap(spec);
            emit({{"rows", result.rows},
                  {"cols", result.cols},
                  {"degenerate", result.degenerate},
                  {"files", {"heatmap.csv", "heatmap.pgm"}}},
                 "");
            return 0;
        }

        if (*instab) {
            instab_opts.finalize();
            ExperimentSpec& spec = instab_opts.spec;
            spec.kind = ExperimentKind::instability_study;
            spec.m_grid = m_grid;
            spec.instability_repeats = repeats;
            if (spec.output_dir.empty()) spec.output_dir = "instability";
            auto result = run_instability_study(spec);
            nlohmann::json rows = nlohmann::json::array();
            for (size_t k = 0; k < result.m_grid.size(); ++k)
                rows.push_back({{"m", result.m_grid[k]}, {"instability", result.instability[k]}});
            emit({{"rows", rows}}, "");
            return 0;
        }

        if (*game_cmd) {
            TermGame game = TermGame::load(game_file);
            nlohmann::json out;
            out["players"] = game.n_players();
            if (game_m == 0) {
                out["shapley"] = to_json(shapley_exact(game));
                out["banzhaf"] = to_json(banzhaf_exact(game));
                if (!game_pair.empty())
                    out["interaction"] =
                        to_json(interaction_exact(game, game_pair[0], game_pair[1]));
            } else {
                SamplerConfig cfg;
                cfg.sample_count = game_m;
                cfg.seed = game_seed;
                nlohmann::json shap = nlohmann::json::array();
                for (int i = 0; i < game.n_players(); ++i)
                    shap.push_back(to_json(shapley_sampled(game, i, cfg)));
                out["shapley"] = shap;
                if (!game_pair.empty())
                    out["interaction"] =
                        to_json(interaction_sampled(game, game_pair[0], game_pair[1], cfg));
            }
            emit(out, "");
            return 0;
        }

        if (*make_data) {
            fs::create_directories(data_dir);
            Dataset data = synth_images(data_per_class, data_classes, data_seed);
            save_idx(data, (fs::path(data_dir) / "images.idx").string(),
                     (fs::path(data_dir) / "labels.idx").string());
            std::cout << "wrote " << data.count << " samples to " << data_dir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
