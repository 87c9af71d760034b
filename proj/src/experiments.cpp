#include "gti/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include "gti/combinat.hpp"
#include "gti/errors.hpp"
#include "gti/exact.hpp"
#include "gti/rng.hpp"

namespace gti {

namespace fs = std::filesystem;

const char* to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::verify_axioms: return "verify_axioms";
        case ExperimentKind::overfit_table: return "overfit_table";
        case ExperimentKind::dropout_compare: return "dropout_compare";
        case ExperimentKind::lambda_sweep: return "lambda_sweep";
        case ExperimentKind::dropout_rate_sweep: return "dropout_rate_sweep";
        case ExperimentKind::banzhaf_correlation: return "banzhaf_correlation";
        case ExperimentKind::heatmap: return "heatmap";
        case ExperimentKind::instability_study: return "instability_study";
    }
    return "?";
}

Model build_model(const ModelSpec& spec, uint64_t seed) {
    const int input = spec.img_h * spec.img_w;
    Model m(input);
    std::vector<int> widths;
    if (spec.arch == "mlp") {
        widths = {256, 128};
    } else if (spec.arch == "mlp_small") {
        widths = {64, 32};
    } else if (spec.arch == "patch") {
        widths = {64};
    } else if (spec.arch == "bn_mlp") {
        widths = {64, 32};
    } else {
        throw std::invalid_argument("unknown architecture preset: " + spec.arch);
    }

    int relu_seen = 0;
    auto maybe_dropout = [&] {
        if (spec.dropout_rate > 0.0 && relu_seen - 1 == spec.site_ordinal)
            m.dropout(spec.dropout_rate);
    };

    if (spec.arch == "patch") {
        int patch = spec.img_h % 7 == 0 ? 7 : 4;
        m.patch_dense(spec.img_h, spec.img_w, patch, 8).relu();
        ++relu_seen;
        maybe_dropout();
    }
    for (size_t k = 0; k < widths.size(); ++k) {
        m.dense(widths[k]);
        if (spec.arch == "bn_mlp" && k == 0) m.batchnorm();
        m.relu();
        ++relu_seen;
        maybe_dropout();
    }
    m.dense(spec.classes);
    m.head(HeadKind::softmax_cross_entropy);
    m.init_params(seed);
    return m;
}

int site_act_index(const Model& model, const ModelSpec& spec) {
    auto sites = model.relu_sites();
    if (spec.site_ordinal < 0 || spec.site_ordinal >= static_cast<int>(sites.size()))
        throw std::invalid_argument("site ordinal out of range for this architecture");
    return sites[spec.site_ordinal];
}

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
    nlohmann::json j;
    j["kind"] = to_string(spec.kind);
    j["version"] = kVersion;
    j["seed"] = spec.seed;
    j["output_dir"] = spec.output_dir;
    j["data"] = {{"idx_images", spec.idx_images},
                 {"idx_labels", spec.idx_labels},
                 {"train_per_class", spec.train_per_class},
                 {"test_per_class", spec.test_per_class}};
    j["model"] = {{"arch", spec.model.arch},
                  {"img_h", spec.model.img_h},
                  {"img_w", spec.model.img_w},
                  {"classes", spec.model.classes},
                  {"dropout_rate", spec.model.dropout_rate},
                  {"site_ordinal", spec.model.site_ordinal}};
    j["training"] = {{"learning_rate", spec.training.learning_rate},
                     {"momentum", spec.training.momentum},
                     {"batch_size", spec.training.batch_size},
                     {"epochs", spec.training.epochs},
                     {"seed", spec.training.seed},
                     {"lambda", spec.training.lambda},
                     {"alpha", spec.training.loss.alpha},
                     {"pairs_per_step", spec.training.loss.pairs_per_step}};
    j["sampler"] = {{"m", spec.sampler.sample_count},
                    {"seed", spec.sampler.seed},
                    {"pair_budget", spec.sampler.pair_budget},
                    {"image_budget", spec.sampler.image_budget},
                    {"size_rule", "round-nearest-clamp[0,n-2]"}};
    j["knobs"] = {{"mislabel_fraction", spec.mislabel_fraction},
                  {"loss_threshold", spec.loss_threshold},
                  {"epoch_budget", spec.epoch_budget},
                  {"lambdas", spec.lambdas},
                  {"dropout_rates", spec.dropout_rates},
                  {"m_grid", spec.m_grid},
                  {"instability_repeats", spec.instability_repeats},
                  {"grid", {spec.grid_rows, spec.grid_cols}},
                  {"heatmap_image", spec.heatmap_image},
                  {"curve_every", spec.curve_every}};
    return j;
}

void write_manifest(const ExperimentSpec& spec) {
    if (spec.output_dir.empty()) return;
    fs::create_directories(spec.output_dir);
    std::ofstream out(fs::path(spec.output_dir) / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + spec.output_dir);
    out << spec_to_json(spec).dump(2) << "\n";
}

void ResultTable::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("result row width does not match the column schema");
    rows.push_back(std::move(row));
}

void ResultTable::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write table: " + path);
    for (size_t c = 0; c < columns.size(); ++c)
        out << columns[c] << (c + 1 < columns.size() ? "," : "\n");
    for (const auto& row : rows)
        for (size_t c = 0; c < row.size(); ++c)
            out << row[c] << (c + 1 < row.size() ? "," : "\n");
}

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

namespace {

// One pool per master seed; train takes the first train_per_class samples of
// each class, test the next test_per_class. Synthetic classes share their
// templates across the split, as a held-out slice of one dataset should.
Dataset experiment_split(const ExperimentSpec& spec, bool test) {
    Dataset all;
    if (!spec.idx_images.empty()) {
        all = load_idx(spec.idx_images, spec.idx_labels);
    } else {
        all = synth_images(spec.train_per_class + spec.test_per_class, spec.model.classes,
                           CounterRng::derive(spec.seed, {0xda7a}), spec.model.img_h,
                           spec.model.img_w);
    }
    std::vector<int> picked;
    std::vector<int> per_class(std::max(1, all.num_classes), 0);
    for (int i = 0; i < all.count; ++i) {
        int c = per_class[all.labels[i]]++;
        bool in_train = c < spec.train_per_class;
        bool in_test = c >= spec.train_per_class &&
                       c < spec.train_per_class + spec.test_per_class;
        if (test ? in_test : in_train) picked.push_back(i);
    }
    return subset(all, picked);
}

}  // namespace

Dataset experiment_train_data(const ExperimentSpec& spec) {
    return experiment_split(spec, false);
}

Dataset experiment_test_data(const ExperimentSpec& spec) { return experiment_split(spec, true); }

namespace {

Matrix forward_scores(const Model& model, const Dataset& data, const std::vector<int>& indices) {
    Matrix x = data.gather(indices);
    return model.forward(x, Mode::eval, 0, Track::interaction).out();
}

std::vector<int> labels_of(const Dataset& data, const std::vector<int>& indices) {
    std::vector<int> labels(indices.size());
    for (size_t k = 0; k < indices.size(); ++k) labels[k] = data.labels[indices[k]];
    return labels;
}

NormalizationTerm strength_normalization(const Model& model, const Dataset& data,
                                         const std::vector<int>& analyzed,
                                         NormalizationMode mode) {
    if (mode == NormalizationMode::per_image) {
        Matrix scores = forward_scores(model, data, analyzed);
        return compute_normalization(scores, labels_of(data, analyzed), mode);
    }
    // global margin over the whole provided dataset
    std::vector<int> all(data.count);
    for (int i = 0; i < data.count; ++i) all[i] = i;
    Matrix scores = forward_scores(model, data, all);
    return compute_normalization(scores, data.labels, mode);
}

double games_strength(const std::vector<std::unique_ptr<Game>>& games,
                      const SamplerConfig& sampler, const NormalizationTerm& norm) {
    std::vector<const Game*> ptrs;
    ptrs.reserve(games.size());
    for (const auto& g : games) ptrs.push_back(g.get());
    SamplerConfig cfg = sampler;
    cfg.image_budget = static_cast<int>(ptrs.size());
    return aggregate_strength(ptrs, cfg, norm);
}

double test_accuracy(const Model& model, const Dataset& test) {
    std::vector<int> all(test.count);
    for (int i = 0; i < test.count; ++i) all[i] = i;
    Matrix logits = forward_scores(model, test, all);
    return accuracy(logits, test.labels);
}

}  // namespace

double activation_strength(const Model& model, int site_act, const Dataset& data,
                           const std::vector<int>& indices, const SamplerConfig& sampler,
                           NormalizationMode norm_mode) {
    NormalizationTerm norm = strength_normalization(model, data, indices, norm_mode);
    ScoreSelector sel = default_score_selector(model);
    std::vector<std::unique_ptr<Game>> games;
    for (int idx : indices)
        games.push_back(std::make_unique<ActivationSiteGame>(model, site_act, data.row(idx),
                                                             data.labels[idx], sel));
    return games_strength(games, sampler, norm);
}

namespace {

double grid_strength(const Model& model, const Dataset& data, const std::vector<int>& indices,
                     const GridPartition& part, const std::vector<double>& baseline,
                     const SamplerConfig& sampler, NormalizationMode norm_mode) {
    NormalizationTerm norm = strength_normalization(model, data, indices, norm_mode);
    ScoreSelector sel = default_score_selector(model);
    std::vector<std::unique_ptr<Game>> games;
    for (int idx : indices) {
        std::vector<double> image(data.sample(idx), data.sample(idx) + data.dim());
        games.push_back(
            std::make_unique<InputGridGame>(model, part, image, baseline, data.labels[idx], sel));
    }
    return games_strength(games, sampler, norm);
}

}  // namespace

OverfitResult run_overfit_table(const ExperimentSpec& spec) {
    if (spec.mislabel_fraction <= 0.0)
        throw std::invalid_argument(
            "overfit table needs mislabel_fraction > 0: with no mislabeled samples the two "
            "groups coincide by construction");
    write_manifest(spec);

    Dataset clean = experiment_train_data(spec);
    MislabelResult noisy = mislabel(clean, spec.mislabel_fraction,
                                    CounterRng::derive(spec.seed, {0x0f17}));
    if (noisy.relabeled_count == 0)
        throw std::invalid_argument("mislabel fraction rounds to zero samples");

    Model model = build_model(spec.model, spec.seed);
    TrainingConfig cfg = spec.training;
    cfg.seed = spec.seed;
    cfg.epochs = 1;
    Trainer trainer(model, cfg);

    OverfitResult result;
    double loss = std::numeric_limits<double>::infinity();
    int epoch = 0;
    for (; epoch < spec.epoch_budget; ++epoch) {
        auto metrics = trainer.run_epoch(noisy.data, epoch);
        loss = metrics.cls_loss;
        if (loss < spec.loss_threshold) break;
    }
    if (loss >= spec.loss_threshold)
        throw BudgetExceededError("training loss " + std::to_string(loss) +
                                  " did not reach " + std::to_string(spec.loss_threshold) +
                                  " within " + std::to_string(spec.epoch_budget) + " epochs");
    result.epochs_used = epoch + 1;
    result.final_loss = loss;

    // analysis groups drawn from each side
    std::vector<int> bad, good;
    for (int i = 0; i < noisy.data.count; ++i)
        (noisy.relabeled[i] ? bad : good).push_back(i);
    CounterRng pick(CounterRng::derive(spec.seed, {0x91c4}));
    pick.shuffle(bad);
    pick.shuffle(good);
    const int budget = std::min<int>(spec.sampler.image_budget,
                                     std::min<int>(bad.size(), good.size()));
    bad.resize(budget);
    good.resize(budget);

    GridPartition part =
        grid_partition(spec.model.img_h, spec.model.img_w, spec.grid_rows, spec.grid_cols);
    std::vector<double> baseline = mean_image(clean);

    result.mislabeled_strength = grid_strength(model, noisy.data, bad, part, baseline,
                                               spec.sampler, NormalizationMode::per_image);
    result.clean_strength = grid_strength(model, noisy.data, good, part, baseline, spec.sampler,
                                          NormalizationMode::per_image);
    result.direction_holds = result.mislabeled_strength > result.clean_strength;

    if (!spec.output_dir.empty()) {
        ResultTable table;
        table.columns = {"group",      "strength", "images", "epochs",
                         "final_loss", "normalization", "seed"};
        table.add_row({"clean", fmt(result.clean_strength), std::to_string(budget),
                       std::to_string(result.epochs_used), fmt(result.final_loss),
                       to_string(NormalizationMode::per_image), std::to_string(spec.seed)});
        table.add_row({"mislabeled", fmt(result.mislabeled_strength), std::to_string(budget),
                       std::to_string(result.epochs_used), fmt(result.final_loss),
                       to_string(NormalizationMode::per_image), std::to_string(spec.seed)});
        table.write_csv((fs::path(spec.output_dir) / "results.csv").string());
    }
    return result;
}

namespace {

struct CheckpointedRun {
    std::vector<EpochMetrics> metrics;
    std::vector<int> epochs;        // which epochs were captured
    std::vector<Model> checkpoints;
    Model final_model;

    CheckpointedRun() : final_model(1) {}
};

CheckpointedRun train_with_checkpoints(const ExperimentSpec& spec, const ModelSpec& mspec,
                                       double lambda, const Dataset& data) {
    CheckpointedRun run;
    Model model = build_model(mspec, spec.seed);
    TrainingConfig cfg = spec.training;
    cfg.seed = spec.seed;
    cfg.lambda = lambda;
    if (lambda > 0.0) cfg.loss.site = site_act_index(model, mspec);
    run.metrics = train(model, data, cfg, [&](int epoch, const Model& m, const EpochMetrics&) {
        if (spec.curve_every > 0 &&
            (epoch % spec.curve_every == 0 || epoch == cfg.epochs - 1)) {
            run.epochs.push_back(epoch);
            run.checkpoints.push_back(m);
        }
    });
    run.final_model = std::move(model);
    return run;
}

std::vector<int> analysis_indices(const Dataset& data, int budget, uint64_t seed) {
    std::vector<int> all(data.count);
    for (int i = 0; i < data.count; ++i) all[i] = i;
    CounterRng rng(CounterRng::derive(seed, {0x5e1ec7}));
    rng.shuffle(all);
    all.resize(std::min<int>(budget, data.count));
    return all;
}

}  // namespace

DropoutCompareResult run_dropout_compare(const ExperimentSpec& spec) {
    write_manifest(spec);
    Dataset data = experiment_train_data(spec);
    Dataset test = experiment_test_data(spec);
    std::vector<int> analyzed = analysis_indices(data, spec.sampler.image_budget, spec.seed);

    ModelSpec with = spec.model;
    if (with.dropout_rate <= 0.0) with.dropout_rate = 0.5;
    ModelSpec without = spec.model;
    without.dropout_rate = 0.0;

    CheckpointedRun run_with = train_with_checkpoints(spec, with, 0.0, data);
    CheckpointedRun run_without = train_with_checkpoints(spec, without, 0.0, data);

    DropoutCompareResult result;
    result.curves.columns = {"epoch", "strength_without", "strength_with"};
    for (size_t k = 0; k < run_with.epochs.size(); ++k) {
        const Model& mw = run_with.checkpoints[k];
        const Model& mo = run_without.checkpoints[k];
        double sw = activation_strength(mw, site_act_index(mw, with), data, analyzed,
                                        spec.sampler, NormalizationMode::global);
        double so = activation_strength(mo, site_act_index(mo, without), data, analyzed,
                                        spec.sampler, NormalizationMode::global);
        result.curves.add_row({std::to_string(run_with.epochs[k]), fmt(so), fmt(sw)});
        if (k + 1 == run_with.epochs.size()) {
            result.with_dropout_final = sw;
            result.without_dropout_final = so;
        }
    }
    if (run_with.epochs.empty()) {  // finals only
        const Model& mw = run_with.final_model;
        const Model& mo = run_without.final_model;
        result.with_dropout_final = activation_strength(
            mw, site_act_index(mw, with), data, analyzed, spec.sampler,
            NormalizationMode::global);
        result.without_dropout_final = activation_strength(
            mo, site_act_index(mo, without), data, analyzed, spec.sampler,
            NormalizationMode::global);
    }
    result.with_test_accuracy = test_accuracy(run_with.final_model, test);
    result.without_test_accuracy = test_accuracy(run_without.final_model, test);

    if (!spec.output_dir.empty()) {
        result.curves.write_csv((fs::path(spec.output_dir) / "curves.csv").string());
        ResultTable table;
        table.columns = {"variant", "final_strength", "test_accuracy", "normalization",
                         "seed"};
        table.add_row({"without_dropout", fmt(result.without_dropout_final),
                       fmt(result.without_test_accuracy),
                       to_string(NormalizationMode::global), std::to_string(spec.seed)});
        table.add_row({"with_dropout", fmt(result.with_dropout_final),
                       fmt(result.with_test_accuracy), to_string(NormalizationMode::global),
                       std::to_string(spec.seed)});
        table.write_csv((fs::path(spec.output_dir) / "results.csv").string());
    }
    return result;
}

namespace {

SweepResult run_parameter_sweep(const ExperimentSpec& spec, bool lambda_sweep) {
    write_manifest(spec);
    Dataset data = experiment_train_data(spec);
    Dataset test = experiment_test_data(spec);
    std::vector<int> analyzed = analysis_indices(data, spec.sampler.image_budget, spec.seed);

    SweepResult result;
    result.table.columns = {lambda_sweep ? "lambda" : "dropout_rate", "final_strength",
                            "test_accuracy", "failed", "normalization", "seed"};
    const std::vector<double>& grid = lambda_sweep ? spec.lambdas : spec.dropout_rates;
    for (double value : grid) {
        SweepRow row;
        row.parameter = value;
        ModelSpec mspec = spec.model;
        double lambda = 0.0;
        if (lambda_sweep) {
            mspec.dropout_rate = 0.0;
            lambda = value;
        } else {
            mspec.dropout_rate = value;
        }
        try {
            CheckpointedRun run = train_with_checkpoints(spec, mspec, lambda, data);
            const Model& m = run.final_model;
            row.final_strength = activation_strength(m, site_act_index(m, mspec), data, analyzed,
                                                     spec.sampler, NormalizationMode::global);
            row.test_accuracy = test_accuracy(m, test);
        } catch (const TrainingDivergedError&) {
            row.failed = true;  // recorded, the sweep continues
        }
        result.rows.push_back(row);
        result.table.add_row({fmt(row.parameter), fmt(row.final_strength),
                              fmt(row.test_accuracy), row.failed ? "1" : "0",
                              to_string(NormalizationMode::global),
                              std::to_string(spec.seed)});
    }
    if (!spec.output_dir.empty())
        result.table.write_csv((fs::path(spec.output_dir) / "results.csv").string());
    return result;
}

}  // namespace

SweepResult run_lambda_sweep(const ExperimentSpec& spec) { return run_parameter_sweep(spec, true); }

SweepResult run_dropout_rate_sweep(const ExperimentSpec& spec) {
    return run_parameter_sweep(spec, false);
}

BanzhafCorrelationResult run_banzhaf_correlation(const ExperimentSpec& spec) {
    write_manifest(spec);
    Dataset data = experiment_train_data(spec);
    if (spec.mislabel_fraction > 0.0)  // track an over-fitting run when asked
        data = mislabel(data, spec.mislabel_fraction, CounterRng::derive(spec.seed, {0x0f17}))
                   .data;
    std::vector<int> analyzed = analysis_indices(data, spec.sampler.image_budget, spec.seed);

    ExperimentSpec curve_spec = spec;
    if (curve_spec.curve_every <= 0) curve_spec.curve_every = 1;
    CheckpointedRun run = train_with_checkpoints(curve_spec, spec.model, spec.training.lambda,
                                                 data);
    if (run.checkpoints.size() < 3)
        throw InsufficientDataError("banzhaf correlation needs at least 3 checkpoints, got " +
                                    std::to_string(run.checkpoints.size()));

    BanzhafCorrelationResult result;
    result.curves.columns = {"epoch", "shapley_strength", "banzhaf_strength"};
    std::vector<double> xs, ys;
    for (size_t k = 0; k < run.checkpoints.size(); ++k) {
        const Model& m = run.checkpoints[k];
        const int site = site_act_index(m, spec.model);
        // common random numbers: one pair/image panel and one context stream
        // for every checkpoint and both weightings, so the curves move with
        // the model, not with the panel draw
        SamplerConfig shap = spec.sampler;
        shap.weighting = InteractionWeighting::shapley;
        SamplerConfig banz = spec.sampler;
        banz.weighting = InteractionWeighting::banzhaf;
        double s = activation_strength(m, site, data, analyzed, shap,
                                       NormalizationMode::global);
        double b = activation_strength(m, site, data, analyzed, banz,
                                       NormalizationMode::global);
        xs.push_back(s);
        ys.push_back(b);
        result.curves.add_row({std::to_string(run.epochs[k]), fmt(s), fmt(b)});
    }

    const size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (size_t k = 0; k < n; ++k) {
        mx += xs[k];
        my += ys[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t k = 0; k < n; ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        syy += (ys[k] - my) * (ys[k] - my);
        sxy += (xs[k] - mx) * (ys[k] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        result.degenerate = true;
        result.pearson = 0.0;
    } else {
        result.pearson = sxy / std::sqrt(sxx * syy);
    }

    if (!spec.output_dir.empty()) {
        result.curves.write_csv((fs::path(spec.output_dir) / "curves.csv").string());
        ResultTable table;
        table.columns = {"pearson", "checkpoints", "degenerate", "normalization", "seed"};
        table.add_row({fmt(result.pearson), std::to_string(n), result.degenerate ? "1" : "0",
                       to_string(NormalizationMode::global), std::to_string(spec.seed)});
        table.write_csv((fs::path(spec.output_dir) / "results.csv").string());
    }
    return result;
}

HeatmapResult neighbor_heatmap(const Game& game, const GridPartition& part,
                               const SamplerConfig& sampler) {
    if (game.n_players() != part.player_count())
        throw std::invalid_argument("game players do not match the grid partition");
    HeatmapResult map;
    map.rows = part.rows;
    map.cols = part.cols;
    map.raw.assign(part.player_count(), 0.0);
    std::vector<int> neighbor_count(part.player_count(), 0);

    // each unordered neighbor pair estimated once (right and down edges)
    int pair_index = 0;
    for (int r = 0; r < part.rows; ++r)
        for (int c = 0; c < part.cols; ++c) {
            const int g = r * part.cols + c;
            const int targets[2] = {c + 1 < part.cols ? g + 1 : -1,
                                    r + 1 < part.rows ? g + part.cols : -1};
            for (int gp : targets) {
                if (gp < 0) continue;
                SamplerConfig cfg = sampler;
                cfg.seed = CounterRng::derive(sampler.seed,
                                              {0x6ea7, static_cast<uint64_t>(pair_index)});
                double strength = std::abs(interaction_sampled(game, g, gp, cfg).value);
                map.raw[g] += strength;
                map.raw[gp] += strength;
                ++neighbor_count[g];
                ++neighbor_count[gp];
                ++pair_index;
            }
        }
    for (int g = 0; g < part.player_count(); ++g)
        map.raw[g] /= std::max(1, neighbor_count[g]);

    double lo = map.raw[0], hi = map.raw[0];
    for (double v : map.raw) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    map.normalized.assign(map.raw.size(), 0.0);
    if (hi - lo <= 1e-300) {
        map.degenerate = true;  // constant map: emit zeros, flag it
    } else {
        for (size_t k = 0; k < map.raw.size(); ++k)
            map.normalized[k] = (map.raw[k] - lo) / (hi - lo);
    }
    return map;
}

HeatmapResult run_heatmap(const ExperimentSpec& spec) {
    write_manifest(spec);
    Dataset data = experiment_train_data(spec);
    Model model = build_model(spec.model, spec.seed);
    TrainingConfig cfg = spec.training;
    cfg.seed = spec.seed;
    train(model, data, cfg);

    GridPartition part =
        grid_partition(spec.model.img_h, spec.model.img_w, spec.grid_rows, spec.grid_cols);
    const int idx = spec.heatmap_image % data.count;
    std::vector<double> image(data.sample(idx), data.sample(idx) + data.dim());
    InputGridGame game(model, part, image, mean_image(data), data.labels[idx],
                       default_score_selector(model));
    HeatmapResult map = neighbor_heatmap(game, part, spec.sampler);

    if (!spec.output_dir.empty()) {
        write_heatmap_csv(map, (fs::path(spec.output_dir) / "heatmap.csv").string());
        write_heatmap_pgm(map, (fs::path(spec.output_dir) / "heatmap.pgm").string());
    }
    return map;
}

void write_heatmap_csv(const HeatmapResult& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write heatmap: " + path);
    for (int r = 0; r < map.rows; ++r)
        for (int c = 0; c < map.cols; ++c)
            out << fmt(map.normalized[r * map.cols + c]) << (c + 1 < map.cols ? "," : "\n");
}

void write_heatmap_pgm(const HeatmapResult& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write heatmap: " + path);
    out << "P5\n" << map.cols << " " << map.rows << "\n255\n";
    for (double v : map.normalized) {
        unsigned char b = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255));
        out.write(reinterpret_cast<char*>(&b), 1);
    }
}

InstabilityStudyResult run_instability_study(const ExperimentSpec& spec) {
    write_manifest(spec);
    Dataset data = experiment_train_data(spec);
    Model model = build_model(spec.model, spec.seed);
    TrainingConfig cfg = spec.training;
    cfg.seed = spec.seed;
    train(model, data, cfg);

    const int site = site_act_index(model, spec.model);
    std::vector<int> analyzed = analysis_indices(data, spec.sampler.image_budget, spec.seed);
    ScoreSelector sel = default_score_selector(model);
    std::vector<std::unique_ptr<Game>> games;
    std::vector<const Game*> ptrs;
    for (int idx : analyzed) {
        games.push_back(std::make_unique<ActivationSiteGame>(model, site, data.row(idx),
                                                             data.labels[idx], sel));
        ptrs.push_back(games.back().get());
    }

    InstabilityStudyResult result;
    ResultTable table;
    table.columns = {"m", "instability", "repeats", "seed"};
    for (long m : spec.m_grid) {
        SamplerConfig cfg_m = spec.sampler;
        cfg_m.sample_count = m;
        cfg_m.image_budget = static_cast<int>(ptrs.size());
        double value = instability(ptrs, cfg_m, spec.instability_repeats).mean;
        result.m_grid.push_back(m);
        result.instability.push_back(value);
        table.add_row({std::to_string(m), fmt(value),
                       std::to_string(spec.instability_repeats), std::to_string(spec.seed)});
    }
    if (!spec.output_dir.empty())
        table.write_csv((fs::path(spec.output_dir) / "results.csv").string());
    return result;
}

// ---- verification battery ----

namespace {

struct Check {
    BatteryOutcome outcome;
    double tolerance;

    explicit Check(std::string name, double tol) : tolerance(tol) {
        outcome.name = std::move(name);
        outcome.pass = true;
    }

    void observe(double deviation) {
        outcome.worst = std::max(outcome.worst, deviation);
        outcome.pass = outcome.pass && deviation <= tolerance;
        ++outcome.cases;
    }
};

}  // namespace

std::vector<BatteryOutcome> run_axiom_battery(uint64_t seed, int games, int n_min, int n_max) {
    Check efficiency("shapley_efficiency", 1e-9);
    Check linearity("shapley_linearity", 1e-9);
    Check dummy("shapley_dummy", 1e-9);
    Check symmetry("shapley_symmetry", 1e-9);

    for (int g = 0; g < games; ++g) {
        CounterRng rng(CounterRng::derive(seed, {0xa71, static_cast<uint64_t>(g)}));
        const int n = n_min + static_cast<int>(rng.next_below(n_max - n_min + 1));
        TableGame game_a = TableGame::random(n, CounterRng::derive(seed, {0xa72, (uint64_t)g}));
        TableGame game_b = TableGame::random(n, CounterRng::derive(seed, {0xa73, (uint64_t)g}));

        auto phi_a = shapley_exact(game_a);
        double reward = game_a.evaluate(Coalition::full_set(n)) -
                        game_a.evaluate(Coalition::empty_set(n));
        efficiency.observe(std::abs(phi_a.sum() - reward));

        // linearity on the sum game
        auto phi_b = shapley_exact(game_b);
        FunctionGame sum_game(n, [&](const Coalition& s) {
            return game_a.evaluate(s) + game_b.evaluate(s);
        });
        auto phi_sum = shapley_exact(sum_game);
        for (int i = 0; i < n; ++i)
            linearity.observe(std::abs(phi_sum.values[i] - phi_a.values[i] - phi_b.values[i]));

        // dummy player: constant marginal contribution c, f(empty) = 0
        const int d = static_cast<int>(rng.next_below(n));
        const double c = rng.uniform(-2.0, 2.0);
        TableGame base = TableGame::random(n - 1, CounterRng::derive(seed, {0xa74, (uint64_t)g}));
        const double base_empty = base.evaluate(Coalition::empty_set(n - 1));
        FunctionGame dummy_game(n, [&, d, c, base_empty](const Coalition& s) {
            Coalition rest = Coalition::empty_set(n - 1);
            s.for_each_member([&](int i) {
                if (i != d) rest.add(i < d ? i : i - 1);
            });
            return base.evaluate(rest) - base_empty + (s.contains(d) ? c : 0.0);
        });
        auto phi_dummy = shapley_exact(dummy_game);
        dummy.observe(std::abs(phi_dummy.values[d] - c));

        // symmetry: symmetrize a random game in players (0, 1)
        FunctionGame sym_game(n, [&](const Coalition& s) {
            Coalition swapped = s;
            bool has0 = s.contains(0), has1 = s.contains(1);
            if (has0 != has1) {
                swapped = s;
                if (has0) {
                    swapped.remove(0);
                    swapped.add(1);
                } else {
                    swapped.remove(1);
                    swapped.add(0);
                }
            }
            return game_a.evaluate(s) + game_a.evaluate(swapped);
        });
        auto phi_sym = shapley_exact(sym_game);
        symmetry.observe(std::abs(phi_sym.values[0] - phi_sym.values[1]));
    }
    return {efficiency.outcome, linearity.outcome, dummy.outcome, symmetry.outcome};
}

std::vector<BatteryOutcome> run_identity_battery(uint64_t seed, int games, int n_max) {
    Check equivalence("pair_construction_equivalence", 1e-9);
    Check order_sum("order_sum_identity", 1e-8);
    Check order_decomp("order_decomposition_identity", 1e-8);
    Check thinning("thinning_identity", 1e-8);
    Check reconstruction("reward_reconstruction", 1e-8);

    for (int g = 0; g < games; ++g) {
        CounterRng rng(CounterRng::derive(seed, {0x1d1, static_cast<uint64_t>(g)}));
        const int n = 6 + static_cast<int>(rng.next_below(std::max(1, n_max - 5)));
        const int i = static_cast<int>(rng.next_below(n));
        int j = static_cast<int>(rng.next_below(n - 1));
        if (j >= i) ++j;

        std::unique_ptr<Game> game;
        if (g % 3 == 0)
            game = std::make_unique<TermGame>(
                TermGame::random(n, 3 * n, 3, CounterRng::derive(seed, {0x1d2, (uint64_t)g})));
        else
            game = std::make_unique<TableGame>(
                TableGame::random(n, CounterRng::derive(seed, {0x1d3, (uint64_t)g})));

        // pair-as-single-player equivalence (n <= 10 per the enumeration cost)
        if (n <= 10) {
            MergedPairGame merged(*game, i, j);
            RestrictedGame no_j(*game, Coalition::of(n, {j}));
            RestrictedGame no_i(*game, Coalition::of(n, {i}));
            double construction = shapley_exact(merged).values[merged.merged_index()] -
                                  shapley_exact(no_j).values[no_j.sub_index(i)] -
                                  shapley_exact(no_i).values[no_i.sub_index(j)];
            equivalence.observe(
                std::abs(interaction_exact(*game, i, j).value - construction));
        }

        auto spectrum = order_decomposition(*game, i, j);
        order_sum.observe(
            std::abs(spectrum.interaction() - interaction_exact(*game, i, j).value));
        for (int s = 0; s <= n - 2; ++s)
            order_decomp.observe(std::abs(spectrum.per_order[s] -
                                          multi_order_interaction_exact(*game, i, j, s)));

        for (int s = 1; s <= n - 2; s += 2)
            for (int r = 0; r <= s; r += std::max(1, s / 2)) {
                double direct = dropout_interaction_exact(*game, i, j, s, r);
                double identity = 0.0;
                for (int q = 0; q <= r; ++q)
                    identity += binom(r, q) * spectrum.j_components[q];
                thinning.observe(std::abs(direct - identity));
            }

        // zeta of the pattern rewards must land back on the quad deltas
        const int t = n - 2;
        std::vector<double> inside = spectrum.pattern_rewards;
        for (int b = 0; b < t; ++b) {
            uint64_t bit = uint64_t{1} << b;
            for (uint64_t mask = 0; mask < inside.size(); ++mask)
                if (mask & bit) inside[mask] += inside[mask ^ bit];
        }
        for (uint64_t mask = 0; mask < inside.size(); ++mask) {
            Coalition s = Coalition::empty_set(n);
            for (int b = 0; b < t; ++b)
                if (mask & (uint64_t{1} << b)) s.add(spectrum.rest_players[b]);
            reconstruction.observe(std::abs(inside[mask] - quad_delta(*game, s, i, j)));
        }
    }
    return {equivalence.outcome, order_sum.outcome, order_decomp.outcome, thinning.outcome,
            reconstruction.outcome};
}

std::vector<BatteryOutcome> run_ratio_battery(uint64_t seed, int s_max, int n_max) {
    Check chain("gamma_ratio_chain_exact", 0.0);  // exact integer comparisons
    for (int s = 1; s <= s_max; ++s)
        for (int r = 1; r <= s; ++r) {
            auto ratios = gamma_ratio_chain(s, r);
            bool ok = true;
            for (int q = 1; q <= r; ++q) {
                // ratio(q) <= 1 and ratio(q) >= ratio(q+1), in exact integers
                ok = ok && binom_i64(r, q) <= binom_i64(s, q);
                if (q < r)
                    ok = ok && binom_i64(r, q) * binom_i64(s, q + 1) >=
                                   binom_i64(r, q + 1) * binom_i64(s, q);
                ok = ok && ratios[q - 1] >= 0.0 && ratios[q - 1] <= 1.0;
            }
            chain.observe(ok ? 0.0 : 1.0);
        }

    Check bound("same_sign_thinning_bound", 1e-9);
    for (int g = 0; g < 12; ++g) {
        const int n = 6 + g % std::max(1, n_max - 5);
        TermGame game =
            TermGame::random(n, 3 * n, 3, CounterRng::derive(seed, {0x5b, (uint64_t)g}), +1);
        auto spectrum = order_decomposition(game, 0, 1);
        for (int s = 1; s <= n - 2; ++s) {
            double full = spectrum.per_order[s];
            if (std::abs(full) < 1e-12) continue;
            for (int r = 0; r <= s; ++r) {
                double ratio = dropout_interaction_exact(game, 0, 1, s, r) / full;
                bound.observe(std::max(0.0, std::max(-ratio, ratio - 1.0)));
            }
        }
    }
    return {chain.outcome, bound.outcome};
}

nlohmann::json battery_report(const std::vector<BatteryOutcome>& outcomes) {
    nlohmann::json checks = nlohmann::json::array();
    bool all = true;
    for (const auto& o : outcomes) {
        checks.push_back(
            {{"name", o.name}, {"pass", o.pass}, {"worst", o.worst}, {"cases", o.cases}});
        all = all && o.pass;
    }
    return nlohmann::json{{"version", kVersion}, {"pass", all}, {"checks", checks}};
}

}  // namespace gti
