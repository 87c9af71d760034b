#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gti/errors.hpp"
#include "gti/experiments.hpp"

using namespace gti;
namespace fs = std::filesystem;

namespace {

// tiny 8x8 3-class setup so experiment wiring tests stay fast
ExperimentSpec tiny_spec(ExperimentKind kind, const std::string& out) {
    ExperimentSpec spec;
    spec.kind = kind;
    spec.output_dir = out;
    spec.seed = 11;
    spec.model.arch = "mlp_small";
    spec.model.img_h = 8;
    spec.model.img_w = 8;
    spec.model.classes = 3;
    spec.train_per_class = 12;
    spec.test_per_class = 6;
    spec.training.epochs = 3;
    spec.training.batch_size = 9;
    spec.training.learning_rate = 0.05;
    spec.sampler.sample_count = 20;
    spec.sampler.pair_budget = 10;
    spec.sampler.image_budget = 3;
    spec.grid_rows = 4;
    spec.grid_cols = 4;
    spec.curve_every = 0;
    return spec;
}

std::string tmp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir.string();
}

}  // namespace

TEST_SUITE_BEGIN("experiments");

TEST_CASE("model presets expose the declared sites") {
    ModelSpec spec;
    spec.arch = "mlp";
    Model m = build_model(spec, 1);
    CHECK(m.input_dim() == 784);
    CHECK(m.act_dim(site_act_index(m, spec)) == 256);

    spec.arch = "mlp_small";
    spec.site_ordinal = 1;
    Model s = build_model(spec, 1);
    CHECK(s.act_dim(site_act_index(s, spec)) == 32);

    spec.arch = "bn_mlp";
    spec.site_ordinal = 0;
    Model b = build_model(spec, 1);
    CHECK(b.has_batchnorm());

    spec.arch = "patch";
    Model p = build_model(spec, 1);
    CHECK(p.act_dim(site_act_index(p, spec)) == 16 * 8);

    spec.arch = "nope";
    CHECK_THROWS_AS(build_model(spec, 1), std::invalid_argument);
}

TEST_CASE("dropout insertion keeps the site activations identical at init") {
    ModelSpec with;
    with.arch = "mlp_small";
    with.dropout_rate = 0.5;
    ModelSpec without = with;
    without.dropout_rate = 0.0;
    Model a = build_model(with, 9);
    Model b = build_model(without, 9);
    // same seed, same parameters: the dropout layer carries none
    CounterRng rng(4);
    Matrix x(2, 784);
    for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(0.0, 1.0);
    auto fa = a.forward(x, Mode::eval);
    auto fb = b.forward(x, Mode::eval);
    for (size_t i = 0; i < fa.out().size(); ++i)
        REQUIRE(fa.out().data()[i] == fb.out().data()[i]);
}

TEST_CASE("planted neighbor interaction lights up exactly the two grids") {
    auto part = grid_partition(8, 8, 4, 4);
    // only grids 5 and 6 (row 1, cols 1 and 2) interact
    FunctionGame game(16, [](const Coalition& s) {
        return s.contains(5) && s.contains(6) ? 1.0 : 0.0;
    });
    SamplerConfig cfg;
    cfg.sample_count = 25;
    auto map = neighbor_heatmap(game, part, cfg);
    REQUIRE(!map.degenerate);
    for (int g = 0; g < 16; ++g) {
        if (g == 5 || g == 6)
            CHECK(map.normalized[g] == doctest::Approx(1.0));
        else
            CHECK(map.normalized[g] == doctest::Approx(0.0));
    }
    // interior grid averaged over 4 neighbors
    CHECK(map.raw[5] == doctest::Approx(0.25));
    // corner grid 0 has two neighbors, edge grid 1 has three
    CHECK(map.raw[0] == doctest::Approx(0.0));
}

TEST_CASE("constant games yield a degenerate all-zero heatmap") {
    auto part = grid_partition(8, 8, 4, 4);
    FunctionGame game(16, [](const Coalition&) { return 0.5; });
    SamplerConfig cfg;
    cfg.sample_count = 5;
    auto map = neighbor_heatmap(game, part, cfg);
    CHECK(map.degenerate);
    for (double v : map.normalized) CHECK(v == 0.0);
}

TEST_CASE("overfit experiment refuses a zero mislabel fraction") {
    auto spec = tiny_spec(ExperimentKind::overfit_table, "");
    spec.mislabel_fraction = 0.0;
    CHECK_THROWS_AS(run_overfit_table(spec), std::invalid_argument);
}

TEST_CASE("overfit experiment raises when the budget is too small") {
    auto spec = tiny_spec(ExperimentKind::overfit_table, "");
    spec.mislabel_fraction = 0.1;
    spec.epoch_budget = 1;  // cannot reach near-zero loss in one epoch
    CHECK_THROWS_AS(run_overfit_table(spec), BudgetExceededError);
}

TEST_CASE("dropout compare writes manifest, curves and results") {
    std::string dir = tmp_dir("gti_exp_compare");
    auto spec = tiny_spec(ExperimentKind::dropout_compare, dir);
    auto result = run_dropout_compare(spec);
    CHECK(result.with_dropout_final >= 0.0);
    CHECK(result.without_dropout_final >= 0.0);
    CHECK(fs::exists(fs::path(dir) / "manifest.json"));
    CHECK(fs::exists(fs::path(dir) / "results.csv"));
    std::ifstream manifest(fs::path(dir) / "manifest.json");
    nlohmann::json j = nlohmann::json::parse(manifest);
    CHECK(j["kind"] == "dropout_compare");
    CHECK(j["seed"] == 11);
    CHECK(j["sampler"]["m"] == 20);
    fs::remove_all(dir);
}

TEST_CASE("lambda sweep records every row and the zero row matches baseline") {
    std::string dir = tmp_dir("gti_exp_sweep");
    auto spec = tiny_spec(ExperimentKind::lambda_sweep, dir);
    spec.lambdas = {0.0, 0.5};
    auto result = run_lambda_sweep(spec);
    REQUIRE(result.rows.size() == 2);
    CHECK(!result.rows[0].failed);
    CHECK(!result.rows[1].failed);
    CHECK(result.rows[0].parameter == 0.0);
    CHECK(fs::exists(fs::path(dir) / "results.csv"));

    // the lambda = 0 row is bit-identical to an independent baseline run
    auto again = tiny_spec(ExperimentKind::lambda_sweep, "");
    again.lambdas = {0.0};
    auto baseline = run_lambda_sweep(again);
    CHECK(baseline.rows[0].final_strength == result.rows[0].final_strength);
    CHECK(baseline.rows[0].test_accuracy == result.rows[0].test_accuracy);
    fs::remove_all(dir);
}

TEST_CASE("banzhaf correlation needs at least three checkpoints") {
    auto spec = tiny_spec(ExperimentKind::banzhaf_correlation, "");
    spec.training.epochs = 2;
    spec.curve_every = 1;
    CHECK_THROWS_AS(run_banzhaf_correlation(spec), InsufficientDataError);
}

TEST_CASE("instability study produces one value per sampling number") {
    auto spec = tiny_spec(ExperimentKind::instability_study, "");
    spec.m_grid = {10, 40};
    spec.instability_repeats = 3;
    auto result = run_instability_study(spec);
    REQUIRE(result.instability.size() == 2);
    CHECK(result.instability[0] >= 0.0);
    CHECK(result.instability[1] >= 0.0);
}

TEST_CASE("aggregate strength agrees with a ten-fold oversampled rerun") {
    // high-sample self-oracle on a briefly trained snapshot
    auto spec = tiny_spec(ExperimentKind::dropout_compare, "");
    Dataset data = experiment_train_data(spec);
    Model model = build_model(spec.model, spec.seed);
    TrainingConfig cfg = spec.training;
    train(model, data, cfg);

    const int site = site_act_index(model, spec.model);
    std::vector<int> analyzed = {0, 1, 2, 3};
    SamplerConfig base;
    base.sample_count = 300;
    base.pair_budget = 60;
    base.image_budget = 4;
    base.seed = 5;
    double coarse =
        activation_strength(model, site, data, analyzed, base, NormalizationMode::global);
    SamplerConfig fine = base;
    fine.sample_count = 3000;
    double reference =
        activation_strength(model, site, data, analyzed, fine, NormalizationMode::global);
    REQUIRE(reference > 0.0);
    CHECK(std::abs(coarse - reference) / reference < 0.1);
}

TEST_CASE("a rerun from the same spec reproduces the results bit-exactly") {
    auto spec = tiny_spec(ExperimentKind::dropout_compare, "");
    auto first = run_dropout_compare(spec);
    auto second = run_dropout_compare(spec);
    CHECK(first.with_dropout_final == second.with_dropout_final);
    CHECK(first.without_dropout_final == second.without_dropout_final);
    CHECK(first.with_test_accuracy == second.with_test_accuracy);
}

TEST_CASE("the strongest lambda suppresses harder than dropout 0.5") {
    // single-seed cross comparison at the calibrated desk scale
    ExperimentSpec spec;
    spec.seed = 1;
    spec.model.arch = "mlp_small";
    spec.train_per_class = 60;
    spec.test_per_class = 5;
    spec.training.epochs = 25;
    spec.training.learning_rate = 0.05;
    spec.training.batch_size = 32;
    spec.training.seed = 1;
    spec.sampler.sample_count = 150;
    spec.sampler.pair_budget = 40;
    spec.sampler.image_budget = 8;
    spec.sampler.seed = 1;
    spec.curve_every = 0;

    spec.kind = ExperimentKind::lambda_sweep;
    spec.lambdas = {3.0};
    auto sweep = run_lambda_sweep(spec);
    REQUIRE(!sweep.rows[0].failed);

    spec.kind = ExperimentKind::dropout_compare;
    spec.model.dropout_rate = 0.5;
    auto compare = run_dropout_compare(spec);

    CHECK(sweep.rows[0].final_strength < compare.with_dropout_final);
}

TEST_CASE("train/test splits are disjoint deterministic slices") {
    auto spec = tiny_spec(ExperimentKind::lambda_sweep, "");
    Dataset train_a = experiment_train_data(spec);
    Dataset train_b = experiment_train_data(spec);
    CHECK(train_a.pixels == train_b.pixels);
    Dataset test = experiment_test_data(spec);
    CHECK(test.count == spec.test_per_class * spec.model.classes);
    CHECK(test.pixels != train_a.pixels);
}

TEST_SUITE_END();
