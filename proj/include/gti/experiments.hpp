#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "gti/dataset.hpp"
#include "gti/model_games.hpp"
#include "gti/network.hpp"
#include "gti/normalization.hpp"
#include "gti/sampling.hpp"
#include "gti/train.hpp"

namespace gti {

enum class ExperimentKind {
    verify_axioms,
    overfit_table,
    dropout_compare,
    lambda_sweep,
    dropout_rate_sweep,
    banzhaf_correlation,
    heatmap,
    instability_study,
};

const char* to_string(ExperimentKind kind);

/// Architecture presets. The dropout layer (when rate > 0) sits right after
/// the ReLU named by site_ordinal, which is also where the interaction loss
/// applies and where activation players are measured.
struct ModelSpec {
    std::string arch = "mlp_small";  // mlp | mlp_small | patch | bn_mlp
    int img_h = 28, img_w = 28;
    int classes = 10;
    double dropout_rate = 0.0;
    int site_ordinal = 0;
};

Model build_model(const ModelSpec& spec, uint64_t seed);

/// Act index of the measurement/loss site for a model built from `spec`.
int site_act_index(const Model& model, const ModelSpec& spec);

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::verify_axioms;
    std::string output_dir;
    uint64_t seed = 0;

    // data: synthetic image classes by default, or an IDX pair
    std::string idx_images, idx_labels;
    int train_per_class = 60;
    int test_per_class = 20;

    ModelSpec model;
    TrainingConfig training;
    SamplerConfig sampler;

    // experiment-specific knobs
    double mislabel_fraction = 0.05;
    double loss_threshold = 0.01;  // "almost zero" training loss
    int epoch_budget = 300;
    std::vector<double> lambdas = {0.0, 1.0, 10.0};
    std::vector<double> dropout_rates = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<long> m_grid = {50, 200, 500};
    int instability_repeats = 5;
    int grid_rows = 7, grid_cols = 7;
    int heatmap_image = 0;
    int curve_every = 1;  // checkpoint cadence for per-epoch curves
};

nlohmann::json spec_to_json(const ExperimentSpec& spec);

/// Every runner writes <output_dir>/manifest.json (spec + seed + version)
/// before any result file, so outputs are reproducible from the manifest.
void write_manifest(const ExperimentSpec& spec);

/// Simple named-column table, serialized as CSV.
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    void write_csv(const std::string& path) const;
};

Dataset experiment_train_data(const ExperimentSpec& spec);
Dataset experiment_test_data(const ExperimentSpec& spec);

/// Mean normalized interaction strength over activation players at the site,
/// for the listed samples. Normalization mode per the experiment: global
/// margin over the provided dataset, or per-image margins of the analyzed
/// samples.
double activation_strength(const Model& model, int site_act, const Dataset& data,
                           const std::vector<int>& indices, const SamplerConfig& sampler,
                           NormalizationMode norm_mode);

// ---- experiment results ----

struct OverfitResult {
    double clean_strength = 0.0;
    double mislabeled_strength = 0.0;
    int epochs_used = 0;
    double final_loss = 0.0;
    bool direction_holds = false;  // mislabeled > clean
};

/// Train to (almost) zero loss on partially mislabeled data, then compare
/// grid-player interaction strengths of mislabeled vs clean samples.
OverfitResult run_overfit_table(const ExperimentSpec& spec);

struct DropoutCompareResult {
    double with_dropout_final = 0.0;
    double without_dropout_final = 0.0;
    double with_test_accuracy = 0.0;
    double without_test_accuracy = 0.0;
    ResultTable curves;  // epoch, strength_without, strength_with
};

DropoutCompareResult run_dropout_compare(const ExperimentSpec& spec);

struct SweepRow {
    double parameter = 0.0;  // lambda or dropout rate
    double final_strength = 0.0;
    double test_accuracy = 0.0;
    bool failed = false;  // diverged runs are recorded, not fatal
};

struct SweepResult {
    std::vector<SweepRow> rows;
    ResultTable table;
};

SweepResult run_lambda_sweep(const ExperimentSpec& spec);
SweepResult run_dropout_rate_sweep(const ExperimentSpec& spec);

struct BanzhafCorrelationResult {
    double pearson = 0.0;
    bool degenerate = false;  // constant series: correlation undefined
    ResultTable curves;       // epoch, shapley_strength, banzhaf_strength
};

BanzhafCorrelationResult run_banzhaf_correlation(const ExperimentSpec& spec);

struct HeatmapResult {
    int rows = 0, cols = 0;
    std::vector<double> raw;         // mean |I| with existing 4-neighbors
    std::vector<double> normalized;  // min-max to [0,1]; zeros when degenerate
    bool degenerate = false;
};

/// Core heatmap computation over any game whose players form the grid.
HeatmapResult neighbor_heatmap(const Game& game, const GridPartition& part,
                               const SamplerConfig& sampler);

HeatmapResult run_heatmap(const ExperimentSpec& spec);

void write_heatmap_csv(const HeatmapResult& map, const std::string& path);
void write_heatmap_pgm(const HeatmapResult& map, const std::string& path);

struct InstabilityStudyResult {
    std::vector<long> m_grid;
    std::vector<double> instability;  // aligned with m_grid
};

/// Instability of the sampled strength against the sampling number, on a
/// freshly trained toy model.
InstabilityStudyResult run_instability_study(const ExperimentSpec& spec);

// ---- verification battery (axioms and identities on seeded games) ----

struct BatteryOutcome {
    std::string name;
    bool pass = false;
    double worst = 0.0;  // worst observed deviation (or ratio excess)
    long cases = 0;
};

/// Shapley axioms on seeded random table games: efficiency, linearity,
/// dummy and symmetry, each within 1e-9.
std::vector<BatteryOutcome> run_axiom_battery(uint64_t seed, int games, int n_min, int n_max);

/// Definition equivalence and the decomposition identities on seeded games.
std::vector<BatteryOutcome> run_identity_battery(uint64_t seed, int games, int n_max);

/// Gamma ratio chains for all 1 <= r <= s <= s_max, compared in exact
/// integer arithmetic; plus the same-sign thinning ratio bound.
std::vector<BatteryOutcome> run_ratio_battery(uint64_t seed, int s_max, int n_max);

nlohmann::json battery_report(const std::vector<BatteryOutcome>& outcomes);

}  // namespace gti
