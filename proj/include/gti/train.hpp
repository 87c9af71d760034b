#pragma once

#include <functional>
#include <vector>

#include "gti/dataset.hpp"
#include "gti/interaction_loss.hpp"
#include "gti/network.hpp"

namespace gti {

struct TrainingConfig {
    double learning_rate = 0.1;
    double lr_decay = 1.0;  // multiplicative per-epoch decay; 1 = constant
    double momentum = 0.9;
    int batch_size = 32;
    int epochs = 20;
    uint64_t seed = 0;
    double lambda = 0.0;  // interaction-loss weight; 0 disables the track
    LossConfig loss;
    double mislabel_fraction = 0.0;  // consumed by experiment runners
};

struct EpochMetrics {
    int epoch = 0;
    double cls_loss = 0.0;
    double int_loss = 0.0;
    double accuracy = 0.0;
};

struct StepLogRow {
    long step;
    double cls_loss;
    double int_loss;
    double lambda;
};

/// Plain SGD with momentum over a model's parameters, stepping on the
/// gradients accumulated per mini-batch. Fully deterministic per seed: data
/// order, dropout masks and quad draws all derive from (seed, epoch, step).
class Trainer {
public:
    Trainer(Model& model, const TrainingConfig& cfg);

    EpochMetrics run_epoch(const Dataset& data, int epoch);

    long step_count() const { return step_; }
    const std::vector<StepLogRow>& step_log() const { return step_log_; }
    ScoreSelector score_selector() const { return score_; }

private:
    Model* model_;
    TrainingConfig cfg_;
    ScoreSelector score_;
    std::vector<std::vector<double>> velocity_;
    long step_ = 0;
    std::vector<StepLogRow> step_log_;
};

using EpochCallback = std::function<void(int epoch, const Model& model, const EpochMetrics&)>;

/// Run the configured number of epochs; the callback fires after each one
/// (checkpointing, curve capture). Returns per-epoch metrics.
std::vector<EpochMetrics> train(Model& model, const Dataset& data, const TrainingConfig& cfg,
                                const EpochCallback& on_epoch = nullptr);

/// Write the per-step loss components as CSV: step,cls_loss,int_loss,lambda.
void write_step_log_csv(const std::vector<StepLogRow>& log, const std::string& path);

}  // namespace gti
