#include "gti/train.hpp"

#include <cmath>
#include <fstream>

#include "gti/errors.hpp"
#include "gti/rng.hpp"

namespace gti {

namespace {
constexpr uint64_t kShuffleStream = 0x50f1;
constexpr uint64_t kMaskStream = 0x50f2;
constexpr uint64_t kDrawStream = 0x50f3;
}  // namespace

Trainer::Trainer(Model& model, const TrainingConfig& cfg)
    : model_(&model), cfg_(cfg), score_(default_score_selector(model)) {
    if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
    if (cfg.lr_decay <= 0.0 || cfg.lr_decay > 1.0)
        throw std::invalid_argument("lr decay must lie in (0, 1]");
    if (cfg.lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (cfg.lambda > 0.0) validate_loss_config(model, cfg.loss);
    auto refs = model.param_refs();
    velocity_.resize(refs.size());
    for (size_t p = 0; p < refs.size(); ++p) velocity_[p].assign(refs[p].size, 0.0);
}

EpochMetrics Trainer::run_epoch(const Dataset& data, int epoch) {
    if (data.count == 0) throw std::invalid_argument("empty training set");
    std::vector<int> order(data.count);
    for (int i = 0; i < data.count; ++i) order[i] = i;
    CounterRng shuffle_rng(
        CounterRng::derive(cfg_.seed, {kShuffleStream, static_cast<uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    Gradients grads = model_->make_gradients();
    auto params = model_->param_refs();
    auto grefs = model_->grad_refs(grads);

    const double lr = cfg_.learning_rate * std::pow(cfg_.lr_decay, epoch);

    EpochMetrics metrics;
    metrics.epoch = epoch;
    long seen = 0;
    double acc_hits = 0.0;

    const bool bn = model_->has_batchnorm();
    for (int start = 0; start < data.count; start += cfg_.batch_size) {
        const int end = std::min(data.count, start + cfg_.batch_size);
        const int bsz = end - start;
        if (bn && bsz < 2) break;  // batch statistics undefined on singletons

        std::vector<int> idx(order.begin() + start, order.begin() + end);
        Matrix x = data.gather(idx);
        std::vector<int> labels(bsz);
        for (int r = 0; r < bsz; ++r) labels[r] = data.labels[idx[r]];

        grads.zero();
        const uint64_t mask_seed = CounterRng::derive(
            cfg_.seed, {kMaskStream, static_cast<uint64_t>(epoch), static_cast<uint64_t>(step_)});
        const uint64_t draw_seed = CounterRng::derive(
            cfg_.seed, {kDrawStream, static_cast<uint64_t>(epoch), static_cast<uint64_t>(step_)});

        Matrix logits;
        LossBreakdown loss = total_loss(*model_, x, labels, cfg_.lambda, cfg_.loss, score_,
                                        Mode::train, mask_seed, draw_seed, &grads, &logits);
        if (!std::isfinite(loss.total()))
            throw TrainingDivergedError("training loss became non-finite", step_);

        for (size_t p = 0; p < params.size(); ++p)
            for (size_t k = 0; k < params[p].size; ++k) {
                double& v = velocity_[p][k];
                v = cfg_.momentum * v - lr * grefs[p].data[k];
                params[p].data[k] += v;
            }

        acc_hits += accuracy(logits, labels) * bsz;
        metrics.cls_loss += loss.classification * bsz;
        metrics.int_loss += loss.interaction * bsz;
        step_log_.push_back({step_, loss.classification, loss.interaction, cfg_.lambda});
        ++step_;
        seen += bsz;
    }

    if (seen == 0) throw std::invalid_argument("no usable batches in the epoch");
    metrics.cls_loss /= static_cast<double>(seen);
    metrics.int_loss /= static_cast<double>(seen);
    metrics.accuracy = acc_hits / static_cast<double>(seen);
    return metrics;
}

std::vector<EpochMetrics> train(Model& model, const Dataset& data, const TrainingConfig& cfg,
                                const EpochCallback& on_epoch) {
    Trainer trainer(model, cfg);
    std::vector<EpochMetrics> metrics;
    for (int e = 0; e < cfg.epochs; ++e) {
        metrics.push_back(trainer.run_epoch(data, e));
        if (on_epoch) on_epoch(e, model, metrics.back());
    }
    return metrics;
}

void write_step_log_csv(const std::vector<StepLogRow>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write step log: " + path);
    out << "step,cls_loss,int_loss,lambda\n";
    for (const auto& row : log)
        out << row.step << "," << row.cls_loss << "," << row.int_loss << "," << row.lambda
            << "\n";
}

}  // namespace gti
