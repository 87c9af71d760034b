#pragma once

#include <cstdint>
#include <vector>

#include "gti/game.hpp"
#include "gti/model_games.hpp"
#include "gti/network.hpp"
#include "gti/rng.hpp"

namespace gti {

struct LossConfig {
    double alpha = 0.05;     // |A| = |B| = ceil(alpha * n), at least 1
    int pairs_per_step = 1;  // (A, B) draws per training step
    int site = 0;            // act index of the penalized activations
};

struct QuadSets {
    Coalition a, b, s;
};

/// Throws when the site has too few units for two disjoint batches plus a
/// nonempty context (n >= 2 * ceil(alpha n) + 1).
void validate_loss_config(const Model& model, const LossConfig& cfg);

int quad_batch_size(int n_units, double alpha);

/// Draw the unit batches A and B (disjoint, uniform) and the context S from
/// the remainder: first a uniform sampling rate in [0, 1], then a Bernoulli
/// draw per unit at that rate.
QuadSets sample_quad(int n_units, const LossConfig& cfg, CounterRng& rng);

/// Same with the context rate pinned (the second stage of the rule).
QuadSets sample_quad_at_rate(int n_units, const LossConfig& cfg, double rate, CounterRng& rng);

/// Mean |I(i,j)| over unordered pairs by full enumeration. Oracle only,
/// never part of a training step; n <= 14.
double exact_interaction_loss(const Game& site_game);

/// One batched loss evaluation: mean over draws and batch rows of
/// Delta f(S,A,B)^2, computed with four masked tail passes from cfg.site on
/// the interaction track (zero baseline, batch-norm statistics untouched).
/// When grads is non-null, weight * d(loss)/d(params) is accumulated,
/// including the path through the layers below the site.
double approx_interaction_loss(const Model& model, const ForwardResult& fr,
                               const std::vector<int>& labels, const LossConfig& cfg,
                               ScoreSelector sel, uint64_t draw_seed, double weight,
                               Gradients* grads);

struct LossBreakdown {
    double classification = 0.0;
    double interaction = 0.0;
    double lambda = 0.0;
    double total() const { return classification + lambda * interaction; }
};

/// Classification loss plus lambda times the approximated interaction loss.
/// lambda = 0 short-circuits: no quad passes run at all. Gradients for both
/// tracks are accumulated into grads when given; logits_out, when non-null,
/// receives the classification-pass output.
LossBreakdown total_loss(const Model& model, const Matrix& x, const std::vector<int>& labels,
                         double lambda, const LossConfig& cfg, ScoreSelector sel, Mode mode,
                         uint64_t mask_seed, uint64_t draw_seed, Gradients* grads,
                         Matrix* logits_out = nullptr);

}  // namespace gti
