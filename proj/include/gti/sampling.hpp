#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gti/exact.hpp"
#include "gti/game.hpp"
#include "gti/normalization.hpp"

namespace gti {

/// An order bucket in units of n: contexts are drawn with |S| / n inside
/// [center - halfwidth, center + halfwidth].
struct OrderBucket {
    double center;
    double halfwidth;
};

/// Default buckets centered at 0.1n, 0.3n, ..., 0.9n with halfwidth 0.1n.
std::vector<OrderBucket> default_order_buckets();

struct SamplerConfig {
    long sample_count = 500;  // contexts per estimate
    uint64_t seed = 0;
    std::vector<OrderBucket> order_buckets = default_order_buckets();
    int pair_budget = 80;    // (i,j) pairs per image
    int image_budget = 10;   // images per aggregate
    InteractionWeighting weighting = InteractionWeighting::shapley;
};

struct AttributionEstimate {
    int player = 0;
    double value = 0.0;
    double std_err = 0.0;
    long m = 0;
    uint64_t seed = 0;
};

struct BucketEstimate {
    double value = 0.0;
    double std_err = 0.0;
    long m = 0;
    uint64_t seed = 0;
    OrderBucket bucket{0.0, 0.0};
    // How a drawn real-valued order is turned into a context size.
    std::string size_rule = "round-nearest-clamp[0,n-2]";
};

struct InstabilityReport {
    std::vector<double> per_image;  // relative spread per image
    double mean = 0.0;
    long sample_count = 0;
};

/// Shapley value of one player by permutation-prefix sampling: each draw
/// picks a uniform position for the player and a uniform predecessor set of
/// that size, then averages the marginal contribution. Unbiased; identical
/// (game, i, config) inputs give bit-identical results.
AttributionEstimate shapley_sampled(const Game& game, int i, const SamplerConfig& config);

/// Pairwise interaction by sampling. Shapley weighting draws the context size
/// uniformly from {0..n-2} and then a uniform subset of that size, matching
/// the exact weights; Banzhaf weighting includes each unit independently with
/// probability one half.
InteractionEstimate interaction_sampled(const Game& game, int i, int j,
                                        const SamplerConfig& config);

/// I^(s) around a bucket: each draw samples the order uniformly from the
/// bucket (in units of n), rounds to the nearest integer size, clamps to
/// [0, n-2], then draws a uniform context of that size.
BucketEstimate multi_order_interaction_sampled(const Game& game, int i, int j,
                                               const OrderBucket& bucket,
                                               const SamplerConfig& config);

/// Mean absolute sampled interaction over sampled pairs and images, divided
/// by the normalization term: E_image[E_(i,j)[|I(i,j)|]] / Y. Images beyond
/// config.image_budget are ignored; pairs are drawn without replacement.
double aggregate_strength(const std::vector<const Game*>& images, const SamplerConfig& config,
                          const NormalizationTerm& norm);

/// Relative spread of repeated per-image strength estimates:
/// E_{u != v} |I^(u) - I^(v)| / E_w |I^(w)|, averaged over images. The pair
/// sample is held fixed per image; contexts are redrawn per repeat.
InstabilityReport instability(const std::vector<const Game*>& images,
                              const SamplerConfig& config, int repeats);

}  // namespace gti
