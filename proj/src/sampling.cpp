#include "gti/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "gti/errors.hpp"
#include "gti/rng.hpp"

namespace gti {

namespace {

// Stream tags so every estimator call owns an independent substream of the
// configured seed. Values are arbitrary but frozen: changing them changes
// every sampled result.
constexpr uint64_t kStreamShapley = 0x5a01;
constexpr uint64_t kStreamInteraction = 0x5a02;
constexpr uint64_t kStreamOrder = 0x5a03;
constexpr uint64_t kStreamPairs = 0x5a04;
constexpr uint64_t kStreamAggregate = 0x5a05;

struct RunningMean {
    double mean = 0.0;
    double m2 = 0.0;
    long count = 0;

    void add(double x) {
        ++count;
        double d = x - mean;
        mean += d / count;
        m2 += d * (x - mean);
    }

    double std_err() const {
        if (count < 2) return 0.0;
        return std::sqrt(m2 / (count - 1) / count);
    }
};

/// Uniform subset of `size` players from the pool (all players except the
/// listed exclusions), via partial Fisher-Yates over the pool.
Coalition draw_sized_context(int n, const std::vector<int>& pool, int size, CounterRng& rng) {
    Coalition s = Coalition::empty_set(n);
    if (size == 0) return s;
    // local copy: the pool order must not leak between draws
    std::vector<int> scratch = pool;
    for (int k = 0; k < size; ++k) {
        int j = k + static_cast<int>(rng.next_below(static_cast<uint64_t>(scratch.size() - k)));
        std::swap(scratch[k], scratch[j]);
        s.add(scratch[k]);
    }
    return s;
}

std::vector<int> pool_excluding(int n, std::initializer_list<int> excluded) {
    std::vector<int> pool;
    pool.reserve(n);
    for (int k = 0; k < n; ++k)
        if (std::find(excluded.begin(), excluded.end(), k) == excluded.end()) pool.push_back(k);
    return pool;
}

void check_pair(const Game& game, int i, int j) {
    game.players().check_index(i);
    game.players().check_index(j);
    if (i == j) throw std::invalid_argument("interaction needs two distinct players");
}

}  // namespace

std::vector<OrderBucket> default_order_buckets() {
    std::vector<OrderBucket> buckets;
    for (double c = 0.1; c < 1.0; c += 0.2) buckets.push_back({c, 0.1});
    return buckets;
}

AttributionEstimate shapley_sampled(const Game& game, int i, const SamplerConfig& config) {
    game.players().check_index(i);
    if (config.sample_count < 1) throw std::invalid_argument("sample count must be >= 1");
    const int n = game.n_players();
    CounterRng rng(CounterRng::derive(config.seed, {kStreamShapley, static_cast<uint64_t>(i)}));
    const std::vector<int> pool = pool_excluding(n, {i});

    RunningMean stat;
    for (long draw = 0; draw < config.sample_count; ++draw) {
        int prefix_size = rng.uniform_int(0, n - 1);
        Coalition s = draw_sized_context(n, pool, prefix_size, rng);
        stat.add(game.evaluate(s.with(i)) - game.evaluate(s));
    }

    AttributionEstimate est;
    est.player = i;
    est.value = stat.mean;
    est.std_err = stat.std_err();
    est.m = config.sample_count;
    est.seed = config.seed;
    return est;
}

InteractionEstimate interaction_sampled(const Game& game, int i, int j,
                                        const SamplerConfig& config) {
    check_pair(game, i, j);
    if (config.sample_count < 1) throw std::invalid_argument("sample count must be >= 1");
    const int n = game.n_players();
    CounterRng rng(CounterRng::derive(
        config.seed, {kStreamInteraction, static_cast<uint64_t>(i), static_cast<uint64_t>(j)}));
    const std::vector<int> pool = pool_excluding(n, {i, j});

    RunningMean stat;
    for (long draw = 0; draw < config.sample_count; ++draw) {
        Coalition s = Coalition::empty_set(n);
        if (config.weighting == InteractionWeighting::shapley) {
            int size = rng.uniform_int(0, n - 2);
            s = draw_sized_context(n, pool, size, rng);
        } else {
            for (int k : pool)
                if (rng.bernoulli(0.5)) s.add(k);
        }
        stat.add(quad_delta(game, s, i, j));
    }

    InteractionEstimate est;
    est.i = i;
    est.j = j;
    est.value = stat.mean;
    est.std_err = stat.std_err();
    est.m = config.sample_count;
    est.seed = config.seed;
    est.exact = false;
    est.weighting = config.weighting;
    return est;
}

BucketEstimate multi_order_interaction_sampled(const Game& game, int i, int j,
                                               const OrderBucket& bucket,
                                               const SamplerConfig& config) {
    check_pair(game, i, j);
    const int n = game.n_players();
    const double max_frac = static_cast<double>(n - 2) / n;
    if (bucket.halfwidth < 0.0 || bucket.center + bucket.halfwidth < 0.0 ||
        bucket.center - bucket.halfwidth > max_frac)
        throw std::invalid_argument("order bucket lies outside [0, n-2]");

    CounterRng rng(CounterRng::derive(
        config.seed, {kStreamOrder, static_cast<uint64_t>(i), static_cast<uint64_t>(j)}));
    const std::vector<int> pool = pool_excluding(n, {i, j});

    RunningMean stat;
    for (long draw = 0; draw < config.sample_count; ++draw) {
        double frac = rng.uniform(bucket.center - bucket.halfwidth,
                                  bucket.center + bucket.halfwidth);
        int size = static_cast<int>(std::lround(frac * n));
        size = std::clamp(size, 0, n - 2);
        Coalition s = draw_sized_context(n, pool, size, rng);
        stat.add(quad_delta(game, s, i, j));
    }

    BucketEstimate est;
    est.value = stat.mean;
    est.std_err = stat.std_err();
    est.m = config.sample_count;
    est.seed = config.seed;
    est.bucket = bucket;
    return est;
}

namespace {

/// Fixed pair sample for one image, drawn without replacement among i < j.
std::vector<std::pair<int, int>> draw_pairs(int n, int budget, uint64_t key) {
    const long all = static_cast<long>(n) * (n - 1) / 2;
    const long want = std::min<long>(budget, all);
    CounterRng rng(key);
    std::vector<std::pair<int, int>> pairs;
    if (want == all) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
        return pairs;
    }
    std::vector<char> used(static_cast<size_t>(all), 0);
    while (static_cast<long>(pairs.size()) < want) {
        int i = rng.uniform_int(0, n - 1);
        int j = rng.uniform_int(0, n - 1);
        if (i == j) continue;
        if (i > j) std::swap(i, j);
        long flat = static_cast<long>(i) * (2 * n - i - 1) / 2 + (j - i - 1);
        if (used[flat]) continue;
        used[flat] = 1;
        pairs.push_back({i, j});
    }
    return pairs;
}

double image_strength(const Game& game, const std::vector<std::pair<int, int>>& pairs,
                      const SamplerConfig& config, uint64_t context_seed) {
    double acc = 0.0;
    for (size_t p = 0; p < pairs.size(); ++p) {
        SamplerConfig per_pair = config;
        per_pair.seed = CounterRng::derive(context_seed, {kStreamAggregate, p});
        acc += std::abs(
            interaction_sampled(game, pairs[p].first, pairs[p].second, per_pair).value);
    }
    return acc / static_cast<double>(pairs.size());
}

}  // namespace

double aggregate_strength(const std::vector<const Game*>& images, const SamplerConfig& config,
                          const NormalizationTerm& norm) {
    if (images.empty()) throw std::invalid_argument("aggregate strength needs images");
    for (const Game* g : images)
        if (g->n_players() < 2)
            throw std::invalid_argument("aggregate strength needs at least two players");
    const int count = std::min<int>(static_cast<int>(images.size()), config.image_budget);
    double acc = 0.0;
    for (int img = 0; img < count; ++img) {
        const Game& game = *images[img];
        auto pairs =
            draw_pairs(game.n_players(), config.pair_budget,
                       CounterRng::derive(config.seed, {kStreamPairs, static_cast<uint64_t>(img)}));
        double raw = image_strength(
            game, pairs, config,
            CounterRng::derive(config.seed, {kStreamAggregate, static_cast<uint64_t>(img)}));
        acc += raw / norm.for_image(img);
    }
    return acc / count;
}

InstabilityReport instability(const std::vector<const Game*>& images,
                              const SamplerConfig& config, int repeats) {
    if (repeats < 2) throw std::invalid_argument("instability needs at least 2 repeats");
    if (images.empty()) throw std::invalid_argument("instability needs images");
    const int count = std::min<int>(static_cast<int>(images.size()), config.image_budget);

    InstabilityReport report;
    report.sample_count = config.sample_count;
    for (int img = 0; img < count; ++img) {
        const Game& game = *images[img];
        auto pairs =
            draw_pairs(game.n_players(), config.pair_budget,
                       CounterRng::derive(config.seed, {kStreamPairs, static_cast<uint64_t>(img)}));
        std::vector<double> estimates(repeats);
        for (int u = 0; u < repeats; ++u)
            estimates[u] = image_strength(
                game, pairs, config,
                CounterRng::derive(config.seed, {kStreamAggregate, static_cast<uint64_t>(img),
                                                 static_cast<uint64_t>(u)}));

        double num = 0.0;
        int num_count = 0;
        for (int u = 0; u < repeats; ++u)
            for (int v = u + 1; v < repeats; ++v) {
                num += std::abs(estimates[u] - estimates[v]);
                ++num_count;
            }
        num /= num_count;
        double den = 0.0;
        for (double e : estimates) den += std::abs(e);
        den /= repeats;
        if (den == 0.0)
            throw DegenerateInstabilityError(
                "instability undefined: all repeated estimates are zero");
        report.per_image.push_back(num / den);
    }

    for (double v : report.per_image) report.mean += v;
    report.mean /= report.per_image.size();
    return report;
}

}  // namespace gti
