#include "gti/exact.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>

#include "gti/combinat.hpp"
#include "gti/errors.hpp"

namespace gti {

namespace {

void check_exact_size(const Game& game, int limit, const char* what) {
    if (game.n_players() > limit)
        throw SizeLimitError(std::string(what) + " enumerates all coalitions and refuses n > " +
                             std::to_string(limit) + " (got n = " +
                             std::to_string(game.n_players()) + ")");
}

void check_pair(const Game& game, int i, int j) {
    game.players().check_index(i);
    game.players().check_index(j);
    if (i == j) throw std::invalid_argument("interaction needs two distinct players");
}

/// Enumeration context for one (i,j) pair: the players of N\{i,j} are
/// compressed to bits 0..n-3 so subset loops run over plain integers.
struct PairContext {
    int n;
    int i, j;
    std::vector<int> rest;

    PairContext(const Game& game, int i_, int j_) : n(game.n_players()), i(i_), j(j_) {
        check_pair(game, i, j);
        rest.reserve(n - 2);
        for (int k = 0; k < n; ++k)
            if (k != i && k != j) rest.push_back(k);
    }

    int rest_size() const { return n - 2; }

    Coalition expand(uint64_t compressed) const {
        Coalition c = Coalition::empty_set(n);
        uint64_t w = compressed;
        while (w) {
            c.add(rest[std::countr_zero(w)]);
            w &= w - 1;
        }
        return c;
    }
};

/// Quad deltas for every context mask over rest players: 2^(n-2) entries.
std::vector<double> all_quad_deltas(const Game& game, const PairContext& ctx) {
    std::vector<double> deltas(size_t{1} << ctx.rest_size());
    for (uint64_t mask = 0; mask < deltas.size(); ++mask)
        deltas[mask] = quad_delta(game, ctx.expand(mask), ctx.i, ctx.j);
    return deltas;
}

/// In-place Moebius inversion over the subset lattice: on return,
/// a[mask] = sum over subsets T of mask of (-1)^(|mask|-|T|) input[T],
/// i.e. the pattern rewards when the input is the quad-delta table.
void moebius_in_place(std::vector<double>& a, int bits) {
    for (int b = 0; b < bits; ++b) {
        uint64_t bit = uint64_t{1} << b;
        for (uint64_t mask = 0; mask < a.size(); ++mask)
            if (mask & bit) a[mask] -= a[mask ^ bit];
    }
}

/// Inverse of the above (zeta transform): a[mask] = sum over subsets.
void zeta_in_place(std::vector<double>& a, int bits) {
    for (int b = 0; b < bits; ++b) {
        uint64_t bit = uint64_t{1} << b;
        for (uint64_t mask = 0; mask < a.size(); ++mask)
            if (mask & bit) a[mask] += a[mask ^ bit];
    }
}

double attribution_scale(double reward, const std::vector<double>& values) {
    double scale = std::abs(reward);
    for (double v : values) scale = std::max(scale, std::abs(v));
    return std::max(1.0, scale);
}

AttributionVector attribution_by_enumeration(const Game& game, AttributionKind kind) {
    check_exact_size(game, kMaxExactPlayers, "exact attribution");
    const int n = game.n_players();
    const uint64_t full = (n == 64) ? ~uint64_t{0} : (uint64_t{1} << n) - 1;

    // One pass over all 2^n coalitions, then n * 2^(n-1) table lookups.
    std::vector<double> fv(size_t{1} << n);
    for (uint64_t mask = 0; mask <= full; ++mask)
        fv[mask] = game.evaluate(Coalition::from_mask(n, mask));

    std::vector<double> size_weight(n);  // by |S|, pool N\{i}
    for (int s = 0; s <= n - 1; ++s)
        size_weight[s] = (kind == AttributionKind::shapley) ? shapley_weight(s, n - 1)
                                                            : std::ldexp(1.0, -(n - 1));

    AttributionVector out{std::vector<double>(n, 0.0), kind, game.id()};
    for (int i = 0; i < n; ++i) {
        const uint64_t bit = uint64_t{1} << i;
        double phi = 0.0;
        for_each_submask(full & ~bit, [&](uint64_t s) {
            phi += size_weight[std::popcount(s)] * (fv[s | bit] - fv[s]);
        });
        out.values[i] = phi;
    }

    if (kind == AttributionKind::shapley) {
        // Efficiency must hold up to rounding; a larger gap is a bug.
        double reward = fv[full] - fv[0];
        if (std::abs(out.sum() - reward) > 1e-9 * attribution_scale(reward, out.values))
            throw InternalConsistencyError("Shapley efficiency violated in exact enumeration");
    }
    return out;
}

}  // namespace

double OrderSpectrum::interaction() const {
    double acc = 0.0;
    for (double v : per_order) acc += v;
    return acc / static_cast<double>(per_order.size());
}

AttributionVector shapley_exact(const Game& game) {
    return attribution_by_enumeration(game, AttributionKind::shapley);
}

AttributionVector banzhaf_exact(const Game& game) {
    return attribution_by_enumeration(game, AttributionKind::banzhaf);
}

static InteractionEstimate interaction_by_enumeration(const Game& game, int i, int j,
                                                      InteractionWeighting weighting) {
    check_exact_size(game, kMaxExactPlayers, "exact interaction");
    PairContext ctx(game, i, j);
    const int t = ctx.rest_size();

    std::vector<double> size_weight(t + 1);
    for (int s = 0; s <= t; ++s)
        size_weight[s] = (weighting == InteractionWeighting::shapley)
                             ? shapley_weight(s, t)
                             : std::ldexp(1.0, -t);

    double acc = 0.0;
    const uint64_t limit = uint64_t{1} << t;
    for (uint64_t mask = 0; mask < limit; ++mask)
        acc += size_weight[std::popcount(mask)] * quad_delta(game, ctx.expand(mask), i, j);

    InteractionEstimate est;
    est.i = i;
    est.j = j;
    est.value = acc;
    est.exact = true;
    est.weighting = weighting;
    return est;
}

InteractionEstimate interaction_exact(const Game& game, int i, int j) {
    return interaction_by_enumeration(game, i, j, InteractionWeighting::shapley);
}

InteractionEstimate banzhaf_interaction_exact(const Game& game, int i, int j) {
    return interaction_by_enumeration(game, i, j, InteractionWeighting::banzhaf);
}

double multi_order_interaction_exact(const Game& game, int i, int j, int s) {
    check_exact_size(game, kMaxExactPlayers, "multi-order interaction");
    PairContext ctx(game, i, j);
    if (s < 0 || s > ctx.rest_size())
        throw std::invalid_argument("order s = " + std::to_string(s) + " outside [0, n-2]");
    double acc = 0.0;
    long count = 0;
    for_each_sized_mask(ctx.rest_size(), s, [&](uint64_t mask) {
        acc += quad_delta(game, ctx.expand(mask), i, j);
        ++count;
    });
    return acc / static_cast<double>(count);
}

double pattern_reward(const Game& game, int i, int j, const Coalition& t) {
    check_exact_size(game, kMaxPatternPlayers, "pattern reward");
    check_pair(game, i, j);
    if (t.contains(i) || t.contains(j))
        throw std::invalid_argument("pattern context must exclude the pair {" +
                                    std::to_string(i) + "," + std::to_string(j) + "}");

    // Recursion over subsets of t, compressed to |t| bits. Integer order is a
    // valid evaluation order: every proper subset is a smaller integer.
    std::vector<int> members = t.members();
    const int bits = static_cast<int>(members.size());
    std::vector<double> reward(size_t{1} << bits);
    for (uint64_t u = 0; u < reward.size(); ++u) {
        Coalition ctx = Coalition::empty_set(game.n_players());
        for (int b = 0; b < bits; ++b)
            if (u & (uint64_t{1} << b)) ctx.add(members[b]);
        double r = quad_delta(game, ctx, i, j);
        for_each_proper_submask(u, [&](uint64_t v) { r -= reward[v]; });
        reward[u] = r;
    }
    return reward.back();
}

namespace {

struct DecompositionTables {
    PairContext ctx;
    std::vector<double> deltas;   // quad delta by context mask
    std::vector<double> rewards;  // R^T by pattern mask
    std::vector<double> j_comp;   // J^(q)

    DecompositionTables(const Game& game, int i, int j) : ctx(game, i, j) {
        check_exact_size(game, kMaxPatternPlayers, "order decomposition");
        deltas = all_quad_deltas(game, ctx);
        rewards = deltas;
        moebius_in_place(rewards, ctx.rest_size());

        const int t = ctx.rest_size();
        j_comp.assign(t + 1, 0.0);
        for (uint64_t mask = 0; mask < rewards.size(); ++mask)
            j_comp[std::popcount(mask)] += rewards[mask];
        for (int q = 0; q <= t; ++q) j_comp[q] /= binom(t, q);
    }
};

}  // namespace

OrderSpectrum order_decomposition(const Game& game, int i, int j) {
    DecompositionTables tab(game, i, j);
    const int t = tab.ctx.rest_size();

    OrderSpectrum spec;
    spec.i = i;
    spec.j = j;
    spec.rest_players = tab.ctx.rest;
    spec.pattern_rewards = tab.rewards;
    spec.j_components = tab.j_comp;

    spec.gamma.resize(t + 1);
    spec.per_order.assign(t + 1, 0.0);
    for (int s = 0; s <= t; ++s) {
        spec.gamma[s].resize(s + 1);
        for (int q = 0; q <= s; ++q) {
            spec.gamma[s][q] = binom(s, q) * tab.j_comp[q];
            spec.per_order[s] += spec.gamma[s][q];
        }
    }

    // Cross-check the decomposition against direct enumeration of I^(s).
    std::vector<double> direct(t + 1, 0.0);
    for (uint64_t mask = 0; mask < tab.deltas.size(); ++mask)
        direct[std::popcount(mask)] += tab.deltas[mask];
    double scale = 1.0;
    for (double d : tab.deltas) scale = std::max(scale, std::abs(d));
    for (int s = 0; s <= t; ++s) {
        direct[s] /= binom(t, s);
        if (std::abs(direct[s] - spec.per_order[s]) > 1e-8 * scale)
            throw InternalConsistencyError(
                "order decomposition: C(s,q)-weighted J components disagree with direct "
                "enumeration at s = " + std::to_string(s));
    }

    // And that the order components recombine to the pairwise interaction.
    double from_orders = spec.interaction();
    double weighted = 0.0;
    for (uint64_t mask = 0; mask < tab.deltas.size(); ++mask)
        weighted += shapley_weight(std::popcount(mask), t) * tab.deltas[mask];
    if (std::abs(from_orders - weighted) > 1e-9 * scale)
        throw InternalConsistencyError("order components do not recombine to I(i,j)");

    return spec;
}

double dropout_interaction_exact(const Game& game, int i, int j, int s, int r) {
    DecompositionTables tab(game, i, j);
    const int t = tab.ctx.rest_size();
    if (s < 0 || s > t) throw std::invalid_argument("order s outside [0, n-2]");
    if (r < 0 || r > s) throw std::invalid_argument("kept size r must satisfy 0 <= r <= s");

    // Reward mass inside each thinned context: zeta transform of R^T.
    std::vector<double> inside = tab.rewards;
    zeta_in_place(inside, t);

    // Literal double expectation: contexts S of size s, thinned subsets S' of
    // size r, averaging the reward that survives inside S'.
    double outer = 0.0;
    long outer_count = 0;
    for_each_sized_mask(t, s, [&](uint64_t s_mask) {
        double inner = 0.0;
        long inner_count = 0;
        // Enumerate r-subsets of s_mask through its compressed bit positions.
        int positions[64];
        int sbits = 0;
        uint64_t w = s_mask;
        while (w) {
            positions[sbits++] = std::countr_zero(w);
            w &= w - 1;
        }
        for_each_sized_mask(sbits, r, [&](uint64_t sub) {
            uint64_t thinned = 0;
            uint64_t v = sub;
            while (v) {
                thinned |= uint64_t{1} << positions[std::countr_zero(v)];
                v &= v - 1;
            }
            inner += inside[thinned];
            ++inner_count;
        });
        outer += inner / static_cast<double>(inner_count);
        ++outer_count;
    });
    double direct = outer / static_cast<double>(outer_count);

    double identity = 0.0;
    for (int q = 0; q <= r; ++q) identity += binom(r, q) * tab.j_comp[q];

    double scale = 1.0;
    for (double d : tab.deltas) scale = std::max(scale, std::abs(d));
    if (std::abs(direct - identity) > 1e-8 * scale)
        throw InternalConsistencyError(
            "thinned interaction: double expectation disagrees with C(r,q)-weighted J sum");
    return direct;
}

std::vector<double> gamma_ratio_chain(int s, int r) {
    if (r < 1 || r > s) throw std::invalid_argument("gamma ratio chain needs 1 <= r <= s");
    if (s > 62) throw SizeLimitError("gamma ratio chain limited to s <= 62");
    std::vector<double> ratios(r);
    for (int q = 1; q <= r; ++q)
        ratios[q - 1] =
            static_cast<double>(binom_i64(r, q)) / static_cast<double>(binom_i64(s, q));
    return ratios;
}

}  // namespace gti
