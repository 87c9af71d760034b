#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gti/game.hpp"

namespace gti {

enum class AttributionKind { shapley, banzhaf };
enum class InteractionWeighting { shapley, banzhaf };

struct AttributionVector {
    std::vector<double> values;
    AttributionKind kind;
    std::string game_id;

    double sum() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
};

/// A pairwise interaction value with estimator provenance. `m` is 0 and
/// `exact` true for enumerated values; sampled estimators fill m, seed and
/// the standard error of the mean.
struct InteractionEstimate {
    int i = 0;
    int j = 0;
    double value = 0.0;
    double std_err = 0.0;
    long m = 0;
    uint64_t seed = 0;
    bool exact = true;
    InteractionWeighting weighting = InteractionWeighting::shapley;
    bool normalized = false;
};

/// Per-pair multi-order structure: the order components I^(s), the
/// pattern rewards R^T (indexed by mask over rest_players), their means
/// J^(q), and the table Gamma^(q)(i,j|s) = C(s,q) J^(q).
struct OrderSpectrum {
    int i = 0;
    int j = 0;
    std::vector<int> rest_players;          // original indices of N minus {i,j}
    std::vector<double> per_order;          // I^(s), s = 0..n-2
    std::vector<double> j_components;       // J^(q), q = 0..n-2
    std::vector<double> pattern_rewards;    // R^T by compressed mask, size 2^(n-2)
    std::vector<std::vector<double>> gamma; // gamma[s][q], q <= s

    /// Overall interaction, sum_s I^(s) / (n-1).
    double interaction() const;
};

inline constexpr int kMaxExactPlayers = 24;    // full-enumeration ceiling
inline constexpr int kMaxPatternPlayers = 16;  // 2^n reward-table ceiling

/// Exact Shapley values by full enumeration; n <= 24.
AttributionVector shapley_exact(const Game& game);

/// Exact Banzhaf values: psi(i) = 0.5^(n-1) sum of marginal contributions.
AttributionVector banzhaf_exact(const Game& game);

/// Shapley-weighted pairwise interaction I(i,j) over contexts S in N\{i,j}.
InteractionEstimate interaction_exact(const Game& game, int i, int j);

/// Banzhaf-weighted variant: every context weighted 0.5^(n-2).
InteractionEstimate banzhaf_interaction_exact(const Game& game, int i, int j);

/// I^(s)(i,j): mean quad delta over contexts of exactly s players.
double multi_order_interaction_exact(const Game& game, int i, int j, int s);

/// Marginal reward of the inference pattern T + {i,j} with all rewards of
/// smaller patterns removed, via the memoized subset recursion
/// R^T = delta(T) - sum over proper subsets. T must exclude i and j.
double pattern_reward(const Game& game, int i, int j, const Coalition& t);

/// Full order decomposition for one pair. Verifies internally that
/// I^(s) = sum_q C(s,q) J^(q) against direct enumeration (1e-8) and that
/// the order components recombine to I(i,j) (1e-9); a violation throws
/// InternalConsistencyError since it can only mean an implementation bug.
OrderSpectrum order_decomposition(const Game& game, int i, int j);

/// Interaction surviving when contexts of size s are thinned to r kept
/// units: the double expectation over S then S' of the pattern rewards
/// inside S'. Verified against sum_{q<=r} C(r,q) J^(q) within 1e-8.
double dropout_interaction_exact(const Game& game, int i, int j, int s, int r);

/// ratio(q) = C(r,q) / C(s,q) for q = 1..r; non-increasing, inside [0,1].
std::vector<double> gamma_ratio_chain(int s, int r);

}  // namespace gti
