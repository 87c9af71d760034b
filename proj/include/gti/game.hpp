#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gti/coalition.hpp"

namespace gti {

enum class BaselineKind { zero_activation, mean_input, custom };

/// An evaluatable set function f : 2^N -> R.
///
/// Implementations must be deterministic: the same coalition yields a
/// bit-identical score for as long as the underlying parameters are frozen.
/// evaluate() validates the coalition against the player set and rejects
/// non-finite scores, echoing the offending coalition.
class Game {
public:
    Game(PlayerSet players, std::string id, BaselineKind baseline = BaselineKind::custom)
        : players_(std::move(players)), id_(std::move(id)), baseline_(baseline) {}
    virtual ~Game() = default;

    const PlayerSet& players() const { return players_; }
    int n_players() const { return players_.size(); }
    const std::string& id() const { return id_; }
    BaselineKind baseline_kind() const { return baseline_; }

    double evaluate(const Coalition& s) const;

protected:
    virtual double eval_impl(const Coalition& s) const = 0;

private:
    PlayerSet players_;
    std::string id_;
    BaselineKind baseline_;
};

/// f(S) = sum of w_i over i in S, plus an optional offset f(empty).
class AdditiveGame : public Game {
public:
    AdditiveGame(std::vector<double> weights, double offset = 0.0);
    const std::vector<double>& weights() const { return weights_; }

protected:
    double eval_impl(const Coalition& s) const override;

private:
    std::vector<double> weights_;
    double offset_;
};

/// One product term of a TermGame: coeff * [members subset of S].
struct GameTerm {
    double coeff;
    Coalition members;
};

/// f(S) = sum of terms c_t * [T_t subset of S]. This is the Harsanyi-dividend
/// form: the dividend of a set T is exactly the sum of coefficients on T, so
/// term games give planted, analytically known interaction structure.
///
/// Text format (one game per file):
///   players n
///   term <coeff> [i j k ...]
/// A term with no indices is a constant contribution (part of f(empty)).
class TermGame : public Game {
public:
    TermGame(int n, std::vector<GameTerm> terms, std::string id = "term-game");

    const std::vector<GameTerm>& terms() const { return terms_; }

    static TermGame parse(std::istream& in, std::string id = "term-game");
    static TermGame load(const std::string& path);
    std::string serialize() const;

    /// Random game whose dividends all carry the given sign (or mixed when
    /// sign = 0). Every term below max_order includes a seeded anchor pair so
    /// pairwise interactions are non-trivial.
    static TermGame random(int n, int term_count, int max_order, uint64_t seed, int sign = 0);

protected:
    double eval_impl(const Coalition& s) const override;

private:
    std::vector<GameTerm> terms_;
};

/// Fully general game backed by a table of 2^n values; n <= 20.
class TableGame : public Game {
public:
    TableGame(int n, std::vector<double> values, std::string id = "table-game");

    static TableGame random(int n, uint64_t seed, double lo = -1.0, double hi = 1.0);

    const std::vector<double>& values() const { return values_; }

protected:
    double eval_impl(const Coalition& s) const override;

private:
    std::vector<double> values_;
};

/// Adapter for ad-hoc games in tests and tools.
class FunctionGame : public Game {
public:
    FunctionGame(int n, std::function<double(const Coalition&)> fn, std::string id = "fn-game")
        : Game(PlayerSet(n), std::move(id)), fn_(std::move(fn)) {}

protected:
    double eval_impl(const Coalition& s) const override { return fn_(s); }

private:
    std::function<double(const Coalition&)> fn_;
};

/// The base game with some players forced absent; the remaining players are
/// re-indexed 0..m-1 in increasing original order. Realizes phi(i | N\{j}).
class RestrictedGame : public Game {
public:
    RestrictedGame(const Game& base, const Coalition& removed);

    /// New index of an original player, or -1 if it was removed.
    int sub_index(int original) const;

protected:
    double eval_impl(const Coalition& s) const override;

private:
    const Game& base_;
    std::vector<int> to_original_;
};

/// The base game with players i and j fused into one compound player, which
/// becomes the LAST index (n-2) of the reduced set. Realizes phi(S_ij | N').
class MergedPairGame : public Game {
public:
    MergedPairGame(const Game& base, int i, int j);

    int merged_index() const { return n_players() - 1; }

protected:
    double eval_impl(const Coalition& s) const override;

private:
    const Game& base_;
    int i_, j_;
    std::vector<int> to_original_;  // for indices 0..n-3
};

/// Delta f(S, i, j) = f(S+ij) - f(S+j) - f(S+i) + f(S); S must exclude i, j.
double quad_delta(const Game& game, const Coalition& s, int i, int j);

}  // namespace gti
