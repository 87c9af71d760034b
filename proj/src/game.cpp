#include "gti/game.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "gti/errors.hpp"
#include "gti/rng.hpp"

namespace gti {

double Game::evaluate(const Coalition& s) const {
    if (s.player_count() != players_.size())
        throw std::out_of_range("coalition drawn from a different player set (" +
                                std::to_string(s.player_count()) + " vs " +
                                std::to_string(players_.size()) + " players)");
    double v = eval_impl(s);
    if (!std::isfinite(v))
        throw NumericError("game '" + id_ + "' produced a non-finite score on coalition " +
                           s.to_string());
    return v;
}

AdditiveGame::AdditiveGame(std::vector<double> weights, double offset)
    : Game(PlayerSet(static_cast<int>(weights.size())), "additive", BaselineKind::custom),
      weights_(std::move(weights)),
      offset_(offset) {}

double AdditiveGame::eval_impl(const Coalition& s) const {
    double v = offset_;
    s.for_each_member([&](int i) { v += weights_[i]; });
    return v;
}

TermGame::TermGame(int n, std::vector<GameTerm> terms, std::string id)
    : Game(PlayerSet(n), std::move(id)), terms_(std::move(terms)) {
    for (const auto& t : terms_)
        if (t.members.player_count() != n)
            throw std::invalid_argument("term defined over a different player set");
}

double TermGame::eval_impl(const Coalition& s) const {
    double v = 0.0;
    for (const auto& t : terms_)
        if (t.members.subset_of(s)) v += t.coeff;
    return v;
}

TermGame TermGame::parse(std::istream& in, std::string id) {
    std::string line;
    int n = -1;
    std::vector<GameTerm> terms;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw == "players") {
            if (!(ls >> n) || n < 1)
                throw std::invalid_argument("game file line " + std::to_string(lineno) +
                                            ": bad player count");
        } else if (kw == "term") {
            if (n < 1)
                throw std::invalid_argument("game file: 'term' before 'players' header");
            double coeff;
            if (!(ls >> coeff))
                throw std::invalid_argument("game file line " + std::to_string(lineno) +
                                            ": term needs a coefficient");
            Coalition members = Coalition::empty_set(n);
            int idx;
            while (ls >> idx) members.add(idx);
            terms.push_back({coeff, members});
        } else {
            throw std::invalid_argument("game file line " + std::to_string(lineno) +
                                        ": unknown keyword '" + kw + "'");
        }
    }
    if (n < 1) throw std::invalid_argument("game file: missing 'players n' header");
    return TermGame(n, std::move(terms), std::move(id));
}

TermGame TermGame::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open game file: " + path);
    return parse(in, path);
}

std::string TermGame::serialize() const {
    std::ostringstream out;
    out << "players " << n_players() << "\n";
    for (const auto& t : terms_) {
        out << "term " << t.coeff;
        t.members.for_each_member([&](int i) { out << " " << i; });
        out << "\n";
    }
    return out.str();
}

TermGame TermGame::random(int n, int term_count, int max_order, uint64_t seed, int sign) {
    if (n < 3) throw std::invalid_argument("random term game needs n >= 3");
    CounterRng rng(CounterRng::derive(seed, {0x7e51}));
    std::vector<GameTerm> terms;
    terms.reserve(term_count);
    for (int t = 0; t < term_count; ++t) {
        Coalition members = Coalition::empty_set(n);
        if (t % 2 == 0) {
            // anchored term: contains the pair {0,1} plus a few extras
            members.add(0);
            members.add(1);
            int extra = rng.uniform_int(0, std::min(max_order, n - 2));
            for (int p : rng.sample_without_replacement(n - 2, extra)) members.add(p + 2);
        } else {
            int order = rng.uniform_int(1, std::min(max_order + 2, n));
            members = Coalition::of(n, rng.sample_without_replacement(n, order));
        }
        double mag = rng.uniform(0.1, 1.0);
        double coeff = sign > 0 ? mag : sign < 0 ? -mag : (rng.bernoulli(0.5) ? mag : -mag);
        terms.push_back({coeff, members});
    }
    return TermGame(n, std::move(terms), "random-term-game");
}

TableGame::TableGame(int n, std::vector<double> values, std::string id)
    : Game(PlayerSet(n), std::move(id)), values_(std::move(values)) {
    if (n > 20) throw SizeLimitError("TableGame supports at most 20 players");
    if (values_.size() != (size_t{1} << n))
        throw std::invalid_argument("TableGame needs exactly 2^n values");
}

double TableGame::eval_impl(const Coalition& s) const { return values_[s.low_word()]; }

TableGame TableGame::random(int n, uint64_t seed, double lo, double hi) {
    CounterRng rng(CounterRng::derive(seed, {0x7ab1e}));
    std::vector<double> values(size_t{1} << n);
    for (auto& v : values) v = rng.uniform(lo, hi);
    return TableGame(n, std::move(values), "random-table-game");
}

RestrictedGame::RestrictedGame(const Game& base, const Coalition& removed)
    : Game(PlayerSet(std::max(1, base.n_players() - removed.size())),
           base.id() + "|restricted"),
      base_(base) {
    if (removed.player_count() != base.n_players())
        throw std::invalid_argument("removed set drawn from a different player set");
    for (int i = 0; i < base.n_players(); ++i)
        if (!removed.contains(i)) to_original_.push_back(i);
    if (to_original_.empty())
        throw std::invalid_argument("cannot remove every player");
}

int RestrictedGame::sub_index(int original) const {
    for (size_t k = 0; k < to_original_.size(); ++k)
        if (to_original_[k] == original) return static_cast<int>(k);
    return -1;
}

double RestrictedGame::eval_impl(const Coalition& s) const {
    Coalition full = Coalition::empty_set(base_.n_players());
    s.for_each_member([&](int k) { full.add(to_original_[k]); });
    return base_.evaluate(full);
}

MergedPairGame::MergedPairGame(const Game& base, int i, int j)
    : Game(PlayerSet(base.n_players() - 1), base.id() + "|merged"), base_(base), i_(i), j_(j) {
    base.players().check_index(i);
    base.players().check_index(j);
    if (i == j) throw std::invalid_argument("merged pair needs two distinct players");
    for (int k = 0; k < base.n_players(); ++k)
        if (k != i && k != j) to_original_.push_back(k);
}

double MergedPairGame::eval_impl(const Coalition& s) const {
    Coalition full = Coalition::empty_set(base_.n_players());
    s.for_each_member([&](int k) {
        if (k == merged_index()) {
            full.add(i_);
            full.add(j_);
        } else {
            full.add(to_original_[k]);
        }
    });
    return base_.evaluate(full);
}

double quad_delta(const Game& game, const Coalition& s, int i, int j) {
    if (i == j) throw std::invalid_argument("quad_delta needs distinct players");
    if (s.contains(i) || s.contains(j))
        throw std::invalid_argument("context must exclude the pair");
    Coalition si = s.with(i);
    Coalition sj = s.with(j);
    Coalition sij = si.with(j);
    return game.evaluate(sij) - game.evaluate(sj) - game.evaluate(si) + game.evaluate(s);
}

}  // namespace gti
