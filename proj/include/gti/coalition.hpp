#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace gti {

/// The fixed set of players a game is defined over. Players are indexed
/// 0..n-1; labels are optional display names (grid cells, unit ids, ...).
class PlayerSet {
public:
    explicit PlayerSet(int n, std::vector<std::string> labels = {})
        : n_(n), labels_(std::move(labels)) {
        if (n < 1) throw std::invalid_argument("PlayerSet: need at least one player");
        if (!labels_.empty() && static_cast<int>(labels_.size()) != n)
            throw std::invalid_argument("PlayerSet: label count must match player count");
    }

    int size() const { return n_; }

    const std::string& label(int i) const {
        check_index(i);
        static const std::string empty;
        return labels_.empty() ? empty : labels_[i];
    }

    void check_index(int i) const {
        if (i < 0 || i >= n_)
            throw std::out_of_range("player index " + std::to_string(i) + " out of range [0, " +
                                    std::to_string(n_) + ")");
    }

private:
    int n_;
    std::vector<std::string> labels_;
};

/// A subset of a fixed player set, stored as a bit mask. The first 64 players
/// live in an inline word; larger player sets spill into extra words, so the
/// same type serves exact enumeration (n <= 24) and sampled estimation on
/// grid or activation players (n up to a few hundred).
class Coalition {
public:
    Coalition() : n_(0), lo_(0), size_(0) {}

    static Coalition empty_set(int n) { return Coalition(n); }

    static Coalition full_set(int n) {
        Coalition c(n);
        for (int i = 0; i < n; ++i) c.add(i);
        return c;
    }

    static Coalition of(int n, std::initializer_list<int> members) {
        Coalition c(n);
        for (int i : members) c.add(i);
        return c;
    }

    static Coalition of(int n, const std::vector<int>& members) {
        Coalition c(n);
        for (int i : members) c.add(i);
        return c;
    }

    /// Build from a raw mask over the first 64 players.
    static Coalition from_mask(int n, uint64_t mask) {
        Coalition c(n);
        if (n < 64 && (mask >> n) != 0)
            throw std::out_of_range("mask has bits beyond the player set");
        c.lo_ = mask;
        c.size_ = std::popcount(mask);
        return c;
    }

    int player_count() const { return n_; }
    int size() const { return size_; }
    bool empty() const { return size_ == 0; }
    bool full() const { return size_ == n_; }

    bool contains(int i) const {
        check_index(i);
        return (word(i) >> bit(i)) & 1u;
    }

    void add(int i) {
        check_index(i);
        uint64_t& w = word(i);
        uint64_t m = uint64_t{1} << bit(i);
        if (!(w & m)) {
            w |= m;
            ++size_;
        }
    }

    void remove(int i) {
        check_index(i);
        uint64_t& w = word(i);
        uint64_t m = uint64_t{1} << bit(i);
        if (w & m) {
            w &= ~m;
            --size_;
        }
    }

    Coalition with(int i) const {
        Coalition c = *this;
        c.add(i);
        return c;
    }

    Coalition without(int i) const {
        Coalition c = *this;
        c.remove(i);
        return c;
    }

    Coalition united(const Coalition& o) const {
        Coalition c = combine(o, [](uint64_t a, uint64_t b) { return a | b; });
        return c;
    }

    Coalition intersect(const Coalition& o) const {
        return combine(o, [](uint64_t a, uint64_t b) { return a & b; });
    }

    Coalition minus(const Coalition& o) const {
        return combine(o, [](uint64_t a, uint64_t b) { return a & ~b; });
    }

    Coalition complement() const { return full_set(n_).minus(*this); }

    bool subset_of(const Coalition& o) const {
        check_same(o);
        if ((lo_ & ~o.lo_) != 0) return false;
        for (size_t k = 0; k < hi_.size(); ++k)
            if ((hi_[k] & ~o.hi_[k]) != 0) return false;
        return true;
    }

    bool disjoint_with(const Coalition& o) const {
        check_same(o);
        if ((lo_ & o.lo_) != 0) return false;
        for (size_t k = 0; k < hi_.size(); ++k)
            if ((hi_[k] & o.hi_[k]) != 0) return false;
        return true;
    }

    bool operator==(const Coalition& o) const {
        return n_ == o.n_ && lo_ == o.lo_ && hi_ == o.hi_;
    }
    bool operator!=(const Coalition& o) const { return !(*this == o); }

    /// Mask over players 0..63. Valid only when n <= 64.
    uint64_t low_word() const { return lo_; }

    template <typename F>
    void for_each_member(F&& f) const {
        uint64_t w = lo_;
        while (w) {
            f(std::countr_zero(w));
            w &= w - 1;
        }
        for (size_t k = 0; k < hi_.size(); ++k) {
            w = hi_[k];
            while (w) {
                f(static_cast<int>((k + 1) * 64) + std::countr_zero(w));
                w &= w - 1;
            }
        }
    }

    std::vector<int> members() const {
        std::vector<int> out;
        out.reserve(size_);
        for_each_member([&](int i) { out.push_back(i); });
        return out;
    }

    std::string to_string() const {
        std::string s = "{";
        bool first = true;
        for_each_member([&](int i) {
            if (!first) s += ",";
            s += std::to_string(i);
            first = false;
        });
        return s + "}";
    }

private:
    explicit Coalition(int n) : n_(n), lo_(0), size_(0) {
        if (n < 1) throw std::invalid_argument("Coalition: need at least one player");
        if (n > 64) hi_.assign((n - 1) / 64, 0);
    }

    void check_index(int i) const {
        if (i < 0 || i >= n_)
            throw std::out_of_range("player index " + std::to_string(i) + " out of range [0, " +
                                    std::to_string(n_) + ")");
    }

    void check_same(const Coalition& o) const {
        if (n_ != o.n_)
            throw std::invalid_argument("coalition operation across different player sets");
    }

    uint64_t& word(int i) { return i < 64 ? lo_ : hi_[i / 64 - 1]; }
    const uint64_t& word(int i) const { return i < 64 ? lo_ : hi_[i / 64 - 1]; }
    static int bit(int i) { return i & 63; }

    template <typename Op>
    Coalition combine(const Coalition& o, Op op) const {
        check_same(o);
        Coalition c(n_);
        c.lo_ = op(lo_, o.lo_);
        int sz = std::popcount(c.lo_);
        for (size_t k = 0; k < hi_.size(); ++k) {
            c.hi_[k] = op(hi_[k], o.hi_[k]);
            sz += std::popcount(c.hi_[k]);
        }
        c.size_ = sz;
        return c;
    }

    int n_;
    uint64_t lo_;
    std::vector<uint64_t> hi_;
    int size_;
};

}  // namespace gti
