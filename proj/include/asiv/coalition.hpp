#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "asiv/filler.hpp"
#include "asiv/predictor.hpp"
#include "asiv/rng.hpp"

namespace asiv {

/// Hard limit on players in any game, sampled or exact.
inline constexpr std::size_t kMaxPlayers = 256;
/// Hard limit for estimators that enumerate all 2^p coalitions.
inline constexpr std::size_t kEnumerationCap = 20;

/// Throws CapExceeded when `p` is too large to enumerate.
void check_enumeration_cap(std::size_t p);

/// A set of player indices, stored as a fixed-width bitmask.
class Coalition {
public:
    static constexpr std::size_t kWords = kMaxPlayers / 64;

    constexpr Coalition() = default;

    static Coalition from_mask(std::uint64_t mask) {
        Coalition c;
        c.words_[0] = mask;
        return c;
    }

    bool contains(std::size_t player) const {
        return (words_[player >> 6] >> (player & 63)) & 1U;
    }
    Coalition& insert(std::size_t player) {
        words_[player >> 6] |= std::uint64_t{1} << (player & 63);
        return *this;
    }
    Coalition& erase(std::size_t player) {
        words_[player >> 6] &= ~(std::uint64_t{1} << (player & 63));
        return *this;
    }
    Coalition with(std::size_t player) const { return Coalition(*this).insert(player); }
    Coalition without(std::size_t player) const { return Coalition(*this).erase(player); }

    std::size_t size() const {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }
    bool empty() const { return size() == 0; }

    /// Lowest 64 players as a bitmask; bit i is player i.
    std::uint64_t low_mask() const { return words_[0]; }
    const std::array<std::uint64_t, kWords>& words() const { return words_; }

    /// Members in increasing order.
    std::vector<std::size_t> members() const;

    friend bool operator==(const Coalition&, const Coalition&) = default;

private:
    std::array<std::uint64_t, kWords> words_{};
};

struct CoalitionHash {
    std::size_t operator()(const Coalition& c) const noexcept {
        std::uint64_t h = 0;
        for (auto w : c.words()) h = mix64(h ^ w);
        return static_cast<std::size_t>(h);
    }
};

/// Players are disjoint nonempty position sets; positions in no player are
/// background and always keep their original token.
struct PlayerPartition {
    std::size_t length = 0;
    std::vector<PositionSet> players;
    PositionSet background;

    std::size_t player_count() const { return players.size(); }
    std::size_t player_size(std::size_t i) const { return players.at(i).size(); }

    /// Background plus every position owned by a member of `s`, sorted.
    PositionSet kept_positions(const Coalition& s) const;

    /// Token position a player is ordered by: its first position.
    std::size_t anchor(std::size_t i) const { return players.at(i).front(); }

    /// Display label: the player's tokens joined by spaces.
    std::string label(const TokenSequence& tokens, std::size_t i) const;
};

/// Each position of a length-n sequence is its own player.
PlayerPartition singleton_partition(std::size_t n);

/// `spans` become players; every other position becomes a singleton player.
/// Players are ordered by their first position.
PlayerPartition coalesce(std::size_t n, const std::vector<PositionSet>& spans);

/// One evaluation request against a value function.
///
/// With `stream` unset the filler seeds derive from the coalition itself, so
/// repeated queries for one coalition always see the same filler draws and may
/// be memoized. With `stream` set the seeds derive from the stream instead,
/// which lets several coalitions share one filler realization.
struct ValueQuery {
    Coalition coalition;
    std::optional<std::uint64_t> stream;
};

/// The coalition value function v(S).
class ValueFunction {
public:
    virtual ~ValueFunction() = default;

    virtual std::size_t player_count() const = 0;
    /// Token count of each player (1 for table games).
    virtual std::vector<std::size_t> player_sizes() const;

    /// Evaluates every query; out[i] answers queries[i].
    virtual void evaluate(std::span<const ValueQuery> queries, std::span<double> out) const = 0;

    /// v(S) with coalition-derived seeding.
    double value(const Coalition& s) const;
    std::vector<double> values(std::span<const Coalition> coalitions) const;

protected:
    void check_members(const Coalition& s) const;
};

/// v given explicitly for all 2^p coalitions, indexed by bitmask.
class TableValueFunction : public ValueFunction {
public:
    TableValueFunction(std::size_t players, std::vector<double> values);

    /// Reads {"players": p, "values": {"<bitmask>": v, ...}}; every coalition required.
    static TableValueFunction from_json(const std::string& text);
    static TableValueFunction load(const std::string& path);
    std::string to_json() const;

    std::size_t player_count() const override { return players_; }
    void evaluate(std::span<const ValueQuery> queries, std::span<double> out) const override;

    double at(std::uint64_t mask) const { return values_[mask]; }
    const std::vector<double>& table() const { return values_; }

private:
    std::size_t players_;
    std::vector<double> values_;
};

struct ModelGameOptions {
    std::size_t samples_per_coalition = 1;  // r
    std::uint64_t master_seed = 0;
    bool memoize = true;
};

/// v(S) = mean_r f(fill(x, keep S ∪ background)) − mean_r f(fill(x, keep background)).
///
/// The baseline term reuses the empty coalition's seeds, so v(∅) is exactly 0.
class ModelValueFunction : public ValueFunction {
public:
    ModelValueFunction(std::shared_ptr<const Predictor> predictor, std::shared_ptr<const Filler> filler,
                       TokenSequence instance, int explained_class, PlayerPartition partition,
                       ModelGameOptions options = {});

    std::size_t player_count() const override { return partition_.player_count(); }
    std::vector<std::size_t> player_sizes() const override;
    void evaluate(std::span<const ValueQuery> queries, std::span<double> out) const override;

    /// E(f | x') under the empty coalition's seeds.
    double baseline() const { return baseline_; }
    const PlayerPartition& partition() const { return partition_; }
    const TokenSequence& instance() const { return instance_; }
    int explained_class() const { return explained_class_; }
    const ModelGameOptions& options() const { return options_; }

    /// Number of distinct coalitions held in the memo.
    std::size_t cache_size() const;

private:
    std::uint64_t draw_seed(const ValueQuery& q, std::size_t draw) const;
    /// Mean model probability over r filled draws for each query, one batch.
    std::vector<double> expected_probability(std::span<const ValueQuery> queries) const;

    std::shared_ptr<const Predictor> predictor_;
    std::shared_ptr<const Filler> filler_;
    TokenSequence instance_;
    int explained_class_;
    PlayerPartition partition_;
    ModelGameOptions options_;
    std::size_t effective_r_;
    double baseline_ = 0.0;

    mutable std::mutex cache_mutex_;
    mutable std::unordered_map<Coalition, double, CoalitionHash> cache_;
};

/// A player ordering; when `precedence` is set as (t1, t2), t2 comes before t1.
struct PermutationDraw {
    std::vector<std::size_t> order;
    std::optional<std::pair<std::size_t, std::size_t>> precedence;
};

PermutationDraw sample_permutation(std::size_t p, Rng& rng);

/// Uniform over the p!/2 orders with t2 before t1: a uniform shuffle with t1
/// and t2 swapped when they come out in the wrong order.
PermutationDraw sample_precedence_permutation(std::size_t p, std::size_t t1, std::size_t t2, Rng& rng);

struct PrecedenceSets {
    Coalition pre;       // players before t1 (contains t2)
    Coalition pre_excl;  // pre without t2
};

PrecedenceSets pre_sets(const PermutationDraw& draw, std::size_t t1, std::size_t t2);

/// All 2^p coalitions in increasing bitmask order.
class CoalitionRange {
public:
    class iterator {
    public:
        using value_type = Coalition;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        explicit iterator(std::uint64_t mask) : mask_(mask) {}
        Coalition operator*() const { return Coalition::from_mask(mask_); }
        iterator& operator++() {
            ++mask_;
            return *this;
        }
        iterator operator++(int) {
            auto copy = *this;
            ++mask_;
            return copy;
        }
        friend bool operator==(const iterator&, const iterator&) = default;

    private:
        std::uint64_t mask_ = 0;
    };

    explicit CoalitionRange(std::size_t p) : end_(std::uint64_t{1} << p) {}
    iterator begin() const { return iterator(0); }
    iterator end() const { return iterator(end_); }
    std::uint64_t size() const { return end_; }

private:
    std::uint64_t end_;
};

CoalitionRange enumerate_coalitions(std::size_t p);

}  // namespace asiv
