#include "asiv/coalition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "asiv/error.hpp"

namespace asiv {

void check_enumeration_cap(std::size_t p) {
    if (p > kEnumerationCap)
        throw CapExceeded("exact enumeration over " + std::to_string(p) +
                          " players refused: it needs 2^" + std::to_string(p) +
                          " coalition values and the cap is " + std::to_string(kEnumerationCap) +
                          " players; use a Monte Carlo estimator instead");
}

std::vector<std::size_t> Coalition::members() const {
    std::vector<std::size_t> out;
    for (std::size_t w = 0; w < kWords; ++w) {
        std::uint64_t bits = words_[w];
        while (bits) {
            out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
            bits &= bits - 1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Partitions

PositionSet PlayerPartition::kept_positions(const Coalition& s) const {
    PositionSet out = background;
    for (std::size_t i = 0; i < players.size(); ++i) {
        if (s.contains(i)) out.insert(out.end(), players[i].begin(), players[i].end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string PlayerPartition::label(const TokenSequence& tokens, std::size_t i) const {
    std::string out;
    for (auto pos : players.at(i)) {
        if (!out.empty()) out += ' ';
        out += pos < tokens.size() ? tokens[pos] : std::string("?");
    }
    return out;
}

PlayerPartition singleton_partition(std::size_t n) { return coalesce(n, {}); }

PlayerPartition coalesce(std::size_t n, const std::vector<PositionSet>& spans) {
    std::vector<int> owner(n, -1);
    for (std::size_t s = 0; s < spans.size(); ++s) {
        if (spans[s].empty()) throw DomainError("span " + std::to_string(s) + " is empty");
        for (auto pos : spans[s]) {
            if (pos >= n)
                throw DomainError("span position " + std::to_string(pos) + " out of range for length " +
                                  std::to_string(n));
            if (owner[pos] != -1)
                throw DomainError("spans overlap at position " + std::to_string(pos));
            owner[pos] = static_cast<int>(s);
        }
    }
    PlayerPartition out;
    out.length = n;
    std::vector<bool> emitted(spans.size(), false);
    for (std::size_t pos = 0; pos < n; ++pos) {
        if (owner[pos] == -1) {
            out.players.push_back({pos});
        } else if (!emitted[static_cast<std::size_t>(owner[pos])]) {
            emitted[static_cast<std::size_t>(owner[pos])] = true;
            PositionSet span = spans[static_cast<std::size_t>(owner[pos])];
            std::sort(span.begin(), span.end());
            out.players.push_back(std::move(span));
        }
    }
    if (out.players.size() > kMaxPlayers)
        throw CapExceeded("partition has " + std::to_string(out.players.size()) +
                          " players; the engine supports at most " + std::to_string(kMaxPlayers));
    return out;
}

// ---------------------------------------------------------------------------
// Value functions

std::vector<std::size_t> ValueFunction::player_sizes() const {
    return std::vector<std::size_t>(player_count(), 1);
}

void ValueFunction::check_members(const Coalition& s) const {
    const auto p = player_count();
    const auto members = s.members();
    if (!members.empty() && members.back() >= p)
        throw DomainError("coalition names player " + std::to_string(members.back()) + " but the game has " +
                          std::to_string(p) + " players");
}

double ValueFunction::value(const Coalition& s) const {
    const ValueQuery q{s, std::nullopt};
    double out = 0.0;
    evaluate(std::span(&q, 1), std::span(&out, 1));
    return out;
}

std::vector<double> ValueFunction::values(std::span<const Coalition> coalitions) const {
    std::vector<ValueQuery> queries;
    queries.reserve(coalitions.size());
    for (const auto& c : coalitions) queries.push_back({c, std::nullopt});
    std::vector<double> out(coalitions.size());
    evaluate(queries, out);
    return out;
}

TableValueFunction::TableValueFunction(std::size_t players, std::vector<double> values)
    : players_(players), values_(std::move(values)) {
    check_enumeration_cap(players);
    if (values_.size() != (std::size_t{1} << players))
        throw DomainError("table game with " + std::to_string(players) + " players needs " +
                          std::to_string(std::size_t{1} << players) + " values, got " +
                          std::to_string(values_.size()));
    for (std::size_t m = 0; m < values_.size(); ++m) {
        if (!std::isfinite(values_[m]))
            throw DomainError("table value for coalition " + std::to_string(m) + " is not finite");
    }
}

TableValueFunction TableValueFunction::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("game file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("players") || !doc["players"].is_number_unsigned())
        throw LoadError("game file needs a nonnegative integer \"players\" field");
    if (!doc.contains("values") || !doc["values"].is_object())
        throw LoadError("game file needs a \"values\" object keyed by coalition bitmask");
    const auto p = doc["players"].get<std::size_t>();
    if (p > kEnumerationCap)
        throw CapExceeded("table game with " + std::to_string(p) + " players exceeds the cap of " +
                          std::to_string(kEnumerationCap));
    const std::size_t count = std::size_t{1} << p;
    std::vector<double> values(count, 0.0);
    std::vector<bool> seen(count, false);
    for (const auto& [key, val] : doc["values"].items()) {
        std::size_t mask = 0;
        std::size_t used = 0;
        try {
            mask = std::stoull(key, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != key.size() || key.empty())
            throw LoadError("coalition key \"" + key + "\" is not a decimal bitmask");
        if (mask >= count)
            throw LoadError("coalition bitmask " + key + " names players beyond " + std::to_string(p));
        if (!val.is_number()) throw LoadError("value for coalition bitmask " + key + " is not a number");
        values[mask] = val.get<double>();
        seen[mask] = true;
    }
    for (std::size_t m = 0; m < count; ++m) {
        if (!seen[m]) throw LoadError("game file is missing coalition bitmask " + std::to_string(m));
    }
    return TableValueFunction(p, std::move(values));
}

TableValueFunction TableValueFunction::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open game file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::string TableValueFunction::to_json() const {
    nlohmann::ordered_json doc;
    doc["players"] = players_;
    nlohmann::ordered_json values = nlohmann::ordered_json::object();
    for (std::size_t m = 0; m < values_.size(); ++m) values[std::to_string(m)] = values_[m];
    doc["values"] = std::move(values);
    return doc.dump(2);
}

void TableValueFunction::evaluate(std::span<const ValueQuery> queries, std::span<double> out) const {
    const std::uint64_t limit = std::uint64_t{1} << players_;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto& c = queries[i].coalition;
        const auto mask = c.low_mask();
        if (mask >= limit || c.size() != static_cast<std::size_t>(std::popcount(mask)))
            throw DomainError("coalition names a player beyond " + std::to_string(players_));
        out[i] = values_[mask];
    }
}

ModelValueFunction::ModelValueFunction(std::shared_ptr<const Predictor> predictor,
                                       std::shared_ptr<const Filler> filler, TokenSequence instance,
                                       int explained_class, PlayerPartition partition,
                                       ModelGameOptions options)
    : predictor_(std::move(predictor)),
      filler_(std::move(filler)),
      instance_(std::move(instance)),
      explained_class_(explained_class),
      partition_(std::move(partition)),
      options_(options) {
    if (!predictor_ || !filler_) throw DomainError("model value function needs a predictor and a filler");
    validate_sequence(instance_);
    if (partition_.length != instance_.size())
        throw DomainError("partition length " + std::to_string(partition_.length) +
                          " does not match instance length " + std::to_string(instance_.size()));
    if (partition_.players.empty()) throw DomainError("partition has no players");
    if (options_.samples_per_coalition < 1) throw DomainError("samples per coalition must be at least 1");
    if (explained_class_ < 0 || explained_class_ >= predictor_->classes())
        throw DomainError("explained class out of range");
    // Deterministic fillers give r identical draws; one is enough.
    effective_r_ = filler_->deterministic() ? 1 : options_.samples_per_coalition;
    const ValueQuery empty{Coalition{}, std::nullopt};
    baseline_ = expected_probability(std::span(&empty, 1))[0];
    if (options_.memoize) cache_.emplace(Coalition{}, 0.0);
}

std::vector<std::size_t> ModelValueFunction::player_sizes() const {
    std::vector<std::size_t> out;
    for (const auto& p : partition_.players) out.push_back(p.size());
    return out;
}

std::size_t ModelValueFunction::cache_size() const {
    std::lock_guard lock(cache_mutex_);
    return cache_.size();
}

std::uint64_t ModelValueFunction::draw_seed(const ValueQuery& q, std::size_t draw) const {
    if (q.stream) return derive_seed({*q.stream, draw});
    const auto& w = q.coalition.words();
    return derive_seed({options_.master_seed, w[0], w[1], w[2], w[3], draw});
}

namespace {

std::string describe_coalition(const Coalition& c) {
    std::string out = "{";
    for (auto m : c.members()) {
        if (out.size() > 1) out += ',';
        out += std::to_string(m);
    }
    return out + "}";
}

[[noreturn]] void rethrow_for(const Coalition& c) {
    const std::string where = " (while evaluating coalition " + describe_coalition(c) + ")";
    try {
        throw;
    } catch (const TransportError& e) {
        throw TransportError(e.what() + where, e.raw_reply());
    } catch (const DomainError& e) {
        throw DomainError(e.what() + where);
    } catch (const Error& e) {
        throw Error(e.what() + where);
    }
}

}  // namespace

std::vector<double> ModelValueFunction::expected_probability(std::span<const ValueQuery> queries) const {
    std::vector<TokenSequence> batch;
    batch.reserve(queries.size() * effective_r_);
    for (const auto& q : queries) {
        check_members(q.coalition);
        const auto keep = partition_.kept_positions(q.coalition);
        for (std::size_t d = 0; d < effective_r_; ++d) {
            try {
                batch.push_back(filler_->fill(instance_, keep, draw_seed(q, d)).tokens);
            } catch (const Error&) {
                rethrow_for(q.coalition);
            }
        }
    }
    std::vector<double> probs;
    try {
        probs = predictor_->predict_batch(batch, explained_class_);
    } catch (const Error&) {
        rethrow_for(queries.empty() ? Coalition{} : queries.front().coalition);
    }
    std::vector<double> out(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        double sum = 0.0;
        for (std::size_t d = 0; d < effective_r_; ++d) sum += probs[i * effective_r_ + d];
        out[i] = sum / static_cast<double>(effective_r_);
    }
    return out;
}

void ModelValueFunction::evaluate(std::span<const ValueQuery> queries, std::span<double> out) const {
    // A deterministic filler ignores its seed, so streamed queries coincide
    // with coalition-seeded ones and can share the memo.
    const bool seed_free = filler_->deterministic();
    std::vector<ValueQuery> pending;
    std::vector<std::size_t> pending_slot(queries.size(), SIZE_MAX);
    std::unordered_map<Coalition, std::size_t, CoalitionHash> pending_index;
    {
        std::unique_lock lock(cache_mutex_, std::defer_lock);
        if (options_.memoize) lock.lock();
        for (std::size_t i = 0; i < queries.size(); ++i) {
            ValueQuery q = queries[i];
            if (seed_free) q.stream.reset();
            if (!q.stream) {
                if (q.coalition.empty()) {
                    out[i] = 0.0;
                    continue;
                }
                if (options_.memoize) {
                    if (auto it = cache_.find(q.coalition); it != cache_.end()) {
                        out[i] = it->second;
                        continue;
                    }
                }
                auto [it, fresh] = pending_index.emplace(q.coalition, pending.size());
                if (fresh) pending.push_back(q);
                pending_slot[i] = it->second;
            } else {
                pending_slot[i] = pending.size();
                pending.push_back(q);
            }
        }
    }
    if (pending.empty()) return;

    auto expected = expected_probability(pending);
    for (auto& e : expected) e -= baseline_;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (pending_slot[i] != SIZE_MAX) out[i] = expected[pending_slot[i]];
    }
    if (options_.memoize) {
        std::lock_guard lock(cache_mutex_);
        for (std::size_t k = 0; k < pending.size(); ++k) {
            if (!pending[k].stream) cache_.emplace(pending[k].coalition, expected[k]);
        }
    }
}

// ---------------------------------------------------------------------------
// Permutations

PermutationDraw sample_permutation(std::size_t p, Rng& rng) {
    PermutationDraw draw;
    draw.order.resize(p);
    for (std::size_t i = 0; i < p; ++i) draw.order[i] = i;
    shuffle(draw.order.begin(), draw.order.end(), rng);
    return draw;
}

PermutationDraw sample_precedence_permutation(std::size_t p, std::size_t t1, std::size_t t2, Rng& rng) {
    if (p < 2) throw DomainError("a precedence permutation needs at least 2 players");
    if (t1 == t2) throw DomainError("precedence pair must name two distinct players");
    if (t1 >= p || t2 >= p) throw DomainError("precedence pair names a player beyond " + std::to_string(p));
    auto draw = sample_permutation(p, rng);
    const auto pos1 = std::find(draw.order.begin(), draw.order.end(), t1);
    const auto pos2 = std::find(draw.order.begin(), draw.order.end(), t2);
    if (pos2 > pos1) std::iter_swap(pos1, pos2);
    draw.precedence = std::make_pair(t1, t2);
    return draw;
}

PrecedenceSets pre_sets(const PermutationDraw& draw, std::size_t t1, std::size_t t2) {
    PrecedenceSets out;
    bool seen_t2 = false;
    for (auto player : draw.order) {
        if (player == t1) break;
        if (player == t2) seen_t2 = true;
        out.pre.insert(player);
    }
    if (!seen_t2) throw DomainError("permutation does not place t2 before t1");
    out.pre_excl = out.pre.without(t2);
    return out;
}

CoalitionRange enumerate_coalitions(std::size_t p) {
    check_enumeration_cap(p);
    return CoalitionRange(p);
}

}  // namespace asiv
