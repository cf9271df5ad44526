#include "asiv/attribution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "asiv/error.hpp"

namespace asiv {

std::string to_string(Method method) {
    switch (method) {
        case Method::shapley: return "shapley";
        case Method::shapley_interaction_index: return "shapley-interaction-index";
        case Method::shapley_taylor_2: return "shapley-taylor-2";
        case Method::asiv_subset: return "asiv-subset";
        case Method::asiv_perm: return "asiv-perm";
        case Method::asiv_mc: return "asiv-mc";
    }
    return "?";
}

Method parse_method(const std::string& text) {
    if (text == "shapley") return Method::shapley;
    if (text == "shapley-interaction-index" || text == "sii") return Method::shapley_interaction_index;
    if (text == "shapley-taylor-2" || text == "sti") return Method::shapley_taylor_2;
    if (text == "asiv-subset") return Method::asiv_subset;
    if (text == "asiv-perm" || text == "asiv") return Method::asiv_perm;
    if (text == "asiv-mc") return Method::asiv_mc;
    throw DomainError("unknown method \"" + text + "\"");
}

std::string convention_of(Method method) {
    switch (method) {
        case Method::asiv_subset: return "subset";
        case Method::asiv_perm:
        case Method::asiv_mc: return "perm";
        default: return "symmetric";
    }
}

std::string to_string(WMode mode) {
    switch (mode) {
        case WMode::set_function: return "set-function";
        case WMode::shared: return "shared";
        case WMode::per_term: return "per-term";
    }
    return "?";
}

WMode parse_w_mode(const std::string& text) {
    if (text == "set-function") return WMode::set_function;
    if (text == "shared") return WMode::shared;
    if (text == "per-term") return WMode::per_term;
    throw DomainError("unknown w mode \"" + text + "\" (expected set-function, shared or per-term)");
}

SampleBlock summarize(std::vector<double> draws) {
    SampleBlock out;
    out.draws = std::move(draws);
    const auto m = out.draws.size();
    if (m == 0) return out;
    double sum = 0.0;
    for (double v : out.draws) sum += v;
    out.mean = sum / static_cast<double>(m);
    if (m >= 2) {
        double ss = 0.0;
        for (double v : out.draws) ss += (v - out.mean) * (v - out.mean);
        out.standard_error = std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m));
    }
    return out;
}

namespace {

/// a! b! / c!, evaluated as a running product to stay in range.
double factorial_ratio(std::size_t a, std::size_t b, std::size_t c) {
    if (a > b) std::swap(a, b);
    // a! b! / c! = a! / ((b+1)(b+2)...c) when c >= b.
    long double r = 1.0L;
    for (std::size_t k = 2; k <= a; ++k) r *= static_cast<long double>(k);
    if (c >= b) {
        for (std::size_t k = b + 1; k <= c; ++k) r /= static_cast<long double>(k);
    } else {
        for (std::size_t k = c + 1; k <= b; ++k) r *= static_cast<long double>(k);
    }
    return static_cast<double>(r);
}

std::uint64_t bit(std::size_t i) { return std::uint64_t{1} << i; }

void check_player(std::size_t p, std::size_t i) {
    if (i >= p) throw DomainError("player " + std::to_string(i) + " out of range for " + std::to_string(p) + " players");
}

void check_pair(std::size_t p, std::size_t i, std::size_t j) {
    check_player(p, i);
    check_player(p, j);
    if (i == j) throw DomainError("pairwise index needs two distinct players");
}

AttributionScore exact_score(Method method, std::size_t t1, std::optional<std::size_t> t2, double value) {
    AttributionScore s;
    s.method = method;
    s.t1 = t1;
    s.t2 = t2;
    s.value = value;
    return s;
}

AttributionScore mc_score(Method method, std::size_t t1, std::optional<std::size_t> t2, const SampleBlock& block,
                          const McConfig& config) {
    AttributionScore s;
    s.method = method;
    s.t1 = t1;
    s.t2 = t2;
    s.value = block.mean;
    s.m = block.draws.size();
    s.standard_error = block.standard_error;
    s.seed = config.seed;
    return s;
}

constexpr std::uint64_t kShapleyTag = 1;
constexpr std::uint64_t kInteractionTag = 2;
constexpr std::uint64_t kTaylorTag = 3;
constexpr std::uint64_t kAsivTag = 6;

/// Generic Monte Carlo driver. Each draw fills `terms` queries from its own
/// RNG stream, derived from (seed, target, draw index), and reduces their
/// values to one sample. Draws are evaluated `block` at a time in one batch.
template <typename Build, typename Reduce>
SampleBlock run_mc(const ValueFunction& vf, const McConfig& config, std::uint64_t target, std::size_t terms,
                   Build build, Reduce reduce) {
    if (config.m < 1) throw DomainError("sample count m must be at least 1");
    const std::size_t block = std::max<std::size_t>(1, config.block);
    std::vector<double> draws;
    draws.reserve(config.m);
    std::vector<ValueQuery> queries;
    std::vector<double> values;
    for (std::size_t start = 0; start < config.m; start += block) {
        const std::size_t count = std::min(block, config.m - start);
        queries.assign(count * terms, ValueQuery{});
        values.assign(count * terms, 0.0);
        for (std::size_t k = 0; k < count; ++k) {
            const std::uint64_t draw_seed = derive_seed({config.seed, target, start + k});
            Rng rng(draw_seed);
            ValueQuery* q = &queries[k * terms];
            build(rng, q);
            for (std::size_t t = 0; t < terms; ++t) {
                switch (config.w_mode) {
                    case WMode::set_function: q[t].stream.reset(); break;
                    case WMode::shared: q[t].stream = derive_seed({draw_seed, 0x5eedULL}); break;
                    case WMode::per_term: q[t].stream = derive_seed({draw_seed, 0x5eedULL, t + 1}); break;
                }
            }
        }
        vf.evaluate(queries, values);
        for (std::size_t k = 0; k < count; ++k) draws.push_back(reduce(&values[k * terms]));
    }
    return summarize(std::move(draws));
}

}  // namespace

DenseGame DenseGame::from(const ValueFunction& vf) {
    DenseGame g;
    g.players = vf.player_count();
    check_enumeration_cap(g.players);
    g.sizes = vf.player_sizes();
    std::vector<Coalition> all;
    all.reserve(std::size_t{1} << g.players);
    for (auto c : enumerate_coalitions(g.players)) all.push_back(c);
    g.values = vf.values(all);
    return g;
}

// ---------------------------------------------------------------------------
// Shapley value

AttributionScore shapley_exact(const DenseGame& game, std::size_t i) {
    const auto p = game.players;
    check_player(p, i);
    check_enumeration_cap(p);
    const auto bi = bit(i);
    double total = 0.0;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << p); ++s) {
        if (s & bi) continue;
        const auto size = static_cast<std::size_t>(std::popcount(s));
        total += factorial_ratio(size, p - 1 - size, p) * (game(s | bi) - game(s));
    }
    return exact_score(Method::shapley, i, std::nullopt, total);
}

AttributionScore shapley_exact(const ValueFunction& vf, std::size_t i) {
    check_player(vf.player_count(), i);
    return shapley_exact(DenseGame::from(vf), i);
}

AttributionScore shapley_mc(const ValueFunction& vf, std::size_t i, const McConfig& config) {
    const auto p = vf.player_count();
    check_player(p, i);
    auto block = run_mc(
        vf, config, derive_seed({kShapleyTag, i}), 2,
        [&](Rng& rng, ValueQuery* q) {
            const auto draw = sample_permutation(p, rng);
            Coalition pre;
            for (auto player : draw.order) {
                if (player == i) break;
                pre.insert(player);
            }
            q[0].coalition = pre.with(i);
            q[1].coalition = pre;
        },
        [](const double* v) { return v[0] - v[1]; });
    return mc_score(Method::shapley, i, std::nullopt, block, config);
}

// ---------------------------------------------------------------------------
// Symmetric pairwise indices

namespace {

double second_difference(const DenseGame& g, std::uint64_t s, std::uint64_t bi, std::uint64_t bj) {
    return g(s | bi | bj) - g(s | bi) - g(s | bj) + g(s);
}

double second_difference(const double* v) { return v[0] - v[1] - v[2] + v[3]; }

void fill_second_difference(ValueQuery* q, const Coalition& s, std::size_t i, std::size_t j) {
    q[0].coalition = s.with(i).insert(j);
    q[1].coalition = s.with(i);
    q[2].coalition = s.with(j);
    q[3].coalition = s;
}

}  // namespace

AttributionScore shapley_interaction_index_exact(const DenseGame& game, std::size_t i, std::size_t j) {
    const auto p = game.players;
    check_pair(p, i, j);
    check_enumeration_cap(p);
    const auto bi = bit(i);
    const auto bj = bit(j);
    double total = 0.0;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << p); ++s) {
        if (s & (bi | bj)) continue;
        const auto size = static_cast<std::size_t>(std::popcount(s));
        total += factorial_ratio(size, p - 2 - size, p - 1) * second_difference(game, s, bi, bj);
    }
    return exact_score(Method::shapley_interaction_index, i, j, total);
}

AttributionScore shapley_interaction_index_exact(const ValueFunction& vf, std::size_t i, std::size_t j) {
    check_pair(vf.player_count(), i, j);
    return shapley_interaction_index_exact(DenseGame::from(vf), i, j);
}

AttributionScore shapley_interaction_index_mc(const ValueFunction& vf, std::size_t i, std::size_t j,
                                              const McConfig& config) {
    const auto p = vf.player_count();
    check_pair(p, i, j);
    // The pair acts as one merged player in a game of p-1 players; the
    // coalition is whatever precedes it in a uniform order of those units.
    const auto [lo, hi] = std::minmax(i, j);
    auto block = run_mc(
        vf, config, derive_seed({kInteractionTag, lo, hi}), 4,
        [&, lo = lo, hi = hi](Rng& rng, ValueQuery* q) {
            std::vector<std::size_t> units;
            units.reserve(p - 1);
            for (std::size_t k = 0; k < p; ++k) {
                if (k != hi) units.push_back(k);
            }
            shuffle(units.begin(), units.end(), rng);
            Coalition pre;
            for (auto u : units) {
                if (u == lo) break;
                pre.insert(u);
            }
            fill_second_difference(q, pre, lo, hi);
        },
        [](const double* v) { return second_difference(v); });
    return mc_score(Method::shapley_interaction_index, i, j, block, config);
}

AttributionScore shapley_taylor_2_exact(const DenseGame& game, std::size_t i, std::size_t j) {
    const auto p = game.players;
    check_pair(p, i, j);
    check_enumeration_cap(p);
    const auto bi = bit(i);
    const auto bj = bit(j);
    double total = 0.0;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << p); ++s) {
        if (s & (bi | bj)) continue;
        const auto size = static_cast<std::size_t>(std::popcount(s));
        // 1 / C(p-1, |T|)
        total += factorial_ratio(size, p - 1 - size, p - 1) * second_difference(game, s, bi, bj);
    }
    return exact_score(Method::shapley_taylor_2, i, j, 2.0 / static_cast<double>(p) * total);
}

AttributionScore shapley_taylor_2_exact(const ValueFunction& vf, std::size_t i, std::size_t j) {
    check_pair(vf.player_count(), i, j);
    return shapley_taylor_2_exact(DenseGame::from(vf), i, j);
}

AttributionScore shapley_taylor_2_mc(const ValueFunction& vf, std::size_t i, std::size_t j,
                                     const McConfig& config) {
    const auto p = vf.player_count();
    check_pair(p, i, j);
    const auto [lo, hi] = std::minmax(i, j);
    auto block = run_mc(
        vf, config, derive_seed({kTaylorTag, lo, hi}), 4,
        [&, lo = lo, hi = hi](Rng& rng, ValueQuery* q) {
            const auto draw = sample_permutation(p, rng);
            Coalition pre;
            for (auto player : draw.order) {
                if (player == lo || player == hi) break;
                pre.insert(player);
            }
            fill_second_difference(q, pre, lo, hi);
        },
        [](const double* v) { return second_difference(v); });
    return mc_score(Method::shapley_taylor_2, i, j, block, config);
}

// ---------------------------------------------------------------------------
// Asymmetric interaction

namespace {

/// Δ_{T1}v(S) − Δ_{T1}v(S∖T2) for a coalition S that holds t2.
double asiv_kernel(const DenseGame& g, std::uint64_t s, std::uint64_t b1, std::uint64_t b2) {
    const auto without = s & ~b2;
    return (g(s | b1) - g(s)) - (g(without | b1) - g(without));
}

}  // namespace

AttributionScore asiv_subset_exact(const DenseGame& game, std::size_t t1, std::size_t t2) {
    const auto p = game.players;
    check_pair(p, t1, t2);
    check_enumeration_cap(p);
    // Token cardinalities: T1 and T2 count as single players, every other
    // player contributes its raw token count.
    std::size_t n = 0;
    for (auto sz : game.sizes) n += sz;
    const std::size_t size1 = game.sizes[t1];
    const std::size_t size2 = game.sizes[t2];
    const std::size_t ground = n - size1 - size2 + 2;
    const auto b1 = bit(t1);
    const auto b2 = bit(t2);
    double total = 0.0;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << p); ++s) {
        if (!(s & b2) || (s & b1)) continue;
        std::size_t size = 1;
        for (std::size_t k = 0; k < p; ++k) {
            if (k != t2 && (s & bit(k))) size += game.sizes[k];
        }
        const double c1 = factorial_ratio(ground - 1 - size, size, ground);
        total += c1 * asiv_kernel(game, s, b1, b2);
    }
    return exact_score(Method::asiv_subset, t1, t2, total);
}

AttributionScore asiv_subset_exact(const ValueFunction& vf, std::size_t t1, std::size_t t2) {
    check_pair(vf.player_count(), t1, t2);
    return asiv_subset_exact(DenseGame::from(vf), t1, t2);
}

AttributionScore asiv_perm_exact(const DenseGame& game, std::size_t t1, std::size_t t2) {
    const auto p = game.players;
    check_pair(p, t1, t2);
    check_enumeration_cap(p);
    // Orders with T2 before T1 are grouped by pre(T1) = S: |S|!(p-1-|S|)! of
    // them share each S, and C2 = 2/p! normalizes over the p!/2 valid orders.
    const auto b1 = bit(t1);
    const auto b2 = bit(t2);
    double total = 0.0;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << p); ++s) {
        if (!(s & b2) || (s & b1)) continue;
        const auto size = static_cast<std::size_t>(std::popcount(s));
        total += 2.0 * factorial_ratio(size, p - 1 - size, p) * asiv_kernel(game, s, b1, b2);
    }
    return exact_score(Method::asiv_perm, t1, t2, total);
}

AttributionScore asiv_perm_exact(const ValueFunction& vf, std::size_t t1, std::size_t t2) {
    check_pair(vf.player_count(), t1, t2);
    return asiv_perm_exact(DenseGame::from(vf), t1, t2);
}

SampleBlock asiv_mc_block(const ValueFunction& vf, std::size_t t1, std::size_t t2, const McConfig& config) {
    const auto p = vf.player_count();
    check_pair(p, t1, t2);
    return run_mc(
        vf, config, derive_seed({kAsivTag, t1, t2}), 4,
        [&](Rng& rng, ValueQuery* q) {
            const auto draw = sample_precedence_permutation(p, t1, t2, rng);
            const auto sets = pre_sets(draw, t1, t2);
            q[0].coalition = sets.pre.with(t1);
            q[1].coalition = sets.pre;
            q[2].coalition = sets.pre_excl.with(t1);
            q[3].coalition = sets.pre_excl;
        },
        [](const double* v) { return (v[0] - v[1]) - (v[2] - v[3]); });
}

AttributionScore asiv_mc(const ValueFunction& vf, std::size_t t1, std::size_t t2, const McConfig& config) {
    return mc_score(Method::asiv_mc, t1, t2, asiv_mc_block(vf, t1, t2, config), config);
}

// ---------------------------------------------------------------------------
// Graph construction

namespace {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (;;) {
                const auto k = next.fetch_add(1);
                if (k >= count) return;
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(count);
                    return;
                }
            }
        });
    }
    workers.clear();
    if (failure) std::rethrow_exception(failure);
}

bool is_symmetric(Method m) {
    return m == Method::shapley_interaction_index || m == Method::shapley_taylor_2;
}

}  // namespace

InteractionGraph pairwise_graph(const ValueFunction& vf, const PairwiseConfig& config,
                                std::vector<GraphNode> nodes) {
    const auto p = vf.player_count();
    if (p < 2) throw DomainError("an interaction graph needs at least 2 players");
    if (config.method == Method::shapley) throw DomainError("shapley is not a pairwise method");
    if (nodes.empty()) {
        for (std::size_t i = 0; i < p; ++i) nodes.push_back({std::to_string(i), {i}, 0.0, 0.0});
    }
    if (nodes.size() != p) throw DomainError("node list does not match the player count");

    const bool sampled = config.method == Method::asiv_mc ||
                         (is_symmetric(config.method) && config.monte_carlo);
    const bool exact_nodes = p <= config.exact_node_cap;
    std::optional<DenseGame> dense;
    if (!sampled || exact_nodes) dense = DenseGame::from(vf);

    struct Pair {
        std::size_t from;
        std::size_t to;
    };
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) {
            if (a == b || (is_symmetric(config.method) && a > b)) continue;
            pairs.push_back({a, b});
        }
    }

    std::vector<AttributionScore> results(pairs.size());
    std::vector<AttributionScore> node_scores(p);
    parallel_for(pairs.size() + p, config.threads, [&](std::size_t k) {
        if (k >= pairs.size()) {
            const auto i = k - pairs.size();
            node_scores[i] = exact_nodes ? shapley_exact(*dense, i) : shapley_mc(vf, i, config.mc);
            return;
        }
        // Edge a→b: b is attributed (T1), a conditions (T2).
        const auto [a, b] = pairs[k];
        switch (config.method) {
            case Method::asiv_subset: results[k] = asiv_subset_exact(*dense, b, a); break;
            case Method::asiv_perm: results[k] = asiv_perm_exact(*dense, b, a); break;
            case Method::asiv_mc: results[k] = asiv_mc(vf, b, a, config.mc); break;
            case Method::shapley_interaction_index:
                results[k] = sampled ? shapley_interaction_index_mc(vf, a, b, config.mc)
                                     : shapley_interaction_index_exact(*dense, a, b);
                break;
            case Method::shapley_taylor_2:
                results[k] = sampled ? shapley_taylor_2_mc(vf, a, b, config.mc)
                                     : shapley_taylor_2_exact(*dense, a, b);
                break;
            case Method::shapley: break;
        }
    });

    for (std::size_t i = 0; i < p; ++i) {
        nodes[i].shapley = node_scores[i].value;
        nodes[i].shapley_se = node_scores[i].standard_error;
    }
    InteractionGraph graph(std::move(nodes));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [a, b] = pairs[k];
        graph.set_edge(a, b, results[k].value, results[k].standard_error);
        if (is_symmetric(config.method)) graph.set_edge(b, a, results[k].value, results[k].standard_error);
    }
    graph.metadata["method"] = to_string(config.method);
    graph.metadata["convention"] = convention_of(config.method);
    if (sampled) {
        graph.metadata["m"] = std::to_string(config.mc.m);
        graph.metadata["seed"] = std::to_string(config.mc.seed);
        graph.metadata["w_mode"] = to_string(config.mc.w_mode);
    }
    return graph;
}

nlohmann::ordered_json attribution_json(const InteractionGraph& graph, const PairwiseConfig& config) {
    const bool sampled = config.method == Method::asiv_mc ||
                         (is_symmetric(config.method) && config.monte_carlo);
    nlohmann::ordered_json doc;
    doc["method"] = to_string(config.method);
    doc["convention"] = convention_of(config.method);
    doc["pairs"] = nlohmann::ordered_json::array();
    for (const auto& e : graph.edges())
        doc["pairs"].push_back({{"t2", e.from}, {"t1", e.to}, {"value", e.weight}, {"se", e.standard_error}});
    doc["nodes"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < graph.node_count(); ++i)
        doc["nodes"].push_back({{"player", i}, {"label", graph.nodes()[i].label},
                                {"shapley", graph.nodes()[i].shapley}});
    doc["seed"] = config.mc.seed;
    doc["m"] = sampled ? config.mc.m : 0;
    if (sampled) doc["w_mode"] = to_string(config.mc.w_mode);
    return doc;
}

}  // namespace asiv
