#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asiv/coalition.hpp"
#include "asiv/graph.hpp"

namespace asiv {

enum class Method {
    shapley,
    shapley_interaction_index,
    shapley_taylor_2,
    asiv_subset,
    asiv_perm,
    asiv_mc,
};

std::string to_string(Method method);
Method parse_method(const std::string& text);
/// "subset", "perm" or "symmetric".
std::string convention_of(Method method);

/// How filler realizations are shared across the f-evaluations of one draw.
enum class WMode {
    set_function,  // seeds derive from each coalition; v is a fixed set function
    shared,        // one realization w per permutation draw, reused by every term
    per_term,      // independent realization for every term
};

std::string to_string(WMode mode);
WMode parse_w_mode(const std::string& text);

struct AttributionScore {
    Method method = Method::shapley;
    /// Attributed player (T1), or the first player of a symmetric pair.
    std::size_t t1 = 0;
    /// Conditioning player (T2), or the second player of a symmetric pair.
    std::optional<std::size_t> t2;
    double value = 0.0;
    std::size_t m = 0;  // 0 for exact methods
    double standard_error = 0.0;
    std::uint64_t seed = 0;
};

/// Per-draw values of one Monte Carlo run.
struct SampleBlock {
    std::vector<double> draws;
    double mean = 0.0;
    double standard_error = 0.0;  // sqrt(unbiased variance / m); 0 when m < 2
};

SampleBlock summarize(std::vector<double> draws);

struct McConfig {
    std::size_t m = 500;
    std::uint64_t seed = 0;
    WMode w_mode = WMode::set_function;
    /// Draws evaluated per value-function batch.
    std::size_t block = 256;
};

/// Every coalition value of a small game, indexed by bitmask, plus player
/// token sizes. Exact estimators read from this.
struct DenseGame {
    std::size_t players = 0;
    std::vector<std::size_t> sizes;
    std::vector<double> values;

    static DenseGame from(const ValueFunction& vf);
    double operator()(std::uint64_t mask) const { return values[mask]; }
};

AttributionScore shapley_exact(const ValueFunction& vf, std::size_t i);
AttributionScore shapley_exact(const DenseGame& game, std::size_t i);
AttributionScore shapley_mc(const ValueFunction& vf, std::size_t i, const McConfig& config);

AttributionScore shapley_interaction_index_exact(const ValueFunction& vf, std::size_t i, std::size_t j);
AttributionScore shapley_interaction_index_exact(const DenseGame& game, std::size_t i, std::size_t j);
AttributionScore shapley_interaction_index_mc(const ValueFunction& vf, std::size_t i, std::size_t j,
                                              const McConfig& config);

AttributionScore shapley_taylor_2_exact(const ValueFunction& vf, std::size_t i, std::size_t j);
AttributionScore shapley_taylor_2_exact(const DenseGame& game, std::size_t i, std::size_t j);
AttributionScore shapley_taylor_2_mc(const ValueFunction& vf, std::size_t i, std::size_t j,
                                     const McConfig& config);

/// Weighted-subset form: sum over T2 ∈ S ⊆ N∖{T1} of C1 · [Δ_{T1}v(S) − Δ_{T1}v(S∖T2)].
AttributionScore asiv_subset_exact(const ValueFunction& vf, std::size_t t1, std::size_t t2);
AttributionScore asiv_subset_exact(const DenseGame& game, std::size_t t1, std::size_t t2);

/// Permutation form: average over all orders with T2 before T1 of
/// Δ_{T1}v(pre) − Δ_{T1}v(pre∖T2).
AttributionScore asiv_perm_exact(const ValueFunction& vf, std::size_t t1, std::size_t t2);
AttributionScore asiv_perm_exact(const DenseGame& game, std::size_t t1, std::size_t t2);

/// Monte Carlo estimate of the permutation form from m precedence-constrained draws.
AttributionScore asiv_mc(const ValueFunction& vf, std::size_t t1, std::size_t t2, const McConfig& config);
SampleBlock asiv_mc_block(const ValueFunction& vf, std::size_t t1, std::size_t t2, const McConfig& config);

struct PairwiseConfig {
    Method method = Method::asiv_perm;
    /// Pairwise symmetric methods run as Monte Carlo when set; asiv_mc always does.
    bool monte_carlo = false;
    McConfig mc;
    /// Node Shapley values are exact up to this many players, sampled beyond.
    std::size_t exact_node_cap = 12;
    std::size_t threads = 1;
};

/// Builds the full directed graph: edge a→b carries φ_a(b) (b attributed, a
/// conditioning) for every ordered pair; node attributes hold Shapley values.
/// `nodes` supplies labels and positions; defaults to one node per player.
InteractionGraph pairwise_graph(const ValueFunction& vf, const PairwiseConfig& config,
                                std::vector<GraphNode> nodes = {});

/// {"method", "convention", "pairs": [...], "nodes": [...], "seed", "m"}.
nlohmann::ordered_json attribution_json(const InteractionGraph& graph, const PairwiseConfig& config);

}  // namespace asiv
