#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "asiv/filler.hpp"

namespace asiv {

struct GraphNode {
    std::string label;
    PositionSet positions;
    double shapley = 0.0;
    double shapley_se = 0.0;
};

/// Edge from -> to carries the contribution of `to` given the presence of `from`.
struct GraphEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    double weight = 0.0;
    double standard_error = 0.0;

    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

/// Directed weighted graph over players. No self-loops, at most one edge per
/// ordered pair, finite weights. Edges are kept sorted by (from, to).
class InteractionGraph {
public:
    InteractionGraph() = default;
    explicit InteractionGraph(std::vector<GraphNode> nodes);

    std::size_t node_count() const { return nodes_.size(); }
    const std::vector<GraphNode>& nodes() const { return nodes_; }
    std::vector<GraphNode>& nodes() { return nodes_; }
    const std::vector<GraphEdge>& edges() const { return edges_; }

    /// Inserts or replaces the edge for (from, to).
    void set_edge(std::size_t from, std::size_t to, double weight, double standard_error = 0.0);
    void remove_edge(std::size_t from, std::size_t to);
    const GraphEdge* find_edge(std::size_t from, std::size_t to) const;

    /// Free-form provenance (method, convention, seed, ...), exported verbatim.
    std::map<std::string, std::string> metadata;

    friend bool operator==(const InteractionGraph& a, const InteractionGraph& b);

private:
    std::vector<GraphNode> nodes_;
    std::vector<GraphEdge> edges_;
};

/// How signed edge weights become nonnegative transition weights.
enum class WeightMode {
    positive_part,  // max(w, 0)
    absolute,       // |w|
    shift,          // w - min(0, smallest weight in the graph)
};

std::string to_string(WeightMode mode);
WeightMode parse_weight_mode(const std::string& text);

struct PageRankOptions {
    double damping = 0.85;
    double tolerance = 1e-10;
    int max_iterations = 100;
    WeightMode weight_mode = WeightMode::positive_part;
};

struct RankingResult {
    std::vector<double> scores;
    /// Players by descending score; equal scores keep ascending token position.
    std::vector<std::size_t> order;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;
};

/// Power iteration on the column-stochastic transition of the transformed
/// weights. Nodes without positive outgoing weight teleport uniformly.
RankingResult pagerank(const InteractionGraph& graph, const PageRankOptions& options = {});

/// Orders players by descending score, breaking ties by anchor position.
std::vector<std::size_t> order_by_score(const std::vector<double>& scores,
                                        const std::vector<std::size_t>& anchors);

enum class GraphFormat { dot, json, matrix_csv };
GraphFormat parse_graph_format(const std::string& text);

std::string export_graph(const InteractionGraph& graph, GraphFormat format);
void export_graph(const InteractionGraph& graph, GraphFormat format, std::ostream& sink);

/// Inverse of the JSON export.
InteractionGraph import_graph_json(const std::string& text);

/// Shortest round-trip decimal form of `v`.
std::string format_double(double v);
/// `v` to six significant digits.
std::string format_sig6(double v);

}  // namespace asiv
