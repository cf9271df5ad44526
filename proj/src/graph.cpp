#include "asiv/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "asiv/error.hpp"

namespace asiv {

using ojson = nlohmann::ordered_json;

InteractionGraph::InteractionGraph(std::vector<GraphNode> nodes) : nodes_(std::move(nodes)) {}

void InteractionGraph::set_edge(std::size_t from, std::size_t to, double weight, double standard_error) {
    if (from >= nodes_.size() || to >= nodes_.size())
        throw DomainError("edge endpoint out of range");
    if (from == to) throw DomainError("self-loops are not allowed");
    if (!std::isfinite(weight)) throw DomainError("edge weight must be finite");
    const GraphEdge edge{from, to, weight, standard_error};
    auto it = std::lower_bound(edges_.begin(), edges_.end(), edge, [](const GraphEdge& a, const GraphEdge& b) {
        return std::tie(a.from, a.to) < std::tie(b.from, b.to);
    });
    if (it != edges_.end() && it->from == from && it->to == to) {
        *it = edge;
    } else {
        edges_.insert(it, edge);
    }
}

void InteractionGraph::remove_edge(std::size_t from, std::size_t to) {
    std::erase_if(edges_, [&](const GraphEdge& e) { return e.from == from && e.to == to; });
}

const GraphEdge* InteractionGraph::find_edge(std::size_t from, std::size_t to) const {
    for (const auto& e : edges_) {
        if (e.from == from && e.to == to) return &e;
    }
    return nullptr;
}

bool operator==(const InteractionGraph& a, const InteractionGraph& b) {
    if (a.metadata != b.metadata || a.edges_ != b.edges_ || a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
        const auto& x = a.nodes_[i];
        const auto& y = b.nodes_[i];
        if (x.label != y.label || x.positions != y.positions || x.shapley != y.shapley ||
            x.shapley_se != y.shapley_se)
            return false;
    }
    return true;
}

std::string to_string(WeightMode mode) {
    switch (mode) {
        case WeightMode::positive_part: return "positive";
        case WeightMode::absolute: return "absolute";
        case WeightMode::shift: return "shift";
    }
    return "?";
}

WeightMode parse_weight_mode(const std::string& text) {
    if (text == "positive") return WeightMode::positive_part;
    if (text == "absolute") return WeightMode::absolute;
    if (text == "shift") return WeightMode::shift;
    throw DomainError("unknown weight mode \"" + text + "\" (expected positive, absolute or shift)");
}

std::vector<std::size_t> order_by_score(const std::vector<double>& scores,
                                        const std::vector<std::size_t>& anchors) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return anchors[a] < anchors[b];
    });
    return order;
}

RankingResult pagerank(const InteractionGraph& graph, const PageRankOptions& options) {
    const std::size_t p = graph.node_count();
    if (p == 0) throw DomainError("pagerank needs at least one node");
    if (!(options.damping > 0.0 && options.damping < 1.0))
        throw DomainError("damping must lie strictly between 0 and 1");
    if (options.max_iterations < 1) throw DomainError("max_iterations must be at least 1");

    double min_weight = 0.0;
    for (const auto& e : graph.edges()) {
        if (!std::isfinite(e.weight)) throw DomainError("non-finite edge weight");
        min_weight = std::min(min_weight, e.weight);
    }
    auto transform = [&](double w) {
        switch (options.weight_mode) {
            case WeightMode::positive_part: return std::max(w, 0.0);
            case WeightMode::absolute: return std::abs(w);
            case WeightMode::shift: return w - min_weight;
        }
        return 0.0;
    };

    struct Link {
        std::size_t from;
        std::size_t to;
        double weight;
    };
    std::vector<Link> links;
    std::vector<double> out_sum(p, 0.0);
    for (const auto& e : graph.edges()) {
        const double w = transform(e.weight);
        if (w > 0.0) {
            links.push_back({e.from, e.to, w});
            out_sum[e.from] += w;
        }
    }

    const double pd = static_cast<double>(p);
    const double d = options.damping;
    std::vector<double> x(p, 1.0 / pd);
    std::vector<double> next(p);
    RankingResult result;
    for (int it = 1; it <= options.max_iterations; ++it) {
        double dangling = 0.0;
        for (std::size_t v = 0; v < p; ++v) {
            if (out_sum[v] == 0.0) dangling += x[v];
        }
        std::fill(next.begin(), next.end(), (1.0 - d) / pd + d * dangling / pd);
        for (const auto& l : links) next[l.to] += d * x[l.from] * l.weight / out_sum[l.from];
        double residual = 0.0;
        for (std::size_t v = 0; v < p; ++v) residual += std::abs(next[v] - x[v]);
        x.swap(next);
        result.iterations = it;
        result.residual = residual;
        if (residual < options.tolerance) {
            result.converged = true;
            break;
        }
    }
    const double total = std::accumulate(x.begin(), x.end(), 0.0);
    for (auto& v : x) v /= total;
    result.scores = std::move(x);

    std::vector<std::size_t> anchors(p);
    for (std::size_t i = 0; i < p; ++i) {
        const auto& pos = graph.nodes()[i].positions;
        anchors[i] = pos.empty() ? i : pos.front();
    }
    result.order = order_by_score(result.scores, anchors);
    return result;
}

GraphFormat parse_graph_format(const std::string& text) {
    if (text == "dot") return GraphFormat::dot;
    if (text == "json") return GraphFormat::json;
    if (text == "matrix-csv" || text == "csv") return GraphFormat::matrix_csv;
    throw DomainError("unknown graph format \"" + text + "\" (expected dot, json or matrix-csv)");
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_sig6(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
    return std::string(buf, res.ptr);
}

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

ojson graph_to_json(const InteractionGraph& g) {
    ojson doc;
    doc["p"] = g.node_count();
    doc["nodes"] = ojson::array();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        const auto& n = g.nodes()[i];
        doc["nodes"].push_back({{"id", i},
                                {"label", n.label},
                                {"positions", n.positions},
                                {"shapley", n.shapley},
                                {"shapley_se", n.shapley_se}});
    }
    doc["edges"] = ojson::array();
    for (const auto& e : g.edges())
        doc["edges"].push_back({{"from", e.from}, {"to", e.to}, {"weight", e.weight}, {"se", e.standard_error}});
    if (!g.metadata.empty()) doc["metadata"] = g.metadata;
    return doc;
}

}  // namespace

void export_graph(const InteractionGraph& g, GraphFormat format, std::ostream& sink) {
    switch (format) {
        case GraphFormat::json:
            sink << graph_to_json(g).dump() << '\n';
            break;
        case GraphFormat::dot:
            for (const auto& [k, v] : g.metadata) sink << "// " << k << ": " << v << '\n';
            sink << "digraph interaction {\n";
            for (std::size_t i = 0; i < g.node_count(); ++i)
                sink << "  n" << i << " [label=\"" << dot_escape(g.nodes()[i].label) << "\"];\n";
            for (const auto& e : g.edges())
                sink << "  n" << e.from << " -> n" << e.to << " [label=\"" << format_sig6(e.weight)
                     << "\"];\n";
            sink << "}\n";
            break;
        case GraphFormat::matrix_csv: {
            // Rows: conditioning player. Columns: attributed player.
            for (const auto& [k, v] : g.metadata) sink << "# " << k << ": " << v << '\n';
            const std::size_t p = g.node_count();
            std::vector<std::vector<std::string>> cells(p, std::vector<std::string>(p));
            for (const auto& e : g.edges()) cells[e.from][e.to] = format_sig6(e.weight);
            sink << "conditioning\\attributed";
            for (std::size_t j = 0; j < p; ++j) sink << ',' << csv_field(g.nodes()[j].label);
            sink << '\n';
            for (std::size_t i = 0; i < p; ++i) {
                sink << csv_field(g.nodes()[i].label);
                for (std::size_t j = 0; j < p; ++j) sink << ',' << cells[i][j];
                sink << '\n';
            }
            break;
        }
    }
    if (!sink) throw Error("graph export: sink is not writable");
}

std::string export_graph(const InteractionGraph& g, GraphFormat format) {
    std::ostringstream out;
    export_graph(g, format, out);
    return out.str();
}

InteractionGraph import_graph_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("graph file is not valid JSON: ") + e.what());
    }
    try {
        const auto p = doc.at("p").get<std::size_t>();
        std::vector<GraphNode> nodes(p);
        for (const auto& n : doc.at("nodes")) {
            const auto id = n.at("id").get<std::size_t>();
            if (id >= p) throw LoadError("node id " + std::to_string(id) + " out of range");
            nodes[id].label = n.at("label").get<std::string>();
            nodes[id].positions = n.at("positions").get<PositionSet>();
            nodes[id].shapley = n.value("shapley", 0.0);
            nodes[id].shapley_se = n.value("shapley_se", 0.0);
        }
        InteractionGraph g(std::move(nodes));
        for (const auto& e : doc.at("edges"))
            g.set_edge(e.at("from").get<std::size_t>(), e.at("to").get<std::size_t>(),
                       e.at("weight").get<double>(), e.value("se", 0.0));
        if (doc.contains("metadata"))
            g.metadata = doc["metadata"].get<std::map<std::string, std::string>>();
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("graph file does not match the schema: ") + e.what());
    }
}

}  // namespace asiv
