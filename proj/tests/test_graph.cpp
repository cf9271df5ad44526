#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "asiv/error.hpp"
#include "asiv/graph.hpp"
#include "asiv/rng.hpp"

using namespace asiv;

namespace {

InteractionGraph nodes(std::size_t p) {
    std::vector<GraphNode> n;
    for (std::size_t i = 0; i < p; ++i) n.push_back({"t" + std::to_string(i), {i}, 0.0, 0.0});
    return InteractionGraph(n);
}

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

InteractionGraph random_graph(std::size_t p, std::uint64_t seed) {
    auto g = nodes(p);
    Rng rng(seed);
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) {
            if (a != b && rng.uniform_index(3) != 0) g.set_edge(a, b, 2.0 * rng.uniform01() - 0.7, rng.uniform01());
        }
    }
    return g;
}

}  // namespace

TEST_CASE("pagerank reference cases") {
    auto cycle = nodes(2);
    cycle.set_edge(0, 1, 1.0);
    cycle.set_edge(1, 0, 1.0);
    const auto r = pagerank(cycle);
    CHECK(std::abs(r.scores[0] - 0.5) <= 1e-9);
    CHECK(std::abs(r.scores[1] - 0.5) <= 1e-9);

    // Node 1 is dangling: x0 = 0.075 + 0.425·x1 with x0 + x1 = 1, so x0 = 0.5 / 1.425.
    auto single = nodes(2);
    single.set_edge(0, 1, 1.0);
    const auto s = pagerank(single);
    CHECK(std::abs(s.scores[0] - 0.5 / 1.425) <= 1e-9);
    CHECK(std::abs(s.scores[0] - 0.35088) <= 1e-4);
    CHECK(std::abs(s.scores[1] - 0.64912) <= 1e-4);
    CHECK(s.order == std::vector<std::size_t>{1, 0});

    const auto one = pagerank(nodes(1));
    CHECK(one.scores == std::vector<double>{1.0});
}

TEST_CASE("pagerank invariants") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto g = random_graph(2 + seed % 7, seed);
        const auto base = pagerank(g);
        CHECK(std::abs(total(base.scores) - 1.0) <= 1e-9);
        for (double x : base.scores) CHECK(x >= 0.0);

        auto scaled = nodes(g.node_count());
        for (const auto& e : g.edges()) scaled.set_edge(e.from, e.to, e.weight * 37.5);
        const auto rs = pagerank(scaled);
        for (std::size_t i = 0; i < g.node_count(); ++i) CHECK(std::abs(rs.scores[i] - base.scores[i]) <= 1e-9);

        for (auto mode : {WeightMode::absolute, WeightMode::shift}) {
            PageRankOptions o;
            o.weight_mode = mode;
            CHECK(std::abs(total(pagerank(g, o).scores) - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("zero-weight edges change nothing") {
    auto g = random_graph(5, 3);
    const auto before = pagerank(g);
    g.set_edge(0, 4, 0.0);
    g.set_edge(3, 1, 0.0);
    const auto after = pagerank(g);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(after.scores[i] - before.scores[i]) <= 1e-12);
}

TEST_CASE("unique positive in-edge wins") {
    auto g = nodes(4);
    g.set_edge(0, 2, 0.8);
    g.set_edge(1, 3, -0.5);
    g.set_edge(3, 0, -1.0);
    const auto r = pagerank(g);
    for (std::size_t i : {0, 1, 3}) CHECK(r.scores[2] > r.scores[i]);
    CHECK(r.order.front() == 2);
}

TEST_CASE("ties resolve by position") {
    const auto r = pagerank(nodes(4));
    CHECK(r.order == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(order_by_score({1.0, 2.0, 2.0}, {5, 9, 1}) == std::vector<std::size_t>{2, 1, 0});
}

TEST_CASE("graph validation") {
    auto g = nodes(2);
    CHECK_THROWS_AS(g.set_edge(0, 0, 1.0), DomainError);
    CHECK_THROWS_AS(g.set_edge(0, 1, std::nan("")), DomainError);
    CHECK_THROWS_AS(g.set_edge(0, 2, 1.0), DomainError);
    g.set_edge(0, 1, 1.0);
    g.set_edge(0, 1, 2.0);
    CHECK(g.edges().size() == 1);
    CHECK(g.find_edge(0, 1)->weight == 2.0);
    g.remove_edge(0, 1);
    CHECK(g.edges().empty());
    PageRankOptions bad;
    bad.damping = 1.0;
    CHECK_THROWS_AS(pagerank(g, bad), DomainError);
    CHECK_THROWS_AS(pagerank(InteractionGraph{}), DomainError);
    CHECK_THROWS_AS(parse_weight_mode("log"), DomainError);
}

TEST_CASE("exports") {
    CHECK(export_graph(InteractionGraph{}, GraphFormat::json) == std::string(R"({"p":0,"nodes":[],"edges":[]})") + "\n");

    auto g = nodes(2);
    g.set_edge(0, 1, 0.123456789);
    const auto csv = export_graph(g, GraphFormat::matrix_csv);
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') rows.push_back(line);
    }
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == "conditioning\\attributed,t0,t1");
    CHECK(rows[1] == "t0,,0.123457");
    CHECK(rows[2] == "t1,,");

    const auto dot = export_graph(g, GraphFormat::dot);
    CHECK(dot.find("digraph") != std::string::npos);
    CHECK(dot.find("0.123457") != std::string::npos);
    CHECK(dot.find("->") != std::string::npos);
}

TEST_CASE("json round trip") {
    auto g = random_graph(6, 9);
    g.nodes()[2].shapley = 1.0 / 3.0;
    g.nodes()[2].shapley_se = 1e-17;
    g.nodes()[4].label = "very \"funny\"";
    g.metadata["method"] = "asiv-mc";
    const auto text = export_graph(g, GraphFormat::json);
    const auto back = import_graph_json(text);
    CHECK(back == g);
    CHECK(export_graph(back, GraphFormat::json) == text);
    CHECK_THROWS_AS(import_graph_json("{"), LoadError);
}

TEST_CASE("number formatting") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_sig6(2.0 / 3.0) == "0.666667");
}
