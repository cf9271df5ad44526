#include <doctest.h>

#include <cmath>

#include "asiv/attribution.hpp"
#include "asiv/cli.hpp"
#include "asiv/error.hpp"

using namespace asiv;

namespace {

/// v(S) = Σ_{i∈S} c_i.
TableValueFunction additive_game(const std::vector<double>& c) {
    const auto p = c.size();
    std::vector<double> v(std::size_t{1} << p, 0.0);
    for (std::size_t m = 0; m < v.size(); ++m) {
        for (std::size_t i = 0; i < p; ++i) {
            if (m >> i & 1) v[m] += c[i];
        }
    }
    return TableValueFunction(p, v);
}

/// Player `dummy` never changes the value.
TableValueFunction with_dummy_player(const TableValueFunction& g) {
    const auto p = g.player_count();
    std::vector<double> v(std::size_t{1} << (p + 1));
    for (std::size_t m = 0; m < v.size(); ++m) v[m] = g.at(m & ((std::uint64_t{1} << p) - 1));
    return TableValueFunction(p + 1, v);
}

}  // namespace

TEST_CASE("shapley spec values") {
    const auto g3 = g3_game();
    CHECK(shapley_exact(g3, 0).value == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
    CHECK(shapley_exact(g3, 2).value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(shapley_exact(additive_game({1, 2, 3}), 1).value == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("null interaction on additive games") {
    const auto g = additive_game({0.5, -1.25, 2.0, 0.75});
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 4; ++b) {
            if (a == b) continue;
            CHECK(std::abs(shapley_interaction_index_exact(g, a, b).value) <= 1e-12);
            CHECK(std::abs(shapley_taylor_2_exact(g, a, b).value) <= 1e-12);
            CHECK(std::abs(asiv_subset_exact(g, a, b).value) <= 1e-12);
            CHECK(std::abs(asiv_perm_exact(g, a, b).value) <= 1e-12);
        }
    }
}

TEST_CASE("two-player permutation form") {
    const TableValueFunction g(2, {0.0, 0.25, -1.0, 3.0});
    CHECK(asiv_perm_exact(g, 0, 1).value == doctest::Approx(3.0 - 0.25 + 1.0).epsilon(1e-12));
    CHECK(shapley_taylor_2_exact(g, 0, 1).value == doctest::Approx(3.75).epsilon(1e-12));
}

TEST_CASE("dummy players get nothing") {
    const auto g = with_dummy_player(random_table_game(4, 7));
    const std::size_t d = 4;
    CHECK(shapley_exact(g, d).value == 0.0);
    McConfig mc{200, 3};
    const auto est = shapley_mc(g, d, mc);
    CHECK(est.value == 0.0);
    CHECK(est.standard_error == 0.0);
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(std::abs(asiv_subset_exact(g, d, t).value) <= 1e-12);
        CHECK(std::abs(asiv_perm_exact(g, d, t).value) <= 1e-12);
        CHECK(std::abs(asiv_subset_exact(g, t, d).value) <= 1e-12);
        CHECK(std::abs(asiv_perm_exact(g, t, d).value) <= 1e-12);
        const auto a = asiv_mc(g, d, t, mc);
        CHECK(a.value == 0.0);
        CHECK(a.standard_error == 0.0);
    }
}

TEST_CASE("single-draw Monte Carlo is one marginal contribution") {
    const auto g3 = g3_game();
    const McConfig mc{1, 42};
    const auto a = shapley_mc(g3, 0, mc);
    const auto b = shapley_mc(g3, 0, mc);
    CHECK(a.value == b.value);
    CHECK(a.standard_error == 0.0);
    const std::vector<double> marginals{1, 3, 1, 4};  // all values Δ_0 v(S) can take
    CHECK(std::find(marginals.begin(), marginals.end(), a.value) != marginals.end());
}

TEST_CASE("Monte Carlo estimates land near the exact values") {
    const auto g3 = g3_game();
    const auto s = shapley_mc(g3, 0, {20000, 9});
    CHECK(std::abs(s.value - 7.0 / 3.0) <= 5.0 * s.standard_error);
    const auto a = asiv_mc(g3, 0, 1, {30000, 9});
    CHECK(std::abs(a.value - 8.0 / 3.0) <= 5.0 * a.standard_error);
    CHECK(a.m == 30000);
    CHECK(a.method == Method::asiv_mc);
    const auto sii = shapley_interaction_index_mc(g3, 0, 1, {20000, 9});
    CHECK(std::abs(sii.value - 2.5) <= 5.0 * sii.standard_error + 1e-12);
    const auto sti = shapley_taylor_2_mc(g3, 0, 1, {20000, 9});
    CHECK(std::abs(sti.value - 7.0 / 3.0) <= 5.0 * sti.standard_error + 1e-12);
}

TEST_CASE("Monte Carlo runs are reproducible") {
    const auto g = random_table_game(6, 3);
    const McConfig mc{500, 77};
    const auto a = asiv_mc(g, 1, 4, mc);
    const auto b = asiv_mc(g, 1, 4, mc);
    CHECK(a.value == b.value);
    CHECK(a.standard_error == b.standard_error);
    // Block size changes batching, not results.
    McConfig small = mc;
    small.block = 7;
    CHECK(asiv_mc(g, 1, 4, small).value == a.value);
    const auto block = asiv_mc_block(g, 1, 4, mc);
    CHECK(block.draws.size() == 500);
    CHECK(block.mean == a.value);
}

TEST_CASE("standard error summary") {
    const auto s = summarize({1.0, 3.0});
    CHECK(s.mean == 2.0);
    CHECK(s.standard_error == doctest::Approx(1.0));
    CHECK(summarize({5.0}).standard_error == 0.0);
}

TEST_CASE("factor-2 relation on random games") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const std::size_t p = 2 + seed % 5;
        const auto g = DenseGame::from(random_table_game(p, derive_seed({seed, 0xf2})));
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) {
                if (a == b) continue;
                const double sub = asiv_subset_exact(g, a, b).value;
                REQUIRE(asiv_perm_exact(g, a, b).value == doctest::Approx(2.0 * sub).epsilon(1e-10));
                REQUIRE(asiv_subset_exact(g, b, a).value == doctest::Approx(sub).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("Monte Carlo error matches its reported standard error") {
    const auto g = random_table_game(5, 11);
    const double exact = asiv_perm_exact(g, 0, 3).value;
    double sq = 0.0;
    double se = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto est = asiv_mc(g, 0, 3, {4096, seed});
        sq += (est.value - exact) * (est.value - exact);
        se += est.standard_error;
    }
    const double rmse = std::sqrt(sq / 100.0);
    CHECK(rmse <= 2.0 * (se / 100.0));
}

TEST_CASE("subset form with a multi-token span uses raw token counts") {
    // Players: {0}, {1,2}, {3}. A purely additive model still has no interaction.
    auto pred = make_additive_predictor({{"a", 0.2}, {"b", 0.1}, {"c", -0.3}, {"d", 0.4}}, 0.0, Link::identity);
    const ModelValueFunction vf(pred, std::make_shared<PadFiller>(), {"a", "b", "c", "d"}, 1,
                                coalesce(4, {{1, 2}}));
    CHECK(vf.player_sizes() == std::vector<std::size_t>{1, 2, 1});
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            if (a != b) CHECK(std::abs(asiv_subset_exact(vf, a, b).value) <= 1e-12);
        }
    }
}

TEST_CASE("exact estimators refuse large games") {
    class Big : public ValueFunction {
    public:
        std::size_t player_count() const override { return 21; }
        void evaluate(std::span<const ValueQuery>, std::span<double> out) const override {
            std::fill(out.begin(), out.end(), 0.0);
        }
    } big;
    CHECK_THROWS_AS(shapley_exact(big, 0), CapExceeded);
    CHECK_THROWS_AS(asiv_perm_exact(big, 0, 1), CapExceeded);
    CHECK_NOTHROW(asiv_mc(big, 0, 1, {10, 0}));
    CHECK_THROWS_AS(asiv_mc(big, 0, 0, {10, 0}), DomainError);
    CHECK_THROWS_AS(asiv_mc(big, 0, 1, {0, 0}), DomainError);
}

TEST_CASE("pairwise graphs") {
    const TableValueFunction two(2, {0.0, 1.0, 2.0, 4.0});
    for (auto method : {Method::shapley_interaction_index, Method::shapley_taylor_2, Method::asiv_subset,
                        Method::asiv_perm, Method::asiv_mc}) {
        PairwiseConfig cfg;
        cfg.method = method;
        cfg.mc.m = 50;
        CHECK(pairwise_graph(two, cfg).edges().size() == 2);
    }

    PairwiseConfig subset;
    subset.method = Method::asiv_subset;
    for (const auto& e : pairwise_graph(additive_game({1, -2, 0.5}), subset).edges())
        CHECK(std::abs(e.weight) <= 1e-12);

    PairwiseConfig perm;
    perm.method = Method::asiv_perm;
    const auto g = pairwise_graph(g3_game(), perm);
    CHECK(g.edges().size() == 6);
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = a + 1; b < 3; ++b)
            CHECK(g.find_edge(a, b)->weight == doctest::Approx(g.find_edge(b, a)->weight).epsilon(1e-12));
    }
    // Edge a→b holds φ_a(b): b attributed, a conditioning.
    CHECK(g.find_edge(1, 0)->weight == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
    CHECK(g.nodes()[1].shapley == doctest::Approx(10.0 / 3.0).epsilon(1e-12));
    CHECK(g.metadata.at("convention") == "perm");

    const auto doc = attribution_json(g, perm);
    CHECK(doc["convention"] == "perm");
    CHECK(doc["pairs"].size() == 6);
    CHECK(doc["nodes"].size() == 3);

    CHECK_THROWS_AS(pairwise_graph(TableValueFunction(1, {0.0, 1.0}), perm), DomainError);
}

TEST_CASE("pairwise graph does not depend on thread count") {
    const auto g = random_table_game(5, 21);
    PairwiseConfig cfg;
    cfg.method = Method::asiv_mc;
    cfg.mc = {300, 5};
    const auto serial = pairwise_graph(g, cfg);
    cfg.threads = 4;
    CHECK(pairwise_graph(g, cfg) == serial);
}

TEST_CASE("method names") {
    CHECK(parse_method("asiv-perm") == Method::asiv_perm);
    CHECK(parse_method("sii") == Method::shapley_interaction_index);
    CHECK(parse_method("shapley-taylor-2") == Method::shapley_taylor_2);
    CHECK(convention_of(Method::asiv_subset) == "subset");
    CHECK(convention_of(Method::asiv_mc) == "perm");
    CHECK(convention_of(Method::shapley_interaction_index) == "symmetric");
    CHECK(parse_w_mode("per-term") == WMode::per_term);
    CHECK_THROWS_AS(parse_method("hedge"), DomainError);
}

TEST_CASE("shared and per-term filler modes") {
    const Corpus corpus{{{"a", "b", "c", "d"}, {"e", "f", "g", "h"}, {"x", "y", "z", "w"}}, {}};
    auto pred = make_interaction_predictor({{"a", 0.5}, {"x", -0.5}}, {{make_token_pair("a", "b"), 1.0}}, 0.0);
    const ModelValueFunction vf(pred, std::make_shared<CorpusFiller>(corpus), {"a", "b", "q", "r"}, 1,
                                singleton_partition(4), {1, 3, true});
    for (auto mode : {WMode::set_function, WMode::shared, WMode::per_term}) {
        const McConfig mc{400, 8, mode};
        const auto a = asiv_mc(vf, 0, 1, mc);
        CHECK(a.value == asiv_mc(vf, 0, 1, mc).value);
        CHECK(std::isfinite(a.standard_error));
    }
}
