#include <doctest.h>

#include <atomic>
#include <map>
#include <thread>

#include "asiv/coalition.hpp"
#include "asiv/error.hpp"

using namespace asiv;

namespace {

/// Counts the sequences it is asked to score.
class CountingPredictor : public Predictor {
public:
    explicit CountingPredictor(std::shared_ptr<const Predictor> inner) : inner_(std::move(inner)) {}
    std::string name() const override { return "counting"; }
    int classes() const override { return inner_->classes(); }
    mutable std::atomic<std::size_t> calls{0};
    mutable std::atomic<std::size_t> sequences{0};

protected:
    std::vector<double> do_predict(std::span<const TokenSequence> seqs, int cls) const override {
        ++calls;
        sequences += seqs.size();
        return inner_->predict_batch(seqs, cls);
    }

private:
    std::shared_ptr<const Predictor> inner_;
};

Coalition of(std::initializer_list<std::size_t> players) {
    Coalition c;
    for (auto p : players) c.insert(p);
    return c;
}

}  // namespace

TEST_CASE("coalition bit operations") {
    Coalition c;
    CHECK(c.empty());
    c.insert(3).insert(200);
    CHECK(c.contains(3));
    CHECK(c.contains(200));
    CHECK_FALSE(c.contains(4));
    CHECK(c.size() == 2);
    CHECK(c.members() == std::vector<std::size_t>{3, 200});
    CHECK(c.without(200) == Coalition::from_mask(8));
    CHECK(c.with(0).size() == 3);
}

TEST_CASE("coalesce") {
    const auto three = coalesce(3, {});
    CHECK(three.player_count() == 3);
    const auto merged = coalesce(4, {{1, 2}});
    CHECK(merged.players == std::vector<PositionSet>{{0}, {1, 2}, {3}});
    CHECK(merged.player_count() == 3);
    CHECK_THROWS_AS(coalesce(3, {{0}, {0, 1}}), DomainError);
    CHECK_THROWS_AS(coalesce(3, {{3}}), DomainError);
    // p = n − Σ|span| + |spans|
    const auto two_spans = coalesce(7, {{0, 1}, {4, 5, 6}});
    CHECK(two_spans.player_count() == 7 - 5 + 2);
    CHECK(merged.label({"a", "b", "c", "d"}, 1) == "b c");
    CHECK(merged.kept_positions(of({1})) == PositionSet{1, 2});
}

TEST_CASE("enumerate coalitions") {
    std::vector<std::uint64_t> seen;
    for (auto c : enumerate_coalitions(2)) seen.push_back(c.low_mask());
    CHECK(seen == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(enumerate_coalitions(0).size() == 1);
    CHECK((*enumerate_coalitions(0).begin()).empty());
    CHECK_THROWS_AS(enumerate_coalitions(21), CapExceeded);
    CHECK_NOTHROW(check_enumeration_cap(20));
}

TEST_CASE("table value function") {
    const TableValueFunction g(3, {0, 1, 2, 5, 0, 1, 2, 6});
    CHECK(g.value(of({0, 1})) == 5.0);
    CHECK(g.value(of({})) == 0.0);
    const auto round = TableValueFunction::from_json(g.to_json());
    CHECK(round.table() == g.table());

    try {
        TableValueFunction::from_json(R"({"players": 2, "values": {"0": 0, "1": 1, "3": 2}})");
        FAIL("expected a load error");
    } catch (const LoadError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    CHECK_THROWS_AS(TableValueFunction::from_json(R"({"players": 21, "values": {}})"), CapExceeded);
    CHECK_THROWS_AS(g.value(of({3})), DomainError);
}

TEST_CASE("model value function arithmetic") {
    auto pred = make_additive_predictor({{"good", 2.0}}, 0.0);
    auto pad = std::make_shared<PadFiller>();
    const ModelValueFunction vf(pred, pad, {"good"}, 1, singleton_partition(1));
    CHECK(vf.value(of({0})) == doctest::Approx(logistic(2.0) - 0.5).epsilon(1e-12));
    CHECK(vf.value(of({0})) == doctest::Approx(0.3808).epsilon(1e-4));
    CHECK(vf.value(of({})) == 0.0);
}

TEST_CASE("v(empty) is exactly zero for every filler") {
    const Corpus corpus{{{"a", "b", "c"}, {"d", "e"}, {"f", "g", "h", "i"}}, {}};
    auto model = std::make_shared<NgramModel>(train_ngram(corpus, 2, 1.0));
    auto pred = make_interaction_predictor({{"a", 0.3}, {"x", 1.0}}, {{make_token_pair("x", "y"), 2.0}}, -0.1);
    const std::vector<std::shared_ptr<const Filler>> fillers{
        std::make_shared<PadFiller>(), std::make_shared<CorpusFiller>(corpus),
        std::make_shared<NgramFiller>(model, FillMode::sample)};
    for (const auto& f : fillers) {
        for (std::size_t r : {1, 3}) {
            const ModelValueFunction vf(pred, f, {"x", "a", "y", "q"}, 1, singleton_partition(4), {r, 17, true});
            CHECK(vf.value(Coalition{}) == 0.0);
        }
    }
}

TEST_CASE("full coalition with the pad filler") {
    auto pred = make_interaction_predictor({{"a", 0.3}, {"b", -0.8}}, {{make_token_pair("a", "b"), 1.5}}, 0.2);
    const TokenSequence x{"a", "b", "c"};
    const ModelValueFunction vf(pred, std::make_shared<PadFiller>(), x, 1, singleton_partition(3));
    const std::vector<TokenSequence> both{x, {"<pad>", "<pad>", "<pad>"}};
    const auto probs = pred->predict_batch(both, 1);
    CHECK(vf.value(of({0, 1, 2})) == doctest::Approx(probs[0] - probs[1]).epsilon(1e-12));
}

TEST_CASE("identity-link additive games are additive over disjoint coalitions") {
    auto pred = make_additive_predictor({{"a", 0.1}, {"b", 0.2}, {"c", -0.05}, {"d", 0.3}}, 0.1, Link::identity);
    const ModelValueFunction vf(pred, std::make_shared<PadFiller>(), {"a", "b", "c", "d"}, 1, singleton_partition(4));
    for (std::uint64_t s = 0; s < 16; ++s) {
        for (std::uint64_t t = 0; t < 16; ++t) {
            if (s & t) continue;
            CHECK(vf.value(Coalition::from_mask(s | t)) ==
                  doctest::Approx(vf.value(Coalition::from_mask(s)) + vf.value(Coalition::from_mask(t))).epsilon(1e-12));
        }
    }
}

TEST_CASE("memoization is transparent") {
    const Corpus corpus{{{"a", "b", "c"}, {"d", "e"}, {"f", "g", "h", "i"}}, {}};
    auto pred = make_additive_predictor({{"a", 0.3}, {"d", 1.0}, {"g", -0.4}}, 0.0);
    auto filler = std::make_shared<CorpusFiller>(corpus);
    const ModelValueFunction cached(pred, filler, {"a", "d", "g", "z"}, 1, singleton_partition(4), {2, 5, true});
    const ModelValueFunction uncached(pred, filler, {"a", "d", "g", "z"}, 1, singleton_partition(4), {2, 5, false});
    for (auto c : enumerate_coalitions(4)) {
        const double first = cached.value(c);
        CHECK(cached.value(c) == first);
        CHECK(uncached.value(c) == first);
    }
    CHECK(cached.cache_size() == 16);
}

TEST_CASE("queries are batched and deduplicated") {
    auto counting = std::make_shared<CountingPredictor>(make_additive_predictor({{"a", 1.0}}, 0.0));
    const ModelValueFunction vf(counting, std::make_shared<PadFiller>(), {"a", "b", "c"}, 1, singleton_partition(3));
    const std::size_t after_baseline = counting->calls;
    std::vector<Coalition> qs{of({0}), of({1}), of({0}), of({0, 1, 2}), of({1})};
    const auto values = vf.values(qs);
    CHECK(counting->calls == after_baseline + 1);
    CHECK(values[0] == values[2]);
    CHECK(values[1] == values[4]);
    vf.values(qs);
    CHECK(counting->calls == after_baseline + 1);
}

TEST_CASE("concurrent evaluation agrees with serial evaluation") {
    auto pred = make_interaction_predictor({{"a", 0.3}}, {{make_token_pair("a", "b"), 1.0}}, 0.0);
    const ModelValueFunction vf(pred, std::make_shared<PadFiller>(), {"a", "b", "c", "d", "e"}, 1,
                                singleton_partition(5));
    const ModelValueFunction ref(pred, std::make_shared<PadFiller>(), {"a", "b", "c", "d", "e"}, 1,
                                 singleton_partition(5), {1, 0, false});
    std::vector<std::jthread> workers;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&] {
            for (auto c : enumerate_coalitions(5)) {
                if (vf.value(c) != ref.value(c)) ++mismatches;
            }
        });
    }
    workers.clear();
    CHECK(mismatches == 0);
}

TEST_CASE("filler errors carry the coalition") {
    class Broken : public Filler {
    public:
        FillerKind kind() const override { return FillerKind::conditional; }
        std::string describe() const override { return "broken"; }
        bool deterministic() const override { return true; }

    protected:
        FillResult do_fill(const TokenSequence& x, const std::vector<bool>& kept, std::uint64_t) const override {
            if (kept[1]) throw Error("boom");
            return {x, false};
        }
    };
    const ModelValueFunction vf(make_additive_predictor({}, 0.0), std::make_shared<Broken>(), {"a", "b"}, 1,
                                singleton_partition(2));
    try {
        vf.value(of({1}));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("boom") != std::string::npos);
        CHECK(std::string(e.what()).find("coalition") != std::string::npos);
    }
}

TEST_CASE("precedence permutations") {
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const auto d = sample_precedence_permutation(2, 0, 1, rng);
        CHECK(d.order == std::vector<std::size_t>{1, 0});
    }
    Rng a(99), b(99);
    CHECK(sample_precedence_permutation(6, 2, 4, a).order == sample_precedence_permutation(6, 2, 4, b).order);

    // p = 3, t1 = 0, t2 = 1: orders (1,0,2), (1,2,0), (2,1,0) each with probability 1/3.
    std::map<std::vector<std::size_t>, int> counts;
    Rng rng3(12345);
    for (int i = 0; i < 60000; ++i) ++counts[sample_precedence_permutation(3, 0, 1, rng3).order];
    CHECK(counts.size() == 3);
    double chi2 = 0.0;
    for (const auto& [order, n] : counts) {
        CAPTURE(n);
        CHECK(std::abs(n - 20000) <= 600);
        chi2 += (n - 20000.0) * (n - 20000.0) / 20000.0;
    }
    CHECK(chi2 < 13.8);  // χ²(2) at p = 0.001
}

TEST_CASE("pre-sets") {
    // t1 = 1, t2 = 0, other = 2
    auto sets = [](std::vector<std::size_t> order) {
        return pre_sets(PermutationDraw{std::move(order), std::make_pair(std::size_t{1}, std::size_t{0})}, 1, 0);
    };
    auto s = sets({0, 1, 2});
    CHECK(s.pre == of({0}));
    CHECK(s.pre_excl == of({}));
    s = sets({2, 0, 1});
    CHECK(s.pre == of({0, 2}));
    CHECK(s.pre_excl == of({2}));
    s = sets({0, 2, 1});
    CHECK(s.pre == of({0, 2}));
    CHECK(s.pre_excl == of({2}));
}
