#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "asiv/error.hpp"
#include "asiv/filler.hpp"
#include "asiv/rng.hpp"

using namespace asiv;

namespace {

Corpus corpus_of(std::vector<TokenSequence> seqs) { return Corpus{std::move(seqs), {}}; }

}  // namespace

TEST_CASE("pad filler") {
    const PadFiller pad;
    CHECK(pad.fill({"a", "b", "c"}, {0, 2}, 7).tokens == TokenSequence{"a", "<pad>", "c"});
    CHECK(pad.baseline_sequence(3, 1) == TokenSequence{"<pad>", "<pad>", "<pad>"});
    CHECK(pad.fill({"a", "b"}, {}, 1).tokens == pad.fill({"a", "b"}, {}, 999).tokens);
    CHECK(pad.deterministic());
}

TEST_CASE("keep everything returns the input") {
    const TokenSequence x{"the", "cat", "sat"};
    const PositionSet all{0, 1, 2};
    auto model = std::make_shared<NgramModel>(train_ngram(corpus_of({{"a", "b"}}), 2, 1.0));
    const PadFiller pad;
    const CorpusFiller corpus(corpus_of({{"p", "q", "r"}}));
    const NgramFiller greedy(model, FillMode::greedy);
    const NgramFiller sample(model, FillMode::sample);
    for (const Filler* f : std::initializer_list<const Filler*>{&pad, &corpus, &greedy, &sample})
        CHECK(f->fill(x, all, 5).tokens == x);
}

TEST_CASE("corpus resample with one donor") {
    const CorpusFiller f(corpus_of({{"p", "q", "r"}}));
    const auto r = f.fill({"a", "b", "c"}, {1}, 11);
    CHECK(r.tokens == TokenSequence{"p", "b", "r"});
    CHECK_FALSE(r.used_marginal_fallback);
    CHECK(f.baseline_sequence(3, 4) == TokenSequence{"p", "q", "r"});
}

TEST_CASE("corpus resample falls back to the marginal past the donor") {
    const CorpusFiller f(corpus_of({{"p"}}));
    const auto r = f.fill({"a", "b", "c"}, {}, 3);
    CHECK(r.tokens.size() == 3);
    CHECK(r.tokens[0] == "p");
    CHECK(r.used_marginal_fallback);
    CHECK_THROWS_AS(CorpusFiller(corpus_of({})), DomainError);
}

TEST_CASE("n-gram counts") {
    const auto c = corpus_of({{"a", "b"}, {"a", "c"}});
    const auto bigram = train_ngram(c, 2, 0.0);
    const TokenSequence a{"a"};
    CHECK(bigram.probability(a, "b") == 0.5);
    const auto unigram = train_ngram(c, 1, 0.0);
    CHECK(unigram.probability({}, "a") == 0.5);
    const auto smoothed = train_ngram(corpus_of({{"a", "b"}}), 2, 1.0);
    CHECK(smoothed.vocabulary().size() == 2);
    CHECK(smoothed.probability(a, "b") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(train_ngram(corpus_of({}), 2, 1.0), DomainError);
    CHECK_THROWS_AS(train_ngram(c, 0, 1.0), DomainError);
    CHECK_THROWS_AS(train_ngram(c, 4, 1.0), DomainError);
}

TEST_CASE("n-gram conditionals sum to one") {
    const auto c = corpus_of({{"a", "b", "c"}, {"b", "b", "a"}, {"c", "a"}});
    for (int order = 1; order <= 3; ++order) {
        for (double k : {0.0, 0.5, 1.0}) {
            const auto model = train_ngram(c, order, k);
            for (const TokenSequence& h : {TokenSequence{}, TokenSequence{"a"}, TokenSequence{"b", "b"},
                                           TokenSequence{"zz", "q"}}) {
                const auto d = model.distribution(h);
                CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("greedy fill") {
    const auto unigram = train_ngram(corpus_of({{"a", "a", "b", "a"}}), 1, 1.0);
    CHECK(greedy_fill(unigram, {"x", "y"}, {}) == TokenSequence{"a", "a"});
    const auto bigram = train_ngram(corpus_of({{"a", "b"}, {"a", "c"}, {"a", "b"}}), 2, 1.0);
    CHECK(greedy_fill(bigram, {"a", "?"}, {0}) == TokenSequence{"a", "b"});
    CHECK(greedy_fill(bigram, {"a", "?"}, {0, 1}) == TokenSequence{"a", "?"});
    // Ties go to the lexicographically smallest token.
    const auto tie = train_ngram(corpus_of({{"b"}, {"a"}}), 1, 0.0);
    CHECK(greedy_fill(tie, {"?"}, {}) == TokenSequence{"a"});
}

TEST_CASE("n-gram fillers record their training corpus kind") {
    auto model = std::make_shared<NgramModel>(train_ngram(corpus_of({{"a", "b"}}), 2, 1.0));
    CHECK(NgramFiller(model, FillMode::greedy, FillerKind::conditional).kind() == FillerKind::conditional);
    CHECK(NgramFiller(model, FillMode::greedy).kind() == FillerKind::in_domain);
    CHECK(to_string(FillerKind::conditional) == "ce");
    CHECK(to_string(FillerKind::in_domain) == "ide");
}

TEST_CASE("filler contracts under random trials") {
    const auto corpus = corpus_of({{"the", "movie", "was", "great"}, {"bad", "plot"}, {"a", "b", "c", "d", "e", "f"}});
    auto model = std::make_shared<NgramModel>(train_ngram(corpus, 2, 1.0));
    const PadFiller pad;
    const CorpusFiller resample(corpus);
    const NgramFiller greedy(model, FillMode::greedy);
    const NgramFiller sample(model, FillMode::sample);
    const std::vector<const Filler*> fillers{&pad, &resample, &greedy, &sample};
    Rng rng(2024);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto* f = fillers[rng.uniform_index(fillers.size())];
        const std::size_t n = 1 + rng.uniform_index(9);
        TokenSequence x;
        for (std::size_t i = 0; i < n; ++i) x.push_back("w" + std::to_string(rng.uniform_index(5)));
        PositionSet keep;
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform_index(2)) keep.push_back(i);
        }
        const auto seed = rng();
        const auto out = f->fill(x, keep, seed);
        REQUIRE(out.tokens.size() == n);
        for (auto i : keep) REQUIRE(out.tokens[i] == x[i]);
        REQUIRE(f->fill(x, keep, seed).tokens == out.tokens);
    }
}

TEST_CASE("stochastic fillers vary with the seed") {
    const auto corpus = corpus_of({{"a", "b", "c"}, {"d", "e", "f"}, {"g", "h", "i"}});
    const CorpusFiller resample(corpus);
    auto model = std::make_shared<NgramModel>(train_ngram(corpus, 1, 1.0));
    const NgramFiller sample(model, FillMode::sample);
    for (const Filler* f : std::initializer_list<const Filler*>{&resample, &sample}) {
        const auto first = f->baseline_sequence(3, 0);
        bool differs = false;
        for (std::uint64_t s = 1; s <= 100 && !differs; ++s) differs = f->baseline_sequence(3, s) != first;
        CHECK(differs);
        CHECK_FALSE(f->deterministic());
    }
}

TEST_CASE("position sets are validated") {
    CHECK(make_position_set({2, 0, 2}, 3) == PositionSet{0, 2});
    CHECK_THROWS_AS(make_position_set({3}, 3), DomainError);
    const PadFiller pad;
    CHECK_THROWS_AS(pad.fill({"a"}, {1}, 0), DomainError);
}

TEST_CASE("corpus loading") {
    const auto path = std::filesystem::temp_directory_path() / "asiv_corpus_test.jsonl";
    {
        std::ofstream out(path);
        out << R"({"text": "Good movie", "label": 1})" << "\n\n" << R"({"text": "bad", "label": 0})" << "\n";
    }
    const auto c = load_corpus(path.string(), true);
    CHECK(c.sequences == std::vector<TokenSequence>{{"good", "movie"}, {"bad"}});
    CHECK(c.labels == std::vector<int>{1, 0});
    {
        std::ofstream out(path);
        out << "{not json\n";
    }
    CHECK_THROWS_AS(load_corpus(path.string()), LoadError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_corpus(path.string()), LoadError);
}
