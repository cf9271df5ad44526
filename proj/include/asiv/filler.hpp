#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asiv/predictor.hpp"

namespace asiv {

class EndpointClient;

/// Sorted, duplicate-free token positions.
using PositionSet = std::vector<std::size_t>;

/// Sorts, deduplicates and bounds-checks `positions` against length `n`.
PositionSet make_position_set(std::vector<std::size_t> positions, std::size_t n);

struct Corpus {
    std::vector<TokenSequence> sequences;
    std::vector<int> labels;  // empty or one per sequence
};

/// Reads {"text": ..., "label": ...} JSON Lines, whitespace-tokenizing each text.
Corpus load_corpus(const std::string& path, bool lowercase = false);

/// Left-context n-gram model with add-k smoothing.
///
/// P(t | ctx) = (count(ctx, t) + k) / (count(ctx) + k |V|). Sentence starts are
/// padded with a boundary symbol that never appears in the vocabulary. With
/// k = 0 an unseen context backs off to the next shorter one.
class NgramModel {
public:
    static constexpr const char* kBoundary = "<s>";

    NgramModel(const Corpus& corpus, int order, double smoothing);

    int order() const { return order_; }
    double smoothing() const { return smoothing_; }
    const std::vector<std::string>& vocabulary() const { return vocab_; }

    /// Probability of `token` given up to order-1 preceding tokens.
    double probability(std::span<const std::string> history, const std::string& token) const;

    /// Full conditional over the vocabulary, in vocabulary (lexicographic) order.
    std::vector<double> distribution(std::span<const std::string> history) const;

    /// Most likely next token; ties go to the lexicographically smallest.
    const std::string& argmax(std::span<const std::string> history) const;

private:
    using Context = std::vector<std::string>;
    struct ContextCounts {
        std::vector<std::uint64_t> counts;  // indexed like vocab_
        std::uint64_t total = 0;
    };

    Context context_for(std::span<const std::string> history, int length) const;
    const ContextCounts* lookup(const Context& ctx) const;
    std::vector<double> conditional(std::span<const std::string> history) const;

    int order_;
    double smoothing_;
    std::vector<std::string> vocab_;
    std::map<std::string, std::size_t> index_;
    std::map<Context, ContextCounts> tables_;
};

enum class FillerKind { pad, corpus_resample, conditional, in_domain };
enum class FillMode { greedy, sample };

std::string to_string(FillerKind kind);
std::string to_string(FillMode mode);

struct FillResult {
    TokenSequence tokens;
    /// Set when corpus resampling had to draw positions from the token marginal.
    bool used_marginal_fallback = false;
};

/// Produces x_S ∪ x'_{S̄}: kept positions copied from x, the rest filled.
class Filler {
public:
    virtual ~Filler() = default;

    virtual FillerKind kind() const = 0;
    virtual std::string describe() const = 0;
    /// True when the output does not depend on the seed.
    virtual bool deterministic() const = 0;

    /// Output has x's length and agrees with x on `keep`. Same inputs, same output.
    FillResult fill(const TokenSequence& x, const PositionSet& keep, std::uint64_t seed) const;

    /// fill() with nothing kept.
    TokenSequence baseline_sequence(std::size_t n, std::uint64_t seed) const;

protected:
    virtual FillResult do_fill(const TokenSequence& x, const std::vector<bool>& kept,
                               std::uint64_t seed) const = 0;
};

class PadFiller : public Filler {
public:
    explicit PadFiller(std::string pad = "<pad>") : pad_(std::move(pad)) {}
    FillerKind kind() const override { return FillerKind::pad; }
    std::string describe() const override { return "pad(" + pad_ + ")"; }
    bool deterministic() const override { return true; }
    const std::string& pad() const { return pad_; }

protected:
    FillResult do_fill(const TokenSequence& x, const std::vector<bool>& kept,
                       std::uint64_t seed) const override;

private:
    std::string pad_;
};

/// Draws one donor sequence uniformly and copies its tokens into the masked
/// positions. Positions past the donor's end come from the corpus token marginal.
class CorpusFiller : public Filler {
public:
    explicit CorpusFiller(Corpus corpus);
    FillerKind kind() const override { return FillerKind::corpus_resample; }
    std::string describe() const override;
    bool deterministic() const override;

protected:
    FillResult do_fill(const TokenSequence& x, const std::vector<bool>& kept,
                       std::uint64_t seed) const override;

private:
    Corpus corpus_;
    std::vector<const std::string*> marginal_;
};

/// Fills masked positions left to right from an n-gram model. `kind` records
/// which corpus trained it: conditional (general text) or in_domain (task data).
class NgramFiller : public Filler {
public:
    NgramFiller(std::shared_ptr<const NgramModel> model, FillMode mode,
                FillerKind kind = FillerKind::in_domain);
    FillerKind kind() const override { return kind_; }
    std::string describe() const override;
    bool deterministic() const override { return mode_ == FillMode::greedy; }

protected:
    FillResult do_fill(const TokenSequence& x, const std::vector<bool>& kept,
                       std::uint64_t seed) const override;

private:
    std::shared_ptr<const NgramModel> model_;
    FillMode mode_;
    FillerKind kind_;
};

/// Conditional fill delegated to an external masked-LM endpoint.
class ExternalFiller : public Filler {
public:
    ExternalFiller(std::shared_ptr<EndpointClient> client, FillMode mode);
    FillerKind kind() const override { return FillerKind::conditional; }
    std::string describe() const override;
    bool deterministic() const override { return mode_ == FillMode::greedy; }

protected:
    FillResult do_fill(const TokenSequence& x, const std::vector<bool>& kept,
                       std::uint64_t seed) const override;

private:
    std::shared_ptr<EndpointClient> client_;
    FillMode mode_;
};

NgramModel train_ngram(const Corpus& corpus, int order, double smoothing = 1.0);

/// Greedy left-to-right fill: each masked position takes the model's argmax.
TokenSequence greedy_fill(const NgramModel& model, const TokenSequence& x, const PositionSet& keep);

}  // namespace asiv
