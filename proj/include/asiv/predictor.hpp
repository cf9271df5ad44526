#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace asiv {

/// Ordered tokens of one text. Nonempty, no embedded newlines.
using TokenSequence = std::vector<std::string>;

/// Throws DomainError unless `seq` is nonempty and newline-free.
void validate_sequence(const TokenSequence& seq);

struct Prediction {
    int class_index = 0;
    double probability = 0.0;
    std::vector<double> full_distribution;  // may be empty
};

/// A black-box classifier. Implementations must be deterministic and
/// order-preserving over the batch.
class Predictor {
public:
    virtual ~Predictor() = default;

    virtual std::string name() const = 0;
    virtual int classes() const = 0;

    /// Probability of `explained_class` for every sequence, in input order.
    std::vector<double> predict_batch(std::span<const TokenSequence> sequences,
                                      int explained_class) const;

    /// Full distribution for one sequence, with the argmax as class_index.
    Prediction predict(const TokenSequence& seq) const;

protected:
    virtual std::vector<double> do_predict(std::span<const TokenSequence> sequences,
                                           int explained_class) const = 0;
};

enum class Link { logistic, identity };

/// Binary scorer: class 1 receives link(bias + sum of token weights), class 0
/// the complement. Tokens absent from `weights` score 0.
class AdditivePredictor : public Predictor {
public:
    AdditivePredictor(std::map<std::string, double> weights, double bias,
                      Link link = Link::logistic);

    std::string name() const override;
    int classes() const override { return 2; }

    double score(const TokenSequence& seq) const;
    const std::map<std::string, double>& weights() const { return weights_; }

protected:
    std::vector<double> do_predict(std::span<const TokenSequence> sequences,
                                   int explained_class) const override;

    std::map<std::string, double> weights_;
    double bias_;
    Link link_;
};

/// Unordered token pair, stored with the lexicographically smaller token first.
using TokenPair = std::pair<std::string, std::string>;
TokenPair make_token_pair(std::string a, std::string b);

/// Additive scorer plus a bonus for every listed pair whose two tokens are
/// both present somewhere in the sequence. Each bonus counts once per sequence.
class InteractionPredictor : public AdditivePredictor {
public:
    InteractionPredictor(std::map<std::string, double> weights,
                         std::map<TokenPair, double> pair_bonus, double bias,
                         Link link = Link::logistic);

    std::string name() const override;
    double interaction_score(const TokenSequence& seq) const;

protected:
    std::vector<double> do_predict(std::span<const TokenSequence> sequences,
                                   int explained_class) const override;

private:
    std::map<TokenPair, double> pair_bonus_;
};

std::shared_ptr<const Predictor> make_additive_predictor(std::map<std::string, double> weights,
                                                         double bias,
                                                         Link link = Link::logistic);

std::shared_ptr<const Predictor> make_interaction_predictor(
    std::map<std::string, double> weights, std::map<TokenPair, double> pair_bonus, double bias,
    Link link = Link::logistic);

double logistic(double z);

}  // namespace asiv
