#include "asiv/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "asiv/error.hpp"

namespace asiv {

void validate_sequence(const TokenSequence& seq) {
    if (seq.empty()) throw DomainError("token sequence must be nonempty");
    for (const auto& tok : seq) {
        if (tok.find('\n') != std::string::npos || tok.find('\r') != std::string::npos)
            throw DomainError("token contains a newline: \"" + tok + "\"");
    }
}

double logistic(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<double> Predictor::predict_batch(std::span<const TokenSequence> sequences,
                                             int explained_class) const {
    if (explained_class < 0 || explained_class >= classes())
        throw DomainError("explained class " + std::to_string(explained_class) +
                          " out of range for predictor with " + std::to_string(classes()) +
                          " classes");
    if (sequences.empty()) return {};
    for (const auto& s : sequences) validate_sequence(s);
    auto probs = do_predict(sequences, explained_class);
    if (probs.size() != sequences.size())
        throw TransportError("predictor returned " + std::to_string(probs.size()) +
                             " values for a batch of " + std::to_string(sequences.size()));
    return probs;
}

Prediction Predictor::predict(const TokenSequence& seq) const {
    Prediction out;
    const std::span<const TokenSequence> one(&seq, 1);
    for (int c = 0; c < classes(); ++c) out.full_distribution.push_back(predict_batch(one, c)[0]);
    const auto best = std::max_element(out.full_distribution.begin(), out.full_distribution.end());
    out.class_index = static_cast<int>(best - out.full_distribution.begin());
    out.probability = *best;
    return out;
}

namespace {

double apply_link(Link link, double score, int explained_class) {
    const double positive = link == Link::logistic ? logistic(score) : score;
    return explained_class == 1 ? positive : 1.0 - positive;
}

const char* link_name(Link link) { return link == Link::logistic ? "logistic" : "identity"; }

}  // namespace

AdditivePredictor::AdditivePredictor(std::map<std::string, double> weights, double bias, Link link)
    : weights_(std::move(weights)), bias_(bias), link_(link) {}

std::string AdditivePredictor::name() const {
    return std::string("additive/") + link_name(link_);
}

double AdditivePredictor::score(const TokenSequence& seq) const {
    double z = bias_;
    for (const auto& tok : seq) {
        if (auto it = weights_.find(tok); it != weights_.end()) z += it->second;
    }
    return z;
}

std::vector<double> AdditivePredictor::do_predict(std::span<const TokenSequence> sequences,
                                                  int explained_class) const {
    std::vector<double> out;
    out.reserve(sequences.size());
    for (const auto& s : sequences) out.push_back(apply_link(link_, score(s), explained_class));
    return out;
}

TokenPair make_token_pair(std::string a, std::string b) {
    if (b < a) std::swap(a, b);
    return {std::move(a), std::move(b)};
}

InteractionPredictor::InteractionPredictor(std::map<std::string, double> weights,
                                           std::map<TokenPair, double> pair_bonus, double bias,
                                           Link link)
    : AdditivePredictor(std::move(weights), bias, link) {
    for (auto& [pair, bonus] : pair_bonus) pair_bonus_[make_token_pair(pair.first, pair.second)] += bonus;
}

std::string InteractionPredictor::name() const {
    return std::string("interaction/") + link_name(link_);
}

double InteractionPredictor::interaction_score(const TokenSequence& seq) const {
    double z = score(seq);
    if (pair_bonus_.empty()) return z;
    std::unordered_map<std::string_view, int> counts;
    for (const auto& tok : seq) ++counts[tok];
    auto count_of = [&](const std::string& t) {
        auto it = counts.find(t);
        return it == counts.end() ? 0 : it->second;
    };
    for (const auto& [pair, bonus] : pair_bonus_) {
        const bool present = pair.first == pair.second
                                 ? count_of(pair.first) >= 2
                                 : count_of(pair.first) > 0 && count_of(pair.second) > 0;
        if (present) z += bonus;
    }
    return z;
}

std::vector<double> InteractionPredictor::do_predict(std::span<const TokenSequence> sequences,
                                                     int explained_class) const {
    std::vector<double> out;
    out.reserve(sequences.size());
    for (const auto& s : sequences)
        out.push_back(apply_link(link_, interaction_score(s), explained_class));
    return out;
}

std::shared_ptr<const Predictor> make_additive_predictor(std::map<std::string, double> weights,
                                                         double bias, Link link) {
    return std::make_shared<AdditivePredictor>(std::move(weights), bias, link);
}

std::shared_ptr<const Predictor> make_interaction_predictor(
    std::map<std::string, double> weights, std::map<TokenPair, double> pair_bonus, double bias,
    Link link) {
    return std::make_shared<InteractionPredictor>(std::move(weights), std::move(pair_bonus), bias,
                                                  link);
}

}  // namespace asiv
