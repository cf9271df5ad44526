#include "asiv/filler.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "asiv/endpoint.hpp"
#include "asiv/error.hpp"
#include "asiv/rng.hpp"
#include "asiv/text.hpp"

namespace asiv {

PositionSet make_position_set(std::vector<std::size_t> positions, std::size_t n) {
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    if (!positions.empty() && positions.back() >= n)
        throw DomainError("position " + std::to_string(positions.back()) +
                          " out of range for length " + std::to_string(n));
    return positions;
}

Corpus load_corpus(const std::string& path, bool lowercase) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open corpus file " + path);
    Corpus corpus;
    bool any_label = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string())
            throw LoadError(path + ":" + std::to_string(line_no) + ": missing string field \"text\"");
        corpus.sequences.push_back(tokenize(obj["text"].get<std::string>(), lowercase));
        if (obj.contains("label") && obj["label"].is_number_integer()) {
            any_label = true;
            corpus.labels.push_back(obj["label"].get<int>());
        } else {
            corpus.labels.push_back(-1);
        }
    }
    if (!any_label) corpus.labels.clear();
    return corpus;
}

// ---------------------------------------------------------------------------
// NgramModel

NgramModel::NgramModel(const Corpus& corpus, int order, double smoothing)
    : order_(order), smoothing_(smoothing) {
    if (order < 1 || order > 3) throw DomainError("n-gram order must be in [1,3]");
    if (!(smoothing >= 0.0)) throw DomainError("smoothing must be nonnegative");
    if (corpus.sequences.empty()) throw DomainError("cannot train an n-gram model on an empty corpus");

    std::set<std::string> vocab;
    for (const auto& seq : corpus.sequences) vocab.insert(seq.begin(), seq.end());
    if (vocab.empty()) throw DomainError("corpus has an empty vocabulary");
    vocab_.assign(vocab.begin(), vocab.end());
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = i;

    for (const auto& seq : corpus.sequences) {
        std::vector<std::string> padded(static_cast<std::size_t>(order_ - 1), kBoundary);
        padded.insert(padded.end(), seq.begin(), seq.end());
        for (std::size_t i = 0; i < seq.size(); ++i) {
            const std::size_t at = i + static_cast<std::size_t>(order_ - 1);
            const std::size_t tok = index_.at(padded[at]);
            for (int len = 0; len < order_; ++len) {
                Context ctx(padded.begin() + static_cast<std::ptrdiff_t>(at - static_cast<std::size_t>(len)),
                            padded.begin() + static_cast<std::ptrdiff_t>(at));
                auto& entry = tables_[ctx];
                if (entry.counts.empty()) entry.counts.assign(vocab_.size(), 0);
                ++entry.counts[tok];
                ++entry.total;
            }
        }
    }
}

NgramModel::Context NgramModel::context_for(std::span<const std::string> history, int length) const {
    Context ctx(static_cast<std::size_t>(length), kBoundary);
    const auto have = std::min<std::size_t>(history.size(), static_cast<std::size_t>(length));
    std::copy(history.end() - static_cast<std::ptrdiff_t>(have), history.end(),
              ctx.end() - static_cast<std::ptrdiff_t>(have));
    return ctx;
}

const NgramModel::ContextCounts* NgramModel::lookup(const Context& ctx) const {
    auto it = tables_.find(ctx);
    return it == tables_.end() ? nullptr : &it->second;
}

std::vector<double> NgramModel::conditional(std::span<const std::string> history) const {
    const auto v = static_cast<double>(vocab_.size());
    std::vector<double> probs(vocab_.size());
    for (int len = order_ - 1; len >= 0; --len) {
        const auto* counts = lookup(context_for(history, len));
        if (smoothing_ > 0.0) {
            const double denom = (counts ? static_cast<double>(counts->total) : 0.0) + smoothing_ * v;
            for (std::size_t i = 0; i < probs.size(); ++i)
                probs[i] = ((counts ? static_cast<double>(counts->counts[i]) : 0.0) + smoothing_) / denom;
            return probs;
        }
        if (counts && counts->total > 0) {
            const auto denom = static_cast<double>(counts->total);
            for (std::size_t i = 0; i < probs.size(); ++i)
                probs[i] = static_cast<double>(counts->counts[i]) / denom;
            return probs;
        }
    }
    // Unreachable for a trained model: the unigram table always has mass.
    std::fill(probs.begin(), probs.end(), 1.0 / v);
    return probs;
}

double NgramModel::probability(std::span<const std::string> history, const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return 0.0;
    return conditional(history)[it->second];
}

std::vector<double> NgramModel::distribution(std::span<const std::string> history) const {
    return conditional(history);
}

const std::string& NgramModel::argmax(std::span<const std::string> history) const {
    const auto probs = conditional(history);
    // max_element keeps the first maximum, and vocab_ is sorted.
    const auto best = std::max_element(probs.begin(), probs.end());
    return vocab_[static_cast<std::size_t>(best - probs.begin())];
}

NgramModel train_ngram(const Corpus& corpus, int order, double smoothing) {
    return NgramModel(corpus, order, smoothing);
}

// ---------------------------------------------------------------------------
// Fillers

std::string to_string(FillerKind kind) {
    switch (kind) {
        case FillerKind::pad: return "pad";
        case FillerKind::corpus_resample: return "random";
        case FillerKind::conditional: return "ce";
        case FillerKind::in_domain: return "ide";
    }
    return "?";
}

std::string to_string(FillMode mode) { return mode == FillMode::greedy ? "greedy" : "sample"; }

FillResult Filler::fill(const TokenSequence& x, const PositionSet& keep, std::uint64_t seed) const {
    std::vector<bool> kept(x.size(), false);
    for (auto i : keep) {
        if (i >= x.size())
            throw DomainError("kept position " + std::to_string(i) + " out of range for length " +
                              std::to_string(x.size()));
        kept[i] = true;
    }
    if (std::all_of(kept.begin(), kept.end(), [](bool b) { return b; })) return {x, false};
    return do_fill(x, kept, seed);
}

TokenSequence Filler::baseline_sequence(std::size_t n, std::uint64_t seed) const {
    if (n == 0) throw DomainError("baseline length must be at least 1");
    // The kept set is empty, so the placeholder contents never reach the output.
    const TokenSequence placeholder(n, std::string("<mask>"));
    return do_fill(placeholder, std::vector<bool>(n, false), seed).tokens;
}

FillResult PadFiller::do_fill(const TokenSequence& x, const std::vector<bool>& kept,
                              std::uint64_t /*seed*/) const {
    FillResult out{x, false};
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!kept[i]) out.tokens[i] = pad_;
    }
    return out;
}

CorpusFiller::CorpusFiller(Corpus corpus) : corpus_(std::move(corpus)) {
    if (corpus_.sequences.empty()) throw DomainError("corpus-resample filler needs a nonempty corpus");
    for (const auto& seq : corpus_.sequences) {
        for (const auto& tok : seq) marginal_.push_back(&tok);
    }
    if (marginal_.empty()) throw DomainError("corpus-resample filler needs at least one token");
}

std::string CorpusFiller::describe() const {
    return "random(corpus of " + std::to_string(corpus_.sequences.size()) + ")";
}

bool CorpusFiller::deterministic() const {
    return corpus_.sequences.size() == 1 && marginal_.size() == 1;
}

FillResult CorpusFiller::do_fill(const TokenSequence& x, const std::vector<bool>& kept,
                                 std::uint64_t seed) const {
    Rng rng(seed);
    const auto& donor = corpus_.sequences[rng.uniform_index(corpus_.sequences.size())];
    FillResult out{x, false};
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (kept[i]) continue;
        if (i < donor.size()) {
            out.tokens[i] = donor[i];
        } else {
            out.tokens[i] = *marginal_[rng.uniform_index(marginal_.size())];
            out.used_marginal_fallback = true;
        }
    }
    return out;
}

NgramFiller::NgramFiller(std::shared_ptr<const NgramModel> model, FillMode mode, FillerKind kind)
    : model_(std::move(model)), mode_(mode), kind_(kind) {
    if (!model_) throw DomainError("n-gram filler needs a model");
    if (kind_ != FillerKind::conditional && kind_ != FillerKind::in_domain)
        throw DomainError("n-gram filler kind must be conditional or in-domain");
}

std::string NgramFiller::describe() const {
    return to_string(kind_) + "(ngram order " + std::to_string(model_->order()) + ", " +
           to_string(mode_) + ")";
}

FillResult NgramFiller::do_fill(const TokenSequence& x, const std::vector<bool>& kept,
                                std::uint64_t seed) const {
    Rng rng(seed);
    FillResult out{x, false};
    const auto& vocab = model_->vocabulary();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (kept[i]) continue;
        const std::span<const std::string> history(out.tokens.data(), i);
        if (mode_ == FillMode::greedy) {
            out.tokens[i] = model_->argmax(history);
            continue;
        }
        const auto probs = model_->distribution(history);
        const double u = rng.uniform01();
        double acc = 0.0;
        std::size_t pick = probs.size() - 1;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) {
                pick = k;
                break;
            }
        }
        out.tokens[i] = vocab[pick];
    }
    return out;
}

ExternalFiller::ExternalFiller(std::shared_ptr<EndpointClient> client, FillMode mode)
    : client_(std::move(client)), mode_(mode) {
    if (!client_) throw DomainError("external filler needs an endpoint");
}

std::string ExternalFiller::describe() const {
    return "ce(external " + client_->describe() + ", " + to_string(mode_) + ")";
}

FillResult ExternalFiller::do_fill(const TokenSequence& x, const std::vector<bool>& kept,
                                   std::uint64_t seed) const {
    PositionSet keep;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i]) keep.push_back(i);
    }
    return {client_->fill(x, keep, to_string(mode_), seed), false};
}

TokenSequence greedy_fill(const NgramModel& model, const TokenSequence& x, const PositionSet& keep) {
    // Non-owning alias; the filler does not outlive this call.
    const std::shared_ptr<const NgramModel> view(std::shared_ptr<const NgramModel>{}, &model);
    return NgramFiller(view, FillMode::greedy).fill(x, keep, 0).tokens;
}

}  // namespace asiv
