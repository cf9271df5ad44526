#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "asiv/coalition.hpp"
#include "asiv/graph.hpp"
#include "asiv/predictor.hpp"

namespace asiv {

/// An explained text, the class being explained, and a ranking of its players.
struct EvalInstance {
    TokenSequence tokens;
    int explained_class = 0;
    PlayerPartition partition;
    /// Player indices, most important first.
    std::vector<std::size_t> ranking;
};

/// Players taken for a k% budget: round-half-up of k·p/100, at least one when
/// k > 0 and p ≥ 1, at most p.
std::size_t top_k_count(std::size_t players, double k_percent);

/// Union of the token positions of the first top_k_count players in `ranking`.
PositionSet top_k_positions(const std::vector<std::size_t>& ranking, const PlayerPartition& partition,
                            double k_percent);

/// `tokens` with `positions` removed.
TokenSequence delete_positions(const TokenSequence& tokens, const PositionSet& positions);
/// `tokens` with `positions` replaced by `pad`.
TokenSequence mask_positions(const TokenSequence& tokens, const PositionSet& positions, const std::string& pad);

struct MetricResult {
    double value = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
};

/// Mean of f(x) − f(x̃) where x̃ drops the top-k% positions. Instances that
/// would become empty are skipped.
MetricResult aopc(const Predictor& predictor, const std::vector<EvalInstance>& dataset, double k_percent);

/// Mean of log(f(x') / f(x)) where x' pads the top-k% positions in place.
/// Instances with a probability below `floor` are skipped.
MetricResult lor(const Predictor& predictor, const std::vector<EvalInstance>& dataset, double k_percent,
                 const std::string& pad = "<pad>", double floor = 1e-12);

struct EvalRow {
    double k = 0.0;
    double aopc = 0.0;
    double lor = 0.0;
    std::size_t n_used = 0;
    std::size_t n_skipped = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::size_t dataset_size = 0;
    /// Instances dropped before evaluation (e.g. over the length cap).
    std::size_t pre_skipped = 0;
    std::vector<std::string> notes;

    std::string to_csv() const;
    nlohmann::ordered_json to_json() const;
};

struct SweepOptions {
    std::string pad = "<pad>";
    double floor = 1e-12;
};

/// AOPC and LOR at every k of an ascending grid. Duplicate entries are
/// collapsed with a note. At each k both metrics average over the instances
/// usable by both.
EvalReport sweep(const Predictor& predictor, const std::vector<EvalInstance>& dataset,
                 std::vector<double> k_grid, const SweepOptions& options = {});

}  // namespace asiv
