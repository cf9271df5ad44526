#include "asiv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "asiv/error.hpp"

namespace asiv {

std::size_t top_k_count(std::size_t players, double k_percent) {
    if (!(k_percent >= 0.0 && k_percent <= 100.0)) throw DomainError("k must be a percentage in [0,100]");
    if (k_percent == 0.0 || players == 0) return 0;
    const double raw = k_percent * static_cast<double>(players) / 100.0;
    const auto count = static_cast<std::size_t>(std::floor(raw + 0.5));
    return std::clamp<std::size_t>(count, 1, players);
}

PositionSet top_k_positions(const std::vector<std::size_t>& ranking, const PlayerPartition& partition,
                            double k_percent) {
    const auto take = top_k_count(ranking.size(), k_percent);
    PositionSet out;
    for (std::size_t r = 0; r < take; ++r) {
        const auto& pos = partition.players.at(ranking[r]);
        out.insert(out.end(), pos.begin(), pos.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

TokenSequence delete_positions(const TokenSequence& tokens, const PositionSet& positions) {
    TokenSequence out;
    std::size_t next = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (next < positions.size() && positions[next] == i) {
            ++next;
            continue;
        }
        out.push_back(tokens[i]);
    }
    return out;
}

TokenSequence mask_positions(const TokenSequence& tokens, const PositionSet& positions, const std::string& pad) {
    TokenSequence out = tokens;
    for (auto i : positions) out.at(i) = pad;
    return out;
}

namespace {

/// Sum independent of input order: contributions are sorted first.
double order_free_mean(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

/// Probabilities for a list of (instance index, sequence), batched per explained class.
std::vector<double> predict_grouped(const Predictor& predictor, const std::vector<EvalInstance>& dataset,
                                    const std::vector<std::size_t>& owner,
                                    const std::vector<TokenSequence>& sequences) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t k = 0; k < owner.size(); ++k) by_class[dataset[owner[k]].explained_class].push_back(k);
    std::vector<double> out(sequences.size());
    for (const auto& [cls, idx] : by_class) {
        std::vector<TokenSequence> batch;
        batch.reserve(idx.size());
        for (auto k : idx) batch.push_back(sequences[k]);
        const auto probs = predictor.predict_batch(batch, cls);
        for (std::size_t t = 0; t < idx.size(); ++t) out[idx[t]] = probs[t];
    }
    return out;
}

std::vector<double> original_probabilities(const Predictor& predictor, const std::vector<EvalInstance>& dataset) {
    std::vector<std::size_t> owner(dataset.size());
    std::vector<TokenSequence> seqs;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        owner[i] = i;
        seqs.push_back(dataset[i].tokens);
    }
    return predict_grouped(predictor, dataset, owner, seqs);
}

struct PerInstance {
    std::vector<bool> aopc_ok;
    std::vector<double> drop;
    std::vector<bool> lor_ok;
    std::vector<double> log_ratio;
};

PerInstance evaluate_at(const Predictor& predictor, const std::vector<EvalInstance>& dataset,
                        const std::vector<double>& original, double k, const std::string& pad, double floor) {
    const auto n = dataset.size();
    PerInstance r{std::vector<bool>(n, false), std::vector<double>(n, 0.0), std::vector<bool>(n, false),
                  std::vector<double>(n, 0.0)};
    std::vector<std::size_t> owner;
    std::vector<TokenSequence> deleted;
    std::vector<TokenSequence> masked;
    std::vector<std::size_t> masked_owner;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& inst = dataset[i];
        const auto positions = top_k_positions(inst.ranking, inst.partition, k);
        auto shortened = delete_positions(inst.tokens, positions);
        if (!shortened.empty()) {
            owner.push_back(i);
            deleted.push_back(std::move(shortened));
        }
        masked_owner.push_back(i);
        masked.push_back(mask_positions(inst.tokens, positions, pad));
    }
    const auto p_deleted = predict_grouped(predictor, dataset, owner, deleted);
    for (std::size_t t = 0; t < owner.size(); ++t) {
        r.aopc_ok[owner[t]] = true;
        r.drop[owner[t]] = original[owner[t]] - p_deleted[t];
    }
    const auto p_masked = predict_grouped(predictor, dataset, masked_owner, masked);
    for (std::size_t i = 0; i < n; ++i) {
        if (original[i] < floor || p_masked[i] < floor) continue;
        r.lor_ok[i] = true;
        r.log_ratio[i] = std::log(p_masked[i] / original[i]);
    }
    return r;
}

void require_nonempty(const std::vector<EvalInstance>& dataset) {
    if (dataset.empty()) throw DomainError("evaluation dataset is empty");
    for (const auto& inst : dataset) {
        if (inst.ranking.size() != inst.partition.player_count())
            throw DomainError("ranking length does not match the instance's player count");
    }
}

}  // namespace

MetricResult aopc(const Predictor& predictor, const std::vector<EvalInstance>& dataset, double k_percent) {
    require_nonempty(dataset);
    const auto original = original_probabilities(predictor, dataset);
    const auto r = evaluate_at(predictor, dataset, original, k_percent, "<pad>", 0.0);
    MetricResult out;
    std::vector<double> used;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (r.aopc_ok[i]) used.push_back(r.drop[i]);
    }
    out.used = used.size();
    out.skipped = dataset.size() - used.size();
    out.value = order_free_mean(std::move(used));
    return out;
}

MetricResult lor(const Predictor& predictor, const std::vector<EvalInstance>& dataset, double k_percent,
                 const std::string& pad, double floor) {
    require_nonempty(dataset);
    const auto original = original_probabilities(predictor, dataset);
    const auto r = evaluate_at(predictor, dataset, original, k_percent, pad, floor);
    MetricResult out;
    std::vector<double> used;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (r.lor_ok[i]) used.push_back(r.log_ratio[i]);
    }
    out.used = used.size();
    out.skipped = dataset.size() - used.size();
    out.value = order_free_mean(std::move(used));
    return out;
}

EvalReport sweep(const Predictor& predictor, const std::vector<EvalInstance>& dataset, std::vector<double> k_grid,
                 const SweepOptions& options) {
    require_nonempty(dataset);
    if (k_grid.empty()) throw DomainError("k grid is empty");
    if (!std::is_sorted(k_grid.begin(), k_grid.end())) throw DomainError("k grid must be sorted ascending");
    EvalReport report;
    report.dataset_size = dataset.size();
    const auto before = k_grid.size();
    k_grid.erase(std::unique(k_grid.begin(), k_grid.end()), k_grid.end());
    if (k_grid.size() != before)
        report.notes.push_back("removed " + std::to_string(before - k_grid.size()) + " duplicate k grid entries");

    const auto original = original_probabilities(predictor, dataset);
    for (double k : k_grid) {
        const auto r = evaluate_at(predictor, dataset, original, k, options.pad, options.floor);
        std::vector<double> drops;
        std::vector<double> ratios;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (!r.aopc_ok[i] || !r.lor_ok[i]) continue;
            drops.push_back(r.drop[i]);
            ratios.push_back(r.log_ratio[i]);
        }
        EvalRow row;
        row.k = k;
        row.n_used = drops.size();
        row.n_skipped = dataset.size() - drops.size();
        row.aopc = order_free_mean(std::move(drops));
        row.lor = order_free_mean(std::move(ratios));
        report.rows.push_back(row);
    }
    return report;
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "k,aopc,lor,n_used,n_skipped\n";
    for (const auto& r : rows)
        out << format_double(r.k) << ',' << format_double(r.aopc) << ',' << format_double(r.lor) << ','
            << r.n_used << ',' << (r.n_skipped + pre_skipped) << '\n';
    return out.str();
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["dataset_size"] = dataset_size;
    doc["pre_skipped"] = pre_skipped;
    doc["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows)
        doc["rows"].push_back({{"k", r.k},
                               {"aopc", r.aopc},
                               {"lor", r.lor},
                               {"n_used", r.n_used},
                               {"n_skipped", r.n_skipped + pre_skipped}});
    doc["notes"] = notes;
    return doc;
}

}  // namespace asiv
