#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "asiv/attribution.hpp"
#include "asiv/eval.hpp"
#include "asiv/filler.hpp"
#include "asiv/graph.hpp"
#include "asiv/predictor.hpp"

namespace asiv {

inline constexpr const char* kEngineVersion = "asiv-engine 0.1.0";
/// Default endpoint spec when no predictor is configured.
inline constexpr const char* kEndpointEnvVar = "ASIV_ENDPOINT";

/// Every knob of a run. All fields have defaults; a config file may set any subset.
struct RunConfig {
    std::string method = "asiv";        // asiv | shapley-interaction-index | shapley-taylor-2
    std::string convention = "perm";    // perm | subset (asiv only)
    std::string estimator = "mc";       // mc | exact
    std::string sampling = "pad";       // pad | random | ce | ide
    std::size_t m = 500;
    std::size_t r = 1;
    std::uint64_t seed = 0;
    std::string w_mode = "set-function";
    std::vector<double> k_grid = {0, 10, 20, 30, 40, 50};
    std::vector<std::vector<std::size_t>> spans;
    std::string predictor;        // model file, exec:<cmd> or http://...
    std::string fill_endpoint;    // external masked-LM filler for sampling=ce
    std::string corpus;           // JSONL; donor corpus for random, training data for ide
    std::string ce_corpus;        // JSONL; general-text corpus for sampling=ce
    int ngram_order = 2;
    double smoothing = 1.0;
    std::string fill_mode = "greedy";
    std::string pad_token = "<pad>";
    std::size_t length_cap = 100;
    int explained_class = -1;     // -1: the predicted class
    bool lowercase = false;
    double damping = 0.85;
    double tolerance = 1e-10;
    int max_iterations = 100;
    std::string weight_mode = "positive";
    double lor_floor = 1e-12;
    std::vector<std::string> eval_methods = {"asiv", "random"};
    std::size_t threads = 1;
    double timeout_seconds = 30.0;

    nlohmann::ordered_json to_json() const;
    static RunConfig from_json(const nlohmann::json& doc);
    /// Reads a config file; also accepts an output file carrying a "config" object.
    static RunConfig load(const std::filesystem::path& path);

    /// Hex FNV-1a of the canonical JSON form.
    std::string hash() const;
    void validate() const;
};

/// Synthetic model file: {"kind": "additive"|"interaction", "weights": {...},
/// "pairs": [["a", "b", bonus], ...], "bias": b, "link": "logistic"|"identity"}.
std::shared_ptr<const Predictor> load_model_file(const std::filesystem::path& path);

/// Resolves config.predictor (or the environment default) to a Predictor.
std::shared_ptr<const Predictor> open_predictor(const RunConfig& config);

/// Builds the filler named by config.sampling.
std::shared_ptr<const Filler> open_filler(const RunConfig& config);

PairwiseConfig pairwise_config(const RunConfig& config);
PageRankOptions pagerank_options(const RunConfig& config);

struct DatasetItem {
    TokenSequence tokens;
    int label = -1;
};

/// JSON Lines {"text", "label"}, the same format as filler corpora.
std::vector<DatasetItem> load_dataset(const std::filesystem::path& path, bool lowercase);

/// Everything cmd_explain produces, before anything touches the disk.
struct ExplainArtifacts {
    InteractionGraph graph;
    RankingResult ranking;
    nlohmann::ordered_json attribution;
    /// File name -> contents.
    std::vector<std::pair<std::string, std::string>> files;
};

ExplainArtifacts explain(const RunConfig& config, const TokenSequence& tokens,
                         std::shared_ptr<const Predictor> predictor, std::shared_ptr<const Filler> filler);

/// Writes graph.json, graph.dot, matrix.csv and attribution.json into `out_dir`.
/// Either every file is written or none is.
ExplainArtifacts cmd_explain(const RunConfig& config, const std::string& text, const std::filesystem::path& out_dir);

/// Ranking of one instance's players by the named evaluation method.
/// "random" is a seeded shuffle; "shapley" sorts node Shapley values; any
/// pairwise method ranks its interaction graph by PageRank.
std::vector<std::size_t> rank_instance(const std::string& eval_method, const RunConfig& config,
                                       std::shared_ptr<const Predictor> predictor,
                                       std::shared_ptr<const Filler> filler, const TokenSequence& tokens,
                                       int explained_class, const PlayerPartition& partition,
                                       std::uint64_t instance_seed);

/// Per-method reports over the k grid; writes <method>.csv and <method>.json.
std::vector<std::pair<std::string, EvalReport>> cmd_evaluate(const RunConfig& config,
                                                             const std::filesystem::path& dataset,
                                                             const std::filesystem::path& out_dir);

struct OracleCheck {
    std::string name;
    bool passed = false;
    double measured = 0.0;   // worst error, or pass fraction for convergence
    double threshold = 0.0;
    std::string detail;
};

/// Runs the exact/MC identities on "g3", a game file, or
/// "random:count=N,p=P,seed=S".
std::vector<OracleCheck> cmd_oracle(const RunConfig& config, const std::string& source);
nlohmann::ordered_json oracle_report_json(const std::vector<OracleCheck>& checks);

/// The canonical three-player test game.
TableValueFunction g3_game();
/// i.i.d. uniform values in [-1, 1] with v(∅) = 0.
TableValueFunction random_table_game(std::size_t players, std::uint64_t seed);

/// Writes each (name, contents) pair under `dir` atomically as a set.
void write_files_atomically(const std::filesystem::path& dir,
                            const std::vector<std::pair<std::string, std::string>>& files);

}  // namespace asiv
