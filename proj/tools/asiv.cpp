// asiv: command-line front end for the attribution engine.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "asiv/cli.hpp"
#include "asiv/error.hpp"
#include "asiv/rng.hpp"
#include "asiv/text.hpp"

namespace {

using namespace asiv;

/// Flags bound to a scratch RunConfig; only flags actually given override
/// the config file (or the defaults).
class ConfigFlags {
public:
    void attach(CLI::App& app) {
        app.add_option("--config", config_path_, "JSON config file; flags override its fields");
        bind(app, "--method", &RunConfig::method, "asiv | shapley-interaction-index | shapley-taylor-2");
        bind(app, "--convention", &RunConfig::convention, "perm | subset");
        bind(app, "--estimator", &RunConfig::estimator, "mc | exact");
        bind(app, "--sampling", &RunConfig::sampling, "pad | random | ce | ide");
        bind(app, "-m,--samples", &RunConfig::m, "Monte Carlo draws per pair");
        bind(app, "-r,--fill-draws", &RunConfig::r, "filler draws per coalition value");
        bind(app, "--seed", &RunConfig::seed, "master seed");
        bind(app, "--w-mode", &RunConfig::w_mode, "set-function | shared | per-term");
        bind(app, "--k-grid", &RunConfig::k_grid, "k percentages, ascending")->delimiter(',');
        bind(app, "--predictor", &RunConfig::predictor, "model file, exec:<command> or http://host:port/path");
        bind(app, "--fill-endpoint", &RunConfig::fill_endpoint, "external filler endpoint for sampling=ce");
        bind(app, "--corpus", &RunConfig::corpus, "JSONL corpus for random/ide sampling");
        bind(app, "--ce-corpus", &RunConfig::ce_corpus, "JSONL general-text corpus for ce sampling");
        bind(app, "--ngram-order", &RunConfig::ngram_order, "n-gram order (1-3)");
        bind(app, "--smoothing", &RunConfig::smoothing, "add-k smoothing constant");
        bind(app, "--fill-mode", &RunConfig::fill_mode, "greedy | sample");
        bind(app, "--pad-token", &RunConfig::pad_token, "padding token");
        bind(app, "--length-cap", &RunConfig::length_cap, "maximum tokens per instance");
        bind(app, "--class", &RunConfig::explained_class, "explained class (-1: predicted)");
        bind(app, "--lowercase", &RunConfig::lowercase, "lowercase input text");
        bind(app, "--damping", &RunConfig::damping, "PageRank damping");
        bind(app, "--tolerance", &RunConfig::tolerance, "PageRank L1 tolerance");
        bind(app, "--max-iterations", &RunConfig::max_iterations, "PageRank iteration limit");
        bind(app, "--weight-mode", &RunConfig::weight_mode, "positive | absolute | shift");
        bind(app, "--lor-floor", &RunConfig::lor_floor, "probability floor for LOR");
        bind(app, "--eval-methods", &RunConfig::eval_methods, "ranking methods to evaluate")->delimiter(',');
        bind(app, "-j,--threads", &RunConfig::threads, "worker threads");
        bind(app, "--timeout", &RunConfig::timeout_seconds, "endpoint timeout in seconds");
        app.add_option("--span", spans_, "comma-separated positions merged into one player (repeatable)");
    }

    RunConfig resolve() const {
        RunConfig c = config_path_.empty() ? RunConfig{} : RunConfig::load(config_path_);
        for (const auto& apply : appliers_) apply(c);
        if (!spans_.empty()) {
            c.spans.clear();
            for (const auto& text : spans_) {
                std::vector<std::size_t> span;
                std::stringstream ss(text);
                std::string item;
                while (std::getline(ss, item, ',')) span.push_back(std::stoul(item));
                c.spans.push_back(std::move(span));
            }
        }
        return c;
    }

private:
    template <class T>
    CLI::Option* bind(CLI::App& app, const std::string& name, T RunConfig::*field, const std::string& help) {
        CLI::Option* opt;
        if constexpr (std::is_same_v<T, bool>) {
            opt = app.add_flag(name, scratch_.*field, help);
        } else {
            opt = app.add_option(name, scratch_.*field, help);
        }
        appliers_.push_back([this, opt, field](RunConfig& c) {
            if (opt->count() > 0) c.*field = scratch_.*field;
        });
        return opt;
    }

    RunConfig scratch_;
    std::string config_path_;
    std::vector<std::string> spans_;
    std::vector<std::function<void(RunConfig&)>> appliers_;
};

std::string read_text(const std::string& text, const std::string& input) {
    if (!text.empty()) return text;
    if (input.empty()) throw DomainError("pass --text or --input");
    std::ifstream in(input);
    if (!in) throw LoadError("cannot open input file " + input);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int report_error(const std::exception& e) {
    nlohmann::ordered_json doc;
    std::string type = "error";
    std::string raw;
    if (const auto* t = dynamic_cast<const ProtocolVersionError*>(&e)) {
        type = "protocol_version_error";
        raw = t->raw_reply();
    } else if (const auto* t = dynamic_cast<const TransportError*>(&e)) {
        type = "transport_error";
        raw = t->raw_reply();
    } else if (dynamic_cast<const CapExceeded*>(&e)) {
        type = "cap_exceeded";
    } else if (dynamic_cast<const DomainError*>(&e)) {
        type = "domain_error";
    } else if (dynamic_cast<const LoadError*>(&e)) {
        type = "load_error";
    }
    doc["error"] = {{"type", type}, {"message", e.what()}};
    if (!raw.empty()) doc["error"]["raw_reply"] = raw;
    std::cerr << doc.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Asymmetric Shapley interaction attribution"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kEngineVersion);

    ConfigFlags flags;
    std::string text, input, out_dir = "asiv-out", dataset, game, graph_path, keep_text;
    std::size_t trials = 10;

    auto* explain = app.add_subcommand("explain", "attribute one text and write graph + attribution files");
    flags.attach(*explain);
    explain->add_option("--text", text, "input text");
    explain->add_option("--input", input, "file holding the input text");
    explain->add_option("-o,--out", out_dir, "output directory");

    ConfigFlags eval_flags;
    auto* evaluate = app.add_subcommand("evaluate", "AOPC/LOR sweep over a JSONL dataset");
    eval_flags.attach(*evaluate);
    evaluate->add_option("--dataset", dataset, "JSONL dataset {\"text\",\"label\"}")->required();
    evaluate->add_option("-o,--out", out_dir, "output directory");

    ConfigFlags oracle_flags;
    auto* oracle = app.add_subcommand("oracle", "exact/MC conformance checks on table games");
    oracle_flags.attach(*oracle);
    oracle->add_option("--game", game, "g3, a game file, or random:count=N,p=P,seed=S")->default_val("g3");
    oracle->add_option("-o,--out", out_dir, "report file (JSON); default prints only");

    ConfigFlags rank_flags;
    auto* rank = app.add_subcommand("rank", "PageRank ordering of an exported graph.json");
    rank_flags.attach(*rank);
    rank->add_option("--graph", graph_path, "graph.json")->required();

    ConfigFlags fill_flags;
    auto* fill_check = app.add_subcommand("fill-check", "show filler outputs for a text");
    fill_flags.attach(*fill_check);
    fill_check->add_option("--text", text, "input text")->required();
    fill_check->add_option("--keep", keep_text, "comma-separated kept positions");
    fill_check->add_option("--trials", trials, "number of seeds to draw");

    CLI11_PARSE(app, argc, argv);

    try {
        if (explain->parsed()) {
            const auto config = flags.resolve();
            const auto art = cmd_explain(config, read_text(text, input), out_dir);
            for (const auto& [name, _] : art.files) std::cout << (std::filesystem::path(out_dir) / name).string() << '\n';
            return 0;
        }
        if (evaluate->parsed()) {
            const auto config = eval_flags.resolve();
            const auto reports = cmd_evaluate(config, dataset, out_dir);
            for (const auto& [method, report] : reports) std::cout << "# " << method << '\n' << report.to_csv();
            return 0;
        }
        if (oracle->parsed()) {
            const auto config = oracle_flags.resolve();
            const auto checks = cmd_oracle(config, game);
            const auto doc = oracle_report_json(checks);
            for (const auto& c : checks)
                std::printf("%s %s measured=%.3g threshold=%.3g %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                            c.measured, c.threshold, c.detail.c_str());
            if (oracle->count("--out") > 0) {
                const std::filesystem::path p(out_dir);
                write_files_atomically(p.has_parent_path() ? p.parent_path() : ".",
                                       {{p.filename().string(), doc.dump(2) + "\n"}});
            }
            return doc["all_passed"].get<bool>() ? 0 : 1;
        }
        if (rank->parsed()) {
            const auto config = rank_flags.resolve();
            std::ifstream in(graph_path);
            if (!in) throw LoadError("cannot open graph file " + graph_path);
            std::stringstream ss;
            ss << in.rdbuf();
            const auto graph = import_graph_json(ss.str());
            const auto result = pagerank(graph, pagerank_options(config));
            for (auto i : result.order)
                std::cout << i << '\t' << graph.nodes()[i].label << '\t' << format_double(result.scores[i]) << '\n';
            return 0;
        }
        if (fill_check->parsed()) {
            const auto config = fill_flags.resolve();
            const auto tokens = tokenize(text, config.lowercase);
            std::vector<std::size_t> keep;
            std::stringstream ss(keep_text);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) keep.push_back(std::stoul(item));
            }
            const auto filler = open_filler(config);
            const auto kept = make_position_set(keep, tokens.size());
            std::cout << "filler: " << filler->describe() << '\n';
            for (std::size_t t = 0; t < trials; ++t) {
                const auto seed = derive_seed({config.seed, t});
                const auto r = filler->fill(tokens, kept, seed);
                for (std::size_t i = 0; i < r.tokens.size(); ++i) std::cout << (i ? " " : "") << r.tokens[i];
                std::cout << (r.used_marginal_fallback ? "  [marginal fallback]" : "") << '\n';
            }
            return 0;
        }
    } catch (const std::exception& e) {
        return report_error(e);
    }
    return 2;
}
