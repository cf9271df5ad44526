#include "asiv/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "asiv/endpoint.hpp"
#include "asiv/error.hpp"
#include "asiv/text.hpp"

namespace asiv {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// RunConfig

ojson RunConfig::to_json() const {
    ojson doc;
    doc["method"] = method;
    doc["convention"] = convention;
    doc["estimator"] = estimator;
    doc["sampling"] = sampling;
    doc["m"] = m;
    doc["r"] = r;
    doc["seed"] = seed;
    doc["w_mode"] = w_mode;
    doc["k_grid"] = k_grid;
    doc["spans"] = spans;
    doc["predictor"] = predictor;
    doc["fill_endpoint"] = fill_endpoint;
    doc["corpus"] = corpus;
    doc["ce_corpus"] = ce_corpus;
    doc["ngram_order"] = ngram_order;
    doc["smoothing"] = smoothing;
    doc["fill_mode"] = fill_mode;
    doc["pad_token"] = pad_token;
    doc["length_cap"] = length_cap;
    doc["explained_class"] = explained_class;
    doc["lowercase"] = lowercase;
    doc["damping"] = damping;
    doc["tolerance"] = tolerance;
    doc["max_iterations"] = max_iterations;
    doc["weight_mode"] = weight_mode;
    doc["lor_floor"] = lor_floor;
    doc["eval_methods"] = eval_methods;
    doc["threads"] = threads;
    doc["timeout_seconds"] = timeout_seconds;
    return doc;
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw LoadError("config must be a JSON object");
    RunConfig c;
    const ojson known = c.to_json();
    for (const auto& [key, _] : doc.items()) {
        if (!known.contains(key)) throw LoadError("unknown config field \"" + key + "\"");
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (doc.contains(key)) doc.at(key).get_to(field);
        };
        get("method", c.method);
        get("convention", c.convention);
        get("estimator", c.estimator);
        get("sampling", c.sampling);
        get("m", c.m);
        get("r", c.r);
        get("seed", c.seed);
        get("w_mode", c.w_mode);
        get("k_grid", c.k_grid);
        get("spans", c.spans);
        get("predictor", c.predictor);
        get("fill_endpoint", c.fill_endpoint);
        get("corpus", c.corpus);
        get("ce_corpus", c.ce_corpus);
        get("ngram_order", c.ngram_order);
        get("smoothing", c.smoothing);
        get("fill_mode", c.fill_mode);
        get("pad_token", c.pad_token);
        get("length_cap", c.length_cap);
        get("explained_class", c.explained_class);
        get("lowercase", c.lowercase);
        get("damping", c.damping);
        get("tolerance", c.tolerance);
        get("max_iterations", c.max_iterations);
        get("weight_mode", c.weight_mode);
        get("lor_floor", c.lor_floor);
        get("eval_methods", c.eval_methods);
        get("threads", c.threads);
        get("timeout_seconds", c.timeout_seconds);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(std::string("bad config value: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open config file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (doc.is_object() && doc.contains("config") && doc["config"].is_object()) return from_json(doc["config"]);
    return from_json(doc);
}

std::string RunConfig::hash() const {
    const std::string canonical = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::validate() const {
    auto one_of = [](const std::string& value, std::initializer_list<const char*> allowed, const char* field) {
        for (const char* a : allowed) {
            if (value == a) return;
        }
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
        throw DomainError(std::string(field) + " must be one of " + list + ", got \"" + value + "\"");
    };
    one_of(method, {"asiv", "shapley-interaction-index", "sii", "shapley-taylor-2", "sti"}, "method");
    one_of(convention, {"perm", "subset"}, "convention");
    one_of(estimator, {"mc", "exact"}, "estimator");
    one_of(sampling, {"pad", "random", "ce", "ide"}, "sampling");
    one_of(fill_mode, {"greedy", "sample"}, "fill_mode");
    parse_w_mode(w_mode);
    parse_weight_mode(weight_mode);
    if (m < 1) throw DomainError("m must be at least 1");
    if (r < 1) throw DomainError("r must be at least 1");
    if (length_cap < 1) throw DomainError("length_cap must be at least 1");
    if (method == "asiv" && convention == "subset" && estimator == "mc")
        throw DomainError("the subset convention has no Monte Carlo estimator; use estimator=exact");
    for (double k : k_grid) {
        if (!(k >= 0.0 && k <= 100.0)) throw DomainError("k grid entries must lie in [0,100]");
    }
    if (threads < 1) throw DomainError("threads must be at least 1");
    if (!(timeout_seconds > 0.0)) throw DomainError("timeout_seconds must be positive");
}

// ---------------------------------------------------------------------------
// Predictors and fillers

std::shared_ptr<const Predictor> load_model_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open model file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
        const auto kind = doc.at("kind").get<std::string>();
        const auto weights = doc.value("weights", std::map<std::string, double>{});
        const double bias = doc.value("bias", 0.0);
        const auto link_name = doc.value("link", std::string("logistic"));
        if (link_name != "logistic" && link_name != "identity")
            throw LoadError("model link must be logistic or identity");
        const Link link = link_name == "logistic" ? Link::logistic : Link::identity;
        if (kind == "additive") return make_additive_predictor(weights, bias, link);
        if (kind == "interaction") {
            std::map<TokenPair, double> pairs;
            for (const auto& entry : doc.value("pairs", nlohmann::json::array())) {
                if (!entry.is_array() || entry.size() != 3)
                    throw LoadError("each pair entry must be [token, token, bonus]");
                pairs[make_token_pair(entry[0].get<std::string>(), entry[1].get<std::string>())] +=
                    entry[2].get<double>();
            }
            return make_interaction_predictor(weights, pairs, bias, link);
        }
        throw LoadError("model kind must be additive or interaction, got \"" + kind + "\"");
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("model file " + path.string() + ": " + e.what());
    }
}

namespace {

bool is_endpoint(const std::string& spec) {
    return spec.rfind("exec:", 0) == 0 || spec.rfind("http://", 0) == 0;
}

std::chrono::milliseconds timeout_of(const RunConfig& config) {
    return std::chrono::milliseconds(static_cast<long long>(config.timeout_seconds * 1000.0));
}

}  // namespace

std::shared_ptr<const Predictor> open_predictor(const RunConfig& config) {
    std::string spec = config.predictor;
    if (spec.empty()) {
        if (const char* env = std::getenv(kEndpointEnvVar)) spec = env;
    }
    if (spec.empty())
        throw DomainError(std::string("no predictor configured; pass --predictor or set ") + kEndpointEnvVar);
    if (is_endpoint(spec)) return open_external_predictor(spec, timeout_of(config));
    return load_model_file(spec);
}

std::shared_ptr<const Filler> open_filler(const RunConfig& config) {
    const FillMode mode = config.fill_mode == "sample" ? FillMode::sample : FillMode::greedy;
    if (config.sampling == "pad") return std::make_shared<PadFiller>(config.pad_token);
    if (config.sampling == "random") {
        if (config.corpus.empty()) throw DomainError("sampling=random needs a corpus");
        return std::make_shared<CorpusFiller>(load_corpus(config.corpus, config.lowercase));
    }
    if (config.sampling == "ide") {
        if (config.corpus.empty()) throw DomainError("sampling=ide needs the task corpus");
        auto model = std::make_shared<NgramModel>(
            train_ngram(load_corpus(config.corpus, config.lowercase), config.ngram_order, config.smoothing));
        return std::make_shared<NgramFiller>(std::move(model), mode, FillerKind::in_domain);
    }
    if (config.sampling == "ce") {
        if (!config.fill_endpoint.empty()) {
            auto client = std::make_shared<EndpointClient>(open_transport(config.fill_endpoint), timeout_of(config));
            client->handshake();
            return std::make_shared<ExternalFiller>(std::move(client), mode);
        }
        if (config.ce_corpus.empty()) throw DomainError("sampling=ce needs fill_endpoint or ce_corpus");
        auto model = std::make_shared<NgramModel>(
            train_ngram(load_corpus(config.ce_corpus, config.lowercase), config.ngram_order, config.smoothing));
        return std::make_shared<NgramFiller>(std::move(model), mode, FillerKind::conditional);
    }
    throw DomainError("unknown sampling strategy \"" + config.sampling + "\"");
}

namespace {

Method method_for(const std::string& name, const RunConfig& config) {
    if (name == "asiv") {
        if (config.convention == "subset") return Method::asiv_subset;
        return config.estimator == "exact" ? Method::asiv_perm : Method::asiv_mc;
    }
    return parse_method(name);
}

}  // namespace

PairwiseConfig pairwise_config(const RunConfig& config) {
    PairwiseConfig p;
    p.method = method_for(config.method, config);
    p.monte_carlo = config.estimator == "mc";
    p.mc.m = config.m;
    p.mc.seed = config.seed;
    p.mc.w_mode = parse_w_mode(config.w_mode);
    p.threads = config.threads;
    return p;
}

PageRankOptions pagerank_options(const RunConfig& config) {
    PageRankOptions o;
    o.damping = config.damping;
    o.tolerance = config.tolerance;
    o.max_iterations = config.max_iterations;
    o.weight_mode = parse_weight_mode(config.weight_mode);
    return o;
}

std::vector<DatasetItem> load_dataset(const fs::path& path, bool lowercase) {
    const Corpus corpus = load_corpus(path.string(), lowercase);
    std::vector<DatasetItem> out;
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i)
        out.push_back({corpus.sequences[i], corpus.labels.empty() ? -1 : corpus.labels[i]});
    return out;
}

// ---------------------------------------------------------------------------
// Files

void write_files_atomically(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    const std::string suffix = ".tmp-" + std::to_string(::getpid());
    std::vector<fs::path> staged;
    auto discard = [&] {
        for (const auto& p : staged) fs::remove(p, ec);
    };
    for (const auto& [name, contents] : files) {
        const fs::path tmp = dir / (name + suffix);
        staged.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary);
        out << contents;
        out.close();
        if (!out) {
            discard();
            throw Error("cannot write " + tmp.string());
        }
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
        fs::rename(staged[i], dir / files[i].first, ec);
        if (ec) {
            discard();
            for (std::size_t j = 0; j < i; ++j) fs::remove(dir / files[j].first, ec);
            throw Error("cannot move " + staged[i].string() + " into place");
        }
    }
}

// ---------------------------------------------------------------------------
// explain

namespace {

int resolve_class(const RunConfig& config, const Predictor& predictor, const TokenSequence& tokens) {
    if (config.explained_class >= 0) {
        if (config.explained_class >= predictor.classes())
            throw DomainError("explained_class is out of range for the predictor");
        return config.explained_class;
    }
    return predictor.predict(tokens).class_index;
}

std::vector<GraphNode> nodes_for(const PlayerPartition& partition, const TokenSequence& tokens) {
    std::vector<GraphNode> nodes;
    for (std::size_t i = 0; i < partition.player_count(); ++i)
        nodes.push_back({partition.label(tokens, i), partition.players[i], 0.0, 0.0});
    return nodes;
}

PlayerPartition partition_for(const RunConfig& config, std::size_t n) {
    std::vector<PositionSet> spans;
    for (const auto& s : config.spans) spans.push_back(s);
    return coalesce(n, spans);
}

}  // namespace

ExplainArtifacts explain(const RunConfig& config, const TokenSequence& tokens, std::shared_ptr<const Predictor> predictor,
                         std::shared_ptr<const Filler> filler) {
    config.validate();
    validate_sequence(tokens);
    if (tokens.size() > config.length_cap)
        throw DomainError("input has " + std::to_string(tokens.size()) + " tokens, over the length cap of " +
                          std::to_string(config.length_cap));
    const int cls = resolve_class(config, *predictor, tokens);
    const auto partition = partition_for(config, tokens.size());
    const auto pcfg = pairwise_config(config);
    const ModelValueFunction vf(predictor, filler, tokens, cls, partition,
                                {config.r, config.seed, /*memoize=*/true});

    ExplainArtifacts out;
    out.graph = pairwise_graph(vf, pcfg, nodes_for(partition, tokens));
    const std::string hash = config.hash();
    out.graph.metadata["config_hash"] = hash;
    out.graph.metadata["engine_version"] = kEngineVersion;
    out.graph.metadata["seed"] = std::to_string(config.seed);
    out.graph.metadata["explained_class"] = std::to_string(cls);
    out.graph.metadata["filler"] = filler->describe();
    out.ranking = pagerank(out.graph, pagerank_options(config));

    out.attribution = attribution_json(out.graph, pcfg);
    out.attribution["explained_class"] = cls;
    out.attribution["baseline"] = vf.baseline();
    out.attribution["tokens"] = tokens;
    out.attribution["ranking"] = {{"scores", out.ranking.scores},
                                  {"order", out.ranking.order},
                                  {"iterations", out.ranking.iterations},
                                  {"converged", out.ranking.converged},
                                  {"weight_mode", config.weight_mode}};
    out.attribution["config_hash"] = hash;
    out.attribution["engine_version"] = kEngineVersion;
    out.attribution["config"] = config.to_json();

    out.files = {{"graph.json", export_graph(out.graph, GraphFormat::json)},
                 {"graph.dot", export_graph(out.graph, GraphFormat::dot)},
                 {"matrix.csv", export_graph(out.graph, GraphFormat::matrix_csv)},
                 {"attribution.json", out.attribution.dump(2) + "\n"}};
    return out;
}

ExplainArtifacts cmd_explain(const RunConfig& config, const std::string& text, const fs::path& out_dir) {
    config.validate();
    const auto tokens = tokenize(text, config.lowercase);
    auto predictor = open_predictor(config);
    auto filler = open_filler(config);
    auto artifacts = explain(config, tokens, predictor, filler);
    write_files_atomically(out_dir, artifacts.files);
    return artifacts;
}

// ---------------------------------------------------------------------------
// evaluate

std::vector<std::size_t> rank_instance(const std::string& eval_method, const RunConfig& config,
                                       std::shared_ptr<const Predictor> predictor, std::shared_ptr<const Filler> filler,
                                       const TokenSequence& tokens, int explained_class,
                                       const PlayerPartition& partition, std::uint64_t instance_seed) {
    const auto p = partition.player_count();
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (eval_method == "random") {
        Rng rng(derive_seed({instance_seed, 0x7a4d0ULL}));
        shuffle(order.begin(), order.end(), rng);
        return order;
    }
    if (p < 2) return order;

    const ModelValueFunction vf(std::move(predictor), std::move(filler), tokens, explained_class, partition,
                                {config.r, instance_seed, true});
    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < p; ++i) anchors.push_back(partition.anchor(i));
    if (eval_method == "shapley") {
        std::vector<double> scores(p);
        if (p <= PairwiseConfig{}.exact_node_cap) {
            const auto dense = DenseGame::from(vf);
            for (std::size_t i = 0; i < p; ++i) scores[i] = shapley_exact(dense, i).value;
        } else {
            McConfig mc{config.m, instance_seed, parse_w_mode(config.w_mode)};
            for (std::size_t i = 0; i < p; ++i) scores[i] = shapley_mc(vf, i, mc).value;
        }
        return order_by_score(scores, anchors);
    }
    RunConfig local = config;
    local.method = eval_method;
    local.seed = instance_seed;
    const auto graph = pairwise_graph(vf, pairwise_config(local), nodes_for(partition, tokens));
    return pagerank(graph, pagerank_options(config)).order;
}

std::vector<std::pair<std::string, EvalReport>> cmd_evaluate(const RunConfig& config, const fs::path& dataset_path,
                                                             const fs::path& out_dir) {
    config.validate();
    for (const auto& m : config.eval_methods) {
        if (m != "random" && m != "shapley") method_for(m, config);
    }
    auto predictor = open_predictor(config);
    auto filler = open_filler(config);
    const auto items = load_dataset(dataset_path, config.lowercase);

    struct Kept {
        std::size_t index;
        TokenSequence tokens;
        int cls;
        PlayerPartition partition;
    };
    std::vector<Kept> kept;
    std::size_t over_cap = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].tokens.size() > config.length_cap) {
            ++over_cap;
            continue;
        }
        const int cls = resolve_class(config, *predictor, items[i].tokens);
        kept.push_back({i, items[i].tokens, cls, singleton_partition(items[i].tokens.size())});
    }
    if (kept.empty()) throw DomainError("no instances left after applying the length cap");

    std::vector<std::pair<std::string, EvalReport>> reports;
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& method : config.eval_methods) {
        std::vector<EvalInstance> dataset;
        for (const auto& k : kept) {
            const auto seed = derive_seed({config.seed, k.index});
            dataset.push_back({k.tokens, k.cls, k.partition,
                               rank_instance(method, config, predictor, filler, k.tokens, k.cls, k.partition, seed)});
        }
        auto report = sweep(*predictor, dataset, config.k_grid, {config.pad_token, config.lor_floor});
        report.pre_skipped = over_cap;
        report.dataset_size = items.size();
        if (over_cap > 0)
            report.notes.push_back(std::to_string(over_cap) + " instances over the length cap of " +
                                   std::to_string(config.length_cap) + " skipped");
        auto doc = report.to_json();
        doc["method"] = method;
        doc["config_hash"] = config.hash();
        doc["seed"] = config.seed;
        doc["convention"] = convention_of(method_for(method == "random" || method == "shapley" ? "asiv" : method, config));
        doc["engine_version"] = kEngineVersion;
        doc["config"] = config.to_json();
        files.emplace_back(method + ".csv", "# config_hash: " + config.hash() + "\n# engine_version: " +
                                                std::string(kEngineVersion) + "\n" + report.to_csv());
        files.emplace_back(method + ".json", doc.dump(2) + "\n");
        reports.emplace_back(method, std::move(report));
    }
    write_files_atomically(out_dir, files);
    return reports;
}

// ---------------------------------------------------------------------------
// oracle

TableValueFunction g3_game() {
    // Bit k is player k+1: v{1}=1, v{2}=2, v{1,2}=5, v{3}=0, v{1,3}=1, v{2,3}=2, v{1,2,3}=6.
    return TableValueFunction(3, {0.0, 1.0, 2.0, 5.0, 0.0, 1.0, 2.0, 6.0});
}

TableValueFunction random_table_game(std::size_t players, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> values(std::size_t{1} << players);
    for (std::size_t m = 1; m < values.size(); ++m) values[m] = 2.0 * rng.uniform01() - 1.0;
    return TableValueFunction(players, std::move(values));
}

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

struct Worst {
    double err = 0.0;
    std::string where;
    void update(double e, const std::string& w) {
        if (e > err || where.empty()) {
            if (e >= err) {
                err = e;
                where = w;
            }
        }
    }
};

/// The game with one extra player that never changes any value.
TableValueFunction with_dummy(const TableValueFunction& g) {
    const auto p = g.player_count();
    std::vector<double> values(std::size_t{1} << (p + 1));
    const std::uint64_t low = (std::uint64_t{1} << p) - 1;
    for (std::uint64_t m = 0; m < values.size(); ++m) values[m] = g.at(m & low);
    return TableValueFunction(p + 1, std::move(values));
}

/// v(S) = Σ_{i∈S} v({i}): an additive game sharing g's singleton values.
TableValueFunction additive_twin(const TableValueFunction& g) {
    const auto p = g.player_count();
    std::vector<double> values(std::size_t{1} << p, 0.0);
    for (std::uint64_t m = 0; m < values.size(); ++m) {
        for (std::size_t i = 0; i < p; ++i) {
            if (m & (std::uint64_t{1} << i)) values[m] += g.at(std::uint64_t{1} << i);
        }
    }
    return TableValueFunction(p, std::move(values));
}

std::vector<std::pair<std::string, TableValueFunction>> oracle_games(const std::string& source) {
    std::vector<std::pair<std::string, TableValueFunction>> games;
    if (source == "g3") {
        games.emplace_back("g3", g3_game());
    } else if (source.rfind("random:", 0) == 0) {
        std::size_t count = 100;
        std::size_t p = 5;
        std::uint64_t seed = 0;
        std::stringstream ss(source.substr(7));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw DomainError("bad generator field \"" + item + "\"");
            const auto key = item.substr(0, eq);
            const auto val = std::stoull(item.substr(eq + 1));
            if (key == "count") count = val;
            else if (key == "p") p = val;
            else if (key == "seed") seed = val;
            else throw DomainError("unknown generator field \"" + key + "\"");
        }
        check_enumeration_cap(p + 1);
        if (p < 2) throw DomainError("random games need at least 2 players");
        for (std::size_t g = 0; g < count; ++g)
            games.emplace_back("random#" + std::to_string(g), random_table_game(p, derive_seed({seed, g})));
    } else {
        games.emplace_back(source, TableValueFunction::load(source));
    }
    return games;
}

}  // namespace

std::vector<OracleCheck> cmd_oracle(const RunConfig& config, const std::string& source) {
    const auto games = oracle_games(source);
    constexpr double tol = 1e-10;
    Worst efficiency, dummy, null_interaction, symmetry, factor2;
    std::size_t mc_total = 0;
    std::size_t mc_within = 0;
    McConfig mc{config.m, config.seed, WMode::set_function};

    for (const auto& [name, game] : games) {
        const auto p = game.player_count();
        const auto dense = DenseGame::from(game);
        double sum = 0.0;
        for (std::size_t i = 0; i < p; ++i) sum += shapley_exact(dense, i).value;
        const double grand = game.at((std::uint64_t{1} << p) - 1) - game.at(0);
        efficiency.update(rel_err(sum, grand), name);

        if (p + 1 <= kEnumerationCap) {
            const auto dg = DenseGame::from(with_dummy(game));
            const std::size_t d = p;
            double worst = std::abs(shapley_exact(dg, d).value);
            for (std::size_t t = 0; t < p; ++t) {
                worst = std::max(worst, std::abs(asiv_subset_exact(dg, d, t).value));
                worst = std::max(worst, std::abs(asiv_perm_exact(dg, d, t).value));
                worst = std::max(worst, std::abs(asiv_subset_exact(dg, t, d).value));
                worst = std::max(worst, std::abs(asiv_perm_exact(dg, t, d).value));
            }
            dummy.update(worst, name);
        }

        const auto add = DenseGame::from(additive_twin(game));
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < p; ++b) {
                if (a == b) continue;
                const std::string where = name + " pair (" + std::to_string(a) + "," + std::to_string(b) + ")";
                double worst = std::abs(shapley_interaction_index_exact(add, a, b).value);
                worst = std::max(worst, std::abs(shapley_taylor_2_exact(add, a, b).value));
                worst = std::max(worst, std::abs(asiv_subset_exact(add, a, b).value));
                worst = std::max(worst, std::abs(asiv_perm_exact(add, a, b).value));
                null_interaction.update(worst, where);

                symmetry.update(rel_err(shapley_interaction_index_exact(dense, a, b).value,
                                        shapley_interaction_index_exact(dense, b, a).value), where + " sii");
                symmetry.update(rel_err(shapley_taylor_2_exact(dense, a, b).value,
                                        shapley_taylor_2_exact(dense, b, a).value), where + " sti");
                const double sub = asiv_subset_exact(dense, a, b).value;
                const double perm = asiv_perm_exact(dense, a, b).value;
                symmetry.update(rel_err(sub, asiv_subset_exact(dense, b, a).value), where + " asiv-subset");
                symmetry.update(rel_err(perm, asiv_perm_exact(dense, b, a).value), where + " asiv-perm");
                factor2.update(rel_err(perm, 2.0 * sub), where);

                const auto est = asiv_mc(game, a, b, mc);
                ++mc_total;
                const double gap = std::abs(est.value - perm);
                if (est.standard_error > 0.0 ? gap <= 5.0 * est.standard_error : gap <= 1e-12) ++mc_within;
            }
        }
    }

    std::vector<OracleCheck> checks;
    auto add_check = [&](const std::string& check, const Worst& w, double threshold) {
        checks.push_back({check, w.err <= threshold, w.err, threshold, w.where});
    };
    add_check("efficiency", efficiency, tol);
    add_check("dummy", dummy, tol);
    add_check("null-interaction", null_interaction, tol);
    add_check("exact-symmetry", symmetry, tol);
    add_check("factor-2 (perm = 2 x subset)", factor2, tol);
    const double frac = mc_total ? static_cast<double>(mc_within) / static_cast<double>(mc_total) : 1.0;
    checks.push_back({"mc-convergence (within 5 se)", frac >= 0.95, frac, 0.95,
                      std::to_string(mc_within) + "/" + std::to_string(mc_total) + " ordered pairs, m=" +
                          std::to_string(config.m)});

    if (source == "g3") {
        const auto dense = DenseGame::from(games.front().second);
        Worst known;
        const double shap[] = {7.0 / 3.0, 10.0 / 3.0, 1.0 / 3.0};
        for (std::size_t i = 0; i < 3; ++i)
            known.update(rel_err(shapley_exact(dense, i).value, shap[i]), "shapley " + std::to_string(i));
        known.update(rel_err(shapley_interaction_index_exact(dense, 0, 1).value, 2.5), "sii (1,2)");
        known.update(rel_err(asiv_subset_exact(dense, 0, 1).value, 4.0 / 3.0), "asiv-subset 1|2");
        known.update(rel_err(asiv_subset_exact(dense, 1, 0).value, 4.0 / 3.0), "asiv-subset 2|1");
        known.update(rel_err(asiv_perm_exact(dense, 0, 1).value, 8.0 / 3.0), "asiv-perm 1|2");
        add_check("g3-known-values", known, tol);
    }
    return checks;
}

ojson oracle_report_json(const std::vector<OracleCheck>& checks) {
    ojson doc;
    doc["engine_version"] = kEngineVersion;
    doc["checks"] = ojson::array();
    bool all = true;
    for (const auto& c : checks) {
        all = all && c.passed;
        doc["checks"].push_back({{"name", c.name},
                                 {"passed", c.passed},
                                 {"measured", c.measured},
                                 {"threshold", c.threshold},
                                 {"detail", c.detail}});
    }
    doc["all_passed"] = all;
    return doc;
}

}  // namespace asiv
