#include "omnia/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "omnia/rng.hpp"

namespace omnia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string getenv_or(const char* name, std::string fallback = "") {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::move(fallback);
}

void require_file(const fs::path& path) {
    if (!fs::exists(path)) throw MissingArtifact(path.string());
}

json read_json_file(const fs::path& path) {
    require_file(path);
    std::ifstream in(path, std::ios::binary);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorClass::Data, path.string() + ": " + e.what());
    }
    return j;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact(path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorClass::Data, "failed writing " + path.string());
}

// timing.json is append-merged per stage and carries the only
// run-to-run-variable bytes in the artifact tree.
void record_timing(const PipelineConfig& cfg, const std::string& stage,
                   const std::vector<double>& seconds) {
    const fs::path path = fs::path(cfg.out_dir) / "timing.json";
    json j = json::object();
    if (fs::exists(path)) {
        try {
            j = read_json_file(path);
        } catch (const Error&) {
            j = json::object();
        }
    }
    j[stage] = seconds;
    write_json_file(path, j);
}

class StageClock {
public:
    void start() { t0_ = std::chrono::steady_clock::now(); }
    void stop() {
        seconds_.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count());
    }
    const std::vector<double>& seconds() const { return seconds_; }

private:
    std::chrono::steady_clock::time_point t0_;
    std::vector<double> seconds_;
};

KnowledgeGraph load_observed(const PipelineConfig& cfg, std::uint32_t i) {
    const fs::path path = repeat_dir(cfg, i) / "observed.tsv";
    require_file(path);
    return load_graph_file(path);
}

// Interns labels so removed-only entities get fresh ids; never adds triples.
std::vector<Triple> read_triples_interning(KnowledgeGraph& g, const fs::path& path) {
    require_file(path);
    std::ifstream in(path, std::ios::binary);
    std::vector<Triple> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) continue;
        const auto fields = parse_triple_line(line, line_number);
        out.push_back({g.intern_entity(fields[0]), g.intern_relation(fields[1]),
                       g.intern_entity(fields[2])});
    }
    return out;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("unknown config key \"" + key + "\" in " + where);
    }
}

const char* threshold_mode_name(ThresholdMode mode) {
    return mode == ThresholdMode::Auto ? "auto" : "fixed";
}

const char* client_kind_name(ClientKind kind) {
    return kind == ClientKind::Mock ? "mock" : "http";
}

Decision decision_from_name(const std::string& name) {
    if (name == "true") return Decision::True;
    if (name == "false") return Decision::False;
    if (name == "unparseable") return Decision::Unparseable;
    throw Error(ErrorClass::Data, "unknown decision \"" + name + "\"");
}

std::string format_fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void PipelineConfig::validate() const {
    if (dataset.empty()) throw ConfigError("dataset path is required");
    if (out_dir.empty()) throw ConfigError("out_dir is required");
    if (repeats == 0) throw ConfigError("repeats must be positive");
    if (!(removal_fraction > 0.0 && removal_fraction < 1.0))
        throw ConfigError("removal_fraction must lie in (0, 1)");
    hp.validate();
    if (threshold.mode == ThresholdMode::Auto && !(threshold.offset > 0.0))
        throw ConfigError("threshold offset must be positive");
    if (judge.flip_rate < 0.0 || judge.flip_rate > 1.0)
        throw ConfigError("flip_rate must be in [0, 1]");
    if (judge.per_slot == 0) throw ConfigError("per_slot must be positive");
    if (judge.strategy.kind == PromptKind::Rag && judge.strategy.top_k == 0)
        throw ConfigError("rag top_k must be positive");
    if (eval.eval_size == 0 || eval.eval_size % 2 != 0)
        throw ConfigError("eval_size must be positive and even");
    if (eval.validation_size == 0 || eval.validation_size % 2 != 0)
        throw ConfigError("validation_size must be positive and even");
    if (embedder.dim == 0) throw ConfigError("embedder dim must be positive");
}

PipelineConfig config_from_json(const json& j) {
    check_keys(j,
               {"dataset", "out_dir", "seed", "repeats", "split", "candgen", "kge", "threshold",
                "judge", "embedder", "eval"},
               "config");
    PipelineConfig cfg;
    cfg.dataset = j.value("dataset", cfg.dataset);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.repeats = j.value("repeats", cfg.repeats);

    if (j.contains("split")) {
        const auto& s = j.at("split");
        check_keys(s, {"removal_fraction"}, "split");
        cfg.removal_fraction = s.value("removal_fraction", cfg.removal_fraction);
    }
    if (j.contains("candgen")) {
        const auto& s = j.at("candgen");
        check_keys(s, {"scope"}, "candgen");
        const std::string scope = s.value("scope", "member-global");
        if (scope == "member-global") cfg.scope = PairScope::MemberGlobal;
        else if (scope == "cluster-local") cfg.scope = PairScope::ClusterLocal;
        else throw ConfigError("unknown candgen scope \"" + scope + "\"");
    }
    if (j.contains("kge")) {
        const auto& s = j.at("kge");
        check_keys(s,
                   {"kind", "dim", "epochs", "learning_rate", "margin",
                    "negatives_per_positive", "batch_size", "norm_order"},
                   "kge");
        const std::string kind = s.value("kind", "transe");
        const auto parsed = model_kind_from_name(kind);
        if (!parsed) throw ConfigError("unknown kge kind \"" + kind + "\"");
        cfg.kge_kind = *parsed;
        cfg.hp.dim = s.value("dim", cfg.hp.dim);
        cfg.hp.epochs = s.value("epochs", cfg.hp.epochs);
        cfg.hp.learning_rate = s.value("learning_rate", cfg.hp.learning_rate);
        cfg.hp.margin = s.value("margin", cfg.hp.margin);
        cfg.hp.negatives_per_positive =
            s.value("negatives_per_positive", cfg.hp.negatives_per_positive);
        cfg.hp.batch_size = s.value("batch_size", cfg.hp.batch_size);
        cfg.hp.norm_order = s.value("norm_order", cfg.hp.norm_order);
    }
    if (j.contains("threshold")) {
        const auto& s = j.at("threshold");
        check_keys(s, {"mode", "value", "offset"}, "threshold");
        const std::string mode = s.value("mode", "auto");
        if (mode == "auto") cfg.threshold.mode = ThresholdMode::Auto;
        else if (mode == "fixed") cfg.threshold.mode = ThresholdMode::Fixed;
        else throw ConfigError("unknown threshold mode \"" + mode + "\"");
        cfg.threshold.value = s.value("value", cfg.threshold.value);
        cfg.threshold.offset = s.value("offset", cfg.threshold.offset);
    }
    if (j.contains("judge")) {
        const auto& s = j.at("judge");
        check_keys(s,
                   {"strategy", "representation", "top_k", "client", "flip_rate", "per_slot",
                    "sentence_mode"},
                   "judge");
        const std::string strategy = s.value("strategy", "zero-shot");
        const auto kind = prompt_kind_from_name(strategy);
        if (!kind) throw ConfigError("unknown judge strategy \"" + strategy + "\"");
        cfg.judge.strategy.kind = *kind;
        const std::string repr = s.value("representation", "triple");
        const auto parsed_repr = representation_from_name(repr);
        if (!parsed_repr) throw ConfigError("unknown representation \"" + repr + "\"");
        cfg.judge.strategy.representation = *parsed_repr;
        cfg.judge.strategy.top_k = s.value("top_k", cfg.judge.strategy.top_k);
        const std::string client = s.value("client", "mock");
        if (client == "mock") cfg.judge.client = ClientKind::Mock;
        else if (client == "http") cfg.judge.client = ClientKind::Http;
        else throw ConfigError("unknown judge client \"" + client + "\"");
        cfg.judge.flip_rate = s.value("flip_rate", cfg.judge.flip_rate);
        cfg.judge.per_slot = s.value("per_slot", cfg.judge.per_slot);
        const std::string mode = s.value("sentence_mode", "explicit");
        const auto parsed_mode = sentence_mode_from_name(mode);
        if (!parsed_mode) throw ConfigError("unknown sentence_mode \"" + mode + "\"");
        cfg.judge.sentence_mode = *parsed_mode;
    }
    if (j.contains("embedder")) {
        const auto& s = j.at("embedder");
        check_keys(s, {"kind", "dim", "endpoint_url", "timeout_ms"}, "embedder");
        const std::string kind = s.value("kind", "token-hash");
        if (kind == "token-hash") cfg.embedder.kind = EmbedderKind::TokenHash;
        else if (kind == "external") cfg.embedder.kind = EmbedderKind::External;
        else throw ConfigError("unknown embedder kind \"" + kind + "\"");
        cfg.embedder.dim = s.value("dim", cfg.embedder.dim);
        cfg.embedder.endpoint_url = s.value("endpoint_url", cfg.embedder.endpoint_url);
        cfg.embedder.timeout_ms = s.value("timeout_ms", cfg.embedder.timeout_ms);
    }
    if (j.contains("eval")) {
        const auto& s = j.at("eval");
        check_keys(s, {"eval_size", "validation_size", "sample_post_filter"}, "eval");
        cfg.eval.eval_size = s.value("eval_size", cfg.eval.eval_size);
        cfg.eval.validation_size = s.value("validation_size", cfg.eval.validation_size);
        cfg.eval.sample_post_filter =
            s.value("sample_post_filter", cfg.eval.sample_post_filter);
    }
    cfg.validate();
    return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
    json j;
    j["dataset"] = cfg.dataset;
    j["out_dir"] = cfg.out_dir;
    j["seed"] = cfg.seed;
    j["repeats"] = cfg.repeats;
    j["split"] = {{"removal_fraction", cfg.removal_fraction}};
    j["candgen"] = {{"scope", pair_scope_name(cfg.scope)}};
    j["kge"] = {{"kind", model_kind_name(cfg.kge_kind)},
                {"dim", cfg.hp.dim},
                {"epochs", cfg.hp.epochs},
                {"learning_rate", cfg.hp.learning_rate},
                {"margin", cfg.hp.margin},
                {"negatives_per_positive", cfg.hp.negatives_per_positive},
                {"batch_size", cfg.hp.batch_size},
                {"norm_order", cfg.hp.norm_order}};
    j["threshold"] = {{"mode", threshold_mode_name(cfg.threshold.mode)},
                      {"value", cfg.threshold.value},
                      {"offset", cfg.threshold.offset}};
    j["judge"] = {{"strategy", prompt_kind_name(cfg.judge.strategy.kind)},
                  {"representation", representation_name(cfg.judge.strategy.representation)},
                  {"top_k", cfg.judge.strategy.top_k},
                  {"client", client_kind_name(cfg.judge.client)},
                  {"flip_rate", cfg.judge.flip_rate},
                  {"per_slot", cfg.judge.per_slot},
                  {"sentence_mode", sentence_mode_name(cfg.judge.sentence_mode)}};
    j["embedder"] = {{"kind", embedder_kind_name(cfg.embedder.kind)},
                     {"dim", cfg.embedder.dim},
                     {"endpoint_url", cfg.embedder.endpoint_url},
                     {"timeout_ms", cfg.embedder.timeout_ms}};
    j["eval"] = {{"eval_size", cfg.eval.eval_size},
                 {"validation_size", cfg.eval.validation_size},
                 {"sample_post_filter", cfg.eval.sample_post_filter}};
    return j;
}

PipelineConfig load_config_file(const fs::path& path) {
    return config_from_json(read_json_file(path));
}

std::string canonical_config(const PipelineConfig& cfg) {
    json j = config_to_json(cfg);
    j.erase("out_dir");
    return j.dump();
}

std::string config_fingerprint(const PipelineConfig& cfg) {
    return to_hex(fnv1a64(canonical_config(cfg)));
}

fs::path repeat_dir(const PipelineConfig& cfg, std::uint32_t repeat_index) {
    return fs::path(cfg.out_dir) / ("repeat_" + std::to_string(repeat_index));
}

std::uint64_t split_stage_seed(const PipelineConfig& cfg, std::uint32_t i) {
    return derive_seed(cfg.seed, i);
}

std::uint64_t train_stage_seed(const PipelineConfig& cfg, std::uint32_t i) {
    return derive_seed(cfg.seed, 0x7200 + i);
}

std::uint64_t judge_stage_seed(const PipelineConfig& cfg, std::uint32_t i) {
    return derive_seed(cfg.seed, 0x1D00 + i);
}

std::uint64_t sample_stage_seed(const PipelineConfig& cfg, std::uint32_t i) {
    return derive_seed(cfg.seed, 0x5A00 + i);
}

void stage_split(const PipelineConfig& cfg) {
    cfg.validate();
    require_file(cfg.dataset);
    const KnowledgeGraph g = load_graph_file(cfg.dataset);
    const std::string fingerprint = config_fingerprint(cfg);

    fs::create_directories(cfg.out_dir);
    write_json_file(fs::path(cfg.out_dir) / "config.json", config_to_json(cfg));

    StageClock clock;
    for (std::uint32_t i = 0; i < cfg.repeats; ++i) {
        clock.start();
        const fs::path dir = repeat_dir(cfg, i);
        fs::create_directories(dir);

        const SplitResult split = split_graph(g, {cfg.removal_fraction, cfg.seed, i});
        write_tsv_file(split.observed, split.observed.triples(), dir / "observed.tsv");
        write_tsv_file(split.observed, split.removed, dir / "removed.tsv");

        const GraphStats stats = graph_stats(split.observed, true);
        json j;
        j["fingerprint"] = fingerprint;
        j["observed"] = {{"entities", stats.unique_entities},
                         {"relations", stats.unique_relations},
                         {"triples", stats.triple_count}};
        j["removal_fraction"] = cfg.removal_fraction;
        j["removed_count"] = split.removed.size();
        j["repeat_index"] = i;
        j["seed"] = cfg.seed;
        write_json_file(dir / "split.json", j);
        clock.stop();
    }
    record_timing(cfg, "split", clock.seconds());
}

void stage_generate(const PipelineConfig& cfg) {
    const std::string fingerprint = config_fingerprint(cfg);
    StageClock clock;
    for (std::uint32_t i = 0; i < cfg.repeats; ++i) {
        const fs::path dir = repeat_dir(cfg, i);
        KnowledgeGraph g = load_observed(cfg, i);

        clock.start();
        const ClusterMap clusters = cluster_heads(g);
        const PairAssignment pairs = collect_pairs(g, clusters, cfg.scope);
        const CandidateSet cands = generate_candidates(g, clusters, pairs);
        clock.stop();

        const std::vector<Triple> removed = read_triples_interning(g, dir / "removed.tsv");
        const CoverageReport cov = coverage(cands, removed, g);

        write_tsv_file(g, cands.triples(), dir / "candidates.tsv");
        json j;
        j["count"] = cands.size();
        j["coverage"] = {{"candidate_count", cov.candidate_count},
                         {"exhaustive_count", cov.exhaustive_count},
                         {"exhaustive_recoverable_count", cov.exhaustive_recoverable_count},
                         {"exhaustive_recoverable_ratio", cov.exhaustive_recoverable_ratio},
                         {"missing_count", cov.missing_count},
                         {"recovered_count", cov.recovered_count},
                         {"recovered_ratio", cov.recovered_ratio}};
        j["fingerprint"] = fingerprint;
        j["raw_combinations"] = cands.stats().raw_combinations;
        j["scope"] = pair_scope_name(cfg.scope);
        j["union_operations"] = cands.stats().union_operations;
        write_json_file(dir / "candidates.json", j);
    }
    record_timing(cfg, "generate", clock.seconds());
}

void stage_train(const PipelineConfig& cfg) {
    const std::string fingerprint = config_fingerprint(cfg);
    StageClock clock;
    for (std::uint32_t i = 0; i < cfg.repeats; ++i) {
        const fs::path dir = repeat_dir(cfg, i);
        const KnowledgeGraph g = load_observed(cfg, i);

        clock.start();
        const EmbeddingModel model = train(g, cfg.kge_kind, cfg.hp, train_stage_seed(cfg, i));
        clock.stop();

        save_checkpoint(model, dir / "model.kge");
        json j;
        j["epoch_losses"] = model.epoch_losses;
        j["fingerprint"] = fingerprint;
        j["hyperparams"] = config_to_json(cfg)["kge"];
        j["model_seed"] = model.seed;
        j["repeat_index"] = i;
        write_json_file(dir / "train.json", j);
    }
    record_timing(cfg, "train", clock.seconds());
}

void stage_filter(const PipelineConfig& cfg) {
    const std::string fingerprint = config_fingerprint(cfg);
    StageClock clock;
    for (std::uint32_t i = 0; i < cfg.repeats; ++i) {
        const fs::path dir = repeat_dir(cfg, i);
        KnowledgeGraph g = load_observed(cfg, i);
        const std::vector<Triple> candidates =
            read_triples_interning(g, dir / "candidates.tsv");
        const std::vector<Triple> removed = read_triples_interning(g, dir / "removed.tsv");
        const TripleSet removed_set(removed.begin(), removed.end());
        const EmbeddingModel model = load_checkpoint(dir / "model.kge");

        clock.start();
        std::vector<LabeledCandidate> validation;
        double tau = cfg.threshold.value;
        json selection = json::object();
        if (cfg.threshold.mode == ThresholdMode::Auto) {
            validation = build_validation_set(candidates, removed_set, cfg.eval.validation_size,
                                              sample_stage_seed(cfg, i));
            const auto labeled = to_labeled_triples(validation);
            const ThresholdSelection sel =
                select_filter_threshold(model, labeled, cfg.threshold.offset);
            tau = sel.threshold;
            selection = {{"candidates", sel.candidates},
                         {"offset", sel.offset},
                         {"rule", threshold_rule_name(sel.rule)},
                         {"validation_f1", sel.validation_f1}};
        }
        FilterReport report;
        const std::vector<Triple> kept =
            filter_candidates(model, candidates, tau, &report, &removed_set);
        clock.stop();

        write_labeled_tsv(g, validation, dir / "validation.tsv");
        write_tsv_file(g, kept, dir / "filtered.tsv");
        json j;
        j["after"] = report.after;
        j["before"] = report.before;
        j["fingerprint"] = fingerprint;
        j["mode"] = threshold_mode_name(cfg.threshold.mode);
        j["reduction_ratio"] = report.reduction_ratio;
        j["selection"] = selection;
        j["threshold"] = report.threshold;
        j["true_candidates"] = *report.true_candidates;
        j["true_candidates_kept"] = *report.true_candidates_kept;
        write_json_file(dir / "filter.json", j);
    }
    record_timing(cfg, "filter", clock.seconds());
}

namespace {

std::unique_ptr<JudgeClient> make_client(const PipelineConfig& cfg, const TripleSet& removed_set,
                                         std::uint32_t repeat_index) {
    if (cfg.judge.client == ClientKind::Mock)
        return std::make_unique<MockJudgeClient>(removed_set, cfg.judge.flip_rate,
                                                 judge_stage_seed(cfg, repeat_index));
    HttpJudgeConfig hc;
    hc.endpoint_url = getenv_or("OMNIA_LLM_URL");
    hc.model = getenv_or("OMNIA_LLM_MODEL");
    hc.api_key = getenv_or("OMNIA_LLM_API_KEY");
    if (hc.endpoint_url.empty())
        throw ConfigError("http judge client requires OMNIA_LLM_URL in the environment");
    if (hc.model.empty())
        throw ConfigError("http judge client requires OMNIA_LLM_MODEL in the environment");
    return std::make_unique<HttpJudgeClient>(hc);
}

TextEmbedder make_embedder(const PipelineConfig& cfg) {
    EmbedderConfig ec = cfg.embedder;
    if (ec.kind == EmbedderKind::External) {
        const std::string env_url = getenv_or("OMNIA_EMBED_URL");
        if (!env_url.empty()) ec.endpoint_url = env_url;
        ec.api_key = getenv_or("OMNIA_EMBED_API_KEY");
    }
    return TextEmbedder(ec);
}

}  // namespace

void stage_judge(const PipelineConfig& cfg) {
    const std::string fingerprint = config_fingerprint(cfg);
    const fs::path cache_path = fs::path(cfg.out_dir) / "sentence_cache.json";
    SentenceCache cache;
    if (fs::exists(cache_path)) cache = SentenceCache::load(cache_path);

    StageClock clock;
    for (std::uint32_t i = 0; i < cfg.repeats; ++i) {
        const fs::path dir = repeat_dir(cfg, i);
        KnowledgeGraph g = load_observed(cfg, i);
        const fs::path pool_path =
            dir / (cfg.eval.sample_post_filter ? "filtered.tsv" : "candidates.tsv");
        const std::vector<Triple> pool = read_triples_interning(g, pool_path);
        const std::vector<Triple> removed = read_triples_interning(g, dir / "removed.tsv");
        const TripleSet removed_set(removed.begin(), removed.end());

        TripleSet exclude;
        for (const auto& lc : read_labeled_tsv(g, dir / "validation.tsv"))
            exclude.insert(lc.triple);

        const std::vector<LabeledCandidate> evalset = sample_eval_set(
            pool, removed_set, cfg.eval.eval_size, sample_stage_seed(cfg, i), &exclude);
        write_labeled_tsv(g, evalset, dir / "evalset.tsv");

        std::vector<Triple> eval_triples;
        eval_triples.reserve(evalset.size());
        for (const auto& lc : evalset) eval_triples.push_back(lc.triple);

        const auto client = make_client(cfg, removed_set, i);

        clock.start();
        std::optional<RetrievalIndex> index;
        if (cfg.judge.strategy.kind == PromptKind::Rag)
            index = build_index(g.triples(), g, make_embedder(cfg));

        JudgeBatchOptions opts;
        opts.per_slot = cfg.judge.per_slot;
        opts.sentence_mode = cfg.judge.sentence_mode;
        opts.cache = &cache;
        const std::vector<Verdict> verdicts =
            judge_batch(eval_triples, cfg.judge.strategy, *client, g,
                        index ? &*index : nullptr, opts);
        clock.stop();

        std::ofstream out(dir / "verdicts.jsonl", std::ios::binary);
        if (!out) throw MissingArtifact((dir / "verdicts.jsonl").string());
        std::uint64_t accepted = 0, unparseable = 0;
        for (const Verdict& v : verdicts) {
            if (v.decision == Decision::True) ++accepted;
            if (v.decision == Decision::Unparseable) ++unparseable;
            json line;
            line["decision"] = decision_name(v.decision);
            line["degraded"] = v.degraded;
            line["raw"] = v.raw_response;
            out << line.dump() << '\n';
        }

        json j;
        j["accepted"] = accepted;
        j["client"] = client_kind_name(cfg.judge.client);
        j["fingerprint"] = fingerprint;
        j["mock_flip_rate"] = cfg.judge.flip_rate;
        j["mock_seed"] = judge_stage_seed(cfg, i);
        j["model"] = client->model_name();
        j["pool"] = cfg.eval.sample_post_filter ? "filtered" : "candidates";
        j["strategy"] = {{"kind", prompt_kind_name(cfg.judge.strategy.kind)},
                         {"representation",
                          representation_name(cfg.judge.strategy.representation)},
                         {"top_k", cfg.judge.strategy.top_k}};
        j["unparseable"] = unparseable;
        write_json_file(dir / "judge.json", j);
    }
    if (cfg.judge.strategy.representation == Representation::SentenceForm)
        cache.save(cache_path);
    record_timing(cfg, "judge", clock.seconds());
}

namespace {

MetricsReport metrics_from_json(const json& j) {
    MetricsReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.unparseable_count = j.at("unparseable").get<std::uint64_t>();
    r.degenerate_precision = j.at("degenerate_precision").get<bool>();
    r.degenerate_recall = j.at("degenerate_recall").get<bool>();
    r.degenerate_f1 = j.at("degenerate_f1").get<bool>();
    const auto& c = j.at("counts");
    r.counts.tp = c.at("tp").get<std::uint64_t>();
    r.counts.tn = c.at("tn").get<std::uint64_t>();
    r.counts.fp = c.at("fp").get<std::uint64_t>();
    r.counts.fn = c.at("fn").get<std::uint64_t>();
    r.counts.unparseable = r.unparseable_count;
    return r;
}

json metrics_to_json(const MetricsReport& r, const std::string& fingerprint,
                     std::uint32_t repeat_index) {
    json j;
    j["accuracy"] = r.accuracy;
    j["counts"] = {{"tp", r.counts.tp},
                   {"tn", r.counts.tn},
                   {"fp", r.counts.fp},
                   {"fn", r.counts.fn}};
    j["degenerate_f1"] = r.degenerate_f1;
    j["degenerate_precision"] = r.degenerate_precision;
    j["degenerate_recall"] = r.degenerate_recall;
    j["f1"] = r.f1;
    j["fingerprint"] = fingerprint;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["repeat_index"] = repeat_index;
    j["unparseable"] = r.unparseable_count;
    return j;
}

RunAggregate collect_aggregate(const PipelineConfig& cfg) {
    std::vector<MetricsReport> runs;
    for (std::uint32_t i = 0; i < cfg.repeats; ++i)
        runs.push_back(metrics_from_json(read_json_file(repeat_dir(cfg, i) / "metrics.json")));
    return aggregate(std::move(runs));
}

json summary_to_json(const MetricSummary& s) {
    return {{"mean", s.mean}, {"stddev", s.stddev}};
}

}  // namespace

void stage_eval(const PipelineConfig& cfg) {
    const std::string fingerprint = config_fingerprint(cfg);
    StageClock clock;
    for (std::uint32_t i = 0; i < cfg.repeats; ++i) {
        const fs::path dir = repeat_dir(cfg, i);
        KnowledgeGraph g;
        const std::vector<LabeledCandidate> evalset = read_labeled_tsv(g, dir / "evalset.tsv");

        const fs::path verdicts_path = dir / "verdicts.jsonl";
        require_file(verdicts_path);
        std::ifstream in(verdicts_path, std::ios::binary);
        std::vector<Verdict> verdicts;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json parsed;
            try {
                parsed = json::parse(line);
            } catch (const json::exception& e) {
                throw Error(ErrorClass::Data, verdicts_path.string() + ": " + e.what());
            }
            Verdict v;
            v.decision = decision_from_name(parsed.at("decision").get<std::string>());
            v.degraded = parsed.at("degraded").get<bool>();
            v.raw_response = parsed.at("raw").get<std::string>();
            v.strategy = cfg.judge.strategy;
            verdicts.push_back(std::move(v));
        }

        clock.start();
        const MetricsReport report = metrics(confusion(verdicts, evalset));
        clock.stop();
        write_json_file(dir / "metrics.json", metrics_to_json(report, fingerprint, i));
    }

    const RunAggregate agg = collect_aggregate(cfg);
    json j;
    j["accuracy"] = summary_to_json(agg.accuracy);
    j["f1"] = summary_to_json(agg.f1);
    j["fingerprint"] = fingerprint;
    j["precision"] = summary_to_json(agg.precision);
    j["recall"] = summary_to_json(agg.recall);
    j["repeats"] = cfg.repeats;
    json runs = json::array();
    for (std::size_t i = 0; i < agg.runs.size(); ++i)
        runs.push_back(metrics_to_json(agg.runs[i], fingerprint, static_cast<std::uint32_t>(i)));
    j["runs"] = runs;
    write_json_file(fs::path(cfg.out_dir) / "aggregate.json", j);
    record_timing(cfg, "eval", clock.seconds());
}

void stage_report(const PipelineConfig& cfg) {
    const std::string fingerprint = config_fingerprint(cfg);
    json generation = json::array();
    json filtering = json::array();
    for (std::uint32_t i = 0; i < cfg.repeats; ++i) {
        const fs::path dir = repeat_dir(cfg, i);
        const json split = read_json_file(dir / "split.json");
        const json cands = read_json_file(dir / "candidates.json");
        const json filter = read_json_file(dir / "filter.json");
        generation.push_back({{"candidates", cands.at("count")},
                              {"exhaustive", cands.at("coverage").at("exhaustive_count")},
                              {"missing", cands.at("coverage").at("missing_count")},
                              {"observed", split.at("observed")},
                              {"recovered", cands.at("coverage").at("recovered_count")},
                              {"recovered_ratio", cands.at("coverage").at("recovered_ratio")},
                              {"repeat_index", i},
                              {"scope", cands.at("scope")}});
        filtering.push_back({{"after", filter.at("after")},
                             {"before", filter.at("before")},
                             {"reduction_ratio", filter.at("reduction_ratio")},
                             {"repeat_index", i},
                             {"threshold", filter.at("threshold")},
                             {"true_candidates", filter.at("true_candidates")},
                             {"true_candidates_kept", filter.at("true_candidates_kept")}});
    }
    const json agg = read_json_file(fs::path(cfg.out_dir) / "aggregate.json");

    json report;
    report["filtering"] = filtering;
    report["fingerprint"] = fingerprint;
    report["generation"] = generation;
    report["metrics"] = agg;
    write_json_file(fs::path(cfg.out_dir) / "report.json", report);

    std::ofstream csv(fs::path(cfg.out_dir) / "report.csv", std::ios::binary);
    if (!csv) throw MissingArtifact((fs::path(cfg.out_dir) / "report.csv").string());
    csv << "repeat,accuracy,precision,recall,f1,unparseable\n";
    for (const auto& run : agg.at("runs")) {
        csv << run.at("repeat_index").get<std::uint32_t>() << ','
            << format_fixed(run.at("accuracy").get<double>()) << ','
            << format_fixed(run.at("precision").get<double>()) << ','
            << format_fixed(run.at("recall").get<double>()) << ','
            << format_fixed(run.at("f1").get<double>()) << ','
            << run.at("unparseable").get<std::uint64_t>() << '\n';
    }
    csv << "mean," << format_fixed(agg.at("accuracy").at("mean").get<double>()) << ','
        << format_fixed(agg.at("precision").at("mean").get<double>()) << ','
        << format_fixed(agg.at("recall").at("mean").get<double>()) << ','
        << format_fixed(agg.at("f1").at("mean").get<double>()) << ",\n";
    csv << "stddev," << format_fixed(agg.at("accuracy").at("stddev").get<double>()) << ','
        << format_fixed(agg.at("precision").at("stddev").get<double>()) << ','
        << format_fixed(agg.at("recall").at("stddev").get<double>()) << ','
        << format_fixed(agg.at("f1").at("stddev").get<double>()) << ",\n";
}

RunAggregate run_all(const PipelineConfig& cfg) {
    stage_split(cfg);
    stage_generate(cfg);
    stage_train(cfg);
    stage_filter(cfg);
    stage_judge(cfg);
    stage_eval(cfg);
    stage_report(cfg);
    return collect_aggregate(cfg);
}

void write_labeled_tsv(const KnowledgeGraph& g, std::span<const LabeledCandidate> set,
                       const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact(path.string());
    for (const auto& lc : set) {
        out << g.entity_label(lc.triple.head) << '\t' << g.relation_label(lc.triple.relation)
            << '\t' << g.entity_label(lc.triple.tail) << '\t' << (lc.missing_true ? '1' : '0')
            << '\n';
    }
    if (!out) throw Error(ErrorClass::Data, "failed writing " + path.string());
}

std::vector<LabeledCandidate> read_labeled_tsv(KnowledgeGraph& g, const fs::path& path) {
    require_file(path);
    std::ifstream in(path, std::ios::binary);
    std::vector<LabeledCandidate> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::array<std::string, 4> fields;
        std::size_t field = 0, start = 0;
        for (std::size_t pos = 0; pos <= line.size(); ++pos) {
            if (pos == line.size() || line[pos] == '\t') {
                if (field >= 4) throw MalformedLine(line_number, "expected 4 fields");
                fields[field++] = line.substr(start, pos - start);
                start = pos + 1;
            }
        }
        if (field != 4) throw MalformedLine(line_number, "expected 4 fields");
        for (const auto& f : fields)
            if (f.empty()) throw MalformedLine(line_number, "empty field");
        if (fields[3] != "0" && fields[3] != "1")
            throw MalformedLine(line_number, "label must be 0 or 1");

        out.push_back({{g.intern_entity(fields[0]), g.intern_relation(fields[1]),
                        g.intern_entity(fields[2])},
                       fields[3] == "1"});
    }
    return out;
}

}  // namespace omnia
