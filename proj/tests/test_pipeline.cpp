#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnia/pipeline.hpp"
#include "omnia/synthetic.hpp"

using namespace omnia;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: ", p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

fs::path write_dataset(const fs::path& dir) {
    KnowledgeGraph g = synth::small_block_graph(23);
    const fs::path path = dir / "dataset.tsv";
    write_tsv_file(g, g.triples(), path);
    return path;
}

PipelineConfig small_config(const fs::path& dataset, const fs::path& out) {
    PipelineConfig cfg;
    cfg.dataset = dataset.string();
    cfg.out_dir = out.string();
    cfg.seed = 11;
    cfg.repeats = 2;
    cfg.hp.dim = 16;
    cfg.hp.epochs = 5;
    cfg.hp.batch_size = 256;
    cfg.eval.eval_size = 20;
    cfg.eval.validation_size = 10;
    return cfg;
}

// Everything except timing.json must be byte-identical between runs.
std::vector<fs::path> artifact_files(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().filename() == "timing.json") continue;
        files.push_back(fs::relative(entry.path(), root));
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

TEST_CASE("configs round-trip through JSON") {
    PipelineConfig cfg;
    cfg.dataset = "data.tsv";
    cfg.out_dir = "out";
    cfg.seed = 7;
    cfg.repeats = 3;
    cfg.removal_fraction = 0.25;
    cfg.scope = PairScope::ClusterLocal;
    cfg.kge_kind = ModelKind::ComplEx;
    cfg.hp.dim = 64;
    cfg.hp.norm_order = 1;
    cfg.threshold.mode = ThresholdMode::Fixed;
    cfg.threshold.value = 2.5;
    cfg.judge.strategy.kind = PromptKind::Rag;
    cfg.judge.strategy.representation = Representation::SentenceForm;
    cfg.judge.strategy.top_k = 5;
    cfg.judge.flip_rate = 0.1;
    cfg.judge.sentence_mode = SentenceMode::Simple;
    cfg.embedder.dim = 64;
    cfg.eval.eval_size = 100;
    cfg.eval.sample_post_filter = false;

    auto j = config_to_json(cfg);
    auto back = config_from_json(j);
    CHECK(config_to_json(back) == j);
    CHECK(canonical_config(back) == canonical_config(cfg));
    CHECK(back.scope == PairScope::ClusterLocal);
    CHECK(back.kge_kind == ModelKind::ComplEx);
    CHECK(back.threshold.mode == ThresholdMode::Fixed);
    CHECK(back.judge.strategy.kind == PromptKind::Rag);
    CHECK(back.judge.sentence_mode == SentenceMode::Simple);
    CHECK(back.eval.sample_post_filter == false);
}

TEST_CASE("unknown config keys are rejected") {
    json j{{"dataset", "d.tsv"}, {"out_dir", "o"}, {"typo_key", 1}};
    CHECK_THROWS_AS(config_from_json(j), const ConfigError&);
    json nested{{"dataset", "d.tsv"}, {"kge", {{"dims", 4}}}};
    CHECK_THROWS_AS(config_from_json(nested), const ConfigError&);
    json bad_name{{"dataset", "d.tsv"}, {"kge", {{"kind", "transX"}}}};
    CHECK_THROWS_AS(config_from_json(bad_name), const ConfigError&);
}

TEST_CASE("config validation rejects out-of-range values") {
    PipelineConfig cfg;
    cfg.dataset = "d.tsv";
    cfg.out_dir = "o";
    cfg.eval.eval_size = 7;  // odd
    CHECK_THROWS_AS(cfg.validate(), const ConfigError&);
    cfg.eval.eval_size = 500;
    cfg.removal_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), const ConfigError&);
    cfg.removal_fraction = 0.2;
    cfg.judge.flip_rate = 1.5;
    CHECK_THROWS_AS(cfg.validate(), const ConfigError&);
    cfg.judge.flip_rate = 0.0;
    cfg.repeats = 0;
    CHECK_THROWS_AS(cfg.validate(), const ConfigError&);
    cfg.repeats = 1;
    cfg.dataset.clear();
    CHECK_THROWS_AS(cfg.validate(), const ConfigError&);
    cfg.dataset = "d.tsv";
    cfg.judge.strategy.kind = PromptKind::Rag;
    cfg.judge.strategy.top_k = 0;
    CHECK_THROWS_AS(cfg.validate(), const ConfigError&);
    cfg.judge.strategy.top_k = 2;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("fingerprints ignore the output directory only") {
    PipelineConfig a;
    a.dataset = "d.tsv";
    a.out_dir = "out-a";
    PipelineConfig b = a;
    b.out_dir = "out-b";
    CHECK(config_fingerprint(a) == config_fingerprint(b));
    CHECK(canonical_config(a).find("out_dir") == std::string::npos);
    b.seed = a.seed + 1;
    CHECK(config_fingerprint(a) != config_fingerprint(b));
    PipelineConfig c = a;
    c.judge.flip_rate = 0.25;
    CHECK(config_fingerprint(a) != config_fingerprint(c));
}

TEST_CASE("stage seeds derive independently per repeat") {
    PipelineConfig cfg;
    cfg.seed = 5;
    std::set<std::uint64_t> seeds;
    for (std::uint32_t i = 0; i < 3; ++i) {
        seeds.insert(split_stage_seed(cfg, i));
        seeds.insert(train_stage_seed(cfg, i));
        seeds.insert(judge_stage_seed(cfg, i));
        seeds.insert(sample_stage_seed(cfg, i));
    }
    CHECK(seeds.size() == 12);
    CHECK(split_stage_seed(cfg, 0) == split_stage_seed(cfg, 0));
}

TEST_CASE("labeled TSVs round-trip") {
    TempDir tmp("omnia_labeled_tsv");
    KnowledgeGraph g;
    g.add_triple("a", "r", "b");
    g.add_triple("c", "r", "d");
    std::vector<LabeledCandidate> set{
        {g.triples()[0], true},
        {g.triples()[1], false},
    };
    const fs::path path = tmp.path / "set.tsv";
    write_labeled_tsv(g, set, path);
    KnowledgeGraph g2 = g.clone_tables();
    auto back = read_labeled_tsv(g2, path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].triple == set[0].triple);
    CHECK(back[0].missing_true);
    CHECK(!back[1].missing_true);

    std::ofstream bad(tmp.path / "bad.tsv");
    bad << "a\tr\tb\t2\n";
    bad.close();
    CHECK_THROWS_AS(read_labeled_tsv(g2, tmp.path / "bad.tsv"), const MalformedLine&);
    std::ofstream bad2(tmp.path / "bad2.tsv");
    bad2 << "a\tr\tb\n";
    bad2.close();
    CHECK_THROWS_AS(read_labeled_tsv(g2, tmp.path / "bad2.tsv"), const MalformedLine&);
}

TEST_CASE("stages demand their prerequisites") {
    TempDir tmp("omnia_missing_artifacts");
    auto cfg = small_config(write_dataset(tmp.path), tmp.path / "out");
    CHECK_THROWS_AS(stage_generate(cfg), const MissingArtifact&);
    CHECK_THROWS_AS(stage_train(cfg), const MissingArtifact&);
    CHECK_THROWS_AS(stage_eval(cfg), const MissingArtifact&);
    PipelineConfig nodata = cfg;
    nodata.dataset = (tmp.path / "absent.tsv").string();
    CHECK_THROWS_AS(stage_split(nodata), const MissingArtifact&);
}

TEST_CASE("the full pipeline produces every artifact and aggregates repeats") {
    TempDir tmp("omnia_full_run");
    auto cfg = small_config(write_dataset(tmp.path), tmp.path / "out");
    auto agg = run_all(cfg);
    REQUIRE(agg.runs.size() == cfg.repeats);
    // The mock oracle with flip rate zero judges membership exactly.
    CHECK(agg.f1.mean == doctest::Approx(1.0));
    CHECK(agg.accuracy.mean == doctest::Approx(1.0));

    const fs::path out = tmp.path / "out";
    for (const char* name : {"config.json", "aggregate.json", "report.json", "report.csv",
                             "timing.json"})
        CHECK_MESSAGE(fs::exists(out / name), "missing ", name);
    for (std::uint32_t i = 0; i < cfg.repeats; ++i) {
        const fs::path rd = out / ("repeat_" + std::to_string(i));
        for (const char* name :
             {"observed.tsv", "removed.tsv", "split.json", "candidates.tsv", "candidates.json",
              "model.kge", "train.json", "validation.tsv", "filtered.tsv", "filter.json",
              "evalset.tsv", "verdicts.jsonl", "judge.json", "metrics.json"})
            CHECK_MESSAGE(fs::exists(rd / name), "missing repeat artifact ", name);
    }

    // Aggregate means mirror the per-repeat metrics.
    auto aggregate_json = read_json(out / "aggregate.json");
    double mean = 0;
    for (std::uint32_t i = 0; i < cfg.repeats; ++i) {
        auto m = read_json(out / ("repeat_" + std::to_string(i)) / "metrics.json");
        mean += m.at("f1").get<double>();
    }
    mean /= cfg.repeats;
    CHECK(aggregate_json.at("f1").at("mean").get<double>() == doctest::Approx(mean));

    // Judge stage records the config fingerprint.
    auto judge_json = read_json(out / "repeat_0" / "judge.json");
    CHECK(judge_json.at("fingerprint") == config_fingerprint(cfg));
    auto report = read_json(out / "report.json");
    CHECK(report.at("fingerprint") == config_fingerprint(cfg));

    // Verdict lines carry decision, degraded flag and raw text only.
    std::istringstream verdicts(read_file(out / "repeat_0" / "verdicts.jsonl"));
    std::string line;
    std::size_t lines = 0;
    while (std::getline(verdicts, line)) {
        if (line.empty()) continue;
        auto v = json::parse(line);
        ++lines;
        std::set<std::string> keys;
        for (const auto& [k, _] : v.items()) keys.insert(k);
        CHECK(keys == std::set<std::string>{"decision", "degraded", "raw"});
    }
    CHECK(lines == cfg.eval.eval_size);

    // The report CSV has one row per repeat plus header, mean and stddev.
    std::istringstream csv(read_file(out / "report.csv"));
    std::size_t rows = 0;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 1 + cfg.repeats + 2);
}

TEST_CASE("identical configs replay to byte-identical artifacts") {
    TempDir tmp("omnia_byte_identity");
    const fs::path dataset = write_dataset(tmp.path);
    auto cfg_a = small_config(dataset, tmp.path / "run_a");
    auto cfg_b = small_config(dataset, tmp.path / "run_b");
    run_all(cfg_a);
    run_all(cfg_b);

    auto files_a = artifact_files(tmp.path / "run_a");
    auto files_b = artifact_files(tmp.path / "run_b");
    REQUIRE(files_a == files_b);
    REQUIRE(!files_a.empty());
    for (const auto& rel : files_a) {
        const std::string a = read_file(tmp.path / "run_a" / rel);
        const std::string b = read_file(tmp.path / "run_b" / rel);
        if (rel.filename() == "config.json") {
            // The only divergence allowed is the destination itself.
            json ja = json::parse(a), jb = json::parse(b);
            ja.erase("out_dir");
            jb.erase("out_dir");
            CHECK(ja == jb);
            continue;
        }
        CHECK_MESSAGE(a == b, "artifact diverged: ", rel.string());
    }
}

TEST_CASE("rerunning a stage rewrites identical bytes") {
    TempDir tmp("omnia_idempotent");
    auto cfg = small_config(write_dataset(tmp.path), tmp.path / "out");
    run_all(cfg);
    const fs::path filtered = tmp.path / "out" / "repeat_0" / "filtered.tsv";
    const fs::path filter_json = tmp.path / "out" / "repeat_0" / "filter.json";
    const std::string before_tsv = read_file(filtered);
    const std::string before_json = read_file(filter_json);
    stage_filter(cfg);
    CHECK(read_file(filtered) == before_tsv);
    CHECK(read_file(filter_json) == before_json);
}

TEST_CASE("a nonzero flip rate perturbs the mock verdicts reproducibly") {
    TempDir tmp("omnia_flip_rate");
    const fs::path dataset = write_dataset(tmp.path);
    auto cfg = small_config(dataset, tmp.path / "flip_a");
    cfg.judge.flip_rate = 0.3;
    auto agg_a = run_all(cfg);
    CHECK(agg_a.f1.mean < 1.0);

    auto cfg_b = small_config(dataset, tmp.path / "flip_b");
    cfg_b.judge.flip_rate = 0.3;
    auto agg_b = run_all(cfg_b);
    CHECK(agg_a.f1.mean == doctest::Approx(agg_b.f1.mean).epsilon(1e-15));
    CHECK(read_file(tmp.path / "flip_a" / "repeat_0" / "verdicts.jsonl") ==
          read_file(tmp.path / "flip_b" / "repeat_0" / "verdicts.jsonl"));
}

TEST_CASE("fixed thresholds skip validation and cluster-local scope runs dry") {
    TempDir tmp("omnia_fixed_threshold");
    auto cfg = small_config(write_dataset(tmp.path), tmp.path / "out");
    cfg.scope = PairScope::ClusterLocal;
    cfg.threshold.mode = ThresholdMode::Fixed;
    cfg.threshold.value = 100.0;
    stage_split(cfg);
    stage_generate(cfg);
    // Cluster-local scope never proposes anything new.
    auto candidates = read_json(tmp.path / "out" / "repeat_0" / "candidates.json");
    CHECK(candidates.at("count").get<std::uint64_t>() == 0);
    stage_train(cfg);
    stage_filter(cfg);
    auto filter = read_json(tmp.path / "out" / "repeat_0" / "filter.json");
    CHECK(filter.at("mode") == "fixed");
    CHECK(filter.at("threshold").get<double>() == 100.0);
    CHECK(filter.at("after").get<std::uint64_t>() == 0);
    CHECK(read_file(tmp.path / "out" / "repeat_0" / "validation.tsv").empty());
}

TEST_CASE("judging the unfiltered pool is an explicit choice") {
    TempDir tmp("omnia_prefilter");
    auto cfg = small_config(write_dataset(tmp.path), tmp.path / "out");
    cfg.eval.sample_post_filter = false;
    auto agg = run_all(cfg);
    CHECK(agg.runs.size() == cfg.repeats);
    auto judge_json = read_json(tmp.path / "out" / "repeat_0" / "judge.json");
    CHECK(judge_json.at("pool") == "candidates");
}

TEST_CASE("rag judging over disk artifacts stays deterministic") {
    TempDir tmp("omnia_rag_run");
    const fs::path dataset = write_dataset(tmp.path);
    auto cfg = small_config(dataset, tmp.path / "rag_a");
    cfg.judge.strategy.kind = PromptKind::Rag;
    cfg.judge.strategy.top_k = 2;
    cfg.embedder.dim = 32;
    auto agg_a = run_all(cfg);
    CHECK(agg_a.f1.mean == doctest::Approx(1.0));

    auto cfg_b = small_config(dataset, tmp.path / "rag_b");
    cfg_b.judge.strategy.kind = PromptKind::Rag;
    cfg_b.judge.strategy.top_k = 2;
    cfg_b.embedder.dim = 32;
    run_all(cfg_b);
    CHECK(read_file(tmp.path / "rag_a" / "repeat_0" / "verdicts.jsonl") ==
          read_file(tmp.path / "rag_b" / "repeat_0" / "verdicts.jsonl"));
}

TEST_CASE("sentence-form runs persist the sentence cache") {
    TempDir tmp("omnia_sentence_run");
    auto cfg = small_config(write_dataset(tmp.path), tmp.path / "out");
    cfg.judge.strategy.representation = Representation::SentenceForm;
    run_all(cfg);
    const fs::path cache_path = tmp.path / "out" / "sentence_cache.json";
    REQUIRE(fs::exists(cache_path));
    auto cache = SentenceCache::load(cache_path);
    CHECK(cache.size() > 0);
}

TEST_CASE("http client selection requires endpoint configuration") {
    TempDir tmp("omnia_http_env");
    auto cfg = small_config(write_dataset(tmp.path), tmp.path / "out");
    cfg.judge.client = ClientKind::Http;
    stage_split(cfg);
    stage_generate(cfg);
    stage_train(cfg);
    stage_filter(cfg);
    unsetenv("OMNIA_LLM_URL");
    unsetenv("OMNIA_LLM_MODEL");
    CHECK_THROWS_AS(stage_judge(cfg), const ConfigError&);
}
