#pragma once

// Disk-backed pipeline orchestration: a single JSON config drives split,
// candidate generation, training, filtering, judging, evaluation and
// reporting. Stages read and write plain TSV/JSON artifacts under
// out_dir/repeat_<i>/ and are idempotent: unchanged inputs rewrite
// byte-identical files. Wall-clock data goes only to timing.json, which is
// the one artifact exempt from byte-identity.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omnia/candgen.hpp"
#include "omnia/eval.hpp"
#include "omnia/judge.hpp"
#include "omnia/kge.hpp"
#include "omnia/kg.hpp"
#include "omnia/retrieval.hpp"

namespace omnia {

enum class ThresholdMode { Auto, Fixed };
enum class ClientKind { Mock, Http };

struct ThresholdConfig {
    ThresholdMode mode = ThresholdMode::Auto;
    double value = 0.0;  // fixed mode only
    double offset = 0.5;
};

struct JudgeStageConfig {
    PromptStrategy strategy;
    ClientKind client = ClientKind::Mock;
    double flip_rate = 0.0;  // mock only
    std::uint32_t per_slot = 1;
    SentenceMode sentence_mode = SentenceMode::Explicit;
};

struct EvalStageConfig {
    std::uint32_t eval_size = 500;
    std::uint32_t validation_size = 250;
    bool sample_post_filter = true;
};

struct PipelineConfig {
    std::string dataset;  // TSV path
    std::string out_dir;
    std::uint64_t seed = 42;
    std::uint32_t repeats = 5;
    double removal_fraction = 0.2;
    PairScope scope = PairScope::MemberGlobal;
    ModelKind kge_kind = ModelKind::TransE;
    Hyperparams hp;
    ThresholdConfig threshold;
    JudgeStageConfig judge;
    EmbedderConfig embedder;
    EvalStageConfig eval;

    void validate() const;
};

// JSON round-trip. Unknown keys are rejected; absent keys take defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config_file(const std::filesystem::path& path);

// Sorted-key dump of the config with out_dir removed, so runs differing only
// in destination fingerprint identically.
std::string canonical_config(const PipelineConfig& cfg);
std::string config_fingerprint(const PipelineConfig& cfg);

std::filesystem::path repeat_dir(const PipelineConfig& cfg, std::uint32_t repeat_index);

// Per-repeat seeds for each randomized stage, derived from cfg.seed and the
// repeat index. Exposed so tests can replay stage randomness.
std::uint64_t split_stage_seed(const PipelineConfig& cfg, std::uint32_t repeat_index);
std::uint64_t train_stage_seed(const PipelineConfig& cfg, std::uint32_t repeat_index);
std::uint64_t judge_stage_seed(const PipelineConfig& cfg, std::uint32_t repeat_index);
std::uint64_t sample_stage_seed(const PipelineConfig& cfg, std::uint32_t repeat_index);

// Stages. Each loops over all repeats, throws MissingArtifact when a
// prerequisite file is absent, and appends its wall time to timing.json.
void stage_split(const PipelineConfig& cfg);
void stage_generate(const PipelineConfig& cfg);
void stage_train(const PipelineConfig& cfg);
void stage_filter(const PipelineConfig& cfg);
void stage_judge(const PipelineConfig& cfg);
void stage_eval(const PipelineConfig& cfg);
void stage_report(const PipelineConfig& cfg);

// All stages in order. Returns the metric aggregate over repeats.
RunAggregate run_all(const PipelineConfig& cfg);

// Labeled TSV (head, relation, tail, 1|0) used for validation/eval sets.
void write_labeled_tsv(const KnowledgeGraph& g, std::span<const LabeledCandidate> set,
                       const std::filesystem::path& path);
std::vector<LabeledCandidate> read_labeled_tsv(KnowledgeGraph& g,
                                               const std::filesystem::path& path);

}  // namespace omnia
