#pragma once

// LLM validation of candidate triples: frozen prompt templates for three
// strategies (zero-shot, in-context, RAG) in triple and sentence form, an
// HTTP chat-completions client and a deterministic mock oracle, sentence
// transformation with caching, and verdict parsing.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "omnia/kg.hpp"
#include "omnia/retrieval.hpp"

namespace omnia {

enum class PromptKind { ZeroShot, InContext, Rag };
enum class Representation { TripleForm, SentenceForm };
enum class SentenceMode { Simple, Explicit };
enum class Decision { True, False, Unparseable };

const char* prompt_kind_name(PromptKind kind);
const char* representation_name(Representation repr);
const char* sentence_mode_name(SentenceMode mode);
const char* decision_name(Decision d);
std::optional<PromptKind> prompt_kind_from_name(std::string_view name);
std::optional<Representation> representation_from_name(std::string_view name);
std::optional<SentenceMode> sentence_mode_from_name(std::string_view name);

struct PromptStrategy {
    PromptKind kind = PromptKind::ZeroShot;
    Representation representation = Representation::TripleForm;
    std::uint32_t top_k = 2;  // rag only
};

// Template text by id, e.g. "judge/triple/zero-shot@v1". The compiled-in
// text is the authority at runtime; the files under templates/ mirror it and
// are byte-compared in tests. Unknown id throws ConfigError.
std::string_view template_text(std::string_view template_id);
std::vector<std::string> template_ids();

std::string judge_template_id(PromptKind kind, Representation repr);
std::string transform_template_id(SentenceMode mode);

struct Prompt {
    std::string template_id;
    std::string rendered;
    std::vector<Triple> context;
    Triple candidate;
    bool degraded = false;  // in-context with empty context fell back to zero-shot wording
};

// Up to 3 x per_slot observed triples: the first per_slot whose head equals
// the candidate head, likewise for relation and tail, slot quotas counted
// independently. Result is deduplicated and ordered by insertion index. The
// candidate itself is never returned.
std::vector<Triple> related_context(const KnowledgeGraph& g, const Triple& candidate,
                                    std::uint32_t per_slot = 1);

// Renders the frozen template for (kind, representation). Sentence form
// requires the transformed sentence text. In-context with empty context
// degrades to the zero-shot template and sets Prompt::degraded; RAG with
// empty context throws MissingContext.
Prompt build_prompt(const PromptStrategy& strategy, const Triple& candidate,
                    std::span<const Triple> context, const KnowledgeGraph& g,
                    std::string_view sentence = {});

struct LlmCall {
    enum class Purpose { Judge, Transform };
    Purpose purpose = Purpose::Judge;
    std::string prompt;
    Triple candidate;
    std::array<std::string, 3> labels;  // head, relation, tail surface forms
};

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual std::string complete(const LlmCall& call) = 0;
    virtual std::string model_name() const = 0;
};

// Deterministic oracle: a judge call answers membership of the candidate in
// the truth set, flipped when the per-candidate hash of (triple, seed) lands
// below flip_rate; a transform call answers "The <head> <relation> the
// <tail>.". Pure per candidate, so batch order never matters.
class MockJudgeClient : public JudgeClient {
public:
    MockJudgeClient(TripleSet truth, double flip_rate = 0.0, std::uint64_t seed = 0);

    std::string complete(const LlmCall& call) override;
    std::string model_name() const override { return "mock-oracle"; }

    // The flip predicate, exposed so tests can replay the seeded decisions.
    static bool flips(const Triple& t, double flip_rate, std::uint64_t seed);

private:
    TripleSet truth_;
    double flip_rate_;
    std::uint64_t seed_;
};

struct HttpJudgeConfig {
    std::string endpoint_url;
    std::string model;
    std::string api_key;  // sourced from environment
    int timeout_ms = 60000;
    int max_retries = 3;
    int backoff_base_ms = 100;
    std::uint32_t max_tokens = 256;
};

// Chat-completions JSON over HTTP, temperature 0. Transport errors and
// retryable statuses (429, 5xx) are retried with exponential backoff up to
// max_retries; other failures throw EndpointError, an empty completion
// throws EmptyResponse.
class HttpJudgeClient : public JudgeClient {
public:
    explicit HttpJudgeClient(HttpJudgeConfig cfg);

    std::string complete(const LlmCall& call) override;
    std::string model_name() const override { return cfg_.model; }

private:
    HttpJudgeConfig cfg_;
};

// Transformed sentences keyed by (candidate, mode, model) so reruns never
// re-query the endpoint.
class SentenceCache {
public:
    std::optional<std::string> find(const Triple& t, SentenceMode mode,
                                    const std::string& model) const;
    void put(const Triple& t, SentenceMode mode, const std::string& model, std::string sentence);
    std::size_t size() const noexcept { return entries_.size(); }

    void save(const std::filesystem::path& path) const;
    static SentenceCache load(const std::filesystem::path& path);

private:
    static std::string key(const Triple& t, SentenceMode mode, const std::string& model);
    std::map<std::string, std::string> entries_;
};

// Transforms the candidate into a sentence via the client. Trims surrounding
// whitespace; an empty result throws EmptyResponse.
std::string triple_to_sentence(const Triple& candidate, const KnowledgeGraph& g,
                               JudgeClient& client, SentenceMode mode,
                               SentenceCache* cache = nullptr);

// First standalone token decides, scanned case-insensitively: "true"/"yes"
// gives True, "false"/"no" gives False, anything else Unparseable.
Decision parse_verdict(std::string_view response);

struct Verdict {
    Decision decision = Decision::Unparseable;
    std::string raw_response;
    double latency_ms = 0.0;
    PromptStrategy strategy;
    bool degraded = false;
};

struct JudgeBatchOptions {
    std::uint32_t per_slot = 1;  // in-context
    SentenceMode sentence_mode = SentenceMode::Explicit;
    SentenceCache* cache = nullptr;
};

// One verdict per candidate, order-preserving. Per-candidate failures
// (endpoint errors after retries, missing RAG context, transform failures)
// become Unparseable verdicts; the batch itself never throws for them.
// index is required iff strategy.kind is Rag.
std::vector<Verdict> judge_batch(std::span<const Triple> candidates,
                                 const PromptStrategy& strategy, JudgeClient& client,
                                 const KnowledgeGraph& g, const RetrievalIndex* index = nullptr,
                                 const JudgeBatchOptions& opts = {});

// T_eval: candidates whose verdict is True, in input order.
std::vector<Triple> accepted_candidates(std::span<const Triple> candidates,
                                        std::span<const Verdict> verdicts);

}  // namespace omnia
