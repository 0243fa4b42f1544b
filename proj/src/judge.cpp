#include "omnia/judge.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "omnia/hashing.hpp"
#include "omnia/rng.hpp"

namespace omnia {

const char* prompt_kind_name(PromptKind kind) {
    switch (kind) {
        case PromptKind::ZeroShot: return "zero-shot";
        case PromptKind::InContext: return "in-context";
        case PromptKind::Rag: return "rag";
    }
    return "unknown";
}

const char* representation_name(Representation repr) {
    return repr == Representation::TripleForm ? "triple" : "sentence";
}

const char* sentence_mode_name(SentenceMode mode) {
    return mode == SentenceMode::Simple ? "simple" : "explicit";
}

const char* decision_name(Decision d) {
    switch (d) {
        case Decision::True: return "true";
        case Decision::False: return "false";
        case Decision::Unparseable: return "unparseable";
    }
    return "unknown";
}

std::optional<PromptKind> prompt_kind_from_name(std::string_view name) {
    if (name == "zero-shot") return PromptKind::ZeroShot;
    if (name == "in-context") return PromptKind::InContext;
    if (name == "rag") return PromptKind::Rag;
    return std::nullopt;
}

std::optional<Representation> representation_from_name(std::string_view name) {
    if (name == "triple") return Representation::TripleForm;
    if (name == "sentence") return Representation::SentenceForm;
    return std::nullopt;
}

std::optional<SentenceMode> sentence_mode_from_name(std::string_view name) {
    if (name == "simple") return SentenceMode::Simple;
    if (name == "explicit") return SentenceMode::Explicit;
    return std::nullopt;
}

namespace {

struct TemplateEntry {
    const char* id;
    const char* text;
};

constexpr TemplateEntry kTemplates[] = {
    {"judge/triple/zero-shot@v1",
     "You are a strict fact checker for a knowledge graph.\n"
     "A triple has a head entity, a relation, and a tail entity.\n"
     "Candidate triple: ({head}, {relation}, {tail})\n"
     "Is the candidate triple factually valid? Answer with one word: True or False.\n"},
    {"judge/triple/in-context@v1",
     "You are a strict fact checker for a knowledge graph.\n"
     "A triple has a head entity, a relation, and a tail entity.\n"
     "Known triples sharing a component with the candidate:\n"
     "{context}\n"
     "Candidate triple: ({head}, {relation}, {tail})\n"
     "Is the candidate triple factually valid? Answer with one word: True or False.\n"},
    {"judge/triple/rag@v1",
     "You are a strict fact checker for a knowledge graph.\n"
     "A triple has a head entity, a relation, and a tail entity.\n"
     "Most similar known triples, retrieved as evidence:\n"
     "{context}\n"
     "Candidate triple: ({head}, {relation}, {tail})\n"
     "Using the evidence and your knowledge, is the candidate triple factually valid? "
     "Answer with one word: True or False.\n"},
    {"judge/sentence/zero-shot@v1",
     "You are a strict fact checker.\n"
     "Candidate statement: {sentence}\n"
     "Is the candidate statement factually valid? Answer with one word: True or False.\n"},
    {"judge/sentence/in-context@v1",
     "You are a strict fact checker.\n"
     "Known facts related to the candidate:\n"
     "{context}\n"
     "Candidate statement: {sentence}\n"
     "Is the candidate statement factually valid? Answer with one word: True or False.\n"},
    {"judge/sentence/rag@v1",
     "You are a strict fact checker.\n"
     "Most similar known facts, retrieved as evidence:\n"
     "{context}\n"
     "Candidate statement: {sentence}\n"
     "Using the evidence and your knowledge, is the candidate statement factually valid? "
     "Answer with one word: True or False.\n"},
    {"transform/simple@v1",
     "Transform the following triple into a sentence: {head} {relation} {tail}\n"
     "Answer: Give the sentence.\n"},
    {"transform/explicit@v1",
     "Your task is to only transform the triple into a sentence, no matter if it is valid or "
     "not.\n"
     "A triple has a head, a relation, and a tail.\n"
     "Transform the following triple: {head} {relation} {tail} as is.\n"
     "Do not rephrase non-valid facts or use negative constructions.\n"
     "Answer: Give the sentence.\n"},
};

void replace_all(std::string& text, std::string_view needle, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
}

}  // namespace

std::string_view template_text(std::string_view template_id) {
    for (const auto& e : kTemplates)
        if (template_id == e.id) return e.text;
    throw ConfigError("unknown template id: " + std::string(template_id));
}

std::vector<std::string> template_ids() {
    std::vector<std::string> ids;
    for (const auto& e : kTemplates) ids.emplace_back(e.id);
    return ids;
}

std::string judge_template_id(PromptKind kind, Representation repr) {
    return std::string("judge/") + representation_name(repr) + "/" + prompt_kind_name(kind) +
           "@v1";
}

std::string transform_template_id(SentenceMode mode) {
    return std::string("transform/") + sentence_mode_name(mode) + "@v1";
}

std::vector<Triple> related_context(const KnowledgeGraph& g, const Triple& candidate,
                                    std::uint32_t per_slot) {
    if (per_slot == 0) throw ConfigError("per_slot must be positive");

    const auto& triples = g.triples();
    std::vector<std::size_t> picked;
    std::uint32_t head_left = per_slot, rel_left = per_slot, tail_left = per_slot;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        if (head_left == 0 && rel_left == 0 && tail_left == 0) break;
        const Triple& t = triples[i];
        if (t == candidate) continue;
        bool take = false;
        if (head_left > 0 && t.head == candidate.head) {
            --head_left;
            take = true;
        }
        if (rel_left > 0 && t.relation == candidate.relation) {
            --rel_left;
            take = true;
        }
        if (tail_left > 0 && t.tail == candidate.tail) {
            --tail_left;
            take = true;
        }
        if (take) picked.push_back(i);
    }

    std::vector<Triple> out;
    out.reserve(picked.size());
    for (std::size_t i : picked) out.push_back(triples[i]);
    return out;
}

Prompt build_prompt(const PromptStrategy& strategy, const Triple& candidate,
                    std::span<const Triple> context, const KnowledgeGraph& g,
                    std::string_view sentence) {
    if (strategy.kind == PromptKind::Rag && context.empty())
        throw MissingContext("retrieval returned no context for the candidate");
    if (strategy.representation == Representation::SentenceForm && sentence.empty())
        throw ConfigError("sentence representation requires the transformed sentence");

    Prompt p;
    p.candidate = candidate;
    p.context.assign(context.begin(), context.end());
    p.degraded = strategy.kind == PromptKind::InContext && context.empty();

    const PromptKind effective = p.degraded ? PromptKind::ZeroShot : strategy.kind;
    p.template_id = judge_template_id(effective, strategy.representation);
    std::string text(template_text(p.template_id));

    if (!context.empty()) {
        std::string lines;
        for (std::size_t i = 0; i < context.size(); ++i) {
            if (i > 0) lines += '\n';
            lines += "- ";
            lines += render_triple_text(context[i], g);
        }
        replace_all(text, "{context}", lines);
    }
    replace_all(text, "{head}", g.entity_label(candidate.head));
    replace_all(text, "{relation}", g.relation_label(candidate.relation));
    replace_all(text, "{tail}", g.entity_label(candidate.tail));
    replace_all(text, "{sentence}", sentence);

    p.rendered = std::move(text);
    return p;
}

MockJudgeClient::MockJudgeClient(TripleSet truth, double flip_rate, std::uint64_t seed)
    : truth_(std::move(truth)), flip_rate_(flip_rate), seed_(seed) {
    if (flip_rate < 0.0 || flip_rate > 1.0) throw ConfigError("flip_rate must be in [0, 1]");
}

bool MockJudgeClient::flips(const Triple& t, double flip_rate, std::uint64_t seed) {
    std::uint64_t x = seed;
    x = hash_combine(x, t.head);
    x = hash_combine(x, t.relation);
    x = hash_combine(x, t.tail);
    const double u = static_cast<double>(mix64(x) >> 11) * 0x1.0p-53;
    return u < flip_rate;
}

std::string MockJudgeClient::complete(const LlmCall& call) {
    if (call.purpose == LlmCall::Purpose::Transform)
        return "The " + call.labels[0] + " " + call.labels[1] + " the " + call.labels[2] + ".";
    const bool truth = truth_.count(call.candidate) != 0;
    const bool answer = truth != flips(call.candidate, flip_rate_, seed_);
    return answer ? "True" : "False";
}

namespace {

// scheme://host[:port][/path] -> (scheme://host[:port], /path)
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpJudgeClient::HttpJudgeClient(HttpJudgeConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint_url.empty()) throw ConfigError("LLM endpoint URL is required");
    if (cfg_.model.empty()) throw ConfigError("LLM model name is required");
    if (cfg_.max_retries < 0) throw ConfigError("max_retries must be non-negative");
}

std::string HttpJudgeClient::complete(const LlmCall& call) {
    const auto [base, path] = split_url(cfg_.endpoint_url);

    nlohmann::json body;
    body["model"] = cfg_.model;
    body["messages"] = nlohmann::json::array({
        nlohmann::json{{"role", "user"}, {"content", call.prompt}},
    });
    body["temperature"] = 0;
    body["max_tokens"] = cfg_.max_tokens;
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<long>(cfg_.backoff_base_ms) << (attempt - 1)));

        httplib::Client client(base);
        client.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);

        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "endpoint unreachable: " + cfg_.endpoint_url;
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "endpoint returned status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw EndpointError("endpoint returned status " + std::to_string(res->status));

        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw EndpointError(std::string("endpoint response is not valid JSON: ") + e.what());
        }
        if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
            parsed["choices"].empty())
            throw EndpointError("endpoint response lacks choices");
        const auto& msg = parsed["choices"][0];
        if (!msg.contains("message") || !msg["message"].contains("content"))
            throw EndpointError("endpoint response lacks message content");
        std::string content = msg["message"]["content"].get<std::string>();
        if (content.find_first_not_of(" \t\r\n") == std::string::npos)
            throw EmptyResponse("endpoint returned an empty completion");
        return content;
    }
    throw EndpointError(last_error + " after " + std::to_string(cfg_.max_retries + 1) +
                        " attempts");
}

std::string SentenceCache::key(const Triple& t, SentenceMode mode, const std::string& model) {
    return std::to_string(t.head) + ":" + std::to_string(t.relation) + ":" +
           std::to_string(t.tail) + ":" + sentence_mode_name(mode) + ":" + model;
}

std::optional<std::string> SentenceCache::find(const Triple& t, SentenceMode mode,
                                               const std::string& model) const {
    const auto it = entries_.find(key(t, mode, model));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void SentenceCache::put(const Triple& t, SentenceMode mode, const std::string& model,
                        std::string sentence) {
    entries_[key(t, mode, model)] = std::move(sentence);
}

void SentenceCache::save(const std::filesystem::path& path) const {
    nlohmann::json j(entries_);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact(path.string());
    out << j.dump(2) << '\n';
}

SentenceCache SentenceCache::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact(path.string());
    nlohmann::json j;
    in >> j;
    SentenceCache cache;
    cache.entries_ = j.get<std::map<std::string, std::string>>();
    return cache;
}

std::string triple_to_sentence(const Triple& candidate, const KnowledgeGraph& g,
                               JudgeClient& client, SentenceMode mode, SentenceCache* cache) {
    if (cache) {
        if (auto hit = cache->find(candidate, mode, client.model_name())) return *hit;
    }

    std::string text(template_text(transform_template_id(mode)));
    const std::string& head = g.entity_label(candidate.head);
    const std::string& rel = g.relation_label(candidate.relation);
    const std::string& tail = g.entity_label(candidate.tail);
    replace_all(text, "{head}", head);
    replace_all(text, "{relation}", rel);
    replace_all(text, "{tail}", tail);

    LlmCall call;
    call.purpose = LlmCall::Purpose::Transform;
    call.prompt = std::move(text);
    call.candidate = candidate;
    call.labels = {head, rel, tail};

    std::string sentence = client.complete(call);
    const auto first = sentence.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw EmptyResponse("sentence transformation came back empty");
    const auto last = sentence.find_last_not_of(" \t\r\n");
    sentence = sentence.substr(first, last - first + 1);

    if (cache) cache->put(candidate, mode, client.model_name(), sentence);
    return sentence;
}

Decision parse_verdict(std::string_view response) {
    std::string token;
    auto classify = [&]() -> std::optional<Decision> {
        if (token.empty()) return std::nullopt;
        if (token == "true" || token == "yes") return Decision::True;
        if (token == "false" || token == "no") return Decision::False;
        return std::nullopt;
    };
    for (char c : response) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            continue;
        }
        if (auto d = classify()) return *d;
        token.clear();
    }
    if (auto d = classify()) return *d;
    return Decision::Unparseable;
}

std::vector<Verdict> judge_batch(std::span<const Triple> candidates,
                                 const PromptStrategy& strategy, JudgeClient& client,
                                 const KnowledgeGraph& g, const RetrievalIndex* index,
                                 const JudgeBatchOptions& opts) {
    if (strategy.kind == PromptKind::Rag) {
        if (!index) throw ConfigError("RAG strategy requires a retrieval index");
        if (strategy.top_k == 0) throw ConfigError("RAG top_k must be positive");
    }

    std::vector<Verdict> verdicts;
    verdicts.reserve(candidates.size());
    for (const Triple& c : candidates) {
        Verdict v;
        v.strategy = strategy;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            std::vector<Triple> context;
            if (strategy.kind == PromptKind::InContext) {
                context = related_context(g, c, opts.per_slot);
            } else if (strategy.kind == PromptKind::Rag) {
                const std::size_t k =
                    std::min<std::size_t>(strategy.top_k, index->size());
                if (k == 0) throw MissingContext("retrieval corpus is empty");
                for (const auto& hit : query_top_k(*index, g, c, k))
                    context.push_back(hit.triple);
            }

            std::string sentence;
            if (strategy.representation == Representation::SentenceForm)
                sentence = triple_to_sentence(c, g, client, opts.sentence_mode, opts.cache);

            const Prompt prompt = build_prompt(strategy, c, context, g, sentence);
            v.degraded = prompt.degraded;

            LlmCall call;
            call.purpose = LlmCall::Purpose::Judge;
            call.prompt = prompt.rendered;
            call.candidate = c;
            call.labels = {g.entity_label(c.head), g.relation_label(c.relation),
                           g.entity_label(c.tail)};
            v.raw_response = client.complete(call);
            v.decision = parse_verdict(v.raw_response);
        } catch (const Error& e) {
            v.decision = Decision::Unparseable;
            v.raw_response = std::string("error: ") + e.what();
        }
        v.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

std::vector<Triple> accepted_candidates(std::span<const Triple> candidates,
                                        std::span<const Verdict> verdicts) {
    if (candidates.size() != verdicts.size())
        throw LengthMismatch(candidates.size(), verdicts.size());
    std::vector<Triple> accepted;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (verdicts[i].decision == Decision::True) accepted.push_back(candidates[i]);
    return accepted;
}

}  // namespace omnia
