#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "omnia/judge.hpp"
#include "omnia/synthetic.hpp"

using namespace omnia;

namespace {

const std::filesystem::path kSourceDir = OMNIA_SOURCE_DIR;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: ", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// "judge/triple/zero-shot@v1" -> "judge_triple_zero-shot.v1.txt"
std::string template_file_name(std::string id) {
    for (char& c : id) {
        if (c == '/') c = '_';
        if (c == '@') c = '.';
    }
    return id + ".txt";
}

KnowledgeGraph virology_graph() {
    KnowledgeGraph g;
    g.add_triple("remdesivir", "inhibits", "2019-ncov");
    g.add_triple("chloroquine", "inhibits", "2019-ncov");
    g.add_triple("chloroquine", "treats", "2019-ncov");
    g.add_triple("remdesivir", "affects", "mers");
    return g;
}

Triple label_triple(const KnowledgeGraph& g, const std::string& h, const std::string& r,
                    const std::string& t) {
    return Triple{*g.find_entity(h), *g.find_relation(r), *g.find_entity(t)};
}

// Counts completions so caching behaviour is observable.
class CountingClient : public JudgeClient {
public:
    explicit CountingClient(std::string reply) : reply_(std::move(reply)) {}
    std::string complete(const LlmCall&) override {
        ++calls;
        return reply_;
    }
    std::string model_name() const override { return "counting"; }
    int calls = 0;

private:
    std::string reply_;
};

}  // namespace

TEST_CASE("the template registry holds the eight frozen prompts") {
    auto ids = template_ids();
    std::set<std::string> got(ids.begin(), ids.end());
    std::set<std::string> want{
        "judge/triple/zero-shot@v1",   "judge/triple/in-context@v1",
        "judge/triple/rag@v1",         "judge/sentence/zero-shot@v1",
        "judge/sentence/in-context@v1", "judge/sentence/rag@v1",
        "transform/simple@v1",         "transform/explicit@v1"};
    CHECK(got == want);
    CHECK_THROWS_AS(template_text("judge/triple/zero-shot@v2"), const ConfigError&);
}

TEST_CASE("every template ends with a newline and carries its placeholders") {
    for (const auto& id : template_ids()) {
        auto text = template_text(id);
        REQUIRE(!text.empty());
        CHECK(text.back() == '\n');
        if (id.find("sentence") != std::string::npos && id.find("judge/") == 0) {
            CHECK(text.find("{sentence}") != std::string_view::npos);
        } else {
            CHECK(text.find("{head}") != std::string_view::npos);
            CHECK(text.find("{relation}") != std::string_view::npos);
            CHECK(text.find("{tail}") != std::string_view::npos);
        }
        const bool needs_context = id.find("in-context") != std::string::npos ||
                                   id.find("rag") != std::string::npos;
        CHECK((text.find("{context}") != std::string_view::npos) == needs_context);
    }
}

TEST_CASE("template files mirror the compiled-in text byte for byte") {
    for (const auto& id : template_ids()) {
        const auto path = kSourceDir / "templates" / template_file_name(id);
        CHECK_MESSAGE(read_file(path) == template_text(id), "template drift: ", id);
    }
}

TEST_CASE("the explicit transform prompt pins its constraint sentence") {
    auto text = template_text("transform/explicit@v1");
    CHECK(text.find("Do not rephrase non-valid facts or use negative constructions.") !=
          std::string_view::npos);
    CHECK(text.find("no matter if it is valid or not") != std::string_view::npos);
    auto simple = template_text("transform/simple@v1");
    CHECK(simple.find("Transform the following triple into a sentence:") !=
          std::string_view::npos);
    CHECK(simple.find("Answer: Give the sentence.") != std::string_view::npos);
}

TEST_CASE("template ids assemble from strategy parts") {
    CHECK(judge_template_id(PromptKind::ZeroShot, Representation::TripleForm) ==
          "judge/triple/zero-shot@v1");
    CHECK(judge_template_id(PromptKind::Rag, Representation::SentenceForm) ==
          "judge/sentence/rag@v1");
    CHECK(transform_template_id(SentenceMode::Simple) == "transform/simple@v1");
    CHECK(transform_template_id(SentenceMode::Explicit) == "transform/explicit@v1");
}

TEST_CASE("related context honors independent slot quotas") {
    KnowledgeGraph g;
    g.add_triple("a", "r", "c");   // shares head and relation with (a, r, b)
    g.add_triple("x", "r", "y");   // relation quota already spent
    g.add_triple("z", "q", "b");   // shares tail
    g.add_triple("a", "q", "c");   // head quota already spent
    const Triple cand = {*g.find_entity("a"), *g.find_relation("r"), *g.find_entity("b")};
    auto ctx = related_context(g, cand, 1);
    REQUIRE(ctx.size() == 2);
    CHECK(ctx[0] == g.triples()[0]);
    CHECK(ctx[1] == g.triples()[2]);

    auto wide = related_context(g, cand, 2);
    // Per-slot quotas of 2: head picks triples 0 and 3, relation picks 0 and
    // 1, tail picks 2; triple 0 appears once.
    REQUIRE(wide.size() == 4);
    CHECK(wide == std::vector<Triple>{g.triples()[0], g.triples()[1], g.triples()[2],
                                      g.triples()[3]});
    CHECK_THROWS_AS(related_context(g, cand, 0), const ConfigError&);
}

TEST_CASE("related context never returns the candidate itself") {
    KnowledgeGraph g = virology_graph();
    for (const auto& t : g.triples()) {
        auto ctx = related_context(g, t, 3);
        for (const auto& c : ctx) CHECK(c != t);
    }
}

TEST_CASE("zero-shot prompts render the frozen golden bytes") {
    KnowledgeGraph g = virology_graph();
    const Triple cand = label_triple(g, "remdesivir", "treats", "2019-ncov");
    auto p = build_prompt({PromptKind::ZeroShot, Representation::TripleForm, 2}, cand, {}, g);
    CHECK(p.template_id == "judge/triple/zero-shot@v1");
    CHECK(!p.degraded);
    CHECK(p.rendered == read_file(kSourceDir / "tests/golden/prompt_triple_zero-shot.txt"));
}

TEST_CASE("in-context prompts list the context as dash lines") {
    KnowledgeGraph g = virology_graph();
    const Triple cand = label_triple(g, "remdesivir", "treats", "2019-ncov");
    auto ctx = related_context(g, cand, 1);
    REQUIRE(!ctx.empty());
    auto p = build_prompt({PromptKind::InContext, Representation::TripleForm, 2}, cand, ctx, g);
    CHECK(p.template_id == "judge/triple/in-context@v1");
    CHECK(p.rendered == read_file(kSourceDir / "tests/golden/prompt_triple_in-context.txt"));
    CHECK(p.rendered.find("- remdesivir inhibits 2019-ncov") != std::string::npos);
    CHECK(p.context == ctx);
}

TEST_CASE("rag prompts render evidence and sentence prompts take the statement") {
    KnowledgeGraph g = virology_graph();
    const Triple cand = label_triple(g, "remdesivir", "treats", "2019-ncov");
    std::vector<Triple> ctx{g.triples()[0], g.triples()[2]};
    auto p = build_prompt({PromptKind::Rag, Representation::TripleForm, 2}, cand, ctx, g);
    CHECK(p.rendered == read_file(kSourceDir / "tests/golden/prompt_triple_rag.txt"));

    auto s = build_prompt({PromptKind::ZeroShot, Representation::SentenceForm, 2}, cand, {}, g,
                          "The remdesivir treats the 2019-ncov.");
    CHECK(s.rendered == read_file(kSourceDir / "tests/golden/prompt_sentence_zero-shot.txt"));
    CHECK(s.rendered.find("The remdesivir treats the 2019-ncov.") != std::string::npos);
}

TEST_CASE("empty in-context degrades to zero-shot wording") {
    KnowledgeGraph g = virology_graph();
    const Triple cand = label_triple(g, "remdesivir", "treats", "2019-ncov");
    auto p = build_prompt({PromptKind::InContext, Representation::TripleForm, 2}, cand, {}, g);
    CHECK(p.degraded);
    CHECK(p.template_id == "judge/triple/zero-shot@v1");
    auto zero = build_prompt({PromptKind::ZeroShot, Representation::TripleForm, 2}, cand, {}, g);
    CHECK(p.rendered == zero.rendered);
}

TEST_CASE("prompt building rejects impossible inputs") {
    KnowledgeGraph g = virology_graph();
    const Triple cand = label_triple(g, "remdesivir", "treats", "2019-ncov");
    CHECK_THROWS_AS(build_prompt({PromptKind::Rag, Representation::TripleForm, 2}, cand, {}, g),
                    const MissingContext&);
    CHECK_THROWS_AS(
        build_prompt({PromptKind::ZeroShot, Representation::SentenceForm, 2}, cand, {}, g),
        const ConfigError&);
}

TEST_CASE("verdict parsing keys on the first standalone token") {
    CHECK(parse_verdict("True") == Decision::True);
    CHECK(parse_verdict("true.") == Decision::True);
    CHECK(parse_verdict("  YES, that is correct") == Decision::True);
    CHECK(parse_verdict("The answer is true") == Decision::True);
    CHECK(parse_verdict("1. True") == Decision::True);
    CHECK(parse_verdict("False") == Decision::False);
    CHECK(parse_verdict("no") == Decision::False);
    CHECK(parse_verdict("Not a fact: FALSE") == Decision::False);
    CHECK(parse_verdict("untrue") == Decision::Unparseable);
    CHECK(parse_verdict("trueish claim") == Decision::Unparseable);
    CHECK(parse_verdict("") == Decision::Unparseable);
    CHECK(parse_verdict("   \n\t ") == Decision::Unparseable);
    CHECK(parse_verdict("maybe") == Decision::Unparseable);
    CHECK(decision_name(Decision::True) == std::string("true"));
    CHECK(decision_name(Decision::False) == std::string("false"));
    CHECK(decision_name(Decision::Unparseable) == std::string("unparseable"));
}

TEST_CASE("the mock oracle answers membership exactly at flip rate zero") {
    KnowledgeGraph g = virology_graph();
    TripleSet truth;
    truth.insert(g.triples()[0]);
    MockJudgeClient mock(truth);
    LlmCall call;
    call.candidate = g.triples()[0];
    CHECK(mock.complete(call) == "True");
    call.candidate = g.triples()[1];
    CHECK(mock.complete(call) == "False");
    CHECK(mock.model_name() == "mock-oracle");
    CHECK_THROWS_AS(MockJudgeClient(truth, -0.1), const ConfigError&);
    CHECK_THROWS_AS(MockJudgeClient(truth, 1.5), const ConfigError&);
}

TEST_CASE("seeded flips replay exactly and hit their rate") {
    for (double rate : {0.05, 0.1, 0.2}) {
        const std::uint64_t seed = 91;
        TripleSet truth;
        MockJudgeClient mock(truth, rate, seed);
        int flipped = 0;
        const int n = 5000;
        for (int i = 0; i < n; ++i) {
            Triple t{static_cast<EntityId>(i), 0, static_cast<EntityId>(i + 1)};
            LlmCall call;
            call.candidate = t;
            const bool flip = MockJudgeClient::flips(t, rate, seed);
            // Truth set is empty, so the oracle answer is the flip itself.
            CHECK(mock.complete(call) == (flip ? "True" : "False"));
            flipped += flip;
        }
        const double observed = static_cast<double>(flipped) / n;
        CHECK(std::abs(observed - rate) < 0.02);
        // Replay is exact: same triple, same outcome.
        Triple probe{3, 0, 4};
        CHECK(MockJudgeClient::flips(probe, rate, seed) ==
              MockJudgeClient::flips(probe, rate, seed));
        CHECK(MockJudgeClient::flips(probe, 0.0, seed) == false);
        CHECK(MockJudgeClient::flips(probe, 1.0, seed) == true);
    }
}

TEST_CASE("the mock transform concatenates the labels") {
    MockJudgeClient mock(TripleSet{});
    LlmCall call;
    call.purpose = LlmCall::Purpose::Transform;
    call.labels = {"remdesivir", "treats", "2019-ncov"};
    CHECK(mock.complete(call) == "The remdesivir treats the 2019-ncov.");
}

TEST_CASE("sentence transformation trims and caches") {
    KnowledgeGraph g = virology_graph();
    const Triple cand = g.triples()[0];
    CountingClient client("  A fact about antivirals.\n");
    SentenceCache cache;
    auto s1 = triple_to_sentence(cand, g, client, SentenceMode::Explicit, &cache);
    CHECK(s1 == "A fact about antivirals.");
    CHECK(client.calls == 1);
    auto s2 = triple_to_sentence(cand, g, client, SentenceMode::Explicit, &cache);
    CHECK(s2 == s1);
    CHECK(client.calls == 1);  // cache hit
    // A different mode misses the cache.
    auto s3 = triple_to_sentence(cand, g, client, SentenceMode::Simple, &cache);
    CHECK(s3 == s1);
    CHECK(client.calls == 2);
    CHECK(cache.size() == 2);

    CountingClient empty("   \n ");
    CHECK_THROWS_AS(triple_to_sentence(cand, g, empty, SentenceMode::Explicit, nullptr),
                    const EmptyResponse&);
}

TEST_CASE("sentence caches round-trip through disk") {
    SentenceCache cache;
    cache.put({1, 2, 3}, SentenceMode::Explicit, "m", "A sentence.");
    cache.put({4, 5, 6}, SentenceMode::Simple, "m", "Another.");
    auto path = std::filesystem::temp_directory_path() / "sentence_cache.json";
    cache.save(path);
    auto loaded = SentenceCache::load(path);
    CHECK(loaded.size() == 2);
    CHECK(loaded.find({1, 2, 3}, SentenceMode::Explicit, "m") == std::string("A sentence."));
    CHECK(loaded.find({1, 2, 3}, SentenceMode::Simple, "m") == std::nullopt);
    CHECK(loaded.find({1, 2, 3}, SentenceMode::Explicit, "other") == std::nullopt);
    std::filesystem::remove(path);
}

TEST_CASE("judge batches answer every candidate in order") {
    KnowledgeGraph g = virology_graph();
    std::vector<Triple> cands{
        label_triple(g, "remdesivir", "treats", "2019-ncov"),
        label_triple(g, "chloroquine", "affects", "mers"),
        label_triple(g, "mers", "treats", "mers"),
    };
    TripleSet truth;
    truth.insert(cands[0]);
    MockJudgeClient mock(truth);
    auto verdicts = judge_batch(cands, {PromptKind::ZeroShot, Representation::TripleForm, 2},
                                mock, g);
    REQUIRE(verdicts.size() == 3);
    CHECK(verdicts[0].decision == Decision::True);
    CHECK(verdicts[1].decision == Decision::False);
    CHECK(verdicts[2].decision == Decision::False);
    CHECK(verdicts[0].raw_response == "True");
    for (const auto& v : verdicts) CHECK(v.latency_ms >= 0.0);

    auto accepted = accepted_candidates(cands, verdicts);
    REQUIRE(accepted.size() == 1);
    CHECK(accepted[0] == cands[0]);
    CHECK_THROWS_AS(accepted_candidates(cands, std::span<const Verdict>{}),
                    const LengthMismatch&);
}

TEST_CASE("in-context batches degrade per candidate when nothing relates") {
    KnowledgeGraph g = virology_graph();
    // An isolated vocabulary island: shares no component with the graph.
    g.add_triple("island", "alone", "rock");
    const Triple isolated = label_triple(g, "island", "alone", "island");
    const Triple connected = label_triple(g, "remdesivir", "treats", "2019-ncov");
    // Remove the only triple relating to "island" so context is empty.
    KnowledgeGraph pruned = virology_graph();
    pruned.intern_entity("island");
    pruned.intern_relation("alone");
    pruned.intern_entity("rock");
    MockJudgeClient mock(TripleSet{});
    std::vector<Triple> cands{isolated, connected};
    auto verdicts = judge_batch(cands, {PromptKind::InContext, Representation::TripleForm, 2},
                                mock, pruned);
    REQUIRE(verdicts.size() == 2);
    CHECK(verdicts[0].degraded);
    CHECK(!verdicts[1].degraded);
}

TEST_CASE("rag batches pull retrieved context and flag an empty corpus per candidate") {
    KnowledgeGraph g = virology_graph();
    EmbedderConfig ecfg;
    ecfg.dim = 32;
    auto index = build_index(g.triples(), g, TextEmbedder(ecfg));
    std::vector<Triple> cands{label_triple(g, "remdesivir", "treats", "2019-ncov")};
    TripleSet truth;
    truth.insert(cands[0]);
    MockJudgeClient mock(truth);
    auto verdicts =
        judge_batch(cands, {PromptKind::Rag, Representation::TripleForm, 2}, mock, g, &index);
    REQUIRE(verdicts.size() == 1);
    CHECK(verdicts[0].decision == Decision::True);
    CHECK(!verdicts[0].degraded);

    CHECK_THROWS_AS(
        judge_batch(cands, {PromptKind::Rag, Representation::TripleForm, 2}, mock, g, nullptr),
        const ConfigError&);
    CHECK_THROWS_AS(
        judge_batch(cands, {PromptKind::Rag, Representation::TripleForm, 0}, mock, g, &index),
        const ConfigError&);
}

TEST_CASE("sentence-form batches transform through the same client") {
    KnowledgeGraph g = virology_graph();
    std::vector<Triple> cands{label_triple(g, "remdesivir", "treats", "2019-ncov")};
    TripleSet truth;
    truth.insert(cands[0]);
    MockJudgeClient mock(truth);
    SentenceCache cache;
    JudgeBatchOptions opts;
    opts.cache = &cache;
    auto verdicts = judge_batch(cands, {PromptKind::ZeroShot, Representation::SentenceForm, 2},
                                mock, g, nullptr, opts);
    REQUIRE(verdicts.size() == 1);
    CHECK(verdicts[0].decision == Decision::True);
    CHECK(cache.size() == 1);
    CHECK(cache.find(cands[0], SentenceMode::Explicit, "mock-oracle") ==
          std::string("The remdesivir treats the 2019-ncov."));
}

namespace {

// Throws like an endpoint that is down; judge_batch must absorb it.
class FailingClient : public JudgeClient {
public:
    std::string complete(const LlmCall&) override {
        throw EndpointError("synthetic outage");
    }
    std::string model_name() const override { return "failing"; }
};

}  // namespace

TEST_CASE("endpoint failures become unparseable verdicts instead of aborting") {
    KnowledgeGraph g = virology_graph();
    std::vector<Triple> cands{label_triple(g, "remdesivir", "treats", "2019-ncov"),
                              label_triple(g, "chloroquine", "affects", "mers")};
    FailingClient failing;
    auto verdicts = judge_batch(cands, {PromptKind::ZeroShot, Representation::TripleForm, 2},
                                failing, g);
    REQUIRE(verdicts.size() == 2);
    for (const auto& v : verdicts) {
        CHECK(v.decision == Decision::Unparseable);
        CHECK(v.raw_response.find("error:") == 0);
    }
}

TEST_CASE("the http judge validates its configuration") {
    HttpJudgeConfig cfg;
    CHECK_THROWS_AS(HttpJudgeClient{cfg}, const ConfigError&);
    cfg.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
    CHECK_THROWS_AS(HttpJudgeClient{cfg}, const ConfigError&);
    cfg.model = "m";
    cfg.max_retries = -1;
    CHECK_THROWS_AS(HttpJudgeClient{cfg}, const ConfigError&);
}

TEST_CASE("the http judge retries transient failures with backoff") {
    httplib::Server srv;
    std::atomic<int> calls{0};
    std::string last_body;
    srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++calls;
        last_body = req.body;
        if (n <= 2) {
            res.status = n == 1 ? 500 : 429;
            return;
        }
        nlohmann::json reply{{"choices", {{{"message", {{"content", "True"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = srv.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    HttpJudgeConfig cfg;
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "test-model";
    cfg.api_key = "sk-test";
    cfg.max_retries = 3;
    cfg.backoff_base_ms = 1;
    HttpJudgeClient client(cfg);
    LlmCall call;
    call.prompt = "Is water wet? Answer True or False.";
    CHECK(client.complete(call) == "True");
    CHECK(calls == 3);

    auto body = nlohmann::json::parse(last_body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("temperature") == 0);
    CHECK(body.at("max_tokens") == 256);
    CHECK(body.at("messages").at(0).at("role") == "user");
    CHECK(body.at("messages").at(0).at("content") == call.prompt);

    srv.stop();
    th.join();
}

TEST_CASE("the http judge gives up after exhausting retries") {
    httplib::Server srv;
    std::atomic<int> calls{0};
    srv.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });
    const int port = srv.bind_to_any_port("127.0.0.1");
    std::thread th([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    HttpJudgeConfig cfg;
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "m";
    cfg.max_retries = 2;
    cfg.backoff_base_ms = 1;
    HttpJudgeClient client(cfg);
    LlmCall call;
    try {
        client.complete(call);
        FAIL("expected EndpointError");
    } catch (const EndpointError& e) {
        CHECK(std::string(e.what()).find("3 attempts") != std::string::npos);
    }
    CHECK(calls == 3);

    srv.stop();
    th.join();
}

TEST_CASE("the http judge fails fast on non-retryable statuses and bad payloads") {
    httplib::Server srv;
    std::atomic<int> calls{0};
    std::string mode = "404";
    srv.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        if (mode == "404") {
            res.status = 404;
        } else if (mode == "badjson") {
            res.set_content("not json", "text/plain");
        } else if (mode == "nochoices") {
            res.set_content("{}", "application/json");
        } else if (mode == "empty") {
            nlohmann::json reply{{"choices", {{{"message", {{"content", "  \n "}}}}}}};
            res.set_content(reply.dump(), "application/json");
        }
    });
    const int port = srv.bind_to_any_port("127.0.0.1");
    std::thread th([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    HttpJudgeConfig cfg;
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "m";
    cfg.max_retries = 3;
    cfg.backoff_base_ms = 1;
    HttpJudgeClient client(cfg);
    LlmCall call;

    CHECK_THROWS_AS(client.complete(call), const EndpointError&);
    CHECK(calls == 1);  // no retry on 404
    mode = "badjson";
    CHECK_THROWS_AS(client.complete(call), const EndpointError&);
    mode = "nochoices";
    CHECK_THROWS_AS(client.complete(call), const EndpointError&);
    mode = "empty";
    CHECK_THROWS_AS(client.complete(call), const EmptyResponse&);

    srv.stop();
    th.join();
}

TEST_CASE("strategy names round-trip") {
    for (PromptKind k : {PromptKind::ZeroShot, PromptKind::InContext, PromptKind::Rag})
        CHECK(prompt_kind_from_name(prompt_kind_name(k)) == k);
    for (Representation r : {Representation::TripleForm, Representation::SentenceForm})
        CHECK(representation_from_name(representation_name(r)) == r);
    for (SentenceMode m : {SentenceMode::Simple, SentenceMode::Explicit})
        CHECK(sentence_mode_from_name(sentence_mode_name(m)) == m);
    CHECK(!prompt_kind_from_name("bogus").has_value());
}
