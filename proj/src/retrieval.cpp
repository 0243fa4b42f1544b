#include "omnia/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "omnia/hashing.hpp"

namespace omnia {

std::string render_triple_text(const Triple& t, const KnowledgeGraph& g) {
    std::string out;
    const auto& h = g.entity_label(t.head);
    const auto& r = g.relation_label(t.relation);
    const auto& tl = g.entity_label(t.tail);
    out.reserve(h.size() + r.size() + tl.size() + 2);
    out += h;
    out += ' ';
    out += r;
    out += ' ';
    out += tl;
    return out;
}

const char* embedder_kind_name(EmbedderKind kind) {
    return kind == EmbedderKind::TokenHash ? "token-hash" : "external";
}

TextEmbedder::TextEmbedder(EmbedderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.dim == 0) throw ConfigError("embedder dim must be positive");
    if (cfg_.kind == EmbedderKind::External && cfg_.endpoint_url.empty())
        throw ConfigError("external embedder requires an endpoint URL");
}

namespace {

void l2_normalize(std::vector<double>& v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0)
        for (double& x : v) x /= n;
}

std::vector<double> token_hash_embed(std::string_view text, std::uint32_t dim) {
    std::vector<double> v(dim, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        v[fnv1a64(token) % dim] += 1.0;
        token.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)))
            flush();
        else
            token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    flush();
    l2_normalize(v);
    return v;
}

// scheme://host[:port][/path] -> (scheme://host[:port], /path)
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::vector<std::vector<double>> external_embed(const EmbedderConfig& cfg,
                                                std::span<const std::string> texts) {
    const auto [base, path] = split_url(cfg.endpoint_url);
    httplib::Client client(base);
    client.set_connection_timeout(0, cfg.timeout_ms * 1000);
    client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);

    nlohmann::json body;
    body["texts"] = nlohmann::json::array();
    for (const auto& t : texts) body["texts"].push_back(t);

    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw EndpointError("embedder endpoint unreachable: " + cfg.endpoint_url);
    if (res->status != 200)
        throw EndpointError("embedder endpoint returned status " + std::to_string(res->status));

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw EndpointError(std::string("embedder response is not valid JSON: ") + e.what());
    }
    if (!parsed.contains("vectors") || !parsed["vectors"].is_array())
        throw EndpointError("embedder response lacks a vectors array");
    const auto& vecs = parsed["vectors"];
    if (vecs.size() != texts.size())
        throw EndpointError("embedder returned " + std::to_string(vecs.size()) +
                            " vectors for " + std::to_string(texts.size()) + " texts");

    std::vector<std::vector<double>> out;
    out.reserve(vecs.size());
    for (const auto& jv : vecs) {
        if (!jv.is_array() || jv.size() != cfg.dim)
            throw EndpointError("embedder vector has wrong dimension");
        std::vector<double> v;
        v.reserve(cfg.dim);
        for (const auto& x : jv) v.push_back(x.get<double>());
        l2_normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace

std::vector<double> TextEmbedder::embed(std::string_view text) const {
    if (cfg_.kind == EmbedderKind::TokenHash) return token_hash_embed(text, cfg_.dim);
    std::vector<std::string> one{std::string(text)};
    return external_embed(cfg_, one).front();
}

std::vector<std::vector<double>> TextEmbedder::embed_batch(
    std::span<const std::string> texts) const {
    if (cfg_.kind == EmbedderKind::External) return external_embed(cfg_, texts);
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(token_hash_embed(t, cfg_.dim));
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw LengthMismatch(a.size(), b.size());
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

RetrievalIndex build_index(std::span<const Triple> corpus, const KnowledgeGraph& g,
                           const TextEmbedder& e) {
    if (corpus.empty()) throw EmptyCorpus();

    RetrievalIndex index;
    index.embedder_ = e;
    index.dim_ = e.config().dim;
    index.triples_.assign(corpus.begin(), corpus.end());
    index.texts_.reserve(corpus.size());
    for (const Triple& t : corpus) index.texts_.push_back(render_triple_text(t, g));

    const auto vectors = e.embed_batch(index.texts_);
    index.vectors_.resize(corpus.size() * static_cast<std::size_t>(index.dim_));
    for (std::size_t i = 0; i < vectors.size(); ++i)
        std::copy(vectors[i].begin(), vectors[i].end(),
                  index.vectors_.begin() + i * index.dim_);
    return index;
}

std::vector<ScoredTriple> query_top_k(const RetrievalIndex& index, const KnowledgeGraph& g,
                                      const Triple& query, std::size_t k) {
    if (k < 1 || k > index.size()) throw KOutOfRange(k, index.size());

    const auto qvec = index.embedder().embed(render_triple_text(query, g));

    std::vector<std::size_t> order;
    order.reserve(index.size());
    std::vector<double> sims(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index.triple_at(i) == query) continue;
        sims[i] = cosine_similarity(qvec, index.vector_at(i));
        order.push_back(i);
    }

    const std::size_t take = std::min(k, order.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), better);

    std::vector<ScoredTriple> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
        out.push_back({index.triple_at(order[i]), sims[order[i]]});
    return out;
}

namespace {

constexpr std::uint32_t kIndexMagic = 0x4F4D5249;  // "IRMO" little-endian
constexpr std::uint32_t kIndexVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint64_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    std::uint64_t len = 0;
    read_pod(in, len);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    return s;
}

}  // namespace

void save_index(const RetrievalIndex& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact(path.string());
    write_pod(out, kIndexMagic);
    write_pod(out, kIndexVersion);
    write_pod(out, static_cast<std::uint8_t>(index.embedder_.config().kind));
    write_pod(out, index.dim_);
    write_string(out, index.embedder_.config().endpoint_url);
    write_pod(out, static_cast<std::uint64_t>(index.size()));
    for (const Triple& t : index.triples_) {
        write_pod(out, t.head);
        write_pod(out, t.relation);
        write_pod(out, t.tail);
    }
    for (const std::string& s : index.texts_) write_string(out, s);
    out.write(reinterpret_cast<const char*>(index.vectors_.data()),
              static_cast<std::streamsize>(index.vectors_.size() * sizeof(double)));
    if (!out) throw Error(ErrorClass::Data, "failed writing index " + path.string());
}

RetrievalIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact(path.string());
    std::uint32_t magic = 0, version = 0;
    read_pod(in, magic);
    read_pod(in, version);
    if (magic != kIndexMagic)
        throw Error(ErrorClass::Data, "not a retrieval index: " + path.string());
    if (version != kIndexVersion)
        throw Error(ErrorClass::Data, "unsupported index version " + std::to_string(version));

    std::uint8_t kind = 0;
    RetrievalIndex index;
    read_pod(in, kind);
    read_pod(in, index.dim_);
    EmbedderConfig cfg;
    cfg.kind = static_cast<EmbedderKind>(kind);
    cfg.dim = index.dim_;
    cfg.endpoint_url = read_string(in);
    index.embedder_ = TextEmbedder(cfg);

    std::uint64_t count = 0;
    read_pod(in, count);
    index.triples_.resize(count);
    for (auto& t : index.triples_) {
        read_pod(in, t.head);
        read_pod(in, t.relation);
        read_pod(in, t.tail);
    }
    index.texts_.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) index.texts_.push_back(read_string(in));
    index.vectors_.resize(count * static_cast<std::size_t>(index.dim_));
    in.read(reinterpret_cast<char*>(index.vectors_.data()),
            static_cast<std::streamsize>(index.vectors_.size() * sizeof(double)));
    if (!in) throw Error(ErrorClass::Data, "truncated index: " + path.string());
    return index;
}

}  // namespace omnia
