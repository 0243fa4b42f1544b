#pragma once

// Text-space retrieval over graph triples: a deterministic token-hash
// embedder (external HTTP endpoint optional), an exact cosine top-k index
// with insertion-order tie-breaking, and a versioned binary index file.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "omnia/kg.hpp"

namespace omnia {

// "<head-label> <relation-label> <tail-label>" with single spaces.
std::string render_triple_text(const Triple& t, const KnowledgeGraph& g);

enum class EmbedderKind { TokenHash, External };

const char* embedder_kind_name(EmbedderKind kind);

struct EmbedderConfig {
    EmbedderKind kind = EmbedderKind::TokenHash;
    std::uint32_t dim = 384;
    std::string endpoint_url;  // external kind only
    std::string api_key;       // external kind only, sourced from environment
    int timeout_ms = 30000;
};

// Token-hash kind: lowercase, split on whitespace, bucket each token by
// fnv1a64 % dim, accumulate counts, L2-normalize. Empty text embeds to the
// zero vector. External kind POSTs {"texts": [...]} and expects
// {"vectors": [[...]]}; responses are L2-normalized the same way.
class TextEmbedder {
public:
    TextEmbedder() = default;
    explicit TextEmbedder(EmbedderConfig cfg);

    const EmbedderConfig& config() const noexcept { return cfg_; }

    std::vector<double> embed(std::string_view text) const;
    std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts) const;

private:
    EmbedderConfig cfg_;
};

struct ScoredTriple {
    Triple triple;
    double similarity = 0.0;
};

// Immutable after build; queries are read-only.
class RetrievalIndex {
public:
    std::size_t size() const noexcept { return triples_.size(); }
    std::uint32_t dim() const noexcept { return dim_; }
    const TextEmbedder& embedder() const noexcept { return embedder_; }

    const Triple& triple_at(std::size_t i) const { return triples_[i]; }
    const std::string& text_at(std::size_t i) const { return texts_[i]; }
    std::span<const double> vector_at(std::size_t i) const {
        return {vectors_.data() + i * dim_, dim_};
    }

    friend RetrievalIndex build_index(std::span<const Triple> corpus, const KnowledgeGraph& g,
                                      const TextEmbedder& e);
    friend void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
    friend RetrievalIndex load_index(const std::filesystem::path& path);

private:
    TextEmbedder embedder_;
    std::uint32_t dim_ = 0;
    std::vector<Triple> triples_;
    std::vector<std::string> texts_;
    std::vector<double> vectors_;  // row-major, size() x dim
};

// Throws EmptyCorpus. Insertion order of the corpus is preserved and used
// for tie-breaking at query time.
RetrievalIndex build_index(std::span<const Triple> corpus, const KnowledgeGraph& g,
                           const TextEmbedder& e);

// Exact top-k by cosine similarity, descending, ties broken by corpus
// insertion order. Entries equal to the query triple are excluded; when the
// exclusion leaves fewer than k entries the result is all of them. Throws
// KOutOfRange unless 1 <= k <= corpus size.
std::vector<ScoredTriple> query_top_k(const RetrievalIndex& index, const KnowledgeGraph& g,
                                      const Triple& query, std::size_t k);

void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace omnia
