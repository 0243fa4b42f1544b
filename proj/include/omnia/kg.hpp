#pragma once

// Knowledge graph core: interned triple store, TSV parsing, random splits,
// and basic statistics. Labels are interned first-come-first-id into dense
// 32-bit ids; triples are deduplicated on insert and kept in insertion order.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "omnia/errors.hpp"
#include "omnia/hashing.hpp"

namespace omnia {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
    // Lexicographic over (head, relation, tail) ids.
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t k = (static_cast<std::uint64_t>(t.head) << 32) ^
                          (static_cast<std::uint64_t>(t.relation) << 16) ^ t.tail;
        return static_cast<std::size_t>(mix64(k));
    }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

struct GraphStats {
    std::size_t unique_entities = 0;
    std::size_t unique_relations = 0;
    std::size_t triple_count = 0;

    friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

struct SplitSpec {
    double removal_fraction = 0.2;
    std::uint64_t seed = 0;
    std::uint32_t repeat_index = 0;
};

class KnowledgeGraph {
public:
    EntityId intern_entity(std::string_view label);
    RelationId intern_relation(std::string_view label);

    std::optional<EntityId> find_entity(std::string_view label) const;
    std::optional<RelationId> find_relation(std::string_view label) const;

    const std::string& entity_label(EntityId id) const;
    const std::string& relation_label(RelationId id) const;

    // Returns false when the triple was already present.
    bool add_triple(const Triple& t);
    bool add_triple(std::string_view head, std::string_view relation, std::string_view tail);

    bool contains(const Triple& t) const { return triple_set_.count(t) != 0; }

    const std::vector<Triple>& triples() const { return triples_; }
    const TripleSet& triple_set() const { return triple_set_; }

    std::size_t entity_count() const { return entity_labels_.size(); }
    std::size_t relation_count() const { return relation_labels_.size(); }
    std::size_t size() const { return triples_.size(); }

    bool has_self_loop() const { return self_loops_ != 0; }

    // Copies the interning tables but no triples. Used by split_graph so the
    // observed graph keeps identical ids.
    KnowledgeGraph clone_tables() const;

private:
    void check_entity(EntityId id) const;
    void check_relation(RelationId id) const;

    std::vector<std::string> entity_labels_;
    std::vector<std::string> relation_labels_;
    std::unordered_map<std::string, EntityId> entity_ids_;
    std::unordered_map<std::string, RelationId> relation_ids_;
    std::vector<Triple> triples_;
    TripleSet triple_set_;
    std::size_t self_loops_ = 0;
};

// Splits a line into exactly three non-empty tab-separated fields. Accepts a
// trailing CR (CRLF input). line_number is 1-based and only used in errors.
std::array<std::string, 3> parse_triple_line(std::string_view line, std::size_t line_number = 0);

KnowledgeGraph load_graph(std::istream& in);
KnowledgeGraph load_graph_file(const std::filesystem::path& path);

void write_tsv(const KnowledgeGraph& g, std::ostream& out);
void write_tsv(const KnowledgeGraph& g, std::span<const Triple> triples, std::ostream& out);
void write_tsv_file(const KnowledgeGraph& g, std::span<const Triple> triples,
                    const std::filesystem::path& path);

struct SplitResult {
    KnowledgeGraph observed;      // full interning tables, surviving triples
    std::vector<Triple> removed;  // ascending original-index order
};

// Removes round-half-away-from-zero(fraction * |triples|) triples uniformly
// at random. Pure function of (g, spec).
SplitResult split_graph(const KnowledgeGraph& g, const SplitSpec& spec);

// restrict_to_referenced counts only entities/relations appearing in at
// least one stored triple; otherwise table sizes are reported.
GraphStats graph_stats(const KnowledgeGraph& g, bool restrict_to_referenced = false);

// Entities/relations with at least one mention in the stored triples.
std::vector<bool> referenced_entities(const KnowledgeGraph& g);
std::vector<bool> referenced_relations(const KnowledgeGraph& g);

}  // namespace omnia
