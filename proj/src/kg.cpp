#include "omnia/kg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "omnia/rng.hpp"

namespace omnia {

EntityId KnowledgeGraph::intern_entity(std::string_view label) {
    auto it = entity_ids_.find(std::string(label));
    if (it != entity_ids_.end()) return it->second;
    EntityId id = static_cast<EntityId>(entity_labels_.size());
    entity_labels_.emplace_back(label);
    entity_ids_.emplace(entity_labels_.back(), id);
    return id;
}

RelationId KnowledgeGraph::intern_relation(std::string_view label) {
    auto it = relation_ids_.find(std::string(label));
    if (it != relation_ids_.end()) return it->second;
    RelationId id = static_cast<RelationId>(relation_labels_.size());
    relation_labels_.emplace_back(label);
    relation_ids_.emplace(relation_labels_.back(), id);
    return id;
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view label) const {
    auto it = entity_ids_.find(std::string(label));
    if (it == entity_ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view label) const {
    auto it = relation_ids_.find(std::string(label));
    if (it == relation_ids_.end()) return std::nullopt;
    return it->second;
}

void KnowledgeGraph::check_entity(EntityId id) const {
    if (id >= entity_labels_.size())
        throw IdOutOfRange("entity id " + std::to_string(id) + " >= " +
                           std::to_string(entity_labels_.size()));
}

void KnowledgeGraph::check_relation(RelationId id) const {
    if (id >= relation_labels_.size())
        throw IdOutOfRange("relation id " + std::to_string(id) + " >= " +
                           std::to_string(relation_labels_.size()));
}

const std::string& KnowledgeGraph::entity_label(EntityId id) const {
    check_entity(id);
    return entity_labels_[id];
}

const std::string& KnowledgeGraph::relation_label(RelationId id) const {
    check_relation(id);
    return relation_labels_[id];
}

bool KnowledgeGraph::add_triple(const Triple& t) {
    check_entity(t.head);
    check_relation(t.relation);
    check_entity(t.tail);
    if (!triple_set_.insert(t).second) return false;
    triples_.push_back(t);
    if (t.head == t.tail) ++self_loops_;
    return true;
}

bool KnowledgeGraph::add_triple(std::string_view head, std::string_view relation,
                                std::string_view tail) {
    Triple t{intern_entity(head), intern_relation(relation), intern_entity(tail)};
    return add_triple(t);
}

KnowledgeGraph KnowledgeGraph::clone_tables() const {
    KnowledgeGraph g;
    g.entity_labels_ = entity_labels_;
    g.relation_labels_ = relation_labels_;
    g.entity_ids_ = entity_ids_;
    g.relation_ids_ = relation_ids_;
    return g;
}

std::array<std::string, 3> parse_triple_line(std::string_view line, std::size_t line_number) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::array<std::string, 3> fields;
    std::size_t field = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == '\t') {
            if (field >= 3)
                throw MalformedLine(line_number, "expected 3 tab-separated fields, found more");
            fields[field++] = std::string(line.substr(start, i - start));
            start = i + 1;
        }
    }
    if (field != 3)
        throw MalformedLine(line_number, "expected 3 tab-separated fields, found " +
                                             std::to_string(field));
    for (const auto& f : fields)
        if (f.empty()) throw MalformedLine(line_number, "empty field");
    return fields;
}

KnowledgeGraph load_graph(std::istream& in) {
    KnowledgeGraph g;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        auto fields = parse_triple_line(line, line_number);
        g.add_triple(fields[0], fields[1], fields[2]);
    }
    return g;
}

KnowledgeGraph load_graph_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact(path.string());
    return load_graph(in);
}

void write_tsv(const KnowledgeGraph& g, std::span<const Triple> triples, std::ostream& out) {
    for (const Triple& t : triples) {
        out << g.entity_label(t.head) << '\t' << g.relation_label(t.relation) << '\t'
            << g.entity_label(t.tail) << '\n';
    }
}

void write_tsv(const KnowledgeGraph& g, std::ostream& out) {
    write_tsv(g, g.triples(), out);
}

void write_tsv_file(const KnowledgeGraph& g, std::span<const Triple> triples,
                    const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact(path.string());
    write_tsv(g, triples, out);
}

SplitResult split_graph(const KnowledgeGraph& g, const SplitSpec& spec) {
    if (g.size() == 0) throw EmptyGraph();
    if (!(spec.removal_fraction > 0.0) || !(spec.removal_fraction < 1.0))
        throw ConfigError("removal_fraction must lie in (0, 1)");

    const std::size_t n = g.size();
    const double exact = spec.removal_fraction * static_cast<double>(n);
    // Round half away from zero; exact is always positive here.
    const std::size_t k = static_cast<std::size_t>(std::floor(exact + 0.5));

    std::vector<std::uint32_t> indices(n);
    std::iota(indices.begin(), indices.end(), 0u);
    SplitMix64 rng(derive_seed(spec.seed, spec.repeat_index));
    rng.partial_shuffle(indices, k);

    std::vector<bool> is_removed(n, false);
    for (std::size_t i = 0; i < k; ++i) is_removed[indices[i]] = true;

    SplitResult result;
    result.observed = g.clone_tables();
    result.removed.reserve(k);
    const auto& triples = g.triples();
    for (std::size_t i = 0; i < n; ++i) {
        if (is_removed[i])
            result.removed.push_back(triples[i]);
        else
            result.observed.add_triple(triples[i]);
    }
    return result;
}

std::vector<bool> referenced_entities(const KnowledgeGraph& g) {
    std::vector<bool> seen(g.entity_count(), false);
    for (const Triple& t : g.triples()) {
        seen[t.head] = true;
        seen[t.tail] = true;
    }
    return seen;
}

std::vector<bool> referenced_relations(const KnowledgeGraph& g) {
    std::vector<bool> seen(g.relation_count(), false);
    for (const Triple& t : g.triples()) seen[t.relation] = true;
    return seen;
}

GraphStats graph_stats(const KnowledgeGraph& g, bool restrict_to_referenced) {
    GraphStats stats;
    stats.triple_count = g.size();
    if (!restrict_to_referenced) {
        stats.unique_entities = g.entity_count();
        stats.unique_relations = g.relation_count();
        return stats;
    }
    auto ents = referenced_entities(g);
    auto rels = referenced_relations(g);
    stats.unique_entities = static_cast<std::size_t>(std::count(ents.begin(), ents.end(), true));
    stats.unique_relations = static_cast<std::size_t>(std::count(rels.begin(), rels.end(), true));
    return stats;
}

}  // namespace omnia
