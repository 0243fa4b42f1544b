#pragma once

// Candidate generation by relational clustering. Heads are bucketed by their
// (relation, tail) pair; each cluster contributes members x collected pairs,
// minus observed triples. Two pair-collection scopes exist: cluster-local
// (each cluster only re-offers its own key, so nothing new is ever produced)
// and member-global (the default: a cluster offers every pair any of its
// member heads carries anywhere in the graph).

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "omnia/kg.hpp"

namespace omnia {

struct PairKey {
    RelationId relation = 0;
    EntityId tail = 0;

    friend bool operator==(const PairKey&, const PairKey&) = default;
    friend auto operator<=>(const PairKey&, const PairKey&) = default;
};

enum class PairScope { MemberGlobal, ClusterLocal };

inline const char* pair_scope_name(PairScope s) {
    return s == PairScope::MemberGlobal ? "member-global" : "cluster-local";
}

// Clusters indexed densely in first-occurrence order of their key within the
// triple stream. Cluster id doubles as the pair id of its key.
class ClusterMap {
public:
    std::size_t cluster_count() const { return keys_.size(); }
    const PairKey& key(std::size_t cid) const { return keys_[cid]; }
    std::span<const EntityId> members(std::size_t cid) const;
    std::optional<std::size_t> find(const PairKey& key) const;

    // Pair ids carried by one head (the clusters it belongs to).
    std::span<const std::uint32_t> pairs_of_head(EntityId head) const;
    std::span<const EntityId> heads() const { return heads_in_order_; }

private:
    friend ClusterMap cluster_heads(const KnowledgeGraph& g);

    std::vector<PairKey> keys_;
    std::vector<std::uint32_t> member_offsets_;  // CSR over members_
    std::vector<EntityId> members_;
    std::vector<std::uint32_t> head_offsets_;  // CSR over head_pairs_, indexed by entity id
    std::vector<std::uint32_t> head_pairs_;
    std::vector<EntityId> heads_in_order_;  // heads with >= 1 triple, ascending id
};

ClusterMap cluster_heads(const KnowledgeGraph& g);

// P_k per cluster, stored as pair ids in ascending id order.
class PairAssignment {
public:
    PairScope scope() const { return scope_; }
    std::size_t cluster_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::span<const std::uint32_t> pair_ids(std::size_t cid) const;
    std::uint64_t total_pairs() const { return pairs_.size(); }

private:
    friend PairAssignment collect_pairs(const KnowledgeGraph&, const ClusterMap&, PairScope);

    PairScope scope_ = PairScope::MemberGlobal;
    std::vector<std::uint64_t> offsets_;
    std::vector<std::uint32_t> pairs_;
};

PairAssignment collect_pairs(const KnowledgeGraph& g, const ClusterMap& clusters,
                             PairScope scope);

struct GenOptions {
    bool record_provenance = false;
};

struct GenStats {
    // Sum over clusters of |H_k| * |P_k|: the algorithm's nominal work.
    std::uint64_t raw_combinations = 0;
    // Membership probes + stamp operations actually performed.
    std::uint64_t union_operations = 0;
    // Candidate emissions before observed-triple and self-loop exclusion.
    std::uint64_t emissions = 0;
};

class CandidateSet {
public:
    const std::vector<Triple>& triples() const { return triples_; }
    // Cluster ids that produced the candidate; aligned with triples() and
    // only populated when GenOptions::record_provenance was set.
    const std::vector<std::vector<std::uint32_t>>& provenance() const { return provenance_; }
    const GenStats& stats() const { return stats_; }
    PairScope scope() const { return scope_; }
    std::size_t size() const { return triples_.size(); }
    bool contains(const Triple& t) const;

private:
    friend CandidateSet generate_candidates(const KnowledgeGraph&, const ClusterMap&,
                                            const PairAssignment&, const GenOptions&);

    std::vector<Triple> triples_;  // ascending (head, relation, tail)
    std::vector<std::vector<std::uint32_t>> provenance_;
    GenStats stats_;
    PairScope scope_ = PairScope::MemberGlobal;
};

// Deduplicated union over clusters of H_k x P_k, excluding observed triples.
// Self-loop candidates are kept only when the observed graph itself contains
// a self-loop. Output is sorted by (head, relation, tail) ids.
CandidateSet generate_candidates(const KnowledgeGraph& g, const ClusterMap& clusters,
                                 const PairAssignment& pairs, const GenOptions& opts = {});

// |referenced entities|^2 * |referenced relations| without materializing.
std::uint64_t exhaustive_candidate_count(const KnowledgeGraph& g);

// Lazy enumeration of every (h, r, t) over referenced entities/relations in
// ascending (h, r, t) id order, skipping observed triples. Construction
// throws CapExceeded when the full count (before exclusion) exceeds cap.
class ExhaustiveStream {
public:
    explicit ExhaustiveStream(const KnowledgeGraph& g, std::uint64_t cap = 10'000'000);
    bool next(Triple& out);

private:
    const KnowledgeGraph& g_;
    std::vector<EntityId> entities_;
    std::vector<RelationId> relations_;
    std::size_t hi_ = 0, ri_ = 0, ti_ = 0;
};

struct CoverageReport {
    std::uint64_t candidate_count = 0;
    std::uint64_t missing_count = 0;
    std::uint64_t recovered_count = 0;
    double recovered_ratio = 1.0;  // 1.0 by convention when nothing was removed
    std::uint64_t exhaustive_count = 0;
    std::uint64_t exhaustive_recoverable_count = 0;
    double exhaustive_recoverable_ratio = 1.0;
};

CoverageReport coverage(const CandidateSet& candidates, std::span<const Triple> removed,
                        const KnowledgeGraph& observed);

}  // namespace omnia
