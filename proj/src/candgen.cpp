#include "omnia/candgen.hpp"

#include <algorithm>
#include <unordered_map>

namespace omnia {

namespace {

struct PairKeyHash {
    std::size_t operator()(const PairKey& k) const noexcept {
        return static_cast<std::size_t>(
            mix64((static_cast<std::uint64_t>(k.relation) << 32) | k.tail));
    }
};

}  // namespace

std::span<const EntityId> ClusterMap::members(std::size_t cid) const {
    return {members_.data() + member_offsets_[cid],
            members_.data() + member_offsets_[cid + 1]};
}

std::optional<std::size_t> ClusterMap::find(const PairKey& key) const {
    for (std::size_t cid = 0; cid < keys_.size(); ++cid)
        if (keys_[cid] == key) return cid;
    return std::nullopt;
}

std::span<const std::uint32_t> ClusterMap::pairs_of_head(EntityId head) const {
    if (head + 1 >= head_offsets_.size()) return {};
    return {head_pairs_.data() + head_offsets_[head],
            head_pairs_.data() + head_offsets_[head + 1]};
}

ClusterMap cluster_heads(const KnowledgeGraph& g) {
    ClusterMap map;
    std::unordered_map<PairKey, std::uint32_t, PairKeyHash> ids;
    ids.reserve(g.size());

    // Pass 1: assign pair ids in first-occurrence order, count sizes.
    std::vector<std::uint32_t> cluster_size;
    std::vector<std::uint32_t> head_degree(g.entity_count(), 0);
    std::vector<std::uint32_t> triple_pair(g.size());
    for (std::size_t i = 0; i < g.triples().size(); ++i) {
        const Triple& t = g.triples()[i];
        PairKey key{t.relation, t.tail};
        auto [it, inserted] = ids.emplace(key, static_cast<std::uint32_t>(map.keys_.size()));
        if (inserted) {
            map.keys_.push_back(key);
            cluster_size.push_back(0);
        }
        triple_pair[i] = it->second;
        ++cluster_size[it->second];
        ++head_degree[t.head];
    }

    // Pass 2: fill CSR member lists (triple-stream order within a cluster)
    // and per-head pair lists.
    map.member_offsets_.assign(map.keys_.size() + 1, 0);
    for (std::size_t c = 0; c < cluster_size.size(); ++c)
        map.member_offsets_[c + 1] = map.member_offsets_[c] + cluster_size[c];
    map.members_.resize(g.size());

    map.head_offsets_.assign(g.entity_count() + 1, 0);
    for (std::size_t e = 0; e < g.entity_count(); ++e)
        map.head_offsets_[e + 1] = map.head_offsets_[e] + head_degree[e];
    map.head_pairs_.resize(g.size());

    std::vector<std::uint32_t> member_fill(map.keys_.size(), 0);
    std::vector<std::uint32_t> head_fill(g.entity_count(), 0);
    for (std::size_t i = 0; i < g.triples().size(); ++i) {
        const Triple& t = g.triples()[i];
        const std::uint32_t c = triple_pair[i];
        map.members_[map.member_offsets_[c] + member_fill[c]++] = t.head;
        map.head_pairs_[map.head_offsets_[t.head] + head_fill[t.head]++] = c;
    }

    map.heads_in_order_.reserve(g.entity_count());
    for (EntityId e = 0; e < g.entity_count(); ++e)
        if (head_degree[e] > 0) map.heads_in_order_.push_back(e);
    return map;
}

std::span<const std::uint32_t> PairAssignment::pair_ids(std::size_t cid) const {
    return {pairs_.data() + offsets_[cid], pairs_.data() + offsets_[cid + 1]};
}

PairAssignment collect_pairs(const KnowledgeGraph&, const ClusterMap& clusters,
                             PairScope scope) {
    PairAssignment pa;
    pa.scope_ = scope;
    const std::size_t nc = clusters.cluster_count();
    pa.offsets_.assign(nc + 1, 0);

    if (scope == PairScope::ClusterLocal) {
        pa.pairs_.resize(nc);
        for (std::size_t c = 0; c < nc; ++c) {
            pa.offsets_[c + 1] = c + 1;
            pa.pairs_[c] = static_cast<std::uint32_t>(c);
        }
        return pa;
    }

    // Member-global: union the pair lists of every member head. Stamp array
    // keeps the union linear in the lists traversed.
    std::vector<std::uint32_t> stamp(nc, UINT32_MAX);
    std::vector<std::uint32_t> scratch;
    for (std::size_t c = 0; c < nc; ++c) {
        scratch.clear();
        for (EntityId h : clusters.members(c)) {
            for (std::uint32_t pid : clusters.pairs_of_head(h)) {
                if (stamp[pid] != c) {
                    stamp[pid] = static_cast<std::uint32_t>(c);
                    scratch.push_back(pid);
                }
            }
        }
        std::sort(scratch.begin(), scratch.end());
        pa.offsets_[c + 1] = pa.offsets_[c] + scratch.size();
        pa.pairs_.insert(pa.pairs_.end(), scratch.begin(), scratch.end());
    }
    return pa;
}

CandidateSet generate_candidates(const KnowledgeGraph& g, const ClusterMap& clusters,
                                 const PairAssignment& pairs, const GenOptions& opts) {
    CandidateSet out;
    out.scope_ = pairs.scope();
    const std::size_t nc = clusters.cluster_count();
    const bool keep_self_loops = g.has_self_loop();

    for (std::size_t c = 0; c < nc; ++c)
        out.stats_.raw_combinations +=
            static_cast<std::uint64_t>(clusters.members(c).size()) * pairs.pair_ids(c).size();

    // Pair ranks so per-head output can be emitted in (relation, tail) id
    // order without comparing keys repeatedly.
    std::vector<std::uint32_t> order(nc);
    for (std::size_t i = 0; i < nc; ++i) order[i] = static_cast<std::uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return clusters.key(a) < clusters.key(b);
    });
    std::vector<std::uint32_t> rank(nc);
    for (std::size_t i = 0; i < nc; ++i) rank[order[i]] = static_cast<std::uint32_t>(i);

    // Per-head union of its clusters' pair lists. Stamp values: own pair
    // (excluded) or index into the head's local emission list.
    constexpr std::uint32_t kOwn = UINT32_MAX - 1;
    std::vector<std::uint32_t> stamp(nc, UINT32_MAX);
    std::vector<std::uint32_t> stamp_epoch(nc, UINT32_MAX);
    std::uint32_t epoch = 0;
    std::vector<std::uint32_t> local;  // pair ids emitted for this head
    std::vector<std::vector<std::uint32_t>> local_prov;

    for (EntityId h : clusters.heads()) {
        ++epoch;
        local.clear();
        if (opts.record_provenance) local_prov.clear();

        auto own = clusters.pairs_of_head(h);
        for (std::uint32_t pid : own) {
            stamp_epoch[pid] = epoch;
            stamp[pid] = kOwn;
        }
        out.stats_.union_operations += own.size();

        for (std::uint32_t cid : own) {
            for (std::uint32_t pid : pairs.pair_ids(cid)) {
                ++out.stats_.union_operations;
                if (stamp_epoch[pid] != epoch) {
                    stamp_epoch[pid] = epoch;
                    stamp[pid] = static_cast<std::uint32_t>(local.size());
                    local.push_back(pid);
                    if (opts.record_provenance) local_prov.push_back({cid});
                } else if (opts.record_provenance && stamp[pid] != kOwn) {
                    local_prov[stamp[pid]].push_back(cid);
                }
            }
        }

        out.stats_.emissions += local.size();

        // Emit in pair-rank order; head-major loop keeps the global output
        // sorted by (head, relation, tail).
        std::vector<std::uint32_t> idx(local.size());
        for (std::uint32_t i = 0; i < local.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
            return rank[local[a]] < rank[local[b]];
        });
        for (std::uint32_t i : idx) {
            const PairKey& key = clusters.key(local[i]);
            if (key.tail == h && !keep_self_loops) continue;
            out.triples_.push_back(Triple{h, key.relation, key.tail});
            if (opts.record_provenance) out.provenance_.push_back(std::move(local_prov[i]));
        }
    }
    return out;
}

bool CandidateSet::contains(const Triple& t) const {
    return std::binary_search(triples_.begin(), triples_.end(), t);
}

std::uint64_t exhaustive_candidate_count(const KnowledgeGraph& g) {
    GraphStats s = graph_stats(g, /*restrict_to_referenced=*/true);
    const auto e = static_cast<std::uint64_t>(s.unique_entities);
    const auto r = static_cast<std::uint64_t>(s.unique_relations);
    return e * e * r;
}

ExhaustiveStream::ExhaustiveStream(const KnowledgeGraph& g, std::uint64_t cap) : g_(g) {
    const std::uint64_t count = exhaustive_candidate_count(g);
    if (count > cap) throw CapExceeded(count, cap);
    auto ents = referenced_entities(g);
    auto rels = referenced_relations(g);
    for (EntityId e = 0; e < ents.size(); ++e)
        if (ents[e]) entities_.push_back(e);
    for (RelationId r = 0; r < rels.size(); ++r)
        if (rels[r]) relations_.push_back(r);
}

bool ExhaustiveStream::next(Triple& out) {
    while (hi_ < entities_.size()) {
        Triple t{entities_[hi_], relations_[ri_], entities_[ti_]};
        if (++ti_ == entities_.size()) {
            ti_ = 0;
            if (++ri_ == relations_.size()) {
                ri_ = 0;
                ++hi_;
            }
        }
        if (!g_.contains(t)) {
            out = t;
            return true;
        }
    }
    return false;
}

CoverageReport coverage(const CandidateSet& candidates, std::span<const Triple> removed,
                        const KnowledgeGraph& observed) {
    CoverageReport report;
    report.candidate_count = candidates.size();
    report.missing_count = removed.size();
    report.exhaustive_count = exhaustive_candidate_count(observed);

    if (removed.empty()) return report;  // ratios stay 1.0 by convention

    auto ents = referenced_entities(observed);
    auto rels = referenced_relations(observed);
    for (const Triple& t : removed) {
        if (candidates.contains(t)) ++report.recovered_count;
        if (ents[t.head] && ents[t.tail] && rels[t.relation])
            ++report.exhaustive_recoverable_count;
    }
    report.recovered_ratio = static_cast<double>(report.recovered_count) /
                             static_cast<double>(removed.size());
    report.exhaustive_recoverable_ratio =
        static_cast<double>(report.exhaustive_recoverable_count) /
        static_cast<double>(removed.size());
    return report;
}

}  // namespace omnia
