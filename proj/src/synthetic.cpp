#include "omnia/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "omnia/candgen.hpp"
#include "omnia/rng.hpp"

namespace omnia::synth {

namespace {

std::string entity_name(std::size_t i) { return "e" + std::to_string(i); }
std::string relation_name(std::size_t i) { return "r" + std::to_string(i); }

// One community: heads pick (relation, tail) pairs from a pooled menu with
// subpool affinity. Pair j of a subpool uses tail (j % tails) and relation
// slot (j / tails), so every subpool tail is covered by the popular band.
struct TypeLayout {
    std::uint32_t first_head = 0;
    std::uint32_t first_rare = 0;
    std::uint32_t first_tail = 0;
    std::uint32_t tail_count = 0;
    std::uint32_t first_relation = 0;

    std::vector<PairKey> pool;                  // pool[0] is the anchor pair
    std::vector<std::uint32_t> subpool_begin;   // index ranges into pool
    std::vector<std::uint32_t> subpool_end;
    std::vector<std::vector<double>> cumweight; // per subpool, Zipf cumulative
};

std::uint32_t sample_pool_index(const TypeLayout& ty, std::uint32_t subpool, SplitMix64& rng) {
    const auto& cw = ty.cumweight[subpool];
    const double u = rng.unit() * cw.back();
    const auto it = std::upper_bound(cw.begin(), cw.end(), u);
    const auto off = static_cast<std::uint32_t>(it - cw.begin());
    const std::uint32_t idx = ty.subpool_begin[subpool] + std::min(off,
        static_cast<std::uint32_t>(cw.size() - 1));
    return idx;
}

}  // namespace

KnowledgeGraph random_graph(const RandomGraphParams& params, std::uint64_t seed) {
    SplitMix64 rng(seed);
    const std::size_t n_e = 2 + rng.below(params.max_entities > 2 ? params.max_entities - 1 : 1);
    const std::size_t n_r = 1 + rng.below(params.max_relations);
    const std::size_t target = 1 + rng.below(params.max_triples);

    KnowledgeGraph g;
    for (std::size_t i = 0; i < n_e; ++i) g.intern_entity(entity_name(i));
    for (std::size_t i = 0; i < n_r; ++i) g.intern_relation(relation_name(i));

    std::size_t added = 0;
    for (std::size_t attempt = 0; attempt < target * 4 && added < target; ++attempt) {
        Triple t{static_cast<EntityId>(rng.below(n_e)),
                 static_cast<RelationId>(rng.below(n_r)),
                 static_cast<EntityId>(rng.below(n_e))};
        if (t.head == t.tail && !params.allow_self_loops) continue;
        if (g.add_triple(t)) ++added;
    }
    return g;
}

KnowledgeGraph block_graph(const BlockGraphParams& p, std::uint64_t seed) {
    if (p.types == 0 || p.heads_per_type == 0 || p.hub_pairs == 0 ||
        p.tails_per_type < p.hub_pairs + 1 || p.relations_per_type == 0 ||
        p.subpools_per_type == 0 ||
        p.pool_pairs_per_type < p.subpools_per_type + p.hub_pairs)
        throw ConfigError("block_graph: degenerate parameters");

    SplitMix64 rng(seed);
    KnowledgeGraph g;

    const std::uint32_t per_type_entities =
        p.heads_per_type + p.rare_heads_per_type + p.tails_per_type;

    // Intern every entity up front in global-index order.
    std::uint32_t total_entities = p.types * per_type_entities + p.entity_pad;
    for (std::uint32_t i = 0; i < total_entities; ++i) g.intern_entity(entity_name(i));
    const std::uint32_t regular_relations = p.types * p.relations_per_type;
    for (std::uint32_t i = 0; i < regular_relations + (p.rare_relation ? 1u : 0u); ++i)
        g.intern_relation(relation_name(i));

    // Lay out types and their pair pools.
    std::vector<TypeLayout> types(p.types);
    for (std::uint32_t ti = 0; ti < p.types; ++ti) {
        TypeLayout& ty = types[ti];
        const std::uint32_t base = ti * per_type_entities;
        ty.first_head = base;
        ty.first_rare = base + p.heads_per_type;
        ty.first_tail = base + p.heads_per_type + p.rare_heads_per_type;
        ty.tail_count = p.tails_per_type + (ti == 0 ? p.entity_pad : 0);
        ty.first_relation = ti * p.relations_per_type;
        if (ti == 0 && p.entity_pad > 0) {
            // Padding tails live at the end of the global id space but belong
            // to type 0's pool. Represent them via an index remap below.
        }

        // Hub pairs occupy the leading tails; heads alternate between them.
        for (std::uint32_t j = 0; j < p.hub_pairs; ++j)
            ty.pool.push_back(PairKey{ty.first_relation, ty.first_tail + j});

        // Non-hub tails, strided over subpools. Padding tails (type 0)
        // are appended after the type's own tail block.
        std::vector<std::uint32_t> tail_ids;
        for (std::uint32_t t = p.hub_pairs; t < p.tails_per_type; ++t)
            tail_ids.push_back(ty.first_tail + t);
        if (ti == 0)
            for (std::uint32_t t = 0; t < p.entity_pad; ++t)
                tail_ids.push_back(p.types * per_type_entities + t);

        std::vector<std::vector<std::uint32_t>> subpool_tails(p.subpools_per_type);
        for (std::size_t i = 0; i < tail_ids.size(); ++i)
            subpool_tails[i % p.subpools_per_type].push_back(tail_ids[i]);

        const std::uint32_t regular_pairs = p.pool_pairs_per_type - p.hub_pairs;
        ty.subpool_begin.resize(p.subpools_per_type);
        ty.subpool_end.resize(p.subpools_per_type);
        ty.cumweight.resize(p.subpools_per_type);
        for (std::uint32_t sp = 0; sp < p.subpools_per_type; ++sp) {
            std::uint32_t count = regular_pairs / p.subpools_per_type +
                                  (sp < regular_pairs % p.subpools_per_type ? 1 : 0);
            const auto& tails = subpool_tails[sp];
            const auto max_count = static_cast<std::uint32_t>(tails.size()) * p.relations_per_type;
            count = std::min(count, max_count);
            ty.subpool_begin[sp] = static_cast<std::uint32_t>(ty.pool.size());
            const auto n_tails = static_cast<std::uint32_t>(tails.size());
            for (std::uint32_t j = 0; j < count; ++j) {
                // Slot 0 covers every tail first; later pairs interleave the
                // remaining relation slots so all slots appear in small pools.
                std::uint32_t slot = 0, tail = j;
                if (j >= n_tails) {
                    const std::uint32_t k = j - n_tails;
                    slot = 1 + k % (p.relations_per_type - 1);
                    tail = k / (p.relations_per_type - 1);
                }
                ty.pool.push_back(PairKey{ty.first_relation + slot, tails[tail]});
            }
            ty.subpool_end[sp] = static_cast<std::uint32_t>(ty.pool.size());
            auto& cw = ty.cumweight[sp];
            cw.resize(count);
            double acc = 0.0;
            for (std::uint32_t j = 0; j < count; ++j) {
                acc += std::pow(static_cast<double>(j + 1), -p.zipf_alpha);
                cw[j] = acc;
            }
        }
    }

    // Sample picks per head. A pick references a pair in some type's pool;
    // with cross_type_rate it lands in the partner type's pool instead.
    struct PickRef {
        std::uint32_t type;
        std::uint32_t idx;
        bool operator==(const PickRef&) const = default;
    };

    const std::uint32_t total_heads = p.types * p.heads_per_type;
    std::vector<std::vector<PickRef>> picks(total_heads);
    std::vector<std::vector<std::uint32_t>> pool_mult(p.types);
    for (std::uint32_t ti = 0; ti < p.types; ++ti)
        pool_mult[ti].assign(types[ti].pool.size(), 0);

    auto head_owns = [&](std::uint32_t head_slot, PickRef pr) {
        const auto& v = picks[head_slot];
        return std::find(v.begin(), v.end(), pr) != v.end();
    };

    auto draw_pick = [&](std::uint32_t ti, std::uint32_t head_slot, std::uint32_t subpool) {
        std::uint32_t tj = ti;
        if (p.cross_type_rate > 0.0 && rng.unit() < p.cross_type_rate) {
            const std::uint32_t partner = ti ^ 1u;
            if (partner < p.types) tj = partner;
        }
        TypeLayout& ty = types[tj];
        std::uint32_t sp = subpool;
        if (p.subpools_per_type > 1 && rng.unit() < p.cross_subpool_rate)
            sp = (subpool + 1 + static_cast<std::uint32_t>(rng.below(p.subpools_per_type - 1))) %
                 p.subpools_per_type;
        for (int attempt = 0; attempt < 16; ++attempt) {
            std::uint32_t idx = sample_pool_index(ty, sp, rng);
            if (!head_owns(head_slot, PickRef{tj, idx})) return PickRef{tj, idx};
        }
        // Fall back to the first unowned pair of the subpool.
        for (std::uint32_t idx = ty.subpool_begin[sp]; idx < ty.subpool_end[sp]; ++idx)
            if (!head_owns(head_slot, PickRef{tj, idx})) return PickRef{tj, idx};
        return PickRef{tj, ty.subpool_begin[sp]};  // saturated head; duplicate dropped later
    };

    for (std::uint32_t ti = 0; ti < p.types; ++ti) {
        for (std::uint32_t h = 0; h < p.heads_per_type; ++h) {
            const std::uint32_t head_slot = ti * p.heads_per_type + h;
            const std::uint32_t subpool = h % p.subpools_per_type;
            for (std::uint32_t k = 0; k < p.picks_per_head; ++k) {
                PickRef pr = draw_pick(ti, head_slot, subpool);
                if (head_owns(head_slot, pr)) continue;
                picks[head_slot].push_back(pr);
                ++pool_mult[pr.type][pr.idx];
            }
        }
    }

    // Extra picks dealt round-robin to keep the triple budget exact.
    for (std::uint32_t k = 0; k < p.extra_picks; ++k) {
        const std::uint32_t head_slot = k % total_heads;
        const std::uint32_t ti = head_slot / p.heads_per_type;
        const std::uint32_t subpool = (head_slot % p.heads_per_type) % p.subpools_per_type;
        PickRef pr = draw_pick(ti, head_slot, subpool);
        if (head_owns(head_slot, pr)) continue;
        picks[head_slot].push_back(pr);
        ++pool_mult[pr.type][pr.idx];
    }

    // Repair passes keep every pool pair, tail, and relation referenced:
    // swap a pick whose pair can spare a copy onto the missing target.
    // Donors are scanned starting at the pool's own heads; cross-type picks
    // held by other heads qualify as well.
    auto donor_swap_min = [&](std::uint32_t ti, std::uint32_t target_idx,
                              std::uint32_t donor_min) {
        for (std::uint32_t k = 0; k < total_heads; ++k) {
            const std::uint32_t head_slot = (ti * p.heads_per_type + k) % total_heads;
            auto& v = picks[head_slot];
            for (auto& pk : v) {
                if (pk.type != ti) continue;
                if (pool_mult[ti][pk.idx] >= donor_min &&
                    !head_owns(head_slot, PickRef{ti, target_idx})) {
                    --pool_mult[ti][pk.idx];
                    pk.idx = target_idx;
                    ++pool_mult[ti][target_idx];
                    return true;
                }
            }
        }
        return false;
    };
    auto donor_swap = [&](std::uint32_t ti, std::uint32_t target_idx) {
        return donor_swap_min(ti, target_idx, 2);
    };

    // Coverage passes: recycle duplicate picks so every pool pair is drawn,
    // then lift the sole pick of a single-pair tail to multiplicity two. The
    // realized pair vocabulary then tracks the configured pool size, and no
    // tail rides on one removable triple.
    for (std::uint32_t ti = 0; ti < p.types; ++ti) {
        const TypeLayout& ty = types[ti];
        for (std::uint32_t idx = p.hub_pairs; idx < ty.pool.size(); ++idx)
            if (pool_mult[ti][idx] == 0) donor_swap(ti, idx);
        std::unordered_map<std::uint32_t, std::uint32_t> tail_mult;
        for (std::uint32_t idx = p.hub_pairs; idx < ty.pool.size(); ++idx)
            tail_mult[ty.pool[idx].tail] += pool_mult[ti][idx];
        for (std::uint32_t idx = p.hub_pairs; idx < ty.pool.size(); ++idx)
            if (pool_mult[ti][idx] == 1 && tail_mult[ty.pool[idx].tail] == 1)
                if (donor_swap_min(ti, idx, 3)) ++tail_mult[ty.pool[idx].tail];
    }

    for (std::uint32_t ti = 0; ti < p.types; ++ti) {
        TypeLayout& ty = types[ti];
        std::vector<bool> tail_ref(total_entities, false);
        std::vector<bool> rel_ref(p.relations_per_type, false);
        for (std::uint32_t j = 0; j < p.hub_pairs; ++j)
            tail_ref[ty.pool[j].tail] = true;  // hub tails, referenced by every head
        rel_ref[0] = true;
        for (std::uint32_t idx = p.hub_pairs; idx < ty.pool.size(); ++idx) {
            if (pool_mult[ti][idx] == 0) continue;
            tail_ref[ty.pool[idx].tail] = true;
            rel_ref[ty.pool[idx].relation - ty.first_relation] = true;
        }
        for (std::uint32_t idx = p.hub_pairs; idx < ty.pool.size(); ++idx) {
            if (!tail_ref[ty.pool[idx].tail]) {
                if (donor_swap(ti, idx)) tail_ref[ty.pool[idx].tail] = true;
            }
        }
        for (std::uint32_t slot = 0; slot < p.relations_per_type; ++slot) {
            if (rel_ref[slot]) continue;
            for (std::uint32_t idx = p.hub_pairs; idx < ty.pool.size(); ++idx) {
                if (ty.pool[idx].relation == ty.first_relation + slot) {
                    if (donor_swap(ti, idx)) {
                        rel_ref[slot] = true;
                        break;
                    }
                }
            }
        }
    }

    // Emit triples: per type, full heads (hub then picks), then rare heads.
    // Heads rotate over hub pairs; the leading cross_anchor_heads full heads
    // also carry one of the partner type's hubs, bridging the hub clusters.
    auto hub_of = [&](std::uint32_t h) {
        return (h / p.subpools_per_type) % p.hub_pairs;  // decoupled from subpool
    };
    for (std::uint32_t ti = 0; ti < p.types; ++ti) {
        TypeLayout& ty = types[ti];
        const std::uint32_t partner = ti ^ 1u;
        for (std::uint32_t h = 0; h < p.heads_per_type; ++h) {
            const EntityId head = ty.first_head + h;
            if (h + p.dual_hub_heads >= p.heads_per_type) {
                for (std::uint32_t j = 0; j < p.hub_pairs; ++j)
                    g.add_triple(Triple{head, ty.pool[j].relation, ty.pool[j].tail});
            } else {
                const PairKey& hub = ty.pool[hub_of(h)];
                g.add_triple(Triple{head, hub.relation, hub.tail});
            }
            if (h < p.cross_anchor_heads && partner < p.types) {
                const PairKey& pa = types[partner].pool[hub_of(h)];
                g.add_triple(Triple{head, pa.relation, pa.tail});
            }
            for (const auto& pk : picks[ti * p.heads_per_type + h]) {
                const PairKey& pair = types[pk.type].pool[pk.idx];
                g.add_triple(Triple{head, pair.relation, pair.tail});
            }
        }
        for (std::uint32_t h = 0; h < p.rare_heads_per_type; ++h) {
            const EntityId head = ty.first_rare + h;
            const PairKey& hub = ty.pool[hub_of(h)];
            g.add_triple(Triple{head, hub.relation, hub.tail});
        }
    }

    if (p.rare_relation) {
        const RelationId rare = regular_relations;
        g.add_triple(Triple{types[0].first_head, rare, types[0].first_tail + 1});
        g.add_triple(Triple{types[0].first_head + 1, rare, types[0].first_tail + 2});
    }
    return g;
}

namespace {

BlockGraphParams codexm_params() {
    BlockGraphParams p;
    p.types = 16;
    p.heads_per_type = 520;
    p.rare_heads_per_type = 84;
    p.tails_per_type = 437;
    p.relations_per_type = 3;
    p.subpools_per_type = 6;
    p.pool_pairs_per_type = 860;
    p.picks_per_head = 5;
    p.zipf_alpha = 0.0;
    p.cross_subpool_rate = 0.10;
    p.cross_anchor_heads = 220;
    p.hub_pairs = 2;
    p.dual_hub_heads = 104;
    p.rare_relation = true;

    const std::uint32_t target_entities = 16759;
    const std::uint32_t target_triples = 60000;
    const std::uint32_t base_entities =
        p.types * (p.heads_per_type + p.rare_heads_per_type + p.tails_per_type);
    p.entity_pad = target_entities - base_entities;
    const std::uint32_t base_triples =
        p.types * (p.heads_per_type * (1 + p.picks_per_head) + p.rare_heads_per_type +
                   p.cross_anchor_heads + p.dual_hub_heads * (p.hub_pairs - 1)) + 2;
    p.extra_picks = target_triples - base_triples;
    return p;
}

constexpr std::uint64_t kCodexmSeed = 20240601;
constexpr std::uint64_t kCodexmSplitSeed = 2216;  // frozen after calibration

}  // namespace

KnowledgeGraph codexm_like() { return block_graph(codexm_params(), kCodexmSeed); }

std::uint64_t codexm_split_seed() { return kCodexmSplitSeed; }

KnowledgeGraph small_block_graph(std::uint64_t seed) {
    BlockGraphParams p;
    p.types = 4;
    p.heads_per_type = 80;
    p.rare_heads_per_type = 10;
    p.tails_per_type = 40;
    p.relations_per_type = 3;
    p.subpools_per_type = 3;
    p.pool_pairs_per_type = 100;
    p.picks_per_head = 5;
    p.zipf_alpha = 1.0;
    p.cross_subpool_rate = 0.10;
    return block_graph(p, seed);
}

KnowledgeGraph dense_random_graph(std::uint64_t seed) {
    SplitMix64 rng(seed);
    const std::size_t n_e = 40, n_r = 6;
    KnowledgeGraph g;
    for (std::size_t i = 0; i < n_e; ++i) g.intern_entity(entity_name(i));
    for (std::size_t i = 0; i < n_r; ++i) g.intern_relation(relation_name(i));

    const std::uint64_t space = n_e * n_r * n_e;
    const std::uint64_t want = 1200;
    // Floyd's sampling of distinct cells, then decode in draw order.
    std::unordered_set<std::uint64_t> chosen;
    std::vector<std::uint64_t> order;
    for (std::uint64_t j = space - want; j < space; ++j) {
        std::uint64_t t = rng.below(j + 1);
        if (!chosen.insert(t).second) {
            chosen.insert(j);
            t = j;
        }
        order.push_back(t);
    }
    for (std::uint64_t cell : order) {
        const auto h = static_cast<EntityId>(cell / (n_r * n_e));
        const auto r = static_cast<RelationId>((cell / n_e) % n_r);
        const auto t = static_cast<EntityId>(cell % n_e);
        if (h == t) continue;
        g.add_triple(Triple{h, r, t});
    }
    return g;
}

}  // namespace omnia::synth
