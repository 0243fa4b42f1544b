#pragma once

// Deterministic synthetic graph generators. random_graph drives property
// tests; block_graph builds community-structured graphs whose clustering
// behaviour resembles curated encyclopedic KGs; codexm_like is a calibrated
// benchmark-scale preset (16,759 entities / 49 relations / 60,000 triples)
// used by the large-scale regression tests and the CLI synth command.

#include <cstdint>

#include "omnia/kg.hpp"

namespace omnia::synth {

struct RandomGraphParams {
    std::size_t max_entities = 30;
    std::size_t max_relations = 5;
    std::size_t max_triples = 200;
    bool allow_self_loops = false;
};

KnowledgeGraph random_graph(const RandomGraphParams& params, std::uint64_t seed);

struct BlockGraphParams {
    std::uint32_t types = 12;                // disjoint communities
    std::uint32_t heads_per_type = 810;      // multi-pair heads
    std::uint32_t rare_heads_per_type = 136; // heads carrying only the anchor pair
    std::uint32_t tails_per_type = 450;
    std::uint32_t relations_per_type = 4;    // slot 0 doubles as the anchor relation
    std::uint32_t subpools_per_type = 6;     // head affinity groups over the pair pool
    std::uint32_t pool_pairs_per_type = 1071;  // anchor + regular pairs
    std::uint32_t picks_per_head = 5;        // non-anchor pairs per full head
    double zipf_alpha = 1.1;                 // pair popularity skew inside a subpool
    double cross_subpool_rate = 0.10;        // chance a pick hops to a foreign subpool
    double cross_type_rate = 0.0;            // chance a pick lands in the partner type's pool
    std::uint32_t cross_anchor_heads = 0;    // leading full heads also carrying the partner anchor
    std::uint32_t hub_pairs = 1;             // anchor pairs per type; heads alternate hubs
    std::uint32_t dual_hub_heads = 0;        // trailing full heads carrying every hub pair
    std::uint32_t entity_pad = 0;            // extra tails appended to type 0
    std::uint32_t extra_picks = 0;           // additional picks dealt round-robin
    bool rare_relation = false;              // one relation carried by exactly 2 triples
};

KnowledgeGraph block_graph(const BlockGraphParams& params, std::uint64_t seed);

// Benchmark-scale preset with frozen calibration constants.
KnowledgeGraph codexm_like();

// Seed whose 20% split of codexm_like() is used by the regression suite.
std::uint64_t codexm_split_seed();

// Small presets for fast end-to-end runs.
KnowledgeGraph small_block_graph(std::uint64_t seed);  // ~2k triples
KnowledgeGraph dense_random_graph(std::uint64_t seed); // ~1.5k triples, 40 entities

}  // namespace omnia::synth
