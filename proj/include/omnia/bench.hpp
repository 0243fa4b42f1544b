#pragma once

// Wall-clock scaling harness: candidate generation and embedding-filter
// timing over seeded subsamples of one graph.

#include <cstdint>
#include <span>
#include <vector>

#include "omnia/kge.hpp"
#include "omnia/kg.hpp"

namespace omnia {

struct ScalingRow {
    std::size_t sample_triples = 0;
    double generate_seconds = 0.0;
    double filter_seconds = 0.0;
    std::uint64_t candidate_count = 0;
};

// Seeded uniform subsample of n triples, original stream order preserved.
// n >= size returns the whole graph.
KnowledgeGraph subsample_graph(const KnowledgeGraph& g, std::size_t n, std::uint64_t seed);

struct SweepOptions {
    std::uint64_t seed = 0;
    Hyperparams hp;                      // dim/batch sizing for the filter model
    std::uint64_t train_updates = 20000;  // fixed training budget per sample
    std::size_t score_cap = 200000;       // candidates scored per sample
};

// Per size: generation time is clustering + pair collection + generation;
// filter time is fixed-budget training plus scoring of min(score_cap,
// candidates). The training budget is held constant across sizes so filter
// cost tracks the model, not the corpus.
std::vector<ScalingRow> generation_filter_sweep(const KnowledgeGraph& g,
                                                std::span<const std::size_t> sizes,
                                                const SweepOptions& opts);

}  // namespace omnia
