#include "omnia/bench.hpp"

#include <algorithm>
#include <chrono>

#include "omnia/candgen.hpp"
#include "omnia/rng.hpp"

namespace omnia {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

KnowledgeGraph subsample_graph(const KnowledgeGraph& g, std::size_t n, std::uint64_t seed) {
    const auto& triples = g.triples();
    std::vector<std::uint32_t> order(triples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);

    const std::size_t take = std::min(n, order.size());
    SplitMix64 rng(derive_seed(seed, take));
    rng.partial_shuffle(order, take);
    order.resize(take);
    std::sort(order.begin(), order.end());

    KnowledgeGraph out;
    for (std::uint32_t idx : order) {
        const Triple& t = triples[idx];
        out.add_triple(g.entity_label(t.head), g.relation_label(t.relation),
                       g.entity_label(t.tail));
    }
    return out;
}

std::vector<ScalingRow> generation_filter_sweep(const KnowledgeGraph& g,
                                                std::span<const std::size_t> sizes,
                                                const SweepOptions& opts) {
    std::vector<ScalingRow> rows;
    rows.reserve(sizes.size());
    for (const std::size_t n : sizes) {
        const KnowledgeGraph sample = subsample_graph(g, n, opts.seed);

        ScalingRow row;
        row.sample_triples = sample.size();

        auto t0 = std::chrono::steady_clock::now();
        const ClusterMap clusters = cluster_heads(sample);
        const PairAssignment pairs = collect_pairs(sample, clusters, PairScope::MemberGlobal);
        const CandidateSet cands = generate_candidates(sample, clusters, pairs);
        row.generate_seconds = seconds_since(t0);
        row.candidate_count = cands.size();

        t0 = std::chrono::steady_clock::now();
        TrainOptions topts;
        topts.max_updates = opts.train_updates;
        Hyperparams hp = opts.hp;
        hp.epochs = std::max<std::uint32_t>(
            hp.epochs, static_cast<std::uint32_t>(
                           opts.train_updates / std::max<std::size_t>(sample.size(), 1) + 2));
        const EmbeddingModel model =
            train(sample, ModelKind::TransE, hp, derive_seed(opts.seed, n));
        const std::size_t to_score = std::min(opts.score_cap, cands.size());
        volatile double sink = 0;
        for (std::size_t i = 0; i < to_score; ++i)
            sink = sink + distance_score(model, cands.triples()[i]);
        row.filter_seconds = seconds_since(t0);

        rows.push_back(row);
    }
    return rows;
}

}  // namespace omnia
