#include "omnia/eval.hpp"

#include <algorithm>
#include <cmath>

#include "omnia/rng.hpp"

namespace omnia {

namespace {

std::vector<LabeledCandidate> sample_balanced(std::span<const Triple> candidates,
                                              const TripleSet& removed, std::size_t n,
                                              std::uint64_t pos_seed, std::uint64_t neg_seed,
                                              const TripleSet* exclude) {
    if (n == 0 || n % 2 != 0) throw ConfigError("sample size must be positive and even");
    const std::size_t half = n / 2;

    std::vector<Triple> positives, negatives;
    for (const Triple& t : candidates) {
        if (exclude && exclude->count(t) != 0) continue;
        (removed.count(t) != 0 ? positives : negatives).push_back(t);
    }
    if (positives.size() < half) throw InsufficientPositives(positives.size(), half);
    if (negatives.size() < half) throw InsufficientNegatives(negatives.size(), half);

    SplitMix64 pos_rng(pos_seed);
    pos_rng.partial_shuffle(positives, half);
    positives.resize(half);
    std::sort(positives.begin(), positives.end());

    SplitMix64 neg_rng(neg_seed);
    neg_rng.partial_shuffle(negatives, half);
    negatives.resize(half);
    std::sort(negatives.begin(), negatives.end());

    std::vector<LabeledCandidate> out;
    out.reserve(n);
    for (const Triple& t : positives) out.push_back({t, true});
    for (const Triple& t : negatives) out.push_back({t, false});
    return out;
}

}  // namespace

std::vector<LabeledCandidate> sample_eval_set(std::span<const Triple> candidates,
                                              const TripleSet& removed, std::size_t n,
                                              std::uint64_t seed, const TripleSet* exclude) {
    return sample_balanced(candidates, removed, n, derive_seed(seed, 0xE7A1),
                           derive_seed(seed, 0xE7A2), exclude);
}

std::vector<LabeledCandidate> build_validation_set(std::span<const Triple> candidates,
                                                   const TripleSet& removed, std::size_t n,
                                                   std::uint64_t seed, const TripleSet* exclude) {
    return sample_balanced(candidates, removed, n, derive_seed(seed, 0x7A11),
                           derive_seed(seed, 0x7A12), exclude);
}

std::vector<LabeledTriple> to_labeled_triples(std::span<const LabeledCandidate> set) {
    std::vector<LabeledTriple> out;
    out.reserve(set.size());
    for (const auto& lc : set) out.push_back({lc.triple, lc.missing_true});
    return out;
}

ConfusionCounts confusion(std::span<const Verdict> verdicts,
                          std::span<const LabeledCandidate> labels) {
    if (verdicts.size() != labels.size()) throw LengthMismatch(verdicts.size(), labels.size());

    ConfusionCounts c;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        const bool accepted = verdicts[i].decision == Decision::True;
        if (verdicts[i].decision == Decision::Unparseable) ++c.unparseable;
        if (accepted && labels[i].missing_true) ++c.tp;
        else if (accepted && !labels[i].missing_true) ++c.fp;
        else if (!accepted && labels[i].missing_true) ++c.fn;
        else ++c.tn;
    }
    return c;
}

MetricsReport metrics(const ConfusionCounts& c) {
    const std::uint64_t total = c.total();
    if (total == 0) throw EmptyEvaluation();

    MetricsReport r;
    r.counts = c;
    r.unparseable_count = c.unparseable;
    r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);

    if (c.tp + c.fp > 0)
        r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    else
        r.degenerate_precision = true;

    if (c.tp + c.fn > 0)
        r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    else
        r.degenerate_recall = true;

    if (r.precision + r.recall > 0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    else
        r.degenerate_f1 = true;
    return r;
}

RunAggregate aggregate(std::vector<MetricsReport> runs) {
    if (runs.empty()) throw EmptyEvaluation();

    auto summarize = [&](auto getter) {
        MetricSummary s;
        const double n = static_cast<double>(runs.size());
        for (const auto& r : runs) s.mean += getter(r);
        s.mean /= n;
        if (runs.size() > 1) {
            double ss = 0;
            for (const auto& r : runs) {
                const double d = getter(r) - s.mean;
                ss += d * d;
            }
            s.stddev = std::sqrt(ss / (n - 1.0));
        }
        return s;
    };

    RunAggregate agg;
    agg.accuracy = summarize([](const MetricsReport& r) { return r.accuracy; });
    agg.precision = summarize([](const MetricsReport& r) { return r.precision; });
    agg.recall = summarize([](const MetricsReport& r) { return r.recall; });
    agg.f1 = summarize([](const MetricsReport& r) { return r.f1; });
    agg.runs = std::move(runs);
    return agg;
}

}  // namespace omnia
