#pragma once

// Labeled evaluation sets, confusion counts, classification metrics and
// multi-run aggregation.

#include <cstdint>
#include <span>
#include <vector>

#include "omnia/judge.hpp"
#include "omnia/kg.hpp"
#include "omnia/kge.hpp"

namespace omnia {

struct LabeledCandidate {
    Triple triple;
    bool missing_true = false;  // member of the removed set
};

// Unparseable verdicts are folded into the negative-decision cells (tn/fn)
// and counted separately.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t unparseable = 0;

    std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
};

struct MetricsReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t unparseable_count = 0;
    bool degenerate_precision = false;  // tp+fp = 0
    bool degenerate_recall = false;     // tp+fn = 0
    bool degenerate_f1 = false;         // precision+recall = 0
    ConfusionCounts counts;
};

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation, 0 for a single run
};

struct RunAggregate {
    std::vector<MetricsReport> runs;
    MetricSummary accuracy;
    MetricSummary precision;
    MetricSummary recall;
    MetricSummary f1;
};

// Exactly n/2 positives (members of removed) and n/2 negatives, sampled
// uniformly with the seed from the candidate list with exclude filtered out.
// Output is positives then negatives, each ascending by (h, r, t). Throws
// ConfigError on odd n, InsufficientPositives/InsufficientNegatives when a
// pool is too small.
std::vector<LabeledCandidate> sample_eval_set(std::span<const Triple> candidates,
                                              const TripleSet& removed, std::size_t n,
                                              std::uint64_t seed,
                                              const TripleSet* exclude = nullptr);

// Same contract as sample_eval_set on independent seed streams, so the two
// draws differ under one seed. Default n = 250.
std::vector<LabeledCandidate> build_validation_set(std::span<const Triple> candidates,
                                                   const TripleSet& removed, std::size_t n,
                                                   std::uint64_t seed,
                                                   const TripleSet* exclude = nullptr);

std::vector<LabeledTriple> to_labeled_triples(std::span<const LabeledCandidate> set);

ConfusionCounts confusion(std::span<const Verdict> verdicts,
                          std::span<const LabeledCandidate> labels);

// Standard formulas; zero-denominator precision/recall/F1 are 0 with the
// matching degenerate flag set. Throws EmptyEvaluation on zero total.
MetricsReport metrics(const ConfusionCounts& c);

// Means and sample standard deviations in repeat-index order.
RunAggregate aggregate(std::vector<MetricsReport> runs);

}  // namespace omnia
