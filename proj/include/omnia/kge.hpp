#pragma once

// Knowledge graph embeddings: TransE, DistMult, ComplEx and RotatE with
// seeded mini-batch SGD training, a uniform lower-is-better scoring wrapper,
// data-driven filter threshold selection and a binary checkpoint format.
//
// Scoring conventions:
//   TransE   raw = ||h + r - t||_p            (lower is better)
//   DistMult raw = <h, r, t>                  (higher is better)
//   ComplEx  raw = Re<h, r, conj(t)>          (higher is better)
//   RotatE   raw = ||h o r - t||_2 over C^d   (lower is better)
// distance_score() flips the sign for DistMult/ComplEx so every model agrees
// that smaller means more plausible.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omnia/kg.hpp"

namespace omnia {

enum class ModelKind { TransE, DistMult, ComplEx, RotatE };

const char* model_kind_name(ModelKind kind);
std::optional<ModelKind> model_kind_from_name(std::string_view name);

struct Hyperparams {
    std::uint32_t dim = 128;
    std::uint32_t epochs = 100;
    double learning_rate = 0.01;
    double margin = 1.0;
    std::uint32_t negatives_per_positive = 1;
    std::uint32_t batch_size = 1024;
    int norm_order = 2;  // TransE distance norm, 1 or 2

    void validate() const;
};

class EmbeddingModel {
public:
    ModelKind kind = ModelKind::TransE;
    Hyperparams hp;
    std::uint64_t seed = 0;

    std::size_t entity_rows = 0;
    std::size_t relation_rows = 0;
    std::vector<double> entity_vec;    // entity_rows x entity_width
    std::vector<double> relation_vec;  // relation_rows x relation_width
    std::vector<double> epoch_losses;

    // ComplEx/RotatE entity rows hold the real plane then the imaginary one.
    std::uint32_t entity_width() const;
    // ComplEx relations are complex; RotatE relations are phase angles.
    std::uint32_t relation_width() const;

    std::span<const double> entity_row(EntityId id) const;
    std::span<double> entity_row(EntityId id);
    std::span<const double> relation_row(RelationId id) const;
    std::span<double> relation_row(RelationId id);
};

// Seeded deterministic initialization + training. Throws DegenerateGraph on
// an empty graph. Negative sampling corrupts over the whole entity table, so
// any entity row may receive gradients; relation rows without an observed
// triple keep their initialization values. max_updates > 0 caps the number
// of positive examples processed (timing harnesses); 0 means no cap.
struct TrainOptions {
    std::uint64_t max_updates = 0;
};

EmbeddingModel train(const KnowledgeGraph& g, ModelKind kind, const Hyperparams& hp,
                     std::uint64_t seed, const TrainOptions& opts = {});

// Model-native orientation (see table above).
double raw_score(const EmbeddingModel& m, const Triple& t);
// Uniform lower-is-better orientation.
double distance_score(const EmbeddingModel& m, const Triple& t);
void distance_scores(const EmbeddingModel& m, std::span<const Triple> triples,
                     std::span<double> out);

// Per-example margin/logistic loss and its analytic gradient, exposed so the
// finite-difference checks exercise the exact training path.
struct ExamplePair {
    Triple pos;
    Triple neg;
};

double example_loss(const EmbeddingModel& m, const ExamplePair& ex);

// Accumulates d(loss)/d(parameter) into dense mirrors of the two tables.
struct GradientTables {
    std::vector<double> entity;    // same layout as model.entity_vec
    std::vector<double> relation;  // same layout as model.relation_vec
};

void example_loss_grad(const EmbeddingModel& m, const ExamplePair& ex, GradientTables& grads);

struct LabeledTriple {
    Triple triple;
    bool positive = false;
};

enum class ThresholdRule { MedianPlus, MeanPlus, MedianMinus, MeanMinus };

const char* threshold_rule_name(ThresholdRule rule);

struct ThresholdSelection {
    // Order: median+offset, mean+offset, median-offset, mean-offset.
    std::array<double, 4> candidates{};
    ThresholdRule rule = ThresholdRule::MedianPlus;
    double threshold = 0.0;
    double validation_f1 = 0.0;
    double offset = 0.5;
};

// Scores the labeled validation set with distance_score and picks the rule
// whose threshold (retain iff score < tau) maximizes F1; ties prefer the
// smaller threshold. Throws DegenerateValidation when the set is empty or
// single-class.
ThresholdSelection select_filter_threshold(const EmbeddingModel& m,
                                           std::span<const LabeledTriple> validation,
                                           double offset = 0.5);

// Best F1 threshold over all midpoints of consecutive distinct scores plus
// the two infinities; ties prefer the smaller threshold.
double tune_classifier_threshold(const EmbeddingModel& m,
                                 std::span<const LabeledTriple> validation);

struct FilterReport {
    std::uint64_t before = 0;
    std::uint64_t after = 0;
    double reduction_ratio = 0.0;
    double threshold = 0.0;
    // Populated when the removed set is supplied: true candidates before and
    // after filtering.
    std::optional<std::uint64_t> true_candidates;
    std::optional<std::uint64_t> true_candidates_kept;
};

// Keeps candidates with distance_score < tau (strict).
std::vector<Triple> filter_candidates(const EmbeddingModel& m, std::span<const Triple> candidates,
                                      double tau, FilterReport* report = nullptr,
                                      const TripleSet* removed = nullptr);

void save_checkpoint(const EmbeddingModel& m, const std::filesystem::path& path);
EmbeddingModel load_checkpoint(const std::filesystem::path& path);

}  // namespace omnia
