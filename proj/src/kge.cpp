#include "omnia/kge.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "omnia/rng.hpp"

namespace omnia {

namespace {

constexpr double kPi = 3.14159265358979323846;

double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::TransE: return "transe";
        case ModelKind::DistMult: return "distmult";
        case ModelKind::ComplEx: return "complex";
        case ModelKind::RotatE: return "rotate";
    }
    return "unknown";
}

std::optional<ModelKind> model_kind_from_name(std::string_view name) {
    if (name == "transe") return ModelKind::TransE;
    if (name == "distmult") return ModelKind::DistMult;
    if (name == "complex") return ModelKind::ComplEx;
    if (name == "rotate") return ModelKind::RotatE;
    return std::nullopt;
}

void Hyperparams::validate() const {
    if (dim == 0) throw ConfigError("dim must be positive");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (margin < 0) throw ConfigError("margin must be non-negative");
    if (negatives_per_positive == 0) throw ConfigError("negatives_per_positive must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (norm_order != 1 && norm_order != 2) throw ConfigError("norm_order must be 1 or 2");
}

std::uint32_t EmbeddingModel::entity_width() const {
    return (kind == ModelKind::ComplEx || kind == ModelKind::RotatE) ? 2 * hp.dim : hp.dim;
}

std::uint32_t EmbeddingModel::relation_width() const {
    return kind == ModelKind::ComplEx ? 2 * hp.dim : hp.dim;
}

std::span<const double> EmbeddingModel::entity_row(EntityId id) const {
    const std::size_t w = entity_width();
    return {entity_vec.data() + id * w, w};
}

std::span<double> EmbeddingModel::entity_row(EntityId id) {
    const std::size_t w = entity_width();
    return {entity_vec.data() + id * w, w};
}

std::span<const double> EmbeddingModel::relation_row(RelationId id) const {
    const std::size_t w = relation_width();
    return {relation_vec.data() + id * w, w};
}

std::span<double> EmbeddingModel::relation_row(RelationId id) {
    const std::size_t w = relation_width();
    return {relation_vec.data() + id * w, w};
}

namespace {

// Raw model-native score. Lower is better for TransE/RotatE, higher for
// DistMult/ComplEx; distance_score() unifies the orientation.
double raw_score_impl(const EmbeddingModel& m, const Triple& t) {
    const std::uint32_t dim = m.hp.dim;
    const double* h = m.entity_vec.data() + static_cast<std::size_t>(t.head) * m.entity_width();
    const double* r =
        m.relation_vec.data() + static_cast<std::size_t>(t.relation) * m.relation_width();
    const double* tl = m.entity_vec.data() + static_cast<std::size_t>(t.tail) * m.entity_width();

    switch (m.kind) {
        case ModelKind::TransE: {
            double acc = 0;
            if (m.hp.norm_order == 1) {
                for (std::uint32_t i = 0; i < dim; ++i) acc += std::fabs(h[i] + r[i] - tl[i]);
                return acc;
            }
            for (std::uint32_t i = 0; i < dim; ++i) {
                const double d = h[i] + r[i] - tl[i];
                acc += d * d;
            }
            return std::sqrt(acc);
        }
        case ModelKind::DistMult: {
            double acc = 0;
            for (std::uint32_t i = 0; i < dim; ++i) acc += h[i] * r[i] * tl[i];
            return acc;
        }
        case ModelKind::ComplEx: {
            const double* hre = h;
            const double* him = h + dim;
            const double* rre = r;
            const double* rim = r + dim;
            const double* tre = tl;
            const double* tim = tl + dim;
            double acc = 0;
            for (std::uint32_t i = 0; i < dim; ++i) {
                acc += hre[i] * (rre[i] * tre[i] + rim[i] * tim[i]) +
                       him[i] * (rre[i] * tim[i] - rim[i] * tre[i]);
            }
            return acc;
        }
        case ModelKind::RotatE: {
            const double* hre = h;
            const double* him = h + dim;
            const double* tre = tl;
            const double* tim = tl + dim;
            double acc = 0;
            for (std::uint32_t i = 0; i < dim; ++i) {
                const double c = std::cos(r[i]);
                const double s = std::sin(r[i]);
                const double dre = hre[i] * c - him[i] * s - tre[i];
                const double dim_ = hre[i] * s + him[i] * c - tim[i];
                acc += dre * dre + dim_ * dim_;
            }
            return std::sqrt(acc);
        }
    }
    return 0;
}

bool lower_is_better(ModelKind kind) {
    return kind == ModelKind::TransE || kind == ModelKind::RotatE;
}

// sink(is_entity_table, row, offset, dvalue) accumulates analytic gradients.
// Returns the example loss. Shared by training and the public gradient API
// so finite-difference checks exercise the real path.
template <typename Sink>
double loss_and_grad(const EmbeddingModel& m, const ExamplePair& ex, Sink&& sink,
                     bool want_grad) {
    const std::uint32_t dim = m.hp.dim;

    if (lower_is_better(m.kind)) {
        const double dp = raw_score_impl(m, ex.pos);
        const double dn = raw_score_impl(m, ex.neg);
        const double loss = m.hp.margin + dp - dn;
        if (loss <= 0) return 0;
        if (!want_grad) return loss;

        // d(loss) = +d(dp) - d(dn)
        for (int which = 0; which < 2; ++which) {
            const Triple& t = which == 0 ? ex.pos : ex.neg;
            const double sign = which == 0 ? 1.0 : -1.0;
            const double* h =
                m.entity_vec.data() + static_cast<std::size_t>(t.head) * m.entity_width();
            const double* r =
                m.relation_vec.data() + static_cast<std::size_t>(t.relation) * m.relation_width();
            const double* tl =
                m.entity_vec.data() + static_cast<std::size_t>(t.tail) * m.entity_width();

            if (m.kind == ModelKind::TransE) {
                const double dist = which == 0 ? dp : dn;
                for (std::uint32_t i = 0; i < dim; ++i) {
                    const double d = h[i] + r[i] - tl[i];
                    double g;
                    if (m.hp.norm_order == 1)
                        g = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
                    else
                        g = dist > 0 ? d / dist : 0.0;
                    g *= sign;
                    sink(true, t.head, i, g);
                    sink(false, t.relation, i, g);
                    sink(true, t.tail, i, -g);
                }
            } else {  // RotatE
                const double dist = which == 0 ? dp : dn;
                if (dist <= 0) continue;
                const double inv = 1.0 / (2.0 * dist);
                const double* hre = h;
                const double* him = h + dim;
                const double* tre = tl;
                const double* tim = tl + dim;
                for (std::uint32_t i = 0; i < dim; ++i) {
                    const double c = std::cos(r[i]);
                    const double s = std::sin(r[i]);
                    const double dre = hre[i] * c - him[i] * s - tre[i];
                    const double dm = hre[i] * s + him[i] * c - tim[i];
                    const double f = sign * inv * 2.0;
                    sink(true, t.head, i, f * (dre * c + dm * s));
                    sink(true, t.head, dim + i, f * (-dre * s + dm * c));
                    sink(true, t.tail, i, f * -dre);
                    sink(true, t.tail, dim + i, f * -dm);
                    sink(false, t.relation, i,
                         f * (dre * (-hre[i] * s - him[i] * c) + dm * (hre[i] * c - him[i] * s)));
                }
            }
        }
        return loss;
    }

    // DistMult / ComplEx: logistic loss on both examples.
    const double fp = raw_score_impl(m, ex.pos);
    const double fn = raw_score_impl(m, ex.neg);
    const double loss = softplus(-fp) + softplus(fn);
    if (!want_grad) return loss;

    for (int which = 0; which < 2; ++which) {
        const Triple& t = which == 0 ? ex.pos : ex.neg;
        // d softplus(-f)/df = -sigmoid(-f);  d softplus(f)/df = sigmoid(f)
        const double dldf = which == 0 ? -sigmoid(-fp) : sigmoid(fn);
        const double* h =
            m.entity_vec.data() + static_cast<std::size_t>(t.head) * m.entity_width();
        const double* r =
            m.relation_vec.data() + static_cast<std::size_t>(t.relation) * m.relation_width();
        const double* tl =
            m.entity_vec.data() + static_cast<std::size_t>(t.tail) * m.entity_width();

        if (m.kind == ModelKind::DistMult) {
            for (std::uint32_t i = 0; i < dim; ++i) {
                sink(true, t.head, i, dldf * r[i] * tl[i]);
                sink(false, t.relation, i, dldf * h[i] * tl[i]);
                sink(true, t.tail, i, dldf * h[i] * r[i]);
            }
        } else {  // ComplEx
            const double* hre = h;
            const double* him = h + dim;
            const double* rre = r;
            const double* rim = r + dim;
            const double* tre = tl;
            const double* tim = tl + dim;
            for (std::uint32_t i = 0; i < dim; ++i) {
                sink(true, t.head, i, dldf * (rre[i] * tre[i] + rim[i] * tim[i]));
                sink(true, t.head, dim + i, dldf * (rre[i] * tim[i] - rim[i] * tre[i]));
                sink(false, t.relation, i, dldf * (hre[i] * tre[i] + him[i] * tim[i]));
                sink(false, t.relation, dim + i, dldf * (hre[i] * tim[i] - him[i] * tre[i]));
                sink(true, t.tail, i, dldf * (hre[i] * rre[i] - him[i] * rim[i]));
                sink(true, t.tail, dim + i, dldf * (him[i] * rre[i] + hre[i] * rim[i]));
            }
        }
    }
    return loss;
}

struct NullSink {
    void operator()(bool, std::uint32_t, std::uint32_t, double) const {}
};

}  // namespace

double raw_score(const EmbeddingModel& m, const Triple& t) { return raw_score_impl(m, t); }

double distance_score(const EmbeddingModel& m, const Triple& t) {
    const double s = raw_score_impl(m, t);
    return lower_is_better(m.kind) ? s : -s;
}

void distance_scores(const EmbeddingModel& m, std::span<const Triple> triples,
                     std::span<double> out) {
    if (triples.size() != out.size()) throw LengthMismatch(triples.size(), out.size());
    for (std::size_t i = 0; i < triples.size(); ++i) out[i] = distance_score(m, triples[i]);
}

double example_loss(const EmbeddingModel& m, const ExamplePair& ex) {
    return loss_and_grad(m, ex, NullSink{}, false);
}

void example_loss_grad(const EmbeddingModel& m, const ExamplePair& ex, GradientTables& grads) {
    grads.entity.assign(m.entity_vec.size(), 0.0);
    grads.relation.assign(m.relation_vec.size(), 0.0);
    const std::size_t ew = m.entity_width();
    const std::size_t rw = m.relation_width();
    loss_and_grad(
        m, ex,
        [&](bool is_entity, std::uint32_t row, std::uint32_t off, double v) {
            if (is_entity)
                grads.entity[row * ew + off] += v;
            else
                grads.relation[row * rw + off] += v;
        },
        true);
}

namespace {

// Batch gradient accumulator with first-touch stamping so only dirty rows
// are zeroed and applied.
struct BatchAccum {
    std::vector<double> grad;
    std::vector<std::uint32_t> stamp;
    std::vector<std::uint32_t> touched;
    std::uint32_t mark = 0;
    std::size_t width = 0;

    void init(std::size_t rows, std::size_t w) {
        grad.assign(rows * w, 0.0);
        stamp.assign(rows, 0);
        width = w;
        mark = 0;
    }

    void begin_batch() {
        ++mark;
        touched.clear();
    }

    void add(std::uint32_t row, std::uint32_t off, double v) {
        if (stamp[row] != mark) {
            stamp[row] = mark;
            touched.push_back(row);
            std::fill_n(grad.begin() + row * width, width, 0.0);
        }
        grad[row * width + off] += v;
    }
};

void renormalize(EmbeddingModel& m) {
    if (m.kind == ModelKind::TransE) {
        const std::uint32_t w = m.entity_width();
        for (std::size_t row = 0; row < m.entity_rows; ++row) {
            double* v = m.entity_vec.data() + row * w;
            double n = 0;
            for (std::uint32_t i = 0; i < w; ++i) n += v[i] * v[i];
            n = std::sqrt(n);
            if (n > 1.0)
                for (std::uint32_t i = 0; i < w; ++i) v[i] /= n;
        }
    } else if (m.kind == ModelKind::RotatE) {
        for (double& phase : m.relation_vec) {
            if (phase >= -kPi && phase < kPi) continue;
            phase -= 2.0 * kPi * std::floor((phase + kPi) / (2.0 * kPi));
        }
    }
}

}  // namespace

EmbeddingModel train(const KnowledgeGraph& g, ModelKind kind, const Hyperparams& hp,
                     std::uint64_t seed, const TrainOptions& opts) {
    hp.validate();
    if (g.size() == 0) throw DegenerateGraph("cannot train on a graph with no triples");

    EmbeddingModel m;
    m.kind = kind;
    m.hp = hp;
    m.seed = seed;
    m.entity_rows = g.entity_count();
    m.relation_rows = g.relation_count();
    m.entity_vec.resize(m.entity_rows * m.entity_width());
    m.relation_vec.resize(m.relation_rows * m.relation_width());

    SplitMix64 rng(derive_seed(seed, 0xE0B0));
    {
        const double eb = 6.0 / std::sqrt(static_cast<double>(m.entity_width()));
        for (double& v : m.entity_vec) v = rng.range(-eb, eb);
        if (kind == ModelKind::RotatE) {
            for (double& v : m.relation_vec) v = rng.range(-kPi, kPi);
        } else {
            const double rb = 6.0 / std::sqrt(static_cast<double>(m.relation_width()));
            for (double& v : m.relation_vec) v = rng.range(-rb, rb);
            if (kind == ModelKind::TransE) {
                const std::uint32_t w = m.relation_width();
                for (std::size_t row = 0; row < m.relation_rows; ++row) {
                    double* v = m.relation_vec.data() + row * w;
                    double n = 0;
                    for (std::uint32_t i = 0; i < w; ++i) n += v[i] * v[i];
                    n = std::sqrt(n);
                    if (n > 0)
                        for (std::uint32_t i = 0; i < w; ++i) v[i] /= n;
                }
            }
        }
    }

    const auto& triples = g.triples();
    const std::size_t n = triples.size();
    const std::size_t n_entities = g.entity_count();

    auto corrupt = [&](const Triple& pos) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            Triple neg = pos;
            const bool corrupt_head = rng.coin();
            const auto e = static_cast<EntityId>(rng.below(n_entities));
            if (corrupt_head)
                neg.head = e;
            else
                neg.tail = e;
            if (neg == pos || g.contains(neg)) continue;
            return neg;
        }
        return pos;  // graph too dense/small to corrupt; contributes zero-ish loss
    };

    BatchAccum ent_acc, rel_acc;
    ent_acc.init(m.entity_rows, m.entity_width());
    rel_acc.init(m.relation_rows, m.relation_width());

    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);

    std::uint64_t updates = 0;
    bool budget_exhausted = false;

    for (std::uint32_t epoch = 0; epoch < hp.epochs && !budget_exhausted; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0;
        std::size_t examples = 0;

        for (std::size_t start = 0; start < n && !budget_exhausted; start += hp.batch_size) {
            const std::size_t end = std::min(n, start + hp.batch_size);
            ent_acc.begin_batch();
            rel_acc.begin_batch();
            std::size_t batch_examples = 0;

            auto sink = [&](bool is_entity, std::uint32_t row, std::uint32_t off, double v) {
                if (is_entity)
                    ent_acc.add(row, off, v);
                else
                    rel_acc.add(row, off, v);
            };

            for (std::size_t i = start; i < end; ++i) {
                const Triple& pos = triples[order[i]];
                for (std::uint32_t k = 0; k < hp.negatives_per_positive; ++k) {
                    ExamplePair ex{pos, corrupt(pos)};
                    epoch_loss += loss_and_grad(m, ex, sink, true);
                    ++batch_examples;
                }
                if (opts.max_updates > 0 && ++updates >= opts.max_updates) {
                    budget_exhausted = true;
                    break;
                }
            }

            if (batch_examples > 0) {
                const double scale = hp.learning_rate / static_cast<double>(batch_examples);
                for (std::uint32_t row : ent_acc.touched) {
                    double* v = m.entity_vec.data() + static_cast<std::size_t>(row) * ent_acc.width;
                    const double* gr = ent_acc.grad.data() + static_cast<std::size_t>(row) * ent_acc.width;
                    for (std::size_t i = 0; i < ent_acc.width; ++i) v[i] -= scale * gr[i];
                }
                for (std::uint32_t row : rel_acc.touched) {
                    double* v = m.relation_vec.data() + static_cast<std::size_t>(row) * rel_acc.width;
                    const double* gr = rel_acc.grad.data() + static_cast<std::size_t>(row) * rel_acc.width;
                    for (std::size_t i = 0; i < rel_acc.width; ++i) v[i] -= scale * gr[i];
                }
            }
            examples += batch_examples;
        }

        renormalize(m);
        if (examples > 0) m.epoch_losses.push_back(epoch_loss / static_cast<double>(examples));
    }
    return m;
}

namespace {

double f1_for_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels,
                        double tau) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] < tau;
        if (predicted && labels[i]) ++tp;
        else if (predicted && !labels[i]) ++fp;
        else if (!predicted && labels[i]) ++fn;
    }
    const double denom = 2.0 * tp + fp + fn;
    return denom > 0 ? 2.0 * tp / denom : 0.0;
}

}  // namespace

const char* threshold_rule_name(ThresholdRule rule) {
    switch (rule) {
        case ThresholdRule::MedianPlus: return "median+offset";
        case ThresholdRule::MeanPlus: return "mean+offset";
        case ThresholdRule::MedianMinus: return "median-offset";
        case ThresholdRule::MeanMinus: return "mean-offset";
    }
    return "unknown";
}

ThresholdSelection select_filter_threshold(const EmbeddingModel& m,
                                           std::span<const LabeledTriple> validation,
                                           double offset) {
    if (validation.empty()) throw DegenerateValidation("validation set is empty");
    bool any_pos = false, any_neg = false;
    for (const auto& lt : validation) (lt.positive ? any_pos : any_neg) = true;
    if (!any_pos || !any_neg)
        throw DegenerateValidation("validation set must contain both classes");

    std::vector<double> scores(validation.size());
    std::vector<std::uint8_t> labels(validation.size());
    for (std::size_t i = 0; i < validation.size(); ++i) {
        scores[i] = distance_score(m, validation[i].triple);
        labels[i] = validation[i].positive ? 1 : 0;
    }

    std::vector<double> sorted(scores);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median =
        n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    double mean = 0;
    for (double s : sorted) mean += s;
    mean /= static_cast<double>(n);

    ThresholdSelection sel;
    sel.offset = offset;
    sel.candidates = {median + offset, mean + offset, median - offset, mean - offset};

    constexpr std::array<ThresholdRule, 4> rules = {
        ThresholdRule::MedianPlus, ThresholdRule::MeanPlus, ThresholdRule::MedianMinus,
        ThresholdRule::MeanMinus};
    double best_f1 = -1.0;
    double best_tau = std::numeric_limits<double>::infinity();
    ThresholdRule best_rule = ThresholdRule::MedianPlus;
    for (std::size_t i = 0; i < 4; ++i) {
        const double tau = sel.candidates[i];
        const double f1 = f1_for_threshold(scores, labels, tau);
        if (f1 > best_f1 || (f1 == best_f1 && tau < best_tau)) {
            best_f1 = f1;
            best_tau = tau;
            best_rule = rules[i];
        }
    }
    sel.rule = best_rule;
    sel.threshold = best_tau;
    sel.validation_f1 = best_f1;
    return sel;
}

double tune_classifier_threshold(const EmbeddingModel& m,
                                 std::span<const LabeledTriple> validation) {
    if (validation.empty()) throw DegenerateValidation("validation set is empty");

    const std::size_t n = validation.size();
    std::vector<std::pair<double, bool>> scored(n);
    std::uint64_t total_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        scored[i] = {distance_score(m, validation[i].triple), validation[i].positive};
        if (validation[i].positive) ++total_pos;
    }
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    const double inf = std::numeric_limits<double>::infinity();
    double best_tau = -inf;
    double best_f1 = 0.0;  // predicting nothing positive scores F1 = 0

    auto consider = [&](double tau, double f1) {
        if (f1 > best_f1 || (f1 == best_f1 && tau < best_tau)) {
            best_f1 = f1;
            best_tau = tau;
        }
    };

    // Predicting everything below a midpoint: walk sorted scores once.
    std::uint64_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (scored[i].second) ++tp;
        if (i + 1 < n && scored[i].first == scored[i + 1].first) continue;
        const double tau =
            i + 1 < n ? 0.5 * (scored[i].first + scored[i + 1].first) : inf;
        const std::uint64_t predicted = i + 1;
        const std::uint64_t fp = predicted - tp;
        const std::uint64_t fn = total_pos - tp;
        const double denom = static_cast<double>(2 * tp + fp + fn);
        consider(tau, denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0);
    }
    return best_tau;
}

std::vector<Triple> filter_candidates(const EmbeddingModel& m, std::span<const Triple> candidates,
                                      double tau, FilterReport* report,
                                      const TripleSet* removed) {
    std::vector<Triple> kept;
    std::uint64_t tc = 0, tcf = 0;
    for (const Triple& t : candidates) {
        const bool is_true = removed && removed->count(t) != 0;
        if (is_true) ++tc;
        if (distance_score(m, t) < tau) {
            kept.push_back(t);
            if (is_true) ++tcf;
        }
    }
    if (report) {
        report->before = candidates.size();
        report->after = kept.size();
        report->reduction_ratio =
            candidates.empty()
                ? 0.0
                : 1.0 - static_cast<double>(kept.size()) / static_cast<double>(candidates.size());
        report->threshold = tau;
        if (removed) {
            report->true_candidates = tc;
            report->true_candidates_kept = tcf;
        }
    }
    return kept;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4F4D4B47;  // "GKMO" little-endian
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_checkpoint(const EmbeddingModel& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingArtifact(path.string());
    write_pod(out, kCheckpointMagic);
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::uint8_t>(m.kind));
    write_pod(out, static_cast<std::int8_t>(m.hp.norm_order));
    write_pod(out, static_cast<std::uint16_t>(0));
    write_pod(out, m.hp.dim);
    write_pod(out, m.hp.epochs);
    write_pod(out, m.hp.negatives_per_positive);
    write_pod(out, m.hp.batch_size);
    write_pod(out, m.hp.learning_rate);
    write_pod(out, m.hp.margin);
    write_pod(out, m.seed);
    write_pod(out, static_cast<std::uint64_t>(m.entity_rows));
    write_pod(out, static_cast<std::uint64_t>(m.relation_rows));
    write_pod(out, static_cast<std::uint64_t>(m.epoch_losses.size()));
    out.write(reinterpret_cast<const char*>(m.epoch_losses.data()),
              static_cast<std::streamsize>(m.epoch_losses.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(m.entity_vec.data()),
              static_cast<std::streamsize>(m.entity_vec.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(m.relation_vec.data()),
              static_cast<std::streamsize>(m.relation_vec.size() * sizeof(double)));
    if (!out) throw Error(ErrorClass::Data, "failed writing checkpoint " + path.string());
}

EmbeddingModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact(path.string());
    std::uint32_t magic = 0, version = 0;
    read_pod(in, magic);
    read_pod(in, version);
    if (magic != kCheckpointMagic)
        throw Error(ErrorClass::Data, "not a model checkpoint: " + path.string());
    if (version != kCheckpointVersion)
        throw Error(ErrorClass::Data,
                    "unsupported checkpoint version " + std::to_string(version));

    EmbeddingModel m;
    std::uint8_t kind = 0;
    std::int8_t norm = 0;
    std::uint16_t pad = 0;
    read_pod(in, kind);
    read_pod(in, norm);
    read_pod(in, pad);
    m.kind = static_cast<ModelKind>(kind);
    m.hp.norm_order = norm;
    read_pod(in, m.hp.dim);
    read_pod(in, m.hp.epochs);
    read_pod(in, m.hp.negatives_per_positive);
    read_pod(in, m.hp.batch_size);
    read_pod(in, m.hp.learning_rate);
    read_pod(in, m.hp.margin);
    read_pod(in, m.seed);
    std::uint64_t entity_rows = 0, relation_rows = 0, loss_count = 0;
    read_pod(in, entity_rows);
    read_pod(in, relation_rows);
    read_pod(in, loss_count);
    m.entity_rows = entity_rows;
    m.relation_rows = relation_rows;
    m.epoch_losses.resize(loss_count);
    in.read(reinterpret_cast<char*>(m.epoch_losses.data()),
            static_cast<std::streamsize>(loss_count * sizeof(double)));
    m.entity_vec.resize(m.entity_rows * m.entity_width());
    m.relation_vec.resize(m.relation_rows * m.relation_width());
    in.read(reinterpret_cast<char*>(m.entity_vec.data()),
            static_cast<std::streamsize>(m.entity_vec.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(m.relation_vec.data()),
            static_cast<std::streamsize>(m.relation_vec.size() * sizeof(double)));
    if (!in) throw Error(ErrorClass::Data, "truncated checkpoint: " + path.string());
    char extra = 0;
    if (in.read(&extra, 1))
        throw Error(ErrorClass::Data, "trailing bytes in checkpoint: " + path.string());
    return m;
}

}  // namespace omnia
