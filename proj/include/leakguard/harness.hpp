#pragma once

// Evaluation protocols on top of the leakage and metrics modules:
// continuous (period-by-period) evaluation with a growing training pool,
// the leak-aware detector, and small reference models.

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leakguard/core.hpp"
#include "leakguard/leakage.hpp"
#include "leakguard/metrics.hpp"
#include "leakguard/parallel.hpp"

namespace leakguard {

enum class Matcher : std::uint8_t { exact, near, union_ };
enum class TieRule : std::uint8_t { model_fallback, predict_malicious, predict_benign };
enum class Provenance : std::uint8_t { memorized, model };

inline std::string_view to_string(Matcher m) {
    switch (m) {
        case Matcher::exact: return "exact";
        case Matcher::near: return "near";
        case Matcher::union_: return "union";
    }
    return "?";
}
inline std::string_view to_string(Provenance p) { return p == Provenance::memorized ? "memorized" : "model"; }

struct LeakAwareConfig {
    Matcher matcher = Matcher::exact;
    double m = 1.0;  // used by near and union
    TieRule tie_rule = TieRule::model_fallback;

    void validate() const {
        if (matcher != Matcher::exact) detail::check_threshold(m);
    }
};

struct PredictionSet {
    std::string model_name;
    LabelMap predictions;

    friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

/// Embeddings of the same samples, used for the near half of a union
/// matcher when the primary representation is binary.
struct CompanionEmbeddings {
    const Dataset* train = nullptr;
    const Dataset* test = nullptr;
};

/// Leak set of `test` against `train` under the configured matcher.
inline LeakageReport audit_leakage(const Dataset& train, const Dataset& test, const LeakAwareConfig& cfg,
                                   unsigned workers = 1, CompanionEmbeddings companion = {}) {
    cfg.validate();
    if (cfg.matcher == Matcher::exact) return exact_leak_set(train, test);

    const Dataset* near_train = &train;
    const Dataset* near_test = &test;
    if (train.schema().kind != RepKind::embedding) {
        if (!companion.train || !companion.test)
            throw DataError(std::string(to_string(cfg.matcher)) + " matching on binary data needs companion embeddings");
        if (companion.test->size() != test.size() || companion.train->size() != train.size())
            throw DataError("companion embeddings do not cover the same samples");
        near_train = companion.train;
        near_test = companion.test;
    }
    LeakageReport near = near_leak_set(*near_train, *near_test, cfg.m, workers);
    if (cfg.matcher == Matcher::near) return near;
    return union_leak({exact_leak_set(train, test), near}, test.size());
}

class TrainingPool {
public:
    explicit TrainingPool(const Dataset& initial) : schema_(initial.schema()), members_(initial.begin(), initial.end()) {
        for (const auto& s : members_) ids_.insert(s.id);
    }

    /// Adds samples (one generation step). Ids already present are rejected.
    void add(std::span<const Sample> samples) {
        for (const auto& s : samples) {
            if (!ids_.insert(s.id).second) throw DataError("sample " + s.id + " is already in the training pool");
            members_.push_back(s);
        }
        ++generation_;
    }

    std::size_t size() const { return members_.size(); }
    std::size_t generation() const { return generation_; }
    bool contains(const SampleId& id) const { return ids_.count(id) != 0; }
    Dataset as_dataset() const { return Dataset::create(members_, schema_); }

private:
    Schema schema_;
    std::vector<Sample> members_;
    IdSet ids_;
    std::size_t generation_ = 0;
};

struct LeakAwareDecision {
    Label label = Label::benign;
    Provenance provenance = Provenance::model;
    bool matched = false;          // sample is in the matcher's leak set
    std::size_t matching_members = 0;
};

namespace detail {

inline LeakAwareDecision vote(std::size_t malicious, std::size_t benign, TieRule tie, Label model_prediction) {
    LeakAwareDecision d{model_prediction, Provenance::model, malicious + benign > 0, malicious + benign};
    if (!d.matched) return d;
    if (malicious != benign) {
        d.label = malicious > benign ? Label::malicious : Label::benign;
        d.provenance = Provenance::memorized;
    } else if (tie == TieRule::predict_malicious || tie == TieRule::predict_benign) {
        d.label = tie == TieRule::predict_malicious ? Label::malicious : Label::benign;
        d.provenance = Provenance::memorized;
    }
    return d;
}

}  // namespace detail

/// Majority label of every pool member matching `test` (each member counted
/// once), or the model's prediction when nothing matches. Scans the pool
/// directly; `test_embedding`/`pool_embeddings` supply the near half of a
/// union matcher over binary representations.
inline LeakAwareDecision leak_aware_predict(const Sample& test, const Dataset& pool, const LeakAwareConfig& cfg,
                                            Label model_prediction, const Sample* test_embedding = nullptr,
                                            const Dataset* pool_embeddings = nullptr) {
    cfg.validate();
    const bool use_exact = cfg.matcher != Matcher::near;
    const bool use_near = cfg.matcher != Matcher::exact;
    const Sample& near_test = test_embedding ? *test_embedding : test;
    const Dataset& near_pool = pool_embeddings ? *pool_embeddings : pool;
    if (use_near && kind_of(near_test.representation) != RepKind::embedding)
        throw DataError("near matching needs embeddings");

    std::optional<DenseEmbedding> probe;
    double probe_norm = 0.0;
    if (use_near) {
        probe = std::get<DenseEmbedding>(near_test.representation);
        probe_norm = detail::norm(probe->values);
    }

    std::size_t malicious = 0, benign = 0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
        bool hit = use_exact && pool[j].representation == test.representation;
        if (!hit && use_near) {
            const auto& other = std::get<DenseEmbedding>(near_pool[j].representation).values;
            double s = detail::cosine_from(detail::dot(probe->values, other), probe_norm, detail::norm(other));
            hit = s >= cfg.m;
        }
        if (hit) (pool[j].label == Label::malicious ? malicious : benign)++;
    }
    return detail::vote(malicious, benign, cfg.tie_rule, model_prediction);
}

struct ProvenanceCounts {
    std::size_t memorized = 0;
    std::size_t model = 0;
    std::size_t tie_fallback = 0;  // matched, but the vote tied and the model decided
};

struct LeakAwareResult {
    LeakageReport leakage;
    PartitionedReport standalone;
    PartitionedReport leak_aware;
    ProvenanceCounts provenance;
    PredictionSet composite;
};

/// Raw model versus the leak-aware composite, on the same partitions.
inline LeakAwareResult leak_aware_evaluate(const Dataset& train, const Dataset& test, const LeakAwareConfig& cfg,
                                           const PredictionSet& predictions, unsigned workers = 1,
                                           CompanionEmbeddings companion = {}) {
    LeakAwareResult out;
    out.leakage = audit_leakage(train, test, cfg, workers, companion);

    std::map<SampleId, IdSet> matched_members;
    for (const auto& m : out.leakage.matches) matched_members[m.test_id].insert(m.train_ids.begin(), m.train_ids.end());

    const LabelMap labels = test.labels();
    const IdSet test_ids = test.ids();
    out.composite.model_name = "leak-aware(" + predictions.model_name + ")";
    for (const Sample& s : test) {
        auto p = predictions.predictions.find(s.id);
        if (p == predictions.predictions.end()) throw DataError("missing prediction for id " + s.id);
        std::size_t malicious = 0, benign = 0;
        if (auto it = matched_members.find(s.id); it != matched_members.end())
            for (const auto& id : it->second) (train.find(id)->label == Label::malicious ? malicious : benign)++;
        auto d = detail::vote(malicious, benign, cfg.tie_rule, p->second);
        out.composite.predictions.emplace(s.id, d.label);
        if (d.provenance == Provenance::memorized)
            ++out.provenance.memorized;
        else
            ++(d.matched ? out.provenance.tie_fallback : out.provenance.model);
    }
    out.standalone = evaluate_partitions(labels, predictions.predictions, test_ids, out.leakage.leak_ids);
    out.leak_aware = evaluate_partitions(labels, out.composite.predictions, test_ids, out.leakage.leak_ids);
    return out;
}

struct ScheduleEntry {
    std::string period;
    std::vector<SampleId> add_ids;
    std::size_t budget = 0;

    friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

/// Per-period samples to label and add to the pool after that period is
/// evaluated.
struct AdditionsSchedule {
    std::vector<ScheduleEntry> entries;

    const ScheduleEntry* find(std::string_view period) const {
        for (const auto& e : entries)
            if (e.period == period) return &e;
        return nullptr;
    }
};

struct Period {
    std::string name;
    Dataset data;
};

/// Splits a dataset into calendar-month periods, in time order.
inline std::vector<Period> split_by_month(const Dataset& ds) {
    std::vector<Period> out;
    std::vector<Sample> current;
    std::optional<Timestamp> month;
    auto flush = [&] {
        if (month) out.push_back({month->to_string(), Dataset::create(std::move(current), ds.schema())});
        current.clear();
    };
    for (const Sample& s : ds) {
        Timestamp m = s.timestamp.month_period();
        if (!month || m != *month) {
            flush();
            month = m;
        }
        current.push_back(s);
    }
    flush();
    return out;
}

struct ContinuousOptions {
    /// Leading periods used for validation: not reported.
    std::size_t validation_periods = 0;
    /// Whether validation periods join the training pool before testing.
    bool validation_joins_pool = false;
    unsigned workers = 1;
};

struct PeriodResult {
    std::string period;
    std::size_t pool_size = 0;
    std::size_t pool_generation = 0;
    double leak_ratio = 0.0;
    IdSet leak_ids;
    PartitionedReport report;
    std::optional<PartitionedReport> leak_aware;
    std::optional<ProvenanceCounts> provenance;
};

/// Replays period-by-period evaluation. For each period: audit leakage
/// against the current pool, evaluate predictions on the complete / leak /
/// non-leak partitions, then add that period's scheduled samples to the
/// pool. `predictions` holds one set per period, or a single set covering
/// every period. With `leak_cfg`, its matcher is used for auditing and the
/// leak-aware composite is evaluated too; otherwise exact matching is used.
inline std::vector<PeriodResult> run_continuous_eval(const Dataset& initial_train, std::span<const Period> periods,
                                                     const AdditionsSchedule& schedule,
                                                     std::span<const PredictionSet> predictions,
                                                     const std::optional<LeakAwareConfig>& leak_cfg = {},
                                                     const ContinuousOptions& opts = {}) {
    const LeakAwareConfig audit_cfg = leak_cfg.value_or(LeakAwareConfig{});
    audit_cfg.validate();
    if (predictions.size() != 1 && predictions.size() != periods.size())
        throw DataError("expected one prediction set per period (or a single set), got " +
                        std::to_string(predictions.size()) + " for " + std::to_string(periods.size()) + " periods");
    if (opts.validation_periods > periods.size()) throw DataError("more validation periods than periods");

    for (const auto& e : schedule.entries) {
        auto p = std::find_if(periods.begin(), periods.end(), [&](const Period& x) { return x.name == e.period; });
        if (p == periods.end()) throw DataError("schedule names unknown period " + e.period);
        if (e.add_ids.size() > e.budget)
            throw DataError("schedule for " + e.period + " adds " + std::to_string(e.add_ids.size()) +
                            " samples, budget is " + std::to_string(e.budget));
        for (const auto& id : e.add_ids)
            if (!p->data.contains(id)) throw DataError("scheduled id " + id + " is not in period " + e.period);
    }

    TrainingPool pool(initial_train);
    std::optional<Timestamp> newest = initial_train.latest();
    auto apply_additions = [&](const Period& period, std::span<const Sample> extra) {
        std::vector<Sample> add(extra.begin(), extra.end());
        if (const auto* e = schedule.find(period.name))
            for (const auto& id : e->add_ids)
                if (std::none_of(add.begin(), add.end(), [&](const Sample& s) { return s.id == id; }))
                    add.push_back(*period.data.find(id));
        if (add.empty()) return;
        pool.add(add);
        for (const auto& s : add)
            if (!newest || *newest < s.timestamp) newest = s.timestamp;
    };

    std::vector<PeriodResult> results;
    for (std::size_t k = 0; k < periods.size(); ++k) {
        const Period& period = periods[k];
        if (newest && period.data.earliest() && *period.data.earliest() < *newest)
            throw DataError("period " + period.name + " starts at " + period.data.earliest()->to_string() +
                            ", before the newest training sample " + newest->to_string() + " (temporal bias)");

        if (k < opts.validation_periods) {
            if (opts.validation_joins_pool)
                apply_additions(period, period.data.samples());
            else
                apply_additions(period, {});
            continue;
        }

        const PredictionSet& preds = predictions.size() == 1 ? predictions[0] : predictions[k];
        const Dataset pool_ds = pool.as_dataset();

        PeriodResult r;
        r.period = period.name;
        r.pool_size = pool.size();
        r.pool_generation = pool.generation();
        if (leak_cfg) {
            auto la = leak_aware_evaluate(pool_ds, period.data, *leak_cfg, preds, opts.workers);
            r.leak_ids = std::move(la.leakage.leak_ids);
            r.leak_ratio = la.leakage.ratio;
            r.report = la.standalone;
            r.leak_aware = la.leak_aware;
            r.provenance = la.provenance;
        } else {
            auto leak = audit_leakage(pool_ds, period.data, audit_cfg, opts.workers);
            r.report = evaluate_partitions(period.data.labels(), preds.predictions, period.data.ids(), leak.leak_ids);
            r.leak_ids = std::move(leak.leak_ids);
            r.leak_ratio = leak.ratio;
        }
        results.push_back(std::move(r));
        apply_additions(period, {});
    }
    return results;
}

enum class BaselineKind : std::uint8_t { exact_memorizer, knn, centroid };

struct BaselineSpec {
    BaselineKind kind = BaselineKind::exact_memorizer;
    std::size_t k = 1;  // knn only; must be odd
};

namespace detail {

inline Label majority_class(const Dataset& train) {
    return 2 * train.malicious_count() > train.size() ? Label::malicious : Label::benign;
}

inline double jaccard(const BinaryFeatureVector& a, const BinaryFeatureVector& b) {
    std::size_t common = 0, i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] == b.indices[j]) {
            ++common;
            ++i;
            ++j;
        } else if (a.indices[i] < b.indices[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    std::size_t uni = a.indices.size() + b.indices.size() - common;
    return uni == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(uni);
}

inline std::vector<double> dense_of(const Representation& r) {
    if (auto* e = std::get_if<DenseEmbedding>(&r)) return {e->values.begin(), e->values.end()};
    const auto& b = std::get<BinaryFeatureVector>(r);
    std::vector<double> v(b.dim, 0.0);
    for (auto i : b.indices) v[i] = 1.0;
    return v;
}

}  // namespace detail

/// Self-contained reference models.
///   exact_memorizer: majority label of exact training matches, otherwise
///                    (or on a tied vote) the training majority class.
///   knn:             majority of the k most similar training samples
///                    (cosine for embeddings, Jaccard for binary vectors;
///                    similarity ties resolved by training order).
///   centroid:        class whose mean representation is nearer (Euclidean).
inline PredictionSet baseline_predict(const Dataset& train, const Dataset& test, const BaselineSpec& spec,
                                      unsigned workers = 1) {
    if (train.empty()) throw DataError("baseline_predict: empty training set");
    require_same_schema(train, test, "baseline_predict");
    const Label fallback = detail::majority_class(train);
    std::vector<Label> out(test.size(), fallback);
    PredictionSet ps;

    switch (spec.kind) {
        case BaselineKind::exact_memorizer: {
            ps.model_name = "exact_memorizer";
            auto leak = exact_leak_set(train, test);
            std::map<SampleId, const LeakMatch*> by_id;
            for (const auto& m : leak.matches) by_id[m.test_id] = &m;
            for (std::size_t i = 0; i < test.size(); ++i) {
                auto it = by_id.find(test[i].id);
                if (it == by_id.end()) continue;
                std::size_t mal = 0;
                for (const auto& id : it->second->train_ids) mal += train.find(id)->label == Label::malicious;
                std::size_t ben = it->second->train_ids.size() - mal;
                if (mal != ben) out[i] = mal > ben ? Label::malicious : Label::benign;
            }
            break;
        }
        case BaselineKind::knn: {
            if (spec.k == 0 || spec.k % 2 == 0) throw DataError("knn needs an odd k");
            ps.model_name = "knn" + std::to_string(spec.k);
            const std::size_t k = std::min(spec.k, train.size());
            const bool dense = train.schema().kind == RepKind::embedding;
            std::optional<detail::EmbeddingMatrix> tr, te;
            if (dense) {
                tr.emplace(train);
                te.emplace(test);
            }
            parallel_for(test.size(), workers, [&](std::size_t i) {
                std::vector<std::pair<double, std::size_t>> sims(train.size());
                for (std::size_t j = 0; j < train.size(); ++j) {
                    double s = dense ? te->similarity(i, *tr, j)
                                     : detail::jaccard(std::get<BinaryFeatureVector>(test[i].representation),
                                                       std::get<BinaryFeatureVector>(train[j].representation));
                    sims[j] = {-s, j};
                }
                std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end());
                std::size_t mal = 0;
                for (std::size_t n = 0; n < k; ++n) mal += train[sims[n].second].label == Label::malicious;
                out[i] = 2 * mal > k ? Label::malicious : Label::benign;
            });
            break;
        }
        case BaselineKind::centroid: {
            ps.model_name = "centroid";
            const std::size_t dim = train.schema().dim;
            std::vector<double> mean[2] = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
            std::size_t count[2] = {0, 0};
            for (const Sample& s : train) {
                auto c = static_cast<std::size_t>(s.label);
                auto v = detail::dense_of(s.representation);
                for (std::size_t d = 0; d < dim; ++d) mean[c][d] += v[d];
                ++count[c];
            }
            for (std::size_t c = 0; c < 2; ++c)
                for (auto& x : mean[c]) x /= static_cast<double>(std::max<std::size_t>(count[c], 1));
            parallel_for(test.size(), workers, [&](std::size_t i) {
                if (count[0] == 0 || count[1] == 0) return;  // one class only: fallback
                auto v = detail::dense_of(test[i].representation);
                double dist[2] = {0.0, 0.0};
                for (std::size_t c = 0; c < 2; ++c)
                    for (std::size_t d = 0; d < dim; ++d) dist[c] += (v[d] - mean[c][d]) * (v[d] - mean[c][d]);
                out[i] = dist[1] < dist[0] ? Label::malicious : Label::benign;
            });
            break;
        }
    }
    for (std::size_t i = 0; i < test.size(); ++i) ps.predictions.emplace(test[i].id, out[i]);
    return ps;
}

}  // namespace leakguard
