#pragma once

// Confusion counting and the derived detection metrics (malicious is the
// positive class). A metric with a zero denominator is UNDEFINED, modelled
// as an empty optional; it is never NaN and never silently 0.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>

#include "leakguard/core.hpp"

namespace leakguard {

using LabelMap = std::unordered_map<SampleId, Label>;
using MetricValue = std::optional<double>;

struct ConfusionCounts {
    std::uint64_t tp = 0, fn = 0, tn = 0, fp = 0;

    std::uint64_t positives() const { return tp + fn; }
    std::uint64_t negatives() const { return tn + fp; }
    std::uint64_t total() const { return tp + fn + tn + fp; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fn += o.fn;
        tn += o.tn;
        fp += o.fp;
        return *this;
    }
    friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MetricsReport {
    ConfusionCounts counts;
    MetricValue fnr, fpr, precision, recall, f1, sensitivity, specificity, ba;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

enum class Metric : std::uint8_t { fnr, fpr, precision, recall, f1, sensitivity, specificity, ba };

inline constexpr std::array<Metric, 8> all_metrics{Metric::fnr,         Metric::fpr,         Metric::precision,
                                                   Metric::recall,      Metric::f1,          Metric::sensitivity,
                                                   Metric::specificity, Metric::ba};

inline std::string_view to_string(Metric m) {
    constexpr std::array<std::string_view, 8> names{"fnr", "fpr", "precision", "recall",
                                                    "f1",  "sensitivity", "specificity", "ba"};
    return names[static_cast<std::size_t>(m)];
}

inline MetricValue& field(MetricsReport& r, Metric m) {
    switch (m) {
        case Metric::fnr: return r.fnr;
        case Metric::fpr: return r.fpr;
        case Metric::precision: return r.precision;
        case Metric::recall: return r.recall;
        case Metric::f1: return r.f1;
        case Metric::sensitivity: return r.sensitivity;
        case Metric::specificity: return r.specificity;
        case Metric::ba: return r.ba;
    }
    throw InvariantError("unknown metric");
}

inline const MetricValue& field(const MetricsReport& r, Metric m) { return field(const_cast<MetricsReport&>(r), m); }

/// Confusion counts restricted to `ids`. Every id needs a label and a
/// prediction.
template <class IdRange>
ConfusionCounts confusion(const LabelMap& labels, const LabelMap& predictions, const IdRange& ids) {
    ConfusionCounts c;
    for (const auto& id : ids) {
        auto l = labels.find(id);
        if (l == labels.end()) throw DataError("missing label for id " + id);
        auto p = predictions.find(id);
        if (p == predictions.end()) throw DataError("missing prediction for id " + id);
        if (l->second == Label::malicious)
            (p->second == Label::malicious ? c.tp : c.fn)++;
        else
            (p->second == Label::malicious ? c.fp : c.tn)++;
    }
    return c;
}

inline MetricsReport metrics_from_counts(const ConfusionCounts& c) {
    auto frac = [](std::uint64_t num, std::uint64_t den) -> MetricValue {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    MetricsReport r;
    r.counts = c;
    r.fnr = frac(c.fn, c.tp + c.fn);
    r.fpr = frac(c.fp, c.tn + c.fp);
    r.precision = frac(c.tp, c.tp + c.fp);
    r.recall = frac(c.tp, c.tp + c.fn);
    r.sensitivity = r.recall;  // equals 1 - fnr, taken from counts to avoid rounding drift
    r.specificity = frac(c.tn, c.tn + c.fp);
    if (r.precision && r.recall) {
        double sum = *r.precision + *r.recall;
        // P = R = 0 (tp = 0 with fp, fn > 0) is the limit case F1 = 0.
        r.f1 = sum == 0.0 ? 0.0 : 2.0 * *r.precision * *r.recall / sum;
    }
    if (r.sensitivity && r.specificity) r.ba = (*r.sensitivity + *r.specificity) / 2.0;
    return r;
}

struct PartitionedReport {
    MetricsReport complete;
    MetricsReport leak_portion;
    MetricsReport nonleak_portion;
    double leak_ratio = 0.0;

    friend bool operator==(const PartitionedReport&, const PartitionedReport&) = default;
};

/// Metrics over the complete test set and its leak / non-leak portions.
inline PartitionedReport evaluate_partitions(const LabelMap& labels, const LabelMap& predictions, const IdSet& test_ids,
                                             const IdSet& leak_ids) {
    std::vector<SampleId> leak, nonleak;
    for (const auto& id : leak_ids)
        if (!test_ids.count(id)) throw DataError("leak id " + id + " is not in the test set");
    for (const auto& id : test_ids) (leak_ids.count(id) ? leak : nonleak).push_back(id);

    PartitionedReport r;
    ConfusionCounts lc = confusion(labels, predictions, leak);
    ConfusionCounts nc = confusion(labels, predictions, nonleak);
    r.leak_portion = metrics_from_counts(lc);
    r.nonleak_portion = metrics_from_counts(nc);
    r.complete = metrics_from_counts(lc + nc);
    r.leak_ratio = test_ids.empty() ? 0.0 : static_cast<double>(leak.size()) / static_cast<double>(test_ids.size());
    return r;
}

struct PeriodAverage {
    std::size_t periods = 0;
    ConfusionCounts counts;  // summed over periods
    MetricsReport mean;      // unweighted mean of defined values; counts == summed counts
    std::array<std::size_t, 8> skipped{};  // per metric, periods where it was UNDEFINED

    std::size_t skipped_for(Metric m) const { return skipped[static_cast<std::size_t>(m)]; }
};

/// Per-metric mean over the periods where the metric is defined.
inline PeriodAverage average_over_periods(std::span<const MetricsReport> reports) {
    if (reports.empty()) throw DataError("average_over_periods needs at least one period");
    PeriodAverage out;
    out.periods = reports.size();
    for (const auto& r : reports) out.counts += r.counts;
    out.mean.counts = out.counts;
    for (Metric m : all_metrics) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : reports) {
            if (const auto& v = field(r, m)) {
                sum += *v;
                ++n;
            }
        }
        out.skipped[static_cast<std::size_t>(m)] = reports.size() - n;
        if (n > 0) field(out.mean, m) = sum / static_cast<double>(n);
    }
    return out;
}

/// Metrics of the pooled (summed) counts, the alternative to per-period averaging.
inline MetricsReport pooled_over_periods(std::span<const MetricsReport> reports) {
    ConfusionCounts total;
    for (const auto& r : reports) total += r.counts;
    return metrics_from_counts(total);
}

}  // namespace leakguard
