#pragma once

// JSON forms of the report types. Field order is fixed (ordered_json) and
// UNDEFINED metrics serialize as null.

#include <nlohmann/json.hpp>

#include "leakguard/harness.hpp"
#include "leakguard/leakage.hpp"
#include "leakguard/metrics.hpp"
#include "leakguard/splitter.hpp"

namespace leakguard {

using Json = nlohmann::ordered_json;

inline Json metric_json(const MetricValue& v) { return v ? Json(*v) : Json(nullptr); }

inline Json to_json(const ConfusionCounts& c) { return Json{{"tp", c.tp}, {"fn", c.fn}, {"tn", c.tn}, {"fp", c.fp}}; }

inline Json to_json(const MetricsReport& r) {
    Json j{{"counts", to_json(r.counts)}};
    for (Metric m : all_metrics) j[std::string(to_string(m))] = metric_json(field(r, m));
    return j;
}

inline Json to_json(const PartitionedReport& r) {
    return Json{{"complete", to_json(r.complete)},
                {"leak", to_json(r.leak_portion)},
                {"nonleak", to_json(r.nonleak_portion)},
                {"leak_ratio", r.leak_ratio}};
}

inline Json to_json(const PeriodAverage& a) {
    Json skipped = Json::object();
    for (Metric m : all_metrics) skipped[std::string(to_string(m))] = a.skipped_for(m);
    return Json{{"periods", a.periods}, {"mean", to_json(a.mean)}, {"skipped", skipped}};
}

inline Json to_json(const LeakageReport& r) {
    Json matches = Json::array();
    for (const auto& m : r.matches)
        matches.push_back(Json{{"test_id", m.test_id},
                               {"train_ids", m.train_ids},
                               {"kind", to_string(m.kind)},
                               {"best_similarity", m.best_similarity}});
    return Json{{"kind", to_string(r.kind)},
                {"threshold", r.threshold ? Json(*r.threshold) : Json(nullptr)},
                {"approximate", r.approximate},
                {"test_size", r.test_size},
                {"ratio", r.ratio},
                {"leak_count", r.leak_ids.size()},
                {"matches", std::move(matches)}};
}

inline LeakageReport leakage_report_from_json(const nlohmann::json& j) {
    LeakageReport r;
    const auto kind = j.at("kind").get<std::string>();
    r.kind = kind == "exact" ? ReportKind::exact : kind == "near" ? ReportKind::near : ReportKind::union_;
    if (!j.at("threshold").is_null()) r.threshold = j.at("threshold").get<double>();
    r.approximate = j.value("approximate", false);
    r.test_size = j.at("test_size").get<std::size_t>();
    for (const auto& m : j.at("matches")) {
        LeakMatch lm;
        lm.test_id = m.at("test_id").get<std::string>();
        lm.train_ids = m.at("train_ids").get<std::vector<std::string>>();
        lm.kind = m.value("kind", std::string("exact")) == "near" ? LeakKind::near : LeakKind::exact;
        lm.best_similarity = m.at("best_similarity").get<double>();
        r.matches.push_back(std::move(lm));
    }
    detail::finalize(r);
    return r;
}

inline Json to_json(const ThresholdCalibration& c) {
    Json curve = Json::array();
    for (const auto& p : c.iou_curve) curve.push_back(Json{{"m", p.m}, {"iou", p.iou}, {"leak_emb_size", p.leak_emb_size}});
    return Json{{"grid", c.grid}, {"chosen_m", c.chosen_m}, {"max_iou", c.max_iou}, {"iou_curve", std::move(curve)}};
}

inline Json to_json(const WindowPlan& plan) {
    Json windows = Json::array();
    auto indices = [&](const std::vector<std::size_t>& pos) {
        Json a = Json::array();
        for (auto p : pos) a.push_back(plan.batches[p].index);
        return a;
    };
    for (const auto& w : plan.windows)
        windows.push_back(Json{{"train", indices(w.train)}, {"val", indices(w.validation)}, {"test", indices(w.test)}});
    Json batches = Json::array();
    for (const auto& b : plan.batches)
        batches.push_back(Json{{"index", b.index},
                               {"time_range", {b.time_range.first.to_string(), b.time_range.second.to_string()}},
                               {"ids", b.samples}});
    return Json{{"windows", std::move(windows)}, {"batches", std::move(batches)}};
}

inline Json to_json(const Violation& v) {
    return Json{{"invariant", v.invariant},
                {"sample_id", v.sample_id.empty() ? Json(nullptr) : Json(v.sample_id)},
                {"message", v.message}};
}

inline Json to_json(std::span<const Violation> vs) {
    Json a = Json::array();
    for (const auto& v : vs) a.push_back(to_json(v));
    return a;
}

inline Json to_json(const DuplicateGroup& g) {
    return Json{{"key", g.key},
                {"members", g.members},
                {"benign", g.benign},
                {"malicious", g.malicious},
                {"label_conflict", g.label_conflict()}};
}

inline Json to_json(const ProvenanceCounts& p) {
    return Json{{"memorized", p.memorized}, {"model", p.model}, {"tie_fallback", p.tie_fallback}};
}

/// One continuous-evaluation JSONL record.
inline Json to_json(const PeriodResult& r) {
    Json j{{"period", r.period},
           {"pool_size", r.pool_size},
           {"pool_generation", r.pool_generation},
           {"leak_ratio", r.leak_ratio},
           {"complete", to_json(r.report.complete)},
           {"leak", to_json(r.report.leak_portion)},
           {"nonleak", to_json(r.report.nonleak_portion)}};
    if (r.leak_aware) j["leak_aware"] = to_json(*r.leak_aware);
    if (r.provenance) j["provenance"] = to_json(*r.provenance);
    return j;
}

inline Json to_json(const LeakAwareResult& r) {
    return Json{{"model", r.composite.model_name},
                {"leak_ratio", r.leakage.ratio},
                {"standalone", to_json(r.standalone)},
                {"leak_aware", to_json(r.leak_aware)},
                {"provenance", to_json(r.provenance)}};
}

}  // namespace leakguard
