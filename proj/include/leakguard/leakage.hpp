#pragma once

// Train/test leakage detection: exact duplicates via hashed canonical
// representations, near duplicates via brute-force cosine similarity, and
// calibration of the similarity threshold against an exact leak set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <spdlog/spdlog.h>

#include "leakguard/core.hpp"
#include "leakguard/parallel.hpp"

namespace leakguard {

enum class LeakKind : std::uint8_t { exact, near };
enum class ReportKind : std::uint8_t { exact, near, union_ };

inline std::string_view to_string(LeakKind k) { return k == LeakKind::exact ? "exact" : "near"; }
inline std::string_view to_string(ReportKind k) {
    switch (k) {
        case ReportKind::exact: return "exact";
        case ReportKind::near: return "near";
        case ReportKind::union_: return "union";
    }
    return "?";
}

struct LeakMatch {
    SampleId test_id;
    std::vector<SampleId> train_ids;  // training-set order
    LeakKind kind = LeakKind::exact;
    double best_similarity = 1.0;

    friend bool operator==(const LeakMatch&, const LeakMatch&) = default;
};

struct LeakageReport {
    ReportKind kind = ReportKind::exact;
    std::optional<double> threshold;
    std::vector<LeakMatch> matches;
    IdSet leak_ids;
    std::size_t test_size = 0;
    double ratio = 0.0;
    bool approximate = false;

    friend bool operator==(const LeakageReport&, const LeakageReport&) = default;
};

namespace detail {

inline double ratio_of(std::size_t part, std::size_t whole) {
    return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
}

inline void finalize(LeakageReport& r) {
    r.leak_ids.clear();
    for (const auto& m : r.matches) r.leak_ids.insert(m.test_id);
    r.ratio = ratio_of(r.leak_ids.size(), r.test_size);
}

// 64-bit FNV-1a over little-endian 32-bit words.
class Fnv1a {
public:
    void word(std::uint32_t w) {
        for (int i = 0; i < 4; ++i) {
            h_ ^= static_cast<std::uint8_t>(w >> (8 * i));
            h_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline double dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

inline double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

// Zero-norm operands have no direction; treated as similarity 0.
inline double cosine_from(double dot_ab, double norm_a, double norm_b) {
    if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
    return dot_ab / (norm_a * norm_b);
}

/// Row-major copy of a dataset's embeddings with precomputed norms.
class EmbeddingMatrix {
public:
    explicit EmbeddingMatrix(const Dataset& ds) : dim_(ds.schema().dim) {
        if (ds.schema().kind != RepKind::embedding) throw DataError("embedding schema required");
        values_.reserve(ds.size() * dim_);
        norms_.reserve(ds.size());
        for (const Sample& s : ds) {
            const auto& v = std::get<DenseEmbedding>(s.representation).values;
            if (v.size() != dim_) throw DataError("schema dim mismatch for sample " + s.id);
            values_.insert(values_.end(), v.begin(), v.end());
            norms_.push_back(norm(v));
            if (norms_.back() == 0.0) ++zero_rows_;
        }
    }
    std::size_t rows() const { return norms_.size(); }
    std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    double norm_of(std::size_t i) const { return norms_[i]; }
    std::size_t zero_rows() const { return zero_rows_; }

    double similarity(std::size_t i, const EmbeddingMatrix& other, std::size_t j) const {
        return cosine_from(dot(row(i), other.row(j)), norms_[i], other.norms_[j]);
    }

private:
    std::size_t dim_;
    std::vector<float> values_;
    std::vector<double> norms_;
    std::size_t zero_rows_ = 0;
};

inline void warn_zero_norm(const EmbeddingMatrix& train, const EmbeddingMatrix& test) {
    if (train.zero_rows() + test.zero_rows() > 0)
        spdlog::warn("cosine similarity undefined for {} zero-norm train and {} zero-norm test embeddings; using 0",
                     train.zero_rows(), test.zero_rows());
}

inline void check_threshold(double m) {
    if (!(m > 0.0 && m <= 1.0)) throw DataError("similarity threshold must lie in (0, 1], got " + std::to_string(m));
}

}  // namespace detail

/// Hash of the canonical serialization (dim + sorted indices, or raw float
/// bits). Equal representations hash equal; stable across platforms.
inline std::uint64_t representation_hash(const Representation& rep) {
    detail::Fnv1a h;
    if (auto* b = std::get_if<BinaryFeatureVector>(&rep)) {
        h.word(0);
        h.word(b->dim);
        for (auto i : b->indices) h.word(i);
    } else {
        const auto& e = std::get<DenseEmbedding>(rep);
        h.word(1);
        h.word(e.dim());
        for (float v : e.values) h.word(std::bit_cast<std::uint32_t>(v));
    }
    return h.value();
}

/// Test samples whose representation equals some training sample's.
/// Hash buckets narrow candidates; equality is confirmed in full.
inline LeakageReport exact_leak_set(const Dataset& train, const Dataset& test) {
    require_same_schema(train, test, "exact_leak_set");
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    buckets.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) buckets[representation_hash(train[i].representation)].push_back(i);

    LeakageReport report;
    report.kind = ReportKind::exact;
    report.test_size = test.size();
    for (const Sample& t : test) {
        auto it = buckets.find(representation_hash(t.representation));
        if (it == buckets.end()) continue;
        LeakMatch m{t.id, {}, LeakKind::exact, 1.0};
        for (std::size_t j : it->second)
            if (train[j].representation == t.representation) m.train_ids.push_back(train[j].id);
        if (!m.train_ids.empty()) report.matches.push_back(std::move(m));
    }
    detail::finalize(report);
    return report;
}

/// (a.b) / (|a| |b|) in double precision. Zero-norm inputs yield 0 with a
/// logged warning.
inline double cosine_similarity(const DenseEmbedding& a, const DenseEmbedding& b) {
    if (a.dim() != b.dim())
        throw DataError("cosine_similarity: dim mismatch " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    double na = detail::norm(a.values), nb = detail::norm(b.values);
    if (na == 0.0 || nb == 0.0) spdlog::warn("cosine similarity of a zero-norm vector is undefined; returning 0");
    return detail::cosine_from(detail::dot(a.values, b.values), na, nb);
}

/// Highest cosine similarity of each test embedding to any training
/// embedding (-inf when train is empty), in test order.
inline std::vector<double> best_similarities(const Dataset& train, const Dataset& test, unsigned workers = 1) {
    require_same_schema(train, test, "best_similarities");
    detail::EmbeddingMatrix tr(train), te(test);
    detail::warn_zero_norm(tr, te);
    std::vector<double> best(te.rows(), -std::numeric_limits<double>::infinity());
    parallel_for(te.rows(), workers, [&](std::size_t i) {
        double b = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < tr.rows(); ++j) b = std::max(b, te.similarity(i, tr, j));
        best[i] = b;
    });
    return best;
}

/// Test samples with cosine similarity >= m to at least one training sample.
/// Exhaustive over all pairs.
inline LeakageReport near_leak_set(const Dataset& train, const Dataset& test, double m, unsigned workers = 1) {
    require_same_schema(train, test, "near_leak_set");
    detail::check_threshold(m);
    detail::EmbeddingMatrix tr(train), te(test);
    detail::warn_zero_norm(tr, te);

    std::vector<std::optional<LeakMatch>> per_test(te.rows());
    parallel_for(te.rows(), workers, [&](std::size_t i) {
        LeakMatch match{test[i].id, {}, LeakKind::near, -std::numeric_limits<double>::infinity()};
        for (std::size_t j = 0; j < tr.rows(); ++j) {
            double s = te.similarity(i, tr, j);
            if (s >= m) {
                match.train_ids.push_back(train[j].id);
                match.best_similarity = std::max(match.best_similarity, s);
            }
        }
        if (!match.train_ids.empty()) per_test[i] = std::move(match);
    });

    LeakageReport report;
    report.kind = ReportKind::near;
    report.threshold = m;
    report.test_size = test.size();
    for (auto& m_opt : per_test)
        if (m_opt) report.matches.push_back(std::move(*m_opt));
    detail::finalize(report);
    return report;
}

/// Union of leak sets computed on the same test set. Matches are kept and
/// grouped by test id.
inline LeakageReport union_leak(std::span<const LeakageReport> reports, std::size_t test_size) {
    LeakageReport out;
    out.kind = ReportKind::union_;
    out.test_size = test_size;
    for (const auto& r : reports) {
        if (r.test_size != test_size)
            throw DataError("union_leak: report over " + std::to_string(r.test_size) + " test samples, expected " +
                            std::to_string(test_size));
        out.matches.insert(out.matches.end(), r.matches.begin(), r.matches.end());
        out.approximate = out.approximate || r.approximate;
        if (r.threshold) out.threshold = out.threshold ? std::min(*out.threshold, *r.threshold) : *r.threshold;
    }
    std::stable_sort(out.matches.begin(), out.matches.end(),
                     [](const LeakMatch& a, const LeakMatch& b) { return a.test_id < b.test_id; });
    detail::finalize(out);
    return out;
}

inline LeakageReport union_leak(std::initializer_list<LeakageReport> reports, std::size_t test_size) {
    return union_leak(std::span<const LeakageReport>(reports.begin(), reports.size()), test_size);
}

/// |a ∩ b| / |a ∪ b|; two empty sets agree perfectly (1.0).
inline double iou(const IdSet& a, const IdSet& b) {
    if (a.empty() && b.empty()) {
        spdlog::info("IoU of two empty sets taken as 1.0");
        return 1.0;
    }
    std::size_t common = 0;
    for (const auto& id : a) common += b.count(id);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

/// Grid points lo + k*step. The last point snaps to `hi` when within step/2.
inline std::vector<double> threshold_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(lo < hi)) throw DataError("empty threshold grid: need lo < hi and step > 0");
    auto last = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    std::vector<double> grid;
    grid.reserve(last + 2);
    for (std::size_t k = 0; k <= last; ++k) grid.push_back(lo + static_cast<double>(k) * step);
    if (std::abs(hi - grid.back()) <= step / 2)
        grid.back() = hi;
    for (double m : grid) detail::check_threshold(m);
    return grid;
}

struct CurvePoint {
    double m = 0.0;
    double iou = 0.0;
    std::size_t leak_emb_size = 0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct ThresholdCalibration {
    std::vector<double> grid;
    std::vector<CurvePoint> iou_curve;
    double chosen_m = 0.0;
    double max_iou = 0.0;
};

/// Threshold whose near-duplicate leak set best matches `leak_fv` by IoU.
/// Ties go to the largest threshold. Nearest-neighbour similarities are
/// computed once and reused for every grid point.
inline ThresholdCalibration calibrate_threshold(const IdSet& leak_fv, const Dataset& train, const Dataset& test,
                                                double range_lo, double range_hi, double step, unsigned workers = 1) {
    ThresholdCalibration cal;
    cal.grid = threshold_grid(range_lo, range_hi, step);
    const std::vector<double> best = best_similarities(train, test, workers);

    cal.max_iou = -1.0;
    for (double m : cal.grid) {
        IdSet leak_emb;
        for (std::size_t i = 0; i < best.size(); ++i)
            if (best[i] >= m) leak_emb.insert(test[i].id);
        double v = iou(leak_fv, leak_emb);
        cal.iou_curve.push_back({m, v, leak_emb.size()});
        if (v >= cal.max_iou) {
            cal.max_iou = v;
            cal.chosen_m = m;
        }
    }
    return cal;
}

struct DuplicateGroup {
    std::string key;
    std::vector<SampleId> members;  // dataset order
    std::size_t benign = 0;
    std::size_t malicious = 0;

    bool label_conflict() const { return benign > 0 && malicious > 0; }
};

/// Groups of >= 2 samples with identical representations, or, when
/// `near_threshold` is given (embeddings only), connected components of the
/// graph linking pairs with cosine similarity >= the threshold.
inline std::vector<DuplicateGroup> duplicate_groups(const Dataset& ds, std::optional<double> near_threshold = {}) {
    std::vector<std::vector<std::size_t>> components;
    std::vector<std::string> keys;

    if (!near_threshold) {
        std::unordered_map<std::uint64_t, std::vector<std::vector<std::size_t>>> buckets;
        std::vector<std::uint64_t> order;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            auto h = representation_hash(ds[i].representation);
            auto [it, inserted] = buckets.try_emplace(h);
            if (inserted) order.push_back(h);
            auto& classes = it->second;
            auto cls = std::find_if(classes.begin(), classes.end(), [&](const auto& c) {
                return ds[c.front()].representation == ds[i].representation;
            });
            if (cls == classes.end())
                classes.push_back({i});
            else
                cls->push_back(i);
        }
        for (auto h : order) {
            const auto& classes = buckets[h];
            for (std::size_t c = 0; c < classes.size(); ++c) {
                if (classes[c].size() < 2) continue;
                char buf[24];
                std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
                keys.push_back(c == 0 ? std::string(buf) : std::string(buf) + "#" + std::to_string(c));
                components.push_back(classes[c]);
            }
        }
    } else {
        if (ds.schema().kind != RepKind::embedding) throw DataError("near duplicate grouping needs embeddings");
        detail::check_threshold(*near_threshold);
        detail::EmbeddingMatrix mat(ds);
        std::vector<std::size_t> parent(ds.size());
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (std::size_t i = 0; i < ds.size(); ++i)
            for (std::size_t j = i + 1; j < ds.size(); ++j)
                if (mat.similarity(i, mat, j) >= *near_threshold) {
                    auto a = find(i), b = find(j);
                    if (a != b) parent[std::max(a, b)] = std::min(a, b);
                }
        std::unordered_map<std::size_t, std::size_t> slot;
        std::vector<std::vector<std::size_t>> all;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            auto [it, inserted] = slot.try_emplace(find(i), all.size());
            if (inserted) all.emplace_back();
            all[it->second].push_back(i);
        }
        for (auto& c : all)
            if (c.size() >= 2) {
                keys.push_back("near:" + ds[c.front()].id);
                components.push_back(std::move(c));
            }
    }

    std::vector<DuplicateGroup> groups;
    for (std::size_t g = 0; g < components.size(); ++g) {
        DuplicateGroup group{keys[g], {}, 0, 0};
        for (auto i : components[g]) {
            group.members.push_back(ds[i].id);
            (ds[i].label == Label::malicious ? group.malicious : group.benign)++;
        }
        groups.push_back(std::move(group));
    }
    std::sort(groups.begin(), groups.end(), [&](const DuplicateGroup& a, const DuplicateGroup& b) {
        const Sample* sa = ds.find(a.members.front());
        const Sample* sb = ds.find(b.members.front());
        return sample_order(*sa, *sb);
    });
    return groups;
}

struct DecayPoint {
    std::size_t test_index = 0;
    double ratio = 0.0;
};

/// Exact leak ratio of each test set against one fixed training set.
inline std::vector<DecayPoint> leakage_decay(const Dataset& train, std::span<const Dataset> tests) {
    std::vector<DecayPoint> out;
    for (std::size_t i = 0; i < tests.size(); ++i) out.push_back({i, exact_leak_set(train, tests[i]).ratio});
    return out;
}

}  // namespace leakguard
