#pragma once

// Class-ratio-controlled batches, sliding train/validation/test windows,
// and split linting for temporal and spatial bias.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "leakguard/core.hpp"
#include "leakguard/rng.hpp"

namespace leakguard {

struct BatchSpec {
    std::size_t malicious_per_batch = 240;
    std::size_t benign_per_batch = 3760;
    std::uint64_t rng_seed = 0;
    /// Too few malicious samples for one batch: throw instead of returning
    /// zero batches with a warning.
    bool strict = false;

    double malware_ratio() const {
        return static_cast<double>(malicious_per_batch) /
               static_cast<double>(malicious_per_batch + benign_per_batch);
    }
};

struct Batch {
    std::size_t index = 0;
    std::vector<SampleId> samples;  // dataset order
    std::pair<Timestamp, Timestamp> time_range;

    friend bool operator==(const Batch&, const Batch&) = default;
};

/// Chunks malicious samples chronologically and pairs each chunk with benign
/// samples drawn uniformly (without replacement, seeded) from the chunk's
/// time range. A trailing partial chunk is dropped.
inline std::vector<Batch> build_batches(const Dataset& ds, const BatchSpec& spec) {
    if (spec.malicious_per_batch == 0 || spec.benign_per_batch == 0)
        throw DataError("batch sizes must be positive");

    std::vector<std::size_t> malicious, benign;
    for (std::size_t i = 0; i < ds.size(); ++i) (ds[i].label == Label::malicious ? malicious : benign).push_back(i);

    const std::size_t n_batches = malicious.size() / spec.malicious_per_batch;
    if (n_batches == 0) {
        std::string msg = "only " + std::to_string(malicious.size()) + " malicious samples; " +
                          std::to_string(spec.malicious_per_batch) + " needed for one batch";
        if (spec.strict) throw DataError(msg);
        spdlog::warn("{}; no batches built", msg);
        return {};
    }
    if (std::size_t dropped = malicious.size() % spec.malicious_per_batch)
        spdlog::info("dropping {} trailing malicious samples that do not fill a batch", dropped);

    Rng rng(spec.rng_seed);
    std::vector<bool> used(ds.size(), false);
    std::vector<Batch> batches;
    batches.reserve(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        auto first = malicious.begin() + static_cast<std::ptrdiff_t>(b * spec.malicious_per_batch);
        std::vector<std::size_t> members(first, first + static_cast<std::ptrdiff_t>(spec.malicious_per_batch));
        const Timestamp lo = ds[members.front()].timestamp;
        const Timestamp hi = ds[members.back()].timestamp;

        auto from = std::lower_bound(benign.begin(), benign.end(), lo,
                                     [&](std::size_t i, const Timestamp& t) { return ds[i].timestamp < t; });
        auto to = std::upper_bound(benign.begin(), benign.end(), hi,
                                   [&](const Timestamp& t, std::size_t i) { return t < ds[i].timestamp; });
        std::vector<std::size_t> candidates;
        for (auto it = from; it != to; ++it)
            if (!used[*it]) candidates.push_back(*it);
        if (candidates.size() < spec.benign_per_batch)
            throw DataError("batch " + std::to_string(b) + " [" + lo.to_string() + ", " + hi.to_string() + "]: " +
                            std::to_string(candidates.size()) + " unused benign samples available, short by " +
                            std::to_string(spec.benign_per_batch - candidates.size()));

        rng.choose_front(std::span(candidates), spec.benign_per_batch);
        candidates.resize(spec.benign_per_batch);
        for (auto i : candidates) used[i] = true;
        members.insert(members.end(), candidates.begin(), candidates.end());
        std::sort(members.begin(), members.end());

        Batch batch{b, {}, {lo, hi}};
        batch.samples.reserve(members.size());
        for (auto i : members) batch.samples.push_back(ds[i].id);
        batches.push_back(std::move(batch));
    }
    return batches;
}

struct WindowSpec {
    std::size_t window_len = 10;
    std::size_t train_len = 6;
    std::size_t val_len = 2;
    std::size_t test_len = 2;
    std::size_t stride = 2;

    void validate() const {
        if (train_len + val_len + test_len != window_len)
            throw DataError("window spec: train_len + val_len + test_len must equal window_len");
        if (stride < 1) throw DataError("window spec: stride must be >= 1");
        if (train_len == 0 || test_len == 0) throw DataError("window spec: train and test segments must be non-empty");
    }
};

/// Batch positions (into the batch list) of each window segment.
struct Window {
    std::vector<std::size_t> train, validation, test;

    friend bool operator==(const Window&, const Window&) = default;
};

inline std::size_t window_count(std::size_t n_batches, const WindowSpec& spec) {
    if (n_batches < spec.window_len) return 0;
    return (n_batches - spec.window_len) / spec.stride + 1;
}

/// Window k covers batches [k*stride, k*stride + window_len).
inline std::vector<Window> build_sliding_windows(std::span<const Batch> batches, const WindowSpec& spec) {
    spec.validate();
    if (batches.size() < spec.window_len)
        throw DataError("need at least " + std::to_string(spec.window_len) + " batches for one window, got " +
                        std::to_string(batches.size()));
    std::vector<Window> windows;
    for (std::size_t k = 0; k < window_count(batches.size(), spec); ++k) {
        Window w;
        std::size_t start = k * spec.stride;
        for (std::size_t i = 0; i < spec.window_len; ++i) {
            std::size_t pos = start + i;
            if (i < spec.train_len)
                w.train.push_back(pos);
            else if (i < spec.train_len + spec.val_len)
                w.validation.push_back(pos);
            else
                w.test.push_back(pos);
        }
        windows.push_back(std::move(w));
    }
    return windows;
}

struct WindowPlan {
    std::vector<Batch> batches;
    std::vector<Window> windows;
};

/// Samples of the given batch positions as a dataset.
inline Dataset batches_dataset(const Dataset& ds, std::span<const Batch> batches, std::span<const std::size_t> positions) {
    IdSet ids;
    for (auto p : positions) ids.insert(batches[p].samples.begin(), batches[p].samples.end());
    return ds.subset(ids);
}

struct LintConfig {
    std::optional<double> target_malware_ratio = 0.06;
    double ratio_tolerance = 0.02;
};

/// Temporal-bias violations for every test sample older than the newest
/// training sample, plus one spatial-bias violation when the test malware
/// ratio strays from the target by more than the tolerance.
inline std::vector<Violation> lint_split(const Dataset& train, const Dataset& test, const LintConfig& cfg = {}) {
    require_same_schema(train, test, "lint_split");
    std::vector<Violation> out;
    if (auto newest = train.latest()) {
        for (const Sample& s : test)
            if (s.timestamp < *newest)
                out.push_back({"temporal-bias", s.id,
                               "test sample dated " + s.timestamp.to_string() + " precedes newest training sample (" +
                                   newest->to_string() + ")"});
    }
    if (cfg.target_malware_ratio && !test.empty()) {
        double ratio = test.malware_ratio();
        if (std::abs(ratio - *cfg.target_malware_ratio) > cfg.ratio_tolerance) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "test malware ratio %.6g deviates from target %.6g by more than %.6g", ratio,
                          *cfg.target_malware_ratio, cfg.ratio_tolerance);
            out.push_back({"spatial-bias", "", buf});
        }
    }
    return out;
}

}  // namespace leakguard
