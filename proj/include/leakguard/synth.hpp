#pragma once

// Seeded synthetic datasets with planted duplicates, class drift and an
// exact per-period class ratio, plus the canned "conclusion flip" fixture.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "leakguard/core.hpp"
#include "leakguard/harness.hpp"
#include "leakguard/leakage.hpp"
#include "leakguard/metrics.hpp"
#include "leakguard/rng.hpp"

namespace leakguard {

/// Generation could not produce a fixture with the promised properties.
class FixtureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SynthRepresentation {
    RepKind kind = RepKind::binary;
    std::uint32_t dim = 2048;
    double density = 0.01;  // binary only: fraction of features present
};

struct SynthConfig {
    std::size_t n_periods = 12;
    std::size_t samples_per_period = 1000;
    double malware_ratio = 0.06;
    double leak_rate = 0.0;             // P(sample duplicates an earlier one)
    double near_leak_jitter = 0.0;      // embeddings: multiplicative per-coordinate noise, |u| <= jitter
    double drift_rate = 0.0;            // per-period class-distribution displacement
    SynthRepresentation representation;
    double duplicate_label_flip = 0.0;  // P(duplicate carries the other label)
    std::uint64_t seed = 0;
    /// Duplicates draw from the last `duplicate_window` periods; 0 = all earlier periods.
    std::size_t duplicate_window = 0;
    /// Embeddings: distance between the two class means at period 0.
    double class_separation = 4.0;
    Timestamp start = Timestamp::month(2018, 1);

    void validate() const {
        auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (n_periods == 0 || samples_per_period == 0) throw DataError("synth: need at least one period and sample");
        if (!unit(malware_ratio) || !unit(leak_rate) || !unit(duplicate_label_flip))
            throw DataError("synth: rates must lie in [0, 1]");
        if (!(near_leak_jitter >= 0.0) || near_leak_jitter >= 1.0)
            throw DataError("synth: near_leak_jitter must lie in [0, 1)");
        if (!(drift_rate >= 0.0)) throw DataError("synth: drift_rate must be >= 0");
        if (representation.dim == 0) throw DataError("synth: dim must be positive");
        if (representation.kind == RepKind::binary && !(representation.density > 0.0 && representation.density <= 1.0))
            throw DataError("synth: binary density must lie in (0, 1]");
    }
};

struct PlantedDuplicate {
    SampleId dup_id;
    SampleId source_id;
    bool exact = true;

    friend bool operator==(const PlantedDuplicate&, const PlantedDuplicate&) = default;
};

struct SynthResult {
    Dataset dataset;
    std::vector<PlantedDuplicate> ground_truth;
    std::string generator{Rng::algorithm};
};

inline std::string synth_sample_id(std::size_t period, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "p%03zu-%06zu", period, index);
    return buf;
}

/// Each sample is, with probability leak_rate, a copy of a uniformly chosen
/// earlier-period sample (jittered when near_leak_jitter > 0 on
/// embeddings), otherwise a fresh draw from its class's drifting
/// distribution. Class labels are assigned first so every period holds
/// round(malware_ratio * n) malicious samples; a duplicate picks its source
/// among earlier samples of its own label, or of the other label when its
/// label is flipped.
inline SynthResult gen_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const auto dim = cfg.representation.dim;
    const bool binary = cfg.representation.kind == RepKind::binary;

    // Class-specific structure, drawn up front.
    std::vector<double> base[2], drift_dir[2];
    if (!binary) {
        const double scale = cfg.class_separation / std::sqrt(2.0 * dim);
        for (int c = 0; c < 2; ++c) {
            base[c].resize(dim);
            drift_dir[c].resize(dim);
            double n2 = 0.0;
            for (auto& x : base[c]) x = scale * rng.normal();
            for (auto& x : drift_dir[c]) {
                x = rng.normal();
                n2 += x * x;
            }
            for (auto& x : drift_dir[c]) x /= std::sqrt(n2);
        }
    }
    const std::size_t nnz = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.representation.density * dim)));
    const std::size_t block = std::max<std::size_t>(nnz, dim / 4);

    auto fresh = [&](Label label, std::size_t period) -> Representation {
        const int c = label == Label::malicious ? 1 : 0;
        if (binary) {
            const std::size_t offset =
                (static_cast<std::size_t>(c) * (dim / 2) +
                 static_cast<std::size_t>(std::llround(static_cast<double>(period) * cfg.drift_rate * dim))) % dim;
            std::set<std::uint32_t> chosen;
            while (chosen.size() < std::min<std::size_t>(nnz, dim)) {
                std::uint64_t idx = chosen.size() % 2 == 0 ? (offset + rng.below(block)) % dim : rng.below(dim);
                chosen.insert(static_cast<std::uint32_t>(idx));
            }
            return BinaryFeatureVector{dim, {chosen.begin(), chosen.end()}};
        }
        DenseEmbedding e;
        e.values.resize(dim);
        for (std::size_t d = 0; d < dim; ++d)
            e.values[d] = static_cast<float>(base[c][d] + static_cast<double>(period) * cfg.drift_rate * drift_dir[c][d] +
                                             rng.normal());
        return e;
    };

    std::vector<Sample> samples;
    samples.reserve(cfg.n_periods * cfg.samples_per_period);
    // by_period[p][label] -> indices into `samples`
    std::vector<std::array<std::vector<std::size_t>, 2>> by_period(cfg.n_periods);
    SynthResult out;

    const auto n_mal = static_cast<std::size_t>(std::llround(cfg.malware_ratio * static_cast<double>(cfg.samples_per_period)));
    for (std::size_t p = 0; p < cfg.n_periods; ++p) {
        std::vector<Label> labels(cfg.samples_per_period, Label::benign);
        std::fill_n(labels.begin(), std::min(n_mal, labels.size()), Label::malicious);
        rng.shuffle(std::span(labels));
        const std::size_t first_source = cfg.duplicate_window == 0 || p < cfg.duplicate_window ? 0 : p - cfg.duplicate_window;
        const Timestamp ts = cfg.start.plus_months(static_cast<int>(p));

        for (std::size_t i = 0; i < cfg.samples_per_period; ++i) {
            Sample s;
            s.id = synth_sample_id(p, i);
            s.label = labels[i];
            s.timestamp = ts;

            bool duplicated = false;
            if (p > 0 && rng.bernoulli(cfg.leak_rate)) {
                const bool flipped = rng.bernoulli(cfg.duplicate_label_flip);
                const auto source_label = static_cast<std::size_t>(flipped ? flip(s.label) : s.label);
                std::size_t total = 0;
                for (std::size_t q = first_source; q < p; ++q) total += by_period[q][source_label].size();
                if (total > 0) {
                    std::size_t pick = static_cast<std::size_t>(rng.below(total));
                    std::size_t q = first_source;
                    while (pick >= by_period[q][source_label].size()) pick -= by_period[q][source_label].size(), ++q;
                    const Sample& src = samples[by_period[q][source_label][pick]];
                    s.representation = src.representation;
                    bool exact = true;
                    if (!binary && cfg.near_leak_jitter > 0.0) {
                        for (auto& v : std::get<DenseEmbedding>(s.representation).values)
                            v = static_cast<float>(v * (1.0 + rng.uniform(-cfg.near_leak_jitter, cfg.near_leak_jitter)));
                        exact = false;
                    }
                    out.ground_truth.push_back({s.id, src.id, exact});
                    duplicated = true;
                }
            }
            if (!duplicated) s.representation = fresh(s.label, p);
            by_period[p][static_cast<std::size_t>(s.label)].push_back(samples.size());
            samples.push_back(std::move(s));
        }
    }
    out.dataset = Dataset::create(std::move(samples), Schema{cfg.representation.kind, dim});
    return out;
}

/// Samples from periods [first, last) of a generated dataset.
inline Dataset synth_periods(const Dataset& ds, const SynthConfig& cfg, std::size_t first, std::size_t last) {
    const Timestamp lo = cfg.start.plus_months(static_cast<int>(first));
    const Timestamp hi = cfg.start.plus_months(static_cast<int>(last));
    return ds.filter([&](const Sample& s) { return !(s.timestamp < lo) && s.timestamp < hi; });
}

struct FlipFixtureConfig {
    SynthConfig synth{.n_periods = 4,
                      .samples_per_period = 2000,
                      .malware_ratio = 0.06,
                      .leak_rate = 0.6,
                      .representation = {RepKind::binary, 4096, 0.005}};
    std::size_t train_periods = 3;   // the remaining periods form the test set
    double memo_weak_accuracy = 0.55;  // MEMO per-class accuracy off the leak set
    double gen_accuracy = 0.78;        // GEN per-class accuracy everywhere
};

struct FlipFixture {
    Dataset train;
    Dataset test;
    PredictionSet memo;
    PredictionSet gen;
    IdSet leak_ids;
    std::vector<PlantedDuplicate> ground_truth;
    PartitionedReport memo_report;
    PartitionedReport gen_report;
};

/// Two synthetic models on a leaky split: MEMO is perfect on the leaked
/// test samples and weak elsewhere, GEN is uniformly moderate. Throws
/// FixtureError unless MEMO wins on the complete test set while GEN wins on
/// the non-leak portion.
inline FlipFixture flip_fixture(std::uint64_t seed, FlipFixtureConfig cfg = {}) {
    cfg.synth.seed = seed;
    if (cfg.train_periods == 0 || cfg.train_periods >= cfg.synth.n_periods)
        throw FixtureError("flip fixture: train_periods must leave at least one test period");
    SynthResult gen = gen_synthetic(cfg.synth);

    FlipFixture fx;
    fx.train = synth_periods(gen.dataset, cfg.synth, 0, cfg.train_periods);
    fx.test = synth_periods(gen.dataset, cfg.synth, cfg.train_periods, cfg.synth.n_periods);
    fx.ground_truth = std::move(gen.ground_truth);
    fx.leak_ids = exact_leak_set(fx.train, fx.test).leak_ids;
    if (fx.leak_ids.empty()) throw FixtureError("flip fixture: no train-test leakage, so the comparison cannot flip");

    // Exactly round((1 - accuracy) * n) errors per (partition, class) cell,
    // positions chosen by a seeded shuffle.
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    auto assign = [&](PredictionSet& ps, bool leak, double accuracy) {
        for (Label cls : {Label::benign, Label::malicious}) {
            std::vector<SampleId> cell;
            for (const Sample& s : fx.test)
                if (s.label == cls && (fx.leak_ids.count(s.id) != 0) == leak) cell.push_back(s.id);
            rng.shuffle(std::span(cell));
            auto errors = static_cast<std::size_t>(std::llround((1.0 - accuracy) * static_cast<double>(cell.size())));
            for (std::size_t i = 0; i < cell.size(); ++i) ps.predictions[cell[i]] = i < errors ? flip(cls) : cls;
        }
    };
    fx.memo.model_name = "MEMO";
    fx.gen.model_name = "GEN";
    assign(fx.memo, true, 1.0);
    assign(fx.memo, false, cfg.memo_weak_accuracy);
    assign(fx.gen, true, cfg.gen_accuracy);
    assign(fx.gen, false, cfg.gen_accuracy);

    const LabelMap labels = fx.test.labels();
    const IdSet test_ids = fx.test.ids();
    fx.memo_report = evaluate_partitions(labels, fx.memo.predictions, test_ids, fx.leak_ids);
    fx.gen_report = evaluate_partitions(labels, fx.gen.predictions, test_ids, fx.leak_ids);

    const auto& mc = fx.memo_report.complete.ba;
    const auto& gc = fx.gen_report.complete.ba;
    const auto& mn = fx.memo_report.nonleak_portion.ba;
    const auto& gn = fx.gen_report.nonleak_portion.ba;
    if (!mc || !gc || !mn || !gn) throw FixtureError("flip fixture: balanced accuracy undefined on a partition");
    if (!(*mc > *gc && *gn > *mn))
        throw FixtureError("flip fixture: inequality not achieved (complete BA memo " + std::to_string(*mc) + " vs gen " +
                           std::to_string(*gc) + ", non-leak BA memo " + std::to_string(*mn) + " vs gen " +
                           std::to_string(*gn) + ")");
    return fx;
}

}  // namespace leakguard
