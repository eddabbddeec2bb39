#include <gtest/gtest.h>

#include "leakguard/leakage.hpp"
#include "leakguard/synth.hpp"
#include "oracles.hpp"

namespace leakguard {
namespace {

SynthConfig small(std::uint64_t seed, double leak_rate = 0.3) {
    SynthConfig cfg;
    cfg.n_periods = 4;
    cfg.samples_per_period = 500;
    cfg.leak_rate = leak_rate;
    cfg.representation = {RepKind::binary, 512, 0.02};
    cfg.seed = seed;
    return cfg;
}

TEST(Synth, SampleIds) {
    EXPECT_EQ(synth_sample_id(3, 42), "p003-000042");
}

TEST(Synth, Deterministic) {
    auto a = gen_synthetic(small(5));
    auto b = gen_synthetic(small(5));
    EXPECT_EQ(a.dataset, b.dataset);
    EXPECT_EQ(a.ground_truth, b.ground_truth);
    EXPECT_FALSE(a.dataset == gen_synthetic(small(6)).dataset);

    auto cfg = small(5);
    cfg.representation = {RepKind::embedding, 16, 0};
    cfg.near_leak_jitter = 0.1;
    EXPECT_EQ(gen_synthetic(cfg).dataset, gen_synthetic(cfg).dataset);
}

std::uint64_t fingerprint(const Dataset& ds) {
    std::uint64_t h = 0;
    for (const Sample& s : ds) h = h * 31 + representation_hash(s.representation) + (s.label == Label::malicious);
    return h;
}

// Pins the generator: any change to the sampling recipe shows up here.
TEST(Synth, GeneratorFingerprint) {
    auto r = gen_synthetic(small(1));
    EXPECT_EQ(r.generator, "mt19937_64/lemire-bounded/u53-real/box-muller;v1");
    EXPECT_EQ(r.ground_truth.size(), 479u);
    EXPECT_EQ(fingerprint(r.dataset), 781346044616537291ULL);

    auto cfg = small(1);
    cfg.representation = {RepKind::embedding, 8, 0};
    cfg.near_leak_jitter = 0.1;
    EXPECT_EQ(fingerprint(gen_synthetic(cfg).dataset), 8020810224689001437ULL);
}

TEST(Synth, ExactClassCountPerPeriod) {
    SynthConfig cfg = small(2);
    cfg.samples_per_period = 2000;
    auto ds = gen_synthetic(cfg).dataset;
    for (std::size_t p = 0; p < cfg.n_periods; ++p) {
        auto period = synth_periods(ds, cfg, p, p + 1);
        EXPECT_EQ(period.size(), 2000u);
        EXPECT_NEAR(period.malware_ratio(), 0.06, 0.01);
        EXPECT_EQ(period.malicious_count(), 120u);
    }
}

TEST(Synth, NoLeakageWithoutDuplicates) {
    auto cfg = small(3, 0.0);
    auto r = gen_synthetic(cfg);
    EXPECT_TRUE(r.ground_truth.empty());
    auto train = synth_periods(r.dataset, cfg, 0, 2), test = synth_periods(r.dataset, cfg, 2, 4);
    EXPECT_TRUE(exact_leak_set(train, test).leak_ids.empty());
}

TEST(Synth, PlantedSubsetOfDetected) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto cfg = small(seed, 0.4);
        auto r = gen_synthetic(cfg);
        auto train = synth_periods(r.dataset, cfg, 0, 2), test = synth_periods(r.dataset, cfg, 2, 4);
        auto detected = oracle::brute_force_exact(train, test).leak_ids;
        IdSet planted_cross;
        for (const auto& d : r.ground_truth) {
            ASSERT_TRUE(d.exact);
            const Sample* dup = r.dataset.find(d.dup_id);
            const Sample* src = r.dataset.find(d.source_id);
            ASSERT_TRUE(dup && src);
            EXPECT_TRUE(src->timestamp < dup->timestamp);
            EXPECT_EQ(dup->representation, src->representation);
            if (test.contains(d.dup_id) && train.contains(d.source_id)) planted_cross.insert(d.dup_id);
        }
        for (const auto& id : planted_cross) EXPECT_TRUE(detected.count(id)) << id;
    }
}

TEST(Synth, LeakRateConcentrates) {
    SynthConfig cfg;
    cfg.n_periods = 3;
    cfg.samples_per_period = 10000;
    cfg.leak_rate = 0.4;
    cfg.seed = 9;
    auto r = gen_synthetic(cfg);
    auto train = synth_periods(r.dataset, cfg, 0, 2);
    auto test = synth_periods(r.dataset, cfg, 2, 3);
    ASSERT_EQ(test.size(), 10000u);
    EXPECT_NEAR(exact_leak_set(train, test).ratio, 0.4, 0.02);
}

TEST(Synth, LabelFlipPlantsConflicts) {
    auto cfg = small(4, 0.5);
    cfg.duplicate_label_flip = 1.0;
    auto r = gen_synthetic(cfg);
    ASSERT_FALSE(r.ground_truth.empty());
    for (const auto& d : r.ground_truth)
        EXPECT_NE(r.dataset.find(d.dup_id)->label, r.dataset.find(d.source_id)->label);
    std::size_t conflicts = 0;
    for (const auto& g : duplicate_groups(r.dataset)) conflicts += g.label_conflict();
    EXPECT_GT(conflicts, 0u);
}

TEST(Synth, DuplicateWindowLimitsSources) {
    auto cfg = small(8, 0.5);
    cfg.n_periods = 6;
    cfg.duplicate_window = 2;
    auto r = gen_synthetic(cfg);
    for (const auto& d : r.ground_truth) {
        auto dp = r.dataset.find(d.dup_id)->timestamp.ordinal();
        auto sp = r.dataset.find(d.source_id)->timestamp;
        EXPECT_FALSE(sp.plus_months(2).ordinal() < dp) << d.dup_id << " <- " << d.source_id;
    }
}

TEST(Synth, JitterKeepsCosineHigh) {
    SynthConfig cfg = small(10, 0.5);
    cfg.representation = {RepKind::embedding, 32, 0};
    cfg.near_leak_jitter = 0.24;  // cosine >= sqrt(1 - 0.24^2) > 0.97
    auto r = gen_synthetic(cfg);
    ASSERT_FALSE(r.ground_truth.empty());
    for (const auto& d : r.ground_truth) {
        EXPECT_FALSE(d.exact);
        double c = oracle::cosine(std::get<DenseEmbedding>(r.dataset.find(d.dup_id)->representation),
                                  std::get<DenseEmbedding>(r.dataset.find(d.source_id)->representation));
        EXPECT_GE(c, 0.97);
    }
}

TEST(Synth, InvalidConfig) {
    SynthConfig cfg;
    cfg.leak_rate = 1.5;
    EXPECT_THROW(gen_synthetic(cfg), DataError);
    cfg = {};
    cfg.near_leak_jitter = -0.1;
    EXPECT_THROW(gen_synthetic(cfg), DataError);
    cfg = {};
    cfg.n_periods = 0;
    EXPECT_THROW(gen_synthetic(cfg), DataError);
}

TEST(FlipFixture, InequalitiesHold) {
    auto fx = flip_fixture(1);
    EXPECT_FALSE(fx.leak_ids.empty());
    EXPECT_GT(*fx.memo_report.complete.ba, *fx.gen_report.complete.ba);
    EXPECT_GT(*fx.gen_report.nonleak_portion.ba, *fx.memo_report.nonleak_portion.ba);
    EXPECT_EQ(*fx.memo_report.leak_portion.ba, 1.0);
    EXPECT_EQ(fx.memo.predictions.size(), fx.test.size());
    EXPECT_EQ(fx.gen.predictions.size(), fx.test.size());
}

TEST(FlipFixture, DeterministicPerSeed) {
    auto a = flip_fixture(3), b = flip_fixture(3);
    EXPECT_EQ(a.memo, b.memo);
    EXPECT_EQ(a.gen, b.gen);
    EXPECT_EQ(a.leak_ids, b.leak_ids);
}

TEST(FlipFixture, NoLeakageFails) {
    FlipFixtureConfig cfg;
    cfg.synth.leak_rate = 0.0;
    EXPECT_THROW(flip_fixture(1, cfg), FixtureError);
}

}  // namespace
}  // namespace leakguard
