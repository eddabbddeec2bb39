#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "leakguard/io.hpp"
#include "leakguard/serialize.hpp"

namespace leakguard {
namespace {

TEST(LoadDataset, SparseThreeRows) {
    testing::TempDir dir("sparse3");
    auto meta = dir.write("m.jsonl", R"({"id":"c","label":"benign","timestamp":"2019-03"}
{"id":"a","label":"malicious","timestamp":"2019-01-15","family":"fam"}
{"id":"b","label":"benign","timestamp":"2019-02"}
)");
    auto reps = dir.write("r.jsonl", R"({"dim":8}
{"id":"a","indices":[0,3]}
{"id":"b","indices":[]}
{"id":"c","indices":[7]}
)");
    auto ds = load_dataset(meta, reps);
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds[0].id, "a");
    EXPECT_EQ(ds[1].id, "b");
    EXPECT_EQ(ds[2].id, "c");
    EXPECT_EQ(ds[0].family, "fam");
    EXPECT_EQ(ds.schema().dim, 8u);
    EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(LoadDataset, DuplicateIdReportsLine) {
    testing::TempDir dir("dupid");
    auto meta = dir.write("m.jsonl", R"({"id":"abc","label":"benign","timestamp":"2019-03"}
{"id":"abc","label":"benign","timestamp":"2019-03"}
)");
    auto reps = dir.write("r.jsonl", "{\"dim\":4}\n{\"id\":\"abc\",\"indices\":[1]}\n");
    try {
        load_dataset(meta, reps);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("duplicate id at line 2"), std::string::npos) << e.what();
    }
}

TEST(LoadDataset, Errors) {
    testing::TempDir dir("loaderr");
    auto reps = dir.write("r.jsonl", "{\"dim\":4}\n{\"id\":\"a\",\"indices\":[1]}\n");
    auto expect_line = [&](const std::string& meta, std::size_t line, const std::string& needle) {
        auto m = dir.write("m.jsonl", meta);
        try {
            load_dataset(m, reps);
            ADD_FAILURE() << "no error for " << meta;
        } catch (const DataError& e) {
            EXPECT_EQ(e.line(), line) << e.what();
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_line("{\"id\":\"a\",\"label\":\"grayware\",\"timestamp\":\"2019-03\"}\n", 1, "label");
    expect_line("{\"id\":\"a\",\"label\":\"benign\",\"timestamp\":\"2019-13\"}\n", 1, "timestamp");
    expect_line("{\"id\":\"a\",\"label\":\"benign\",\"timestamp\":\"2019-03\"}\n{\"id\":\"z\",\"label\":\"benign\",\"timestamp\":\"2019-03\"}\n",
                2, "missing representation");
    expect_line("not json\n", 1, "invalid JSON");

    auto m = dir.write("ok.jsonl", "");
    EXPECT_THROW(load_dataset(m, reps), DataError);  // representation for unknown id

    auto bad_idx = dir.write("bad.jsonl", "{\"dim\":4}\n{\"id\":\"a\",\"indices\":[5]}\n");
    auto meta = dir.write("m1.jsonl", "{\"id\":\"a\",\"label\":\"benign\",\"timestamp\":\"2019-03\"}\n");
    EXPECT_THROW(load_dataset(meta, bad_idx), DataError);
}

TEST(LoadDataset, BatchRatio) {
    testing::TempDir dir("batch");
    std::vector<Sample> samples;
    for (int i = 0; i < 4000; ++i)
        samples.push_back(testing::binary_sample("s" + std::to_string(i), {static_cast<std::uint32_t>(i % 5)}, 5,
                                                 i < 240 ? Label::malicious : Label::benign));
    write_dataset(testing::binary_dataset(samples), dir / "m.jsonl", dir / "r.jsonl");
    auto ds = load_dataset(dir / "m.jsonl", dir / "r.jsonl");
    EXPECT_EQ(ds.size(), 4000u);
    EXPECT_DOUBLE_EQ(ds.malware_ratio(), 0.06);
}

Dataset random_embedding_dataset(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> out;
    for (int i = 0; i < 50; ++i) {
        DenseEmbedding e;
        for (int d = 0; d < 7; ++d) e.values.push_back(static_cast<float>(rng.normal() * 1e3));
        e.values[0] = -0.0f;
        out.push_back({"e" + std::to_string(i), rng.bernoulli(0.2) ? Label::malicious : Label::benign,
                       Timestamp::date(2019, 1 + i % 12, 1 + static_cast<unsigned>(i % 28)), std::move(e), std::nullopt});
    }
    return Dataset::create(std::move(out), Schema{RepKind::embedding, 7});
}

TEST(RoundTrip, Lkge) {
    testing::TempDir dir("lkge");
    auto ds = random_embedding_dataset(1);
    write_dataset(ds, dir / "m.jsonl", dir / "e.lkge");
    EXPECT_TRUE(std::filesystem::exists(dir / "e.lkge.ids.jsonl"));
    EXPECT_EQ(std::filesystem::file_size(dir / "e.lkge"), 16u + 50u * 7u * 4u);
    auto back = load_dataset(dir / "m.jsonl", dir / "e.lkge");
    EXPECT_EQ(back, ds);
    EXPECT_TRUE(validate_dataset(back).empty());
}

TEST(RoundTrip, Csv) {
    testing::TempDir dir("csv");
    auto ds = random_embedding_dataset(2);
    write_dataset(ds, dir / "m.jsonl", dir / "e.csv", EmbeddingFormat::csv);
    EXPECT_EQ(load_dataset(dir / "m.jsonl", dir / "e.csv"), ds);
}

TEST(RoundTrip, CsvWithHeader) {
    testing::TempDir dir("csvh");
    auto meta = dir.write("m.jsonl", "{\"id\":\"a\",\"label\":\"benign\",\"timestamp\":\"2019-03\"}\n");
    auto csv = dir.write("e.csv", "id,v0,v1\na,0.5,-2\n");
    auto ds = load_dataset(meta, csv);
    EXPECT_EQ(std::get<DenseEmbedding>(ds[0].representation).values, (std::vector<float>{0.5f, -2.0f}));
}

TEST(RoundTrip, SparseRandom) {
    testing::TempDir dir("sparse");
    Rng rng(4);
    auto [train, test] = testing::random_pair(rng, RepKind::binary, 100, 0, 16, 0);
    write_dataset(train, dir / "m.jsonl", dir / "r.jsonl");
    EXPECT_EQ(load_dataset(dir / "m.jsonl", dir / "r.jsonl"), train);
}

TEST(Lkge, CorruptHeader) {
    testing::TempDir dir("lkgebad");
    auto ds = random_embedding_dataset(3);
    write_dataset(ds, dir / "m.jsonl", dir / "e.lkge");
    std::filesystem::resize_file(dir / "e.lkge", 100);
    EXPECT_THROW(load_dataset(dir / "m.jsonl", dir / "e.lkge"), DataError);
}

TEST(Lkge, ExplicitSidecar) {
    testing::TempDir dir("lkgeside");
    auto ds = random_embedding_dataset(5);
    write_dataset(ds, dir / "m.jsonl", dir / "e.lkge");
    std::filesystem::rename(dir / "e.lkge.ids.jsonl", dir / "rows.jsonl");
    EXPECT_THROW(load_dataset(dir / "m.jsonl", dir / "e.lkge"), DataError);
    EXPECT_EQ(load_dataset(dir / "m.jsonl", dir / "e.lkge", dir / "rows.jsonl"), ds);
}

TEST(Schedule, RoundTripAndDefaults) {
    testing::TempDir dir("sched");
    AdditionsSchedule s{{{"2019-01", {"a", "b"}, 5}, {"2019-02", {}, 0}}};
    write_schedule(s, dir / "s.jsonl");
    auto back = load_schedule(dir / "s.jsonl");
    EXPECT_EQ(back.entries, s.entries);
    auto nobudget = dir.write("n.jsonl", "{\"period\":\"2019-01\",\"add_ids\":[\"a\"]}\n");
    EXPECT_EQ(load_schedule(nobudget).entries[0].budget, 1u);
    auto twice = dir.write("t.jsonl", "{\"period\":\"x\",\"add_ids\":[]}\n{\"period\":\"x\",\"add_ids\":[]}\n");
    EXPECT_THROW(load_schedule(twice), DataError);
}

TEST(GroundTruth, RoundTrip) {
    testing::TempDir dir("gt");
    std::vector<PlantedDuplicate> gt{{"d1", "s1", true}, {"d2", "s2", false}};
    write_ground_truth(gt, dir / "g.jsonl");
    EXPECT_EQ(load_ground_truth(dir / "g.jsonl"), gt);
}

TEST(Serialize, MetricsUseNullForUndefined) {
    auto j = to_json(metrics_from_counts({0, 0, 10, 0}));
    EXPECT_TRUE(j["fnr"].is_null());
    EXPECT_TRUE(j["ba"].is_null());
    EXPECT_EQ(j["specificity"].get<double>(), 1.0);
    EXPECT_EQ(j["counts"]["tn"].get<int>(), 10);
}

TEST(Serialize, LeakageReportRoundTrip) {
    LeakageReport r;
    r.kind = ReportKind::near;
    r.threshold = 0.95;
    r.test_size = 4;
    r.matches = {{"x", {"a", "b"}, LeakKind::near, 0.97}, {"y", {"c"}, LeakKind::near, 1.0}};
    detail::finalize(r);
    auto j = to_json(r);
    EXPECT_EQ(j["ratio"].get<double>(), 0.5);
    EXPECT_EQ(leakage_report_from_json(nlohmann::json::parse(j.dump())), r);
}

}  // namespace
}  // namespace leakguard
