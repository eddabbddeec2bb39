#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "leakguard/core.hpp"

namespace leakguard {
namespace {

using testing::binary_sample;
using testing::embedding_sample;

TEST(Timestamp, ParsesMonthAndDay) {
    auto m = Timestamp::parse("2019-03");
    auto d = Timestamp::parse("2019-03-01");
    ASSERT_TRUE(m && d);
    EXPECT_EQ(*m, *d);  // a month compares as its first day
    EXPECT_EQ(m->to_string(), "2019-03");
    EXPECT_EQ(d->to_string(), "2019-03-01");
    EXPECT_LT(*Timestamp::parse("2019-02-28"), *m);
    EXPECT_LT(*m, *Timestamp::parse("2019-03-02"));
}

TEST(Timestamp, RejectsMalformed) {
    for (const char* s : {"2019", "2019-13", "2019-00", "2019-02-30", "19-03-01", "2019/03", "2019-3", "abcd-ef", ""})
        EXPECT_FALSE(Timestamp::parse(s)) << s;
    EXPECT_TRUE(Timestamp::parse("2020-02-29"));
}

TEST(Timestamp, PlusMonths) {
    EXPECT_EQ(Timestamp::month(2018, 11).plus_months(3).to_string(), "2019-02");
    EXPECT_EQ(Timestamp::month(2018, 1).plus_months(-1).to_string(), "2017-12");
    EXPECT_EQ(Timestamp::date(2018, 5, 17).month_period().to_string(), "2018-05");
}

TEST(Dataset, SortsByTimestampThenId) {
    auto ds = testing::binary_dataset({binary_sample("b", {1}, 5, Label::benign, Timestamp::month(2019, 2)),
                                       binary_sample("c", {2}, 5, Label::benign, Timestamp::month(2019, 1)),
                                       binary_sample("a", {3}, 5, Label::benign, Timestamp::month(2019, 2))});
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds[0].id, "c");
    EXPECT_EQ(ds[1].id, "a");
    EXPECT_EQ(ds[2].id, "b");
    EXPECT_NE(ds.find("a"), nullptr);
    EXPECT_EQ(ds.find("zz"), nullptr);
}

TEST(Dataset, CreateRejectsDuplicateIds) {
    EXPECT_THROW(testing::binary_dataset({binary_sample("a", {1}), binary_sample("a", {2})}), DataError);
}

TEST(ValidateDataset, ValidIsEmpty) {
    auto ds = testing::binary_dataset({binary_sample("a", {0, 4}), binary_sample("b", {})});
    EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(ValidateDataset, NaNEmbeddingCitesSample) {
    auto ds = Dataset::unchecked({embedding_sample("ok", {1.f, 2.f}), embedding_sample("bad", {NAN, 1.f})},
                                 Schema{RepKind::embedding, 2});
    auto v = validate_dataset(ds);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].sample_id, "bad");
    EXPECT_EQ(v[0].invariant, "finite embedding");
}

TEST(ValidateDataset, MixedDims) {
    std::vector<Sample> s;
    s.push_back(binary_sample("a", {1}, 100));
    s.push_back(binary_sample("b", {1}, 101));
    auto v = validate_dataset(Dataset::unchecked(std::move(s), Schema{RepKind::binary, 100}));
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].sample_id, "b");
    EXPECT_NE(v[0].message.find("schema dim mismatch"), std::string::npos);
}

TEST(ValidateDataset, MalformedIndicesAndKind) {
    std::vector<Sample> s;
    s.push_back(binary_sample("unsorted", {3, 1}));
    s.push_back(binary_sample("range", {7}));
    s.push_back(embedding_sample("kind", std::vector<float>(5, 1.f)));
    auto v = validate_dataset(Dataset::unchecked(std::move(s), Schema{RepKind::binary, 5}));
    ASSERT_EQ(v.size(), 3u);
}

TEST(BinaryFeatureVector, EqualityNeedsDimAndIndices) {
    BinaryFeatureVector a{5, {1, 3}}, b{5, {1, 3}}, c{6, {1, 3}}, d{5, {1}};
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_NE(a, d);
}

TEST(DenseEmbedding, BitwiseEquality) {
    DenseEmbedding a{{0.0f, 1.0f}}, b{{-0.0f, 1.0f}}, c{{0.0f, 1.0f}};
    EXPECT_EQ(a, c);
    EXPECT_NE(a, b);
}

TEST(Dataset, ConcatAndSubset) {
    auto a = testing::binary_dataset({binary_sample("a", {1}), binary_sample("b", {2})});
    auto b = testing::binary_dataset({binary_sample("c", {3})});
    auto all = concat(a, b);
    EXPECT_EQ(all.size(), 3u);
    EXPECT_EQ(all.subset({"a", "c"}).size(), 2u);
    EXPECT_THROW(concat(a, a), DataError);
}

}  // namespace
}  // namespace leakguard
