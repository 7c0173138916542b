#include <gtest/gtest.h>

#include <set>

#include <nlohmann/json.hpp>

#include "xmv/artifacts.hpp"
#include "xmv/errors.hpp"
#include "test_support.hpp"

namespace xmv {
namespace {

using nlohmann::json;

json feature_doc(std::vector<std::pair<std::string, double>> feats, const std::string& method = "SHAP") {
    json arr = json::array();
    json gloss = json::object();
    for (const auto& [n, s] : feats) {
        arr.push_back({{"name", n}, {"score", s}});
        gloss[n] = "desc of " + n;
    }
    return {{"method", method},
            {"dataset_id", "Toy"},
            {"context", {{"feature_glossary", gloss}}},
            {"payload", {{"features", arr}}}};
}

json grid_doc(std::size_t h, std::size_t w, std::vector<double> values) {
    return {{"method", "GradCAMpp"}, {"dataset_id", "Img"}, {"payload", {{"height", h}, {"width", w}, {"values", values}}}};
}

TEST(Artifacts, AllFixturesLoad) {
    for (const auto& n : test::fixture_names()) EXPECT_NO_THROW(test::load_fixture(n)) << n;
}

TEST(Artifacts, FeaturesSortedByAbsoluteScoreThenName) {
    auto a = artifact_from_json(feature_doc({{"b", 0.2}, {"a", -0.2}, {"c", 0.5}, {"d", -0.01}}));
    const auto& e = std::get<FeatureAttributions>(a.payload).entries;
    ASSERT_EQ(e.size(), 4u);
    EXPECT_EQ(e[0].name, "c");
    EXPECT_EQ(e[1].name, "a");
    EXPECT_EQ(e[2].name, "b");
    EXPECT_EQ(e[3].name, "d");
}

TEST(Artifacts, FeatureTextualizationFrames) {
    const auto t = textualize(test::load_fixture("acsincome_shap.json"));
    EXPECT_EQ(t.rfind("Method: SHAP. Dataset: ACSIncome. Features ranked by absolute score: 10.\n", 0), 0u);
    EXPECT_NE(t.find("Rank 1: WKHP, score +0.4123 (positive).\n"), std::string::npos);
    EXPECT_NE(t.find("Rank 10: RAC1P, score -0.0117 (negative).\n"), std::string::npos);
    EXPECT_NE(t.find("In summary, 10 features are listed"), std::string::npos);
}

TEST(Artifacts, TextualizeIsDeterministicAndOrderIndependent) {
    auto a = feature_doc({{"x1", 0.3}, {"x2", -0.1}, {"x3", 0.2}});
    auto b = a;
    std::swap(b["payload"]["features"][0], b["payload"]["features"][2]);
    EXPECT_EQ(textualize(artifact_from_json(a)), textualize(artifact_from_json(b)));
}

TEST(Artifacts, RejectsDuplicateAndUnglossedFeatures) {
    EXPECT_THROW(artifact_from_json(feature_doc({{"x", 0.1}, {"X", 0.2}})), SchemaError);
    auto d = feature_doc({{"x", 0.1}});
    d["context"]["feature_glossary"] = json::object();
    EXPECT_THROW(artifact_from_json(d), SchemaError);
}

TEST(Artifacts, MethodPayloadShapeMismatch) {
    EXPECT_THROW(artifact_from_json(feature_doc({{"x", 0.1}}, "GradCAMpp")), SchemaError);
    EXPECT_THROW(artifact_from_json(feature_doc({{"x", 0.1}}), XaiMethod::LIME), SchemaError);
    EXPECT_THROW(artifact_from_json(json{{"method", "Nope"}, {"dataset_id", "d"}, {"payload", json::object()}}),
                 SchemaError);
}

TEST(Artifacts, NonFiniteScoreRejected) {
    auto d = feature_doc({{"x", 0.1}});
    d["payload"]["features"][0]["score"] = "nan";
    EXPECT_THROW(artifact_from_json(d), Error);
}

TEST(Artifacts, RegionBlocksUseRemainderRule) {
    // 32 = 10 + 10 + 12
    EXPECT_EQ(region_block(9, 32), 0u);
    EXPECT_EQ(region_block(10, 32), 1u);
    EXPECT_EQ(region_block(19, 32), 1u);
    EXPECT_EQ(region_block(20, 32), 2u);
    EXPECT_EQ(region_block(31, 32), 2u);
    // extents below 3 keep every index in range
    EXPECT_LT(region_block(1, 2), 3u);
}

TEST(Artifacts, SaliencyPeakAndMass) {
    std::vector<double> v(9 * 9, 0.0);
    for (std::size_t r = 6; r < 9; ++r)
        for (std::size_t c = 0; c < 3; ++c) v[r * 9 + c] = 1.0;
    auto a = artifact_from_json(grid_doc(9, 9, v));
    const auto s = saliency_summary(std::get<SaliencyGrid>(a.payload));
    EXPECT_EQ(s.peak_region, Region::BottomLeft);
    EXPECT_DOUBLE_EQ(s.mass(Region::BottomLeft), 1.0);
    EXPECT_DOUBLE_EQ(s.total_activation, 9.0);
    const auto t = textualize(a);
    EXPECT_NE(t.find("Peak region: bottom-left."), std::string::npos);
    EXPECT_NE(t.find("Rank 1: bottom-left, activation mass 1.0000."), std::string::npos);
}

TEST(Artifacts, SaliencyRescaledWhenOutOfRange) {
    auto a = artifact_from_json(grid_doc(3, 3, {0, 2, 4, 0, 0, 0, 0, 0, 8}));
    const auto& g = std::get<SaliencyGrid>(a.payload);
    EXPECT_TRUE(g.scaling.applied);
    EXPECT_DOUBLE_EQ(g.scaling.raw_max, 8.0);
    EXPECT_DOUBLE_EQ(g.values[8], 1.0);
    EXPECT_DOUBLE_EQ(g.values[1], 0.25);
}

TEST(Artifacts, GridSizeMismatch) { EXPECT_THROW(artifact_from_json(grid_doc(2, 2, {0.1, 0.2, 0.3})), SchemaError); }

TEST(Artifacts, TokensDeduplicatedToTopDistinct) {
    const auto a = test::load_fixture("imdb_ig.json");
    const auto items = ranked_items(a);
    ASSERT_EQ(items.size(), 10u);
    EXPECT_EQ(items[0].name, "masterpiece");
    EXPECT_EQ(items[4].name, "dull");
    EXPECT_EQ(items[4].direction, Direction::Negative);
    std::set<std::string> names;
    for (const auto& i : items) names.insert(i.name);
    EXPECT_EQ(names.size(), items.size());
}

TEST(Artifacts, JsonRoundTrip) {
    for (const auto& n : test::fixture_names()) {
        const auto a = test::load_fixture(n);
        const auto b = artifact_from_json(artifact_to_json(a));
        EXPECT_EQ(textualize(a), textualize(b)) << n;
    }
}

TEST(Artifacts, LoadMissingFileIsIoError) { EXPECT_THROW(load_artifact("/nonexistent/x.json"), IoError); }

}  // namespace
}  // namespace xmv
