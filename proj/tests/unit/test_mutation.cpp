#include <gtest/gtest.h>

#include <set>

#include <nlohmann/json.hpp>

#include "xmv/errors.hpp"
#include "xmv/mutation.hpp"
#include "xmv/text.hpp"
#include "test_support.hpp"

namespace xmv {
namespace {

class PerFixture : public ::testing::TestWithParam<std::string> {};

TEST_P(PerFixture, CheckerAcceptsReferenceExplanations) {
    const auto art = test::load_fixture(GetParam());
    for (std::uint64_t s = 0; s < 16; ++s) {
        const auto text = reference_explanation(art, s);
        const auto v = check_against_truth(text, art);
        EXPECT_TRUE(v.empty()) << "seed " << s << ": " << (v.empty() ? "" : v[0].evidence) << "\n" << text;
    }
}

TEST_P(PerFixture, CheckerDoesNotFlagTheArtifactText) {
    const auto art = test::load_fixture(GetParam());
    const auto text = textualize(art);
    for (const auto& v : check_against_truth(text, art)) {
        EXPECT_NE(v.category, ErrorCategory::NegateRelation) << v.evidence;
        EXPECT_NE(v.category, ErrorCategory::SwapTopFeature) << v.evidence;
        EXPECT_NE(v.category, ErrorCategory::SwapMinorFeature) << v.evidence;
        EXPECT_NE(v.category, ErrorCategory::InsertHallucination) << v.evidence;
    }
}

TEST_P(PerFixture, EveryApplicableOperatorIsDetected) {
    const auto art = test::load_fixture(GetParam());
    int applied = 0;
    for (std::uint64_t s = 0; s < 8; ++s) {
        const auto text = reference_explanation(art, s);
        for (auto op : kAllCategories) {
            try {
                const auto m = mutate(text, art, op, derive_seed(99, s, static_cast<std::uint64_t>(op)));
                ++applied;
                EXPECT_NE(m.mutated, text);
                EXPECT_EQ(m.original, text);
                EXPECT_EQ(m.op, op);
                EXPECT_TRUE(has_violation(check_against_truth(m.mutated, art), op))
                    << to_string(op) << " seed " << s << "\n" << m.mutated;
            } catch (const InapplicableOperator&) {
            }
        }
    }
    EXPECT_GT(applied, 0);
}

TEST_P(PerFixture, MutationIsDeterministic) {
    const auto art = test::load_fixture(GetParam());
    const auto text = reference_explanation(art, 3);
    for (auto op : kAllCategories) {
        try {
            const auto a = mutate(text, art, op, 1234);
            const auto b = mutate(text, art, op, 1234);
            EXPECT_EQ(a.mutated, b.mutated);
            EXPECT_EQ(a.mutation_note, b.mutation_note);
        } catch (const InapplicableOperator&) {
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Fixtures, PerFixture, ::testing::ValuesIn(test::fixture_names()),
                         [](const auto& info) { return info.param.substr(0, info.param.find('.')); });

TEST(Mutation, NegateNotApplicableToUnsignedSaliency) {
    const auto art = test::load_fixture("cifar10_gradcampp.json");
    EXPECT_THROW(mutate(reference_explanation(art, 0), art, ErrorCategory::NegateRelation, 1), InapplicableOperator);
}

TEST(Mutation, SwapNeedsTwoMentionedItems) {
    const auto art = test::load_fixture("acsincome_shap.json");
    EXPECT_THROW(mutate("WKHP ranks first. In summary, that is all.", art, ErrorCategory::SwapTopFeature, 1),
                 InapplicableOperator);
}

TEST(Mutation, OmitRemovesTheTopItem) {
    const auto art = test::load_fixture("acsincome_shap.json");
    const auto m = mutate(reference_explanation(art, 0), art, ErrorCategory::OmitFeature, 5);
    EXPECT_FALSE(has_violation(check_against_truth(m.original, art), ErrorCategory::OmitFeature));
    EXPECT_TRUE(has_violation(check_against_truth(m.mutated, art), ErrorCategory::OmitFeature));
}

TEST(Mutation, TruncationDropsTheConclusion) {
    const auto art = test::load_fixture("diamonds_lime.json");
    const auto m = mutate(reference_explanation(art, 1), art, ErrorCategory::TruncateResponse, 5);
    const auto sentences = text::split_sentences(m.mutated);
    ASSERT_FALSE(sentences.empty());
    EXPECT_FALSE(is_closing_sentence(sentences.back()));
}

TEST(Mutation, HallucinationUsesLexiconName) {
    const auto art = test::load_fixture("wine_ebm.json");
    const auto m = mutate(reference_explanation(art, 2), art, ErrorCategory::InsertHallucination, 11);
    bool found = false;
    for (const auto& name : hallucination_lexicon())
        if (m.mutated.find(name) != std::string::npos && m.original.find(name) == std::string::npos) found = true;
    EXPECT_TRUE(found);
}

TEST(RankClaims, Grammar) {
    EXPECT_EQ(rank_claims("WKHP ranks third."), std::vector<int>{3});
    EXPECT_EQ(rank_claims("SCHL is at rank 4 overall."), std::vector<int>{4});
    EXPECT_EQ(rank_claims("AGEP (#2) follows."), std::vector<int>{2});
    EXPECT_EQ(rank_claims("WKHP is the most influential feature."), std::vector<int>{1});
    EXPECT_TRUE(rank_claims("The model is influenced by hours.").empty());
}

TEST(Checker, FlagsSignFlip) {
    const auto art = test::load_fixture("acsincome_shap.json");
    const auto v = check_against_truth("Overall, the prediction is driven by a few features. "
                                       "WKHP ranks first and decreases the prediction. "
                                       "SCHL ranks second and increases the prediction. "
                                       "AGEP ranks third and increases the prediction. "
                                       "In summary, hours and schooling dominate.",
                                       art);
    EXPECT_TRUE(has_violation(v, ErrorCategory::NegateRelation));
}

TEST(Checker, FlagsWrongTopRank) {
    const auto art = test::load_fixture("acsincome_shap.json");
    const auto v = check_against_truth("Overall, the prediction is driven by a few features. "
                                       "SCHL ranks first and increases the prediction. "
                                       "WKHP ranks second and increases the prediction. "
                                       "AGEP ranks third and increases the prediction. "
                                       "In summary, hours and schooling dominate.",
                                       art);
    EXPECT_TRUE(has_violation(v, ErrorCategory::SwapTopFeature));
}

TEST(SyntheticCorpus, BalancedAndReported) {
    std::vector<XaiArtifact> arts;
    for (const auto& n : test::fixture_names()) arts.push_back(test::load_fixture(n));
    std::vector<ValidExplanation> valid;
    for (const auto& a : arts)
        for (std::uint64_t s = 0; s < 4; ++s) valid.push_back({reference_explanation(a, s), &a});
    const std::vector<ErrorCategory> ops(kAllCategories.begin(), kAllCategories.end());
    const auto c = build_synthetic_corpus(valid, ops, 42);
    std::map<ErrorCategory, int> per_op;
    for (const auto& it : c.items) ++per_op[it.mutant.op];
    ASSERT_EQ(per_op.size(), ops.size());
    for (const auto& [op, n] : per_op) EXPECT_EQ(n, per_op.begin()->second) << to_string(op);
    EXPECT_EQ(c.items.size() + c.skipped.size(), valid.size() * ops.size());

    std::set<std::string> ids;
    for (const auto& it : c.items) {
        EXPECT_TRUE(ids.insert(it.id).second);
        const auto back = synthetic_item_from_json(to_json(it));
        EXPECT_EQ(back.mutant.mutated, it.mutant.mutated);
        EXPECT_EQ(back.source_index, it.source_index);
    }

    const auto again = build_synthetic_corpus(valid, ops, 42);
    ASSERT_EQ(again.items.size(), c.items.size());
    for (std::size_t i = 0; i < c.items.size(); ++i) EXPECT_EQ(again.items[i].mutant.mutated, c.items[i].mutant.mutated);
}

TEST(Seeds, Splitmix) {
    std::uint64_t s = 0;
    EXPECT_EQ(splitmix64(s), 0xe220a8397b1dcdafULL);
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
}

}  // namespace
}  // namespace xmv
