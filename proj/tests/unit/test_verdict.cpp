#include <gtest/gtest.h>

#include "xmv/errors.hpp"
#include "xmv/verdict.hpp"

namespace xmv {
namespace {

const ErrorCategory kAll[] = {ErrorCategory::SwapTopFeature,  ErrorCategory::SwapMinorFeature,
                              ErrorCategory::NegateRelation,  ErrorCategory::OmitFeature,
                              ErrorCategory::InsertHallucination, ErrorCategory::TruncateResponse};

TEST(Verdict, CategoryNamesRoundTrip) {
    for (auto c : kAll) EXPECT_EQ(parse_category(to_string(c)), c);
    EXPECT_EQ(parse_category("swaptopfeature"), ErrorCategory::SwapTopFeature);
    EXPECT_FALSE(parse_category("Bogus"));
}

TEST(Verdict, SevenValidCombinationsRoundTrip) {
    std::vector<std::string> raws{compose_response(Decision::Accept, std::nullopt, "Faithful.")};
    for (auto c : kAll) raws.push_back(compose_response(Decision::Reject, c, "Wrong on " + std::string(to_string(c))));
    ASSERT_EQ(raws.size(), 7u);
    for (std::size_t i = 0; i < raws.size(); ++i) {
        const auto v = parse_verdict(raws[i]);
        EXPECT_EQ(v.decision, i == 0 ? Decision::Accept : Decision::Reject);
        if (i == 0)
            EXPECT_FALSE(v.error_category);
        else
            EXPECT_EQ(v.error_category, kAll[i - 1]);
        EXPECT_EQ(compose_response(v.decision, v.error_category, v.justification), raws[i]);
        EXPECT_FALSE(v.used_fallback);
    }
}

TEST(Verdict, ReasoningIsIgnored) {
    const auto raw = "<think>DECISION: REJECT\nERROR_TYPE: OmitFeature</think>\n" +
                     compose_response(Decision::Accept, std::nullopt, "Fine.");
    const auto v = parse_verdict(raw);
    EXPECT_EQ(v.decision, Decision::Accept);
    EXPECT_EQ(v.justification, "Fine.");
}

TEST(Verdict, LastOccurrenceWinsAndKeysAreCaseInsensitive) {
    const auto v = parse_verdict("decision: accept\nDecision: REJECT\nerror_type: NegateRelation\njustification: flipped");
    EXPECT_EQ(v.decision, Decision::Reject);
    EXPECT_EQ(v.error_category, ErrorCategory::NegateRelation);
}

TEST(Verdict, MultiLineJustification) {
    const auto v = parse_verdict("DECISION: REJECT\nERROR_TYPE: OmitFeature\nJUSTIFICATION: first line\nsecond line");
    EXPECT_NE(v.justification.find("second line"), std::string::npos);
}

TEST(Verdict, MarkdownDecorationTolerated) {
    const auto v = parse_verdict("**DECISION:** ACCEPT\n**ERROR_TYPE:** NONE\n**JUSTIFICATION:** ok");
    EXPECT_EQ(v.decision, Decision::Accept);
}

TEST(Verdict, GarbledInputsAreParseErrors) {
    const char* garbled[] = {"",
                             "I am not sure.",
                             "DECISION: MAYBE\nERROR_TYPE: NONE\nJUSTIFICATION: x",
                             "DECISION: REJECT\nERROR_TYPE: Bogus\nJUSTIFICATION: x",
                             "DECISION: REJECT\nERROR_TYPE: NONE\nJUSTIFICATION: x",
                             "I would accept or reject this depending on the view.",
                             "<think>DECISION: ACCEPT</think>"};
    for (const char* g : garbled) EXPECT_THROW(parse_verdict(g), ParseError) << g;
}

TEST(Verdict, KeywordFallback) {
    const auto v = parse_verdict("After checking everything I reject it because of an InsertHallucination.");
    EXPECT_EQ(v.decision, Decision::Reject);
    EXPECT_EQ(v.error_category, ErrorCategory::InsertHallucination);
    EXPECT_TRUE(v.used_fallback);
}

TEST(Verdict, AcceptWithCategoryWarns) {
    const auto v = parse_verdict("DECISION: ACCEPT\nERROR_TYPE: OmitFeature\nJUSTIFICATION: fine");
    EXPECT_EQ(v.decision, Decision::Accept);
    EXPECT_FALSE(v.error_category);
    EXPECT_FALSE(v.warnings.empty());
}

}  // namespace
}  // namespace xmv
