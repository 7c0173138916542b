#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "xmv/errors.hpp"
#include "xmv/hash.hpp"
#include "xmv/metrics.hpp"
#include "xmv/pipeline.hpp"
#include "test_support.hpp"

namespace xmv {
namespace {

using nlohmann::json;

TEST(Confusion, PublishedRowsWithinTolerance) {
    const auto pub = json::parse(read_file(test::fixture("published_values.json").string()));
    for (const auto& row : pub["table1"]) {
        ConfusionCounts c{row["tp"], row["tn"], row["fp"], row["fn"]};
        EXPECT_EQ(c.n(), row["samples"].get<long long>());
        const auto m = confusion_metrics(c);
        EXPECT_NEAR(100 * m.accuracy, row["acc"].get<double>(), 0.05) << row.dump();
        EXPECT_NEAR(100 * m.f1, row["f1"].get<double>(), 0.05) << row.dump();
    }
}

TEST(Confusion, ExplainerRates) {
    const auto r = explainer_rates({713, 182, 27, 18});
    EXPECT_NEAR(r.err_rate, 0.2128, 1e-4);
    EXPECT_NEAR(r.only_acc, 0.7872, 1e-4);
    EXPECT_DOUBLE_EQ(r.err_rate + r.only_acc, 1.0);
    EXPECT_EQ(explainer_rates({5, 0, 0, 0}).err_rate, 0.0);
    EXPECT_EQ(explainer_rates({0, 5, 0, 0}).err_rate, 1.0);
}

TEST(Confusion, Degenerate) {
    EXPECT_THROW(confusion_metrics({}), DegenerateError);
    EXPECT_THROW(f1_score({0, 4, 0, 0}), DegenerateError);
    EXPECT_DOUBLE_EQ(accuracy({0, 4, 0, 0}), 1.0);
}

TEST(Confusion, F1IgnoresTrueNegativesAndIsSymmetricInErrors) {
    std::mt19937 rng(3);
    for (int i = 0; i < 200; ++i) {
        auto r = [&](int m) { return static_cast<long long>(rng() % m); };
        ConfusionCounts c{r(50) + 1, r(50), r(50), r(50)};
        auto d = c;
        d.tn += r(100);
        EXPECT_DOUBLE_EQ(f1_score(c), f1_score(d));
        auto e = c;
        std::swap(e.fp, e.fn);
        EXPECT_DOUBLE_EQ(f1_score(c), f1_score(e));
        EXPECT_GE(f1_score(c), 0.0);
        EXPECT_LE(f1_score(c), 1.0);
    }
}

TEST(Classify, Quadrants) {
    EXPECT_EQ(classify(true, true), Outcome::TP);
    EXPECT_EQ(classify(true, false), Outcome::FP);
    EXPECT_EQ(classify(false, true), Outcome::FN);
    EXPECT_EQ(classify(false, false), Outcome::TN);
}

TEST(Readability, SyllableOracle) {
    std::ifstream in(test::fixture("syllables.tsv"));
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        const auto word = line.substr(0, tab);
        EXPECT_EQ(count_syllables(word), std::stoi(line.substr(tab + 1))) << word;
        ++rows;
    }
    EXPECT_GE(rows, 40);
}

TEST(Readability, SentenceOracle) {
    const auto cases = json::parse(read_file(test::fixture("readability.json").string()));
    for (const auto& c : cases) {
        const auto r = readability(c["text"].get<std::string>());
        EXPECT_EQ(r.words, c["words"].get<long long>());
        EXPECT_EQ(r.sentences, c["sentences"].get<long long>());
        EXPECT_EQ(r.syllables, c["syllables"].get<long long>());
        EXPECT_NEAR(r.reading_ease, c["reading_ease"].get<double>(), 1e-6);
        EXPECT_NEAR(r.grade_level, c["grade_level"].get<double>(), 1e-6);
    }
}

TEST(Readability, Errors) {
    EXPECT_THROW(readability(""), EmptyText);
    EXPECT_THROW(readability(" ... !! "), EmptyText);
    EXPECT_EQ(count_syllables("x"), 1);
}

TokenLogprobs rec(std::vector<double> lps) {
    TokenLogprobs t;
    for (std::size_t i = 0; i < lps.size(); ++i) t.candidates.push_back({"t" + std::to_string(i), lps[i]});
    t.chosen_token = t.candidates.empty() ? "" : t.candidates[0].token;
    return t;
}

TEST(Entropy, TokenEntropy) {
    EXPECT_NEAR(token_entropy(rec({0.0})), 0.0, 1e-12);
    EXPECT_NEAR(token_entropy(rec({std::log(0.5), std::log(0.5)})), std::log(2.0), 1e-12);
    // renormalization makes the entropy invariant to a common shift
    const auto a = token_entropy(rec({-0.3, -1.2, -2.5}));
    const auto b = token_entropy(rec({-3.3, -4.2, -5.5}));
    EXPECT_NEAR(a, b, 1e-12);
}

TEST(Entropy, Trace) {
    const std::vector<TokenLogprobs> r = {rec({0.0}), rec({std::log(0.5), std::log(0.5)}), rec({0.0})};
    const auto t = entropy_trace(r);
    ASSERT_EQ(t.per_token_entropy.size(), 3u);
    EXPECT_NEAR(t.epr, std::log(2.0), 1e-12);
    auto rev = r;
    std::reverse(rev.begin(), rev.end());
    EXPECT_NEAR(entropy_trace(rev).epr, t.epr, 1e-12);
    EXPECT_THROW(entropy_trace({rec({0.0})}), TooShort);
    EXPECT_THROW(entropy_trace({rec({0.0}), rec({NAN})}), InvalidLogprob);
}

TEST(Entropy, ConstantIsZero) {
    std::vector<TokenLogprobs> r(10, rec({-0.1, -2.0, -3.0}));
    EXPECT_NEAR(entropy_trace(r).epr, 0.0, 1e-12);
}

TEST(AgrestiCoull, RefeedAcceptance) {
    const auto i = agresti_coull(63, 65, 0.95);
    EXPECT_NEAR(i.lo, 0.888, 5e-4);
    EXPECT_NEAR(i.hi, 0.998, 5e-4);
    EXPECT_NEAR(i.margin, 0.0547, 5e-5);
    EXPECT_NEAR(100 * i.lo, 88.7, 0.5);
    EXPECT_NEAR(100 * i.hi, 99.7, 0.5);
    EXPECT_NEAR(100 * i.margin, 5.51, 0.1);
    EXPECT_EQ(agresti_coull(0, 10, 0.95).lo, 0.0);
    EXPECT_THROW(agresti_coull(1, 0, 0.95), DomainError);
    EXPECT_THROW(agresti_coull(5, 4, 0.95), DomainError);
    EXPECT_THROW(agresti_coull(1, 4, 1.5), DomainError);
}

TEST(AgrestiCoull, ContainsPointEstimate) {
    std::mt19937 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const long long n = 1 + static_cast<long long>(rng() % 500);
        const long long x = static_cast<long long>(rng()) % (n + 1);
        const auto iv = agresti_coull(x, n, 0.95);
        const double p = static_cast<double>(x) / static_cast<double>(n);
        EXPECT_LE(iv.lo, p + 1e-12);
        EXPECT_GE(iv.hi, p - 1e-12);
        EXPECT_GE(iv.lo, 0.0);
        EXPECT_LE(iv.hi, 1.0);
    }
}

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0;
    long long pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                ++pairs;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return wins / static_cast<double>(pairs);
}

TEST(Roc, MatchesPairwiseCount) {
    std::mt19937 rng(5);
    int checked = 0;
    while (checked < 100) {
        const int n = 2 + static_cast<int>(rng() % 19);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng() % 6) / 5.0;  // ties on purpose
            y[i] = static_cast<int>(rng() % 2);
        }
        if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) continue;
        const auto r = roc_auc(s, y);
        EXPECT_NEAR(r.auc, brute_auc(s, y), 1e-12);
        EXPECT_EQ(r.curve.front(), std::make_pair(0.0, 0.0));
        EXPECT_EQ(r.curve.back(), std::make_pair(1.0, 1.0));
        ++checked;
    }
}

TEST(Roc, Examples) {
    EXPECT_DOUBLE_EQ(roc_auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}).auc, 1.0);
    EXPECT_DOUBLE_EQ(roc_auc({0.5, 0.5, 0.5}, {1, 0, 1}).auc, 0.5);
    EXPECT_DOUBLE_EQ(roc_auc({0.9, 0.8, 0.3}, {1, 0, 1}).auc, 0.5);
    EXPECT_THROW(roc_auc({0.1, 0.2}, {1, 1}), SingleClassError);
    EXPECT_THROW(roc_auc({0.1}, {1, 0}), ValueError);
    EXPECT_THROW(roc_auc({0.1, 0.2}, {1, 2}), ValueError);
}

TEST(Stats, Quartiles) {
    const auto q = quartiles({4, 1, 3, 2, 5});
    EXPECT_DOUBLE_EQ(q.q1, 2.0);
    EXPECT_DOUBLE_EQ(q.median, 3.0);
    EXPECT_DOUBLE_EQ(q.q3, 4.0);
    EXPECT_EQ(q.count, 5u);
    EXPECT_DOUBLE_EQ(quantile_sorted({1, 2}, 0.5), 1.5);
}

TEST(Stats, MeanStd) {
    const auto m = mean_std({0.4, 0.6});
    EXPECT_NEAR(m.mean, 0.5, 1e-12);
    EXPECT_NEAR(m.std, 0.1414, 1e-4);
    EXPECT_THROW(mean_std({1.0}), TooFewSamples);
}

CaseTrace trace_with(const std::string& id, std::vector<std::vector<TokenLogprobs>> per_attempt, bool accept = true) {
    CaseTrace t;
    t.case_id = id;
    int idx = 1;
    for (auto& r : per_attempt) {
        Attempt a;
        a.index = idx++;
        a.explanation.token_records = r;
        a.verifier_output.token_records = r;
        a.verdict = Verdict{accept ? Decision::Accept : Decision::Reject, "j",
                            accept ? std::nullopt : std::optional(ErrorCategory::OmitFeature), ""};
        t.attempts.push_back(a);
    }
    t.K = static_cast<int>(t.attempts.size()) - 1;
    t.final_status = accept ? FinalStatus::Accepted : FinalStatus::RejectedExhausted;
    return t;
}

TEST(Aggregations, EprByIteration) {
    const std::vector<TokenLogprobs> flat(4, rec({0.0}));
    const std::vector<TokenLogprobs> jumpy = {rec({0.0}), rec({std::log(0.5), std::log(0.5)})};
    const std::vector<CaseTrace> ts = {trace_with("a", {flat, jumpy}), trace_with("b", {jumpy}),
                                       trace_with("c", {{rec({0.0})}})};
    const auto g = epr_by_iteration(ts);
    ASSERT_EQ(g.size(), 2u);
    EXPECT_EQ(g.at(1).count, 2u);  // "c" has a single token record
    EXPECT_EQ(g.at(2).count, 1u);
    EXPECT_NEAR(g.at(2).median, std::log(2.0), 1e-12);
}

TEST(Aggregations, EprDistribution) {
    const std::vector<TokenLogprobs> jumpy = {rec({0.0}), rec({std::log(0.5), std::log(0.5)})};
    const std::vector<CaseTrace> ts = {trace_with("a", {jumpy}), trace_with("b", {jumpy}),
                                       trace_with("c", {jumpy}, false)};
    const std::map<std::string, bool> labels = {{"a", true}, {"b", true}, {"c", false}};
    const auto tp = epr_distribution(ts, labels, Outcome::TP);
    EXPECT_EQ(tp.count, 2u);
    EXPECT_NEAR(tp.mean, std::log(2.0), 1e-12);
    EXPECT_THROW(epr_distribution(ts, labels, Outcome::TN), TooFewSamples);
}

}  // namespace
}  // namespace xmv
