#include <gtest/gtest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "xmv/errors.hpp"
#include "xmv/hash.hpp"
#include "xmv/metrics.hpp"
#include "xmv/report.hpp"
#include "xmv/text.hpp"
#include "test_support.hpp"

namespace xmv {
namespace {

using nlohmann::json;

CaseTrace make_trace(const std::string& id, bool accepted, std::uint64_t seq, const std::string& explanation = "") {
    CaseTrace t;
    t.case_id = id;
    t.explainer_model = "ex";
    t.verifier_model = "ve";
    t.artifact_text = "Feature WKHP has attribution 0.41. Feature SCHL has attribution 0.22.";
    t.dispatch_seq = seq;
    Attempt a;
    a.explanation.text = explanation.empty() ? "Hours worked matter most. Schooling comes next." : explanation;
    a.verdict = Verdict{accepted ? Decision::Accept : Decision::Reject, "j",
                        accepted ? std::nullopt : std::optional(ErrorCategory::OmitFeature), ""};
    t.attempts.push_back(a);
    t.final_status = accepted ? FinalStatus::Accepted : FinalStatus::RejectedExhausted;
    t.llm_calls = 2;
    return t;
}

// Verifier decisions and labels laid out to give the requested confusion counts.
std::pair<std::vector<CaseTrace>, LabelMap> corpus(long long tp, long long tn, long long fp, long long fn) {
    std::vector<CaseTrace> ts;
    LabelMap labels;
    std::uint64_t seq = 0;
    auto add = [&](long long n, bool accepted, bool faithful) {
        for (long long i = 0; i < n; ++i) {
            const auto id = "c-" + std::to_string(seq);
            ts.push_back(make_trace(id, accepted, seq++));
            labels[id] = faithful;
        }
    };
    add(tp, true, true);
    add(tn, false, false);
    add(fp, true, false);
    add(fn, false, true);
    return {ts, labels};
}

std::vector<std::string> csv_lines(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == '\n') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

TEST(Report, TableOneRowFromCounts) {
    const auto [ts, labels] = corpus(713, 182, 27, 18);
    const auto recs = evaluate(ts, labels);
    const auto files = render_report(recs, {});
    const auto lines = csv_lines(files.at("table1.csv"));
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], join(kTable1Columns));
    EXPECT_EQ(lines[1], "ex,ve,940,713,182,27,18,21.28,78.72,95.21,96.94");

    const json* conf = nullptr;
    for (const auto& r : recs)
        if (r["type"] == "confusion") conf = &r;
    ASSERT_NE(conf, nullptr);
    EXPECT_EQ((*conf)["trace_ids"]["TP"].size(), 713u);
    EXPECT_EQ((*conf)["trace_ids"]["FN"].size(), 18u);
}

TEST(Report, GoldenHeaders) {
    const auto [ts, labels] = corpus(3, 2, 1, 1);
    const auto files = render_report(evaluate(ts, labels), {});
    EXPECT_EQ(csv_lines(files.at("table2.csv"))[0], join(kTable2Columns));
    EXPECT_EQ(csv_lines(files.at("table3.csv"))[0], join(kTable3Columns));
    for (const char* f : {"table1.csv", "table2.csv", "table3.csv", "fig_iterations.json", "fig_epr_by_iteration.json",
                          "fig_verifier_epr.json", "fig_roc.json", "records.json", "provenance.json", "report.md"})
        EXPECT_TRUE(files.count(f)) << f;
    EXPECT_TRUE(json::parse(files.at("fig_roc.json")).is_array());
}

TEST(Report, SyntheticGrid) {
    std::vector<CaseTrace> ts;
    LabelMap labels;
    std::uint64_t seq = 0;
    for (auto v : {PromptVariant::V0, PromptVariant::V2}) {
        for (int i = 0; i < 4; ++i) {
            auto t = make_trace("s" + std::to_string(seq), i != 3, seq);
            t.kind = "verify";
            t.verifier_variant = v;
            labels[t.case_id] = i < 2;
            ++seq;
            ts.push_back(t);
        }
    }
    const auto files = render_report(evaluate(ts, labels, {EvalSpace::Synthetic}), {});
    const auto lines = csv_lines(files.at("table2.csv"));
    ASSERT_EQ(lines.size(), 2u);
    // decisions A,A,A,R against labels F,F,E,E: tp 2, fp 1, tn 1
    EXPECT_EQ(lines[1], "ve,75.00,-,75.00,80.00,-,80.00");
    EXPECT_EQ(csv_lines(files.at("table1.csv")).size(), 1u);
}

TEST(Report, ReadabilityDeltas) {
    EXPECT_EQ(signed_delta(34.93, 18.53), "+16.40");
    EXPECT_EQ(signed_delta(12.94, 21.79), "-8.85");
    EXPECT_EQ(pct(0.952127), "95.21");

    const auto [ts, labels] = corpus(2, 0, 0, 0);
    const auto files = render_report(evaluate(ts, labels), {});
    const auto lines = csv_lines(files.at("table3.csv"));
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[1].rfind("Raw XAI,", 0), 0u);
    EXPECT_EQ(lines[2].rfind("ex,", 0), 0u);
    const auto raw = readability(ts[0].artifact_text);
    const auto exp = readability(ts[0].attempts[0].explanation.text);
    EXPECT_NE(lines[2].find(signed_delta(exp.reading_ease, raw.reading_ease)), std::string::npos);
}

TEST(Report, Errors) {
    EXPECT_THROW(evaluate({}, {}), EmptyCorpus);
    const auto [ts, labels] = corpus(2, 1, 0, 0);
    EXPECT_THROW(evaluate(ts, {}), MissingLabels);
    auto partial = labels;
    partial.erase(partial.begin());
    EXPECT_THROW(evaluate(ts, partial), MissingLabels);
    EXPECT_NO_THROW(evaluate(ts, {}, {EvalSpace::Refeed}));
}

TEST(Report, DeterministicAndOrderIndependent) {
    auto [ts, labels] = corpus(5, 3, 2, 1);
    Provenance p;
    p.config_hash = "abc";
    p.seed = 9;
    p.template_hashes = {{"explainer", "h1"}};
    const auto a = render_report(evaluate(ts, labels), p);
    std::reverse(ts.begin(), ts.end());
    const auto b = render_report(evaluate(ts, labels), p);
    EXPECT_EQ(a, b);
    EXPECT_EQ(Provenance::from_json(p.to_json()).to_json(), p.to_json());
    EXPECT_NE(a.at("report.md").find("abc"), std::string::npos);
}

TEST(Report, PublishedReferenceSection) {
    const auto [ts, labels] = corpus(3, 2, 1, 1);
    const auto ref = json::parse(read_file(test::fixture("published_values.json").string()));
    const auto files = render_report(evaluate(ts, labels), {}, std::optional<json>(ref));
    EXPECT_NE(files.at("report.md").find("Published reference values"), std::string::npos);
    EXPECT_NE(files.at("report.md").find("96.94"), std::string::npos);
}

TEST(Report, TracesFromLogKeepLastRecordInOrder) {
    auto a = make_trace("b", true, 1);
    auto b = make_trace("a", true, 0);
    auto a2 = a;
    a2.llm_calls = 4;
    const std::vector<json> log = {{{"type", "generation"}},
                                   {{"type", "trace"}, {"trace", to_json(a)}},
                                   {{"type", "trace"}, {"trace", to_json(b)}},
                                   {{"type", "trace"}, {"trace", to_json(a2)}}};
    const auto ts = traces_from_log(log);
    ASSERT_EQ(ts.size(), 2u);
    EXPECT_EQ(ts[0].case_id, "a");
    EXPECT_EQ(ts[1].case_id, "b");
    EXPECT_EQ(ts[1].llm_calls, 4);
}

TEST(Labels, Formats) {
    const auto a = labels_from_json(json::parse(R"({"x": "faithful", "y": "erroneous", "z": true, "w": {"faithful": false}})"));
    EXPECT_EQ(a, (LabelMap{{"x", true}, {"y", false}, {"z", true}, {"w", false}}));
    const auto b = labels_from_json(json::parse(R"([{"trace_id": "x", "label": "faithful"}])"));
    EXPECT_EQ(b, (LabelMap{{"x", true}}));
    EXPECT_EQ(labels_from_json(labels_to_json(a)), a);
    EXPECT_THROW(labels_from_json(json::parse(R"({"x": "maybe"})")), SchemaError);

    test::TempDir d;
    const auto p = d.path() / "labels.jsonl";
    std::ofstream(p) << "{\"trace_id\": \"q\", \"label\": false}\n\n{\"trace_id\": \"r\", \"label\": \"faithful\"}\n";
    EXPECT_EQ(load_labels(p), (LabelMap{{"q", false}, {"r", true}}));
}

TEST(Space, Names) {
    for (auto s : {EvalSpace::Natural, EvalSpace::Synthetic, EvalSpace::Refeed}) EXPECT_EQ(parse_space(to_string(s)), s);
    EXPECT_FALSE(parse_space("other"));
}

}  // namespace
}  // namespace xmv
