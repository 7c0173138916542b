#include <gtest/gtest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "xmv/errors.hpp"
#include "xmv/pipeline.hpp"
#include "xmv/runlog.hpp"
#include "test_support.hpp"

namespace xmv {
namespace {

using nlohmann::json;

const std::string kAccept = compose_response(Decision::Accept, std::nullopt, "Faithful to the artifact.");
const std::string kReject = compose_response(Decision::Reject, ErrorCategory::OmitFeature, "AGEP is never mentioned.");
const std::string kGarbled = "hard to say";

PipelineConfig config(int kmax = 10) {
    PipelineConfig c;
    c.k_max = kmax;
    c.explainer.model_name = "ex";
    c.verifier.model_name = "ve";
    return c;
}

struct Harness {
    explicit Harness(std::vector<MockStep> verifier, std::vector<MockStep> explainer = {{"Some explanation."}},
                     bool cycle = true)
        : backend(std::make_shared<MockBackend>(std::move(explainer), std::move(verifier), cycle)),
          log(dir.path() / "run.jsonl"),
          gateway(backend, {}, &log),
          pipeline(test::store(), gateway, &log) {}
    test::TempDir dir;
    std::shared_ptr<MockBackend> backend;
    RunLog log;
    Gateway gateway;
    Pipeline pipeline;
};

TEST(Pipeline, AcceptFirstCostsTwoCalls) {
    Harness h({{kAccept}});
    const auto t = h.pipeline.run_case(test::load_fixture("acsincome_shap.json"), config(), "c1");
    EXPECT_EQ(t.final_status, FinalStatus::Accepted);
    EXPECT_EQ(t.K, 0);
    EXPECT_EQ(t.llm_calls, 2);
    ASSERT_EQ(t.attempts.size(), 1u);
    EXPECT_EQ(t.attempts[0].explainer_template, "explainer");
}

TEST(Pipeline, RejectThenAcceptUsesRefeed) {
    Harness h({{kReject}, {kAccept}}, {{"first"}, {"second"}});
    const auto t = h.pipeline.run_case(test::load_fixture("acsincome_shap.json"), config(), "c1");
    EXPECT_EQ(t.final_status, FinalStatus::Accepted);
    EXPECT_EQ(t.K, 1);
    EXPECT_EQ(t.llm_calls, 4);
    EXPECT_EQ(t.attempts[1].explainer_template, "refeed");
    EXPECT_EQ(t.attempts[1].explanation.text, "second");
}

TEST(Pipeline, AlwaysRejectStopsAtKmax) {
    Harness h({{kReject}});
    const auto t = h.pipeline.run_case(test::load_fixture("wine_ebm.json"), config(3), "c1");
    EXPECT_EQ(t.final_status, FinalStatus::RejectedExhausted);
    EXPECT_EQ(t.K, 3);
    EXPECT_EQ(t.llm_calls, 2 + 2 * 3);
    EXPECT_EQ(t.attempts.size(), 4u);
}

TEST(Pipeline, RefeedDisabledStopsAfterFirstVerdict) {
    Harness h({{kReject}});
    auto c = config();
    c.refeed_enabled = false;
    const auto t = h.pipeline.run_case(test::load_fixture("wine_ebm.json"), c, "c1");
    EXPECT_EQ(t.final_status, FinalStatus::RejectedExhausted);
    EXPECT_EQ(t.K, 0);
    EXPECT_EQ(t.llm_calls, 2);
}

TEST(Pipeline, KmaxZeroMeansSinglePass) {
    Harness h({{kReject}});
    const auto t = h.pipeline.run_case(test::load_fixture("wine_ebm.json"), config(0), "c1");
    EXPECT_EQ(t.K, 0);
    EXPECT_EQ(t.llm_calls, 2);
}

TEST(Pipeline, ParseFailureThenOkReprompts) {
    Harness h({{kGarbled}, {kAccept}}, {{"x"}}, false);
    const auto t = h.pipeline.run_case(test::load_fixture("acsincome_shap.json"), config(), "c1");
    EXPECT_EQ(t.final_status, FinalStatus::Accepted);
    EXPECT_EQ(t.parse_reprompts, 1);
    EXPECT_EQ(t.llm_calls, 3);
    EXPECT_TRUE(t.attempts[0].reprompted);
}

TEST(Pipeline, ParseFailureTwiceFailsCase) {
    Harness h({{kGarbled}, {kGarbled}}, {{"x"}}, false);
    try {
        h.pipeline.run_case(test::load_fixture("acsincome_shap.json"), config(), "c1");
        FAIL();
    } catch (const CaseFailure& f) {
        EXPECT_EQ(f.cause(), ErrorClass::Parse);
        EXPECT_EQ(f.trace().final_status, FinalStatus::Failed);
        EXPECT_EQ(f.trace().llm_calls, 3);
        EXPECT_FALSE(f.trace().failure.empty());
    }
    bool logged = false;
    for (const auto& r : read_jsonl(h.dir.path() / "run.jsonl"))
        if (r["type"] == "trace") logged = r["trace"]["final_status"] == "Failed";
    EXPECT_TRUE(logged);
}

TEST(Pipeline, RepromptAppendsFormatReminder) {
    Harness h({{kGarbled}, {kAccept}}, {{"x"}}, false);
    h.pipeline.run_case(test::load_fixture("acsincome_shap.json"), config(), "c1");
    std::vector<std::string> verifier_prompts;
    for (const auto& r : read_jsonl(h.dir.path() / "run.jsonl"))
        if (r["type"] == "generation" && r["role"] == "verifier") verifier_prompts.push_back(r["prompt"]);
    ASSERT_EQ(verifier_prompts.size(), 2u);
    EXPECT_EQ(verifier_prompts[1], verifier_prompts[0] + test::store().format_reminder());
}

TEST(Pipeline, VerifierSeesExplanationWithoutReasoning) {
    Harness h({{kAccept}}, {{"<think>private notes</think>Public text."}});
    h.pipeline.run_case(test::load_fixture("acsincome_shap.json"), config(), "c1");
    for (const auto& r : read_jsonl(h.dir.path() / "run.jsonl")) {
        if (r["type"] != "generation" || r["role"] != "verifier") continue;
        const std::string p = r["prompt"];
        EXPECT_EQ(p.find("private notes"), std::string::npos);
        EXPECT_NE(p.find("Public text."), std::string::npos);
    }
}

TEST(Pipeline, TransportFailureAfterRetriesFailsCase) {
    auto mb = std::make_shared<MockBackend>(std::vector<MockStep>{{"", std::nullopt, "transport", false}},
                                            std::vector<MockStep>{{kAccept}}, true);
    GatewayOptions o;
    o.sleeper = [](std::chrono::milliseconds) {};
    Gateway gw(mb, o);
    Pipeline p(test::store(), gw);
    try {
        p.run_case(test::load_fixture("acsincome_shap.json"), config(), "c1");
        FAIL();
    } catch (const CaseFailure& f) {
        EXPECT_EQ(f.cause(), ErrorClass::Transport);
    }
}

TEST(Pipeline, VerifyCaseIsOneCall) {
    Harness h({{kReject}});
    const auto t = h.pipeline.verify_case("WKHP matters.", test::load_fixture("acsincome_shap.json"), config(), "v1");
    EXPECT_EQ(t.kind, "verify");
    EXPECT_EQ(t.llm_calls, 1);
    EXPECT_EQ(t.final_status, FinalStatus::RejectedExhausted);
    EXPECT_EQ(t.first_decision(), Decision::Reject);
}

TEST(Pipeline, TraceJsonRoundTripAndReplay) {
    Harness h({{kReject}, {kAccept}}, {{"first"}, {"second"}});
    const auto art = test::load_fixture("diamonds_lime.json");
    const auto t = h.pipeline.run_case(art, config(), "c1");
    const auto back = trace_from_json(to_json(t));
    EXPECT_EQ(to_json(back).dump(), to_json(t).dump());
    EXPECT_TRUE(replay_mismatches(back, art, test::store()).empty());

    auto tampered = back;
    tampered.attempts[1].explanation.text = "edited";
    EXPECT_FALSE(replay_mismatches(tampered, art, test::store()).empty());
}

TEST(Pipeline, ConfigValidation) {
    auto c = config();
    c.k_max = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    CollectionOptions o;
    o.concurrency = 0;
    EXPECT_THROW(o.validate(), ConfigError);
}

TEST(Pipeline, RefinementOutcomeLabel) {
    CaseTrace t;
    t.final_status = FinalStatus::Accepted;
    t.K = 2;
    EXPECT_EQ(label_refinement_outcome(t), 0);
    t.K = 3;
    EXPECT_EQ(label_refinement_outcome(t), 1);
    t.K = 0;
    t.final_status = FinalStatus::RejectedExhausted;
    EXPECT_EQ(label_refinement_outcome(t), 1);
}

// Random scripts: the cost model holds on every trace.
TEST(PipelineProperty, CostModel) {
    std::mt19937_64 rng(7);
    const auto art = test::load_fixture("imdb_ig.json");
    for (int i = 0; i < 200; ++i) {
        const int kmax = static_cast<int>(rng() % 6);
        std::vector<MockStep> v;
        const int n = 1 + static_cast<int>(rng() % 8);
        for (int k = 0; k < n; ++k) v.push_back({(rng() % 3) ? kReject : kAccept});
        Harness h(v);
        const auto t = h.pipeline.run_case(art, config(kmax), "p");
        EXPECT_EQ(t.llm_calls, 2 + 2 * t.K);
        EXPECT_LE(t.K, kmax);
        EXPECT_EQ(t.attempts.size(), static_cast<std::size_t>(t.K + 1));
    }
}

std::vector<UseCase> fixture_usecases() {
    std::vector<UseCase> u;
    for (const auto& n : test::fixture_names()) {
        auto a = test::load_fixture(n);
        u.push_back({a.dataset_id, {a}});
    }
    return u;
}

TEST(Collection, RoundRobinAndStoppingRule) {
    Harness h({{kAccept}, {kAccept}, {kReject}});
    CollectionOptions o;
    o.accept_target = 10;
    o.reject_limit = 5;
    o.concurrency = 1;
    const auto ucs = fixture_usecases();
    const auto c = h.pipeline.collect_natural(ucs, o, config());
    EXPECT_FALSE(c.partial);
    EXPECT_EQ(c.state.accepted_count, 10);
    EXPECT_LT(c.state.rejected_count, 5);
    for (std::size_t i = 0; i < c.traces.size(); ++i) {
        EXPECT_EQ(c.traces[i].usecase, ucs[i % ucs.size()].name);
        EXPECT_EQ(c.traces[i].dispatch_seq, i);
        EXPECT_EQ(c.traces[i].K, 0);
        EXPECT_EQ(c.traces[i].llm_calls, 2);
    }
}

TEST(Collection, ConcurrentOvershootBounded) {
    for (int conc : {2, 3, 4}) {
        Harness h({{kAccept}, {kReject}});
        CollectionOptions o;
        o.accept_target = 7;
        o.reject_limit = 50;
        o.concurrency = conc;
        const auto c = h.pipeline.collect_natural(fixture_usecases(), o, config());
        EXPECT_GE(c.state.accepted_count, 7);
        EXPECT_LE(c.state.accepted_count, 7 + conc - 1);
        for (std::size_t i = 0; i < c.traces.size(); ++i) EXPECT_EQ(c.traces[i].dispatch_seq, i);
    }
}

TEST(Collection, FailureYieldsPartialCorpus) {
    Harness h({{kAccept}, {kAccept}, {kGarbled}, {kGarbled}});
    CollectionOptions o;
    o.accept_target = 100;
    o.reject_limit = 100;
    o.concurrency = 1;
    const auto c = h.pipeline.collect_natural(fixture_usecases(), o, config());
    EXPECT_TRUE(c.partial);
    EXPECT_FALSE(c.failure.empty());
    EXPECT_EQ(c.traces.size(), 3u);
    EXPECT_EQ(c.traces.back().final_status, FinalStatus::Failed);
}

}  // namespace
}  // namespace xmv
