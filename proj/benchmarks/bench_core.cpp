#include <benchmark/benchmark.h>

#include <random>

#include "xmv/artifacts.hpp"
#include "xmv/metrics.hpp"
#include "xmv/mutation.hpp"
#include "xmv/verdict.hpp"

namespace {

xmv::XaiArtifact fixture(const char* name) {
    return xmv::load_artifact(std::string(XMV_FIXTURE_DIR) + "/artifacts/" + name);
}

void BM_Textualize(benchmark::State& state) {
    const auto art = fixture("cifar10_gradcampp.json");
    for (auto _ : state) benchmark::DoNotOptimize(xmv::textualize(art));
}
BENCHMARK(BM_Textualize);

void BM_ParseVerdict(benchmark::State& state) {
    const auto raw = "<think>Checking the ranking against the artifact.</think>\n" +
                     xmv::compose_response(xmv::Decision::Reject, xmv::ErrorCategory::NegateRelation,
                                           "The explanation says carat lowers the price.");
    for (auto _ : state) benchmark::DoNotOptimize(xmv::parse_verdict(raw));
}
BENCHMARK(BM_ParseVerdict);

void BM_EntropyTrace(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-8.0, 0.0);
    std::vector<xmv::TokenLogprobs> recs(static_cast<std::size_t>(state.range(0)));
    for (auto& r : recs) {
        r.chosen_token = "t";
        for (int k = 0; k < 10; ++k) r.candidates.push_back({"t" + std::to_string(k), u(rng)});
    }
    for (auto _ : state) benchmark::DoNotOptimize(xmv::entropy_trace(recs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EntropyTrace)->Arg(256)->Arg(2048);

void BM_CheckAgainstTruth(benchmark::State& state) {
    const auto art = fixture("acsincome_shap.json");
    const auto text = xmv::reference_explanation(art, 3);
    for (auto _ : state) benchmark::DoNotOptimize(xmv::check_against_truth(text, art));
}
BENCHMARK(BM_CheckAgainstTruth);

void BM_RocAuc(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::vector<double> s(static_cast<std::size_t>(state.range(0)));
    std::vector<int> y(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = static_cast<double>(rng() % 1000) / 1000.0;
        y[i] = static_cast<int>(i % 2);
    }
    for (auto _ : state) benchmark::DoNotOptimize(xmv::roc_auc(s, y));
}
BENCHMARK(BM_RocAuc)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
