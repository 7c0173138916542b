#pragma once

// Explainer -> Verifier orchestration with the refeed loop, and the
// round-robin Natural Error Space collection.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xmv/artifacts.hpp"
#include "xmv/errors.hpp"
#include "xmv/gateway.hpp"
#include "xmv/prompts.hpp"
#include "xmv/verdict.hpp"

namespace xmv {

class RunLog;

struct PipelineConfig {
    int k_max = 10;
    bool refeed_enabled = true;
    PromptVariant verifier_variant = PromptVariant::V0;
    InferenceConfig explainer;
    InferenceConfig verifier;

    void validate() const;
};

enum class FinalStatus { Accepted, RejectedExhausted, Failed };
std::string_view to_string(FinalStatus s) noexcept;
std::optional<FinalStatus> parse_status(std::string_view s) noexcept;

struct Attempt {
    int index = 1;  // 1-based
    std::string explainer_template;
    std::string explainer_prompt_hash;  // empty for verify-only traces
    GenerationResult explanation;
    std::string verifier_prompt_hash;
    GenerationResult verifier_output;  // the generation that was parsed
    std::optional<Verdict> verdict;    // absent when the attempt failed
    bool reprompted = false;           // a format reminder was needed
};

struct CaseTrace {
    std::string case_id;
    std::string artifact_ref;
    std::string usecase;
    std::string kind = "run";  // "run" or "verify"
    std::string explainer_model;
    std::string verifier_model;
    PromptVariant verifier_variant = PromptVariant::V0;
    std::string artifact_text;
    std::vector<Attempt> attempts;
    int K = 0;
    FinalStatus final_status = FinalStatus::Failed;
    int llm_calls = 0;
    int parse_reprompts = 0;
    std::string failure;
    std::uint64_t dispatch_seq = 0;

    const Attempt* last() const { return attempts.empty() ? nullptr : &attempts.back(); }
    /// First-pass verifier decision, if one was reached.
    std::optional<Decision> first_decision() const;
};

nlohmann::json to_json(const CaseTrace& t);
CaseTrace trace_from_json(const nlohmann::json& j);

/// A case that failed after the retry / re-prompt policy. Carries the partial
/// trace (final_status = Failed) and the class of the underlying error.
class CaseFailure : public Error {
public:
    CaseFailure(CaseTrace trace, ErrorClass cause, const std::string& what)
        : Error(ErrorClass::Case, what), trace_(std::move(trace)), cause_(cause) {}
    const CaseTrace& trace() const noexcept { return trace_; }
    ErrorClass cause() const noexcept { return cause_; }

private:
    CaseTrace trace_;
    ErrorClass cause_;
};

struct UseCase {
    std::string name;
    std::vector<XaiArtifact> artifacts;  // cycled when a stream is exhausted
};

struct CollectionOptions {
    int accept_target = 1000;
    int reject_limit = 200;
    int concurrency = 2;

    void validate() const;
};

struct CollectionState {
    int accepted_count = 0;
    int rejected_count = 0;
    std::vector<int> per_usecase_counts;
    std::size_t cursor = 0;
};

struct NaturalCorpus {
    std::vector<CaseTrace> traces;  // in dispatch order
    CollectionState state;
    bool partial = false;
    std::string failure;
};

class Pipeline {
public:
    Pipeline(const TemplateStore& store, Gateway& gateway, RunLog* log = nullptr);

    /// Throws CaseFailure.
    CaseTrace run_case(const XaiArtifact& artifact, const PipelineConfig& cfg, const std::string& case_id) const;

    /// Single Verifier pass over a given explanation (no Explainer call).
    /// Throws CaseFailure.
    CaseTrace verify_case(const std::string& explanation, const XaiArtifact& artifact, const PipelineConfig& cfg,
                          const std::string& case_id) const;

    /// Explainer only. Throws CaseFailure.
    GenerationResult explain(const XaiArtifact& artifact, const PipelineConfig& cfg, const std::string& case_id) const;

    /// Round-robin collection with refeed disabled. The stopping rule is
    /// checked on completed cases before each dispatch, so with C cases in
    /// flight the thresholds can be overshot by at most C-1 cases.
    NaturalCorpus collect_natural(const std::vector<UseCase>& usecases, const CollectionOptions& opts,
                                  const PipelineConfig& cfg) const;

private:
    CaseTrace run(const XaiArtifact& artifact, const PipelineConfig& cfg, const std::string& case_id,
                  const std::string& usecase, std::uint64_t seq) const;
    // Verifies trace.attempts.back().explanation, re-prompting once on a
    // parse failure. Throws the underlying Error.
    void verify_last(CaseTrace& trace, const PipelineConfig& cfg) const;
    [[noreturn]] void fail(CaseTrace& trace, const Error& e) const;
    void log_attempt(const CaseTrace& t) const;
    void log_trace(const CaseTrace& t) const;

    const TemplateStore& store_;
    Gateway& gateway_;
    RunLog* log_;
};

/// 1 iff the case needed >= 3 refinement cycles or was never accepted.
int label_refinement_outcome(const CaseTrace& trace);

/// Re-renders every prompt of a trace from the artifact and the recorded
/// generations; returns one message per hash mismatch (empty = replayable).
std::vector<std::string> replay_mismatches(const CaseTrace& trace, const XaiArtifact& artifact,
                                           const TemplateStore& store);

}  // namespace xmv
