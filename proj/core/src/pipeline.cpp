#include "xmv/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "xmv/runlog.hpp"
#include "xmv/text.hpp"

namespace xmv {

using nlohmann::json;

void PipelineConfig::validate() const {
    if (k_max < 0) throw ConfigError("k_max must be >= 0");
    explainer.validate();
    verifier.validate();
}

void CollectionOptions::validate() const {
    if (accept_target < 1) throw ConfigError("accept_target must be >= 1");
    if (reject_limit < 1) throw ConfigError("reject_limit must be >= 1");
    if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
}

std::string_view to_string(FinalStatus s) noexcept {
    switch (s) {
        case FinalStatus::Accepted: return "Accepted";
        case FinalStatus::RejectedExhausted: return "RejectedExhausted";
        case FinalStatus::Failed: return "Failed";
    }
    return "?";
}

std::optional<FinalStatus> parse_status(std::string_view s) noexcept {
    for (auto v : {FinalStatus::Accepted, FinalStatus::RejectedExhausted, FinalStatus::Failed})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

std::optional<Decision> CaseTrace::first_decision() const {
    if (attempts.empty() || !attempts.front().verdict) return std::nullopt;
    return attempts.front().verdict->decision;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json verdict_json(const Verdict& v) {
    json j = {{"decision", to_string(v.decision)},
              {"error_type", v.error_category ? json(to_string(*v.error_category)) : json(nullptr)},
              {"justification", v.justification},
              {"used_fallback", v.used_fallback},
              {"warnings", v.warnings}};
    return j;
}

Verdict verdict_from(const json& j) {
    Verdict v;
    v.decision = j.at("decision").get<std::string>() == "REJECT" ? Decision::Reject : Decision::Accept;
    if (j.contains("error_type") && j["error_type"].is_string()) {
        v.error_category = parse_category(j["error_type"].get<std::string>());
        if (!v.error_category) throw SchemaError("unknown error_type in trace record");
    }
    v.justification = j.value("justification", "");
    v.used_fallback = j.value("used_fallback", false);
    v.warnings = j.value("warnings", std::vector<std::string>{});
    return v;
}

}  // namespace

json to_json(const CaseTrace& t) {
    json attempts = json::array();
    for (const auto& a : t.attempts) {
        json ja = {{"index", a.index},
                   {"explainer_template", a.explainer_template},
                   {"explainer_prompt_hash", a.explainer_prompt_hash},
                   {"explanation", to_json(a.explanation)},
                   {"verifier_prompt_hash", a.verifier_prompt_hash},
                   {"verifier_output", to_json(a.verifier_output)},
                   {"reprompted", a.reprompted}};
        ja["verdict"] = a.verdict ? verdict_json(*a.verdict) : json(nullptr);
        if (a.verdict) ja["verdict"]["raw_text"] = a.verdict->raw_text;
        attempts.push_back(std::move(ja));
    }
    return {{"case_id", t.case_id},
            {"artifact_ref", t.artifact_ref},
            {"usecase", t.usecase},
            {"kind", t.kind},
            {"explainer_model", t.explainer_model},
            {"verifier_model", t.verifier_model},
            {"verifier_variant", to_string(t.verifier_variant)},
            {"artifact_text", t.artifact_text},
            {"attempts", attempts},
            {"K", t.K},
            {"final_status", to_string(t.final_status)},
            {"llm_calls", t.llm_calls},
            {"parse_reprompts", t.parse_reprompts},
            {"failure", t.failure},
            {"dispatch_seq", t.dispatch_seq}};
}

CaseTrace trace_from_json(const json& j) {
    try {
        CaseTrace t;
        t.case_id = j.at("case_id").get<std::string>();
        t.artifact_ref = j.value("artifact_ref", "");
        t.usecase = j.value("usecase", "");
        t.kind = j.value("kind", "run");
        t.explainer_model = j.value("explainer_model", "");
        t.verifier_model = j.value("verifier_model", "");
        t.verifier_variant = parse_variant(j.value("verifier_variant", "V0")).value_or(PromptVariant::V0);
        t.artifact_text = j.value("artifact_text", "");
        for (const auto& ja : j.at("attempts")) {
            Attempt a;
            a.index = ja.at("index").get<int>();
            a.explainer_template = ja.value("explainer_template", "");
            a.explainer_prompt_hash = ja.value("explainer_prompt_hash", "");
            a.explanation = generation_from_json(ja.at("explanation"));
            a.verifier_prompt_hash = ja.value("verifier_prompt_hash", "");
            if (ja.contains("verifier_output")) a.verifier_output = generation_from_json(ja["verifier_output"]);
            a.reprompted = ja.value("reprompted", false);
            if (ja.contains("verdict") && !ja["verdict"].is_null()) {
                a.verdict = verdict_from(ja["verdict"]);
                a.verdict->raw_text = ja["verdict"].value("raw_text", "");
            }
            t.attempts.push_back(std::move(a));
        }
        t.K = j.at("K").get<int>();
        auto st = parse_status(j.at("final_status").get<std::string>());
        if (!st) throw SchemaError("unknown final_status");
        t.final_status = *st;
        t.llm_calls = j.at("llm_calls").get<int>();
        t.parse_reprompts = j.value("parse_reprompts", 0);
        t.failure = j.value("failure", "");
        t.dispatch_seq = j.value("dispatch_seq", std::uint64_t{0});
        return t;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed trace record: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(const TemplateStore& store, Gateway& gateway, RunLog* log)
    : store_(store), gateway_(gateway), log_(log) {}

namespace {

CaseTrace new_trace(const XaiArtifact& a, const PipelineConfig& cfg, const std::string& case_id) {
    CaseTrace t;
    t.case_id = case_id;
    t.artifact_ref = a.source.empty() ? a.dataset_id : a.source;
    t.usecase = a.dataset_id;
    t.explainer_model = cfg.explainer.model_name;
    t.verifier_model = cfg.verifier.model_name;
    t.verifier_variant = cfg.verifier_variant;
    t.artifact_text = textualize(a);
    return t;
}

}  // namespace

void Pipeline::log_trace(const CaseTrace& t) const {
    if (log_) log_->append({{"type", "trace"}, {"trace", to_json(t)}});
}

void Pipeline::log_attempt(const CaseTrace& t) const {
    if (!log_ || t.attempts.empty()) return;
    const auto& a = t.attempts.back();
    json rec = {{"type", "attempt"},
                {"case_id", t.case_id},
                {"index", a.index},
                {"explainer_prompt_hash", a.explainer_prompt_hash},
                {"verifier_prompt_hash", a.verifier_prompt_hash},
                {"reprompted", a.reprompted}};
    rec["verdict"] = a.verdict ? verdict_json(*a.verdict) : json(nullptr);
    log_->append(rec);
}

void Pipeline::fail(CaseTrace& trace, const Error& e) const {
    trace.final_status = FinalStatus::Failed;
    trace.K = trace.attempts.empty() ? 0 : static_cast<int>(trace.attempts.size()) - 1;
    trace.failure = e.what();
    log_attempt(trace);
    log_trace(trace);
    throw CaseFailure(trace, e.error_class(), "case " + trace.case_id + " failed: " + e.what());
}

void Pipeline::verify_last(CaseTrace& trace, const PipelineConfig& cfg) const {
    auto& att = trace.attempts.back();
    auto prompt = store_.render_verifier(text::strip_reasoning(att.explanation.text), trace.artifact_text,
                                         cfg.verifier_variant);
    att.verifier_prompt_hash = prompt.sha256();
    att.verifier_output = gateway_.generate({Role::Verifier, trace.case_id, &prompt}, cfg.verifier);
    ++trace.llm_calls;
    try {
        att.verdict = parse_verdict(att.verifier_output.text);
        return;
    } catch (const ParseError&) {
    }
    prompt.text += store_.format_reminder();
    att.reprompted = true;
    ++trace.parse_reprompts;
    att.verifier_output = gateway_.generate({Role::Verifier, trace.case_id, &prompt}, cfg.verifier);
    ++trace.llm_calls;
    att.verdict = parse_verdict(att.verifier_output.text);
}

CaseTrace Pipeline::run_case(const XaiArtifact& artifact, const PipelineConfig& cfg, const std::string& case_id) const {
    return run(artifact, cfg, case_id, artifact.dataset_id, 0);
}

CaseTrace Pipeline::run(const XaiArtifact& artifact, const PipelineConfig& cfg, const std::string& case_id,
                        const std::string& usecase, std::uint64_t seq) const {
    cfg.validate();
    CaseTrace trace = new_trace(artifact, cfg, case_id);
    trace.usecase = usecase;
    trace.dispatch_seq = seq;
    try {
        for (int k = 0;; ++k) {
            Attempt att;
            att.index = k + 1;
            RenderedPrompt prompt = [&] {
                if (k == 0) return store_.render_explainer(trace.artifact_text, artifact.context, artifact.method);
                const auto& prev = trace.attempts.back();
                return store_.render_refeed(text::strip_reasoning(prev.explanation.text), prev.verdict->justification,
                                            *prev.verdict->error_category, trace.artifact_text, artifact.context,
                                            artifact.method);
            }();
            att.explainer_template = prompt.template_id.name();
            att.explainer_prompt_hash = prompt.sha256();
            att.explanation = gateway_.generate({Role::Explainer, case_id, &prompt}, cfg.explainer);
            ++trace.llm_calls;
            trace.attempts.push_back(std::move(att));
            trace.K = k;

            verify_last(trace, cfg);
            log_attempt(trace);

            if (trace.attempts.back().verdict->decision == Decision::Accept) {
                trace.final_status = FinalStatus::Accepted;
                break;
            }
            if (!cfg.refeed_enabled || k >= cfg.k_max) {
                trace.final_status = FinalStatus::RejectedExhausted;
                break;
            }
        }
    } catch (const CaseFailure&) {
        throw;
    } catch (const Error& e) {
        fail(trace, e);
    }
    log_trace(trace);
    return trace;
}

CaseTrace Pipeline::verify_case(const std::string& explanation, const XaiArtifact& artifact,
                                const PipelineConfig& cfg, const std::string& case_id) const {
    cfg.validate();
    CaseTrace trace = new_trace(artifact, cfg, case_id);
    trace.kind = "verify";
    trace.explainer_model.clear();
    Attempt att;
    att.explanation.text = explanation;
    att.explanation.logprobs_supported = false;
    trace.attempts.push_back(std::move(att));
    try {
        verify_last(trace, cfg);
        log_attempt(trace);
    } catch (const Error& e) {
        fail(trace, e);
    }
    trace.final_status = trace.attempts.back().verdict->decision == Decision::Accept ? FinalStatus::Accepted
                                                                                      : FinalStatus::RejectedExhausted;
    log_trace(trace);
    return trace;
}

GenerationResult Pipeline::explain(const XaiArtifact& artifact, const PipelineConfig& cfg,
                                   const std::string& case_id) const {
    cfg.validate();
    CaseTrace trace = new_trace(artifact, cfg, case_id);
    try {
        const auto prompt = store_.render_explainer(trace.artifact_text, artifact.context, artifact.method);
        return gateway_.generate({Role::Explainer, case_id, &prompt}, cfg.explainer);
    } catch (const Error& e) {
        fail(trace, e);
    }
}

NaturalCorpus Pipeline::collect_natural(const std::vector<UseCase>& usecases, const CollectionOptions& opts,
                                        const PipelineConfig& cfg) const {
    opts.validate();
    if (usecases.empty()) throw ConfigError("collection needs at least one use case");
    for (const auto& u : usecases)
        if (u.artifacts.empty()) throw ConfigError("use case '" + u.name + "' has no artifacts");

    PipelineConfig single = cfg;
    single.refeed_enabled = false;

    NaturalCorpus corpus;
    corpus.state.per_usecase_counts.assign(usecases.size(), 0);
    std::vector<std::size_t> stream_pos(usecases.size(), 0);
    std::mutex mu;
    std::uint64_t next_seq = 0;
    bool failed = false;

    auto stop_rule = [&] {
        return corpus.state.accepted_count >= opts.accept_target || corpus.state.rejected_count >= opts.reject_limit;
    };

    auto worker = [&] {
        while (true) {
            std::size_t u;
            const XaiArtifact* artifact;
            std::uint64_t seq;
            {
                std::lock_guard lock(mu);
                if (failed || stop_rule()) return;
                u = corpus.state.cursor;
                const auto& stream = usecases[u].artifacts;
                artifact = &stream[stream_pos[u]++ % stream.size()];
                corpus.state.cursor = (u + 1) % usecases.size();
                ++corpus.state.per_usecase_counts[u];
                seq = next_seq++;
            }
            char id[32];
            std::snprintf(id, sizeof id, "-%05llu", static_cast<unsigned long long>(seq));
            const auto case_id = usecases[u].name + id;
            try {
                auto t = run(*artifact, single, case_id, usecases[u].name, seq);
                std::lock_guard lock(mu);
                if (t.first_decision() == Decision::Accept) ++corpus.state.accepted_count;
                else ++corpus.state.rejected_count;
                corpus.traces.push_back(std::move(t));
            } catch (const CaseFailure& f) {
                std::lock_guard lock(mu);
                if (!failed) corpus.failure = f.what();
                failed = true;
                corpus.traces.push_back(f.trace());
            }
        }
    };

    std::vector<std::thread> pool;
    for (int i = 0; i < opts.concurrency; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    std::sort(corpus.traces.begin(), corpus.traces.end(),
              [](const CaseTrace& a, const CaseTrace& b) { return a.dispatch_seq < b.dispatch_seq; });
    corpus.partial = failed;
    if (log_) {
        json manifest = json::array();
        for (const auto& t : corpus.traces)
            manifest.push_back({{"case_id", t.case_id}, {"usecase", t.usecase}, {"final_status", to_string(t.final_status)}});
        log_->append({{"type", "collection"},
                      {"accepted", corpus.state.accepted_count},
                      {"rejected", corpus.state.rejected_count},
                      {"partial", corpus.partial},
                      {"failure", corpus.failure},
                      {"cases", manifest}});
    }
    return corpus;
}

int label_refinement_outcome(const CaseTrace& trace) {
    return (trace.K >= 3 || trace.final_status != FinalStatus::Accepted) ? 1 : 0;
}

std::vector<std::string> replay_mismatches(const CaseTrace& trace, const XaiArtifact& artifact,
                                           const TemplateStore& store) {
    std::vector<std::string> out;
    const auto text = textualize(artifact);
    if (text != trace.artifact_text) out.push_back(trace.case_id + ": canonical artifact text differs");
    for (std::size_t i = 0; i < trace.attempts.size(); ++i) {
        const auto& a = trace.attempts[i];
        const auto tag = trace.case_id + " attempt " + std::to_string(a.index);
        if (trace.kind == "run") {
            std::optional<RenderedPrompt> p;
            if (i == 0) {
                p = store.render_explainer(text, artifact.context, artifact.method);
            } else {
                const auto& prev = trace.attempts[i - 1];
                if (!prev.verdict || !prev.verdict->error_category) {
                    out.push_back(tag + ": previous attempt has no reject verdict");
                    continue;
                }
                p = store.render_refeed(text::strip_reasoning(prev.explanation.text), prev.verdict->justification,
                                        *prev.verdict->error_category, text, artifact.context, artifact.method);
            }
            if (p->sha256() != a.explainer_prompt_hash) out.push_back(tag + ": explainer prompt hash mismatch");
        }
        if (a.verifier_prompt_hash.empty()) continue;
        const auto v = store.render_verifier(text::strip_reasoning(a.explanation.text), text, trace.verifier_variant);
        if (v.sha256() != a.verifier_prompt_hash) out.push_back(tag + ": verifier prompt hash mismatch");
    }
    return out;
}

}  // namespace xmv
