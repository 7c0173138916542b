// xmv: command-line driver for the explainer/verifier pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xmv/artifacts.hpp"
#include "xmv/config.hpp"
#include "xmv/errors.hpp"
#include "xmv/gateway.hpp"
#include "xmv/hash.hpp"
#include "xmv/mutation.hpp"
#include "xmv/pipeline.hpp"
#include "xmv/prompts.hpp"
#include "xmv/report.hpp"
#include "xmv/runlog.hpp"
#include "xmv/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string mock;
    std::string out = "xmv-out";
    std::string templates;
};

struct Options {
    std::vector<std::string> artifacts;
    std::optional<int> kmax;
    std::string variant;
    bool no_refeed = false;
    std::string case_id = "case-00001";
    std::string explanation;
    std::vector<std::string> corpus;
    std::vector<std::string> labels;
    std::string space = "natural";
    std::vector<std::string> records;
    std::string from_log;
    std::string published;
    std::optional<int> accept_target;
    std::optional<int> reject_limit;
    std::optional<int> concurrency;
    int reference = 0;
};

int exit_code(const xmv::Error& e) {
    auto cls = e.error_class();
    if (const auto* cf = dynamic_cast<const xmv::CaseFailure*>(&e)) {
        if (cf->cause() == xmv::ErrorClass::Transport || cf->cause() == xmv::ErrorClass::Parse) cls = cf->cause();
    }
    switch (cls) {
        case xmv::ErrorClass::Input: return 1;
        case xmv::ErrorClass::Config: return 2;
        case xmv::ErrorClass::Transport: return 3;
        case xmv::ErrorClass::Parse: return 4;
        case xmv::ErrorClass::Case: return 5;
    }
    return 1;
}

class Context {
public:
    Context(const Globals& g, const Options& o) : g_(g), o_(o) {
        cfg_ = g.config.empty() ? xmv::default_config() : xmv::load_config(g.config);
        if (g.seed) cfg_.seed = *g.seed;
        if (!g.templates.empty()) cfg_.paths.templates = g.templates;
        if (o.kmax) cfg_.pipeline.k_max = *o.kmax;
        if (o.no_refeed) cfg_.pipeline.refeed_enabled = false;
        if (!o.variant.empty()) {
            auto v = xmv::parse_variant(o.variant);
            if (!v) throw xmv::ConfigError("unknown verifier variant '" + o.variant + "'");
            cfg_.pipeline.verifier_variant = *v;
        }
        if (o.accept_target) cfg_.collection.accept_target = *o.accept_target;
        if (o.reject_limit) cfg_.collection.reject_limit = *o.reject_limit;
        if (o.concurrency) cfg_.collection.concurrency = *o.concurrency;
        cfg_.pipeline.validate();
        cfg_.collection.validate();
        out_ = g.out;
    }

    const xmv::RunConfig& config() const { return cfg_; }
    const fs::path& out() const { return out_; }

    void ensure_out() const {
        std::error_code ec;
        fs::create_directories(out_, ec);
        if (ec) throw xmv::IoError("cannot create output directory " + out_.string() + ": " + ec.message());
    }

    const xmv::TemplateStore& store() {
        if (!store_) {
            if (cfg_.paths.templates.empty()) throw xmv::ConfigError("no template directory configured");
            store_ = xmv::TemplateStore::load(cfg_.paths.templates);
        }
        return *store_;
    }

    xmv::Pipeline& pipeline() {
        if (!pipeline_) {
            const auto& st = store();
            std::shared_ptr<xmv::Backend> backend;
            if (!g_.mock.empty()) {
                backend = xmv::MockBackend::from_file(g_.mock);
            } else if (cfg_.pipeline.explainer.endpoint == "mock" || cfg_.pipeline.verifier.endpoint == "mock") {
                throw xmv::ConfigError("endpoint 'mock' needs a script: pass --mock <file>");
            } else {
                backend = std::make_shared<xmv::OpenAIChatBackend>();
            }
            ensure_out();
            log_ = std::make_unique<xmv::RunLog>(out_ / "run.jsonl");
            xmv::GatewayOptions opts;
            opts.max_parallel = cfg_.max_parallel;
            gateway_ = std::make_unique<xmv::Gateway>(backend, opts, log_.get());
            pipeline_ = std::make_unique<xmv::Pipeline>(st, *gateway_, log_.get());
        }
        return *pipeline_;
    }

    std::vector<xmv::UseCase> usecases() const {
        std::vector<xmv::UseCase> out;
        if (!o_.artifacts.empty()) {
            for (const auto& a : o_.artifacts) {
                auto art = xmv::load_artifact(a);
                out.push_back({art.dataset_id, {art}});
            }
            return out;
        }
        for (const auto& u : cfg_.usecases) {
            xmv::UseCase uc{u.name, {}};
            for (const auto& p : u.artifacts) uc.artifacts.push_back(xmv::load_artifact(p.string()));
            out.push_back(std::move(uc));
        }
        if (out.empty()) throw xmv::ConfigError("no artifacts: pass --artifact or list [[usecase]] entries");
        return out;
    }

    const xmv::XaiArtifact& artifact_by_ref(const std::string& ref) {
        auto it = artifacts_.find(ref);
        if (it == artifacts_.end()) it = artifacts_.emplace(ref, xmv::load_artifact(ref)).first;
        return it->second;
    }

    xmv::Provenance provenance() {
        xmv::Provenance p;
        p.config_hash = cfg_.hash();
        p.template_hashes = store().hashes();
        p.template_version = store().version();
        p.seed = cfg_.seed;
        return p;
    }

private:
    const Globals& g_;
    const Options& o_;
    xmv::RunConfig cfg_;
    fs::path out_;
    std::optional<xmv::TemplateStore> store_;
    std::unique_ptr<xmv::RunLog> log_;
    std::unique_ptr<xmv::Gateway> gateway_;
    std::unique_ptr<xmv::Pipeline> pipeline_;
    std::map<std::string, xmv::XaiArtifact> artifacts_;
};

void print_summary(const xmv::CaseTrace& t) {
    std::cout << "case " << t.case_id << ": " << xmv::to_string(t.final_status) << " K=" << t.K
              << " calls=" << t.llm_calls << " reprompts=" << t.parse_reprompts << "\n";
    if (const auto* a = t.last(); a && a->verdict) {
        std::cout << "decision: " << xmv::to_string(a->verdict->decision);
        if (a->verdict->error_category) std::cout << " (" << xmv::to_string(*a->verdict->error_category) << ")";
        std::cout << "\njustification: " << a->verdict->justification << "\n";
    }
}

void write_traces(const fs::path& path, const std::vector<xmv::CaseTrace>& traces) {
    std::vector<json> recs;
    for (const auto& t : traces) recs.push_back(xmv::to_json(t));
    xmv::write_jsonl(path, recs);
}

std::vector<xmv::CaseTrace> read_traces(const std::vector<std::string>& paths) {
    std::vector<xmv::CaseTrace> out;
    for (const auto& p : paths)
        for (const auto& r : xmv::read_jsonl(p)) out.push_back(xmv::trace_from_json(r));
    return out;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << j.dump(2) << "\n";
    if (!f) throw xmv::IoError("cannot write " + path.string());
}

const xmv::XaiArtifact& single_artifact(const Options& o, std::optional<xmv::XaiArtifact>& slot) {
    if (o.artifacts.size() != 1) throw xmv::IoError("exactly one --artifact is required");
    slot = xmv::load_artifact(o.artifacts.front());
    return *slot;
}

int cmd_explain(Context& ctx, const Options& o) {
    std::optional<xmv::XaiArtifact> a;
    const auto& art = single_artifact(o, a);
    const auto g = ctx.pipeline().explain(art, ctx.config().pipeline, o.case_id);
    std::cout << g.text << "\n";
    return 0;
}

int cmd_run(Context& ctx, const Options& o) {
    std::optional<xmv::XaiArtifact> a;
    const auto& art = single_artifact(o, a);
    const auto t = ctx.pipeline().run_case(art, ctx.config().pipeline, o.case_id);
    write_traces(ctx.out() / "corpus.jsonl", {t});
    print_summary(t);
    return 0;
}

int cmd_verify(Context& ctx, const Options& o) {
    if (!o.corpus.empty()) {
        // Synthetic evaluation set: every unmutated source plus every mutant.
        xmv::SyntheticCorpus sc;
        for (const auto& p : o.corpus)
            for (const auto& r : xmv::read_jsonl(p)) sc.items.push_back(xmv::synthetic_item_from_json(r));
        const auto cases = xmv::synthetic_eval_cases(sc);
        if (cases.empty()) throw xmv::EmptyCorpus("synthetic corpus has no items");
        auto& pl = ctx.pipeline();
        std::vector<xmv::CaseTrace> traces;
        int failures = 0;
        std::uint64_t seq = 0;
        for (const auto& c : cases) {
            const auto& art = ctx.artifact_by_ref(c.artifact_ref);
            try {
                traces.push_back(pl.verify_case(c.explanation, art, ctx.config().pipeline, c.case_id));
            } catch (const xmv::CaseFailure& f) {
                traces.push_back(f.trace());
                ++failures;
                std::cerr << "warning: " << c.case_id << ": " << f.what() << "\n";
            }
            traces.back().dispatch_seq = seq++;
        }
        write_traces(ctx.out() / "corpus.jsonl", traces);
        write_json(ctx.out() / "labels.json", xmv::labels_to_json(xmv::synthetic_labels(cases)));
        std::cout << "verified " << traces.size() << " cases (" << failures << " failed) with "
                  << xmv::to_string(ctx.config().pipeline.verifier_variant) << "\n";
        return failures ? 5 : 0;
    }
    std::optional<xmv::XaiArtifact> a;
    const auto& art = single_artifact(o, a);
    if (o.explanation.empty()) throw xmv::IoError("verify needs --explanation <file> or --corpus <synthetic.jsonl>");
    const auto text = xmv::read_file(o.explanation);
    const auto t = ctx.pipeline().verify_case(text, art, ctx.config().pipeline, o.case_id);
    write_traces(ctx.out() / "corpus.jsonl", {t});
    print_summary(t);
    return 0;
}

int cmd_collect(Context& ctx, const Options&) {
    const auto ucs = ctx.usecases();
    auto& pl = ctx.pipeline();
    const auto corpus = pl.collect_natural(ucs, ctx.config().collection, ctx.config().pipeline);
    write_traces(ctx.out() / "corpus.jsonl", corpus.traces);
    json cases = json::array();
    for (const auto& t : corpus.traces)
        cases.push_back({{"case_id", t.case_id}, {"usecase", t.usecase}, {"status", xmv::to_string(t.final_status)}});
    json counts = json::object();
    for (std::size_t i = 0; i < ucs.size(); ++i) counts[ucs[i].name] = corpus.state.per_usecase_counts.at(i);
    write_json(ctx.out() / "manifest.json", {{"config_hash", ctx.config().hash()},
                                             {"seed", ctx.config().seed},
                                             {"accepted", corpus.state.accepted_count},
                                             {"rejected", corpus.state.rejected_count},
                                             {"per_usecase", counts},
                                             {"partial", corpus.partial},
                                             {"failure", corpus.failure},
                                             {"cases", cases}});
    std::cout << "collected " << corpus.traces.size() << " cases: " << corpus.state.accepted_count << " accepted, "
              << corpus.state.rejected_count << " rejected" << (corpus.partial ? " (partial)" : "") << "\n";
    if (corpus.partial) {
        std::cerr << "error: collection stopped early: " << corpus.failure << "\n";
        return 5;
    }
    return 0;
}

int cmd_mutate(Context& ctx, const Options& o) {
    std::vector<xmv::XaiArtifact> owned;
    std::vector<std::string> texts;
    std::vector<std::string> refs;
    if (!o.corpus.empty()) {
        for (const auto& t : read_traces(o.corpus)) {
            if (t.kind != "run" || t.final_status != xmv::FinalStatus::Accepted || !t.last()) continue;
            texts.push_back(xmv::text::strip_reasoning(t.last()->explanation.text));
            refs.push_back(t.artifact_ref);
        }
    } else {
        const int per = std::max(o.reference, 1);
        std::uint64_t k = 0;
        for (const auto& uc : ctx.usecases()) {
            for (const auto& art : uc.artifacts) {
                for (int i = 0; i < per; ++i) {
                    texts.push_back(xmv::reference_explanation(art, xmv::derive_seed(ctx.config().seed, k++, 0)));
                    refs.push_back(art.source);
                }
            }
        }
    }
    std::vector<xmv::ValidExplanation> valid;
    for (std::size_t i = 0; i < texts.size(); ++i) valid.push_back({texts[i], &ctx.artifact_by_ref(refs[i])});
    const std::vector<xmv::ErrorCategory> ops = {
        xmv::ErrorCategory::SwapTopFeature,  xmv::ErrorCategory::SwapMinorFeature,
        xmv::ErrorCategory::NegateRelation,  xmv::ErrorCategory::OmitFeature,
        xmv::ErrorCategory::InsertHallucination, xmv::ErrorCategory::TruncateResponse};
    const auto sc = xmv::build_synthetic_corpus(valid, ops, ctx.config().seed);
    ctx.ensure_out();
    std::vector<json> recs;
    for (const auto& item : sc.items) recs.push_back(xmv::to_json(item));
    xmv::write_jsonl(ctx.out() / "synthetic.jsonl", recs);
    json skipped = json::array();
    for (const auto& s : sc.skipped)
        skipped.push_back({{"source_index", s.source_index}, {"op", xmv::to_string(s.op)}, {"reason", s.reason}});
    write_json(ctx.out() / "synthetic_manifest.json",
               {{"seed", sc.seed}, {"valid", valid.size()}, {"items", sc.items.size()}, {"skipped", skipped}});
    std::cout << "mutated " << valid.size() << " explanations into " << sc.items.size() << " items ("
              << sc.skipped.size() << " skipped)\n";
    return 0;
}

int cmd_eval(Context& ctx, const Options& o) {
    if (o.corpus.empty()) throw xmv::IoError("eval needs --corpus");
    const auto space = xmv::parse_space(o.space);
    if (!space) throw xmv::IoError("unknown --space '" + o.space + "'");
    const auto traces = read_traces(o.corpus);
    xmv::LabelMap labels;
    for (const auto& l : o.labels)
        for (const auto& [k, v] : xmv::load_labels(l)) labels[k] = v;
    xmv::EvalOptions eo;
    eo.space = *space;
    const auto records = xmv::evaluate(traces, labels, eo);
    ctx.ensure_out();
    const auto name = "records_" + std::string(xmv::to_string(*space)) + ".json";
    write_json(ctx.out() / name, {{"provenance", ctx.provenance().to_json()}, {"records", records}});
    std::cout << "wrote " << records.size() << " records to " << (ctx.out() / name).string() << "\n";
    return 0;
}

int cmd_report(Context& ctx, const Options& o) {
    std::vector<json> records;
    std::optional<xmv::Provenance> prov;
    if (!o.from_log.empty()) {
        const auto space = xmv::parse_space(o.space);
        if (!space) throw xmv::IoError("unknown --space '" + o.space + "'");
        xmv::LabelMap labels;
        for (const auto& l : o.labels)
            for (const auto& [k, v] : xmv::load_labels(l)) labels[k] = v;
        xmv::EvalOptions eo;
        eo.space = *space;
        records = xmv::evaluate(xmv::traces_from_log(xmv::read_jsonl(o.from_log)), labels, eo);
        prov = ctx.provenance();
    }
    for (const auto& p : o.records) {
        json doc;
        try {
            doc = json::parse(xmv::read_file(p));
        } catch (const json::parse_error& e) {
            throw xmv::SchemaError(p + ": " + e.what());
        }
        if (!doc.contains("records") || !doc["records"].is_array()) throw xmv::SchemaError(p + ": no records array");
        if (!prov) prov = xmv::Provenance::from_json(doc.at("provenance"));
        for (const auto& r : doc["records"]) records.push_back(r);
    }
    if (records.empty()) throw xmv::EmptyCorpus("nothing to report: pass --records or --from-log");
    std::optional<json> reference;
    if (!o.published.empty()) {
        try {
            reference = json::parse(xmv::read_file(o.published));
        } catch (const json::parse_error& e) {
            throw xmv::SchemaError(o.published + ": " + e.what());
        }
    }
    const auto files = xmv::render_report(records, *prov, reference);
    const auto dir = ctx.out() / "report";
    xmv::write_report(dir, files);
    std::cout << "wrote " << files.size() << " report files to " << dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xmv: LLM explanation generation and verification over XAI artifacts"};
    app.require_subcommand(1);
    Globals g;
    Options o;
    app.add_option("--config", g.config, "TOML run configuration");
    app.add_option("--seed", g.seed, "RNG seed (overrides the config)");
    app.add_option("--mock", g.mock, "Serve generations from a mock script instead of an endpoint");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--templates", g.templates, "Template directory (overrides the config)");

    auto common = [&](CLI::App* c) {
        c->add_option("--artifact", o.artifacts, "XAI artifact file");
        c->add_option("--variant", o.variant, "Verifier prompt variant (V0, V1, V2)");
        c->add_option("--case-id", o.case_id, "Case identifier")->capture_default_str();
    };
    auto* explain = app.add_subcommand("explain", "Generate one explanation");
    common(explain);
    auto* verify = app.add_subcommand("verify", "Verify an explanation, or every case of a synthetic corpus");
    common(verify);
    verify->add_option("--explanation", o.explanation, "File with the explanation text");
    verify->add_option("--corpus", o.corpus, "Synthetic corpus (synthetic.jsonl)");
    auto* run = app.add_subcommand("run", "Explain and verify one artifact with the refeed loop");
    common(run);
    run->add_option("--kmax", o.kmax, "Maximum refinement cycles");
    run->add_flag("--no-refeed", o.no_refeed, "Stop after the first verdict");
    auto* collect = app.add_subcommand("collect", "Round-robin natural corpus collection");
    common(collect);
    collect->add_option("--accept-target", o.accept_target);
    collect->add_option("--reject-limit", o.reject_limit);
    collect->add_option("--concurrency", o.concurrency);
    auto* mutate = app.add_subcommand("mutate", "Build a synthetic error corpus");
    common(mutate);
    mutate->add_option("--corpus", o.corpus, "Use accepted explanations from a natural corpus");
    mutate->add_option("--reference", o.reference, "Reference explanations per artifact when no corpus is given");
    auto* eval = app.add_subcommand("eval", "Compute metric records from a corpus");
    eval->add_option("--corpus", o.corpus, "Trace corpus (corpus.jsonl)");
    eval->add_option("--labels", o.labels, "Labels file");
    eval->add_option("--space", o.space, "natural, synthetic or refeed")->capture_default_str();
    auto* report = app.add_subcommand("report", "Render tables, figure data and report.md");
    report->add_option("--records", o.records, "Records file from eval");
    report->add_option("--from-log", o.from_log, "Rebuild records from a run log");
    report->add_option("--labels", o.labels, "Labels file (with --from-log)");
    report->add_option("--space", o.space, "Space for --from-log")->capture_default_str();
    report->add_option("--published", o.published, "Published reference values to show alongside");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        Context ctx(g, o);
        if (*explain) return cmd_explain(ctx, o);
        if (*verify) return cmd_verify(ctx, o);
        if (*run) return cmd_run(ctx, o);
        if (*collect) return cmd_collect(ctx, o);
        if (*mutate) return cmd_mutate(ctx, o);
        if (*eval) return cmd_eval(ctx, o);
        if (*report) return cmd_report(ctx, o);
    } catch (const xmv::CaseFailure& e) {
        print_summary(e.trace());
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const xmv::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
