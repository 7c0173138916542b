#include "xmv/report.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "xmv/errors.hpp"
#include "xmv/hash.hpp"
#include "xmv/metrics.hpp"
#include "xmv/runlog.hpp"
#include "xmv/text.hpp"

namespace xmv {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(EvalSpace s) noexcept {
    switch (s) {
        case EvalSpace::Natural: return "natural";
        case EvalSpace::Synthetic: return "synthetic";
        case EvalSpace::Refeed: return "refeed";
    }
    return "?";
}

std::optional<EvalSpace> parse_space(std::string_view s) noexcept {
    const auto l = text::to_lower(s);
    if (l == "natural") return EvalSpace::Natural;
    if (l == "synthetic") return EvalSpace::Synthetic;
    if (l == "refeed") return EvalSpace::Refeed;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Labels

namespace {

bool label_value(const json& v, const std::string& id) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) {
        const auto s = text::to_lower(v.get<std::string>());
        if (s == "faithful") return true;
        if (s == "erroneous") return false;
    }
    if (v.is_object() && v.contains("faithful") && v["faithful"].is_boolean()) return v["faithful"].get<bool>();
    throw SchemaError("label for '" + id + "' must be faithful or erroneous");
}

}  // namespace

LabelMap labels_from_json(const json& j) {
    LabelMap out;
    if (j.is_object()) {
        for (const auto& [id, v] : j.items()) out[id] = label_value(v, id);
        return out;
    }
    if (j.is_array()) {
        for (const auto& r : j) {
            if (!r.is_object() || !r.contains("trace_id") || !r["trace_id"].is_string() || !r.contains("label"))
                throw SchemaError("label records need trace_id and label");
            const auto id = r["trace_id"].get<std::string>();
            out[id] = label_value(r["label"], id);
        }
        return out;
    }
    throw SchemaError("labels must be an object or a list of records");
}

LabelMap load_labels(const fs::path& path) {
    const auto body = read_file(path.string());
    const auto first = body.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && body[first] == '{' && path.extension() != ".jsonl") {
        try {
            return labels_from_json(json::parse(body));
        } catch (const json::parse_error& e) {
            throw SchemaError(path.string() + ": " + e.what());
        }
    }
    return labels_from_json(json(read_jsonl(path)));
}

json labels_to_json(const LabelMap& labels) {
    json j = json::object();
    for (const auto& [id, faithful] : labels) j[id] = faithful ? "faithful" : "erroneous";
    return j;
}

std::vector<SyntheticCase> synthetic_eval_cases(const SyntheticCorpus& corpus) {
    std::vector<SyntheticCase> out;
    std::set<std::size_t> seen;
    for (const auto& item : corpus.items) {
        if (!seen.insert(item.source_index).second) continue;
        out.push_back({"orig-" + std::to_string(item.source_index), item.mutant.original, item.artifact_ref, true});
    }
    for (const auto& item : corpus.items) out.push_back({item.id, item.mutant.mutated, item.artifact_ref, false});
    return out;
}

LabelMap synthetic_labels(const std::vector<SyntheticCase>& cases) {
    LabelMap m;
    for (const auto& c : cases) m[c.case_id] = c.faithful;
    return m;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

using GroupKey = std::tuple<std::string, std::string, std::string>;

json group_fields(const GroupKey& k, EvalSpace space) {
    return {{"explainer", std::get<0>(k)},
            {"verifier", std::get<1>(k)},
            {"variant", std::get<2>(k)},
            {"space", to_string(space)}};
}

json confusion_record(const GroupKey& key, const std::vector<const CaseTrace*>& ts, const LabelMap& labels,
                      EvalSpace space) {
    ConfusionCounts c;
    std::map<std::string, json> ids = {{"TP", json::array()}, {"TN", json::array()},
                                       {"FP", json::array()}, {"FN", json::array()}};
    json undecided = json::array();
    for (const auto* t : ts) {
        const auto d = t->first_decision();
        if (!d) {
            undecided.push_back(t->case_id);
            continue;
        }
        const auto o = classify(*d == Decision::Accept, labels.at(t->case_id));
        switch (o) {
            case Outcome::TP: ++c.tp; break;
            case Outcome::TN: ++c.tn; break;
            case Outcome::FP: ++c.fp; break;
            case Outcome::FN: ++c.fn; break;
        }
        ids[std::string(to_string(o))].push_back(t->case_id);
    }
    json r = group_fields(key, space);
    r["type"] = "confusion";
    r["counts"] = {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
    r["samples"] = c.n();
    r["trace_ids"] = ids;
    r["undecided"] = undecided;
    r["accuracy"] = nullptr;
    r["f1"] = nullptr;
    r["err_rate"] = nullptr;
    r["only_acc"] = nullptr;
    if (c.n() > 0) {
        r["accuracy"] = accuracy(c);
        const auto rates = explainer_rates(c);
        r["err_rate"] = rates.err_rate;
        r["only_acc"] = rates.only_acc;
    }
    if (2 * c.tp + c.fp + c.fn > 0) r["f1"] = f1_score(c);
    return r;
}

std::optional<double> first_epr(const GenerationResult& g) {
    if (!g.logprobs_supported || g.token_records.size() < 2) return std::nullopt;
    return entropy_trace(g.token_records).epr;
}

json verifier_epr_record(const GroupKey& key, const std::vector<const CaseTrace*>& ts, const LabelMap& labels,
                         EvalSpace space) {
    json r = group_fields(key, space);
    r["type"] = "verifier_epr";
    for (Outcome want : {Outcome::TP, Outcome::TN}) {
        std::vector<double> sample;
        json ids = json::array();
        for (const auto* t : ts) {
            const auto d = t->first_decision();
            if (!d || classify(*d == Decision::Accept, labels.at(t->case_id)) != want) continue;
            const auto e = first_epr(t->attempts.front().verifier_output);
            if (!e) continue;
            sample.push_back(*e);
            ids.push_back(t->case_id);
        }
        json s = {{"samples", sample}, {"trace_ids", ids}, {"mean", nullptr}, {"std", nullptr}};
        if (sample.size() >= 2) {
            const auto ms = mean_std(sample);
            s["mean"] = ms.mean;
            s["std"] = ms.std;
        } else {
            s["note"] = "fewer than 2 samples";
        }
        r[std::string(to_string(want))] = s;
    }
    return r;
}

json iterations_record(const GroupKey& key, const std::vector<const CaseTrace*>& ts, double confidence,
                       EvalSpace space) {
    std::vector<double> ks;
    json ids = json::array();
    long long decided = 0;
    for (const auto* t : ts) {
        if (t->final_status == FinalStatus::Failed) continue;
        ++decided;
        if (t->final_status != FinalStatus::Accepted) continue;
        ks.push_back(static_cast<double>(t->K));
        ids.push_back(t->case_id);
    }
    json r = group_fields(key, space);
    r["type"] = "iterations";
    r["K"] = ks;
    r["trace_ids"] = ids;
    r["accepted"] = ks.size();
    r["decided"] = decided;
    r["mean"] = nullptr;
    r["quartiles"] = nullptr;
    r["acceptance"] = nullptr;
    if (!ks.empty()) {
        r["mean"] = std::accumulate(ks.begin(), ks.end(), 0.0) / static_cast<double>(ks.size());
        const auto q = quartiles(ks);
        r["quartiles"] = {{"q1", q.q1}, {"median", q.median}, {"q3", q.q3}};
    }
    if (decided > 0) {
        const auto iv = agresti_coull(static_cast<long long>(ks.size()), decided, confidence);
        r["acceptance"] = {{"confidence", confidence}, {"lo", iv.lo}, {"hi", iv.hi},
                           {"margin", iv.margin},      {"center", iv.center}};
    }
    return r;
}

json epr_iteration_record(const GroupKey& key, const std::vector<const CaseTrace*>& ts, EvalSpace space) {
    std::vector<CaseTrace> copy;
    for (const auto* t : ts) copy.push_back(*t);
    json r = group_fields(key, space);
    r["type"] = "epr_by_iteration";
    json groups = json::array();
    for (const auto& [k, q] : epr_by_iteration(copy))
        groups.push_back({{"iteration", k}, {"q1", q.q1}, {"median", q.median}, {"q3", q.q3}, {"count", q.count}});
    r["iterations"] = groups;
    return r;
}

json roc_record(const GroupKey& key, const std::vector<const CaseTrace*>& ts, EvalSpace space) {
    std::vector<double> scores;
    std::vector<int> labels;
    json ids = json::array();
    for (const auto* t : ts) {
        if (t->final_status == FinalStatus::Failed || t->attempts.empty()) continue;
        const auto e = first_epr(t->attempts.front().explanation);
        if (!e) continue;
        scores.push_back(*e);
        labels.push_back(label_refinement_outcome(*t));
        ids.push_back(t->case_id);
    }
    json r = group_fields(key, space);
    r["type"] = "roc";
    r["scores"] = scores;
    r["labels"] = labels;
    r["trace_ids"] = ids;
    r["auc"] = nullptr;
    r["curve"] = json::array();
    try {
        const auto roc = roc_auc(scores, labels);
        r["auc"] = roc.auc;
        for (const auto& [fpr, tpr] : roc.curve) r["curve"].push_back({fpr, tpr});
    } catch (const SingleClassError&) {
        r["note"] = "single class";
    }
    return r;
}

std::optional<ReadabilityScores> safe_readability(std::string_view s) {
    try {
        return readability(s);
    } catch (const EmptyText&) {
        return std::nullopt;
    }
}

json readability_stats(const std::vector<ReadabilityScores>& v) {
    json s = {{"samples", v.size()}, {"reading_ease", nullptr}, {"grade_level", nullptr}};
    if (v.empty()) return s;
    double ease = 0.0, grade = 0.0;
    for (const auto& r : v) {
        ease += r.reading_ease;
        grade += r.grade_level;
    }
    s["reading_ease"] = ease / static_cast<double>(v.size());
    s["grade_level"] = grade / static_cast<double>(v.size());
    return s;
}

std::vector<json> readability_records(const std::vector<const CaseTrace*>& runs, EvalSpace space) {
    std::vector<json> out;
    if (runs.empty()) return out;

    std::map<std::string, std::string> raw_by_artifact;
    for (const auto* t : runs) raw_by_artifact.emplace(t->artifact_text, t->case_id);
    std::vector<ReadabilityScores> raw;
    json raw_ids = json::array();
    for (const auto& [txt, id] : raw_by_artifact) {
        if (auto r = safe_readability(txt)) {
            raw.push_back(*r);
            raw_ids.push_back(id);
        }
    }
    const json base = readability_stats(raw);
    json br = {{"type", "readability_raw"}, {"space", to_string(space)}, {"trace_ids", raw_ids}};
    br.update(base);
    out.push_back(br);

    std::map<std::string, std::vector<const CaseTrace*>> by_explainer;
    for (const auto* t : runs) by_explainer[t->explainer_model].push_back(t);
    for (const auto& [model, ts] : by_explainer) {
        std::vector<ReadabilityScores> v;
        json ids = json::array();
        for (const auto* t : ts) {
            if (t->final_status != FinalStatus::Accepted || t->attempts.empty()) continue;
            if (auto r = safe_readability(text::strip_reasoning(t->attempts.back().explanation.text))) {
                v.push_back(*r);
                ids.push_back(t->case_id);
            }
        }
        json r = {{"type", "readability"}, {"space", to_string(space)}, {"explainer", model}, {"trace_ids", ids}};
        r.update(readability_stats(v));
        r["delta_ease"] = nullptr;
        r["delta_grade"] = nullptr;
        if (!v.empty() && !raw.empty()) {
            r["delta_ease"] = r["reading_ease"].get<double>() - base["reading_ease"].get<double>();
            r["delta_grade"] = r["grade_level"].get<double>() - base["grade_level"].get<double>();
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace

std::vector<json> evaluate(const std::vector<CaseTrace>& traces, const LabelMap& labels, const EvalOptions& opts) {
    if (traces.empty()) throw EmptyCorpus("no traces to evaluate");

    const bool need_labels = opts.space != EvalSpace::Refeed;
    if (need_labels && labels.empty()) throw MissingLabels(std::string(to_string(opts.space)) + " evaluation needs labels");
    if (!labels.empty()) {
        std::vector<std::string> missing;
        for (const auto& t : traces)
            if (t.first_decision() && !labels.count(t.case_id)) missing.push_back(t.case_id);
        if (!missing.empty()) {
            std::string msg = std::to_string(missing.size()) + " trace(s) without a label, e.g. " + missing.front();
            throw MissingLabels(msg);
        }
    }

    std::vector<const CaseTrace*> ordered;
    for (const auto& t : traces) ordered.push_back(&t);
    std::sort(ordered.begin(), ordered.end(), [](const CaseTrace* a, const CaseTrace* b) {
        return std::tie(a->dispatch_seq, a->case_id) < std::tie(b->dispatch_seq, b->case_id);
    });

    std::map<GroupKey, std::vector<const CaseTrace*>> groups;
    std::vector<const CaseTrace*> runs;
    for (const auto* t : ordered) {
        const std::string explainer = t->kind == "verify" ? std::string("synthetic") : t->explainer_model;
        groups[{explainer, t->verifier_model, std::string(to_string(t->verifier_variant))}].push_back(t);
        if (t->kind == "run") runs.push_back(t);
    }

    std::vector<json> out;
    for (const auto& [key, ts] : groups) {
        if (!labels.empty()) {
            out.push_back(confusion_record(key, ts, labels, opts.space));
            out.push_back(verifier_epr_record(key, ts, labels, opts.space));
        }
        std::vector<const CaseTrace*> run_ts;
        for (const auto* t : ts)
            if (t->kind == "run") run_ts.push_back(t);
        if (run_ts.empty()) continue;
        out.push_back(iterations_record(key, run_ts, opts.confidence, opts.space));
        out.push_back(epr_iteration_record(key, run_ts, opts.space));
        out.push_back(roc_record(key, run_ts, opts.space));
    }
    for (auto& r : readability_records(runs, opts.space)) out.push_back(std::move(r));
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

json Provenance::to_json() const {
    return {{"config_hash", config_hash},
            {"template_hashes", template_hashes},
            {"template_version", template_version},
            {"seed", seed}};
}

Provenance Provenance::from_json(const json& j) {
    try {
        Provenance p;
        p.config_hash = j.at("config_hash").get<std::string>();
        p.template_hashes = j.at("template_hashes").get<std::map<std::string, std::string>>();
        p.template_version = j.value("template_version", "");
        p.seed = j.at("seed").get<std::uint64_t>();
        return p;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed provenance: ") + e.what());
    }
}

std::string pct(double fraction) { return text::fixed(100.0 * fraction, 2); }

std::string signed_delta(double value, double baseline) { return text::signed_fixed(value - baseline, 2); }

namespace {

std::string cell(const json& v, bool percent) {
    if (v.is_null()) return "-";
    if (v.is_number_float()) return percent ? pct(v.get<double>()) : text::fixed(v.get<double>(), 2);
    if (v.is_number()) return std::to_string(v.get<long long>());
    return v.get<std::string>();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::string csv() const {
        std::ostringstream os;
        auto line = [&](const std::vector<std::string>& v) {
            for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << csv_field(v[i]);
            os << "\n";
        };
        line(columns);
        for (const auto& r : rows) line(r);
        return os.str();
    }

    std::string markdown() const {
        std::ostringstream os;
        auto line = [&](const std::vector<std::string>& v) {
            os << "|";
            for (const auto& c : v) os << " " << c << " |";
            os << "\n";
        };
        line(columns);
        os << "|";
        for (std::size_t i = 0; i < columns.size(); ++i) os << "---|";
        os << "\n";
        for (const auto& r : rows) line(r);
        return os.str();
    }
};

bool is_type(const json& r, const char* t) { return r.value("type", "") == t; }

Table table1(const std::vector<json>& records) {
    Table t{kTable1Columns, {}};
    for (const auto& r : records) {
        if (!is_type(r, "confusion") || r.value("space", "") == "synthetic") continue;
        const auto& c = r["counts"];
        t.rows.push_back({r["explainer"].get<std::string>(), r["verifier"].get<std::string>(), cell(r["samples"], false),
                          cell(c["tp"], false), cell(c["tn"], false), cell(c["fp"], false), cell(c["fn"], false),
                          cell(r["err_rate"], true), cell(r["only_acc"], true), cell(r["accuracy"], true),
                          cell(r["f1"], true)});
    }
    return t;
}

Table table2(const std::vector<json>& records) {
    std::map<std::string, std::map<std::string, std::pair<json, json>>> grid;
    for (const auto& r : records) {
        if (!is_type(r, "confusion") || r.value("space", "") != "synthetic") continue;
        grid[r["verifier"].get<std::string>()][r["variant"].get<std::string>()] = {r["accuracy"], r["f1"]};
    }
    Table t{kTable2Columns, {}};
    for (const auto& [verifier, byv] : grid) {
        std::vector<std::string> row{verifier};
        for (int metric = 0; metric < 2; ++metric) {
            for (const char* v : {"V0", "V1", "V2"}) {
                const auto it = byv.find(v);
                row.push_back(it == byv.end() ? "-" : cell(metric == 0 ? it->second.first : it->second.second, true));
            }
        }
        t.rows.push_back(row);
    }
    return t;
}

Table table3(const std::vector<json>& records) {
    Table t{kTable3Columns, {}};
    const json* raw = nullptr;
    for (const auto& r : records)
        if (is_type(r, "readability_raw")) raw = &r;
    if (raw) {
        t.rows.push_back({"Raw XAI", cell((*raw)["reading_ease"], false), "-", cell((*raw)["grade_level"], false), "-",
                          cell((*raw)["samples"], false)});
    }
    for (const auto& r : records) {
        if (!is_type(r, "readability")) continue;
        auto delta = [&](const char* k) { return r[k].is_null() ? std::string("-") : text::signed_fixed(r[k].get<double>(), 2); };
        t.rows.push_back({r["explainer"].get<std::string>(), cell(r["reading_ease"], false), delta("delta_ease"),
                          cell(r["grade_level"], false), delta("delta_grade"), cell(r["samples"], false)});
    }
    return t;
}

json series(const std::vector<json>& records, const char* type, const std::vector<std::string>& keep) {
    json out = json::array();
    for (const auto& r : records) {
        if (!is_type(r, type)) continue;
        json s = json::object();
        for (const auto& k : {"explainer", "verifier", "variant", "space"})
            if (r.contains(k)) s[k] = r[k];
        for (const auto& k : keep)
            if (r.contains(k)) s[k] = r[k];
        out.push_back(s);
    }
    return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void reference_section(std::ostringstream& md, const json& ref) {
    md << "## Published reference values\n\n";
    if (ref.contains("table1")) {
        md << "Confusion rows recomputed from the published counts, next to the printed figures.\n\n";
        Table t{{"Explainer", "Verifier", "TP", "TN", "FP", "FN", "Acc% (printed)", "Acc% (computed)",
                 "F1% (printed)", "F1% (computed)", "TN+FN", "TN+FP"},
                {}};
        for (const auto& r : ref["table1"]) {
            ConfusionCounts c{r.at("tp").get<long long>(), r.at("tn").get<long long>(), r.at("fp").get<long long>(),
                              r.at("fn").get<long long>()};
            auto printed = [&](const char* k) {
                return r.contains(k) && !r[k].is_null() ? text::fixed(r[k].get<double>(), 2) : std::string("-");
            };
            t.rows.push_back({r.at("explainer").get<std::string>(), r.at("verifier").get<std::string>(),
                              std::to_string(c.tp), std::to_string(c.tn), std::to_string(c.fp),
                              std::to_string(c.fn), printed("acc"), pct(accuracy(c)), printed("f1"),
                              pct(f1_score(c)), std::to_string(c.tn + c.fn), std::to_string(c.tn + c.fp)});
        }
        md << t.markdown() << "\n";
        md << "Err% in the computed tables is (TN+FN)/n and OnlyAcc% is (TP+FP)/n; both counts are listed so "
              "either reading of the published error rate can be checked.\n\n";
    }
    for (const auto& [k, v] : ref.items()) {
        if (k == "table1") continue;
        md << "### " << k << "\n\n```json\n" << v.dump(2) << "\n```\n\n";
    }
}

}  // namespace

ReportFiles render_report(const std::vector<json>& records, const Provenance& provenance,
                          const std::optional<json>& reference) {
    ReportFiles files;
    const auto t1 = table1(records);
    const auto t2 = table2(records);
    const auto t3 = table3(records);
    files["table1.csv"] = t1.csv();
    files["table2.csv"] = t2.csv();
    files["table3.csv"] = t3.csv();

    files["fig_iterations.json"] = dump(series(records, "iterations", {"K", "mean", "quartiles", "acceptance",
                                                                       "accepted", "decided", "trace_ids"}));
    files["fig_epr_by_iteration.json"] = dump(series(records, "epr_by_iteration", {"iterations"}));
    files["fig_verifier_epr.json"] = dump(series(records, "verifier_epr", {"TP", "TN"}));
    files["fig_roc.json"] = dump(series(records, "roc", {"auc", "curve", "scores", "labels", "trace_ids", "note"}));
    files["records.json"] = dump(json(records));
    files["provenance.json"] = dump(provenance.to_json());

    std::ostringstream md;
    md << "# Evaluation report\n\n";
    md << "- config hash: `" << provenance.config_hash << "`\n";
    md << "- seed: " << provenance.seed << "\n";
    md << "- template version: " << provenance.template_version << "\n";
    for (const auto& [id, h] : provenance.template_hashes) md << "- template `" << id << "`: `" << h << "`\n";
    md << "\n## Verifier confusion (natural space)\n\n" << t1.markdown() << "\n";
    md << "## Prompt ablation (synthetic space)\n\n" << t2.markdown() << "\n";
    md << "## Readability\n\n" << t3.markdown() << "\n";

    md << "## Refinement iterations\n\n";
    for (const auto& r : records) {
        if (!is_type(r, "iterations")) continue;
        md << "- " << r["explainer"].get<std::string>() << " -> " << r["verifier"].get<std::string>() << ": "
           << r["accepted"].get<long long>() << "/" << r["decided"].get<long long>() << " accepted";
        if (!r["mean"].is_null()) md << ", mean K " << text::fixed(r["mean"].get<double>(), 2);
        if (!r["acceptance"].is_null()) {
            const auto& a = r["acceptance"];
            md << ", acceptance CI [" << pct(a["lo"].get<double>()) << "%, " << pct(a["hi"].get<double>())
               << "%] (margin " << pct(a["margin"].get<double>()) << "%)";
        }
        md << "\n";
    }
    md << "\n## Explainer EPR as a predictor of refinement\n\n";
    for (const auto& r : records) {
        if (!is_type(r, "roc")) continue;
        md << "- " << r["explainer"].get<std::string>() << " -> " << r["verifier"].get<std::string>() << ": AUC "
           << (r["auc"].is_null() ? std::string("-") : text::fixed(r["auc"].get<double>(), 2)) << " over "
           << r["scores"].size() << " cases\n";
    }
    md << "\n## Verifier EPR\n\n";
    for (const auto& r : records) {
        if (!is_type(r, "verifier_epr")) continue;
        md << "- " << r["explainer"].get<std::string>() << " -> " << r["verifier"].get<std::string>() << " ("
           << r["variant"].get<std::string>() << ")";
        for (const char* o : {"TP", "TN"}) {
            const auto& s = r[o];
            md << ", " << o << " ";
            if (s["mean"].is_null())
                md << "n/a (" << s["samples"].size() << " samples)";
            else
                md << "mean " << text::fixed(s["mean"].get<double>(), 3) << " std "
                   << text::fixed(s["std"].get<double>(), 3);
        }
        md << "\n";
    }
    md << "\n";
    if (reference) reference_section(md, *reference);
    files["report.md"] = md.str();
    return files;
}

void write_report(const fs::path& dir, const ReportFiles& files) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());
    for (const auto& [name, body] : files) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        out << body;
        if (!out) throw IoError("cannot write " + (dir / name).string());
    }
}

std::vector<CaseTrace> traces_from_log(const std::vector<json>& log_records) {
    std::map<std::string, CaseTrace> latest;
    for (const auto& r : log_records) {
        if (!r.is_object() || r.value("type", "") != "trace" || !r.contains("trace")) continue;
        auto t = trace_from_json(r["trace"]);
        latest[t.case_id] = std::move(t);
    }
    std::vector<CaseTrace> out;
    for (auto& [id, t] : latest) out.push_back(std::move(t));
    std::sort(out.begin(), out.end(), [](const CaseTrace& a, const CaseTrace& b) {
        return std::tie(a.dispatch_seq, a.case_id) < std::tie(b.dispatch_seq, b.case_id);
    });
    return out;
}

}  // namespace xmv
