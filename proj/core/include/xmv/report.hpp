#pragma once

// Evaluation records over trace corpora and their rendering into CSV tables,
// figure-data series and a Markdown summary.
//
// evaluate() turns traces (plus human or synthetic labels) into a flat list
// of JSON records, each tagged with "type" and carrying the trace ids behind
// every number. render_report() is a pure function of those records and a
// provenance block, so a report rebuilt from the same run log is
// byte-identical.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmv/mutation.hpp"
#include "xmv/pipeline.hpp"

namespace xmv {

enum class EvalSpace { Natural, Synthetic, Refeed };
std::string_view to_string(EvalSpace s) noexcept;
std::optional<EvalSpace> parse_space(std::string_view s) noexcept;

/// case_id -> faithful.
using LabelMap = std::map<std::string, bool>;

/// Accepts {"id": "faithful"|"erroneous"|true|false|{"faithful": bool}, ...}
/// or JSONL lines {"trace_id": ..., "label": ...}. Throws SchemaError.
LabelMap labels_from_json(const nlohmann::json& j);
LabelMap load_labels(const std::filesystem::path& path);
nlohmann::json labels_to_json(const LabelMap& labels);

/// One Verifier input of the synthetic evaluation set.
struct SyntheticCase {
    std::string case_id;
    std::string explanation;
    std::string artifact_ref;
    bool faithful = false;
};

/// One faithful case per distinct source explanation ("orig-<index>")
/// followed by every mutant (erroneous, keeping its item id).
std::vector<SyntheticCase> synthetic_eval_cases(const SyntheticCorpus& corpus);
LabelMap synthetic_labels(const std::vector<SyntheticCase>& cases);

struct EvalOptions {
    EvalSpace space = EvalSpace::Natural;
    double confidence = 0.95;
};

/// Records, grouped by (explainer, verifier, variant) in sorted order:
///   confusion        first-pass verdicts against labels (needs labels)
///   verifier_epr     first-attempt Verifier EPR over TP and TN (needs labels)
///   iterations       K of accepted traces and the acceptance interval
///   epr_by_iteration explainer EPR quartiles per attempt index
///   roc              initial explainer EPR against the refinement outcome
/// and per explainer model:
///   readability      final accepted explanations against the raw artifact text
/// Throws EmptyCorpus, or MissingLabels when labels are given but do not
/// cover every decided trace (or are required by the space and absent).
std::vector<nlohmann::json> evaluate(const std::vector<CaseTrace>& traces, const LabelMap& labels,
                                     const EvalOptions& opts = {});

struct Provenance {
    std::string config_hash;
    std::map<std::string, std::string> template_hashes;
    std::string template_version;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static Provenance from_json(const nlohmann::json& j);
};

/// File name -> contents.
using ReportFiles = std::map<std::string, std::string>;

inline const std::vector<std::string> kTable1Columns = {"Explainer", "Verifier", "Samples", "TP", "TN", "FP",
                                                        "FN", "Err%", "OnlyAcc%", "Acc%", "F1%"};
inline const std::vector<std::string> kTable2Columns = {"Verifier", "Acc V0", "Acc V1", "Acc V2",
                                                        "F1 V0",    "F1 V1",  "F1 V2"};
inline const std::vector<std::string> kTable3Columns = {"Source", "Reading Ease", "Delta Ease", "Grade Level",
                                                        "Delta Grade", "Samples"};

/// Produces table1.csv, table2.csv, table3.csv, fig_iterations.json,
/// fig_epr_by_iteration.json, fig_verifier_epr.json, fig_roc.json,
/// records.json, provenance.json and report.md. `reference` is an optional
/// set of published values shown next to the computed ones in report.md.
ReportFiles render_report(const std::vector<nlohmann::json>& records, const Provenance& provenance,
                          const std::optional<nlohmann::json>& reference = std::nullopt);

void write_report(const std::filesystem::path& dir, const ReportFiles& files);

/// Percentage with two decimals ("95.21").
std::string pct(double fraction);
/// Signed difference with two decimals ("+16.40", "-8.85").
std::string signed_delta(double value, double baseline);

/// Every "trace" record of a run log, ordered by dispatch sequence then case id.
std::vector<CaseTrace> traces_from_log(const std::vector<nlohmann::json>& log_records);

}  // namespace xmv
