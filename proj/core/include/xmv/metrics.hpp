#pragma once

// Evaluation quantities: confusion statistics, Flesch-Kincaid readability,
// entropy production rate over top-k log-probabilities, Agresti-Coull
// intervals, ROC/AUC and the trace aggregations built on them.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xmv/gateway.hpp"

namespace xmv {

struct CaseTrace;

struct ConfusionCounts {
    long long tp = 0, tn = 0, fp = 0, fn = 0;
    long long n() const { return tp + tn + fp + fn; }
};

struct ConfusionMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
};

/// Throws DegenerateError when n = 0 or 2tp+fp+fn = 0.
ConfusionMetrics confusion_metrics(const ConfusionCounts& c);
double accuracy(const ConfusionCounts& c);
double f1_score(const ConfusionCounts& c);

struct ExplainerRates {
    double err_rate = 0.0;  // (tn+fn)/n
    double only_acc = 0.0;  // (tp+fp)/n
};
ExplainerRates explainer_rates(const ConfusionCounts& c);

// ---------------------------------------------------------------------------

struct ReadabilityScores {
    double reading_ease = 0.0;
    double grade_level = 0.0;
    long long words = 0;
    long long sentences = 0;
    long long syllables = 0;
};

/// Vowel groups over a-e-i-o-u-y, minus a silent final "e" (kept after a
/// consonant + "le"), at least 1. Non-letters are ignored.
int count_syllables(std::string_view word);

/// Words are whitespace-separated tokens with at least one letter or digit, after
/// stripping surrounding punctuation. Throws EmptyText.
ReadabilityScores readability(std::string_view text);

// ---------------------------------------------------------------------------

struct EntropyTrace {
    std::vector<double> per_token_entropy;  // nats
    double epr = 0.0;
};

/// Shannon entropy of the renormalized candidate distribution.
double token_entropy(const TokenLogprobs& rec);

/// epr = mean |H_t - H_{t-1}|. Throws TooShort (T < 2) or InvalidLogprob.
EntropyTrace entropy_trace(const std::vector<TokenLogprobs>& records);

// ---------------------------------------------------------------------------

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double margin = 0.0;
    double center = 0.0;
};

/// Throws DomainError.
Interval agresti_coull(long long successes, long long n, double confidence);

struct RocResult {
    double auc = 0.0;
    std::vector<std::pair<double, double>> curve;  // (fpr, tpr) from (0,0) to (1,1)
};

/// Throws SingleClassError or ValueError (length mismatch, label not 0/1).
RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// ---------------------------------------------------------------------------

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    std::size_t count = 0;
};

/// Linear-interpolation quantile (sorted input, p in [0,1]).
double quantile_sorted(const std::vector<double>& sorted, double p);
Quartiles quartiles(std::vector<double> values);

inline constexpr int kMaxEprIteration = 6;

/// Explainer EPR grouped by attempt index 1..6 (attempts without usable
/// log-probs are skipped). Keys are attempt indices; empty groups omitted.
std::map<int, Quartiles> epr_by_iteration(const std::vector<CaseTrace>& traces);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    std::size_t count = 0;
};

/// Sample mean and n-1 standard deviation. Throws TooFewSamples (< 2).
MeanStd mean_std(const std::vector<double>& values);

enum class Outcome { TP, TN, FP, FN };
std::string_view to_string(Outcome o) noexcept;

/// Outcome of a first-pass verdict against a human label.
Outcome classify(bool verifier_accepted, bool label_faithful) noexcept;

/// Verifier EPR (first attempt) over traces whose outcome equals `filter`.
/// `labels` maps case_id -> faithful. Throws TooFewSamples.
MeanStd epr_distribution(const std::vector<CaseTrace>& traces, const std::map<std::string, bool>& labels,
                         Outcome filter);

}  // namespace xmv
