#include "xmv/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "xmv/errors.hpp"
#include "xmv/pipeline.hpp"
#include "xmv/text.hpp"

namespace xmv {

double accuracy(const ConfusionCounts& c) {
    if (c.n() <= 0) throw DegenerateError("accuracy of an empty confusion table");
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.n());
}

double f1_score(const ConfusionCounts& c) {
    const auto denom = 2 * c.tp + c.fp + c.fn;
    if (denom <= 0) throw DegenerateError("F1 undefined: no positives predicted or present");
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

ConfusionMetrics confusion_metrics(const ConfusionCounts& c) { return {accuracy(c), f1_score(c)}; }

ExplainerRates explainer_rates(const ConfusionCounts& c) {
    if (c.n() <= 0) throw DegenerateError("explainer rates of an empty confusion table");
    const double n = static_cast<double>(c.n());
    return {static_cast<double>(c.tn + c.fn) / n, static_cast<double>(c.tp + c.fp) / n};
}

// ---------------------------------------------------------------------------

namespace {

bool is_vowel(char c) {
    switch (c) {
        case 'a': case 'e': case 'i': case 'o': case 'u': case 'y': return true;
        default: return false;
    }
}

std::string letters_lower(std::string_view word) {
    std::string w;
    for (char c : word)
        if (std::isalpha(static_cast<unsigned char>(c))) w.push_back(static_cast<char>(std::tolower(c)));
    return w;
}

std::string_view strip_punct(std::string_view tok) {
    auto keep = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80; };
    std::size_t b = 0, e = tok.size();
    while (b < e && !keep(tok[b])) ++b;
    while (e > b && !keep(tok[e - 1])) --e;
    return tok.substr(b, e - b);
}

}  // namespace

int count_syllables(std::string_view word) {
    const auto w = letters_lower(word);
    int groups = 0;
    bool in_group = false;
    for (char c : w) {
        const bool v = is_vowel(c);
        if (v && !in_group) ++groups;
        in_group = v;
    }
    const auto n = w.size();
    if (n >= 1 && w[n - 1] == 'e') {
        const bool consonant_le = n >= 3 && w[n - 2] == 'l' && !is_vowel(w[n - 3]);
        if (!consonant_le) --groups;
    }
    return std::max(groups, 1);
}

ReadabilityScores readability(std::string_view text) {
    ReadabilityScores r;
    for (auto tok : text::whitespace_tokens(text)) {
        const auto w = strip_punct(tok);
        if (w.empty()) continue;
        ++r.words;
        r.syllables += count_syllables(w);
    }
    if (r.words == 0) throw EmptyText("text contains no words");
    r.sentences = std::max<long long>(1, static_cast<long long>(text::split_sentences(text).size()));
    const double wps = static_cast<double>(r.words) / static_cast<double>(r.sentences);
    const double spw = static_cast<double>(r.syllables) / static_cast<double>(r.words);
    r.reading_ease = 206.835 - 1.015 * wps - 84.6 * spw;
    r.grade_level = 0.39 * wps + 11.8 * spw - 15.59;
    return r;
}

// ---------------------------------------------------------------------------

double token_entropy(const TokenLogprobs& rec) {
    if (rec.candidates.empty()) throw InvalidLogprob("token record without candidates");
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& c : rec.candidates) {
        if (!std::isfinite(c.logprob)) throw InvalidLogprob("non-finite logprob for token '" + c.token + "'");
        mx = std::max(mx, c.logprob);
    }
    double z = 0.0;
    for (const auto& c : rec.candidates) z += std::exp(c.logprob - mx);
    double h = 0.0;
    for (const auto& c : rec.candidates) {
        const double p = std::exp(c.logprob - mx) / z;
        if (p > 0.0) h -= p * std::log(p);
    }
    return std::max(h, 0.0);
}

EntropyTrace entropy_trace(const std::vector<TokenLogprobs>& records) {
    if (records.size() < 2) throw TooShort("EPR needs at least 2 token records, got " + std::to_string(records.size()));
    EntropyTrace t;
    t.per_token_entropy.reserve(records.size());
    for (const auto& r : records) t.per_token_entropy.push_back(token_entropy(r));
    double sum = 0.0;
    for (std::size_t i = 1; i < t.per_token_entropy.size(); ++i)
        sum += std::abs(t.per_token_entropy[i] - t.per_token_entropy[i - 1]);
    t.epr = sum / static_cast<double>(t.per_token_entropy.size() - 1);
    return t;
}

// ---------------------------------------------------------------------------

Interval agresti_coull(long long successes, long long n, double confidence) {
    if (n < 1) throw DomainError("agresti_coull needs n >= 1");
    if (successes < 0 || successes > n) throw DomainError("successes must lie in [0, n]");
    if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must lie in (0, 1)");
    const double z = boost::math::quantile(boost::math::normal(), (1.0 + confidence) / 2.0);
    const double z2 = z * z;
    const double nt = static_cast<double>(n) + z2;
    const double pt = (static_cast<double>(successes) + z2 / 2.0) / nt;
    Interval iv;
    iv.center = pt;
    iv.margin = z * std::sqrt(pt * (1.0 - pt) / nt);
    iv.lo = std::clamp(pt - iv.margin, 0.0, 1.0);
    iv.hi = std::clamp(pt + iv.margin, 0.0, 1.0);
    return iv;
}

RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ValueError("scores and labels differ in length");
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw ValueError("labels must be 0 or 1");
        pos += static_cast<std::size_t>(l);
    }
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw SingleClassError("ROC needs both classes present");
    for (double s : scores)
        if (!std::isfinite(s)) throw ValueError("non-finite score");

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocResult r;
    r.curve.emplace_back(0.0, 0.0);
    // Mann-Whitney over tie groups: each positive beats every negative with a
    // lower score and ties with negatives in its own group.
    double wins = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i, gp = 0, gn = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            (labels[idx[j]] ? gp : gn)++;
            ++j;
        }
        const std::size_t neg_below = neg - fp - gn;
        wins += static_cast<double>(gp) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(gn));
        tp += gp;
        fp += gn;
        r.curve.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                             static_cast<double>(tp) / static_cast<double>(pos));
        i = j;
    }
    r.auc = wins / (static_cast<double>(pos) * static_cast<double>(neg));
    return r;
}

// ---------------------------------------------------------------------------

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw TooFewSamples("quantile of an empty sample");
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {quantile_sorted(values, 0.25), quantile_sorted(values, 0.5), quantile_sorted(values, 0.75), values.size()};
}

std::map<int, Quartiles> epr_by_iteration(const std::vector<CaseTrace>& traces) {
    std::map<int, std::vector<double>> groups;
    for (const auto& t : traces) {
        for (const auto& a : t.attempts) {
            if (a.index < 1 || a.index > kMaxEprIteration) continue;
            if (!a.explanation.logprobs_supported || a.explanation.token_records.size() < 2) continue;
            groups[a.index].push_back(entropy_trace(a.explanation.token_records).epr);
        }
    }
    std::map<int, Quartiles> out;
    for (auto& [k, v] : groups) out[k] = quartiles(std::move(v));
    return out;
}

MeanStd mean_std(const std::vector<double>& values) {
    if (values.size() < 2) throw TooFewSamples("need at least 2 samples, got " + std::to_string(values.size()));
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0)), values.size()};
}

std::string_view to_string(Outcome o) noexcept {
    switch (o) {
        case Outcome::TP: return "TP";
        case Outcome::TN: return "TN";
        case Outcome::FP: return "FP";
        case Outcome::FN: return "FN";
    }
    return "?";
}

Outcome classify(bool verifier_accepted, bool label_faithful) noexcept {
    if (verifier_accepted) return label_faithful ? Outcome::TP : Outcome::FP;
    return label_faithful ? Outcome::FN : Outcome::TN;
}

MeanStd epr_distribution(const std::vector<CaseTrace>& traces, const std::map<std::string, bool>& labels,
                         Outcome filter) {
    std::vector<double> sample;
    for (const auto& t : traces) {
        const auto d = t.first_decision();
        const auto it = labels.find(t.case_id);
        if (!d || it == labels.end()) continue;
        if (classify(*d == Decision::Accept, it->second) != filter) continue;
        const auto& out = t.attempts.front().verifier_output;
        if (!out.logprobs_supported || out.token_records.size() < 2) continue;
        sample.push_back(entropy_trace(out.token_records).epr);
    }
    if (sample.size() < 2)
        throw TooFewSamples("verifier EPR for " + std::string(to_string(filter)) + " has " +
                            std::to_string(sample.size()) + " samples");
    return mean_std(sample);
}

}  // namespace xmv
