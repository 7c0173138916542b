#include "xmv/mutation.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "embedded_assets.hpp"
#include "xmv/errors.hpp"
#include "xmv/text.hpp"

namespace xmv {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept {
    std::uint64_t s = base;
    s ^= splitmix64(s) + a;
    s ^= splitmix64(s) + b;
    return splitmix64(s);
}

namespace {

constexpr std::array<std::string_view, 10> kOrdinals = {"first",   "second", "third", "fourth", "fifth",
                                                        "sixth",   "seventh", "eighth", "ninth", "tenth"};

std::size_t pick(std::uint64_t& state, std::size_t n) { return static_cast<std::size_t>(splitmix64(state) % n); }

std::vector<std::string> asset_lines(std::string_view body) {
    std::vector<std::string> out;
    std::istringstream in{std::string(body)};
    std::string line;
    while (std::getline(in, line)) {
        auto t = text::trim(line);
        if (!t.empty() && t.front() != '#') out.emplace_back(t);
    }
    return out;
}

struct SentenceSpan {
    std::string_view text;
    std::size_t begin = 0;  // offset of the sentence in the explanation
    std::size_t end = 0;
};

std::vector<SentenceSpan> sentence_spans(std::string_view text) {
    std::vector<SentenceSpan> out;
    for (auto s : text::split_sentences(text)) {
        const auto b = static_cast<std::size_t>(s.data() - text.data());
        out.push_back({s, b, b + s.size()});
    }
    return out;
}

// Indices of ranked items named in `s`.
std::vector<std::size_t> mentioned_in(std::string_view s, const std::vector<RankedItem>& items) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (text::contains_word(s, items[i].name)) out.push_back(i);
    return out;
}

struct DirectionHit {
    std::size_t offset;
    std::size_t length;
    Direction polarity;
    std::string_view antonym;
};

std::vector<DirectionHit> direction_words(std::string_view s) {
    std::vector<DirectionHit> out;
    for (const auto& p : antonym_table()) {
        for (auto off : text::find_word(s, p.positive)) out.push_back({off, p.positive.size(), Direction::Positive, p.negative});
        for (auto off : text::find_word(s, p.negative)) out.push_back({off, p.negative.size(), Direction::Negative, p.positive});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.offset < b.offset; });
    return out;
}

std::string match_case(std::string_view like, std::string_view word) {
    std::string out(word);
    const bool all_upper = std::all_of(like.begin(), like.end(), [](char c) {
        return !std::isalpha(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c));
    });
    if (all_upper && like.size() > 1) {
        for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    } else if (!like.empty() && std::isupper(static_cast<unsigned char>(like.front())) && !out.empty()) {
        out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    }
    return out;
}

// Lower-cased word tokens; '#' is kept as a prefix so "#3" survives.
std::vector<std::string> claim_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '#' || text::is_name_char(s[i])) {
            std::size_t j = i + 1;
            while (j < s.size() && text::is_name_char(s[j])) ++j;
            out.push_back(text::to_lower(s.substr(i, j - i)));
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

std::optional<int> as_number(const std::string& t) {
    std::string_view v = t;
    if (!v.empty() && v.front() == '#') v.remove_prefix(1);
    if (v.empty() || v.size() > 4) return std::nullopt;
    for (char c : v)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    return std::stoi(std::string(v));
}

std::optional<int> as_ordinal(const std::string& t) {
    for (std::size_t i = 0; i < kOrdinals.size(); ++i)
        if (t == kOrdinals[i]) return static_cast<int>(i + 1);
    return std::nullopt;
}

std::string kind_noun(const XaiArtifact& a) {
    if (std::holds_alternative<SaliencyGrid>(a.payload)) return "regions";
    if (std::holds_alternative<TokenAttributions>(a.payload)) return "tokens";
    return "features";
}

std::vector<std::size_t> required_items(const std::vector<RankedItem>& items, std::size_t m) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items.size() && i < m; ++i)
        if (items[i].score != 0.0) out.push_back(i);
    return out;
}

struct Analysis {
    std::vector<SentenceSpan> sentences;
    std::vector<std::vector<std::size_t>> mentions;  // per sentence
    std::set<std::size_t> mentioned;                 // item indices named anywhere
    std::vector<bool> item_has_rank_claim;
};

Analysis analyze(std::string_view text, const std::vector<RankedItem>& items) {
    Analysis a;
    a.sentences = sentence_spans(text);
    a.item_has_rank_claim.assign(items.size(), false);
    for (const auto& s : a.sentences) {
        auto m = mentioned_in(s.text, items);
        for (auto i : m) a.mentioned.insert(i);
        if (m.size() == 1 && !rank_claims(s.text).empty()) a.item_has_rank_claim[m.front()] = true;
        a.mentions.push_back(std::move(m));
    }
    return a;
}

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& closing_markers() {
    static const std::vector<std::string> m = {"In summary", "Overall", "In conclusion"};
    return m;
}

bool is_closing_sentence(std::string_view sentence) {
    const auto s = text::to_lower(text::trim(sentence));
    for (const auto& m : closing_markers()) {
        const auto lm = text::to_lower(m);
        if (s.compare(0, lm.size(), lm) == 0 && (s.size() == lm.size() || !text::is_name_char(s[lm.size()])))
            return true;
    }
    return false;
}

const std::vector<AntonymPair>& antonym_table() {
    static const std::vector<AntonymPair> table = [] {
        std::vector<AntonymPair> t;
        for (const auto& line : asset_lines(assets::antonyms())) {
            const auto tab = line.find('\t');
            if (tab == std::string::npos) continue;
            t.push_back({std::string(text::trim(std::string_view(line).substr(0, tab))),
                         std::string(text::trim(std::string_view(line).substr(tab + 1)))});
        }
        return t;
    }();
    return table;
}

const std::vector<std::string>& hallucination_lexicon() {
    static const std::vector<std::string> lex = asset_lines(assets::hallucination_lexicon());
    return lex;
}

std::vector<int> rank_claims(std::string_view sentence) {
    const auto toks = claim_tokens(sentence);
    std::vector<int> out;
    std::vector<bool> used(toks.size(), false);
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (used[i]) continue;
        const auto& t = toks[i];
        if (t == "rank" || t == "ranks" || t == "ranked") {
            for (std::size_t j = i + 1; j < toks.size() && j <= i + 3; ++j) {
                const auto& u = toks[j];
                if (u == "at" || u == "as" || u == "the" || u == "number" || u == "no") continue;
                auto v = as_number(u);
                if (!v) v = as_ordinal(u);
                if (v) {
                    out.push_back(*v);
                    used[j] = true;
                }
                break;
            }
            continue;
        }
        if (t.size() > 1 && t.front() == '#') {
            if (auto v = as_number(t)) out.push_back(*v);
            continue;
        }
        if (auto v = as_ordinal(t)) {
            out.push_back(*v);
            if (i + 1 < toks.size() && toks[i + 1] == "most") used[i + 1] = true;
            continue;
        }
        if (t == "most" && i + 1 < toks.size() && (toks[i + 1] == "influential" || toks[i + 1] == "important")) {
            out.push_back(1);
        }
    }
    return out;
}

bool has_violation(const std::vector<Violation>& v, ErrorCategory c) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.category == c; });
}

std::vector<Violation> check_against_truth(std::string_view explanation, const XaiArtifact& artifact,
                                           const CheckOptions& opts) {
    std::vector<Violation> out;
    const auto items = ranked_items(artifact, opts.textualize);
    const auto an = analyze(explanation, items);

    for (std::size_t si = 0; si < an.sentences.size(); ++si) {
        if (an.mentions[si].size() != 1) continue;
        const auto& s = an.sentences[si].text;
        const auto& item = items[an.mentions[si].front()];
        for (int claimed : rank_claims(s)) {
            if (claimed == item.rank) continue;
            const auto cat = (claimed == 1 || item.rank == 1) ? ErrorCategory::SwapTopFeature
                                                              : ErrorCategory::SwapMinorFeature;
            out.push_back({cat, "\"" + std::string(s) + "\" claims rank " + std::to_string(claimed) + " for " +
                                    item.name + ", whose rank is " + std::to_string(item.rank)});
            break;
        }
        if (item.direction != Direction::Unsigned) {
            for (const auto& h : direction_words(s)) {
                if (h.polarity == item.direction) continue;
                out.push_back({ErrorCategory::NegateRelation,
                               "\"" + std::string(s.substr(h.offset, h.length)) + "\" contradicts the " +
                                   std::string(to_string(item.direction)) + " direction of " + item.name});
                break;
            }
        }
    }

    for (auto i : required_items(items, opts.required_top)) {
        if (!an.mentioned.count(i))
            out.push_back({ErrorCategory::OmitFeature,
                           items[i].name + " (rank " + std::to_string(items[i].rank) + ") is never mentioned"});
    }

    const auto vocab = artifact_vocabulary(artifact);
    std::set<std::string> known;
    for (const auto& v : vocab) known.insert(text::to_lower(v));
    for (const auto& name : hallucination_lexicon()) {
        if (known.count(text::to_lower(name))) continue;
        if (text::contains_word(explanation, name))
            out.push_back({ErrorCategory::InsertHallucination, name + " is not part of the artifact"});
    }

    const bool has_closing = std::any_of(an.sentences.begin(), an.sentences.end(),
                                         [](const SentenceSpan& s) { return is_closing_sentence(s.text); });
    if (an.sentences.size() < opts.min_sentences) {
        out.push_back({ErrorCategory::TruncateResponse, "only " + std::to_string(an.sentences.size()) +
                                                            " sentences (floor " + std::to_string(opts.min_sentences) +
                                                            ")"});
    } else if (!has_closing) {
        out.push_back({ErrorCategory::TruncateResponse, "no closing sentence"});
    }
    return out;
}

// ---------------------------------------------------------------------------

MutatedExplanation mutate(std::string_view explanation, const XaiArtifact& artifact, ErrorCategory op,
                          std::uint64_t seed, const CheckOptions& opts) {
    MutatedExplanation m;
    m.original = std::string(explanation);
    m.op = op;
    m.seed = seed;
    std::uint64_t rng = seed;
    const auto items = ranked_items(artifact, opts.textualize);
    const auto an = analyze(explanation, items);
    const auto name = std::string(to_string(op));
    auto inapplicable = [&](const std::string& why) { throw InapplicableOperator(name + ": " + why); };

    switch (op) {
        case ErrorCategory::SwapTopFeature: {
            if (!an.mentioned.count(0)) inapplicable("the top item " + items[0].name + " is not mentioned");
            std::vector<std::size_t> partners;
            for (auto i : an.mentioned)
                if (i != 0 && (an.item_has_rank_claim[0] || an.item_has_rank_claim[i])) partners.push_back(i);
            if (partners.empty()) inapplicable("needs a second mentioned item with a rank claim");
            const auto& other = items[partners[pick(rng, partners.size())]];
            m.mutated = text::replace_words(explanation, {items[0].name, other.name}, {other.name, items[0].name});
            m.mutation_note = "swapped " + items[0].name + " (rank 1) with " + other.name + " (rank " +
                              std::to_string(other.rank) + ")";
            break;
        }
        case ErrorCategory::SwapMinorFeature: {
            std::vector<std::pair<std::size_t, std::size_t>> pairs;
            for (auto a : an.mentioned)
                for (auto b : an.mentioned)
                    if (a != 0 && b != 0 && a < b && (an.item_has_rank_claim[a] || an.item_has_rank_claim[b]))
                        pairs.emplace_back(a, b);
            if (pairs.empty()) inapplicable("needs two mentioned items below rank 1 with a rank claim");
            const auto [a, b] = pairs[pick(rng, pairs.size())];
            m.mutated = text::replace_words(explanation, {items[a].name, items[b].name}, {items[b].name, items[a].name});
            m.mutation_note = "swapped " + items[a].name + " (rank " + std::to_string(items[a].rank) + ") with " +
                              items[b].name + " (rank " + std::to_string(items[b].rank) + ")";
            break;
        }
        case ErrorCategory::NegateRelation: {
            struct Candidate {
                std::size_t offset, length;
                std::string_view antonym;
            };
            std::vector<Candidate> cands;
            for (std::size_t si = 0; si < an.sentences.size(); ++si) {
                if (an.mentions[si].size() != 1) continue;
                const auto dir = items[an.mentions[si].front()].direction;
                if (dir == Direction::Unsigned) continue;
                for (const auto& h : direction_words(an.sentences[si].text))
                    if (h.polarity == dir) cands.push_back({an.sentences[si].begin + h.offset, h.length, h.antonym});
            }
            if (cands.empty()) inapplicable("no direction phrase from the antonym table in a claim sentence");
            const auto& c = cands[pick(rng, cands.size())];
            const auto old_word = explanation.substr(c.offset, c.length);
            const auto new_word = match_case(old_word, c.antonym);
            m.mutated = std::string(explanation.substr(0, c.offset)) + new_word +
                        std::string(explanation.substr(c.offset + c.length));
            m.mutation_note = "replaced \"" + std::string(old_word) + "\" with \"" + new_word + "\" at offset " +
                              std::to_string(c.offset);
            break;
        }
        case ErrorCategory::OmitFeature: {
            std::vector<std::size_t> targets;
            for (auto i : required_items(items, opts.required_top))
                if (an.mentioned.count(i)) targets.push_back(i);
            if (targets.empty()) inapplicable("no required item is mentioned");
            const auto target = targets[pick(rng, targets.size())];
            std::string out;
            std::size_t removed = 0;
            for (std::size_t si = 0; si < an.sentences.size(); ++si) {
                const auto& ms = an.mentions[si];
                if (std::find(ms.begin(), ms.end(), target) != ms.end()) {
                    ++removed;
                    continue;
                }
                const auto next = si + 1 < an.sentences.size() ? an.sentences[si + 1].begin : explanation.size();
                out.append(explanation.substr(an.sentences[si].begin, next - an.sentences[si].begin));
            }
            m.mutated = std::string(text::trim(out));
            if (m.mutated.empty()) inapplicable("every sentence mentions " + items[target].name);
            m.mutation_note = "removed " + std::to_string(removed) + " sentence(s) naming " + items[target].name;
            break;
        }
        case ErrorCategory::InsertHallucination: {
            std::set<std::string> known;
            for (const auto& v : artifact_vocabulary(artifact)) known.insert(text::to_lower(v));
            std::vector<std::string> pool;
            for (const auto& n : hallucination_lexicon())
                if (!known.count(text::to_lower(n)) && !text::contains_word(explanation, n)) pool.push_back(n);
            if (pool.empty()) inapplicable("hallucination lexicon has no name absent from the artifact");
            const auto& fake = pool[pick(rng, pool.size())];
            static const std::array<std::string_view, 3> frames = {
                " {} also exerts a strong causal influence on the prediction.",
                " In addition, {} directly drives the model output.",
                " The model output is also largely explained by {}.",
            };
            std::string sentence(frames[pick(rng, frames.size())]);
            sentence.replace(sentence.find("{}"), 2, fake);
            m.mutated = std::string(text::trim(explanation)) + sentence;
            m.mutation_note = "appended a causal claim about " + fake;
            break;
        }
        case ErrorCategory::TruncateResponse: {
            const auto n = an.sentences.size();
            const auto keep = std::max<std::size_t>(1, (2 * n + 4) / 5);
            if (n == 0 || keep >= n) inapplicable("too few sentences to truncate");
            const bool keeps_closing = std::any_of(an.sentences.begin(), an.sentences.begin() + keep,
                                                   [](const SentenceSpan& s) { return is_closing_sentence(s.text); });
            if (keeps_closing && keep >= opts.min_sentences) inapplicable("the kept prefix still holds the conclusion");
            m.mutated = std::string(explanation.substr(0, an.sentences[keep - 1].end));
            m.mutation_note = "kept " + std::to_string(keep) + " of " + std::to_string(n) + " sentences";
            break;
        }
    }
    if (m.mutated == m.original) inapplicable("mutation left the text unchanged");
    return m;
}

// ---------------------------------------------------------------------------

std::string reference_explanation(const XaiArtifact& artifact, std::uint64_t style_seed) {
    std::uint64_t rng = style_seed;
    const auto items = ranked_items(artifact);
    const auto kind = kind_noun(artifact);
    const bool features = kind == "features";
    const bool tokens = kind == "tokens";

    std::ostringstream os;
    static const std::array<std::string_view, 3> openers = {
        "This narrative describes the {m} output for the {d} task.",
        "The {m} analysis of the {d} model is summarised below.",
        "Here is a plain-language reading of the {m} result for {d}.",
    };
    std::string opener(openers[pick(rng, openers.size())]);
    opener.replace(opener.find("{m}"), 3, std::string(to_string(artifact.method)));
    opener.replace(opener.find("{d}"), 3, artifact.dataset_id);
    os << opener;

    const std::size_t count = std::min(items.size(), std::size_t{3} + pick(rng, 3));
    for (std::size_t i = 0; i < count; ++i) {
        const auto& it = items[i];
        const auto style = pick(rng, 3);
        std::string rank_phrase;
        if (it.rank == 1 && style == 0) {
            rank_phrase = features ? "is the most influential feature" : "is the most important one";
        } else if (it.rank <= static_cast<int>(kOrdinals.size()) && style != 2) {
            rank_phrase = "ranks " + std::string(kOrdinals[it.rank - 1]);
        } else {
            rank_phrase = "is ranked " + std::to_string(it.rank);
        }
        os << ' ';
        if (features) {
            os << it.name << ' ' << rank_phrase << " with a score of " << text::signed_fixed(it.score, 4);
            if (it.direction == Direction::Positive) os << ", and larger values increase the predicted outcome";
            if (it.direction == Direction::Negative) os << ", and larger values decrease the predicted outcome";
            os << '.';
        } else if (tokens) {
            os << "The token " << it.name << ' ' << rank_phrase;
            if (it.direction == Direction::Positive) os << " and pushes the prediction in a positive direction.";
            else if (it.direction == Direction::Negative) os << " and pushes the prediction in a negative direction.";
            else os << " with no net attribution.";
        } else {
            os << "The " << it.name << " region " << rank_phrase << " with an activation mass of "
               << text::fixed(it.score, 4) << '.';
        }
    }

    static const std::array<std::string_view, 3> closings = {
        " In summary, the prediction is driven mainly by the {k} described above.",
        " Overall, the {k} above account for most of the model behaviour.",
        " In conclusion, these {k} explain the prediction.",
    };
    std::string closing(closings[pick(rng, closings.size())]);
    closing.replace(closing.find("{k}"), 3, kind);
    os << closing;
    return os.str();
}

// ---------------------------------------------------------------------------

SyntheticCorpus build_synthetic_corpus(const std::vector<ValidExplanation>& valid,
                                       const std::vector<ErrorCategory>& ops, std::uint64_t seed,
                                       const CheckOptions& opts) {
    if (valid.empty()) throw EmptyCorpus("no valid explanations to mutate");
    SyntheticCorpus corpus;
    corpus.seed = seed;
    std::map<ErrorCategory, std::vector<SyntheticItem>> by_op;
    for (std::size_t oi = 0; oi < ops.size(); ++oi) {
        const auto op = ops[oi];
        auto& bucket = by_op[op];
        for (std::size_t vi = 0; vi < valid.size(); ++vi) {
            const auto& v = valid[vi];
            if (!v.artifact) throw ValueError("valid explanation without an artifact");
            const auto item_seed = derive_seed(seed, vi, static_cast<std::uint64_t>(op));
            try {
                SyntheticItem item;
                item.source_index = vi;
                item.artifact_ref = v.artifact->source.empty() ? v.artifact->dataset_id : v.artifact->source;
                item.mutant = mutate(v.explanation, *v.artifact, op, item_seed, opts);
                bucket.push_back(std::move(item));
            } catch (const InapplicableOperator& e) {
                corpus.skipped.push_back({vi, op, e.what()});
            }
        }
    }
    std::size_t cap = 0;
    for (const auto& [op, items] : by_op)
        if (!items.empty()) cap = cap == 0 ? items.size() : std::min(cap, items.size());
    for (const auto op : ops) {
        auto& items = by_op[op];
        if (items.size() > cap) {
            for (std::size_t i = cap; i < items.size(); ++i)
                corpus.skipped.push_back({items[i].source_index, op, "dropped to balance operator counts"});
            items.resize(cap);
        }
    }
    // Interleave by source item so downstream slices stay mixed.
    for (std::size_t i = 0; i < cap; ++i) {
        for (const auto op : ops) {
            auto& items = by_op[op];
            if (i >= items.size()) continue;
            auto item = items[i];
            item.id = "syn-" + std::to_string(item.source_index) + "-" + std::string(to_string(op));
            corpus.items.push_back(std::move(item));
        }
    }
    return corpus;
}

json to_json(const SyntheticItem& item) {
    return {{"id", item.id},
            {"artifact_ref", item.artifact_ref},
            {"source_index", item.source_index},
            {"original", item.mutant.original},
            {"mutated", item.mutant.mutated},
            {"category", to_string(item.mutant.op)},
            {"seed", item.mutant.seed},
            {"note", item.mutant.mutation_note}};
}

SyntheticItem synthetic_item_from_json(const json& j) {
    try {
        SyntheticItem item;
        item.id = j.at("id").get<std::string>();
        item.artifact_ref = j.value("artifact_ref", "");
        item.source_index = j.value("source_index", std::size_t{0});
        item.mutant.original = j.at("original").get<std::string>();
        item.mutant.mutated = j.at("mutated").get<std::string>();
        const auto cat = parse_category(j.at("category").get<std::string>());
        if (!cat) throw SchemaError("unknown category in synthetic record " + item.id);
        item.mutant.op = *cat;
        item.mutant.seed = j.value("seed", std::uint64_t{0});
        item.mutant.mutation_note = j.value("note", "");
        return item;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed synthetic record: ") + e.what());
    }
}

}  // namespace xmv
