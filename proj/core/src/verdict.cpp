#include "xmv/verdict.hpp"

#include <cctype>

#include "embedded_assets.hpp"
#include "xmv/errors.hpp"
#include "xmv/text.hpp"

namespace xmv {

namespace {

enum class Key { Decision, ErrorType, Justification };

std::string_view strip_markup(std::string_view s) {
    std::size_t b = 0;
    while (b < s.size() && (s[b] == '*' || s[b] == '#' || s[b] == '>' || s[b] == '-' || s[b] == '`' ||
                            s[b] == '_' || std::isspace(static_cast<unsigned char>(s[b]))))
        ++b;
    std::size_t e = s.size();
    while (e > b && (s[e - 1] == '*' || s[e - 1] == '`' || std::isspace(static_cast<unsigned char>(s[e - 1])))) --e;
    return s.substr(b, e - b);
}

// Parses "KEY: value" at the start of a line.
std::optional<std::pair<Key, std::string_view>> match_key(std::string_view line) {
    auto body = strip_markup(line);
    const auto colon = body.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    std::string key;
    for (char c : body.substr(0, colon)) {
        if (std::isalpha(static_cast<unsigned char>(c))) key.push_back(static_cast<char>(std::toupper(c)));
        else if (c == '*' || c == '`') continue;
        else if (c == '_' || c == ' ' || c == '-') key.push_back('_');
        else return std::nullopt;
    }
    while (!key.empty() && key.back() == '_') key.pop_back();
    Key k;
    if (key == "DECISION") k = Key::Decision;
    else if (key == "ERROR_TYPE" || key == "ERRORTYPE") k = Key::ErrorType;
    else if (key == "JUSTIFICATION") k = Key::Justification;
    else return std::nullopt;
    auto value = body.substr(colon + 1);
    while (!value.empty() && (value.front() == '*' || value.front() == '`' ||
                              std::isspace(static_cast<unsigned char>(value.front()))))
        value.remove_prefix(1);
    while (!value.empty() && (value.back() == '*' || value.back() == '`' ||
                              std::isspace(static_cast<unsigned char>(value.back()))))
        value.remove_suffix(1);
    return std::pair{k, value};
}

std::string first_word_lower(std::string_view v) {
    std::string w;
    std::size_t i = 0;
    while (i < v.size() && !std::isalnum(static_cast<unsigned char>(v[i]))) ++i;
    while (i < v.size() && (std::isalnum(static_cast<unsigned char>(v[i])) || v[i] == '/' || v[i] == '_')) {
        w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(v[i]))));
        ++i;
    }
    return w;
}

std::optional<Decision> decision_from(std::string_view value) {
    const auto w = first_word_lower(value);
    if (w == "accept" || w == "accepted") return Decision::Accept;
    if (w == "reject" || w == "rejected") return Decision::Reject;
    return std::nullopt;
}

bool is_none(std::string_view value) {
    const auto w = first_word_lower(value);
    return w.empty() || w == "none" || w == "n/a" || w == "na" || w == "null";
}

Verdict finish(Verdict v) {
    if (v.decision == Decision::Reject) {
        if (!v.error_category) throw ParseError("REJECT verdict without a known error category");
        if (text::trim(v.justification).empty()) throw ParseError("REJECT verdict without a justification");
    } else if (v.error_category) {
        v.warnings.push_back("ACCEPT verdict named error type " + std::string(to_string(*v.error_category)) +
                             "; category dropped");
        v.error_category.reset();
    }
    return v;
}

Verdict parse_fallback(const std::string& body, std::string_view raw) {
    const bool acc = text::contains_word(body, "accept");
    const bool rej = text::contains_word(body, "reject");
    if (acc == rej) {
        throw ParseError(acc ? "reply contains both accept and reject" : "reply contains no decision");
    }
    Verdict v;
    v.raw_text = std::string(raw);
    v.used_fallback = true;
    v.decision = acc ? Decision::Accept : Decision::Reject;
    v.justification = std::string(text::trim(body));
    std::size_t best = std::string::npos;
    for (auto c : kAllCategories) {
        const auto hits = text::find_word(body, to_string(c));
        if (!hits.empty() && hits.front() < best) {
            best = hits.front();
            v.error_category = c;
        }
    }
    return finish(std::move(v));
}

}  // namespace

std::string_view to_string(ErrorCategory c) noexcept {
    switch (c) {
        case ErrorCategory::SwapTopFeature: return "SwapTopFeature";
        case ErrorCategory::SwapMinorFeature: return "SwapMinorFeature";
        case ErrorCategory::NegateRelation: return "NegateRelation";
        case ErrorCategory::OmitFeature: return "OmitFeature";
        case ErrorCategory::InsertHallucination: return "InsertHallucination";
        case ErrorCategory::TruncateResponse: return "TruncateResponse";
    }
    return "?";
}

std::optional<ErrorCategory> parse_category(std::string_view s) noexcept {
    std::string key;
    for (char c : s)
        if (std::isalnum(static_cast<unsigned char>(c))) key.push_back(static_cast<char>(std::tolower(c)));
    for (auto c : kAllCategories) {
        if (text::to_lower(to_string(c)) == key) return c;
    }
    return std::nullopt;
}

std::string_view to_string(Decision d) noexcept { return d == Decision::Accept ? "ACCEPT" : "REJECT"; }

Verdict parse_verdict(std::string_view raw) {
    if (text::trim(raw).empty()) throw ParseError("empty verifier reply");
    const std::string body = text::strip_reasoning(raw);

    std::vector<std::string_view> lines;
    {
        std::string_view rest = body;
        while (true) {
            const auto nl = rest.find('\n');
            lines.push_back(rest.substr(0, nl));
            if (nl == std::string_view::npos) break;
            rest.remove_prefix(nl + 1);
        }
    }

    struct Field {
        std::size_t line = 0;
        std::string value;
        bool seen = false;
    };
    std::array<Field, 3> fields;
    std::vector<bool> is_key(lines.size(), false);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (auto m = match_key(lines[i])) {
            is_key[i] = true;
            auto& f = fields[static_cast<int>(m->first)];
            f = {i, std::string(m->second), true};
        }
    }
    if (!fields[0].seen) return parse_fallback(body, raw);

    Verdict v;
    v.raw_text = std::string(raw);
    auto d = decision_from(fields[0].value);
    if (!d) throw ParseError("unrecognised DECISION value '" + fields[0].value + "'");
    v.decision = *d;

    if (fields[1].seen && !is_none(fields[1].value)) {
        auto c = parse_category(first_word_lower(fields[1].value));
        if (!c) {
            if (v.decision == Decision::Reject) throw ParseError("unknown ERROR_TYPE '" + fields[1].value + "'");
            v.warnings.push_back("ACCEPT verdict carried unknown ERROR_TYPE '" + fields[1].value + "'");
        }
        v.error_category = c;
    }

    if (fields[2].seen) {
        std::string j = fields[2].value;
        for (std::size_t i = fields[2].line + 1; i < lines.size() && !is_key[i]; ++i) {
            j += '\n';
            j += lines[i];
        }
        v.justification = std::string(text::trim(j));
    }
    return finish(std::move(v));
}

const std::string& format_contract() {
    static const std::string block(text::trim(assets::response_format()));
    return block;
}

std::string compose_response(Decision decision, std::optional<ErrorCategory> category,
                             std::string_view justification, std::string_view reasoning) {
    std::string out;
    if (!reasoning.empty()) {
        out += reasoning;
        out += "\n\n";
    }
    out += "DECISION: ";
    out += to_string(decision);
    out += "\nERROR_TYPE: ";
    out += category ? std::string(to_string(*category)) : std::string("NONE");
    out += "\nJUSTIFICATION: ";
    out += justification;
    return out;
}

}  // namespace xmv
