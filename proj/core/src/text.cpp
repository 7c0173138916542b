#include "xmv/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace xmv::text {

namespace {

bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char lower(char c) noexcept {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

}  // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::vector<std::string_view> split_sentences(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '?' && c != '!') continue;
        const bool boundary = (i + 1 == text.size()) || is_space(text[i + 1]);
        if (!boundary) continue;
        auto piece = trim(text.substr(start, i + 1 - start));
        if (!piece.empty()) out.push_back(piece);
        start = i + 1;
    }
    if (start < text.size()) {
        auto piece = trim(text.substr(start));
        if (!piece.empty()) out.push_back(piece);
    }
    return out;
}

bool is_name_char(char c) noexcept {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '_' || c == '-' || u >= 0x80;
}

std::vector<std::size_t> find_word(std::string_view text, std::string_view name) {
    std::vector<std::size_t> hits;
    if (name.empty() || name.size() > text.size()) return hits;
    for (std::size_t i = 0; i + name.size() <= text.size(); ++i) {
        if (i > 0 && is_name_char(text[i - 1])) continue;
        bool match = true;
        for (std::size_t k = 0; k < name.size(); ++k) {
            if (lower(text[i + k]) != lower(name[k])) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        const std::size_t end = i + name.size();
        if (end < text.size() && is_name_char(text[end])) continue;
        hits.push_back(i);
    }
    return hits;
}

std::string replace_words(std::string_view text, const std::vector<std::string>& from,
                          const std::vector<std::string>& to) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        bool replaced = false;
        if (i == 0 || !is_name_char(text[i - 1])) {
            for (std::size_t k = 0; k < from.size(); ++k) {
                const auto& f = from[k];
                if (f.empty() || i + f.size() > text.size()) continue;
                bool match = true;
                for (std::size_t j = 0; j < f.size(); ++j) {
                    if (lower(text[i + j]) != lower(f[j])) {
                        match = false;
                        break;
                    }
                }
                if (!match) continue;
                const std::size_t end = i + f.size();
                if (end < text.size() && is_name_char(text[end])) continue;
                out += to[k];
                i = end;
                replaced = true;
                break;
            }
        }
        if (!replaced) out.push_back(text[i++]);
    }
    return out;
}

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        if (j > i) out.push_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string fixed(double value, int decimals) {
    if (value == 0.0) value = 0.0;  // drop negative zero
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    std::string s(buf);
    if (s.size() > 1 && s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string signed_fixed(double value, int decimals) {
    std::string s = fixed(value, decimals);
    if (s[0] != '-') s.insert(s.begin(), '+');
    return s;
}

std::string strip_reasoning(std::string_view raw) {
    std::string s(raw);
    const auto lower = to_lower(s);
    // Everything before the last closing tag is reasoning.
    if (auto close = lower.rfind("</think>"); close != std::string::npos) {
        return s.substr(close + 8);
    }
    if (auto open = lower.find("<think>"); open != std::string::npos) {
        // Unterminated reasoning: keep it, the last-occurrence rule below
        // still finds a trailing DECISION line if the model wrote one.
        s.erase(open, 7);
    }
    return s;
}

}  // namespace xmv::text
