#pragma once

// Small text helpers shared by readability scoring, textualization and the
// mutation checker. ASCII-oriented: bytes >= 0x80 are treated as letters so
// UTF-8 words are never split in the middle.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace xmv::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

/// Sentences end at '.', '?' or '!' followed by whitespace or end of input.
/// Returned views are trimmed and point into `text`; empty pieces are dropped.
std::vector<std::string_view> split_sentences(std::string_view text);

/// Characters that continue a word for whole-word name matching. Hyphen and
/// underscore are included so "top-left" never matches "left".
bool is_name_char(char c) noexcept;

/// Case-insensitive whole-word occurrences of `name` in `text` (byte offsets).
std::vector<std::size_t> find_word(std::string_view text, std::string_view name);

inline bool contains_word(std::string_view text, std::string_view name) {
    return !find_word(text, name).empty();
}

/// Replaces every whole-word occurrence of each `from[i]` with `to[i]` in a
/// single left-to-right pass, so swaps (a->b, b->a) do not cascade.
std::string replace_words(std::string_view text, const std::vector<std::string>& from,
                          const std::vector<std::string>& to);

/// Splits on ASCII whitespace.
std::vector<std::string_view> whitespace_tokens(std::string_view text);

/// Fixed-point rendering with explicit sign for non-negative values ("+0.4123").
std::string signed_fixed(double value, int decimals);
std::string fixed(double value, int decimals);

/// Drops a leading <think>...</think> span (everything up to the last closing tag).
std::string strip_reasoning(std::string_view raw);

}  // namespace xmv::text
