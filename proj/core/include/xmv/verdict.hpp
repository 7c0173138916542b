#pragma once

// The Verifier's standardized response: decision, error category and
// justification, plus the parser that turns free-form model output into it.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xmv {

enum class ErrorCategory {
    SwapTopFeature,
    SwapMinorFeature,
    NegateRelation,
    OmitFeature,
    InsertHallucination,
    TruncateResponse,
};

inline constexpr std::array<ErrorCategory, 6> kAllCategories = {
    ErrorCategory::SwapTopFeature,     ErrorCategory::SwapMinorFeature,    ErrorCategory::NegateRelation,
    ErrorCategory::OmitFeature,        ErrorCategory::InsertHallucination, ErrorCategory::TruncateResponse,
};

std::string_view to_string(ErrorCategory c) noexcept;
std::optional<ErrorCategory> parse_category(std::string_view s) noexcept;

enum class Decision { Accept, Reject };
std::string_view to_string(Decision d) noexcept;

struct Verdict {
    Decision decision = Decision::Accept;
    std::string justification;
    std::optional<ErrorCategory> error_category;  // present iff Reject
    std::string raw_text;

    bool used_fallback = false;         // decided by the keyword scan, not the grammar
    std::vector<std::string> warnings;  // e.g. Accept that also named a category

    bool operator==(const Verdict& o) const {
        return decision == o.decision && justification == o.justification && error_category == o.error_category;
    }
};

/// Parses a Verifier reply. Reasoning spans (<think>...</think>) are removed
/// first; then the keyed grammar
///
///     DECISION: ACCEPT|REJECT
///     ERROR_TYPE: <category>|NONE
///     JUSTIFICATION: <text, may continue on following lines>
///
/// is matched with case-insensitive keys in any order, the last occurrence of
/// each key winning. Without a DECISION line, a keyword scan requires exactly
/// one of the words accept/reject (plus a category name for reject).
/// Throws ParseError; never returns a partially filled verdict.
Verdict parse_verdict(std::string_view raw);

/// The instruction block inserted into every Verifier prompt.
const std::string& format_contract();

/// A reply laid out the way format_contract() asks for.
std::string compose_response(Decision decision, std::optional<ErrorCategory> category,
                             std::string_view justification, std::string_view reasoning = {});

}  // namespace xmv
