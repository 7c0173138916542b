#pragma once

// Prompt templates for the Explainer, the Verifier (variants V0/V1/V2) and the
// refeed step. Templates are plain-text assets with {{name}} placeholders,
// loaded once from a directory whose manifest pins each file's SHA-256.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmv/artifacts.hpp"
#include "xmv/verdict.hpp"

namespace xmv {

enum class TemplateKind { Explainer, Verifier, Refeed };
enum class PromptVariant { V0, V1, V2 };

std::string_view to_string(TemplateKind k) noexcept;
std::string_view to_string(PromptVariant v) noexcept;
std::optional<PromptVariant> parse_variant(std::string_view s) noexcept;

class TemplateId {
public:
    static TemplateId explainer() { return {TemplateKind::Explainer, PromptVariant::V0}; }
    static TemplateId refeed() { return {TemplateKind::Refeed, PromptVariant::V0}; }
    static TemplateId verifier(PromptVariant v) { return {TemplateKind::Verifier, v}; }

    TemplateKind kind() const noexcept { return kind_; }
    PromptVariant variant() const noexcept { return variant_; }
    std::string name() const;  // "explainer", "refeed", "verifier_v0", ...

    bool operator==(const TemplateId&) const = default;
    auto operator<=>(const TemplateId&) const = default;

private:
    TemplateId(TemplateKind k, PromptVariant v) : kind_(k), variant_(v) {}
    TemplateKind kind_;
    PromptVariant variant_;
};

struct RenderedPrompt {
    TemplateId template_id = TemplateId::explainer();
    std::string text;
    std::map<std::string, std::string> filled;
    int unfilled_count = 0;

    std::string sha256() const;
};

struct VerifierRubric {
    std::vector<std::string> instructions;  // exactly 15
    std::vector<std::string> criteria;      // exactly 4
};

/// Substitutes {{name}} markers in a single pass. Values are inserted
/// verbatim except that any "{{" / "}}" inside them is split apart so no
/// marker can survive into the output. Throws MissingPlaceholder listing
/// every marker without a non-empty value.
RenderedPrompt render_template(std::string_view tmpl, TemplateId id, const std::map<std::string, std::string>& values);

class TemplateStore {
public:
    /// Reads manifest.json and every file it lists; verifies content hashes.
    /// Throws TemplateError.
    static TemplateStore load(const std::filesystem::path& dir);

    RenderedPrompt render_explainer(std::string_view artifact_text, const DatasetContext& ctx, XaiMethod method) const;

    RenderedPrompt render_verifier(std::string_view explanation, std::string_view artifact_text,
                                   PromptVariant variant) const;

    RenderedPrompt render_refeed(std::string_view previous_explanation, std::string_view justification,
                                 ErrorCategory error_type, std::string_view artifact_text, const DatasetContext& ctx,
                                 XaiMethod method) const;

    /// Appended to a Verifier prompt when its reply could not be parsed.
    std::string format_reminder() const;

    const VerifierRubric& rubric() const noexcept { return rubric_; }
    const std::string& refusal_block() const noexcept { return refusal_block_; }
    const std::string& raw_template(TemplateId id) const;

    /// File id -> SHA-256 for every asset in the store (for run provenance).
    const std::map<std::string, std::string>& hashes() const noexcept { return hashes_; }
    const std::string& version() const noexcept { return version_; }
    const std::filesystem::path& directory() const noexcept { return dir_; }

private:
    struct MethodNotes {
        std::string guidelines;
        std::string description;
    };

    std::map<std::string, std::string> common_fields(const DatasetContext& ctx, XaiMethod method,
                                                     std::string_view artifact_text) const;

    std::filesystem::path dir_;
    std::string version_;
    std::map<std::string, std::string> templates_;  // by TemplateId::name()
    std::map<XaiMethod, MethodNotes> methods_;
    VerifierRubric rubric_;
    std::string refusal_block_;
    std::map<std::string, std::string> hashes_;
};

/// Whitespace token count; used for the variant length ordering.
std::size_t token_length(std::string_view text);

}  // namespace xmv
