#include "xmv/prompts.hpp"

#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xmv/errors.hpp"
#include "xmv/hash.hpp"
#include "xmv/text.hpp"

namespace xmv {

using nlohmann::json;

namespace {

constexpr std::string_view kOpen = "{{";
constexpr std::string_view kClose = "}}";
constexpr std::size_t kRubricSize = 15;
constexpr std::size_t kCriteriaSize = 4;

std::string defuse_markers(std::string_view v) {
    std::string out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(v[i]);
        if ((v[i] == '{' || v[i] == '}') && i + 1 < v.size() && v[i + 1] == v[i]) out.push_back(' ');
    }
    return out;
}

std::vector<std::string> nonempty_lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) {
        auto t = text::trim(line);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

std::string numbered(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += '\n';
        out += std::to_string(i + 1) + ". " + items[i];
    }
    return out;
}

std::string bulleted(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += '\n';
        out += "- " + items[i];
    }
    return out;
}

}  // namespace

std::string_view to_string(TemplateKind k) noexcept {
    switch (k) {
        case TemplateKind::Explainer: return "Explainer";
        case TemplateKind::Verifier: return "Verifier";
        case TemplateKind::Refeed: return "Refeed";
    }
    return "?";
}

std::string_view to_string(PromptVariant v) noexcept {
    switch (v) {
        case PromptVariant::V0: return "V0";
        case PromptVariant::V1: return "V1";
        case PromptVariant::V2: return "V2";
    }
    return "?";
}

std::optional<PromptVariant> parse_variant(std::string_view s) noexcept {
    const auto l = text::to_lower(s);
    if (l == "v0") return PromptVariant::V0;
    if (l == "v1") return PromptVariant::V1;
    if (l == "v2") return PromptVariant::V2;
    return std::nullopt;
}

std::string TemplateId::name() const {
    switch (kind_) {
        case TemplateKind::Explainer: return "explainer";
        case TemplateKind::Refeed: return "refeed";
        case TemplateKind::Verifier: return "verifier_" + text::to_lower(to_string(variant_));
    }
    return "?";
}

std::string RenderedPrompt::sha256() const { return sha256_hex(text); }

std::size_t token_length(std::string_view t) { return text::whitespace_tokens(t).size(); }

RenderedPrompt render_template(std::string_view tmpl, TemplateId id, const std::map<std::string, std::string>& values) {
    RenderedPrompt out;
    out.template_id = id;
    std::vector<std::string> missing;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find(kOpen, pos);
        if (open == std::string_view::npos) {
            out.text.append(tmpl.substr(pos));
            break;
        }
        const auto close = tmpl.find(kClose, open + kOpen.size());
        if (close == std::string_view::npos) {
            throw TemplateError("template " + id.name() + " has an unterminated placeholder");
        }
        out.text.append(tmpl.substr(pos, open - pos));
        const auto name = std::string(text::trim(tmpl.substr(open + kOpen.size(), close - open - kOpen.size())));
        auto it = values.find(name);
        if (it == values.end() || text::trim(it->second).empty()) {
            missing.push_back(name);
        } else {
            out.text.append(defuse_markers(it->second));
            out.filled[name] = it->second;
        }
        pos = close + kClose.size();
    }
    out.unfilled_count = static_cast<int>(missing.size());
    if (!missing.empty()) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        throw MissingPlaceholder("template " + id.name() + ": no value for {{" + names + "}}");
    }
    return out;
}

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw TemplateError("template directory '" + dir.string() + "' does not exist");
    const auto manifest_path = dir / "manifest.json";
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path.string()));
    } catch (const IoError& e) {
        throw TemplateError(e.what());
    } catch (const json::exception& e) {
        throw TemplateError("invalid template manifest: " + std::string(e.what()));
    }

    TemplateStore store;
    store.dir_ = dir;
    store.version_ = manifest.value("version", "");
    std::map<std::string, std::string> contents;
    for (const auto& f : manifest.at("files")) {
        const auto id = f.at("id").get<std::string>();
        const auto path = dir / f.at("path").get<std::string>();
        std::string body;
        try {
            body = read_file(path.string());
        } catch (const IoError& e) {
            throw TemplateError(e.what());
        }
        const auto digest = sha256_hex(body);
        const auto pinned = f.value("sha256", "");
        if (digest != pinned) {
            throw TemplateError("hash mismatch for template asset '" + id + "': manifest " + pinned + ", file " + digest);
        }
        store.hashes_[id] = digest;
        contents[id] = std::move(body);
    }

    auto need = [&](const std::string& id) -> const std::string& {
        auto it = contents.find(id);
        if (it == contents.end()) throw TemplateError("template manifest lacks '" + id + "'");
        return it->second;
    };

    for (const auto& id : {TemplateId::explainer(), TemplateId::refeed(), TemplateId::verifier(PromptVariant::V0),
                           TemplateId::verifier(PromptVariant::V1), TemplateId::verifier(PromptVariant::V2)}) {
        store.templates_[id.name()] = need(id.name());
    }

    store.rubric_.instructions = nonempty_lines(need("rubric"));
    store.rubric_.criteria = nonempty_lines(need("criteria"));
    if (store.rubric_.instructions.size() != kRubricSize)
        throw TemplateError("verifier rubric must hold " + std::to_string(kRubricSize) + " instructions, found " +
                            std::to_string(store.rubric_.instructions.size()));
    if (store.rubric_.criteria.size() != kCriteriaSize)
        throw TemplateError("verifier criteria must hold " + std::to_string(kCriteriaSize) + " entries, found " +
                            std::to_string(store.rubric_.criteria.size()));

    store.refusal_block_ = std::string(text::trim(need("refusal_block")));
    if (std::string(text::trim(need("response_format"))) != format_contract())
        throw TemplateError("response_format asset differs from the verdict contract compiled into this build");

    json methods;
    try {
        methods = json::parse(need("methods"));
    } catch (const json::exception& e) {
        throw TemplateError("invalid methods.json: " + std::string(e.what()));
    }
    for (auto m : {XaiMethod::SHAP, XaiMethod::LIME, XaiMethod::GradCAMpp, XaiMethod::IntegratedGradients,
                   XaiMethod::EBM}) {
        const auto key = std::string(to_string(m));
        if (!methods.contains(key)) throw TemplateError("methods.json lacks an entry for " + key);
        store.methods_[m] = {methods[key].value("guidelines", ""), methods[key].value("description", "")};
    }
    return store;
}

const std::string& TemplateStore::raw_template(TemplateId id) const { return templates_.at(id.name()); }

std::map<std::string, std::string> TemplateStore::common_fields(const DatasetContext& ctx, XaiMethod method,
                                                                std::string_view artifact_text) const {
    const auto& notes = methods_.at(method);
    std::string glossary;
    for (const auto& [name, desc] : ctx.feature_glossary) {
        if (!glossary.empty()) glossary += '\n';
        glossary += "- " + name + ": " + desc;
    }
    if (glossary.empty()) glossary = "(no feature glossary for this dataset)";
    return {
        {"method_guidelines", notes.guidelines},
        {"method_description", notes.description},
        {"method_name", std::string(to_string(method))},
        {"refusal_block", refusal_block_},
        {"task_description", ctx.task_description},
        {"target_description", ctx.target_description},
        {"feature_glossary", glossary},
        {"artifact_text", std::string(artifact_text)},
    };
}

RenderedPrompt TemplateStore::render_explainer(std::string_view artifact_text, const DatasetContext& ctx,
                                               XaiMethod method) const {
    const auto id = TemplateId::explainer();
    return render_template(raw_template(id), id, common_fields(ctx, method, artifact_text));
}

RenderedPrompt TemplateStore::render_verifier(std::string_view explanation, std::string_view artifact_text,
                                              PromptVariant variant) const {
    const auto id = TemplateId::verifier(variant);
    std::map<std::string, std::string> values = {
        {"explanation", std::string(explanation)},
        {"artifact_text", std::string(artifact_text)},
        {"criteria", bulleted(rubric_.criteria)},
        {"rubric", numbered(rubric_.instructions)},
        {"response_format", format_contract()},
    };
    return render_template(raw_template(id), id, values);
}

RenderedPrompt TemplateStore::render_refeed(std::string_view previous_explanation, std::string_view justification,
                                            ErrorCategory error_type, std::string_view artifact_text,
                                            const DatasetContext& ctx, XaiMethod method) const {
    const auto id = TemplateId::refeed();
    auto values = common_fields(ctx, method, artifact_text);
    values["previous_explanation"] = std::string(previous_explanation);
    values["justification"] = std::string(justification);
    values["error_type"] = std::string(to_string(error_type));
    return render_template(raw_template(id), id, values);
}

std::string TemplateStore::format_reminder() const {
    return "\n\nREMINDER\nYour previous reply could not be read. Answer again and end with the three lines "
           "required below, exactly as written.\n" +
           format_contract();
}

}  // namespace xmv
