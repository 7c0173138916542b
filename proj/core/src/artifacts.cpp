#include "xmv/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xmv/errors.hpp"
#include "xmv/hash.hpp"
#include "xmv/text.hpp"

namespace xmv {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kRegionCount> kRegionLabels = {
    "top-left",    "top-center",    "top-right",     //
    "middle-left", "center",        "middle-right",  //
    "bottom-left", "bottom-center", "bottom-right",
};

enum class Shape { Features, Saliency, Tokens };

Shape shape_for(XaiMethod m) {
    switch (m) {
        case XaiMethod::GradCAMpp: return Shape::Saliency;
        case XaiMethod::IntegratedGradients: return Shape::Tokens;
        default: return Shape::Features;
    }
}

Shape shape_of(const Payload& p) {
    if (std::holds_alternative<FeatureAttributions>(p)) return Shape::Features;
    if (std::holds_alternative<SaliencyGrid>(p)) return Shape::Saliency;
    return Shape::Tokens;
}

std::string_view shape_name(Shape s) {
    switch (s) {
        case Shape::Features: return "feature attributions";
        case Shape::Saliency: return "saliency grid";
        case Shape::Tokens: return "token attributions";
    }
    return "?";
}

double read_real(const json& v, const std::string& what) {
    if (v.is_number()) {
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ValueError(what + " is not finite");
        return x;
    }
    if (v.is_string()) {
        const auto s = text::to_lower(v.get<std::string>());
        if (s == "nan" || s == "inf" || s == "-inf" || s == "infinity" || s == "-infinity")
            throw ValueError(what + " is not finite");
    }
    throw SchemaError(what + " must be a number");
}

std::string read_string(const json& obj, const char* key, bool required = true) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) throw SchemaError(std::string("missing field '") + key + "'");
        return {};
    }
    if (!it->is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

std::vector<RankedItem> ranked_tokens(const TokenAttributions& ta, std::size_t top_n) {
    // Distinct token texts (case-insensitive), each represented by its
    // strongest occurrence; ties keep source order.
    struct Cand {
        std::string text;
        double attribution;
        std::size_t position;
    };
    std::vector<Cand> best;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ta.tokens.size(); ++i) {
        const auto& t = ta.tokens[i];
        const auto name = std::string(text::trim(t.text));
        if (name.empty()) continue;
        const auto key = text::to_lower(name);
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, best.size());
            best.push_back({name, t.attribution, i});
        } else if (std::abs(t.attribution) > std::abs(best[it->second].attribution)) {
            best[it->second].attribution = t.attribution;
        }
    }
    std::stable_sort(best.begin(), best.end(), [](const Cand& a, const Cand& b) {
        const double x = std::abs(a.attribution), y = std::abs(b.attribution);
        if (x != y) return x > y;
        return a.position < b.position;
    });
    if (best.size() > top_n) best.resize(top_n);
    std::vector<RankedItem> out;
    for (std::size_t i = 0; i < best.size(); ++i) {
        const double a = best[i].attribution;
        const Direction d = a > 0 ? Direction::Positive : (a < 0 ? Direction::Negative : Direction::Unsigned);
        out.push_back({best[i].text, a, d, static_cast<int>(i + 1)});
    }
    return out;
}

std::vector<RankedItem> ranked_regions(const SaliencyGrid& grid) {
    const auto summary = saliency_summary(grid);
    std::array<std::size_t, kRegionCount> order{};
    for (std::size_t i = 0; i < kRegionCount; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return summary.per_region_mass[a] > summary.per_region_mass[b];
    });
    std::vector<RankedItem> out;
    for (std::size_t i = 0; i < kRegionCount; ++i) {
        const double m = summary.per_region_mass[order[i]];
        out.push_back({std::string(kRegionLabels[order[i]]), m, m > 0 ? Direction::Positive : Direction::Unsigned,
                       static_cast<int>(i + 1)});
    }
    return out;
}

}  // namespace

std::string_view to_string(XaiMethod m) noexcept {
    switch (m) {
        case XaiMethod::SHAP: return "SHAP";
        case XaiMethod::LIME: return "LIME";
        case XaiMethod::GradCAMpp: return "GradCAMpp";
        case XaiMethod::IntegratedGradients: return "IntegratedGradients";
        case XaiMethod::EBM: return "EBM";
    }
    return "?";
}

std::string_view to_string(Direction d) noexcept {
    switch (d) {
        case Direction::Positive: return "positive";
        case Direction::Negative: return "negative";
        case Direction::Unsigned: return "unsigned";
    }
    return "?";
}

std::optional<XaiMethod> parse_method(std::string_view s) noexcept {
    const auto l = text::to_lower(s);
    if (l == "shap") return XaiMethod::SHAP;
    if (l == "lime") return XaiMethod::LIME;
    if (l == "gradcampp" || l == "grad-cam++" || l == "gradcam++") return XaiMethod::GradCAMpp;
    if (l == "integratedgradients" || l == "ig" || l == "integrated_gradients") return XaiMethod::IntegratedGradients;
    if (l == "ebm") return XaiMethod::EBM;
    return std::nullopt;
}

std::optional<Direction> parse_direction(std::string_view s) noexcept {
    const auto l = text::to_lower(s);
    if (l == "positive" || l == "+") return Direction::Positive;
    if (l == "negative" || l == "-") return Direction::Negative;
    if (l == "unsigned" || l == "none") return Direction::Unsigned;
    return std::nullopt;
}

std::string_view region_label(Region r) noexcept { return kRegionLabels[static_cast<std::size_t>(r)]; }
const std::array<std::string_view, kRegionCount>& region_labels() noexcept { return kRegionLabels; }

std::size_t region_block(std::size_t index, std::size_t extent) noexcept {
    const std::size_t block = extent / 3;
    if (block == 0) return 2;
    return std::min<std::size_t>(index / block, 2);
}

RegionSummary saliency_summary(const SaliencyGrid& grid) {
    if (grid.height < 1 || grid.width < 1) throw DegenerateError("saliency grid has zero extent");
    RegionSummary s;
    std::array<double, kRegionCount> sums{};
    double total = 0.0;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < grid.height; ++r) {
        const std::size_t br = region_block(r, grid.height);
        for (std::size_t c = 0; c < grid.width; ++c) {
            const double v = grid.at(r, c);
            sums[br * 3 + region_block(c, grid.width)] += v;
            total += v;
            mx = std::max(mx, v);
        }
    }
    s.total_activation = total;
    s.global_max = mx;
    s.global_mean = total / static_cast<double>(grid.height * grid.width);
    if (total > 0) {
        for (std::size_t i = 0; i < kRegionCount; ++i) s.per_region_mass[i] = sums[i] / total;
    }
    std::size_t peak = 0;
    for (std::size_t i = 1; i < kRegionCount; ++i) {
        if (s.per_region_mass[i] > s.per_region_mass[peak]) peak = i;
    }
    s.peak_region = static_cast<Region>(peak);
    return s;
}

std::vector<RankedItem> ranked_items(const XaiArtifact& artifact, const TextualizeOptions& opts) {
    return std::visit(
        [&](const auto& p) -> std::vector<RankedItem> {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FeatureAttributions>) {
                std::vector<RankedItem> out;
                for (std::size_t i = 0; i < p.entries.size(); ++i) {
                    const auto& e = p.entries[i];
                    out.push_back({e.name, e.score, e.direction, static_cast<int>(i + 1)});
                }
                return out;
            } else if constexpr (std::is_same_v<T, SaliencyGrid>) {
                return ranked_regions(p);
            } else {
                return ranked_tokens(p, opts.top_tokens);
            }
        },
        artifact.payload);
}

std::vector<std::string> artifact_vocabulary(const XaiArtifact& artifact) {
    std::vector<std::string> out;
    if (const auto* fa = std::get_if<FeatureAttributions>(&artifact.payload)) {
        for (const auto& e : fa->entries) out.push_back(e.name);
    } else if (std::holds_alternative<SaliencyGrid>(artifact.payload)) {
        for (auto l : kRegionLabels) out.emplace_back(l);
    } else {
        std::set<std::string> seen;
        for (const auto& t : std::get<TokenAttributions>(artifact.payload).tokens) {
            auto name = std::string(text::trim(t.text));
            if (!name.empty() && seen.insert(text::to_lower(name)).second) out.push_back(name);
        }
    }
    return out;
}

std::string textualize(const XaiArtifact& artifact, const TextualizeOptions& opts) {
    std::ostringstream os;
    os << "Method: " << to_string(artifact.method) << ". Dataset: " << artifact.dataset_id << ".";
    const auto items = ranked_items(artifact, opts);

    if (const auto* fa = std::get_if<FeatureAttributions>(&artifact.payload)) {
        os << " Features ranked by absolute score: " << fa->entries.size() << ".\n";
        for (const auto& it : items) {
            os << "Rank " << it.rank << ": " << it.name << ", score " << text::signed_fixed(it.score, 4) << " ("
               << to_string(it.direction) << ").\n";
        }
        os << "In summary, " << items.size() << (items.size() == 1 ? " feature is" : " features are")
           << " listed in descending order of absolute score.";
    } else if (const auto* grid = std::get_if<SaliencyGrid>(&artifact.payload)) {
        const auto s = saliency_summary(*grid);
        os << " Heatmap size: " << grid->height << "x" << grid->width << ".\n";
        os << "Activation statistics: global max " << text::fixed(s.global_max, 4) << ", global mean "
           << text::fixed(s.global_mean, 4) << ".\n";
        if (s.total_activation > 0) {
            os << "Peak region: " << region_label(s.peak_region) << ".\n";
        } else {
            os << "Total activation is zero, so no region is highlighted.\n";
        }
        for (const auto& it : items) {
            os << "Rank " << it.rank << ": " << it.name << ", activation mass " << text::fixed(it.score, 4) << ".\n";
        }
        if (grid->scaling.applied) {
            os << "Raw heatmap values were min-max rescaled from [" << text::fixed(grid->scaling.raw_min, 4) << ", "
               << text::fixed(grid->scaling.raw_max, 4) << "] to [0, 1].\n";
        }
        os << "In summary, the heatmap is partitioned into " << kRegionCount
           << " regions listed in descending order of activation mass.";
    } else {
        const auto& ta = std::get<TokenAttributions>(artifact.payload);
        os << " Predicted label: " << ta.predicted_label << ". Tokens in input: " << ta.tokens.size() << ". Top "
           << items.size() << " distinct tokens by absolute attribution follow.\n";
        for (const auto& it : items) {
            os << "Rank " << it.rank << ": " << it.name << ", attribution " << text::signed_fixed(it.score, 4) << " ("
               << to_string(it.direction) << ").\n";
        }
        os << "In summary, " << items.size() << (items.size() == 1 ? " token is" : " tokens are")
           << " listed in descending order of absolute attribution.";
    }
    return os.str();
}

void canonicalize(XaiArtifact& a) {
    if (a.dataset_id.empty()) throw SchemaError("dataset_id must be non-empty");
    const Shape want = shape_for(a.method);
    const Shape have = shape_of(a.payload);
    if (want != have) {
        throw SchemaError("method " + std::string(to_string(a.method)) + " requires " + std::string(shape_name(want)) +
                          ", got " + std::string(shape_name(have)));
    }

    if (auto* fa = std::get_if<FeatureAttributions>(&a.payload)) {
        if (fa->entries.empty()) throw SchemaError("feature attribution list is empty");
        std::set<std::string> seen;
        for (const auto& e : fa->entries) {
            if (e.name.empty()) throw SchemaError("feature with empty name");
            if (!std::isfinite(e.score)) throw ValueError("score of feature '" + e.name + "' is not finite");
            if (!seen.insert(text::to_lower(e.name)).second) throw SchemaError("duplicate feature name '" + e.name + "'");
            if (!a.context.feature_glossary.count(e.name))
                throw SchemaError("feature '" + e.name + "' missing from feature_glossary");
        }
        std::sort(fa->entries.begin(), fa->entries.end(), [](const FeatureAttribution& x, const FeatureAttribution& y) {
            const double ax = std::abs(x.score), ay = std::abs(y.score);
            if (ax != ay) return ax > ay;
            return x.name < y.name;
        });
    } else if (auto* g = std::get_if<SaliencyGrid>(&a.payload)) {
        if (g->height < 1 || g->width < 1) throw SchemaError("saliency height and width must be positive");
        if (g->values.size() != g->height * g->width)
            throw SchemaError("saliency values length " + std::to_string(g->values.size()) + " != height*width " +
                              std::to_string(g->height * g->width));
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (double v : g->values) {
            if (!std::isfinite(v)) throw ValueError("saliency value is not finite");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (lo < 0.0 || hi > 1.0) {
            g->scaling = {true, lo, hi};
            for (double& v : g->values) {
                // A constant out-of-range grid carries no spatial contrast; keep
                // it uniform (all ones for positive, zeros otherwise).
                v = (hi > lo) ? (v - lo) / (hi - lo) : (hi > 0 ? 1.0 : 0.0);
            }
        }
    } else {
        auto& ta = std::get<TokenAttributions>(a.payload);
        if (ta.tokens.empty()) throw SchemaError("token attribution list is empty");
        for (const auto& t : ta.tokens) {
            if (!std::isfinite(t.attribution)) throw ValueError("attribution of token '" + t.text + "' is not finite");
        }
    }
}

XaiArtifact artifact_from_json(const json& j, std::optional<XaiMethod> expected_method) {
    if (!j.is_object()) throw SchemaError("artifact record must be a JSON object");
    XaiArtifact a;
    const auto method_s = read_string(j, "method");
    const auto method = parse_method(method_s);
    if (!method) throw SchemaError("unknown method '" + method_s + "'");
    if (expected_method && *expected_method != *method) {
        throw SchemaError("expected method " + std::string(to_string(*expected_method)) + ", file declares " +
                          std::string(to_string(*method)));
    }
    a.method = *method;
    a.dataset_id = read_string(j, "dataset_id");

    if (auto it = j.find("context"); it != j.end()) {
        if (!it->is_object()) throw SchemaError("context must be an object");
        a.context.task_description = read_string(*it, "task_description", false);
        a.context.target_description = read_string(*it, "target_description", false);
        if (auto g = it->find("feature_glossary"); g != it->end()) {
            if (!g->is_object()) throw SchemaError("feature_glossary must be an object");
            for (const auto& [k, v] : g->items()) {
                if (!v.is_string()) throw SchemaError("glossary entry '" + k + "' must be a string");
                a.context.feature_glossary[k] = v.get<std::string>();
            }
        }
    }

    auto pit = j.find("payload");
    if (pit == j.end() || !pit->is_object()) throw SchemaError("missing object field 'payload'");
    const json& p = *pit;
    const bool has_features = p.contains("features");
    const bool has_grid = p.contains("values") || p.contains("height") || p.contains("width");
    const bool has_tokens = p.contains("tokens");
    if (int(has_features) + int(has_grid) + int(has_tokens) != 1)
        throw SchemaError("payload must carry exactly one of: features, saliency grid, tokens");

    if (has_features) {
        const auto& arr = p.at("features");
        if (!arr.is_array()) throw SchemaError("payload.features must be an array");
        FeatureAttributions fa;
        for (const auto& e : arr) {
            if (!e.is_object()) throw SchemaError("feature entry must be an object");
            FeatureAttribution f;
            f.name = read_string(e, "name");
            if (!e.contains("score")) throw SchemaError("feature '" + f.name + "' has no score");
            f.score = read_real(e.at("score"), "score of feature '" + f.name + "'");
            const auto dir = read_string(e, "direction", false);
            if (!dir.empty()) {
                auto d = parse_direction(dir);
                if (!d) throw SchemaError("unknown direction '" + dir + "'");
                f.direction = *d;
            }
            fa.entries.push_back(std::move(f));
        }
        a.payload = std::move(fa);
    } else if (has_grid) {
        SaliencyGrid g;
        if (!p.contains("height") || !p.contains("width") || !p.contains("values"))
            throw SchemaError("saliency payload needs height, width and values");
        const auto& h = p.at("height");
        const auto& w = p.at("width");
        if (!h.is_number_integer() || !w.is_number_integer() || h.get<long long>() < 1 || w.get<long long>() < 1)
            throw SchemaError("saliency height and width must be positive integers");
        g.height = h.get<std::size_t>();
        g.width = w.get<std::size_t>();
        const auto& vals = p.at("values");
        if (!vals.is_array()) throw SchemaError("payload.values must be an array");
        g.values.reserve(vals.size());
        for (const auto& v : vals) g.values.push_back(read_real(v, "saliency value"));
        // Records written by artifact_to_json carry the scaling already applied.
        if (auto sc = p.find("scaling"); sc != p.end() && sc->is_object()) {
            g.scaling.applied = true;
            g.scaling.raw_min = read_real(sc->value("raw_min", json()), "scaling.raw_min");
            g.scaling.raw_max = read_real(sc->value("raw_max", json()), "scaling.raw_max");
        }
        a.payload = std::move(g);
    } else {
        const auto& arr = p.at("tokens");
        if (!arr.is_array()) throw SchemaError("payload.tokens must be an array");
        TokenAttributions ta;
        for (const auto& e : arr) {
            if (!e.is_object()) throw SchemaError("token entry must be an object");
            TokenAttribution t;
            t.text = read_string(e, "text");
            if (!e.contains("attribution")) throw SchemaError("token '" + t.text + "' has no attribution");
            t.attribution = read_real(e.at("attribution"), "attribution of token '" + t.text + "'");
            ta.tokens.push_back(std::move(t));
        }
        ta.predicted_label = read_string(p, "predicted_label", false);
        a.payload = std::move(ta);
    }

    canonicalize(a);
    return a;
}

json artifact_to_json(const XaiArtifact& a) {
    json j;
    j["method"] = std::string(to_string(a.method));
    j["dataset_id"] = a.dataset_id;
    json p = json::object();
    if (const auto* fa = std::get_if<FeatureAttributions>(&a.payload)) {
        json arr = json::array();
        for (const auto& e : fa->entries)
            arr.push_back({{"name", e.name}, {"score", e.score}, {"direction", std::string(to_string(e.direction))}});
        p["features"] = std::move(arr);
    } else if (const auto* g = std::get_if<SaliencyGrid>(&a.payload)) {
        p["height"] = g->height;
        p["width"] = g->width;
        p["values"] = g->values;
        if (g->scaling.applied) p["scaling"] = {{"raw_min", g->scaling.raw_min}, {"raw_max", g->scaling.raw_max}};
    } else {
        const auto& ta = std::get<TokenAttributions>(a.payload);
        json arr = json::array();
        for (const auto& t : ta.tokens) arr.push_back({{"text", t.text}, {"attribution", t.attribution}});
        p["tokens"] = std::move(arr);
        p["predicted_label"] = ta.predicted_label;
    }
    j["payload"] = std::move(p);
    j["context"] = {{"task_description", a.context.task_description},
                    {"target_description", a.context.target_description},
                    {"feature_glossary", a.context.feature_glossary}};
    return j;
}

XaiArtifact load_artifact(const std::string& path, std::optional<XaiMethod> expected_method) {
    const std::string raw = read_file(path);
    json j;
    try {
        j = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
    }
    try {
        auto a = artifact_from_json(j, expected_method);
        a.source = path;
        return a;
    } catch (const SchemaError& e) {
        throw SchemaError(path + ": " + e.what());
    } catch (const ValueError& e) {
        throw ValueError(path + ": " + e.what());
    }
}

}  // namespace xmv
