#pragma once

// Precomputed XAI outputs and their canonical text form.
//
// Three payload shapes are supported: global feature attributions (SHAP,
// LIME, EBM), a saliency heatmap (Grad-CAM++) and token attributions
// (Integrated Gradients). Loading validates the shape against the method and
// puts the payload into canonical order, so textualize() is a pure function of
// the artifact's content and not of the order entries appeared in the file.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace xmv {

enum class XaiMethod { SHAP, LIME, GradCAMpp, IntegratedGradients, EBM };
enum class Direction { Positive, Negative, Unsigned };

std::string_view to_string(XaiMethod m) noexcept;
std::string_view to_string(Direction d) noexcept;
std::optional<XaiMethod> parse_method(std::string_view s) noexcept;
std::optional<Direction> parse_direction(std::string_view s) noexcept;

struct FeatureAttribution {
    std::string name;
    double score = 0.0;
    Direction direction = Direction::Unsigned;
};

struct FeatureAttributions {
    std::vector<FeatureAttribution> entries;  // canonical order after load
};

struct SaliencyGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;  // row-major, in [0,1]

    // Min-max rescaling applied at ingestion when raw values left [0,1].
    struct Scaling {
        bool applied = false;
        double raw_min = 0.0;
        double raw_max = 1.0;
    } scaling;

    double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

struct TokenAttribution {
    std::string text;
    double attribution = 0.0;
};

struct TokenAttributions {
    std::vector<TokenAttribution> tokens;  // source order
    std::string predicted_label;
};

struct DatasetContext {
    std::string task_description;
    std::string target_description;
    std::map<std::string, std::string> feature_glossary;
};

using Payload = std::variant<FeatureAttributions, SaliencyGrid, TokenAttributions>;

struct XaiArtifact {
    XaiMethod method = XaiMethod::SHAP;
    std::string dataset_id;
    Payload payload;
    DatasetContext context;
    std::string source;  // file path or other reference; not part of the content
};

// ---------------------------------------------------------------------------
// Spatial summary of a saliency grid over a fixed 3x3 partition.

enum class Region : std::size_t {
    TopLeft,
    TopCenter,
    TopRight,
    MiddleLeft,
    Center,
    MiddleRight,
    BottomLeft,
    BottomCenter,
    BottomRight,
};
inline constexpr std::size_t kRegionCount = 9;

std::string_view region_label(Region r) noexcept;
const std::array<std::string_view, kRegionCount>& region_labels() noexcept;

struct RegionSummary {
    Region peak_region = Region::TopLeft;
    std::array<double, kRegionCount> per_region_mass{};  // indexed by Region, row-major
    double global_max = 0.0;
    double global_mean = 0.0;
    double total_activation = 0.0;

    double mass(Region r) const { return per_region_mass[static_cast<std::size_t>(r)]; }
};

/// Region block index for a row (or column) under the remainder rule: blocks
/// have size n/3 and the last block absorbs the remainder.
std::size_t region_block(std::size_t index, std::size_t extent) noexcept;

RegionSummary saliency_summary(const SaliencyGrid& grid);

// ---------------------------------------------------------------------------

/// One named item of the artifact's ground truth, in rank order.
struct RankedItem {
    std::string name;
    double score = 0.0;                      // attribution, |IG| or region mass
    Direction direction = Direction::Unsigned;
    int rank = 0;                            // 1-based
};

struct TextualizeOptions {
    std::size_t top_tokens = 10;
};

/// Items the canonical text lists with a rank: all features, all nine regions
/// by descending mass, or the top-N distinct tokens by |attribution|.
std::vector<RankedItem> ranked_items(const XaiArtifact& artifact, const TextualizeOptions& opts = {});

/// Every name the artifact knows about (features, region labels, all tokens).
std::vector<std::string> artifact_vocabulary(const XaiArtifact& artifact);

std::string textualize(const XaiArtifact& artifact, const TextualizeOptions& opts = {});

/// Validates invariants and applies canonical ordering / saliency rescaling.
/// Throws SchemaError or ValueError.
void canonicalize(XaiArtifact& artifact);

XaiArtifact artifact_from_json(const nlohmann::json& j, std::optional<XaiMethod> expected_method = std::nullopt);
nlohmann::json artifact_to_json(const XaiArtifact& artifact);

/// Loads one artifact record (JSON). Throws IoError, SchemaError, ValueError.
XaiArtifact load_artifact(const std::string& path, std::optional<XaiMethod> expected_method = std::nullopt);

}  // namespace xmv
