#pragma once

// Run configuration: one TOML file, relative paths resolved against the
// file's directory, endpoint secrets overridable from the environment.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xmv/pipeline.hpp"

namespace xmv {

struct RunPaths {
    std::filesystem::path templates;
    std::filesystem::path artifacts;
    std::filesystem::path logs;
    std::filesystem::path reports;
};

struct UseCaseSpec {
    std::string name;
    std::vector<std::filesystem::path> artifacts;
};

struct RunConfig {
    std::uint64_t seed = 0;
    RunPaths paths;
    PipelineConfig pipeline;
    CollectionOptions collection;
    int max_parallel = 2;  // gateway requests in flight
    std::vector<UseCaseSpec> usecases;
    std::filesystem::path source;

    const std::string& explainer_model() const { return pipeline.explainer.model_name; }
    const std::string& verifier_model() const { return pipeline.verifier.model_name; }

    /// Canonical JSON of the resolved configuration without secrets.
    nlohmann::json to_json() const;
    /// SHA-256 of to_json().dump().
    std::string hash() const;
};

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

/// Process environment lookup.
std::optional<std::string> process_env(const char* name);

/// Parses TOML text. `base_dir` anchors relative paths. Throws ConfigError.
RunConfig parse_config(const std::string& toml_text, const std::filesystem::path& base_dir,
                       const EnvLookup& env = process_env);

RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env);

/// Defaults with templates resolved to the installed or source asset directory.
RunConfig default_config(const EnvLookup& env = process_env);

/// Applies XMV_ENDPOINT, XMV_MODEL and XMV_API_KEY to both roles.
void apply_env_overrides(RunConfig& cfg, const EnvLookup& env);

/// Directory holding the shipped templates for this build.
std::filesystem::path default_template_dir();

}  // namespace xmv
