#include "xmv/config.hpp"

#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "xmv/errors.hpp"
#include "xmv/hash.hpp"

#ifndef XMV_SOURCE_TEMPLATE_DIR
#define XMV_SOURCE_TEMPLATE_DIR ""
#endif
#ifndef XMV_INSTALL_TEMPLATE_DIR
#define XMV_INSTALL_TEMPLATE_DIR ""
#endif

namespace xmv {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<std::string> process_env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

fs::path default_template_dir() {
    if (auto env = process_env("XMV_TEMPLATE_DIR")) return *env;
    const fs::path src = XMV_SOURCE_TEMPLATE_DIR;
    if (!src.empty() && fs::exists(src / "manifest.json")) return src;
    return XMV_INSTALL_TEMPLATE_DIR;
}

void apply_env_overrides(RunConfig& cfg, const EnvLookup& env) {
    for (auto* role : {&cfg.pipeline.explainer, &cfg.pipeline.verifier}) {
        if (auto v = env("XMV_ENDPOINT")) role->endpoint = *v;
        if (auto v = env("XMV_MODEL")) role->model_name = *v;
        if (auto v = env("XMV_API_KEY")) role->api_key = *v;
    }
}

RunConfig default_config(const EnvLookup& env) {
    RunConfig cfg;
    cfg.paths.templates = default_template_dir();
    cfg.paths.artifacts = ".";
    cfg.paths.logs = "xmv-out/logs";
    cfg.paths.reports = "xmv-out/reports";
    cfg.pipeline.explainer.model_name = "explainer";
    cfg.pipeline.verifier.model_name = "verifier";
    apply_env_overrides(cfg, env);
    return cfg;
}

namespace {

template <typename T, typename View>
T get_or(const View& v, T fallback, const char* key) {
    if (!v) return fallback;
    if (auto x = v.template value<T>()) return *x;
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

void read_inference(const toml::table& root, const char* section, InferenceConfig& out) {
    const auto t = root[section];
    if (!t) return;
    if (!t.is_table()) throw ConfigError(std::string("[") + section + "] must be a table");
    out.model_name = get_or<std::string>(t["model"], out.model_name, "model");
    out.endpoint = get_or<std::string>(t["endpoint"], out.endpoint, "endpoint");
    out.api_key = get_or<std::string>(t["api_key"], out.api_key, "api_key");
    out.temperature = get_or<double>(t["temperature"], out.temperature, "temperature");
    out.max_new_tokens = static_cast<int>(get_or<int64_t>(t["max_new_tokens"], out.max_new_tokens, "max_new_tokens"));
    out.context_window = static_cast<int>(get_or<int64_t>(t["context_window"], out.context_window, "context_window"));
    out.top_k_logprobs = static_cast<int>(get_or<int64_t>(t["top_k_logprobs"], out.top_k_logprobs, "top_k_logprobs"));
    out.think_mode = get_or<bool>(t["think"], out.think_mode, "think");
    out.timeout_seconds =
        static_cast<int>(get_or<int64_t>(t["timeout_seconds"], out.timeout_seconds, "timeout_seconds"));
}

}  // namespace

RunConfig parse_config(const std::string& toml_text, const fs::path& base_dir, const EnvLookup& env) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "invalid configuration: " << e.description() << " (line " << e.source().begin.line << ")";
        throw ConfigError(os.str());
    }

    RunConfig cfg = default_config([](const char*) { return std::nullopt; });
    cfg.seed = static_cast<std::uint64_t>(get_or<int64_t>(root["seed"], 0, "seed"));

    if (auto p = root["paths"]) {
        if (auto v = p["templates"].value<std::string>()) cfg.paths.templates = resolve(base_dir, *v);
        if (auto v = p["artifacts"].value<std::string>()) cfg.paths.artifacts = resolve(base_dir, *v);
        if (auto v = p["logs"].value<std::string>()) cfg.paths.logs = resolve(base_dir, *v);
        if (auto v = p["reports"].value<std::string>()) cfg.paths.reports = resolve(base_dir, *v);
    }
    if (cfg.paths.artifacts == ".") cfg.paths.artifacts = base_dir;

    read_inference(root, "explainer", cfg.pipeline.explainer);
    read_inference(root, "verifier", cfg.pipeline.verifier);

    if (auto p = root["pipeline"]) {
        cfg.pipeline.k_max = static_cast<int>(get_or<int64_t>(p["k_max"], cfg.pipeline.k_max, "k_max"));
        cfg.pipeline.refeed_enabled = get_or<bool>(p["refeed"], cfg.pipeline.refeed_enabled, "refeed");
        const auto variant = get_or<std::string>(p["variant"], "V0", "variant");
        auto v = parse_variant(variant);
        if (!v) throw ConfigError("unknown verifier variant '" + variant + "'");
        cfg.pipeline.verifier_variant = *v;
        cfg.collection.concurrency =
            static_cast<int>(get_or<int64_t>(p["concurrency"], cfg.collection.concurrency, "concurrency"));
        cfg.max_parallel = static_cast<int>(get_or<int64_t>(p["max_parallel"], cfg.max_parallel, "max_parallel"));
    }
    if (auto c = root["collection"]) {
        cfg.collection.accept_target =
            static_cast<int>(get_or<int64_t>(c["accept_target"], cfg.collection.accept_target, "accept_target"));
        cfg.collection.reject_limit =
            static_cast<int>(get_or<int64_t>(c["reject_limit"], cfg.collection.reject_limit, "reject_limit"));
    }
    if (auto arr = root["usecase"].as_array()) {
        for (const auto& node : *arr) {
            const auto* t = node.as_table();
            if (!t) throw ConfigError("[[usecase]] entries must be tables");
            UseCaseSpec u;
            u.name = (*t)["name"].value_or(std::string());
            if (u.name.empty()) throw ConfigError("[[usecase]] needs a name");
            if (const auto* files = (*t)["artifacts"].as_array()) {
                for (const auto& f : *files) {
                    auto s = f.value<std::string>();
                    if (!s) throw ConfigError("use case '" + u.name + "': artifacts must be strings");
                    u.artifacts.push_back(resolve(cfg.paths.artifacts, *s));
                }
            }
            if (u.artifacts.empty()) throw ConfigError("use case '" + u.name + "' lists no artifacts");
            cfg.usecases.push_back(std::move(u));
        }
    }

    apply_env_overrides(cfg, env);
    cfg.pipeline.validate();
    cfg.collection.validate();
    if (cfg.max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
    return cfg;
}

RunConfig load_config(const fs::path& path, const EnvLookup& env) {
    std::string text;
    try {
        text = read_file(path.string());
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    auto cfg = parse_config(text, fs::absolute(path).parent_path(), env);
    cfg.source = path;
    return cfg;
}

json RunConfig::to_json() const {
    auto role = [](const InferenceConfig& c) {
        return json{{"model", c.model_name},
                    {"endpoint", c.endpoint},
                    {"temperature", c.temperature},
                    {"max_new_tokens", c.max_new_tokens},
                    {"context_window", c.context_window},
                    {"top_k_logprobs", c.top_k_logprobs},
                    {"think", c.think_mode},
                    {"timeout_seconds", c.timeout_seconds}};
    };
    json ucs = json::array();
    for (const auto& u : usecases) {
        json files = json::array();
        for (const auto& f : u.artifacts) files.push_back(f.filename().string());
        ucs.push_back({{"name", u.name}, {"artifacts", files}});
    }
    return {{"seed", seed},
            {"explainer", role(pipeline.explainer)},
            {"verifier", role(pipeline.verifier)},
            {"pipeline",
             {{"k_max", pipeline.k_max},
              {"refeed", pipeline.refeed_enabled},
              {"variant", to_string(pipeline.verifier_variant)},
              {"concurrency", collection.concurrency},
              {"max_parallel", max_parallel}}},
            {"collection", {{"accept_target", collection.accept_target}, {"reject_limit", collection.reject_limit}}},
            {"usecases", ucs}};
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

}  // namespace xmv
