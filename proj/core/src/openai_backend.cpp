#include <algorithm>
#include <chrono>
#include <regex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "xmv/errors.hpp"
#include "xmv/gateway.hpp"
#include "xmv/text.hpp"

namespace xmv {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // base path without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("endpoint '" + url + "' is not an http(s) URL");
    Endpoint e{m[1].str(), m[2].matched ? m[2].str() : ""};
    while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
    return e;
}

}  // namespace

json OpenAIChatBackend::request_body(const std::string& prompt, const InferenceConfig& cfg) {
    return {
        {"model", cfg.model_name},
        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", cfg.temperature},
        {"max_tokens", cfg.max_new_tokens},
        {"logprobs", true},
        {"top_logprobs", cfg.top_k_logprobs},
        {"stream", false},
        {"think", cfg.think_mode},
        {"options", {{"num_ctx", cfg.context_window}}},
    };
}

GenerationResult OpenAIChatBackend::parse_response(const std::string& body, int top_k) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw BackendError("response is not JSON: " + std::string(e.what()));
    }
    if (j.contains("error")) {
        const auto& err = j["error"];
        throw BackendError("endpoint error: " + (err.is_object() ? err.value("message", err.dump()) : err.dump()));
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw BackendError("response has no choices");
    const auto& choice = j["choices"][0];
    GenerationResult g;
    const auto& msg = choice.value("message", json::object());
    if (msg.contains("content") && msg["content"].is_string()) g.text = msg["content"].get<std::string>();
    const auto finish = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                            ? choice["finish_reason"].get<std::string>()
                            : std::string();
    g.truncated = finish == "length";

    const auto lp = choice.find("logprobs");
    if (lp == choice.end() || lp->is_null() || !lp->contains("content") || !(*lp)["content"].is_array()) {
        g.logprobs_supported = false;
    } else {
        for (const auto& t : (*lp)["content"]) {
            TokenLogprobs rec;
            rec.chosen_token = t.value("token", "");
            if (t.contains("top_logprobs") && t["top_logprobs"].is_array()) {
                for (const auto& c : t["top_logprobs"]) {
                    if (!c.contains("logprob") || !c["logprob"].is_number()) continue;
                    rec.candidates.push_back({c.value("token", ""), c["logprob"].get<double>()});
                }
            }
            if (rec.candidates.empty() && t.contains("logprob") && t["logprob"].is_number())
                rec.candidates.push_back({rec.chosen_token, t["logprob"].get<double>()});
            std::stable_sort(rec.candidates.begin(), rec.candidates.end(),
                             [](const auto& a, const auto& b) { return a.logprob > b.logprob; });
            if (rec.candidates.size() > static_cast<std::size_t>(top_k)) rec.candidates.resize(top_k);
            g.token_records.push_back(std::move(rec));
        }
        if (g.token_records.empty()) g.logprobs_supported = false;
    }
    if (text::trim(g.text).empty() && !g.truncated) throw EmptyGeneration("endpoint returned an empty completion");
    return g;
}

GenerationResult OpenAIChatBackend::complete(const GenerationRequest& req, const InferenceConfig& cfg) {
    const auto ep = split_endpoint(cfg.endpoint);
    httplib::Client cli(ep.origin);
    cli.set_connection_timeout(std::chrono::seconds(std::min(cfg.timeout_seconds, 30)));
    cli.set_read_timeout(std::chrono::seconds(cfg.timeout_seconds));
    cli.set_write_timeout(std::chrono::seconds(cfg.timeout_seconds));
    if (!cfg.api_key.empty()) cli.set_bearer_token_auth(cfg.api_key);

    const auto body = request_body(req.prompt->text, cfg).dump();
    const auto start = std::chrono::steady_clock::now();
    auto res = cli.Post(ep.path + "/chat/completions", body, "application/json");
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    if (!res) throw TransportError("request to " + cfg.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransportError("endpoint answered HTTP " + std::to_string(res->status));
    if (res->status != 200) {
        throw BackendError("endpoint answered HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
    }
    auto g = parse_response(res->body, cfg.top_k_logprobs);
    g.latency_ms = elapsed;
    return g;
}

}  // namespace xmv
