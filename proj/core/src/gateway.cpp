#include "xmv/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>

#include "xmv/errors.hpp"
#include "xmv/hash.hpp"
#include "xmv/runlog.hpp"
#include "xmv/text.hpp"

namespace xmv {

using nlohmann::json;

void InferenceConfig::validate() const {
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be >= 0");
    if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
    if (top_k_logprobs < 1) throw ConfigError("top_k_logprobs must be >= 1");
    if (context_window < 1) throw ConfigError("context_window must be >= 1");
    if (timeout_seconds < 1) throw ConfigError("timeout_seconds must be >= 1");
    if (endpoint.empty()) throw ConfigError("endpoint must be a URL or \"mock\"");
}

std::string_view to_string(Role r) noexcept { return r == Role::Explainer ? "explainer" : "verifier"; }

json to_json(const TokenLogprobs& t) {
    json cands = json::array();
    for (const auto& c : t.candidates) cands.push_back({c.token, c.logprob});
    return {{"token", t.chosen_token}, {"top", cands}};
}

TokenLogprobs token_logprobs_from_json(const json& j) {
    TokenLogprobs t;
    t.chosen_token = j.at("token").get<std::string>();
    for (const auto& c : j.at("top")) {
        if (c.is_array()) {
            t.candidates.push_back({c.at(0).get<std::string>(), c.at(1).get<double>()});
        } else {
            t.candidates.push_back({c.at("token").get<std::string>(), c.at("logprob").get<double>()});
        }
    }
    std::stable_sort(t.candidates.begin(), t.candidates.end(),
                     [](const auto& a, const auto& b) { return a.logprob > b.logprob; });
    return t;
}

json to_json(const GenerationResult& g) {
    json recs = json::array();
    for (const auto& t : g.token_records) recs.push_back(to_json(t));
    return {{"text", g.text},
            {"token_records", recs},
            {"latency_ms", g.latency_ms},
            {"truncated", g.truncated},
            {"logprobs_supported", g.logprobs_supported}};
}

GenerationResult generation_from_json(const json& j) {
    GenerationResult g;
    g.text = j.at("text").get<std::string>();
    for (const auto& t : j.value("token_records", json::array())) g.token_records.push_back(token_logprobs_from_json(t));
    g.latency_ms = j.value("latency_ms", std::int64_t{0});
    g.truncated = j.value("truncated", false);
    g.logprobs_supported = j.value("logprobs_supported", true);
    return g;
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

MockStep step_from_json(const json& j) {
    MockStep s;
    if (j.is_string()) {
        s.text = j.get<std::string>();
        return s;
    }
    if (!j.is_object()) throw SchemaError("mock step must be a string or an object");
    s.text = j.value("text", "");
    s.fail = j.value("fail", "");
    s.truncated = j.value("truncated", false);
    if (!s.fail.empty() && s.fail != "transport" && s.fail != "backend")
        throw SchemaError("mock step 'fail' must be \"transport\" or \"backend\"");
    if (j.contains("token_records")) {
        std::vector<TokenLogprobs> recs;
        for (const auto& t : j.at("token_records")) recs.push_back(token_logprobs_from_json(t));
        s.token_records = std::move(recs);
    }
    return s;
}

std::vector<MockStep> steps_from_json(const json& j) {
    if (!j.is_array()) throw SchemaError("mock step list must be an array");
    std::vector<MockStep> out;
    for (const auto& s : j) out.push_back(step_from_json(s));
    return out;
}

}  // namespace

std::vector<TokenLogprobs> synthetic_logprobs(std::string_view text, int top_k) {
    std::vector<TokenLogprobs> out;
    const auto k = static_cast<std::size_t>(std::max(1, top_k));
    std::uint64_t state = fnv1a(text);
    for (auto tok : text::whitespace_tokens(text)) {
        TokenLogprobs rec;
        rec.chosen_token = std::string(tok);
        // Peakedness varies per token so the entropy sequence is not flat.
        const double sharp = 0.5 + 4.0 * (static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53);
        std::vector<double> logits(k);
        for (auto& l : logits) l = -sharp * (static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53);
        logits[0] = 0.0;
        std::sort(logits.begin(), logits.end(), std::greater<>());
        double z = 0.0;
        for (double l : logits) z += std::exp(l);
        for (std::size_t i = 0; i < k; ++i) {
            rec.candidates.push_back({i == 0 ? rec.chosen_token : "<alt" + std::to_string(i) + ">",
                                      logits[i] - std::log(z)});
        }
        out.push_back(std::move(rec));
    }
    return out;
}

MockBackend::MockBackend(std::vector<MockStep> steps) {
    if (steps.empty()) throw SchemaError("mock script has no steps");
    shared_.steps = std::move(steps);
}

MockBackend::MockBackend(std::vector<MockStep> explainer_steps, std::vector<MockStep> verifier_steps, bool cycle)
    : per_role_(true), cycle_(cycle) {
    if (explainer_steps.empty() && verifier_steps.empty()) throw SchemaError("mock script has no steps");
    explainer_.steps = std::move(explainer_steps);
    verifier_.steps = std::move(verifier_steps);
}

std::shared_ptr<MockBackend> MockBackend::from_json(const json& script) {
    std::shared_ptr<MockBackend> mb;
    if (script.is_array()) {
        mb = std::make_shared<MockBackend>(steps_from_json(script));
        mb->cycle_ = false;
    } else if (script.is_object()) {
        if (script.contains("steps")) {
            mb = std::make_shared<MockBackend>(steps_from_json(script.at("steps")));
            mb->cycle_ = script.value("cycle", false);
        } else {
            mb = std::make_shared<MockBackend>(steps_from_json(script.value("explainer", json::array())),
                                               steps_from_json(script.value("verifier", json::array())),
                                               script.value("cycle", false));
        }
        mb->synthetic_ = script.value("synthetic_logprobs", false);
    } else {
        throw SchemaError("mock script must be a JSON array or object");
    }
    return mb;
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::filesystem::path& path) {
    const auto body = read_file(path.string());
    try {
        return from_json(json::parse(body));
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

MockStep MockBackend::next(Role role) {
    std::lock_guard lock(mu_);
    Queue& q = !per_role_ ? shared_ : (role == Role::Explainer ? explainer_ : verifier_);
    if (q.cursor >= q.steps.size()) {
        if (!cycle_ || q.steps.empty())
            throw BackendError("mock script exhausted (" + std::string(to_string(role)) + " call " +
                               std::to_string(q.cursor + 1) + ")");
        q.cursor = 0;
    }
    ++consumed_;
    return q.steps[q.cursor++];
}

std::size_t MockBackend::consumed() const {
    std::lock_guard lock(mu_);
    return consumed_;
}

GenerationResult MockBackend::complete(const GenerationRequest& req, const InferenceConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    auto step = next(req.role);
    if (step.fail == "transport") throw TransportError("mock transport failure");
    if (step.fail == "backend") throw BackendError("mock backend error payload");
    if (text::trim(step.text).empty() && !step.truncated) throw EmptyGeneration("mock step has empty text");
    GenerationResult g;
    g.text = std::move(step.text);
    g.truncated = step.truncated;
    if (step.token_records) {
        g.token_records = std::move(*step.token_records);
    } else if (synthetic_) {
        g.token_records = synthetic_logprobs(g.text, cfg.top_k_logprobs);
    } else {
        g.logprobs_supported = false;
    }
    g.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return g;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions opts, RunLog* log)
    : backend_(std::move(backend)), opts_(std::move(opts)), log_(log) {
    if (!backend_) throw ConfigError("gateway needs a backend");
    if (opts_.max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
    if (opts_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (!opts_.sleeper) opts_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void Gateway::acquire() {
    std::unique_lock lock(mu_);
    const auto ticket = next_ticket_++;
    cv_.wait(lock, [&] { return ticket == admitted_ && in_flight_ < opts_.max_parallel; });
    ++admitted_;
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
    cv_.notify_all();
}

void Gateway::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_all();
}

int Gateway::peak_in_flight() const {
    std::lock_guard lock(mu_);
    return peak_;
}

GenerationResult Gateway::generate(const GenerationRequest& req, const InferenceConfig& cfg) {
    if (!req.prompt) throw ConfigError("generation request without a prompt");
    cfg.validate();
    auto backoff = opts_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        std::uint64_t seq;
        {
            std::lock_guard lock(mu_);
            seq = seq_++;
        }
        json rec = {{"type", "generation"},
                    {"seq", seq},
                    {"case_id", req.case_id},
                    {"role", to_string(req.role)},
                    {"backend", backend_->name()},
                    {"model", cfg.model_name},
                    {"template", req.prompt->template_id.name()},
                    {"prompt_sha256", req.prompt->sha256()},
                    {"transport_attempt", attempt}};
        try {
            GenerationResult result;
            {
                acquire();
                struct Slot {
                    Gateway* g;
                    ~Slot() { g->release(); }
                } slot{this};
                result = backend_->complete(req, cfg);
            }
            if (log_) {
                rec["prompt"] = req.prompt->text;
                rec["result"] = to_json(result);
                log_->append(rec);
            }
            return result;
        } catch (const TransportError& e) {
            if (log_) {
                rec["error"] = {{"class", "transport"}, {"message", e.what()}};
                log_->append(rec);
            }
            if (attempt >= opts_.max_attempts) {
                throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) + " attempts)");
            }
            opts_.sleeper(backoff);
            backoff *= 2;
        } catch (const Error& e) {
            if (log_) {
                rec["error"] = {{"class", "backend"}, {"message", e.what()}};
                log_->append(rec);
            }
            throw;
        }
    }
}

}  // namespace xmv
