#pragma once

// Text generation behind one interface: a scripted mock for hermetic runs and
// an OpenAI-compatible chat-completions client. The Gateway adds the retry
// policy, bounded FIFO parallelism and run-log persistence on top of a
// Backend.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xmv/prompts.hpp"

namespace xmv {

class RunLog;

struct InferenceConfig {
    double temperature = 0.6;
    int max_new_tokens = 2048;
    int context_window = 128000;
    int top_k_logprobs = 10;
    bool think_mode = true;
    std::string model_name;
    std::string endpoint = "mock";
    std::string api_key;
    int timeout_seconds = 600;

    /// Throws ConfigError.
    void validate() const;
};

struct LogprobCandidate {
    std::string token;
    double logprob = 0.0;
};

struct TokenLogprobs {
    std::string chosen_token;
    std::vector<LogprobCandidate> candidates;  // descending by logprob
};

struct GenerationResult {
    std::string text;
    std::vector<TokenLogprobs> token_records;
    std::int64_t latency_ms = 0;
    bool truncated = false;
    bool logprobs_supported = true;
};

nlohmann::json to_json(const TokenLogprobs& t);
TokenLogprobs token_logprobs_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenerationResult& g);
GenerationResult generation_from_json(const nlohmann::json& j);

enum class Role { Explainer, Verifier };
std::string_view to_string(Role r) noexcept;

struct GenerationRequest {
    Role role = Role::Explainer;
    std::string case_id;
    const RenderedPrompt* prompt = nullptr;
};

class Backend {
public:
    virtual ~Backend() = default;
    /// Throws TransportError (retry-eligible), BackendError or EmptyGeneration.
    virtual GenerationResult complete(const GenerationRequest& req, const InferenceConfig& cfg) = 0;
    virtual std::string name() const = 0;
};

struct MockStep {
    std::string text;
    std::optional<std::vector<TokenLogprobs>> token_records;
    /// "transport" or "backend": the step raises that failure instead of
    /// answering. Used to exercise the retry and failure paths.
    std::string fail;
    bool truncated = false;
};

/// Replays scripted responses. Steps come either from one shared queue or
/// from one queue per role; the cursor is mutex-protected, so concurrent
/// callers each receive a distinct step. Exhaustion raises BackendError
/// unless the script is cyclic.
class MockBackend : public Backend {
public:
    explicit MockBackend(std::vector<MockStep> steps);
    MockBackend(std::vector<MockStep> explainer_steps, std::vector<MockStep> verifier_steps, bool cycle = false);

    /// Script document: either a JSON array of steps (shared queue) or an
    /// object {"explainer": [...], "verifier": [...], "cycle": bool,
    /// "synthetic_logprobs": bool}. A step is a string or an object
    /// {"text", "token_records", "fail", "truncated"}.
    static std::shared_ptr<MockBackend> from_json(const nlohmann::json& script);
    static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path);

    /// Steps without scripted records get deterministic pseudo log-probs
    /// derived from the response text, so EPR analyses have input.
    void set_synthetic_logprobs(bool on) { synthetic_ = on; }

    GenerationResult complete(const GenerationRequest& req, const InferenceConfig& cfg) override;
    std::string name() const override { return "mock"; }

    std::size_t consumed() const;

private:
    struct Queue {
        std::vector<MockStep> steps;
        std::size_t cursor = 0;
    };
    MockStep next(Role role);

    bool per_role_ = false;
    bool cycle_ = false;
    bool synthetic_ = false;
    Queue shared_, explainer_, verifier_;
    mutable std::mutex mu_;
    std::size_t consumed_ = 0;
};

/// Deterministic top-k records for `text`, one per whitespace token.
std::vector<TokenLogprobs> synthetic_logprobs(std::string_view text, int top_k);

/// OpenAI-compatible POST {endpoint}/chat/completions.
class OpenAIChatBackend : public Backend {
public:
    GenerationResult complete(const GenerationRequest& req, const InferenceConfig& cfg) override;
    std::string name() const override { return "openai-chat"; }

    /// Request body for a prompt under cfg (exposed for tests).
    static nlohmann::json request_body(const std::string& prompt, const InferenceConfig& cfg);
    /// Parses a chat-completions response body. Throws BackendError or EmptyGeneration.
    static GenerationResult parse_response(const std::string& body, int top_k);
};

struct GatewayOptions {
    int max_parallel = 2;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::function<void(std::chrono::milliseconds)> sleeper;  // defaults to sleep_for
};

/// Shared by all cases of a run. At most max_parallel requests are in flight;
/// waiting callers are admitted in arrival order.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, GatewayOptions opts = {}, RunLog* log = nullptr);

    GenerationResult generate(const GenerationRequest& req, const InferenceConfig& cfg);

    Backend& backend() { return *backend_; }
    int peak_in_flight() const;

private:
    void acquire();
    void release();

    std::shared_ptr<Backend> backend_;
    GatewayOptions opts_;
    RunLog* log_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::uint64_t next_ticket_ = 0;
    std::uint64_t admitted_ = 0;
    int in_flight_ = 0;
    int peak_ = 0;
    std::uint64_t seq_ = 0;
};

}  // namespace xmv
