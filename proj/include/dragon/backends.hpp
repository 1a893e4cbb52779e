#pragma once

#include "dragon/util.hpp"

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace dragon::backends {

// ---------------------------------------------------------------------------
// Chat
// ---------------------------------------------------------------------------

/// One chat-completion call. `tag` names the prompt template and is what the
/// scripted mock keys on; `context` carries the structured inputs the prompt
/// was rendered from (never sent over the wire, used by the offline simulator).
struct ChatRequest {
    std::string tag;
    std::string system;
    std::string user;
    std::uint64_t seed = 0;
    json context = json::object();
};

enum class ChatKind { http, mock_scripted, mock_hash };

struct ChatConfig {
    ChatKind kind = ChatKind::mock_hash;
    std::string endpoint;  // full URL of the chat-completions route (http only)
    std::string model_name = "mock-hash";
    std::string api_key;
    double temperature = 0.0;
    int max_retries = 3;
    int timeout_ms = 60000;
    int backoff_base_ms = 100;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    virtual std::string chat(const ChatRequest& request) = 0;
    virtual std::string model_name() const = 0;

    std::string chat(std::string_view system, std::string_view user, std::uint64_t seed) {
        return chat(ChatRequest{"", std::string(system), std::string(user), seed, json::object()});
    }
};

/// Sends an OpenAI-style chat-completion request and returns the first
/// choice's message content.
class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(ChatConfig config);

    using ChatBackend::chat;
    std::string chat(const ChatRequest& request) override;
    std::string model_name() const override { return config_.model_name; }

    /// Request body as sent on the wire; exposed for tests.
    json request_body(const ChatRequest& request) const;

private:
    ChatConfig config_;
};

/// Returns pre-recorded replies in order, matched on the request tag. A
/// script entry with tag "*" matches any request.
class ScriptedChatBackend final : public ChatBackend {
public:
    struct Entry {
        std::string tag;
        std::string reply;
    };

    explicit ScriptedChatBackend(std::vector<Entry> script, std::string model = "mock-scripted");
    ScriptedChatBackend(std::initializer_list<Entry> script, std::string model = "mock-scripted")
        : ScriptedChatBackend(std::vector<Entry>(script), std::move(model)) {}

    using ChatBackend::chat;
    std::string chat(const ChatRequest& request) override;
    std::string model_name() const override { return model_; }

    std::size_t remaining() const;
    /// Tags of every request received, in order.
    std::vector<std::string> received_tags() const;

    /// Rows of {tag, reply}.
    static std::vector<Entry> read_script(const std::filesystem::path& path);
    static ScriptedChatBackend from_jsonl(const std::filesystem::path& path);

private:
    mutable std::mutex mu_;
    std::vector<Entry> script_;
    std::vector<bool> used_;
    std::vector<std::string> received_;
    std::string model_;
};

/// Deterministic offline backend. Known prompt tags get a well-formed reply
/// built from the request context; anything else gets pseudo-text derived
/// from hash(system | user | seed). Never touches the network.
class HashChatBackend final : public ChatBackend {
public:
    explicit HashChatBackend(std::string model = "mock-hash") : model_(std::move(model)) {}

    using ChatBackend::chat;
    std::string chat(const ChatRequest& request) override;
    std::string model_name() const override { return model_; }

private:
    std::string model_;
};

/// Offline stand-in for an instruction-following model; pure function of the
/// request. Returns nullopt-equivalent empty string for unknown tags.
std::string simulate_reply(const ChatRequest& request);
std::string hash_pseudo_text(std::string_view system, std::string_view user, std::uint64_t seed);

std::unique_ptr<ChatBackend> make_chat_backend(const ChatConfig& config);

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

using Vector = std::vector<float>;

enum class EmbedKind { http, mock_hash };

struct EmbedConfig {
    EmbedKind kind = EmbedKind::mock_hash;
    std::string endpoint;
    std::string model_name = "mock-hash-embed";
    std::string api_key;
    std::size_t dimension = 256;
    int max_retries = 3;
    int timeout_ms = 60000;
    int backoff_base_ms = 100;
};

class EmbedBackend {
public:
    virtual ~EmbedBackend() = default;

    /// One unit-norm vector per input text, order preserving.
    virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::string model_name() const = 0;
};

class HttpEmbedBackend final : public EmbedBackend {
public:
    explicit HttpEmbedBackend(EmbedConfig config);

    std::vector<Vector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return config_.dimension; }
    std::string model_name() const override { return config_.model_name; }

private:
    EmbedConfig config_;
};

/// Hashed bag-of-words projection: each word contributes a pseudo-random
/// vector seeded by its hash, the sum is L2-normalized. Equal texts give equal
/// vectors and lexical overlap gives positive similarity.
class HashEmbedBackend final : public EmbedBackend {
public:
    explicit HashEmbedBackend(std::size_t dimension = 256, std::string model = "mock-hash-embed");

    std::vector<Vector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return dimension_; }
    std::string model_name() const override { return model_; }

private:
    std::size_t dimension_;
    std::string model_;
};

std::unique_ptr<EmbedBackend> make_embed_backend(const EmbedConfig& config);

/// Scales `v` to unit L2 norm. Throws BackendError on a zero vector.
void normalize(Vector& v);

// ---------------------------------------------------------------------------
// Transport plumbing
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_delay{100};
};

/// Thrown by a transport attempt to signal that retrying is pointless
/// (e.g. a 4xx status); with_retries converts it into a BackendError directly.
struct PermanentFailure {
    std::string message;
};

/// Calls `attempt` up to policy.max_attempts times. Between failed attempts it
/// sleeps base_delay * 2^attempt. The final failure becomes a BackendError
/// carrying the last cause. `sleep` is injectable for tests.
std::string with_retries(const RetryPolicy& policy, const std::function<std::string()>& attempt,
                         const std::function<void(std::chrono::milliseconds)>& sleep = {});

/// Process-wide cap on concurrent HTTP requests (default 8).
void set_max_in_flight(std::size_t n);
std::size_t max_in_flight();

struct ParsedUrl {
    std::string scheme_host_port;  // "http://host:port"
    std::string path;              // "/v1/chat/completions"
};
ParsedUrl parse_url(std::string_view url);

/// Overrides endpoint/model/api-key fields from DRAGON_* environment variables.
void apply_env(ChatConfig& chat, EmbedConfig& embed);

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

struct PromptTemplate {
    std::string id;
    int version = 1;
    std::string system;
    std::string user;
    std::string hash;  // sha256 of the template file

    /// Substitutes {{name}} placeholders. Throws InvalidConfig on a missing value.
    std::string render_user(const std::map<std::string, std::string>& values) const;
    std::string render_system(const std::map<std::string, std::string>& values) const;
};

const PromptTemplate& prompt_template(std::string_view id);
std::vector<std::string> template_ids();
/// id -> hash for every compiled-in template.
std::map<std::string, std::string> template_hashes();

/// Convenience: render template `id` and build a tagged request.
ChatRequest make_request(std::string_view id, const std::map<std::string, std::string>& values,
                         std::uint64_t seed, json context = json::object());

} // namespace dragon::backends
