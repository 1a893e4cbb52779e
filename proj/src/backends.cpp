#include "dragon/backends.hpp"

#include "dragon/error.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <thread>

namespace dragon::backends {

// ---------------------------------------------------------------------------
// Transport plumbing
// ---------------------------------------------------------------------------

namespace {

class InFlightGate {
public:
    static InFlightGate& instance() {
        static InFlightGate gate;
        return gate;
    }

    void set_limit(std::size_t n) {
        std::lock_guard lock(mu_);
        limit_ = std::max<std::size_t>(1, n);
        cv_.notify_all();
    }

    std::size_t limit() const {
        std::lock_guard lock(mu_);
        return limit_;
    }

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return active_ < limit_; });
        ++active_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            --active_;
        }
        cv_.notify_one();
    }

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::size_t limit_ = 8;
    std::size_t active_ = 0;
};

struct GateGuard {
    GateGuard() { InFlightGate::instance().acquire(); }
    ~GateGuard() { InFlightGate::instance().release(); }
    GateGuard(const GateGuard&) = delete;
    GateGuard& operator=(const GateGuard&) = delete;
};

struct HttpResult {
    int status = 0;
    std::string body;
};

// One POST; throws std::runtime_error on transient failure, PermanentFailure
// on a client error status.
HttpResult post_json(const std::string& endpoint, const std::string& api_key, int timeout_ms, const json& body) {
    const auto url = parse_url(endpoint);
    GateGuard gate;
    httplib::Client client(url.scheme_host_port);
    const auto timeout = std::chrono::milliseconds(timeout_ms);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
        throw std::runtime_error("transport error: " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500) {
        throw std::runtime_error("server returned status " + std::to_string(res->status));
    }
    if (res->status >= 400) {
        throw PermanentFailure{"server returned status " + std::to_string(res->status) + ": " + res->body.substr(0, 200)};
    }
    return {res->status, res->body};
}

} // namespace

std::string with_retries(const RetryPolicy& policy, const std::function<std::string()>& attempt,
                         const std::function<void(std::chrono::milliseconds)>& sleep) {
    const int attempts = std::max(1, policy.max_attempts);
    std::string last_cause = "no attempt made";
    for (int i = 0; i < attempts; ++i) {
        try {
            return attempt();
        } catch (const Error&) {
            throw;
        } catch (const PermanentFailure& p) {
            throw Error(ErrorCode::BackendError, p.message);
        } catch (const std::exception& e) {
            last_cause = e.what();
        }
        if (i + 1 < attempts) {
            const auto delay = policy.base_delay * (1LL << i);
            if (sleep) sleep(delay);
            else std::this_thread::sleep_for(delay);
        }
    }
    throw Error(ErrorCode::BackendError, "giving up after " + std::to_string(attempts) + " attempts: " + last_cause);
}

void set_max_in_flight(std::size_t n) { InFlightGate::instance().set_limit(n); }
std::size_t max_in_flight() { return InFlightGate::instance().limit(); }

ParsedUrl parse_url(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) {
        throw Error(ErrorCode::InvalidConfig, "endpoint must be an absolute URL: " + std::string(url));
    }
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string_view::npos) {
        out.scheme_host_port = std::string(url);
        out.path = "/";
    } else {
        out.scheme_host_port = std::string(url.substr(0, path_start));
        out.path = std::string(url.substr(path_start));
    }
    return out;
}

void apply_env(ChatConfig& chat, EmbedConfig& embed) {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (v && *v) return std::string(v);
        return std::nullopt;
    };
    if (auto v = env("DRAGON_LLM_ENDPOINT")) chat.endpoint = *v;
    if (auto v = env("DRAGON_LLM_MODEL")) chat.model_name = *v;
    if (auto v = env("DRAGON_EMBED_ENDPOINT")) embed.endpoint = *v;
    if (auto v = env("DRAGON_EMBED_MODEL")) embed.model_name = *v;
    if (auto v = env("DRAGON_API_KEY")) {
        chat.api_key = *v;
        embed.api_key = *v;
    }
}

// ---------------------------------------------------------------------------
// Chat backends
// ---------------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(ChatConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
        throw Error(ErrorCode::InvalidConfig, "http chat backend needs an endpoint (DRAGON_LLM_ENDPOINT)");
    }
    parse_url(config_.endpoint);
}

json HttpChatBackend::request_body(const ChatRequest& request) const {
    json messages = json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    return {{"model", config_.model_name},
            {"messages", messages},
            {"temperature", config_.temperature},
            {"seed", request.seed}};
}

std::string HttpChatBackend::chat(const ChatRequest& request) {
    const json body = request_body(request);
    RetryPolicy policy{config_.max_retries, std::chrono::milliseconds(config_.backoff_base_ms)};
    return with_retries(policy, [&] {
        auto res = post_json(config_.endpoint, config_.api_key, config_.timeout_ms, body);
        try {
            auto j = json::parse(res.body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw PermanentFailure{std::string("malformed chat response: ") + e.what()};
        }
    });
}

ScriptedChatBackend::ScriptedChatBackend(std::vector<Entry> script, std::string model)
    : script_(std::move(script)), used_(script_.size(), false), model_(std::move(model)) {}

std::string ScriptedChatBackend::chat(const ChatRequest& request) {
    std::lock_guard lock(mu_);
    received_.push_back(request.tag);
    for (std::size_t i = 0; i < script_.size(); ++i) {
        if (!used_[i] && (script_[i].tag == request.tag || script_[i].tag == "*")) {
            used_[i] = true;
            return script_[i].reply;
        }
    }
    throw Error(ErrorCode::ScriptExhausted, "no scripted reply left for tag '" + request.tag + "'");
}

std::size_t ScriptedChatBackend::remaining() const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count(used_.begin(), used_.end(), false));
}

std::vector<std::string> ScriptedChatBackend::received_tags() const {
    std::lock_guard lock(mu_);
    return received_;
}

std::vector<ScriptedChatBackend::Entry> ScriptedChatBackend::read_script(const std::filesystem::path& path) {
    std::vector<Entry> script;
    for (const auto& row : read_jsonl(path)) {
        try {
            script.push_back({row.at("tag").get<std::string>(), row.at("reply").get<std::string>()});
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ParseError, path.string() + ": script rows need tag and reply: " + e.what());
        }
    }
    return script;
}

ScriptedChatBackend ScriptedChatBackend::from_jsonl(const std::filesystem::path& path) {
    return ScriptedChatBackend(read_script(path));
}

std::string hash_pseudo_text(std::string_view system, std::string_view user, std::uint64_t seed) {
    static constexpr std::string_view vocab[] = {
        "archive", "bridge",  "canyon", "delta",  "ember",  "fable",  "garnet", "harbor",
        "island",  "juniper", "kettle", "lantern", "meadow", "nectar", "orchid", "pillar",
        "quarry",  "ribbon",  "summit", "thistle", "umber",  "valley", "willow", "zephyr",
    };
    std::string key(system);
    key += '\x1f';
    key += user;
    Rng rng(splitmix64(fnv1a64(key) ^ seed));
    std::string out;
    const std::size_t words = 8 + rng.below(8);
    for (std::size_t i = 0; i < words; ++i) {
        std::string w(vocab[rng.below(std::size(vocab))]);
        if (i == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
        if (i) out += ' ';
        out += w;
    }
    out += '.';
    return out;
}

std::string HashChatBackend::chat(const ChatRequest& request) {
    std::string reply = simulate_reply(request);
    if (!reply.empty()) return reply;
    return hash_pseudo_text(request.system, request.user, request.seed);
}

std::unique_ptr<ChatBackend> make_chat_backend(const ChatConfig& config) {
    switch (config.kind) {
    case ChatKind::http: return std::make_unique<HttpChatBackend>(config);
    case ChatKind::mock_hash: return std::make_unique<HashChatBackend>(config.model_name);
    case ChatKind::mock_scripted:
        throw Error(ErrorCode::InvalidConfig, "scripted backends are built from a script file");
    }
    throw Error(ErrorCode::InvalidConfig, "unknown chat backend kind");
}

// ---------------------------------------------------------------------------
// Embedding backends
// ---------------------------------------------------------------------------

void normalize(Vector& v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    if (!(sq > 0.0) || !std::isfinite(sq)) {
        throw Error(ErrorCode::BackendError, "cannot normalize a zero or non-finite vector");
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
}

HttpEmbedBackend::HttpEmbedBackend(EmbedConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) {
        throw Error(ErrorCode::InvalidConfig, "http embed backend needs an endpoint (DRAGON_EMBED_ENDPOINT)");
    }
    if (config_.dimension == 0) {
        throw Error(ErrorCode::InvalidConfig, "embedding dimension must be positive");
    }
    parse_url(config_.endpoint);
}

std::vector<Vector> HttpEmbedBackend::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw Error(ErrorCode::Precondition, "embed needs at least one text");
    }
    const json body = {{"model", config_.model_name}, {"input", texts}};
    RetryPolicy policy{config_.max_retries, std::chrono::milliseconds(config_.backoff_base_ms)};
    const std::string raw = with_retries(policy, [&] {
        return post_json(config_.endpoint, config_.api_key, config_.timeout_ms, body).body;
    });

    std::vector<Vector> out(texts.size());
    try {
        const auto j = json::parse(raw);
        const auto& data = j.at("data");
        if (data.size() != texts.size()) {
            throw Error(ErrorCode::BackendError, "embedding response has " + std::to_string(data.size()) +
                                                     " rows for " + std::to_string(texts.size()) + " texts");
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            const std::size_t slot = data[i].contains("index") ? data[i].at("index").get<std::size_t>() : i;
            if (slot >= out.size()) throw Error(ErrorCode::BackendError, "embedding index out of range");
            auto v = data[i].at("embedding").get<Vector>();
            if (v.size() != config_.dimension) {
                throw Error(ErrorCode::DimensionMismatch, "server returned " + std::to_string(v.size()) +
                                                              "-dim vectors, configured " +
                                                              std::to_string(config_.dimension));
            }
            normalize(v);
            out[slot] = std::move(v);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendError, std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

HashEmbedBackend::HashEmbedBackend(std::size_t dimension, std::string model)
    : dimension_(dimension), model_(std::move(model)) {
    if (dimension_ == 0) {
        throw Error(ErrorCode::InvalidConfig, "embedding dimension must be positive");
    }
}

namespace {

void add_hashed_direction(std::vector<double>& acc, std::uint64_t seed, double weight) {
    std::uint64_t state = seed;
    for (double& a : acc) {
        state = splitmix64(state);
        const double u = static_cast<double>(state >> 11) * 0x1.0p-53;  // [0, 1)
        a += weight * (2.0 * u - 1.0);
    }
}

} // namespace

std::vector<Vector> HashEmbedBackend::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw Error(ErrorCode::Precondition, "embed needs at least one text");
    }
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> acc(dimension_, 0.0);
        auto words = content_words(text);
        if (words.empty()) words = word_tokens(text);
        if (words.empty()) {
            add_hashed_direction(acc, fnv1a64(text), 1.0);
        } else {
            for (const auto& w : words) add_hashed_direction(acc, fnv1a64(w), 1.0);
        }
        double sq = 0.0;
        for (double a : acc) sq += a * a;
        if (!(sq > 0.0)) {
            acc.assign(dimension_, 0.0);
            acc[0] = 1.0;
            sq = 1.0;
        }
        const double inv = 1.0 / std::sqrt(sq);
        Vector v(dimension_);
        for (std::size_t d = 0; d < dimension_; ++d) v[d] = static_cast<float>(acc[d] * inv);
        out.push_back(std::move(v));
    }
    return out;
}

std::unique_ptr<EmbedBackend> make_embed_backend(const EmbedConfig& config) {
    switch (config.kind) {
    case EmbedKind::http: return std::make_unique<HttpEmbedBackend>(config);
    case EmbedKind::mock_hash: return std::make_unique<HashEmbedBackend>(config.dimension, config.model_name);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown embed backend kind");
}

} // namespace dragon::backends
