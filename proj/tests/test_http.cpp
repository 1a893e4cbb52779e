#include "dragon/backends.hpp"

#include "fixtures.hpp"

#include <catch_amalgamated.hpp>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <thread>

using namespace dragon;
using namespace dragon::backends;
using fixtures::error_code;

namespace {

// Local server on an ephemeral port, stopped on scope exit.
class TestServer {
public:
    httplib::Server svr;

    void start() {
        port_ = svr.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { svr.listen_after_bind(); });
        svr.wait_until_ready();
    }
    ~TestServer() {
        svr.stop();
        if (thread_.joinable()) thread_.join();
    }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    int port_ = 0;
    std::thread thread_;
};

ChatConfig chat_config(const std::string& endpoint) {
    ChatConfig cfg;
    cfg.kind = ChatKind::http;
    cfg.endpoint = endpoint;
    cfg.model_name = "served";
    cfg.backoff_base_ms = 1;
    cfg.timeout_ms = 2000;
    return cfg;
}

EmbedConfig embed_config(const std::string& endpoint, std::size_t dim) {
    EmbedConfig cfg;
    cfg.kind = EmbedKind::http;
    cfg.endpoint = endpoint;
    cfg.dimension = dim;
    cfg.backoff_base_ms = 1;
    cfg.timeout_ms = 2000;
    return cfg;
}

json completion(const std::string& content) {
    return {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
}

} // namespace

TEST_CASE("chat retries transient 503s and returns the first choice") {
    TestServer server;
    std::atomic<int> hits{0};
    json last_body;
    std::string auth;
    server.svr.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (++hits < 3) {
            res.status = 503;
            return;
        }
        last_body = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(completion("hello").dump(), "application/json");
    });
    server.start();
    auto cfg = chat_config(server.url("/v1/chat/completions"));
    cfg.api_key = "secret";
    HttpChatBackend be(cfg);
    CHECK(be.chat(ChatRequest{"t", "S", "U", 4, json::object()}) == "hello");
    CHECK(hits == 3);
    CHECK(last_body["model"] == "served");
    CHECK(last_body["seed"] == 4);
    CHECK(last_body["messages"].size() == 2);
    CHECK(auth == "Bearer secret");
}

TEST_CASE("chat gives up after max_retries transient failures") {
    TestServer server;
    std::atomic<int> hits{0};
    server.svr.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    server.start();
    HttpChatBackend be(chat_config(server.url("/c")));
    CHECK(error_code([&] { be.chat("s", "u", 0); }) == ErrorCode::BackendError);
    CHECK(hits == 3);
}

TEST_CASE("client errors are not retried") {
    TestServer server;
    std::atomic<int> hits{0};
    server.svr.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 400;
        res.set_content("bad request", "text/plain");
    });
    server.start();
    HttpChatBackend be(chat_config(server.url("/c")));
    CHECK(error_code([&] { be.chat("s", "u", 0); }) == ErrorCode::BackendError);
    CHECK(hits == 1);
}

TEST_CASE("malformed chat payload is a backend error") {
    TestServer server;
    server.svr.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"nope\":1}", "application/json");
    });
    server.start();
    HttpChatBackend be(chat_config(server.url("/c")));
    CHECK(error_code([&] { be.chat("s", "u", 0); }) == ErrorCode::BackendError);
}

TEST_CASE("refused connection becomes a backend error") {
    int port = 0;
    {
        // Reserve a port and release it so nothing is listening there.
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    HttpChatBackend be(chat_config("http://127.0.0.1:" + std::to_string(port) + "/c"));
    CHECK(error_code([&] { be.chat("s", "u", 0); }) == ErrorCode::BackendError);
}

TEST_CASE("embedding wire format round trip") {
    TestServer server;
    json seen;
    server.svr.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        json data = json::array();
        // Rows returned out of order; the index field places them.
        data.push_back({{"index", 1}, {"embedding", {0.0, 2.0, 0.0}}});
        data.push_back({{"index", 0}, {"embedding", {3.0, 0.0, 4.0}}});
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    server.start();
    auto cfg = embed_config(server.url("/v1/embeddings"), 3);
    cfg.model_name = "enc";
    HttpEmbedBackend be(cfg);
    auto vs = be.embed({"a", "b"});
    CHECK(seen == json{{"model", "enc"}, {"input", {"a", "b"}}});
    REQUIRE(vs.size() == 2);
    CHECK(vs[0][0] == Catch::Approx(0.6));
    CHECK(vs[0][2] == Catch::Approx(0.8));
    CHECK(vs[1][1] == Catch::Approx(1.0));
}

TEST_CASE("embedding width mismatch is reported") {
    TestServer server;
    server.svr.Post("/e", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"data", {{{"embedding", std::vector<float>(384, 0.5f)}}}}}.dump(), "application/json");
    });
    server.start();
    HttpEmbedBackend be(embed_config(server.url("/e"), 768));
    CHECK(error_code([&] { be.embed({"x"}); }) == ErrorCode::DimensionMismatch);
}
