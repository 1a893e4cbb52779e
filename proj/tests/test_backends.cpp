#include "dragon/backends.hpp"

#include "fixtures.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>

using namespace dragon;
using namespace dragon::backends;
using fixtures::error_code;

namespace {

ChatRequest tagged(const std::string& tag, const std::string& user = "u") {
    return ChatRequest{tag, "sys", user, 0, json::object()};
}

double norm(const Vector& v) {
    double s = 0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

} // namespace

TEST_CASE("scripted backend replies by tag and then runs dry") {
    ScriptedChatBackend be({{"extract", "X"}, {"other", "Y"}});
    CHECK(be.chat(tagged("extract")) == "X");
    CHECK(error_code([&] { be.chat(tagged("extract")); }) == ErrorCode::ScriptExhausted);
    CHECK(be.remaining() == 1);
    CHECK(be.received_tags() == std::vector<std::string>{"extract", "extract"});
}

TEST_CASE("scripted wildcard matches any tag in order") {
    ScriptedChatBackend be({{"*", "1"}, {"b", "2"}, {"*", "3"}});
    CHECK(be.chat(tagged("b")) == "1");
    CHECK(be.chat(tagged("b")) == "2");
    CHECK(be.chat(tagged("z")) == "3");
}

TEST_CASE("script files load tag and reply rows") {
    fixtures::TempDir tmp;
    write_file(tmp.path() / "s.jsonl", "{\"tag\":\"a\",\"reply\":\"r1\"}\n{\"tag\":\"*\",\"reply\":\"r2\"}\n");
    auto be = ScriptedChatBackend::from_jsonl(tmp.path() / "s.jsonl");
    CHECK(be.chat(tagged("a")) == "r1");
    CHECK(be.chat(tagged("q")) == "r2");
    write_file(tmp.path() / "bad.jsonl", "{\"tag\":\"a\"}\n");
    CHECK(error_code([&] { ScriptedChatBackend::read_script(tmp.path() / "bad.jsonl"); }) == ErrorCode::ParseError);
}

TEST_CASE("hash chat backend is deterministic") {
    HashChatBackend be;
    CHECK(be.chat("s", "u", 1) == be.chat("s", "u", 1));
    CHECK(be.chat("s", "u", 1) != be.chat("s", "u", 2));
    CHECK(hash_pseudo_text("a", "b", 3) == hash_pseudo_text("a", "b", 3));
    CHECK(be.model_name() == "mock-hash");
}

TEST_CASE("hash embeddings are unit norm and repeatable") {
    HashEmbedBackend be(64);
    auto vs = be.embed({"a", "a", "harbour bridge", "bridge harbour", "unrelated words entirely"});
    REQUIRE(vs.size() == 5);
    CHECK(vs[0] == vs[1]);
    for (const auto& v : vs) {
        CHECK(v.size() == 64);
        CHECK(std::abs(norm(v) - 1.0) < 1e-6);
    }
    HashEmbedBackend again(64);
    CHECK(again.embed({"harbour bridge"})[0] == vs[2]);
}

TEST_CASE("hash embeddings reflect lexical overlap") {
    HashEmbedBackend be(256);
    auto vs = be.embed({"the harbour of port amar", "port amar harbour repairs", "violin lessons on tuesday"});
    auto dot = [](const Vector& a, const Vector& b) {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
        return s;
    };
    CHECK(dot(vs[0], vs[1]) > dot(vs[0], vs[2]));
}

TEST_CASE("normalize scales to unit length and rejects zero") {
    Vector v{3, 4};
    normalize(v);
    CHECK(v[0] == Catch::Approx(0.6));
    CHECK(v[1] == Catch::Approx(0.8));
    Vector z{0, 0};
    CHECK(error_code([&] { normalize(z); }) == ErrorCode::BackendError);
}

TEST_CASE("retry policy counts attempts and backs off exponentially") {
    int calls = 0;
    std::vector<long long> delays;
    auto sleeper = [&](std::chrono::milliseconds d) { delays.push_back(d.count()); };
    auto always_fail = [&]() -> std::string {
        ++calls;
        throw std::runtime_error("boom " + std::to_string(calls));
    };
    try {
        with_retries({3, std::chrono::milliseconds(100)}, always_fail, sleeper);
        FAIL("expected BackendError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BackendError);
        CHECK(std::string(e.what()).find("boom 3") != std::string::npos);
    }
    CHECK(calls == 3);
    CHECK(delays == std::vector<long long>{100, 200});

    calls = 0;
    auto second_ok = [&]() -> std::string {
        if (++calls < 2) throw std::runtime_error("once");
        return "ok";
    };
    CHECK(with_retries({3, std::chrono::milliseconds(1)}, second_ok, sleeper) == "ok");

    calls = 0;
    auto permanent = [&]() -> std::string {
        ++calls;
        throw PermanentFailure{"400"};
    };
    CHECK(error_code([&] { with_retries({3, std::chrono::milliseconds(1)}, permanent, sleeper); }) ==
          ErrorCode::BackendError);
    CHECK(calls == 1);
}

TEST_CASE("urls split into origin and path") {
    auto u = parse_url("http://localhost:8080/v1/chat/completions");
    CHECK(u.scheme_host_port == "http://localhost:8080");
    CHECK(u.path == "/v1/chat/completions");
    CHECK(parse_url("https://example.org").path == "/");
    CHECK(error_code([] { parse_url("localhost:80/x"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("chat request body follows the wire schema") {
    ChatConfig cfg;
    cfg.kind = ChatKind::http;
    cfg.endpoint = "http://127.0.0.1:9/v1/chat/completions";
    cfg.model_name = "m";
    cfg.temperature = 0.25;
    HttpChatBackend be(cfg);
    auto body = be.request_body(ChatRequest{"t", "S", "U", 77, json::object()});
    CHECK(body == json{{"model", "m"},
                       {"messages", {{{"role", "system"}, {"content", "S"}}, {{"role", "user"}, {"content", "U"}}}},
                       {"temperature", 0.25},
                       {"seed", 77}});
    ChatConfig missing;
    missing.kind = ChatKind::http;
    CHECK(error_code([&] { HttpChatBackend b(missing); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("environment overrides endpoints and keys") {
    ::setenv("DRAGON_LLM_ENDPOINT", "http://h:1/c", 1);
    ::setenv("DRAGON_API_KEY", "k", 1);
    ChatConfig chat;
    EmbedConfig embed;
    apply_env(chat, embed);
    ::unsetenv("DRAGON_LLM_ENDPOINT");
    ::unsetenv("DRAGON_API_KEY");
    CHECK(chat.endpoint == "http://h:1/c");
    CHECK(chat.api_key == "k");
    CHECK(embed.api_key == "k");
    CHECK(embed.endpoint.empty());
}

TEST_CASE("prompt templates render and hash their source files") {
    const auto ids = template_ids();
    CHECK(ids.size() == 17);
    for (const auto& id : ids) {
        const auto& t = prompt_template(id);
        CHECK(t.version >= 1);
        CHECK_FALSE(t.user.empty());
        CHECK(t.hash == fixtures::sha256_file(fixtures::path("../../templates/" + id + ".txt")));
    }
    const auto& rubric = prompt_template("gen_rubric");
    auto text = rubric.render_user({{"query", "Q?"}, {"answer", "A."}, {"gold_sentences", "S."}, {"max_criteria", "2"}});
    CHECK(text.find("Question: Q?") != std::string::npos);
    CHECK(text.find("{{") == std::string::npos);
    CHECK(error_code([&] { rubric.render_user({{"query", "Q?"}}); }) == ErrorCode::InvalidConfig);
    CHECK(error_code([] { prompt_template("nope"); }) == ErrorCode::InvalidConfig);

    auto req = make_request("gen_rubric", {{"query", "Q?"}, {"answer", "A."}, {"gold_sentences", "S."}, {"max_criteria", "2"}},
                            9, json{{"k", 1}});
    CHECK(req.tag == "gen_rubric");
    CHECK(req.seed == 9);
    CHECK(req.context["k"] == 1);
}
