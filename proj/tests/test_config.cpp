#include "dragon/commands.hpp"
#include "dragon/config.hpp"
#include "dragon/util.hpp"

#include "fixtures.hpp"

#include <catch_amalgamated.hpp>

#include <cstdlib>

using namespace dragon;
using namespace dragon::config;
using fixtures::error_code;

TEST_CASE("defaults") {
    RunConfig cfg;
    finalize(cfg);
    CHECK(cfg.k == 3);
    CHECK(cfg.n_neg == 7);
    CHECK(cfg.max_iter == 8);
    CHECK(cfg.chunking.size_tokens == 1000);
    CHECK(cfg.chunking.overlap_tokens == 100);
    CHECK(cfg.chat.kind == backends::ChatKind::mock_hash);
    CHECK(cfg.embed.model_name == "mock-hash-embed");
}

TEST_CASE("yaml overlays every section") {
    RunConfig cfg;
    load_yaml_string(cfg, R"(
seed: 99
corpus:
  paths: [a, b]
  chunk_size: 200
  chunk_overlap: 20
synthesis:
  num_questions: 12
  hop_mix: {1: 0.25, 4: 0.75}
  rules: [paraphrase, metaphor]
  max_rules: 2
retrieval: {k: 5, n_neg: 3}
rag: {engine: react, max_iter: 4}
score: {rubric_points: true}
concurrency: 2
)");
    CHECK(cfg.seed == 99);
    CHECK(cfg.corpus_paths == std::vector<std::string>{"a", "b"});
    CHECK(cfg.chunking.size_tokens == 200);
    CHECK(cfg.synthesis.num_questions == 12);
    CHECK(cfg.synthesis.hop_mix == std::map<int, double>{{1, 0.25}, {4, 0.75}});
    CHECK(cfg.synthesis.rules.size() == 2);
    CHECK(cfg.k == 5);
    CHECK(cfg.n_neg == 3);
    CHECK(cfg.engine == rag::Engine::react);
    CHECK(cfg.max_iter == 4);
    CHECK(cfg.rubric_points);
    finalize(cfg);
    CHECK(cfg.synthesis.concurrency == 2);
}

TEST_CASE("yaml mistakes are config errors") {
    for (const char* text : {"sed: 1", "retrieval: {k: many}", "rag: {engine: selfrag}", "synthesis: {rules: [shout]}",
                             "synthesis: {hop_mix: {9: 1.0}}", "corpus: [1, 2]", "backend: grpc", "a: [unclosed"}) {
        RunConfig cfg;
        INFO(text);
        CHECK(error_code([&] { load_yaml_string(cfg, text); }) == ErrorCode::InvalidConfig);
    }
    RunConfig cfg;
    CHECK(error_code([&] { load_yaml(cfg, "/nonexistent/config.yaml"); }) == ErrorCode::IoError);
}

TEST_CASE("finalize validates values") {
    RunConfig cfg;
    cfg.chunking.overlap_tokens = cfg.chunking.size_tokens;
    CHECK(error_code([&] { finalize(cfg); }) == ErrorCode::InvalidConfig);
    cfg = RunConfig{};
    cfg.k = 0;
    CHECK(error_code([&] { finalize(cfg); }) == ErrorCode::InvalidConfig);
    cfg = RunConfig{};
    cfg.max_iter = 0;
    CHECK(error_code([&] { finalize(cfg); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("flags beat env beat file") {
    fixtures::TempDir tmp;
    write_file(tmp.path() / "c.yaml", "seed: 5\nbackend: http\nchat: {model: file-model, endpoint: 'http://f/c'}\n"
                                      "retrieval: {k: 4}\n");
    commands::Options opts;
    opts.config_file = tmp.path() / "c.yaml";
    auto from_file = commands::resolve_config(opts);
    CHECK(from_file.seed == 5);
    CHECK(from_file.k == 4);
    CHECK(from_file.chat.model_name == "file-model");

    ::setenv("DRAGON_LLM_MODEL", "env-model", 1);
    auto from_env = commands::resolve_config(opts);
    CHECK(from_env.chat.model_name == "env-model");
    CHECK(from_env.chat.endpoint == "http://f/c");

    opts.seed = 9;
    opts.k = 1;
    opts.backend = "mock";
    auto from_flags = commands::resolve_config(opts);
    ::unsetenv("DRAGON_LLM_MODEL");
    CHECK(from_flags.seed == 9);
    CHECK(from_flags.k == 1);
    // Mock mode ignores model names from anywhere else.
    CHECK(from_flags.chat.model_name == "mock-hash");

    opts.engine = "self-rag";
    CHECK(error_code([&] { commands::resolve_config(opts); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("config hash ignores paths, secrets and parallelism") {
    RunConfig a;
    finalize(a);
    RunConfig b = a;
    b.corpus_paths = {"elsewhere"};
    b.chat.api_key = "secret";
    b.concurrency = 1;
    b.max_in_flight = 2;
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 14;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(to_json(a).dump().find("secret") == std::string::npos);
}
