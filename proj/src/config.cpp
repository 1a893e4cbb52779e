#include "dragon/config.hpp"

#include "dragon/error.hpp"

#include <yaml-cpp/yaml.h>

#include <set>

namespace dragon::config {

std::optional<BackendMode> parse_backend_mode(std::string_view name) {
    if (name == "mock") return BackendMode::mock;
    if (name == "http") return BackendMode::http;
    return std::nullopt;
}

std::string_view to_string(BackendMode mode) { return mode == BackendMode::http ? "http" : "mock"; }

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, where + ": " + what);
}

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
    if (!node.IsMap()) bad(where, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.contains(key)) bad(where, "unknown key '" + key + "'");
    }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
    if (!node[key]) return;
    try {
        out = node[key].as<T>();
    } catch (const YAML::Exception&) {
        bad(where + "." + key, "has the wrong type");
    }
}

void read_chat(const YAML::Node& n, backends::ChatConfig& c, const std::string& where) {
    check_keys(n, where, {"endpoint", "model", "temperature", "max_retries", "timeout_ms", "backoff_ms"});
    read(n, "endpoint", c.endpoint, where);
    read(n, "model", c.model_name, where);
    read(n, "temperature", c.temperature, where);
    read(n, "max_retries", c.max_retries, where);
    read(n, "timeout_ms", c.timeout_ms, where);
    read(n, "backoff_ms", c.backoff_base_ms, where);
}

void read_embed(const YAML::Node& n, backends::EmbedConfig& c, const std::string& where) {
    check_keys(n, where, {"endpoint", "model", "dimension", "max_retries", "timeout_ms", "backoff_ms"});
    read(n, "endpoint", c.endpoint, where);
    read(n, "model", c.model_name, where);
    read(n, "dimension", c.dimension, where);
    read(n, "max_retries", c.max_retries, where);
    read(n, "timeout_ms", c.timeout_ms, where);
    read(n, "backoff_ms", c.backoff_base_ms, where);
}

void apply(RunConfig& cfg, const YAML::Node& root) {
    if (!root || root.IsNull()) return;
    check_keys(root, "config", {"seed", "corpus", "backend", "chat", "embed", "synthesis", "retrieval", "rag", "score",
                                "concurrency", "max_in_flight"});
    read(root, "seed", cfg.seed, "config");
    read(root, "concurrency", cfg.concurrency, "config");
    read(root, "max_in_flight", cfg.max_in_flight, "config");
    if (root["backend"]) {
        auto mode = parse_backend_mode(root["backend"].as<std::string>());
        if (!mode) bad("config.backend", "must be mock or http");
        cfg.backend = *mode;
    }
    if (auto n = root["corpus"]) {
        check_keys(n, "corpus", {"paths", "chunk_size", "chunk_overlap", "llm_clean"});
        read(n, "paths", cfg.corpus_paths, "corpus");
        read(n, "chunk_size", cfg.chunking.size_tokens, "corpus");
        read(n, "chunk_overlap", cfg.chunking.overlap_tokens, "corpus");
        read(n, "llm_clean", cfg.llm_clean, "corpus");
    }
    if (auto n = root["chat"]) read_chat(n, cfg.chat, "chat");
    if (auto n = root["embed"]) read_embed(n, cfg.embed, "embed");
    if (auto n = root["synthesis"]) {
        auto& s = cfg.synthesis;
        check_keys(n, "synthesis", {"num_questions", "hop_mix", "variants", "max_rules", "rules", "completeness_rate",
                                    "max_degree", "enumeration_budget"});
        read(n, "num_questions", s.num_questions, "synthesis");
        read(n, "variants", s.variants, "synthesis");
        read(n, "max_rules", s.max_rules, "synthesis");
        read(n, "completeness_rate", s.completeness_rate, "synthesis");
        read(n, "max_degree", s.sampling.max_degree, "synthesis");
        read(n, "enumeration_budget", s.sampling.enumeration_budget, "synthesis");
        if (n["hop_mix"]) {
            std::map<int, double> mix;
            read(n, "hop_mix", mix, "synthesis");
            for (const auto& [h, w] : mix) {
                if (h < 1 || h > 4) bad("synthesis.hop_mix", "hop counts must lie in [1, 4]");
                if (w < 0) bad("synthesis.hop_mix", "weights must be non-negative");
            }
            s.hop_mix = mix;
        }
        if (n["rules"]) {
            std::vector<std::string> names;
            read(n, "rules", names, "synthesis");
            s.rules.clear();
            for (const auto& name : names) {
                auto r = synthesis::parse_rule(name);
                if (!r) bad("synthesis.rules", "unknown rule '" + name + "'");
                s.rules.push_back(*r);
            }
        }
    }
    if (auto n = root["retrieval"]) {
        check_keys(n, "retrieval", {"n_neg", "k"});
        read(n, "n_neg", cfg.n_neg, "retrieval");
        read(n, "k", cfg.k, "retrieval");
    }
    if (auto n = root["rag"]) {
        check_keys(n, "rag", {"engine", "max_iter"});
        if (n["engine"]) {
            auto e = rag::parse_engine(n["engine"].as<std::string>());
            if (!e) bad("rag.engine", "must be one of vanilla, rr, flare, react");
            cfg.engine = *e;
        }
        read(n, "max_iter", cfg.max_iter, "rag");
    }
    if (auto n = root["score"]) {
        check_keys(n, "score", {"rubric_points"});
        read(n, "rubric_points", cfg.rubric_points, "score");
    }
}

} // namespace

void load_yaml_string(RunConfig& cfg, std::string_view yaml) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("config is not valid YAML: ") + e.what());
    }
    try {
        apply(cfg, root);
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
    }
}

void load_yaml(RunConfig& cfg, const std::filesystem::path& path) { load_yaml_string(cfg, read_file(path)); }

void apply_env(RunConfig& cfg) { backends::apply_env(cfg.chat, cfg.embed); }

void finalize(RunConfig& cfg) {
    if (cfg.backend == BackendMode::mock) {
        cfg.chat.kind = backends::ChatKind::mock_hash;
        cfg.chat.model_name = "mock-hash";
        cfg.embed.kind = backends::EmbedKind::mock_hash;
        cfg.embed.model_name = "mock-hash-embed";
    } else {
        cfg.chat.kind = backends::ChatKind::http;
        cfg.embed.kind = backends::EmbedKind::http;
    }
    if (cfg.chunking.size_tokens == 0 || cfg.chunking.overlap_tokens >= cfg.chunking.size_tokens) {
        throw Error(ErrorCode::InvalidConfig, "chunk_overlap must be smaller than chunk_size");
    }
    if (cfg.k == 0) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
    if (cfg.n_neg == 0) throw Error(ErrorCode::InvalidConfig, "n_neg must be at least 1");
    if (cfg.max_iter < 1) throw Error(ErrorCode::InvalidConfig, "max_iter must be at least 1");
    if (cfg.embed.dimension == 0) throw Error(ErrorCode::InvalidConfig, "embed.dimension must be positive");
    if (cfg.concurrency == 0 || cfg.max_in_flight == 0) {
        throw Error(ErrorCode::InvalidConfig, "concurrency and max_in_flight must be positive");
    }
    cfg.synthesis.concurrency = cfg.concurrency;
}

json to_json(const RunConfig& cfg) {
    const auto& s = cfg.synthesis;
    json mix = json::object();
    for (const auto& [h, w] : s.hop_mix) mix[std::to_string(h)] = w;
    json rules = json::array();
    for (auto r : s.rules) rules.push_back(synthesis::to_string(r));
    return {
        {"seed", cfg.seed},
        {"corpus", {{"chunk_size", cfg.chunking.size_tokens},
                    {"chunk_overlap", cfg.chunking.overlap_tokens},
                    {"llm_clean", cfg.llm_clean}}},
        {"backend", to_string(cfg.backend)},
        {"chat", {{"model", cfg.chat.model_name}, {"temperature", cfg.chat.temperature}}},
        {"embed", {{"model", cfg.embed.model_name}, {"dimension", cfg.embed.dimension}}},
        {"synthesis", {{"num_questions", s.num_questions},
                       {"hop_mix", mix},
                       {"variants", s.variants},
                       {"max_rules", s.max_rules},
                       {"rules", rules},
                       {"completeness_rate", s.completeness_rate},
                       {"max_degree", s.sampling.max_degree},
                       {"enumeration_budget", s.sampling.enumeration_budget}}},
        {"retrieval", {{"n_neg", cfg.n_neg}, {"k", cfg.k}}},
        {"rag", {{"engine", rag::to_string(cfg.engine)}, {"max_iter", cfg.max_iter}}},
        {"score", {{"rubric_points", cfg.rubric_points}}},
    };
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

} // namespace dragon::config
