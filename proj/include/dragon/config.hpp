#pragma once

#include "dragon/backends.hpp"
#include "dragon/corpus.hpp"
#include "dragon/metrics.hpp"
#include "dragon/ragengines.hpp"
#include "dragon/synthesis.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dragon::config {

enum class BackendMode { mock, http };

struct RunConfig {
    std::uint64_t seed = 13;
    std::vector<std::string> corpus_paths;
    corpus::ChunkingConfig chunking;
    bool llm_clean = false;
    BackendMode backend = BackendMode::mock;
    backends::ChatConfig chat;
    backends::EmbedConfig embed;
    synthesis::SynthesisConfig synthesis;
    std::size_t n_neg = 7;
    std::size_t k = 3;
    rag::Engine engine = rag::Engine::vanilla;
    int max_iter = 8;
    bool rubric_points = false;
    std::size_t concurrency = 8;
    std::size_t max_in_flight = 8;
};

/// Overlays a YAML file onto `cfg`. Unknown keys are rejected so typos do
/// not silently fall back to defaults. Throws InvalidConfig / IoError.
void load_yaml(RunConfig& cfg, const std::filesystem::path& path);
void load_yaml_string(RunConfig& cfg, std::string_view yaml);

/// DRAGON_* variables (endpoints, models, api key).
void apply_env(RunConfig& cfg);

/// Sets backend kinds from the mode; mock mode pins mock model names so
/// mock artifacts do not depend on the environment.
void finalize(RunConfig& cfg);

/// Everything that influences artifact contents. Paths, secrets and
/// parallelism settings are left out.
json to_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

std::optional<BackendMode> parse_backend_mode(std::string_view name);
std::string_view to_string(BackendMode mode);

} // namespace dragon::config
