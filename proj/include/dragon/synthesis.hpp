#pragma once

#include "dragon/backends.hpp"
#include "dragon/corpus.hpp"
#include "dragon/datamodel.hpp"
#include "dragon/graph.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dragon::synthesis {

enum class RuleId { paraphrase, metaphor, add_constraint, introduce_ambiguity, split_subquestion, inject_unanswerable };

std::string_view to_string(RuleId rule);
std::optional<RuleId> parse_rule(std::string_view name);
const std::vector<RuleId>& all_rules();
std::string_view rule_description(RuleId rule);

/// A query rewrite. Rules never touch clues or mappings; inject_unanswerable
/// additionally appends one rubric criterion.
struct TransformRule {
    RuleId rule_id = RuleId::paraphrase;
    std::string prompt_template_id = "transform";
};

enum class CompletenessLevel { full, drop_one_clue, single_clue };

std::string_view to_string(CompletenessLevel level);
std::optional<CompletenessLevel> parse_level(std::string_view name);

/// Number of backend calls made for one generation before giving up with
/// RejectedGeneration.
inline constexpr int kGenerationAttempts = 2;

datamodel::QARecord gen_single_hop(const datamodel::Clue& clue, backends::ChatBackend& backend, std::uint64_t seed,
                                   std::string query_id = "");

/// `clues` must come from at least two chunks. Throws DegenerateHop when the
/// generated answer leaves a clue uncited.
datamodel::QARecord gen_multi_hop(const std::vector<datamodel::Clue>& clues, backends::ChatBackend& backend,
                                  std::uint64_t seed, const std::vector<std::string>& bridges = {},
                                  std::string query_id = "");

datamodel::QARecord apply_transform(const datamodel::QARecord& rec, const TransformRule& rule,
                                    backends::ChatBackend& backend, std::uint64_t seed);

/// Regenerates the query from a subset of the clues; clues, mappings and gold
/// sets are kept as they are.
datamodel::QARecord apply_completeness(const datamodel::QARecord& rec, CompletenessLevel level,
                                       backends::ChatBackend& backend, std::uint64_t seed);

/// Adds one answer variant per non-empty subset of missing gold chunks.
datamodel::QARecord gen_variants(const datamodel::QARecord& rec, backends::ChatBackend& backend, std::uint64_t seed);

/// At most w+1 criteria, each starting with "Award 1 point if". Gold sentence
/// texts come from `corpus` when given, otherwise clue statements are used.
std::vector<std::string> gen_rubric(const datamodel::QARecord& rec, backends::ChatBackend& backend,
                                    std::uint64_t seed = 0, const corpus::ChunkIndex* corpus = nullptr);

/// Text of the forced variant when every gold chunk is missing.
inline constexpr std::string_view kUndeterminableAnswer =
    "The answer cannot be determined because the supporting documents are missing.";

struct SynthesisConfig {
    std::size_t num_questions = 40;
    std::map<int, double> hop_mix = {{1, 0.5}, {2, 0.3}, {3, 0.2}};
    bool variants = true;
    int max_rules = 3;
    std::vector<RuleId> rules = all_rules();
    double completeness_rate = 0.5;
    graph::SamplingConfig sampling;
    std::size_t concurrency = 8;
};

struct SynthesisResult {
    datamodel::Dataset dataset;
    json manifest;
    std::vector<std::string> dropped;  // reasons, one per discarded generation
    graph::EntityGraph graph;
};

/// Full pipeline: clues -> entities -> graph -> single/multi-hop generation ->
/// variants -> transform schedule -> completeness variants. Deterministic for
/// deterministic backends and a fixed seed.
SynthesisResult synthesize(const corpus::ChunkIndex& corpus, backends::ChatBackend& backend,
                           const SynthesisConfig& config, std::uint64_t seed);

} // namespace dragon::synthesis
