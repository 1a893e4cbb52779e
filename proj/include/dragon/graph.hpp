#pragma once

#include "dragon/backends.hpp"
#include "dragon/corpus.hpp"
#include "dragon/datamodel.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace dragon::graph {

struct EntityMention {
    std::string surface;
    std::string chunk_id;
    std::string sent_id;
    std::string normalized;
};

/// Lowercase, ASCII punctuation removed, whitespace collapsed.
std::string normalize_entity(std::string_view surface);

struct Entity {
    std::string entity_id;
    std::string canonical;
    std::set<std::string> aliases;
    std::vector<EntityMention> mentions;
};

/// Bipartite entity <-> chunk incidence graph. Ids and edges are sorted.
struct EntityGraph {
    std::map<std::string, Entity> entities;  // by entity_id
    std::vector<std::string> chunk_ids;
    std::vector<std::pair<std::string, std::string>> edges;  // (entity_id, chunk_id)
    std::map<std::string, std::vector<std::string>> chunks_of_entity;
    std::map<std::string, std::vector<std::string>> entities_of_chunk;

    std::size_t degree(const std::string& entity_id) const;
    /// Entities incident to both chunks.
    std::vector<std::string> shared_entities(const std::string& a, const std::string& b) const;
};

struct ClueExtraction {
    std::vector<datamodel::Clue> clues;
    std::vector<std::string> warnings;
};

/// Asks the backend for the facts stated in `chunk`. Citations outside the
/// chunk's sentence list are dropped (with a warning); a clue left without
/// support is dropped. Throws NoCluesFound when nothing usable comes back.
ClueExtraction extract_clues(const corpus::Chunk& chunk, backends::ChatBackend& backend, std::uint64_t seed = 0);

/// Mentions whose surface is not a substring of the statement are dropped.
std::vector<EntityMention> extract_entities(const datamodel::Clue& clue, backends::ChatBackend& backend,
                                            std::uint64_t seed = 0);

/// Exact-match resolution on normalized keys. Canonical surface is the most
/// frequent one, ties broken lexicographically. Output sorted by entity_id.
std::vector<Entity> resolve_entities(std::vector<EntityMention> mentions);

EntityGraph build_graph(const std::vector<Entity>& entities);

struct SamplingConfig {
    std::size_t max_degree = 50;
    /// DFS node visits allowed before falling back to random walks.
    std::size_t enumeration_budget = 200000;
};

/// Groups of `hops` distinct chunks forming a chunk-entity-chunk path through
/// non-hub entities. Groups are unique as sets; the order within a group is
/// the path order. Seeded and deterministic.
std::vector<std::vector<std::string>> sample_multihop_groups(const EntityGraph& graph, int hops, std::size_t count,
                                                             std::uint64_t seed, const SamplingConfig& config = {});

/// One JSON row per entity: {entity_id, canonical, aliases, chunk_ids}.
std::vector<json> graph_dump(const EntityGraph& graph);

/// Finds the first {...} object in a model reply (tolerates code fences and
/// surrounding prose).
std::optional<json> parse_json_reply(std::string_view reply);

} // namespace dragon::graph
