#pragma once

#include "dragon/backends.hpp"
#include "dragon/corpus.hpp"
#include "dragon/retrieval.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dragon::rag {

enum class StepKind { plan, retrieve, generate, judge_continue, aggregate, stop };
std::string_view to_string(StepKind kind);

struct TraceStep {
    StepKind kind;
    json payload = json::object();
};

struct RagTrace {
    std::string query_id;
    std::string engine;
    std::vector<TraceStep> steps;
    std::string final_answer;
    std::vector<std::string> retrieved_all;  // deduplicated, first-seen order
    std::size_t retrieve_calls = 0;
    std::size_t chat_calls = 0;
    std::size_t interactions = 0;  // planner emissions (FLARE generate calls, ReACT actions)
    std::optional<double> wall_ms;

    std::size_t count(StepKind kind) const;
    json to_json() const;
};

/// Structural problems with a trace: stop count/position, retrieve cap,
/// duplicates in retrieved_all. Empty when the trace is well formed.
std::vector<std::string> check_trace(const RagTrace& trace, std::size_t max_retrieves);

/// Shared immutable index plus the corpus texts it was built from.
class Retriever {
public:
    Retriever(const retrieval::VectorIndex& index, const corpus::ChunkIndex& corpus, backends::EmbedBackend& embed)
        : index_(index), corpus_(corpus), embed_(embed) {}

    std::vector<retrieval::ScoredChunk> retrieve(const std::string& query, std::size_t k) const;
    std::string text(const std::string& chunk_id) const;

private:
    const retrieval::VectorIndex& index_;
    const corpus::ChunkIndex& corpus_;
    backends::EmbedBackend& embed_;
};

struct EngineOptions {
    std::size_t k = 3;            // vanilla retrieval depth
    std::size_t per_query_k = 3;  // RR per sub-query, FLARE per iteration
    std::size_t rr_keep = 5;      // RR chunks kept after aggregation
    int max_iter = 8;             // FLARE iterations, ReACT interactions, RR sub-queries
    bool timing = false;
    std::uint64_t seed = 0;
};

enum class Engine { vanilla, rr, flare, react };
std::string_view to_string(Engine engine);
std::optional<Engine> parse_engine(std::string_view name);

RagTrace run_vanilla(const std::string& query_id, const std::string& query, const Retriever& retriever,
                     backends::ChatBackend& gen, const EngineOptions& options = {});
RagTrace run_rr(const std::string& query_id, const std::string& query, const Retriever& retriever,
                backends::ChatBackend& gen, const EngineOptions& options = {});
RagTrace run_flare(const std::string& query_id, const std::string& query, const Retriever& retriever,
                   backends::ChatBackend& gen, const EngineOptions& options = {});
RagTrace run_react(const std::string& query_id, const std::string& query, const Retriever& retriever,
                   backends::ChatBackend& gen, const EngineOptions& options = {});

RagTrace run_engine(Engine engine, const std::string& query_id, const std::string& query, const Retriever& retriever,
                    backends::ChatBackend& gen, const EngineOptions& options = {});

inline constexpr std::string_view kFlareDoneMarker = "[DONE]";

} // namespace dragon::rag
