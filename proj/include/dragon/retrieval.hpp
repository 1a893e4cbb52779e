#pragma once

#include "dragon/backends.hpp"
#include "dragon/corpus.hpp"
#include "dragon/datamodel.hpp"

#include <string>
#include <utility>
#include <vector>

namespace dragon::retrieval {

struct IndexEntry {
    std::string chunk_id;
    backends::Vector vector;
};

/// Exact inner-product index over unit vectors. Immutable once built; a
/// rebuild produces a new instance with generation + 1.
struct VectorIndex {
    std::size_t dimension = 0;
    std::vector<IndexEntry> entries;
    int generation = 0;
    std::string embed_model;

    std::size_t size() const { return entries.size(); }
};

/// Embeds every chunk text. `previous` (if any) supplies the generation to
/// increment. Throws DuplicateId, Precondition (no chunks), DimensionMismatch.
VectorIndex build_index(const std::vector<corpus::Chunk>& chunks, backends::EmbedBackend& backend,
                        const VectorIndex* previous = nullptr);

struct ScoredChunk {
    std::string chunk_id;
    double score = 0;

    bool operator==(const ScoredChunk&) const = default;
};

/// Exhaustive scan. Scores are dot products accumulated in double; results
/// are sorted by score descending, then chunk_id ascending.
std::vector<ScoredChunk> search_vector(const VectorIndex& index, const backends::Vector& query, std::size_t k);

std::vector<ScoredChunk> search(const VectorIndex& index, const std::string& query, std::size_t k,
                                backends::EmbedBackend& backend);

/// The n_neg best-ranked chunks for rec.query that are not gold, in rank
/// order. Throws InsufficientCorpus when fewer than n_neg non-gold chunks exist.
std::vector<std::string> mine_hard_negatives(const VectorIndex& index, const datamodel::QARecord& rec,
                                             std::size_t n_neg, backends::EmbedBackend& backend);

/// Same, with a precomputed query vector.
std::vector<std::string> mine_hard_negatives(const VectorIndex& index, const datamodel::QARecord& rec,
                                             std::size_t n_neg, const backends::Vector& query);

struct Triplet {
    std::string query_id;
    std::string query;
    std::string positive;
    std::vector<std::string> negatives;
};

struct TripletFile {
    json header = json::object();
    std::vector<Triplet> triplets;
};

/// One triplet per (record, gold chunk), sorted by (query_id, chunk_id).
TripletFile export_triplets(const std::vector<datamodel::QARecord>& dataset, const VectorIndex& index,
                            std::size_t n_neg, backends::EmbedBackend& backend);

/// JSONL with texts inlined; first line is the header with "type":"meta".
std::string encode_triplets(const TripletFile& file, const corpus::ChunkIndex& corpus);

inline constexpr std::size_t kDefaultNegatives = 7;

} // namespace dragon::retrieval
