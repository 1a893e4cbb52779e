#include "dragon/retrieval.hpp"

#include "dragon/error.hpp"

#include <algorithm>
#include <set>

namespace dragon::retrieval {

VectorIndex build_index(const std::vector<corpus::Chunk>& chunks, backends::EmbedBackend& backend,
                        const VectorIndex* previous) {
    if (chunks.empty()) throw Error(ErrorCode::Precondition, "cannot build an index over zero chunks");
    std::set<std::string> seen;
    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) {
        if (!seen.insert(c.chunk_id).second) throw Error(ErrorCode::DuplicateId, "duplicate chunk id " + c.chunk_id);
        texts.push_back(c.text);
    }
    auto vectors = backend.embed(texts);
    if (vectors.size() != chunks.size()) {
        throw Error(ErrorCode::BackendError, "embedding backend returned " + std::to_string(vectors.size()) +
                                                 " vectors for " + std::to_string(chunks.size()) + " texts");
    }
    VectorIndex index;
    index.dimension = backend.dimension();
    index.generation = previous ? previous->generation + 1 : 1;
    index.embed_model = backend.model_name();
    index.entries.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (vectors[i].size() != index.dimension) {
            throw Error(ErrorCode::DimensionMismatch, "vector for " + chunks[i].chunk_id + " has " +
                                                          std::to_string(vectors[i].size()) + " components, expected " +
                                                          std::to_string(index.dimension));
        }
        index.entries.push_back({chunks[i].chunk_id, std::move(vectors[i])});
    }
    return index;
}

namespace {

bool ranks_before(const ScoredChunk& a, const ScoredChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk_id < b.chunk_id;
}

std::vector<ScoredChunk> rank_all(const VectorIndex& index, const backends::Vector& query) {
    if (query.size() != index.dimension) {
        throw Error(ErrorCode::DimensionMismatch, "query has " + std::to_string(query.size()) +
                                                      " components, index has " + std::to_string(index.dimension));
    }
    std::vector<ScoredChunk> scored;
    scored.reserve(index.entries.size());
    for (const auto& e : index.entries) {
        double dot = 0;
        for (std::size_t i = 0; i < query.size(); ++i) dot += static_cast<double>(query[i]) * e.vector[i];
        scored.push_back({e.chunk_id, dot});
    }
    return scored;
}

} // namespace

std::vector<ScoredChunk> search_vector(const VectorIndex& index, const backends::Vector& query, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::Precondition, "k must be at least 1");
    auto scored = rank_all(index, query);
    const auto take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), ranks_before);
    scored.resize(take);
    return scored;
}

std::vector<ScoredChunk> search(const VectorIndex& index, const std::string& query, std::size_t k,
                                backends::EmbedBackend& backend) {
    auto v = backend.embed({query});
    return search_vector(index, v.at(0), k);
}

std::vector<std::string> mine_hard_negatives(const VectorIndex& index, const datamodel::QARecord& rec,
                                             std::size_t n_neg, const backends::Vector& query) {
    if (n_neg == 0) throw Error(ErrorCode::Precondition, "n_neg must be at least 1");
    const auto gold = datamodel::derive_gold_docs(rec);
    auto scored = rank_all(index, query);
    std::erase_if(scored, [&](const ScoredChunk& s) { return gold.contains(s.chunk_id); });
    if (scored.size() < n_neg) {
        throw Error(ErrorCode::InsufficientCorpus, rec.query_id + ": " + std::to_string(scored.size()) +
                                                       " non-gold chunks available, " + std::to_string(n_neg) +
                                                       " negatives requested");
    }
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n_neg), scored.end(), ranks_before);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n_neg; ++i) out.push_back(scored[i].chunk_id);
    return out;
}

std::vector<std::string> mine_hard_negatives(const VectorIndex& index, const datamodel::QARecord& rec,
                                             std::size_t n_neg, backends::EmbedBackend& backend) {
    auto v = backend.embed({rec.query});
    return mine_hard_negatives(index, rec, n_neg, v.at(0));
}

TripletFile export_triplets(const std::vector<datamodel::QARecord>& dataset, const VectorIndex& index,
                            std::size_t n_neg, backends::EmbedBackend& backend) {
    TripletFile file;
    file.header = {{"index_generation", index.generation},
                   {"embed_model", index.embed_model},
                   {"dimension", index.dimension},
                   {"n_neg", n_neg}};
    if (dataset.empty()) return file;
    std::vector<std::string> queries;
    for (const auto& rec : dataset) queries.push_back(rec.query);
    const auto vectors = backend.embed(queries);
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const auto& rec = dataset[r];
        // Negatives depend only on the query, not on which gold chunk is the positive.
        const auto negatives = mine_hard_negatives(index, rec, n_neg, vectors.at(r));
        for (const auto& gold : datamodel::derive_gold_docs(rec)) {
            file.triplets.push_back({rec.query_id, rec.query, gold, negatives});
        }
    }
    std::stable_sort(file.triplets.begin(), file.triplets.end(), [](const Triplet& a, const Triplet& b) {
        return std::tie(a.query_id, a.positive) < std::tie(b.query_id, b.positive);
    });
    return file;
}

std::string encode_triplets(const TripletFile& file, const corpus::ChunkIndex& corpus) {
    auto text_of = [&](const std::string& id) {
        const auto* c = corpus.find(id);
        if (!c) throw Error(ErrorCode::Precondition, "triplet references chunk " + id + " missing from the corpus");
        return c->text;
    };
    std::vector<json> rows;
    json header = file.header;
    header["type"] = "meta";
    header["count"] = file.triplets.size();
    rows.push_back(header);
    for (const auto& t : file.triplets) {
        json negatives = json::array();
        for (const auto& n : t.negatives) negatives.push_back(text_of(n));
        rows.push_back({{"query_id", t.query_id},
                        {"query", t.query},
                        {"positive_id", t.positive},
                        {"positive_text", text_of(t.positive)},
                        {"negative_ids", t.negatives},
                        {"negative_texts", negatives}});
    }
    return to_jsonl(rows);
}

} // namespace dragon::retrieval
