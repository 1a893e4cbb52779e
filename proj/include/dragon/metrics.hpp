#pragma once

#include "dragon/backends.hpp"
#include "dragon/corpus.hpp"
#include "dragon/datamodel.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dragon::metrics {

struct RankedList {
    std::string query_id;
    std::vector<std::string> chunk_ids;
};

using RetrievalRun = std::vector<RankedList>;

struct QueryScore {
    std::string query_id;
    double value = 0;
};

struct Report {
    std::string metric;
    std::optional<std::size_t> k;
    double value = 0;
    std::vector<QueryScore> per_query;
    std::string judge_model;
    std::string verdict_file;

    json to_json() const;
};

/// Mean over run entries of |top-k ∩ gold| / k. Lists shorter than k still
/// divide by k. Throws UnknownQuery for ids missing from `dataset` and
/// Precondition for duplicate chunk ids inside one list.
Report precision_at_k(const RetrievalRun& run, const std::vector<datamodel::QARecord>& dataset, std::size_t k);

struct GeneratedAnswer {
    std::string query_id;
    std::string answer;
};

/// YES/TRUE -> true, NO/FALSE -> false, judged on the first word of the reply.
std::optional<bool> parse_verdict(std::string_view reply);

/// Thread-safe verdict memo keyed by hash(answer, item, rubric, judge model).
class VerdictCache {
public:
    static std::string key(std::string_view answer, std::string_view item, std::string_view rubric,
                           std::string_view model);
    std::optional<bool> get(const std::string& key) const;
    void put(const std::string& key, bool value);
    std::size_t size() const;
    std::size_t hits() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, bool> values_;
    mutable std::size_t hits_ = 0;
};

struct JudgeVerdict {
    std::string query_id;
    std::vector<bool> criteria;   // one per rubric criterion (rubric-points variant only)
    std::vector<bool> sentences;  // one per gold sentence, in SentenceRef order
};

struct CsgOptions {
    /// Also judge each rubric criterion and report the points fraction.
    bool rubric_points = false;
    std::size_t concurrency = 8;
    VerdictCache* cache = nullptr;
};

struct CsgResult {
    Report sentence;                // fraction of gold sentences covered
    std::optional<Report> rubric;   // fraction of rubric points earned
    std::vector<JudgeVerdict> verdicts;
    std::vector<json> verdict_rows;  // audit log, one row per judge decision
};

/// One judge call per (query, gold sentence). Throws UnknownQuery,
/// MissingRubric (empty rubric) and Precondition (no gold sentences or a
/// gold sentence missing from `corpus`).
CsgResult csg(const std::vector<GeneratedAnswer>& answers, const std::vector<datamodel::QARecord>& dataset,
              const corpus::ChunkIndex& corpus, backends::ChatBackend& judge, const CsgOptions& options = {});

/// Sentence-count score from precomputed verdicts: mean over queries of
/// covered / w_i.
double csg_from_verdicts(const std::vector<JudgeVerdict>& verdicts, std::vector<QueryScore>* per_query = nullptr);

struct LjResult {
    Report report;
    std::vector<json> verdict_rows;
};

/// One holistic judge call per query against the reference answer.
LjResult lj(const std::vector<GeneratedAnswer>& answers, const std::vector<datamodel::QARecord>& dataset,
            backends::ChatBackend& judge, std::size_t concurrency = 8);

} // namespace dragon::metrics
