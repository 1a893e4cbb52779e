#pragma once

#include "dragon/corpus.hpp"
#include "dragon/util.hpp"

#include <compare>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace dragon::datamodel {

/// (chunk_id, sent_id) pair pointing at one sentence of the corpus.
struct SentenceRef {
    std::string chunk_id;
    std::string sent_id;

    auto operator<=>(const SentenceRef&) const = default;
};

/// Where a clue comes from. `docs` is the set of chunks that appear in
/// `sentence_refs`.
struct ClueSupport {
    std::set<std::string> docs;
    std::vector<SentenceRef> sentence_refs;

    /// Builds a support whose docs are derived from the refs.
    static ClueSupport from_refs(std::vector<SentenceRef> refs);
};

struct Clue {
    std::string clue_id;
    std::string statement;
    ClueSupport support;
};

struct AnswerSentence {
    std::string text;
    std::vector<std::string> clue_ids;
};

struct AnswerVariant {
    std::set<std::string> missing_docs;
    std::vector<AnswerSentence> text;
};

struct QARecord {
    std::string query_id;
    std::string query;
    int hop_count = 1;
    std::vector<Clue> clues;
    std::vector<AnswerSentence> standard_answer;
    std::vector<AnswerVariant> variants;
    std::vector<std::string> rubric;
    std::vector<std::string> lineage;

    const Clue* find_clue(std::string_view clue_id) const;
};

/// Largest hop count for which answer variants are enumerated.
inline constexpr int kMaxVariantHops = 6;

/// Union of support.docs over the clues cited by the standard answer.
/// Throws DanglingClue when a cited id is unknown.
std::set<std::string> derive_gold_docs(const QARecord& rec);

/// Union of sentence_refs over the clues cited by the standard answer.
std::set<SentenceRef> derive_gold_sentences(const QARecord& rec);

/// All 2^p - 1 non-empty subsets of {0..p-1}, bitmask ascending.
std::vector<std::vector<std::size_t>> variant_subsets(int p);

enum class Violation {
    EmptyQuery,
    EmptyAnswer,
    DuplicateClueId,
    EmptySupport,
    SupportMismatch,
    UnresolvableRef,
    DanglingClue,
    EmptyCitation,
    HopCountMismatch,
    VariantCountMismatch,
    VariantInvalidSubset,
    VariantDuplicateSubset,
    VariantCitesMissing,
    EmptyRubric,
};

std::string_view to_string(Violation v);

struct ViolationEntry {
    Violation kind;
    std::string detail;
};

struct ValidationReport {
    std::vector<ViolationEntry> entries;

    bool ok() const { return entries.empty(); }
    bool has(Violation v) const;
    json to_json() const;
};

struct ValidateOptions {
    bool require_rubric = false;
};

ValidationReport validate(const QARecord& rec, const corpus::ChunkIndex& corpus, const ValidateOptions& options = {});

json to_json(const QARecord& rec);
QARecord record_from_json(const json& j);

struct Dataset {
    json meta = json::object();
    std::vector<QARecord> records;
};

/// First line is {"type":"meta", ...}; one record per following line.
std::string encode_dataset(const Dataset& dataset);
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

} // namespace dragon::datamodel
