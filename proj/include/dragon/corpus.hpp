#pragma once

#include "dragon/util.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dragon {
namespace backends {
class ChatBackend;
}

namespace corpus {

/// Half-open byte range [begin, end).
struct CharRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool operator==(const CharRange&) const = default;
};

struct Document {
    std::string doc_id;
    std::string source_uri;
    std::string title;
    std::string text;
    std::size_t token_count = 0;
    bool llm_cleaned = false;
};

struct SentenceSpan {
    std::string sent_id;  // "<chunk_id>@<j>"
    CharRange range;      // into Chunk::text
};

struct Chunk {
    std::string chunk_id;  // "<doc_id>#<k>"
    std::string doc_id;
    CharRange range;       // into Document::text
    std::string text;
    std::vector<SentenceSpan> sentences;

    std::string_view sentence_text(const SentenceSpan& s) const {
        return std::string_view(text).substr(s.range.begin, s.range.size());
    }
};

enum class Format { html, pdf_text, markdown, plain };

std::optional<Format> parse_format(std::string_view name);
std::string_view to_string(Format f);

/// Stable identifier derived from the source URI.
std::string make_doc_id(std::string_view source_uri);

/// Strips format-specific boilerplate, normalizes line endings and blank
/// lines. Throws DecodeError on invalid UTF-8 and EmptyDocument when nothing
/// is left.
Document ingest(std::string_view raw, Format format, std::string_view source_uri);

/// Newline/whitespace normalization shared by every format; idempotent.
std::string normalize_text(std::string_view text);

/// Replaces the document text with the backend's cleaned rendering.
Document llm_clean(const Document& doc, backends::ChatBackend& backend, std::uint64_t seed = 0);

struct ChunkingConfig {
    std::size_t size_tokens = 1000;
    std::size_t overlap_tokens = 100;
};

std::vector<Chunk> chunk(const Document& doc, const ChunkingConfig& config);

/// Splits after '.', '?' or '!' runs followed by whitespace and an uppercase
/// letter (or end of text), and at blank lines. Spans exclude surrounding
/// whitespace. Ids are left empty; chunk() assigns them.
std::vector<SentenceSpan> split_sentences(std::string_view text);

/// Lookup structure over a chunked corpus.
class ChunkIndex {
public:
    ChunkIndex() = default;
    explicit ChunkIndex(std::vector<Chunk> chunks);

    const std::vector<Chunk>& chunks() const { return chunks_; }
    const Chunk* find(std::string_view chunk_id) const;
    const SentenceSpan* find_sentence(std::string_view chunk_id, std::string_view sent_id) const;
    std::optional<std::string_view> sentence_text(std::string_view chunk_id, std::string_view sent_id) const;
    bool contains(std::string_view chunk_id) const { return find(chunk_id) != nullptr; }
    std::size_t size() const { return chunks_.size(); }

private:
    std::vector<Chunk> chunks_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
};

json to_json(const Document& doc);
Document document_from_json(const json& j);
json to_json(const Chunk& chunk);
Chunk chunk_from_json(const json& j);

/// Hash over the canonical serialization of the chunk records.
std::string corpus_hash(const std::vector<Chunk>& chunks);

/// Reads a chunk JSONL file, skipping a leading meta record if present.
std::vector<Chunk> load_chunks(const std::filesystem::path& path);
std::vector<Document> load_documents(const std::filesystem::path& path);

} // namespace corpus
} // namespace dragon
