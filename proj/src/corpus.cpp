#include "dragon/corpus.hpp"

#include "dragon/backends.hpp"
#include "dragon/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

namespace dragon::corpus {

namespace {

bool is_upper_ascii(char c) { return c >= 'A' && c <= 'Z'; }
bool is_alpha_ascii(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string decode_entities(std::string_view s) {
    static const std::array<std::pair<std::string_view, std::string_view>, 9> named = {{
        {"amp", "&"},
        {"lt", "<"},
        {"gt", ">"},
        {"quot", "\""},
        {"apos", "'"},
        {"nbsp", " "},
        {"mdash", "—"},
        {"ndash", "–"},
        {"hellip", "…"},
    }};
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        auto semi = s.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back(s[i++]);
            continue;
        }
        auto name = s.substr(i + 1, semi - i - 1);
        bool done = false;
        if (!name.empty() && name[0] == '#') {
            std::uint32_t cp = 0;
            bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
            auto digits = name.substr(hex ? 2 : 1);
            bool ok = !digits.empty();
            for (char c : digits) {
                int v;
                if (c >= '0' && c <= '9') v = c - '0';
                else if (hex && c >= 'a' && c <= 'f') v = c - 'a' + 10;
                else if (hex && c >= 'A' && c <= 'F') v = c - 'A' + 10;
                else { ok = false; break; }
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
                if (cp > 0x10FFFF) { ok = false; break; }
            }
            if (ok && cp != 0 && !(cp >= 0xD800 && cp <= 0xDFFF)) {
                append_utf8(out, cp == 0xA0 ? 0x20 : cp);
                done = true;
            }
        } else {
            for (const auto& [k, v] : named) {
                if (name == k) {
                    out += v;
                    done = true;
                    break;
                }
            }
        }
        if (done) {
            i = semi + 1;
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

// --- HTML -----------------------------------------------------------------

const std::set<std::string, std::less<>>& skipped_tags() {
    static const std::set<std::string, std::less<>> tags = {
        "script", "style", "nav",      "header", "footer", "aside",  "noscript", "form",
        "iframe", "svg",   "head",     "template", "button", "select", "menu",   "object",
    };
    return tags;
}

const std::set<std::string, std::less<>>& paragraph_tags() {
    static const std::set<std::string, std::less<>> tags = {
        "p",  "div", "section", "article", "main",  "h1",  "h2", "h3",  "h4", "h5",
        "h6", "ul",  "ol",      "table",   "blockquote", "pre", "hr", "figure", "dl",
    };
    return tags;
}

const std::set<std::string, std::less<>>& line_tags() {
    static const std::set<std::string, std::less<>> tags = {"br", "li", "tr", "dt", "dd", "caption"};
    return tags;
}

struct HtmlTag {
    std::string name;  // lowercase
    bool closing = false;
    bool self_closing = false;
    std::size_t end = 0;  // index one past '>'
};

// Parses a tag starting at s[i] == '<'. Returns false when the '<' is literal.
bool parse_tag(std::string_view s, std::size_t i, HtmlTag& tag) {
    std::size_t j = i + 1;
    if (j >= s.size()) return false;
    tag = HtmlTag{};
    if (s[j] == '/') {
        tag.closing = true;
        ++j;
    }
    if (j >= s.size() || !is_alpha_ascii(s[j])) return false;
    std::size_t nb = j;
    while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '-')) ++j;
    tag.name = to_lower_ascii(s.substr(nb, j - nb));
    char quote = 0;
    while (j < s.size()) {
        char c = s[j];
        if (quote) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '>') {
            tag.self_closing = j > 0 && s[j - 1] == '/';
            tag.end = j + 1;
            return true;
        }
        ++j;
    }
    return false;
}

std::string collapse_inline_space(std::string_view s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (is_space(c)) {
            pending = true;
        } else {
            if (pending) out.push_back(' ');
            pending = false;
            out.push_back(c);
        }
    }
    if (pending) out.push_back(' ');
    return out;
}

std::string strip_comments(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s.compare(i, 4, "<!--") == 0) {
            auto e = s.find("-->", i + 4);
            i = (e == std::string_view::npos) ? s.size() : e + 3;
        } else if (s.compare(i, 2, "<!") == 0 || s.compare(i, 2, "<?") == 0) {
            auto e = s.find('>', i);
            i = (e == std::string_view::npos) ? s.size() : e + 1;
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

struct HtmlExtract {
    std::string text;
    std::string title;
};

HtmlExtract extract_html(std::string_view raw) {
    const std::string src = strip_comments(raw);
    const std::string_view s(src);

    // Prefer <main>, then <article>, when the page marks its content region.
    std::string focus;
    for (const char* region : {"main", "article"}) {
        std::size_t i = 0;
        HtmlTag tag;
        bool found = false;
        while ((i = s.find('<', i)) != std::string_view::npos) {
            if (parse_tag(s, i, tag) && !tag.closing && tag.name == region) {
                found = true;
                break;
            }
            ++i;
        }
        if (found) {
            focus = region;
            break;
        }
    }

    HtmlExtract out;
    std::string body;
    int skip_depth = 0;
    int focus_depth = 0;
    bool in_title = false;
    std::string title;
    std::size_t i = 0;
    std::string pending_text;

    auto flush_text = [&] {
        if (pending_text.empty()) return;
        if (skip_depth == 0 && (focus.empty() || focus_depth > 0)) {
            body += collapse_inline_space(decode_entities(pending_text));
        }
        pending_text.clear();
    };

    while (i < s.size()) {
        HtmlTag tag;
        if (s[i] == '<' && parse_tag(s, i, tag)) {
            flush_text();
            const std::string& n = tag.name;
            if (n == "title") {
                in_title = !tag.closing;
            } else if (skipped_tags().contains(n)) {
                if (!tag.self_closing) skip_depth += tag.closing ? (skip_depth > 0 ? -1 : 0) : 1;
            } else {
                if (!focus.empty() && n == focus && !tag.self_closing) {
                    focus_depth += tag.closing ? (focus_depth > 0 ? -1 : 0) : 1;
                }
                if (skip_depth == 0) {
                    if (paragraph_tags().contains(n)) body += "\n\n";
                    else if (line_tags().contains(n)) body += "\n";
                    else if (n == "td" || n == "th") body += " ";
                }
            }
            i = tag.end;
            continue;
        }
        if (in_title) {
            title.push_back(s[i]);
        } else {
            pending_text.push_back(s[i]);
        }
        ++i;
    }
    flush_text();
    out.text = body;
    out.title = trim(collapse_inline_space(decode_entities(title)));
    return out;
}

// --- Markdown ---------------------------------------------------------------

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

std::string strip_markdown_inline(std::string_view line) {
    std::string out;
    std::size_t i = 0;
    while (i < line.size()) {
        // ![alt](url) -> removed
        if (line[i] == '!' && i + 1 < line.size() && line[i + 1] == '[') {
            auto close = line.find("](", i + 2);
            auto paren = close == std::string_view::npos ? close : line.find(')', close + 2);
            if (paren != std::string_view::npos) {
                i = paren + 1;
                continue;
            }
        }
        // [text](url) -> text
        if (line[i] == '[') {
            auto close = line.find("](", i + 1);
            auto paren = close == std::string_view::npos ? close : line.find(')', close + 2);
            if (paren != std::string_view::npos && line.substr(i + 1, close - i - 1).find('[') == std::string_view::npos) {
                out += line.substr(i + 1, close - i - 1);
                i = paren + 1;
                continue;
            }
        }
        if ((line[i] == '*' || line[i] == '_') && i + 1 < line.size() && line[i + 1] == line[i]) {
            i += 2;
            continue;
        }
        if (line[i] == '`') {
            ++i;
            continue;
        }
        out.push_back(line[i++]);
    }
    return out;
}

struct MarkdownExtract {
    std::string text;
    std::string title;
};

MarkdownExtract extract_markdown(std::string_view raw) {
    std::string src = normalize_text(raw);
    src = strip_comments(src);
    std::string_view s(src);
    MarkdownExtract out;

    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto nl = s.find('\n', pos);
        if (nl == std::string_view::npos) nl = s.size();
        lines.push_back(s.substr(pos, nl - pos));
        pos = nl + 1;
    }
    std::size_t first = 0;
    if (!lines.empty() && trim_view(lines[0]) == "---") {
        for (std::size_t k = 1; k < lines.size(); ++k) {
            if (trim_view(lines[k]) == "---") {
                first = k + 1;
                break;
            }
        }
    }
    for (std::size_t k = first; k < lines.size(); ++k) {
        auto t = trim_view(lines[k]);
        if (starts_with(t, "```") || starts_with(t, "~~~")) continue;
        if (t == "---" || t == "***" || t == "___") continue;
        // Reference-style link definitions: [id]: url
        if (starts_with(t, "[") && t.find("]:") != std::string_view::npos && t.find(' ') > t.find("]:")) continue;
        std::string_view body = t;
        bool heading = false;
        if (starts_with(body, "#")) {
            std::size_t h = 0;
            while (h < body.size() && body[h] == '#') ++h;
            if (h <= 6 && (h == body.size() || body[h] == ' ')) {
                body = trim_view(body.substr(h));
                heading = true;
            }
        }
        while (starts_with(body, ">")) body = trim_view(body.substr(1));
        std::string cleaned = strip_markdown_inline(body);
        if (heading && out.title.empty()) out.title = trim(cleaned);
        out.text += cleaned;
        out.text += '\n';
        if (heading) out.text += '\n';
    }
    return out;
}

// --- PDF text ---------------------------------------------------------------

std::string extract_pdf_text(std::string_view raw) {
    std::string s = normalize_text(raw);
    std::replace(s.begin(), s.end(), '\f', '\n');
    // Dehyphenate words broken across lines: "exam-\nple" -> "example".
    std::string joined;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '-' && i + 1 < s.size() && s[i + 1] == '\n' && i > 0 &&
            std::islower(static_cast<unsigned char>(s[i - 1])) && i + 2 < s.size() &&
            std::islower(static_cast<unsigned char>(s[i + 2]))) {
            ++i;
            continue;
        }
        joined.push_back(s[i]);
    }
    // Reflow hard-wrapped lines; blank lines stay paragraph breaks and bare
    // page numbers are dropped.
    std::string out;
    std::string paragraph;
    std::size_t pos = 0;
    auto flush = [&] {
        if (!paragraph.empty()) {
            out += paragraph;
            out += "\n\n";
            paragraph.clear();
        }
    };
    while (pos <= joined.size()) {
        auto nl = joined.find('\n', pos);
        if (nl == std::string::npos) nl = joined.size();
        auto line = trim_view(std::string_view(joined).substr(pos, nl - pos));
        pos = nl + 1;
        if (line.empty()) {
            flush();
            continue;
        }
        if (std::all_of(line.begin(), line.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            continue;
        }
        if (!paragraph.empty()) paragraph.push_back(' ');
        paragraph += line;
    }
    flush();
    return out;
}

// Stop-list of abbreviations whose trailing '.' does not end a sentence.
const std::set<std::string, std::less<>>& abbreviations() {
    static const std::set<std::string, std::less<>> words = {
        "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "inc", "ltd",
        "co", "corp", "fig", "no", "vol", "mt", "gen", "col", "lt", "capt", "sgt", "approx", "dept",
        "est", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
        "u.s", "u.k", "ph.d", "rev", "hon", "gov", "sen", "rep",
    };
    return words;
}

bool is_abbreviation_before(std::string_view text, std::size_t dot) {
    std::size_t b = dot;
    while (b > 0 && (is_alpha_ascii(text[b - 1]) || text[b - 1] == '.')) --b;
    auto word = text.substr(b, dot - b);
    if (word.empty()) return false;
    if (word.size() == 1 && is_upper_ascii(word[0])) return true;  // initial
    return abbreviations().contains(to_lower_ascii(word));
}

bool is_terminator(char c) { return c == '.' || c == '?' || c == '!'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}'; }

} // namespace

std::optional<Format> parse_format(std::string_view name) {
    if (name == "html" || name == "htm") return Format::html;
    if (name == "pdf_text" || name == "pdf") return Format::pdf_text;
    if (name == "markdown" || name == "md") return Format::markdown;
    if (name == "plain" || name == "txt" || name == "text") return Format::plain;
    return std::nullopt;
}

std::string_view to_string(Format f) {
    switch (f) {
    case Format::html: return "html";
    case Format::pdf_text: return "pdf_text";
    case Format::markdown: return "markdown";
    case Format::plain: return "plain";
    }
    return "plain";
}

std::string make_doc_id(std::string_view source_uri) { return "d" + sha256_hex(source_uri).substr(0, 12); }

std::string normalize_text(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

    std::string unified;
    unified.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\r') {
            unified.push_back('\n');
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        } else if (c == '\n' || c == '\t' || c == '\f' || static_cast<unsigned char>(c) >= 0x20) {
            if (c != 0x7F) unified.push_back(c);
        }
    }

    // Per line: drop trailing whitespace. Then cap blank-line runs at one.
    std::string out;
    out.reserve(unified.size());
    std::size_t newlines = 0;
    std::size_t pos = 0;
    bool any = false;
    while (pos <= unified.size()) {
        auto nl = unified.find('\n', pos);
        if (nl == std::string::npos) nl = unified.size();
        std::string_view line(unified.data() + pos, nl - pos);
        while (!line.empty() && is_space(line.back())) line.remove_suffix(1);
        if (line.empty() || trim_view(line).empty()) {
            if (any) ++newlines;
        } else {
            if (any) out.append(std::min<std::size_t>(newlines + 1, 2), '\n');
            // Leading whitespace of the first line is dropped.
            out += any ? line : trim_view(line);
            any = true;
            newlines = 0;
        }
        pos = nl + 1;
    }
    return out;
}

Document ingest(std::string_view raw, Format format, std::string_view source_uri) {
    if (!is_valid_utf8(raw)) {
        throw Error(ErrorCode::DecodeError, "input is not valid UTF-8: " + std::string(source_uri));
    }
    Document doc;
    doc.source_uri = std::string(source_uri);
    doc.doc_id = make_doc_id(source_uri);
    switch (format) {
    case Format::html: {
        auto ex = extract_html(raw);
        doc.title = ex.title;
        doc.text = normalize_text(ex.text);
        // Inline whitespace was collapsed per text node; lines may still start
        // with a space left over from markup boundaries.
        std::string cleaned;
        std::size_t pos = 0;
        while (pos <= doc.text.size()) {
            auto nl = doc.text.find('\n', pos);
            if (nl == std::string::npos) nl = doc.text.size();
            cleaned += trim_view(std::string_view(doc.text).substr(pos, nl - pos));
            if (nl < doc.text.size()) cleaned += '\n';
            pos = nl + 1;
        }
        doc.text = normalize_text(cleaned);
        break;
    }
    case Format::markdown: {
        auto ex = extract_markdown(raw);
        doc.title = ex.title;
        doc.text = normalize_text(ex.text);
        break;
    }
    case Format::pdf_text:
        doc.text = normalize_text(extract_pdf_text(raw));
        break;
    case Format::plain:
        doc.text = normalize_text(raw);
        break;
    }
    if (doc.text.empty()) {
        throw Error(ErrorCode::EmptyDocument, "no extractable text in " + std::string(source_uri));
    }
    doc.token_count = count_whitespace_tokens(doc.text);
    return doc;
}

Document llm_clean(const Document& doc, backends::ChatBackend& backend, std::uint64_t seed) {
    auto request = backends::make_request("clean", {{"content_chunk", doc.text}}, seed,
                                          json{{"content", doc.text}});
    std::string cleaned = backend.chat(request);
    Document out = doc;
    out.text = normalize_text(cleaned);
    if (out.text.empty()) {
        throw Error(ErrorCode::EmptyDocument, "cleaning removed all text from " + doc.doc_id);
    }
    out.token_count = count_whitespace_tokens(out.text);
    out.llm_cleaned = true;
    return out;
}

std::vector<SentenceSpan> split_sentences(std::string_view text) {
    std::vector<SentenceSpan> spans;
    const std::size_t n = text.size();
    auto skip_ws = [&](std::size_t i) {
        while (i < n && is_space(text[i])) ++i;
        return i;
    };
    auto emit = [&](std::size_t b, std::size_t e) {
        while (e > b && is_space(text[e - 1])) --e;
        if (e > b) spans.push_back({"", {b, e}});
    };

    std::size_t start = skip_ws(0);
    std::size_t i = start;
    while (i < n) {
        char c = text[i];
        if (is_terminator(c)) {
            std::size_t j = i;
            while (j < n && is_terminator(text[j])) ++j;
            const bool single_dot = (c == '.' && j == i + 1);
            while (j < n && is_closer(text[j])) ++j;
            if (j >= n) {
                emit(start, n);
                start = n;
                break;
            }
            if (is_space(text[j])) {
                std::size_t k = skip_ws(j);
                if (k >= n) {
                    emit(start, j);
                    start = n;
                    break;
                }
                std::size_t first = k;
                while (first < n && (text[first] == '"' || text[first] == '\'' || text[first] == '(')) ++first;
                if (first < n && is_upper_ascii(text[first]) && !(single_dot && is_abbreviation_before(text, i))) {
                    emit(start, j);
                    start = k;
                    i = k;
                    continue;
                }
            }
            i = j;
            continue;
        }
        if (c == '\n') {
            std::size_t k = i + 1;
            while (k < n && (text[k] == ' ' || text[k] == '\t')) ++k;
            if (k < n && text[k] == '\n') {
                emit(start, i);
                start = skip_ws(k);
                i = start;
                continue;
            }
        }
        ++i;
    }
    if (start < n) emit(start, n);
    return spans;
}

std::vector<Chunk> chunk(const Document& doc, const ChunkingConfig& config) {
    if (config.size_tokens == 0) {
        throw Error(ErrorCode::InvalidConfig, "size_tokens must be positive");
    }
    if (config.overlap_tokens >= config.size_tokens) {
        throw Error(ErrorCode::InvalidConfig, "overlap_tokens must be smaller than size_tokens");
    }
    const std::string& text = doc.text;
    const auto tokens = whitespace_tokens(text);
    const std::size_t n = tokens.size();
    const std::size_t size = config.size_tokens;
    const std::size_t overlap = config.overlap_tokens;

    std::vector<bool> sentence_start(n + 1, false);
    {
        std::set<std::size_t> starts;
        for (const auto& s : split_sentences(text)) starts.insert(s.range.begin);
        for (std::size_t t = 0; t < n; ++t) sentence_start[t] = starts.contains(tokens[t].begin);
    }

    std::vector<Chunk> out;
    auto emit = [&](std::size_t first_tok, std::size_t end_tok, bool last) {
        Chunk c;
        c.doc_id = doc.doc_id;
        c.chunk_id = doc.doc_id + "#" + std::to_string(out.size());
        c.range.begin = out.empty() ? 0 : tokens[first_tok].begin;
        c.range.end = last ? text.size() : tokens[end_tok].begin;
        c.text = text.substr(c.range.begin, c.range.size());
        c.sentences = split_sentences(c.text);
        for (std::size_t j = 0; j < c.sentences.size(); ++j) {
            c.sentences[j].sent_id = c.chunk_id + "@" + std::to_string(j);
        }
        out.push_back(std::move(c));
    };

    std::size_t s = 0;
    for (;;) {
        const std::size_t e = s + size;
        if (e >= n) {
            emit(s, n, true);
            break;
        }
        // Snap the cut back to a sentence start inside the trailing overlap
        // window, keeping the next start strictly ahead of this one.
        std::size_t cut = e;
        const std::size_t lo = std::max(e - overlap, s + overlap);
        for (std::size_t b = e; b > lo; --b) {
            if (sentence_start[b]) {
                cut = b;
                break;
            }
        }
        emit(s, cut, false);
        s = cut - overlap;
    }
    return out;
}

ChunkIndex::ChunkIndex(std::vector<Chunk> chunks) : chunks_(std::move(chunks)) {
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        auto [it, inserted] = by_id_.emplace(chunks_[i].chunk_id, i);
        if (!inserted) {
            throw Error(ErrorCode::DuplicateId, "duplicate chunk_id " + chunks_[i].chunk_id);
        }
    }
}

const Chunk* ChunkIndex::find(std::string_view chunk_id) const {
    auto it = by_id_.find(chunk_id);
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

const SentenceSpan* ChunkIndex::find_sentence(std::string_view chunk_id, std::string_view sent_id) const {
    const Chunk* c = find(chunk_id);
    if (!c) return nullptr;
    for (const auto& s : c->sentences) {
        if (s.sent_id == sent_id) return &s;
    }
    return nullptr;
}

std::optional<std::string_view> ChunkIndex::sentence_text(std::string_view chunk_id,
                                                          std::string_view sent_id) const {
    const Chunk* c = find(chunk_id);
    if (!c) return std::nullopt;
    for (const auto& s : c->sentences) {
        if (s.sent_id == sent_id) return c->sentence_text(s);
    }
    return std::nullopt;
}

json to_json(const Document& doc) {
    json j = {{"doc_id", doc.doc_id}, {"source_uri", doc.source_uri}, {"title", doc.title}, {"text", doc.text}};
    if (doc.llm_cleaned) j["llm_cleaned"] = true;
    return j;
}

Document document_from_json(const json& j) {
    try {
        Document d;
        d.doc_id = j.at("doc_id").get<std::string>();
        d.source_uri = j.value("source_uri", "");
        d.title = j.value("title", "");
        d.text = j.at("text").get<std::string>();
        d.llm_cleaned = j.value("llm_cleaned", false);
        d.token_count = count_whitespace_tokens(d.text);
        return d;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("document record: ") + e.what());
    }
}

json to_json(const Chunk& c) {
    json sentences = json::array();
    for (const auto& s : c.sentences) {
        sentences.push_back({{"sent_id", s.sent_id}, {"char_range", {s.range.begin, s.range.end}}});
    }
    return {{"chunk_id", c.chunk_id},
            {"doc_id", c.doc_id},
            {"char_range", {c.range.begin, c.range.end}},
            {"text", c.text},
            {"sentences", sentences}};
}

Chunk chunk_from_json(const json& j) {
    try {
        Chunk c;
        c.chunk_id = j.at("chunk_id").get<std::string>();
        c.doc_id = j.at("doc_id").get<std::string>();
        c.range = {j.at("char_range").at(0).get<std::size_t>(), j.at("char_range").at(1).get<std::size_t>()};
        c.text = j.at("text").get<std::string>();
        for (const auto& s : j.at("sentences")) {
            SentenceSpan span{s.at("sent_id").get<std::string>(),
                              {s.at("char_range").at(0).get<std::size_t>(), s.at("char_range").at(1).get<std::size_t>()}};
            if (span.range.end > c.text.size() || span.range.begin >= span.range.end) {
                throw Error(ErrorCode::ParseError, "sentence range out of bounds in " + c.chunk_id);
            }
            c.sentences.push_back(std::move(span));
        }
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("chunk record: ") + e.what());
    }
}

std::string corpus_hash(const std::vector<Chunk>& chunks) {
    std::string canonical;
    for (const auto& c : chunks) {
        canonical += to_json(c).dump();
        canonical += '\n';
    }
    return sha256_hex(canonical);
}

namespace {
bool is_meta(const json& row) { return row.is_object() && row.value("type", "") == "meta"; }
} // namespace

std::vector<Chunk> load_chunks(const std::filesystem::path& path) {
    std::vector<Chunk> out;
    for (const auto& row : read_jsonl(path)) {
        if (!is_meta(row)) out.push_back(chunk_from_json(row));
    }
    return out;
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
    std::vector<Document> out;
    std::set<std::string> seen;
    for (const auto& row : read_jsonl(path)) {
        if (is_meta(row)) continue;
        auto d = document_from_json(row);
        if (!seen.insert(d.doc_id).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate doc_id " + d.doc_id + " in " + path.string());
        }
        out.push_back(std::move(d));
    }
    return out;
}

} // namespace dragon::corpus
