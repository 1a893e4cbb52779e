#include "fixtures.hpp"

#include "dragon/error.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sys/wait.h>

namespace fixtures {

std::optional<dragon::ErrorCode> error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const dragon::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

namespace fs = std::filesystem;

fs::path path(const std::string& relative) { return fs::path(DRAGON_FIXTURES) / relative; }

dragon::corpus::Chunk make_chunk(const std::string& doc_id, const std::vector<std::string>& sentences) {
    dragon::corpus::Chunk c;
    c.doc_id = doc_id;
    c.chunk_id = doc_id + "#0";
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i) c.text += ' ';
        const auto begin = c.text.size();
        c.text += sentences[i];
        c.sentences.push_back({c.chunk_id + "@" + std::to_string(i), {begin, c.text.size()}});
    }
    c.range = {0, c.text.size()};
    return c;
}

std::vector<dragon::corpus::Chunk> corpus50_chunks() {
    using dragon::corpus::Format;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path("corpus50"))) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<dragon::corpus::Chunk> out;
    for (const auto& f : files) {
        const std::string name = f.filename().string();
        Format fmt = Format::plain;
        if (name.ends_with(".html")) fmt = Format::html;
        else if (name.ends_with(".md")) fmt = Format::markdown;
        else if (name.ends_with(".pdf.txt")) fmt = Format::pdf_text;
        auto doc = dragon::corpus::ingest(dragon::read_file(f), fmt, "corpus50/" + name);
        for (auto& c : dragon::corpus::chunk(doc, {})) out.push_back(std::move(c));
    }
    return out;
}

TempDir::TempDir() {
    std::random_device rd;
    for (;;) {
        path_ = fs::temp_directory_path() / ("dragon-test-" + std::to_string(rd()));
        if (fs::create_directory(path_)) break;
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace {

std::string quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

} // namespace

CliResult run_cli(const std::vector<std::string>& args) {
    TempDir tmp;
    std::string cmd = quote(DRAGON_CLI);
    for (const auto& a : args) cmd += " " + quote(a);
    const auto out = tmp.path() / "stdout";
    const auto err = tmp.path() / "stderr";
    cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
    CliResult r;
    const int status = std::system(cmd.c_str());
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = fs::exists(out) ? dragon::read_file(out) : "";
    r.err = fs::exists(err) ? dragon::read_file(err) : "";
    return r;
}

std::string sha256_file(const fs::path& p) { return dragon::sha256_hex(dragon::read_file(p)); }

std::vector<dragon::backends::Vector> TableEmbed::embed(const std::vector<std::string>& texts) {
    std::vector<dragon::backends::Vector> out;
    for (const auto& t : texts) {
        auto it = table_.find(t);
        if (it == table_.end()) throw dragon::Error(dragon::ErrorCode::BackendError, "no vector for '" + t + "'");
        out.push_back(it->second);
    }
    return out;
}

} // namespace fixtures
