#pragma once

#include "dragon/backends.hpp"
#include "dragon/corpus.hpp"
#include "dragon/error.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <map>
#include <string>
#include <vector>

namespace fixtures {

/// Code of the dragon::Error thrown by `fn`, nullopt if it returns normally.
std::optional<dragon::ErrorCode> error_code(const std::function<void()>& fn);

std::filesystem::path path(const std::string& relative);

/// Chunk "<doc>#0" whose text is the sentences joined by single spaces.
dragon::corpus::Chunk make_chunk(const std::string& doc_id, const std::vector<std::string>& sentences);

/// Ingested and chunked copy of the 50-document fixture corpus.
std::vector<dragon::corpus::Chunk> corpus50_chunks();

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs the dragon executable with `args` (shell-quoted here).
CliResult run_cli(const std::vector<std::string>& args);

std::string sha256_file(const std::filesystem::path& p);

/// Returns fixed vectors per exact text; anything else is an error. Lets
/// tests pin scores precisely.
class TableEmbed final : public dragon::backends::EmbedBackend {
public:
    TableEmbed(std::size_t dim, std::map<std::string, dragon::backends::Vector> table)
        : dim_(dim), table_(std::move(table)) {}
    std::vector<dragon::backends::Vector> embed(const std::vector<std::string>& texts) override;
    std::size_t dimension() const override { return dim_; }
    std::string model_name() const override { return "table"; }

private:
    std::size_t dim_;
    std::map<std::string, dragon::backends::Vector> table_;
};

} // namespace fixtures
