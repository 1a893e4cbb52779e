#pragma once

#include "dragon/config.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dragon::commands {

/// Command-line inputs. Unset optionals fall back to env, then the config
/// file, then built-in defaults.
struct Options {
    std::optional<std::filesystem::path> config_file;
    std::vector<std::string> corpus;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
    std::optional<std::size_t> n_neg;
    std::optional<std::string> engine;
    std::optional<int> max_iter;
    std::optional<std::string> backend;
    std::filesystem::path out = "runs/default";
    bool timing = false;
    bool rubric_points = false;
    std::optional<std::filesystem::path> script;   // scripted chat replies
    std::optional<std::filesystem::path> dataset;  // overrides <out>/dataset.jsonl
    std::optional<std::filesystem::path> chunks;   // overrides <out>/corpus/chunks.jsonl
    std::optional<std::filesystem::path> run;      // eval-retrieval: score this ranked list file
    std::optional<std::filesystem::path> answers;  // score: generated answers file
    std::optional<std::filesystem::path> report;   // validate: also write the report here
};

/// flags > env > file > defaults.
config::RunConfig resolve_config(const Options& options);

/// Run-directory layout.
struct RunPaths {
    std::filesystem::path root;
    std::filesystem::path documents() const { return root / "corpus" / "documents.jsonl"; }
    std::filesystem::path chunks() const { return root / "corpus" / "chunks.jsonl"; }
    std::filesystem::path dataset() const { return root / "dataset.jsonl"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }
    std::filesystem::path graph() const { return root / "graph.jsonl"; }
    std::filesystem::path triplets() const { return root / "triplets.jsonl"; }
    std::filesystem::path traces() const { return root / "traces"; }
    std::filesystem::path reports() const { return root / "reports"; }
};

int cmd_ingest(const Options& options);
int cmd_synthesize(const Options& options);
int cmd_export_triplets(const Options& options);
int cmd_eval_retrieval(const Options& options);
int cmd_eval_rag(const Options& options);
int cmd_score(const Options& options);
int cmd_validate(const Options& options);

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitConfig = 2;

/// Runs `fn`, converting exceptions into a structured stderr line and the
/// matching exit code.
int guarded(std::string_view command, const std::function<int()>& fn);

/// Exclusive per-run-directory lock (<out>/.lock). A lock left by a dead
/// process is taken over.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

} // namespace dragon::commands
