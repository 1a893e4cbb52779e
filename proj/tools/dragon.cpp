// dragon: corpus -> synthetic RAG dataset -> triplets / evaluation.

#include "dragon/commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <functional>
#include <map>

using dragon::commands::Options;

namespace {

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_file, "YAML run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--backend", o.backend, "chat/embedding backends")->check(CLI::IsMember({"http", "mock"}));
    cmd->add_option("--out", o.out, "run directory")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("dragon");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);

    CLI::App app{"Synthesize RAG datasets from a document corpus and evaluate retrievers and RAG engines."};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(DRAGON_VERSION));
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "log progress to stderr");

    Options o;
    std::map<CLI::App*, std::pair<std::string, std::function<int(const Options&)>>> commands;
    auto sub = [&](const char* name, const char* help, int (*fn)(const Options&)) {
        auto* cmd = app.add_subcommand(name, help);
        add_common(cmd, o);
        commands[cmd] = {name, fn};
        return cmd;
    };

    auto* ingest = sub("ingest", "normalize and chunk raw documents", dragon::commands::cmd_ingest);
    ingest->add_option("--corpus", o.corpus, "files or directories (html, md, txt, pdf.txt, documents jsonl)");

    auto* synth = sub("synthesize", "generate the QA dataset from the chunked corpus", dragon::commands::cmd_synthesize);
    synth->add_option("--script", o.script, "scripted chat replies (JSONL of {tag, reply})")->check(CLI::ExistingFile);

    auto* trip = sub("export-triplets", "mine hard negatives and write training triplets",
                     dragon::commands::cmd_export_triplets);
    trip->add_option("--n-neg", o.n_neg, "negatives per triplet");
    trip->add_option("--dataset", o.dataset, "dataset file")->check(CLI::ExistingFile);

    auto* evr = sub("eval-retrieval", "Precision@k of the retriever over the dataset",
                    dragon::commands::cmd_eval_retrieval);
    evr->add_option("--k", o.k, "cutoff");
    evr->add_option("--dataset", o.dataset, "dataset file")->check(CLI::ExistingFile);
    evr->add_option("--run", o.run, "score this ranked-list JSONL instead of searching")->check(CLI::ExistingFile);

    auto* rag = sub("eval-rag", "run a RAG engine over the dataset queries", dragon::commands::cmd_eval_rag);
    rag->add_option("--engine", o.engine, "engine")->check(CLI::IsMember({"vanilla", "rr", "flare", "react"}));
    rag->add_option("--max-iter", o.max_iter, "iteration cap for flare/react");
    rag->add_option("--k", o.k, "vanilla retrieval depth");
    rag->add_option("--dataset", o.dataset, "dataset file")->check(CLI::ExistingFile);
    rag->add_option("--script", o.script, "scripted chat replies")->check(CLI::ExistingFile);
    rag->add_flag("--timing", o.timing, "record wall-clock time in traces");

    auto* score = sub("score", "CSG and LJ of generated answers", dragon::commands::cmd_score);
    score->add_option("--engine", o.engine, "engine whose answers to score")
        ->check(CLI::IsMember({"vanilla", "rr", "flare", "react"}));
    score->add_option("--answers", o.answers, "answers JSONL of {query_id, answer}")->check(CLI::ExistingFile);
    score->add_option("--dataset", o.dataset, "dataset file")->check(CLI::ExistingFile);
    score->add_option("--script", o.script, "scripted judge replies")->check(CLI::ExistingFile);
    score->add_flag("--rubric-points", o.rubric_points, "also report the rubric-points variant");

    auto* val = sub("validate", "check dataset invariants and artifact hashes", dragon::commands::cmd_validate);
    val->add_option("--dataset", o.dataset, "dataset file")->check(CLI::ExistingFile);
    val->add_option("--report", o.report, "also write the report to this file");

    for (auto* cmd : {synth, trip, evr, rag, score, val}) {
        cmd->add_option("--chunks", o.chunks, "chunk file")->check(CLI::ExistingFile);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : dragon::commands::kExitConfig;
    }
    if (verbose) spdlog::set_level(spdlog::level::info);

    for (const auto& [cmd, entry] : commands) {
        if (cmd->parsed()) {
            const auto& [name, fn] = entry;
            return dragon::commands::guarded(name, [&] { return fn(o); });
        }
    }
    return dragon::commands::kExitConfig;
}
