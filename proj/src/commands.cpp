#include "dragon/commands.hpp"

#include "dragon/datamodel.hpp"
#include "dragon/error.hpp"
#include "dragon/graph.hpp"
#include "dragon/metrics.hpp"
#include "dragon/ragengines.hpp"
#include "dragon/retrieval.hpp"
#include "dragon/synthesis.hpp"

#include <spdlog/spdlog.h>

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <iostream>
#include <set>

namespace dragon::commands {

namespace fs = std::filesystem;

config::RunConfig resolve_config(const Options& options) {
    config::RunConfig cfg;
    if (options.config_file) config::load_yaml(cfg, *options.config_file);
    config::apply_env(cfg);
    if (!options.corpus.empty()) cfg.corpus_paths = options.corpus;
    if (options.seed) cfg.seed = *options.seed;
    if (options.k) cfg.k = *options.k;
    if (options.n_neg) cfg.n_neg = *options.n_neg;
    if (options.max_iter) cfg.max_iter = *options.max_iter;
    if (options.rubric_points) cfg.rubric_points = true;
    if (options.engine) {
        auto e = rag::parse_engine(*options.engine);
        if (!e) throw Error(ErrorCode::InvalidConfig, "--engine must be one of vanilla, rr, flare, react");
        cfg.engine = *e;
    }
    if (options.backend) {
        auto b = config::parse_backend_mode(*options.backend);
        if (!b) throw Error(ErrorCode::InvalidConfig, "--backend must be http or mock");
        cfg.backend = *b;
    }
    config::finalize(cfg);
    backends::set_max_in_flight(cfg.max_in_flight);
    return cfg;
}

// ---------------------------------------------------------------------------
// Plumbing
// ---------------------------------------------------------------------------

int guarded(std::string_view command, const std::function<int()>& fn) {
    auto report = [&](std::string_view code, std::string_view message, int exit_code) {
        json err = {{"command", command}, {"error", code}, {"message", message}, {"exit_code", exit_code}};
        std::cerr << err.dump() << std::endl;
        return exit_code;
    };
    try {
        return fn();
    } catch (const Error& e) {
        int code = kExitConfig;
        switch (e.code()) {
        case ErrorCode::DanglingClue:
        case ErrorCode::UnknownQuery:
        case ErrorCode::MissingRubric:
        case ErrorCode::InsufficientCorpus:
        case ErrorCode::TooManyHops:
            code = kExitValidation;
            break;
        default:
            break;
        }
        return report(to_string(e.code()), e.what(), code);
    } catch (const fs::filesystem_error& e) {
        return report("IoError", e.what(), kExitConfig);
    } catch (const json::exception& e) {
        return report("ParseError", e.what(), kExitConfig);
    } catch (const std::exception& e) {
        return report("InternalError", e.what(), kExitConfig);
    }
}

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    for (int attempt = 0; attempt < 2; ++attempt) {
        int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd >= 0) {
            auto pid = std::to_string(::getpid());
            [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
            ::close(fd);
            return;
        }
        if (errno != EEXIST) {
            throw Error(ErrorCode::IoError, "cannot create lock " + path_.string() + ": " + std::strerror(errno));
        }
        std::string holder;
        try {
            holder = trim(read_file(path_));
        } catch (const Error&) {
        }
        long pid = 0;
        try {
            pid = std::stol(holder);
        } catch (const std::exception&) {
        }
        if (pid > 0 && (::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM)) {
            throw Error(ErrorCode::IoError, "run directory " + dir.string() + " is locked by process " + holder);
        }
        spdlog::warn("removing stale lock left by process {}", holder.empty() ? "?" : holder);
        fs::remove(path_);
    }
    throw Error(ErrorCode::IoError, "could not acquire lock " + path_.string());
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

namespace {

json provenance(const config::RunConfig& cfg, const std::string& corpus_hash) {
    return {{"config_hash", config::config_hash(cfg)}, {"corpus_hash", corpus_hash}, {"tool_version", DRAGON_VERSION}};
}

fs::path chunks_path(const Options& o) { return o.chunks ? *o.chunks : RunPaths{o.out}.chunks(); }
fs::path dataset_path(const Options& o) { return o.dataset ? *o.dataset : RunPaths{o.out}.dataset(); }

std::vector<corpus::Chunk> load_corpus(const Options& o) {
    auto path = chunks_path(o);
    if (!fs::exists(path)) {
        throw Error(ErrorCode::IoError, "chunk file " + path.string() + " not found (run ingest first)");
    }
    auto chunks = corpus::load_chunks(path);
    if (chunks.empty()) throw Error(ErrorCode::InsufficientCorpus, path.string() + " contains no chunks");
    return chunks;
}

datamodel::Dataset load_dataset(const Options& o) {
    auto path = dataset_path(o);
    if (!fs::exists(path)) throw Error(ErrorCode::IoError, "dataset " + path.string() + " not found");
    return datamodel::read_dataset(path);
}

std::unique_ptr<backends::ChatBackend> make_chat(const config::RunConfig& cfg, const Options& o) {
    if (o.script) {
        if (cfg.backend != config::BackendMode::mock) {
            throw Error(ErrorCode::InvalidConfig, "--script needs --backend mock");
        }
        return std::make_unique<backends::ScriptedChatBackend>(backends::ScriptedChatBackend::read_script(*o.script));
    }
    return backends::make_chat_backend(cfg.chat);
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::optional<corpus::Format> format_for(const fs::path& p) {
    const auto name = to_lower_ascii(p.filename().string());
    auto ends = [&](std::string_view suffix) {
        return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends(".html") || ends(".htm")) return corpus::Format::html;
    if (ends(".md") || ends(".markdown")) return corpus::Format::markdown;
    if (ends(".pdf.txt")) return corpus::Format::pdf_text;
    if (ends(".txt")) return corpus::Format::plain;
    return std::nullopt;
}

struct Source {
    fs::path path;
    std::string uri;
};

std::vector<Source> discover(const std::vector<std::string>& inputs) {
    std::vector<Source> out;
    for (const auto& in : inputs) {
        fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<Source> found;
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (!e.is_regular_file()) continue;
                auto rel = fs::relative(e.path(), p);
                if (rel.filename().string().starts_with(".")) continue;
                if (!format_for(e.path()) && e.path().extension() != ".jsonl") continue;
                found.push_back({e.path(), rel.generic_string()});
            }
            std::sort(found.begin(), found.end(), [](const Source& a, const Source& b) { return a.uri < b.uri; });
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(p)) {
            out.push_back({p, p.filename().generic_string()});
        } else {
            throw Error(ErrorCode::IoError, "corpus input " + in + " does not exist");
        }
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

int cmd_ingest(const Options& options) {
    auto cfg = resolve_config(options);
    if (cfg.corpus_paths.empty()) throw Error(ErrorCode::InvalidConfig, "no corpus given (--corpus or corpus.paths)");
    RunLock lock(options.out);
    const RunPaths paths{options.out};

    std::vector<corpus::Document> docs;
    std::size_t skipped = 0;
    for (const auto& src : discover(cfg.corpus_paths)) {
        if (src.path.extension() == ".jsonl") {
            for (auto d : corpus::load_documents(src.path)) {
                d.text = corpus::normalize_text(d.text);
                if (d.text.empty()) throw Error(ErrorCode::EmptyDocument, d.doc_id + " has no text");
                if (d.doc_id.empty()) d.doc_id = corpus::make_doc_id(d.source_uri);
                d.token_count = count_whitespace_tokens(d.text);
                docs.push_back(std::move(d));
            }
            continue;
        }
        try {
            docs.push_back(corpus::ingest(read_file(src.path), *format_for(src.path), src.uri));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyDocument) throw;
            spdlog::warn("skipping {}: {}", src.uri, e.what());
            ++skipped;
        }
    }
    std::set<std::string> ids;
    for (const auto& d : docs) {
        if (!ids.insert(d.doc_id).second) throw Error(ErrorCode::DuplicateId, "duplicate doc_id " + d.doc_id);
    }
    if (docs.empty()) throw Error(ErrorCode::EmptyDocument, "no document in the corpus has extractable text");

    if (cfg.llm_clean) {
        auto chat = make_chat(cfg, options);
        docs = parallel_map(docs.size(), cfg.concurrency, [&](std::size_t i) {
            return corpus::llm_clean(docs[i], *chat, derive_seed(cfg.seed, "clean/" + docs[i].doc_id));
        });
    }

    std::vector<corpus::Chunk> chunks;
    for (const auto& d : docs) {
        auto cs = corpus::chunk(d, cfg.chunking);
        chunks.insert(chunks.end(), cs.begin(), cs.end());
    }
    const auto chash = corpus::corpus_hash(chunks);
    auto meta = provenance(cfg, chash);
    meta["type"] = "meta";

    std::vector<json> doc_rows{meta};
    doc_rows.back()["kind"] = "documents";
    doc_rows.back()["count"] = docs.size();
    for (const auto& d : docs) doc_rows.push_back(corpus::to_json(d));
    std::vector<json> chunk_rows{meta};
    chunk_rows.back()["kind"] = "chunks";
    chunk_rows.back()["count"] = chunks.size();
    for (const auto& c : chunks) chunk_rows.push_back(corpus::to_json(c));
    write_jsonl(paths.documents(), doc_rows);
    write_jsonl(paths.chunks(), chunk_rows);

    std::cout << json{{"command", "ingest"},
                      {"documents", docs.size()},
                      {"skipped", skipped},
                      {"chunks", chunks.size()},
                      {"corpus_hash", chash},
                      {"out", paths.chunks().string()}}
                     .dump()
              << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// synthesize
// ---------------------------------------------------------------------------

int cmd_synthesize(const Options& options) {
    auto cfg = resolve_config(options);
    RunLock lock(options.out);
    const RunPaths paths{options.out};
    const corpus::ChunkIndex index(load_corpus(options));
    auto chat = make_chat(cfg, options);

    auto result = synthesis::synthesize(index, *chat, cfg.synthesis, cfg.seed);
    const auto prov = provenance(cfg, corpus::corpus_hash(index.chunks()));
    result.dataset.meta.update(prov);
    result.dataset.meta["kind"] = "dataset";
    result.dataset.meta["count"] = result.dataset.records.size();
    datamodel::write_dataset(paths.dataset(), result.dataset);

    auto manifest = result.manifest;
    manifest.update(prov);
    manifest["dataset_hash"] = sha256_hex(read_file(paths.dataset()));
    manifest["dropped_reasons"] = result.dropped;
    write_json(paths.manifest(), manifest);
    write_jsonl(paths.graph(), graph::graph_dump(result.graph));

    std::cout << json{{"command", "synthesize"},
                      {"records", result.dataset.records.size()},
                      {"dropped", result.dropped.size()},
                      {"counts_per_hop", manifest["counts_per_hop"]},
                      {"out", paths.dataset().string()}}
                     .dump()
              << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// export-triplets
// ---------------------------------------------------------------------------

namespace {

/// Returns the number of violations found (logged), so callers can refuse
/// to export an invalid dataset.
std::size_t count_invalid(const datamodel::Dataset& ds, const corpus::ChunkIndex& index) {
    std::size_t bad = 0;
    for (const auto& r : ds.records) {
        auto report = datamodel::validate(r, index);
        if (!report.ok()) {
            ++bad;
            spdlog::error("{} is invalid: {}", r.query_id, report.to_json().dump());
        }
    }
    return bad;
}

} // namespace

int cmd_export_triplets(const Options& options) {
    auto cfg = resolve_config(options);
    RunLock lock(options.out);
    const RunPaths paths{options.out};
    const corpus::ChunkIndex index(load_corpus(options));
    const auto dataset = load_dataset(options);
    if (auto bad = count_invalid(dataset, index); bad > 0) {
        json err = {{"command", "export-triplets"},
                    {"error", "ValidationFailed"},
                    {"message", std::to_string(bad) + " record(s) fail validation"},
                    {"exit_code", kExitValidation}};
        std::cerr << err.dump() << std::endl;
        return kExitValidation;
    }
    auto embed = backends::make_embed_backend(cfg.embed);
    const auto vindex = retrieval::build_index(index.chunks(), *embed);
    auto file = retrieval::export_triplets(dataset.records, vindex, cfg.n_neg, *embed);
    file.header.update(provenance(cfg, corpus::corpus_hash(index.chunks())));
    file.header["kind"] = "triplets";
    file.header["dataset_hash"] = sha256_hex(read_file(dataset_path(options)));
    write_file(paths.triplets(), retrieval::encode_triplets(file, index));
    std::cout << json{{"command", "export-triplets"},
                      {"triplets", file.triplets.size()},
                      {"records", dataset.records.size()},
                      {"out", paths.triplets().string()}}
                     .dump()
              << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-retrieval
// ---------------------------------------------------------------------------

int cmd_eval_retrieval(const Options& options) {
    auto cfg = resolve_config(options);
    RunLock lock(options.out);
    const RunPaths paths{options.out};
    const auto dataset = load_dataset(options);

    metrics::RetrievalRun run;
    std::string corpus_hash = dataset.meta.value("corpus_hash", "");
    std::string source;
    if (options.run) {
        source = options.run->string();
        for (const auto& row : read_jsonl(*options.run)) {
            if (row.value("type", "") == "meta") continue;
            run.push_back({row.at("query_id").get<std::string>(), row.at("chunk_ids").get<std::vector<std::string>>()});
        }
    } else {
        source = "search";
        const corpus::ChunkIndex index(load_corpus(options));
        corpus_hash = corpus::corpus_hash(index.chunks());
        auto embed = backends::make_embed_backend(cfg.embed);
        const auto vindex = retrieval::build_index(index.chunks(), *embed);
        std::vector<std::string> queries;
        for (const auto& r : dataset.records) queries.push_back(r.query);
        const auto vectors = queries.empty() ? std::vector<backends::Vector>{} : embed->embed(queries);
        std::vector<json> rows;
        for (std::size_t i = 0; i < dataset.records.size(); ++i) {
            metrics::RankedList list{dataset.records[i].query_id, {}};
            json scores = json::array();
            for (const auto& h : retrieval::search_vector(vindex, vectors[i], cfg.k)) {
                list.chunk_ids.push_back(h.chunk_id);
                scores.push_back(h.score);
            }
            rows.push_back({{"query_id", list.query_id}, {"chunk_ids", list.chunk_ids}, {"scores", scores}});
            run.push_back(std::move(list));
        }
        write_jsonl(paths.reports() / "retrieval_run.jsonl", rows);
    }
    auto report = metrics::precision_at_k(run, dataset.records, cfg.k);
    auto j = report.to_json();
    j["source"] = source;
    j.update(provenance(cfg, corpus_hash));
    const auto out = paths.reports() / ("precision_at_" + std::to_string(cfg.k) + ".json");
    write_json(out, j);
    std::cout << json{{"command", "eval-retrieval"}, {"metric", report.metric}, {"value", report.value},
                      {"queries", report.per_query.size()}, {"out", out.string()}}
                     .dump()
              << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-rag
// ---------------------------------------------------------------------------

int cmd_eval_rag(const Options& options) {
    auto cfg = resolve_config(options);
    RunLock lock(options.out);
    const RunPaths paths{options.out};
    const corpus::ChunkIndex index(load_corpus(options));
    const auto dataset = load_dataset(options);
    auto embed = backends::make_embed_backend(cfg.embed);
    auto chat = make_chat(cfg, options);
    const auto vindex = retrieval::build_index(index.chunks(), *embed);
    const rag::Retriever retriever(vindex, index, *embed);

    rag::EngineOptions eo;
    eo.k = cfg.k;
    eo.max_iter = cfg.max_iter;
    eo.timing = options.timing;
    eo.seed = cfg.seed;
    // Scripted replies are consumed in order, so a script forces sequential runs.
    const std::size_t workers = options.script ? 1 : cfg.concurrency;
    const auto& records = dataset.records;
    auto traces = parallel_map(records.size(), workers, [&](std::size_t i) {
        return rag::run_engine(cfg.engine, records[i].query_id, records[i].query, retriever, *chat, eo);
    });

    const std::string engine(rag::to_string(cfg.engine));
    std::vector<json> trace_rows;
    std::vector<json> answer_rows;
    metrics::RetrievalRun run;
    double retrieves = 0;
    double calls = 0;
    for (const auto& t : traces) {
        trace_rows.push_back(t.to_json());
        answer_rows.push_back({{"query_id", t.query_id}, {"answer", t.final_answer}});
        run.push_back({t.query_id, t.retrieved_all});
        retrieves += static_cast<double>(t.retrieve_calls);
        calls += static_cast<double>(t.chat_calls);
    }
    write_jsonl(paths.traces() / (engine + ".jsonl"), trace_rows);
    write_jsonl(paths.reports() / ("answers_" + engine + ".jsonl"), answer_rows);
    const double n = traces.empty() ? 1.0 : static_cast<double>(traces.size());
    auto precision = metrics::precision_at_k(run, records, cfg.k);
    json report = {{"engine", engine},
                   {"queries", traces.size()},
                   {"max_iter", cfg.max_iter},
                   {"mean_retrieve_calls", retrieves / n},
                   {"mean_chat_calls", calls / n},
                   {"precision_retrieved", precision.to_json()}};
    report.update(provenance(cfg, corpus::corpus_hash(index.chunks())));
    const auto out = paths.reports() / ("rag_" + engine + ".json");
    write_json(out, report);
    std::cout << json{{"command", "eval-rag"}, {"engine", engine}, {"queries", traces.size()}, {"out", out.string()}}
                     .dump()
              << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

int cmd_score(const Options& options) {
    auto cfg = resolve_config(options);
    RunLock lock(options.out);
    const RunPaths paths{options.out};
    const corpus::ChunkIndex index(load_corpus(options));
    const auto dataset = load_dataset(options);
    const std::string engine(rag::to_string(cfg.engine));
    const fs::path answers_path = options.answers ? *options.answers : paths.reports() / ("answers_" + engine + ".jsonl");
    if (!fs::exists(answers_path)) {
        throw Error(ErrorCode::IoError, "answers file " + answers_path.string() + " not found (run eval-rag first)");
    }
    std::vector<metrics::GeneratedAnswer> answers;
    for (const auto& row : read_jsonl(answers_path)) {
        if (row.value("type", "") == "meta") continue;
        answers.push_back({row.at("query_id").get<std::string>(), row.at("answer").get<std::string>()});
    }
    std::string label = answers_path.stem().string();
    if (label.starts_with("answers_")) label = label.substr(8);

    // Earlier verdicts for identical inputs are reused.
    const auto verdict_path = paths.reports() / ("verdicts_" + label + ".jsonl");
    metrics::VerdictCache cache;
    if (fs::exists(verdict_path)) {
        for (const auto& row : read_jsonl(verdict_path)) {
            if (row.contains("key") && row.contains("verdict")) cache.put(row["key"], row["verdict"].get<bool>());
        }
    }
    auto judge = make_chat(cfg, options);
    metrics::CsgOptions co;
    co.rubric_points = cfg.rubric_points;
    co.concurrency = options.script ? 1 : cfg.concurrency;
    co.cache = &cache;
    auto csg = metrics::csg(answers, dataset.records, index, *judge, co);
    auto ljr = metrics::lj(answers, dataset.records, *judge, co.concurrency);

    auto rows = csg.verdict_rows;
    rows.insert(rows.end(), ljr.verdict_rows.begin(), ljr.verdict_rows.end());
    write_jsonl(verdict_path, rows);
    const auto prov = provenance(cfg, corpus::corpus_hash(index.chunks()));
    json out_reports = json::array();
    auto emit = [&](metrics::Report r, const std::string& file) {
        r.verdict_file = verdict_path.filename().string();
        auto j = r.to_json();
        j.update(prov);
        write_json(paths.reports() / file, j);
        out_reports.push_back({{"metric", r.metric}, {"value", r.value}});
    };
    emit(csg.sentence, "csg_" + label + ".json");
    if (csg.rubric) emit(*csg.rubric, "csg_rubric_points_" + label + ".json");
    emit(ljr.report, "lj_" + label + ".json");
    std::cout << json{{"command", "score"}, {"reports", out_reports}, {"cached_verdicts", cache.hits()}}.dump()
              << std::endl;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int cmd_validate(const Options& options) {
    const RunPaths paths{options.out};
    const auto chunk_file = chunks_path(options);
    const corpus::ChunkIndex index(load_corpus(options));
    const auto dataset = load_dataset(options);
    const auto chash = corpus::corpus_hash(index.chunks());

    json violations = json::array();
    std::set<std::string> ids;
    std::map<std::string, const datamodel::QARecord*> by_id;
    for (const auto& r : dataset.records) {
        if (!ids.insert(r.query_id).second) {
            violations.push_back({{"query_id", r.query_id}, {"kind", "DuplicateQueryId"}, {"detail", ""}});
        }
        by_id[r.query_id] = &r;
        for (const auto& e : datamodel::validate(r, index).entries) {
            violations.push_back({{"query_id", r.query_id}, {"kind", datamodel::to_string(e.kind)}, {"detail", e.detail}});
        }
    }

    json checks = json::array();
    auto check = [&](const std::string& artifact, const std::string& what, bool ok, const std::string& detail) {
        checks.push_back({{"artifact", artifact}, {"check", what}, {"ok", ok}, {"detail", detail}});
    };
    auto compare = [&](const std::string& artifact, const std::string& what, const json& meta, const char* key,
                       const std::string& expected) {
        if (!meta.contains(key)) {
            check(artifact, what, false, std::string("missing ") + key);
            return;
        }
        const auto got = meta[key].get<std::string>();
        check(artifact, what, got == expected, got == expected ? "" : "recorded " + got + ", computed " + expected);
    };

    // The chunk file's own header must still describe its contents.
    for (const auto& row : read_jsonl(chunk_file)) {
        if (row.value("type", "") == "meta") compare("chunks", "corpus_hash", row, "corpus_hash", chash);
        break;
    }
    compare("dataset", "corpus_hash", dataset.meta, "corpus_hash", chash);

    const auto ds_file = dataset_path(options);
    const auto ds_hash = sha256_hex(read_file(ds_file));
    if (!options.dataset && fs::exists(paths.manifest())) {
        const auto manifest = json::parse(read_file(paths.manifest()));
        compare("manifest", "corpus_hash", manifest, "corpus_hash", chash);
        compare("manifest", "dataset_hash", manifest, "dataset_hash", ds_hash);
        if (dataset.meta.contains("config_hash")) {
            compare("manifest", "config_hash", manifest, "config_hash", dataset.meta["config_hash"].get<std::string>());
        }
    }
    if (!options.dataset && fs::exists(paths.triplets())) {
        auto rows = read_jsonl(paths.triplets());
        if (rows.empty() || rows.front().value("type", "") != "meta") {
            check("triplets", "header", false, "missing meta header");
        } else {
            compare("triplets", "corpus_hash", rows.front(), "corpus_hash", chash);
            compare("triplets", "dataset_hash", rows.front(), "dataset_hash", ds_hash);
            std::size_t bad = 0;
            std::string first_bad;
            for (std::size_t i = 1; i < rows.size(); ++i) {
                const auto qid = rows[i].value("query_id", "");
                auto it = by_id.find(qid);
                bool ok = it != by_id.end();
                if (ok) {
                    const auto gold = datamodel::derive_gold_docs(*it->second);
                    ok = gold.contains(rows[i].value("positive_id", ""));
                    for (const auto& n : rows[i].value("negative_ids", std::vector<std::string>{})) {
                        ok = ok && !gold.contains(n) && index.contains(n);
                    }
                }
                if (!ok && bad++ == 0) first_bad = "row " + std::to_string(i) + " (" + qid + ")";
            }
            check("triplets", "labels", bad == 0, bad == 0 ? "" : std::to_string(bad) + " bad rows, first " + first_bad);
        }
    }

    bool ok = violations.empty();
    for (const auto& c : checks) ok = ok && c["ok"].get<bool>();
    json report = {{"ok", ok},
                   {"records", dataset.records.size()},
                   {"violations", violations},
                   {"artifact_checks", checks},
                   {"tool_version", DRAGON_VERSION}};
    if (options.report) write_json(*options.report, report);
    std::cout << report.dump() << std::endl;
    return ok ? kExitOk : kExitValidation;
}

} // namespace dragon::commands
