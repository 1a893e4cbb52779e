// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include "dragon/metrics.hpp"
#include "dragon/ragengines.hpp"
#include "dragon/synthesis.hpp"
#include "dragon/util.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <set>

using namespace dragon;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok) detail = why;
        ok = false;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::set<std::pair<std::string, std::string>> as_pairs(const std::set<datamodel::SentenceRef>& refs) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& r : refs) out.insert({r.chunk_id, r.sent_id});
    return out;
}

std::vector<std::string> ids(const std::vector<retrieval::ScoredChunk>& hits) {
    std::vector<std::string> out;
    for (const auto& h : hits) out.push_back(h.chunk_id);
    return out;
}

std::vector<std::string> ids(const std::vector<oracle::Ranked>& ranking, std::size_t k) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) out.push_back(ranking[i].id);
    return out;
}

// ---------------------------------------------------------------------------

Outcome mapping_oracle() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto chunks = oracle::synthetic_chunks(12, 4);
    const corpus::ChunkIndex corpus(chunks);
    std::mt19937_64 rng(2024);
    std::size_t mutants = 0, caught = 0;
    for (int i = 0; i < 200; ++i) {
        const int hops = 1 + static_cast<int>(rng() % 4);
        const auto rec = oracle::random_record(rng, chunks, hops, "q" + std::to_string(i));
        const auto gold = oracle::gold_docs(rec);
        const auto gold_s = oracle::gold_sentences(rec);
        if (!gold || datamodel::derive_gold_docs(rec) != *gold) o.fail("gold docs differ on " + rec.query_id);
        if (!gold_s || as_pairs(datamodel::derive_gold_sentences(rec)) != *gold_s) {
            o.fail("gold sentences differ on " + rec.query_id);
        }
        if (!datamodel::validate(rec, corpus, {.require_rubric = true}).ok()) o.fail(rec.query_id + " rejected");
        for (auto v : oracle::corruption_classes()) {
            auto bad = rec;
            if (!oracle::corrupt(bad, v, rng)) continue;
            ++mutants;
            bool found = false;
            for (const auto& e : datamodel::validate(bad, corpus, {.require_rubric = true}).entries) {
                found = found || e.kind == v;
            }
            if (found) ++caught;
            else o.fail(rec.query_id + ": " + std::string(datamodel::to_string(v)) + " not flagged");
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= 5.0) o.fail("took " + std::to_string(secs) + " s");
    if (o.ok) {
        o.detail = "200 records, " + std::to_string(caught) + "/" + std::to_string(mutants) + " mutants caught, " +
                   std::to_string(secs) + " s";
    }
    return o;
}

Outcome variant_combinatorics() {
    Outcome o;
    const auto chunks = oracle::synthetic_chunks(8, 3);
    backends::HashChatBackend chat;
    std::mt19937_64 rng(5);
    const std::size_t expected[] = {0, 1, 3, 7, 15};
    std::string counts;
    for (int p = 1; p <= 4; ++p) {
        auto rec = oracle::random_record(rng, chunks, p, "q" + std::to_string(p));
        rec.variants.clear();
        const auto out = synthesis::gen_variants(rec, chat, 1);
        const auto gold = datamodel::derive_gold_docs(out);
        std::set<std::set<std::string>> seen;
        for (const auto& v : out.variants) {
            if (v.missing_docs.empty()) o.fail("empty missing_docs at p=" + std::to_string(p));
            for (const auto& d : v.missing_docs) {
                if (!gold.contains(d)) o.fail(d + " is not gold at p=" + std::to_string(p));
            }
            seen.insert(v.missing_docs);
        }
        if (out.variants.size() != expected[p]) {
            o.fail("p=" + std::to_string(p) + " gave " + std::to_string(out.variants.size()));
        }
        if (seen.size() != out.variants.size()) o.fail("repeated subset at p=" + std::to_string(p));
        counts += (counts.empty() ? "" : "/") + std::to_string(out.variants.size());
    }
    if (o.ok) o.detail = "p=1..4 -> " + counts;
    return o;
}

Outcome retrieval_oracle() {
    Outcome o;
    std::mt19937_64 rng(77);
    retrieval::VectorIndex index;
    index.dimension = 64;
    for (int i = 0; i < 1000; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "v%04d", i);
        index.entries.push_back({id, oracle::random_unit(rng, 64)});
    }
    const auto t0 = Clock::now();
    for (int q = 0; q < 100; ++q) {
        const auto query = oracle::random_unit(rng, 64);
        const auto ranking = oracle::cosine_ranking(index.entries, query);
        for (std::size_t k : {1, 3, 10}) {
            if (ids(retrieval::search_vector(index, query, k)) != ids(ranking, k)) {
                o.fail("query " + std::to_string(q) + " k=" + std::to_string(k) + " differs");
            }
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= 10.0) o.fail("took " + std::to_string(secs) + " s");
    if (o.ok) o.detail = "1000 x 64, 100 queries, k in {1,3,10}, " + std::to_string(secs) + " s";
    return o;
}

Outcome hard_negatives() {
    Outcome o;
    std::mt19937_64 rng(8);
    std::size_t checked = 0;

    // Real texts through the hashing embedder.
    const auto chunks = oracle::synthetic_chunks(60, 3);
    backends::HashEmbedBackend embed(64);
    const auto index = retrieval::build_index(chunks, embed);
    for (int i = 0; i < 100; ++i) {
        const auto rec = oracle::random_record(rng, chunks, 1 + static_cast<int>(rng() % 4), "q" + std::to_string(i));
        const auto gold = datamodel::derive_gold_docs(rec);
        const auto negs = retrieval::mine_hard_negatives(index, rec, 7, embed);
        const auto expect = oracle::filtered_top(oracle::cosine_ranking(index.entries, embed.embed({rec.query})[0]), gold, 7);
        for (const auto& n : negs) {
            if (gold.contains(n)) o.fail(rec.query_id + " returned gold " + n);
        }
        if (negs != expect) o.fail(rec.query_id + " differs from the filtered ranking");
        ++checked;
    }

    // Random vectors with gold planted near the top.
    retrieval::VectorIndex rand_index;
    rand_index.dimension = 32;
    for (int i = 0; i < 300; ++i) rand_index.entries.push_back({"c" + std::to_string(i), oracle::random_unit(rng, 32)});
    const auto rchunks = oracle::synthetic_chunks(300, 2);
    for (int i = 0; i < 100; ++i) {
        auto rec = oracle::random_record(rng, rchunks, 1 + static_cast<int>(rng() % 4), "r" + std::to_string(i));
        // Rename gold to the random index ids (docN#0 -> cN).
        std::set<std::string> gold;
        for (auto& c : rec.clues) {
            std::set<std::string> docs;
            for (auto& r : c.support.sentence_refs) {
                r.chunk_id = "c" + r.chunk_id.substr(3, r.chunk_id.find('#') - 3);
                docs.insert(r.chunk_id);
            }
            c.support.docs = docs;
        }
        gold = datamodel::derive_gold_docs(rec);
        const auto query = oracle::random_unit(rng, 32);
        const auto negs = retrieval::mine_hard_negatives(rand_index, rec, 7, query);
        for (const auto& n : negs) {
            if (gold.contains(n)) o.fail(rec.query_id + " returned gold " + n);
        }
        if (negs != oracle::filtered_top(oracle::cosine_ranking(rand_index.entries, query), gold, 7)) {
            o.fail(rec.query_id + " differs from the filtered ranking");
        }
        ++checked;
    }
    if (o.ok) o.detail = std::to_string(checked) + " records, no gold returned, rankings identical";
    return o;
}

Outcome golden_precision() {
    Outcome o;
    const auto ds = datamodel::read_dataset(fixtures::path("golden/dataset.jsonl"));
    metrics::RetrievalRun run;
    std::vector<std::pair<std::vector<std::string>, std::set<std::string>>> lists;
    std::map<std::string, const datamodel::QARecord*> by_id;
    for (const auto& r : ds.records) by_id[r.query_id] = &r;
    for (const auto& row : read_jsonl(fixtures::path("golden/run.jsonl"))) {
        const auto qid = row.at("query_id").get<std::string>();
        const auto ranked = row.at("chunk_ids").get<std::vector<std::string>>();
        run.push_back({qid, ranked});
        lists.push_back({ranked, *oracle::gold_docs(*by_id.at(qid))});
    }
    const auto expected = json::parse(read_file(fixtures::path("golden/expected.json")));
    const double want = expected.at("precision").get<double>();
    const auto got = metrics::precision_at_k(run, ds.records, 3).value;
    if (run.size() != 10) o.fail("fixture has " + std::to_string(run.size()) + " queries");
    if (std::abs(got - want) > 1e-12) o.fail("got " + std::to_string(got) + ", committed " + std::to_string(want));
    if (std::abs(oracle::precision_at_k(lists, 3) - want) > 1e-12) o.fail("oracle disagrees with committed value");
    if (o.ok) o.detail = "P@3 = " + expected.at("fraction").get<std::string>() + " on 10 queries";
    return o;
}

datamodel::QARecord coverage_record(const std::string& qid, std::size_t doc, std::size_t w) {
    datamodel::QARecord rec;
    rec.query_id = qid;
    rec.query = "Question " + qid + "?";
    const std::string chunk = "doc" + std::to_string(doc) + "#0";
    std::vector<datamodel::SentenceRef> refs;
    for (std::size_t s = 0; s < w; ++s) refs.push_back({chunk, chunk + "@" + std::to_string(s)});
    rec.clues.push_back({"c0", "S.", datamodel::ClueSupport::from_refs(refs)});
    rec.standard_answer.push_back({"Reference for " + qid + ".", {"c0"}});
    rec.hop_count = 1;
    rec.rubric = {"Award 1 point if the response is right."};
    return rec;
}

Outcome csg_arithmetic() {
    Outcome o;
    const auto chunks = oracle::synthetic_chunks(4, 4);
    const corpus::ChunkIndex corpus(chunks);
    std::vector<datamodel::QARecord> ds = {coverage_record("q1", 0, 4), coverage_record("q2", 1, 4)};
    std::vector<backends::ScriptedChatBackend::Entry> script;
    for (const char* w : {"YES", "YES", "NO", "YES", "NO", "YES", "NO", "NO"}) script.push_back({"*", w});
    backends::ScriptedChatBackend judge(script);
    metrics::CsgOptions opts;
    opts.concurrency = 1;
    const auto r = metrics::csg({{"q1", "a1"}, {"q2", "a2"}}, ds, corpus, judge, opts);
    if (r.sentence.per_query.size() != 2) {
        o.fail("wrong number of per-query scores");
        return o;
    }
    if (std::abs(r.sentence.per_query[0].value - 0.75) > 1e-12) o.fail("q1 not 3/4");
    if (std::abs(r.sentence.per_query[1].value - 0.25) > 1e-12) o.fail("q2 not 1/4");
    if (std::abs(r.sentence.value - 0.5) > 1e-12) o.fail("mean not 1/2");

    std::mt19937_64 rng(1000);
    for (int round = 0; round < 1000; ++round) {
        std::vector<metrics::JudgeVerdict> vs(1 + rng() % 12);
        double expected = 0;
        for (auto& v : vs) {
            v.sentences.resize(1 + rng() % 9);
            std::size_t covered = 0;
            for (std::size_t i = 0; i < v.sentences.size(); ++i) {
                v.sentences[i] = rng() % 2;
                covered += v.sentences[i];
            }
            expected += static_cast<double>(covered) / static_cast<double>(v.sentences.size());
        }
        expected /= static_cast<double>(vs.size());
        const double got = metrics::csg_from_verdicts(vs);
        if (!(got >= 0.0 && got <= 1.0)) o.fail("round " + std::to_string(round) + " out of [0,1]");
        if (std::abs(got - expected) > 1e-12) o.fail("round " + std::to_string(round) + " arithmetic");
    }
    if (o.ok) o.detail = "per-query 0.75/0.25, mean 0.5; 1000 fuzzed sets in [0,1]";
    return o;
}

class FnBackend final : public backends::ChatBackend {
public:
    explicit FnBackend(std::function<std::string(const backends::ChatRequest&)> fn) : fn_(std::move(fn)) {}
    std::string chat(const backends::ChatRequest& r) override { return fn_(r); }
    std::string model_name() const override { return "fn"; }

private:
    std::function<std::string(const backends::ChatRequest&)> fn_;
};

Outcome protocol_constants() {
    using rag::StepKind;
    Outcome o;
    const auto chunks = oracle::synthetic_chunks(12, 3);
    const corpus::ChunkIndex corpus(chunks);
    backends::HashEmbedBackend embed(64);
    const auto index = retrieval::build_index(chunks, embed);
    const rag::Retriever retriever(index, corpus, embed);
    std::mt19937_64 rng(31);

    // Planners that never stop on their own.
    json subqueries = json::array();
    for (int i = 0; i < 20; ++i) subqueries.push_back("Sentence " + std::to_string(i % 3) + " of document " + std::to_string(i % 12) + ".");
    FnBackend stubborn([&](const backends::ChatRequest& r) -> std::string {
        if (r.tag == "rr_plan") return json{{"subqueries", subqueries}}.dump();
        if (r.tag == "flare_generate") return "Another sentence " + std::to_string(rng()) + ".";
        if (r.tag == "flare_judge") return "CONTINUE";
        if (r.tag == "react_step") return "RETRIEVE[document " + std::to_string(rng() % 12) + "]";
        return "answer";
    });
    const std::vector<std::string> pool = {"RETRIEVE[x]", "garbage", "", "CONTINUE", "[DONE", "RETRIEVE[]",
                                           "{\"subqueries\": [\"a\",\"b\",\"c\",\"d\",\"e\",\"f\",\"g\",\"h\",\"i\"]}"};
    FnBackend random_planner([&](const backends::ChatRequest&) { return pool[rng() % pool.size()]; });

    auto check = [&](rag::Engine engine, backends::ChatBackend& gen, const std::string& label) {
        const auto t = rag::run_engine(engine, "q", "Sentence 1 of document 4.", retriever, gen, {});
        const auto name = label + " " + std::string(rag::to_string(engine));
        const auto retrieves = t.count(StepKind::retrieve);
        if (!rag::check_trace(t, 8).empty()) o.fail(name + ": " + rag::check_trace(t, 8).front());
        switch (engine) {
        case rag::Engine::vanilla:
            if (retrieves != 1) o.fail(name + " retrieved " + std::to_string(retrieves) + " times");
            break;
        case rag::Engine::rr:
            for (const auto& s : t.steps) {
                if (s.kind == StepKind::retrieve && s.payload["results"].size() != 3) o.fail(name + " kept != 3 per sub-query");
                if (s.kind == StepKind::aggregate && s.payload["kept"].size() > 5) o.fail(name + " kept > 5");
            }
            if (retrieves > 8) o.fail(name + " ran " + std::to_string(retrieves) + " sub-queries");
            break;
        case rag::Engine::flare:
        case rag::Engine::react:
            if (retrieves > 8 || t.interactions > 8) {
                o.fail(name + " ran " + std::to_string(t.interactions) + " interactions");
            }
            break;
        }
        return t;
    };

    for (auto engine : {rag::Engine::vanilla, rag::Engine::rr, rag::Engine::flare, rag::Engine::react}) {
        const auto t = check(engine, stubborn, "never-stopping");
        if ((engine == rag::Engine::flare || engine == rag::Engine::react) && t.interactions != 8) {
            o.fail("never-stopping " + std::string(rag::to_string(engine)) + " stopped after " +
                   std::to_string(t.interactions));
        }
        for (int round = 0; round < 50; ++round) check(engine, random_planner, "random");
    }
    if (o.ok) o.detail = "vanilla 1 retrieval; RR 3 per sub-query, <=5 kept; FLARE/ReACT capped at 8";
    return o;
}

Outcome end_to_end() {
    Outcome o;
    fixtures::TempDir tmp;
    const std::vector<std::string> artifacts = {"corpus/chunks.jsonl", "dataset.jsonl", "manifest.json",
                                                "triplets.jsonl", "reports/precision_at_3.json"};
    std::vector<std::map<std::string, std::string>> hashes;
    double slowest = 0;
    for (const char* name : {"a", "b"}) {
        const auto out = (tmp.path() / name).string();
        const auto t0 = Clock::now();
        for (std::vector<std::string> args : {std::vector<std::string>{"ingest", "--corpus", fixtures::path("corpus50").string()},
                                              std::vector<std::string>{"synthesize"},
                                              std::vector<std::string>{"export-triplets"},
                                              std::vector<std::string>{"eval-retrieval"}}) {
            for (const char* a : {"--backend", "mock", "--seed", "13", "--out"}) args.push_back(a);
            args.push_back(out);
            const auto r = fixtures::run_cli(args);
            if (r.exit_code != 0) {
                o.fail(args.front() + " exited " + std::to_string(r.exit_code) + ": " + r.err);
                return o;
            }
        }
        slowest = std::max(slowest, seconds_since(t0));
        std::map<std::string, std::string> h;
        for (const auto& f : artifacts) h[f] = fixtures::sha256_file(fs::path(out) / f);
        hashes.push_back(std::move(h));
    }
    for (const auto& f : artifacts) {
        if (hashes[0][f] != hashes[1][f]) o.fail(f + " differs between runs");
    }
    if (slowest >= 60.0) o.fail("a run took " + std::to_string(slowest) + " s");
    if (o.ok) {
        o.detail = std::to_string(artifacts.size()) + " artifacts identical, dataset sha256 " +
                   hashes[0]["dataset.jsonl"].substr(0, 16) + ", slowest run " + std::to_string(slowest) + " s";
    }
    return o;
}

Outcome transformation_closure() {
    Outcome o;
    const auto chunks = oracle::synthetic_chunks(16, 4);
    const corpus::ChunkIndex corpus(chunks);
    backends::HashChatBackend chat;
    std::mt19937_64 rng(606);
    std::size_t checked = 0;
    auto same_gold = [&](const datamodel::QARecord& before, const datamodel::QARecord& after, const std::string& what) {
        if (datamodel::derive_gold_docs(before) != datamodel::derive_gold_docs(after)) o.fail(what + " changed gold docs");
        if (datamodel::derive_gold_sentences(before) != datamodel::derive_gold_sentences(after)) {
            o.fail(what + " changed gold sentences");
        }
        if (!datamodel::validate(after, corpus).ok()) o.fail(what + " no longer validates");
        ++checked;
    };
    for (auto rule : synthesis::all_rules()) {
        for (int i = 0; i < 100; ++i) {
            const auto rec = oracle::random_record(rng, chunks, 1 + static_cast<int>(rng() % 4), "q" + std::to_string(i));
            const std::string what = std::string(synthesis::to_string(rule)) + " on " + rec.query_id;
            same_gold(rec, synthesis::apply_transform(rec, {rule}, chat, rng()), what);
        }
    }
    for (auto level : {synthesis::CompletenessLevel::full, synthesis::CompletenessLevel::drop_one_clue,
                       synthesis::CompletenessLevel::single_clue}) {
        for (int i = 0; i < 100; ++i) {
            const auto rec = oracle::random_record(rng, chunks, 1 + static_cast<int>(rng() % 4), "c" + std::to_string(i));
            const std::string what = std::string(synthesis::to_string(level)) + " on " + rec.query_id;
            same_gold(rec, synthesis::apply_completeness(rec, level, chat, rng()), what);
        }
    }
    if (o.ok) {
        o.detail = std::to_string(synthesis::all_rules().size()) + " rules and 3 completeness levels x 100 records (" +
                   std::to_string(checked) + " checks)";
    }
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"mapping-oracle", mapping_oracle},
        {"variant-combinatorics", variant_combinatorics},
        {"retrieval-oracle", retrieval_oracle},
        {"hard-negative-contract", hard_negatives},
        {"golden-precision-at-3", golden_precision},
        {"csg-arithmetic", csg_arithmetic},
        {"protocol-constants", protocol_constants},
        {"end-to-end-determinism", end_to_end},
        {"transformation-closure", transformation_closure},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("threw: ") + e.what();
        }
        std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
        failed += !o.ok;
    }
    return failed == 0 ? 0 : 1;
}
