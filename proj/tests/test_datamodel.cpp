#include "dragon/datamodel.hpp"
#include "dragon/error.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace dragon;
using namespace dragon::datamodel;
using fixtures::error_code;

namespace {

Clue clue(const std::string& id, std::vector<SentenceRef> refs) {
    return Clue{id, "Statement " + id + ".", ClueSupport::from_refs(std::move(refs))};
}

QARecord two_clue_record() {
    QARecord rec;
    rec.query_id = "q1";
    rec.query = "What links them?";
    rec.hop_count = 2;
    rec.clues = {clue("c1", {{"d1", "d1@s0"}}), clue("c2", {{"d1", "d1@s0"}, {"d2", "d2@s3"}})};
    rec.standard_answer = {{"First.", {"c1"}}, {"Second.", {"c2"}}};
    return rec;
}

corpus::ChunkIndex small_corpus(std::size_t docs = 4) {
    return corpus::ChunkIndex(oracle::synthetic_chunks(docs, 4));
}

// Fixture that satisfies every invariant: 2 hops, 3 variants, a rubric.
QARecord well_formed() {
    QARecord rec;
    rec.query_id = "q7";
    rec.query = "Who built the bridge and when?";
    rec.hop_count = 2;
    rec.clues = {clue("c1", {{"doc0#0", "doc0#0@1"}}), clue("c2", {{"doc1#0", "doc1#0@0"}, {"doc1#0", "doc1#0@2"}})};
    rec.standard_answer = {{"Builder.", {"c1"}}, {"Year.", {"c2"}}};
    rec.variants = {{{"doc0#0"}, {{"Year.", {"c2"}}}},
                    {{"doc1#0"}, {{"Builder.", {"c1"}}}},
                    {{"doc0#0", "doc1#0"}, {{"Cannot be determined.", {}}}}};
    rec.rubric = {"Award 1 point if the response names the builder."};
    rec.lineage = {"gen"};
    return rec;
}

} // namespace

TEST_CASE("gold docs are the union over cited clues") {
    auto rec = two_clue_record();
    CHECK(derive_gold_docs(rec) == std::set<std::string>{"d1", "d2"});

    QARecord single;
    single.clues = {clue("c1", {{"d7", "d7@s0"}})};
    single.standard_answer = {{"x", {"c1"}}};
    CHECK(derive_gold_docs(single) == std::set<std::string>{"d7"});

    rec.standard_answer[0].clue_ids.push_back("cX");
    CHECK(error_code([&] { derive_gold_docs(rec); }) == ErrorCode::DanglingClue);
    CHECK(error_code([&] { derive_gold_sentences(rec); }) == ErrorCode::DanglingClue);
}

TEST_CASE("gold sentences deduplicate") {
    auto rec = two_clue_record();
    CHECK(derive_gold_sentences(rec) == std::set<SentenceRef>{{"d1", "d1@s0"}, {"d2", "d2@s3"}});

    rec.standard_answer.clear();
    CHECK(derive_gold_sentences(rec).empty());
}

TEST_CASE("gold sentence count over disjoint refs of sizes 1, 2, 2") {
    QARecord rec;
    rec.clues = {clue("a", {{"d1", "d1@0"}}), clue("b", {{"d1", "d1@1"}, {"d2", "d2@0"}}),
                 clue("c", {{"d3", "d3@0"}, {"d3", "d3@1"}})};
    rec.standard_answer = {{"x", {"a", "b"}}, {"y", {"c"}}};
    const auto expected = oracle::gold_sentences(rec);
    REQUIRE(expected);
    CHECK(expected->size() == 5);
    CHECK(derive_gold_sentences(rec).size() == 5);
}

TEST_CASE("uncited clues do not contribute gold") {
    auto rec = two_clue_record();
    rec.clues.push_back(clue("c9", {{"d9", "d9@0"}}));
    CHECK_FALSE(derive_gold_docs(rec).contains("d9"));
}

TEST_CASE("gold docs equal gold sentences projected to chunk ids") {
    auto chunks = oracle::synthetic_chunks(8, 5);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        auto rec = oracle::random_record(rng, chunks, 1 + static_cast<int>(rng() % 4), "q" + std::to_string(i));
        std::set<std::string> projected;
        for (const auto& r : derive_gold_sentences(rec)) projected.insert(r.chunk_id);
        CHECK(projected == derive_gold_docs(rec));
    }
}

TEST_CASE("variant subsets enumerate bitmasks in ascending order") {
    using Subsets = std::vector<std::vector<std::size_t>>;
    CHECK(variant_subsets(1) == Subsets{{0}});
    CHECK(variant_subsets(2) == Subsets{{0}, {1}, {0, 1}});
    CHECK(variant_subsets(3).size() == 7);
    CHECK(variant_subsets(6).size() == 63);
    CHECK(error_code([] { variant_subsets(7); }) == ErrorCode::TooManyHops);
    CHECK(error_code([] { variant_subsets(0); }) == ErrorCode::Precondition);
}

TEST_CASE("validate accepts a well-formed record") {
    auto corpus = small_corpus();
    auto report = validate(well_formed(), corpus, {true});
    INFO(report.to_json().dump());
    CHECK(report.ok());
}

TEST_CASE("validate reports a missing variant") {
    auto corpus = small_corpus();
    auto rec = well_formed();
    rec.variants.pop_back();
    auto report = validate(rec, corpus);
    REQUIRE(report.has(Violation::VariantCountMismatch));
    CHECK(report.to_json().dump().find("expected 3") != std::string::npos);
}

TEST_CASE("validate reports a ref into a deleted chunk") {
    auto chunks = oracle::synthetic_chunks(4, 4);
    chunks.erase(chunks.begin());
    corpus::ChunkIndex corpus(chunks);
    CHECK(validate(well_formed(), corpus).has(Violation::UnresolvableRef));
}

TEST_CASE("validate requires a rubric only when asked") {
    auto corpus = small_corpus();
    auto rec = well_formed();
    rec.rubric.clear();
    CHECK(validate(rec, corpus).ok());
    CHECK(validate(rec, corpus, {true}).has(Violation::EmptyRubric));
}

TEST_CASE("validate flags each corruption class") {
    auto chunks = oracle::synthetic_chunks(10, 4);
    corpus::ChunkIndex corpus(chunks);
    std::mt19937_64 rng(17);
    for (auto v : oracle::corruption_classes()) {
        for (int i = 0; i < 20; ++i) {
            auto rec = oracle::random_record(rng, chunks, 2 + static_cast<int>(rng() % 3), "q");
            REQUIRE(validate(rec, corpus, {true}).ok());
            REQUIRE(oracle::corrupt(rec, v, rng));
            auto report = validate(rec, corpus, {true});
            INFO(to_string(v));
            CHECK(report.has(v));
        }
    }
}

TEST_CASE("record json round trip") {
    auto rec = well_formed();
    rec.lineage.push_back("paraphrase");
    auto back = record_from_json(to_json(rec));
    CHECK(to_json(back) == to_json(rec));
    CHECK(error_code([] { record_from_json(json{{"query_id", "x"}}); }) == ErrorCode::ParseError);
}

TEST_CASE("dataset file keeps the meta line") {
    fixtures::TempDir tmp;
    Dataset ds;
    ds.meta = {{"seed", 5}};
    ds.records = {well_formed()};
    write_dataset(tmp.path() / "d.jsonl", ds);
    auto back = read_dataset(tmp.path() / "d.jsonl");
    CHECK(back.meta["seed"] == 5);
    CHECK(back.meta["type"] == "meta");
    REQUIRE(back.records.size() == 1);
    CHECK(back.records[0].query_id == "q7");
    CHECK(encode_dataset(back) == encode_dataset(ds));
}
