#include "dragon/datamodel.hpp"

#include "dragon/error.hpp"

#include <algorithm>
#include <map>

namespace dragon::datamodel {

ClueSupport ClueSupport::from_refs(std::vector<SentenceRef> refs) {
    ClueSupport s;
    for (const auto& r : refs) s.docs.insert(r.chunk_id);
    s.sentence_refs = std::move(refs);
    return s;
}

const Clue* QARecord::find_clue(std::string_view clue_id) const {
    for (const auto& c : clues) {
        if (c.clue_id == clue_id) return &c;
    }
    return nullptr;
}

namespace {

std::vector<const Clue*> cited_clues(const QARecord& rec) {
    std::vector<const Clue*> out;
    std::set<std::string> seen;
    for (const auto& sentence : rec.standard_answer) {
        for (const auto& id : sentence.clue_ids) {
            const Clue* c = rec.find_clue(id);
            if (!c) {
                throw Error(ErrorCode::DanglingClue, "record " + rec.query_id + " cites unknown clue " + id);
            }
            if (seen.insert(id).second) out.push_back(c);
        }
    }
    return out;
}

} // namespace

std::set<std::string> derive_gold_docs(const QARecord& rec) {
    std::set<std::string> gold;
    for (const Clue* c : cited_clues(rec)) {
        gold.insert(c->support.docs.begin(), c->support.docs.end());
    }
    return gold;
}

std::set<SentenceRef> derive_gold_sentences(const QARecord& rec) {
    std::set<SentenceRef> gold;
    for (const Clue* c : cited_clues(rec)) {
        gold.insert(c->support.sentence_refs.begin(), c->support.sentence_refs.end());
    }
    return gold;
}

std::vector<std::vector<std::size_t>> variant_subsets(int p) {
    if (p < 1) {
        throw Error(ErrorCode::Precondition, "variant_subsets needs p >= 1");
    }
    if (p > kMaxVariantHops) {
        throw Error(ErrorCode::TooManyHops, "variant enumeration is capped at " + std::to_string(kMaxVariantHops) +
                                                " hops, got " + std::to_string(p));
    }
    std::vector<std::vector<std::size_t>> out;
    const unsigned full = (1u << p);
    for (unsigned mask = 1; mask < full; ++mask) {
        std::vector<std::size_t> subset;
        for (int b = 0; b < p; ++b) {
            if (mask & (1u << b)) subset.push_back(static_cast<std::size_t>(b));
        }
        out.push_back(std::move(subset));
    }
    return out;
}

std::string_view to_string(Violation v) {
    switch (v) {
    case Violation::EmptyQuery: return "EmptyQuery";
    case Violation::EmptyAnswer: return "EmptyAnswer";
    case Violation::DuplicateClueId: return "DuplicateClueId";
    case Violation::EmptySupport: return "EmptySupport";
    case Violation::SupportMismatch: return "SupportMismatch";
    case Violation::UnresolvableRef: return "UnresolvableRef";
    case Violation::DanglingClue: return "DanglingClue";
    case Violation::EmptyCitation: return "EmptyCitation";
    case Violation::HopCountMismatch: return "HopCountMismatch";
    case Violation::VariantCountMismatch: return "VariantCountMismatch";
    case Violation::VariantInvalidSubset: return "VariantInvalidSubset";
    case Violation::VariantDuplicateSubset: return "VariantDuplicateSubset";
    case Violation::VariantCitesMissing: return "VariantCitesMissing";
    case Violation::EmptyRubric: return "EmptyRubric";
    }
    return "Unknown";
}

bool ValidationReport::has(Violation v) const {
    return std::any_of(entries.begin(), entries.end(), [v](const ViolationEntry& e) { return e.kind == v; });
}

json ValidationReport::to_json() const {
    json arr = json::array();
    for (const auto& e : entries) arr.push_back({{"violation", to_string(e.kind)}, {"detail", e.detail}});
    return arr;
}

ValidationReport validate(const QARecord& rec, const corpus::ChunkIndex& corpus, const ValidateOptions& options) {
    ValidationReport report;
    auto add = [&](Violation v, std::string detail) { report.entries.push_back({v, std::move(detail)}); };

    if (trim_view(rec.query).empty()) add(Violation::EmptyQuery, "query text is empty");
    if (rec.standard_answer.empty()) add(Violation::EmptyAnswer, "standard answer has no sentences");
    if (options.require_rubric && rec.rubric.empty()) add(Violation::EmptyRubric, "rubric is empty");

    std::map<std::string, const Clue*> clue_by_id;
    for (const auto& c : rec.clues) {
        if (!clue_by_id.emplace(c.clue_id, &c).second) {
            add(Violation::DuplicateClueId, "clue id " + c.clue_id + " appears more than once");
        }
        if (c.support.sentence_refs.empty()) {
            add(Violation::EmptySupport, "clue " + c.clue_id + " has no sentence_refs");
        }
        std::set<std::string> ref_docs;
        for (const auto& r : c.support.sentence_refs) {
            ref_docs.insert(r.chunk_id);
            if (!corpus.find_sentence(r.chunk_id, r.sent_id)) {
                add(Violation::UnresolvableRef, "clue " + c.clue_id + " cites " + r.chunk_id + "/" + r.sent_id);
            }
        }
        if (ref_docs != c.support.docs) {
            add(Violation::SupportMismatch, "clue " + c.clue_id + " docs disagree with its sentence_refs");
        }
    }

    bool dangling = false;
    std::set<std::string> gold;
    for (std::size_t i = 0; i < rec.standard_answer.size(); ++i) {
        const auto& s = rec.standard_answer[i];
        if (s.clue_ids.empty()) {
            add(Violation::EmptyCitation, "answer sentence " + std::to_string(i) + " cites no clue");
        }
        for (const auto& id : s.clue_ids) {
            auto it = clue_by_id.find(id);
            if (it == clue_by_id.end()) {
                add(Violation::DanglingClue, "answer sentence " + std::to_string(i) + " cites unknown clue " + id);
                dangling = true;
            } else {
                gold.insert(it->second->support.docs.begin(), it->second->support.docs.end());
            }
        }
    }

    if (!dangling && static_cast<std::size_t>(std::max(rec.hop_count, 0)) != gold.size()) {
        add(Violation::HopCountMismatch, "hop_count " + std::to_string(rec.hop_count) + " but " +
                                             std::to_string(gold.size()) + " gold documents");
    }

    if (!rec.variants.empty()) {
        const int p = dangling ? rec.hop_count : static_cast<int>(gold.size());
        if (p < 1 || p > kMaxVariantHops) {
            add(Violation::VariantCountMismatch, "variants present for " + std::to_string(p) + " hops");
        } else {
            const std::size_t expected = (std::size_t{1} << p) - 1;
            if (rec.variants.size() != expected) {
                add(Violation::VariantCountMismatch, "expected " + std::to_string(expected) + ", found " +
                                                         std::to_string(rec.variants.size()));
            }
        }
        std::set<std::set<std::string>> seen;
        for (std::size_t v = 0; v < rec.variants.size(); ++v) {
            const auto& var = rec.variants[v];
            const std::string where = "variant " + std::to_string(v);
            bool subset_ok = !var.missing_docs.empty();
            for (const auto& d : var.missing_docs) {
                if (!dangling && !gold.contains(d)) subset_ok = false;
            }
            if (!subset_ok) add(Violation::VariantInvalidSubset, where + " missing_docs is not a non-empty subset of gold");
            if (!seen.insert(var.missing_docs).second) {
                add(Violation::VariantDuplicateSubset, where + " repeats a missing-doc subset");
            }
            for (const auto& s : var.text) {
                for (const auto& id : s.clue_ids) {
                    auto it = clue_by_id.find(id);
                    if (it == clue_by_id.end()) {
                        add(Violation::DanglingClue, where + " cites unknown clue " + id);
                        continue;
                    }
                    const auto& docs = it->second->support.docs;
                    const bool all_missing = !docs.empty() && std::all_of(docs.begin(), docs.end(), [&](const std::string& d) {
                        return var.missing_docs.contains(d);
                    });
                    if (all_missing) {
                        add(Violation::VariantCitesMissing, where + " cites clue " + id + " whose support is missing");
                    }
                }
            }
        }
    }
    return report;
}

// --- JSON -------------------------------------------------------------------

namespace {

json sentences_to_json(const std::vector<AnswerSentence>& sentences) {
    json arr = json::array();
    for (const auto& s : sentences) arr.push_back({{"text", s.text}, {"clue_ids", s.clue_ids}});
    return arr;
}

std::vector<AnswerSentence> sentences_from_json(const json& arr) {
    std::vector<AnswerSentence> out;
    for (const auto& s : arr) {
        out.push_back({s.at("text").get<std::string>(), s.at("clue_ids").get<std::vector<std::string>>()});
    }
    return out;
}

} // namespace

json to_json(const QARecord& rec) {
    json clues = json::array();
    for (const auto& c : rec.clues) {
        json refs = json::array();
        for (const auto& r : c.support.sentence_refs) refs.push_back({{"chunk_id", r.chunk_id}, {"sent_id", r.sent_id}});
        clues.push_back({{"clue_id", c.clue_id},
                         {"statement", c.statement},
                         {"support", {{"docs", c.support.docs}, {"sentence_refs", refs}}}});
    }
    json variants = json::array();
    for (const auto& v : rec.variants) {
        variants.push_back({{"missing_docs", v.missing_docs}, {"text", sentences_to_json(v.text)}});
    }
    return {{"query_id", rec.query_id},
            {"query", rec.query},
            {"hop_count", rec.hop_count},
            {"clues", clues},
            {"standard_answer", sentences_to_json(rec.standard_answer)},
            {"variants", variants},
            {"rubric", rec.rubric},
            {"lineage", rec.lineage}};
}

QARecord record_from_json(const json& j) {
    try {
        QARecord rec;
        rec.query_id = j.at("query_id").get<std::string>();
        rec.query = j.at("query").get<std::string>();
        rec.hop_count = j.at("hop_count").get<int>();
        for (const auto& c : j.at("clues")) {
            Clue clue;
            clue.clue_id = c.at("clue_id").get<std::string>();
            clue.statement = c.at("statement").get<std::string>();
            const auto& sup = c.at("support");
            clue.support.docs = sup.at("docs").get<std::set<std::string>>();
            for (const auto& r : sup.at("sentence_refs")) {
                clue.support.sentence_refs.push_back({r.at("chunk_id").get<std::string>(), r.at("sent_id").get<std::string>()});
            }
            rec.clues.push_back(std::move(clue));
        }
        rec.standard_answer = sentences_from_json(j.at("standard_answer"));
        for (const auto& v : j.at("variants")) {
            rec.variants.push_back({v.at("missing_docs").get<std::set<std::string>>(), sentences_from_json(v.at("text"))});
        }
        rec.rubric = j.at("rubric").get<std::vector<std::string>>();
        rec.lineage = j.at("lineage").get<std::vector<std::string>>();
        return rec;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("QA record: ") + e.what());
    }
}

std::string encode_dataset(const Dataset& dataset) {
    json meta = dataset.meta;
    meta["type"] = "meta";
    std::string out = meta.dump() + "\n";
    for (const auto& r : dataset.records) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    write_file(path, encode_dataset(dataset));
}

Dataset read_dataset(const std::filesystem::path& path) {
    Dataset ds;
    auto rows = read_jsonl(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0 && rows[i].is_object() && rows[i].value("type", "") == "meta") {
            ds.meta = rows[i];
            continue;
        }
        ds.records.push_back(record_from_json(rows[i]));
    }
    return ds;
}

} // namespace dragon::datamodel
