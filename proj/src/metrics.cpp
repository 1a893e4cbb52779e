#include "dragon/metrics.hpp"

#include "dragon/error.hpp"

#include <set>

namespace dragon::metrics {

json Report::to_json() const {
    json rows = json::array();
    for (const auto& q : per_query) rows.push_back({{"query_id", q.query_id}, {"value", q.value}});
    json j = {{"metric", metric}, {"value", value}, {"per_query", rows}};
    j["k"] = k ? json(*k) : json(nullptr);
    j["judge_model"] = judge_model.empty() ? json(nullptr) : json(judge_model);
    j["verdict_file"] = verdict_file.empty() ? json(nullptr) : json(verdict_file);
    return j;
}

namespace {

std::map<std::string, const datamodel::QARecord*> by_id(const std::vector<datamodel::QARecord>& dataset) {
    std::map<std::string, const datamodel::QARecord*> out;
    for (const auto& r : dataset) out[r.query_id] = &r;
    return out;
}

const datamodel::QARecord& lookup(const std::map<std::string, const datamodel::QARecord*>& index,
                                  const std::string& query_id) {
    auto it = index.find(query_id);
    if (it == index.end()) throw Error(ErrorCode::UnknownQuery, "query " + query_id + " is not in the dataset");
    return *it->second;
}

double mean(const std::vector<QueryScore>& scores) {
    if (scores.empty()) return 0.0;
    double sum = 0;
    for (const auto& s : scores) sum += s.value;
    return sum / static_cast<double>(scores.size());
}

std::string answer_text(const datamodel::QARecord& rec) {
    std::vector<std::string> parts;
    for (const auto& s : rec.standard_answer) parts.push_back(s.text);
    return join(parts, " ");
}

std::string numbered_rubric(const std::vector<std::string>& rubric) {
    std::string out;
    for (std::size_t i = 0; i < rubric.size(); ++i) out += "(" + std::to_string(i + 1) + ") " + rubric[i] + "\n";
    return out;
}

} // namespace

Report precision_at_k(const RetrievalRun& run, const std::vector<datamodel::QARecord>& dataset, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::Precondition, "k must be at least 1");
    const auto index = by_id(dataset);
    Report report;
    report.metric = "precision@" + std::to_string(k);
    report.k = k;
    for (const auto& entry : run) {
        const auto& rec = lookup(index, entry.query_id);
        std::set<std::string> seen;
        for (const auto& id : entry.chunk_ids) {
            if (!seen.insert(id).second) {
                throw Error(ErrorCode::Precondition, "ranked list for " + entry.query_id + " repeats " + id);
            }
        }
        const auto gold = datamodel::derive_gold_docs(rec);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < entry.chunk_ids.size() && i < k; ++i) hits += gold.contains(entry.chunk_ids[i]);
        report.per_query.push_back({entry.query_id, static_cast<double>(hits) / static_cast<double>(k)});
    }
    report.value = mean(report.per_query);
    return report;
}

std::optional<bool> parse_verdict(std::string_view reply) {
    auto t = trim_view(reply);
    std::size_t end = 0;
    while (end < t.size() && std::isalpha(static_cast<unsigned char>(t[end]))) ++end;
    const auto word = to_lower_ascii(t.substr(0, end));
    if (word == "yes" || word == "true") return true;
    if (word == "no" || word == "false") return false;
    return std::nullopt;
}

std::string VerdictCache::key(std::string_view answer, std::string_view item, std::string_view rubric,
                              std::string_view model) {
    // Length-prefixed fields so no two distinct tuples share a preimage.
    std::string buf;
    for (auto part : {answer, item, rubric, model}) {
        buf += std::to_string(part.size());
        buf += ':';
        buf += part;
    }
    return sha256_hex(buf);
}

std::optional<bool> VerdictCache::get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    ++hits_;
    return it->second;
}

void VerdictCache::put(const std::string& key, bool value) {
    std::lock_guard lock(mu_);
    values_[key] = value;
}

std::size_t VerdictCache::size() const {
    std::lock_guard lock(mu_);
    return values_.size();
}

std::size_t VerdictCache::hits() const {
    std::lock_guard lock(mu_);
    return hits_;
}

double csg_from_verdicts(const std::vector<JudgeVerdict>& verdicts, std::vector<QueryScore>* per_query) {
    std::vector<QueryScore> scores;
    for (const auto& v : verdicts) {
        if (v.sentences.empty()) throw Error(ErrorCode::Precondition, v.query_id + " has no gold sentences");
        std::size_t covered = 0;
        for (bool b : v.sentences) covered += b;
        scores.push_back({v.query_id, static_cast<double>(covered) / static_cast<double>(v.sentences.size())});
    }
    if (per_query) *per_query = scores;
    return mean(scores);
}

CsgResult csg(const std::vector<GeneratedAnswer>& answers, const std::vector<datamodel::QARecord>& dataset,
              const corpus::ChunkIndex& corpus, backends::ChatBackend& judge, const CsgOptions& options) {
    const auto index = by_id(dataset);
    const std::string model = judge.model_name();

    // Resolve everything up front so precondition failures surface before any judge call.
    struct Item {
        const datamodel::QARecord* rec;
        std::vector<std::string> sentences;
        std::string rubric;
    };
    std::vector<Item> items;
    for (const auto& a : answers) {
        const auto& rec = lookup(index, a.query_id);
        if (rec.rubric.empty()) throw Error(ErrorCode::MissingRubric, a.query_id + " has an empty rubric");
        Item item{&rec, {}, numbered_rubric(rec.rubric)};
        for (const auto& ref : datamodel::derive_gold_sentences(rec)) {
            auto text = corpus.sentence_text(ref.chunk_id, ref.sent_id);
            if (!text) throw Error(ErrorCode::Precondition, "gold sentence " + ref.sent_id + " is not in the corpus");
            item.sentences.emplace_back(*text);
        }
        if (item.sentences.empty()) throw Error(ErrorCode::Precondition, a.query_id + " has no gold sentences");
        items.push_back(std::move(item));
    }

    auto ask = [&](const std::string& tag, const std::map<std::string, std::string>& values, const json& context,
                   const std::string& answer, const std::string& subject, const std::string& rubric,
                   std::vector<json>& rows, const std::string& query_id) {
        const auto cache_key = VerdictCache::key(answer, tag + "\n" + subject, rubric, model);
        std::optional<bool> verdict;
        bool cached = false;
        std::string reply;
        if (options.cache) {
            verdict = options.cache->get(cache_key);
            cached = verdict.has_value();
        }
        if (!verdict) {
            reply = judge.chat(backends::make_request(tag, values, 0, context));
            verdict = parse_verdict(reply).value_or(false);
            if (options.cache) options.cache->put(cache_key, *verdict);
        }
        rows.push_back({{"query_id", query_id},
                        {"kind", tag == "judge_sentence" ? "sentence" : "criterion"},
                        {"item", subject},
                        {"verdict", *verdict},
                        {"cached", cached},
                        {"raw", cached ? json(nullptr) : json(reply)},
                        {"key", cache_key}});
        return *verdict;
    };

    struct PerQuery {
        JudgeVerdict verdict;
        std::vector<json> rows;
    };
    auto results = parallel_map(items.size(), options.concurrency, [&](std::size_t i) {
        const auto& item = items[i];
        const auto& answer = answers[i].answer;
        PerQuery out;
        out.verdict.query_id = answers[i].query_id;
        for (const auto& sentence : item.sentences) {
            out.verdict.sentences.push_back(ask("judge_sentence",
                                                {{"rubric", item.rubric}, {"sentence", sentence}, {"answer", answer}},
                                                json{{"sentence", sentence}, {"answer", answer}}, answer, sentence,
                                                item.rubric, out.rows, out.verdict.query_id));
        }
        if (options.rubric_points) {
            for (const auto& criterion : item.rec->rubric) {
                out.verdict.criteria.push_back(ask("judge_criterion", {{"criterion", criterion}, {"answer", answer}},
                                                   json{{"criterion", criterion}, {"answer", answer}}, answer,
                                                   criterion, item.rubric, out.rows, out.verdict.query_id));
            }
        }
        return out;
    });

    CsgResult result;
    result.sentence.metric = "csg";
    result.sentence.judge_model = model;
    for (auto& r : results) {
        result.verdicts.push_back(r.verdict);
        for (auto& row : r.rows) result.verdict_rows.push_back(std::move(row));
    }
    result.sentence.value = csg_from_verdicts(result.verdicts, &result.sentence.per_query);
    if (options.rubric_points) {
        Report points;
        points.metric = "csg_rubric_points";
        points.judge_model = model;
        for (const auto& v : result.verdicts) {
            std::size_t earned = 0;
            for (bool b : v.criteria) earned += b;
            points.per_query.push_back({v.query_id, static_cast<double>(earned) / static_cast<double>(v.criteria.size())});
        }
        points.value = mean(points.per_query);
        result.rubric = std::move(points);
    }
    return result;
}

LjResult lj(const std::vector<GeneratedAnswer>& answers, const std::vector<datamodel::QARecord>& dataset,
            backends::ChatBackend& judge, std::size_t concurrency) {
    const auto index = by_id(dataset);
    std::vector<const datamodel::QARecord*> recs;
    for (const auto& a : answers) recs.push_back(&lookup(index, a.query_id));
    auto replies = parallel_map(answers.size(), concurrency, [&](std::size_t i) {
        const auto reference = answer_text(*recs[i]);
        return judge.chat(backends::make_request(
            "judge_lj", {{"query", recs[i]->query}, {"reference", reference}, {"answer", answers[i].answer}}, 0,
            json{{"reference", reference}, {"answer", answers[i].answer}}));
    });
    LjResult result;
    result.report.metric = "lj";
    result.report.judge_model = judge.model_name();
    for (std::size_t i = 0; i < answers.size(); ++i) {
        const bool ok = parse_verdict(replies[i]).value_or(false);
        result.report.per_query.push_back({answers[i].query_id, ok ? 1.0 : 0.0});
        result.verdict_rows.push_back(
            {{"query_id", answers[i].query_id}, {"kind", "lj"}, {"verdict", ok}, {"raw", replies[i]}});
    }
    result.report.value = mean(result.report.per_query);
    return result;
}

} // namespace dragon::metrics
