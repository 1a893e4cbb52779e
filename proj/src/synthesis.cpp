#include "dragon/synthesis.hpp"

#include "dragon/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <regex>

namespace dragon::synthesis {

using datamodel::AnswerSentence;
using datamodel::AnswerVariant;
using datamodel::Clue;
using datamodel::QARecord;

std::string_view to_string(RuleId rule) {
    switch (rule) {
    case RuleId::paraphrase: return "paraphrase";
    case RuleId::metaphor: return "metaphor";
    case RuleId::add_constraint: return "add_constraint";
    case RuleId::introduce_ambiguity: return "introduce_ambiguity";
    case RuleId::split_subquestion: return "split_subquestion";
    case RuleId::inject_unanswerable: return "inject_unanswerable";
    }
    return "paraphrase";
}

std::optional<RuleId> parse_rule(std::string_view name) {
    for (RuleId r : all_rules()) {
        if (to_string(r) == name) return r;
    }
    return std::nullopt;
}

const std::vector<RuleId>& all_rules() {
    static const std::vector<RuleId> rules = {RuleId::paraphrase,          RuleId::metaphor,
                                              RuleId::add_constraint,      RuleId::introduce_ambiguity,
                                              RuleId::split_subquestion,   RuleId::inject_unanswerable};
    return rules;
}

std::string_view rule_description(RuleId rule) {
    switch (rule) {
    case RuleId::paraphrase: return "Reword the question with different vocabulary and sentence structure.";
    case RuleId::metaphor: return "Express the question figuratively, using a metaphor or indirect description.";
    case RuleId::add_constraint: return "Add a constraint on the form or scope of the answer.";
    case RuleId::introduce_ambiguity:
        return "Replace a specific name with a vaguer reference so the question is less explicit.";
    case RuleId::split_subquestion: return "Phrase the question as a sequence of dependent sub-questions.";
    case RuleId::inject_unanswerable:
        return "Append a related part that the documents cannot answer, and name that part separately.";
    }
    return "";
}

std::string_view to_string(CompletenessLevel level) {
    switch (level) {
    case CompletenessLevel::full: return "full";
    case CompletenessLevel::drop_one_clue: return "drop_one_clue";
    case CompletenessLevel::single_clue: return "single_clue";
    }
    return "full";
}

std::optional<CompletenessLevel> parse_level(std::string_view name) {
    for (auto l : {CompletenessLevel::full, CompletenessLevel::drop_one_clue, CompletenessLevel::single_clue}) {
        if (to_string(l) == name) return l;
    }
    return std::nullopt;
}

namespace {

struct Rejection {
    std::string reason;
};

/// Calls `attempt` with per-attempt seeds until it returns without throwing
/// Rejection, up to kGenerationAttempts times.
template <typename Fn>
auto generate_with_retries(std::string_view what, std::uint64_t seed, Fn&& attempt) {
    std::string last;
    for (int i = 0; i < kGenerationAttempts; ++i) {
        try {
            return attempt(derive_seed(seed, "attempt/" + std::to_string(i)));
        } catch (const Rejection& r) {
            last = r.reason;
            spdlog::debug("{}: attempt {} rejected: {}", what, i + 1, r.reason);
        }
    }
    throw Error(ErrorCode::RejectedGeneration, std::string(what) + ": " + last);
}

json parse_or_reject(const std::string& reply) {
    auto parsed = graph::parse_json_reply(reply);
    if (!parsed) throw Rejection{"reply is not a JSON object"};
    return *parsed;
}

std::string required_string(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string() || trim_view(j[key].get<std::string>()).empty()) {
        throw Rejection{std::string("missing field '") + key + "'"};
    }
    return trim(j[key].get<std::string>());
}

/// Answer sentences citing clue indices into `clue_ids`. With allow_uncited,
/// sentences may carry an empty citation list.
std::vector<AnswerSentence> parse_answer(const json& j, const std::vector<std::string>& clue_ids, bool allow_uncited) {
    if (!j.contains("answer") || !j["answer"].is_array() || j["answer"].empty()) {
        throw Rejection{"missing answer sentences"};
    }
    std::vector<AnswerSentence> out;
    for (const auto& s : j["answer"]) {
        if (!s.is_object() || !s.contains("text") || !s["text"].is_string()) throw Rejection{"malformed answer sentence"};
        AnswerSentence sentence;
        sentence.text = trim(s["text"].get<std::string>());
        if (sentence.text.empty()) throw Rejection{"empty answer sentence"};
        if (s.contains("clues") && s["clues"].is_array()) {
            for (const auto& idx : s["clues"]) {
                if (!idx.is_number_integer() || idx.get<long long>() < 0 ||
                    static_cast<std::size_t>(idx.get<long long>()) >= clue_ids.size()) {
                    throw Rejection{"answer cites clue index " + idx.dump() + " which does not exist"};
                }
                const auto& id = clue_ids[static_cast<std::size_t>(idx.get<long long>())];
                if (std::find(sentence.clue_ids.begin(), sentence.clue_ids.end(), id) == sentence.clue_ids.end()) {
                    sentence.clue_ids.push_back(id);
                }
            }
        }
        if (sentence.clue_ids.empty() && !allow_uncited) throw Rejection{"answer sentence cites no clue"};
        out.push_back(std::move(sentence));
    }
    return out;
}

std::vector<std::string> parse_rubric_items(const json& j) {
    std::vector<std::string> out;
    if (!j.contains("rubric") || !j["rubric"].is_array()) return out;
    for (const auto& r : j["rubric"]) {
        if (r.is_string() && !trim_view(r.get<std::string>()).empty()) out.push_back(trim(r.get<std::string>()));
    }
    return out;
}

std::string numbered(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += "[" + std::to_string(i) + "] " + items[i] + "\n";
    return out;
}

std::string default_query_id(std::string_view kind, const std::vector<Clue>& clues) {
    std::string key(kind);
    for (const auto& c : clues) key += "|" + c.clue_id;
    return "q" + sha256_hex(key).substr(0, 12);
}

QARecord assemble(std::string query_id, std::string query, std::vector<Clue> clues, std::vector<AnswerSentence> answer,
                  std::vector<std::string> rubric) {
    QARecord rec;
    rec.query_id = std::move(query_id);
    rec.query = std::move(query);
    rec.clues = std::move(clues);
    rec.standard_answer = std::move(answer);
    rec.rubric = std::move(rubric);
    rec.hop_count = static_cast<int>(datamodel::derive_gold_docs(rec).size());
    rec.lineage = {"gen"};
    return rec;
}

} // namespace

QARecord gen_single_hop(const Clue& clue, backends::ChatBackend& backend, std::uint64_t seed, std::string query_id) {
    if (clue.support.sentence_refs.empty()) {
        throw Error(ErrorCode::Precondition, "clue " + clue.clue_id + " has no support");
    }
    if (query_id.empty()) query_id = default_query_id("single", {clue});
    auto rec = generate_with_retries("single-hop generation for " + clue.clue_id, seed, [&](std::uint64_t s) {
        auto request = backends::make_request("gen_single_hop", {{"clue", clue.statement}}, s,
                                              json{{"clue", clue.statement}});
        auto j = parse_or_reject(backend.chat(request));
        auto question = required_string(j, "question");
        auto answer = parse_answer(j, {clue.clue_id}, false);
        return assemble(query_id, std::move(question), {clue}, std::move(answer), parse_rubric_items(j));
    });
    if (rec.rubric.empty()) rec.rubric = gen_rubric(rec, backend, derive_seed(seed, "rubric"));
    return rec;
}

QARecord gen_multi_hop(const std::vector<Clue>& clues, backends::ChatBackend& backend, std::uint64_t seed,
                       const std::vector<std::string>& bridges, std::string query_id) {
    std::set<std::string> chunks;
    for (const auto& c : clues) chunks.insert(c.support.docs.begin(), c.support.docs.end());
    if (chunks.size() < 2) {
        throw Error(ErrorCode::Precondition, "multi-hop generation needs clues from at least two chunks");
    }
    if (query_id.empty()) query_id = default_query_id("multi", clues);

    std::vector<std::string> statements;
    std::vector<std::string> ids;
    for (const auto& c : clues) {
        statements.push_back(c.statement);
        ids.push_back(c.clue_id);
    }
    auto rec = generate_with_retries("multi-hop generation " + query_id, seed, [&](std::uint64_t s) {
        auto request = backends::make_request(
            "gen_multi_hop", {{"bridges", bridges.empty() ? std::string("(none given)") : join(bridges, ", ")},
                              {"numbered_clues", numbered(statements)}},
            s, json{{"clues", statements}, {"bridges", bridges}});
        auto j = parse_or_reject(backend.chat(request));
        auto question = required_string(j, "question");
        auto answer = parse_answer(j, ids, false);
        return assemble(query_id, std::move(question), clues, std::move(answer), parse_rubric_items(j));
    });

    std::set<std::string> cited;
    for (const auto& s : rec.standard_answer) cited.insert(s.clue_ids.begin(), s.clue_ids.end());
    std::vector<std::string> uncited;
    for (const auto& id : ids) {
        if (!cited.contains(id)) uncited.push_back(id);
    }
    if (!uncited.empty()) {
        throw Error(ErrorCode::DegenerateHop, "answer for " + query_id + " ignores clue(s) " + join(uncited, ", "));
    }
    if (rec.rubric.empty()) rec.rubric = gen_rubric(rec, backend, derive_seed(seed, "rubric"));
    return rec;
}

QARecord apply_transform(const QARecord& rec, const TransformRule& rule, backends::ChatBackend& backend,
                         std::uint64_t seed) {
    const std::string rule_name(to_string(rule.rule_id));
    return generate_with_retries("transform " + rule_name + " of " + rec.query_id, seed, [&](std::uint64_t s) {
        auto request = backends::make_request(
            rule.prompt_template_id,
            {{"rule", rule_name}, {"rule_description", std::string(rule_description(rule.rule_id))}, {"query", rec.query}},
            s, json{{"rule", rule_name}, {"query", rec.query}});
        auto j = parse_or_reject(backend.chat(request));
        QARecord out = rec;
        out.query = required_string(j, "question");
        if (rule.rule_id == RuleId::inject_unanswerable) {
            auto part = required_string(j, "unanswerable_part");
            while (!part.empty() && (part.back() == '?' || part.back() == '.')) part.pop_back();
            out.rubric.push_back("Award 1 point if the response indicates that " + part +
                                 " cannot be determined from the available information.");
        }
        out.lineage.push_back(rule_name);
        return out;
    });
}

QARecord apply_completeness(const QARecord& rec, CompletenessLevel level, backends::ChatBackend& backend,
                            std::uint64_t seed) {
    if (level != CompletenessLevel::full && rec.clues.size() < 2) {
        throw Error(ErrorCode::Precondition, std::string(to_string(level)) + " needs at least two clues, " +
                                                 rec.query_id + " has " + std::to_string(rec.clues.size()));
    }
    if (rec.clues.empty()) {
        throw Error(ErrorCode::Precondition, rec.query_id + " has no clues");
    }
    std::vector<std::size_t> kept(rec.clues.size());
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
    Rng rng(derive_seed(seed, "completeness/" + rec.query_id));
    if (level == CompletenessLevel::drop_one_clue) {
        kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(rng.below(kept.size())));
    } else if (level == CompletenessLevel::single_clue) {
        kept = {static_cast<std::size_t>(rng.below(kept.size()))};
    }
    std::vector<std::string> statements;
    std::vector<std::string> dropped;
    for (std::size_t i = 0; i < rec.clues.size(); ++i) {
        if (std::find(kept.begin(), kept.end(), i) != kept.end()) statements.push_back(rec.clues[i].statement);
        else dropped.push_back(rec.clues[i].clue_id);
    }
    std::string entry = "completeness:" + std::string(to_string(level));
    if (!dropped.empty()) entry += ":drop=" + join(dropped, ",");

    return generate_with_retries("completeness " + std::string(to_string(level)) + " of " + rec.query_id, seed,
                                 [&](std::uint64_t s) {
                                     auto request = backends::make_request(
                                         "completeness", {{"query", rec.query}, {"numbered_clues", numbered(statements)}},
                                         s, json{{"query", rec.query}, {"clues", statements}});
                                     auto j = parse_or_reject(backend.chat(request));
                                     QARecord out = rec;
                                     out.query = required_string(j, "question");
                                     out.lineage.push_back(entry);
                                     return out;
                                 });
}

QARecord gen_variants(const QARecord& rec, backends::ChatBackend& backend, std::uint64_t seed) {
    const auto gold = datamodel::derive_gold_docs(rec);
    const int p = static_cast<int>(gold.size());
    if (p > datamodel::kMaxVariantHops) {
        throw Error(ErrorCode::TooManyHops, rec.query_id + " has " + std::to_string(p) + " gold chunks");
    }
    const std::vector<std::string> gold_list(gold.begin(), gold.end());
    QARecord out = rec;
    out.variants.clear();
    for (const auto& subset : datamodel::variant_subsets(p)) {
        AnswerVariant variant;
        for (std::size_t i : subset) variant.missing_docs.insert(gold_list[i]);

        std::vector<std::string> ids;
        json offered = json::array();
        std::vector<std::string> statements;
        for (const auto& c : rec.clues) {
            const bool lost = std::all_of(c.support.docs.begin(), c.support.docs.end(),
                                          [&](const std::string& d) { return variant.missing_docs.contains(d); });
            if (lost) continue;
            offered.push_back({{"index", ids.size()}, {"statement", c.statement}});
            statements.push_back(c.statement);
            ids.push_back(c.clue_id);
        }
        if (ids.empty()) {
            variant.text = {AnswerSentence{std::string(kUndeterminableAnswer), {}}};
        } else {
            std::string label;
            for (const auto& d : variant.missing_docs) label += d + ";";
            variant.text = generate_with_retries("variant of " + rec.query_id, derive_seed(seed, label), [&](std::uint64_t s) {
                auto request = backends::make_request("gen_variant", {{"query", rec.query}, {"numbered_clues", numbered(statements)}},
                                                      s, json{{"query", rec.query}, {"clues", offered}});
                auto j = parse_or_reject(backend.chat(request));
                return parse_answer(j, ids, true);
            });
        }
        out.variants.push_back(std::move(variant));
    }
    return out;
}

namespace {

std::optional<std::string> normalize_criterion(std::string c) {
    static const std::regex numbering(R"(^\s*(\(\d+\)|\d+[.)])\s*)");
    c = std::regex_replace(c, numbering, "");
    c = trim(c);
    if (c.rfind("Award 1 point if", 0) != 0) return std::nullopt;
    return c;
}

} // namespace

std::vector<std::string> gen_rubric(const QARecord& rec, backends::ChatBackend& backend, std::uint64_t seed,
                                    const corpus::ChunkIndex* corpus) {
    if (rec.standard_answer.empty()) {
        throw Error(ErrorCode::Precondition, "rubric generation needs a standard answer for " + rec.query_id);
    }
    const auto gold_sentences = datamodel::derive_gold_sentences(rec);
    const std::size_t max_criteria = gold_sentences.size() + 1;

    std::vector<std::string> answer;
    for (const auto& s : rec.standard_answer) answer.push_back(s.text);
    std::vector<std::string> evidence;
    if (corpus) {
        for (const auto& ref : gold_sentences) {
            if (auto t = corpus->sentence_text(ref.chunk_id, ref.sent_id)) evidence.emplace_back(*t);
        }
    } else {
        std::set<std::string> cited;
        for (const auto& s : rec.standard_answer) cited.insert(s.clue_ids.begin(), s.clue_ids.end());
        for (const auto& c : rec.clues) {
            if (cited.contains(c.clue_id)) evidence.push_back(c.statement);
        }
    }
    return generate_with_retries("rubric for " + rec.query_id, seed, [&](std::uint64_t s) {
        auto request = backends::make_request("gen_rubric",
                                              {{"query", rec.query},
                                               {"answer", join(answer, "\n")},
                                               {"gold_sentences", join(evidence, "\n")},
                                               {"max_criteria", std::to_string(max_criteria)}},
                                              s, json{{"answer", answer}, {"max_criteria", max_criteria}});
        auto j = parse_or_reject(backend.chat(request));
        std::vector<std::string> rubric;
        for (auto& item : parse_rubric_items(j)) {
            if (auto c = normalize_criterion(item)) rubric.push_back(*c);
        }
        if (rubric.empty()) throw Rejection{"no criterion of the form 'Award 1 point if ...'"};
        if (rubric.size() > max_criteria) rubric.resize(max_criteria);
        return rubric;
    });
}

namespace {

bool is_generation_failure(const Error& e) {
    switch (e.code()) {
    case ErrorCode::RejectedGeneration:
    case ErrorCode::DegenerateHop:
    case ErrorCode::NoCluesFound:
    case ErrorCode::Precondition:
    case ErrorCode::TooManyHops:
        return true;
    default:
        return false;
    }
}

/// Integer split of `total` according to `mix` using the largest remainder
/// method; ties go to the smaller hop count.
std::map<int, std::size_t> hop_targets(const std::map<int, double>& mix, std::size_t total) {
    double sum = 0;
    for (const auto& [h, w] : mix) {
        if (h < 1 || w < 0) throw Error(ErrorCode::InvalidConfig, "hop_mix entries need hop >= 1 and weight >= 0");
        sum += w;
    }
    std::map<int, std::size_t> out;
    if (sum <= 0) throw Error(ErrorCode::InvalidConfig, "hop_mix weights sum to zero");
    std::vector<std::pair<double, int>> remainders;
    std::size_t assigned = 0;
    for (const auto& [h, w] : mix) {
        const double exact = static_cast<double>(total) * w / sum;
        const auto base = static_cast<std::size_t>(std::floor(exact));
        out[h] = base;
        assigned += base;
        remainders.emplace_back(exact - static_cast<double>(base), h);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) out[remainders[i % remainders.size()].second] += 1;
    return out;
}

struct Outcome {
    std::optional<QARecord> record;
    std::string reason;
};

std::string format_query_id(std::size_t n) {
    std::string digits = std::to_string(n);
    return "q" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

json config_json(const SynthesisConfig& config) {
    json mix = json::object();
    for (const auto& [h, w] : config.hop_mix) mix[std::to_string(h)] = w;
    json rules = json::array();
    for (auto r : config.rules) rules.push_back(to_string(r));
    return {{"num_questions", config.num_questions},
            {"hop_mix", mix},
            {"variants", config.variants},
            {"max_rules", config.max_rules},
            {"rules", rules},
            {"completeness_rate", config.completeness_rate},
            {"max_degree", config.sampling.max_degree},
            {"enumeration_budget", config.sampling.enumeration_budget}};
}

} // namespace

SynthesisResult synthesize(const corpus::ChunkIndex& corpus, backends::ChatBackend& backend,
                           const SynthesisConfig& config, std::uint64_t seed) {
    if (config.max_rules < 0 || config.max_rules > static_cast<int>(config.rules.size())) {
        throw Error(ErrorCode::InvalidConfig, "max_rules must lie in [0, number of rules]");
    }
    if (config.completeness_rate < 0 || config.completeness_rate > 1) {
        throw Error(ErrorCode::InvalidConfig, "completeness_rate must lie in [0, 1]");
    }
    const auto& chunks = corpus.chunks();
    const std::size_t workers = std::max<std::size_t>(1, config.concurrency);
    SynthesisResult result;
    std::vector<std::string>& dropped = result.dropped;

    // Clues per chunk.
    auto extractions = parallel_map(chunks.size(), workers, [&](std::size_t i) -> std::optional<graph::ClueExtraction> {
        try {
            return graph::extract_clues(chunks[i], backend, derive_seed(seed, "clues/" + chunks[i].chunk_id));
        } catch (const Error& e) {
            if (!is_generation_failure(e)) throw;
            return std::nullopt;
        }
    });
    std::vector<Clue> clues;
    std::map<std::string, std::vector<std::size_t>> clues_of_chunk;
    std::size_t extraction_warnings = 0;
    for (auto& ex : extractions) {
        if (!ex) continue;
        extraction_warnings += ex->warnings.size();
        for (auto& c : ex->clues) {
            clues_of_chunk[c.support.sentence_refs.front().chunk_id].push_back(clues.size());
            clues.push_back(std::move(c));
        }
    }

    // Entities and graph.
    auto mentions = parallel_map(clues.size(), workers, [&](std::size_t i) {
        return graph::extract_entities(clues[i], backend, derive_seed(seed, "entities/" + clues[i].clue_id));
    });
    std::vector<graph::EntityMention> all_mentions;
    for (const auto& m : mentions) all_mentions.insert(all_mentions.end(), m.begin(), m.end());
    const auto entities = graph::resolve_entities(all_mentions);
    result.graph = graph::build_graph(entities);
    std::map<std::string, std::string> entity_of_key;
    for (const auto& e : entities) {
        for (const auto& key : e.aliases) entity_of_key[key] = e.entity_id;
    }
    std::vector<std::set<std::string>> clue_entities(clues.size());
    for (std::size_t i = 0; i < clues.size(); ++i) {
        for (const auto& m : mentions[i]) clue_entities[i].insert(entity_of_key.at(m.normalized));
    }

    const auto targets = hop_targets(config.hop_mix, config.num_questions);
    std::vector<QARecord> base;
    std::map<int, std::size_t> produced;

    auto finish = [&](QARecord rec, std::uint64_t s) {
        if (config.variants) rec = gen_variants(rec, backend, derive_seed(s, "variants"));
        return rec;
    };

    for (const auto& [hops, target] : targets) {
        if (target == 0) continue;
        std::vector<Outcome> outcomes;
        std::size_t want = 2 * target + 4;
        if (hops == 1) {
            std::vector<std::size_t> order(clues.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            Rng rng(derive_seed(seed, "single"));
            rng.shuffle(order);
            order.resize(std::min(order.size(), want));
            outcomes = parallel_map(order.size(), workers, [&](std::size_t i) -> Outcome {
                const Clue& clue = clues[order[i]];
                const auto s = derive_seed(seed, "single/" + clue.clue_id);
                try {
                    return {finish(gen_single_hop(clue, backend, s), s), ""};
                } catch (const Error& e) {
                    if (!is_generation_failure(e)) throw;
                    return {std::nullopt, clue.clue_id + ": " + e.what()};
                }
            });
        } else {
            const auto groups = graph::sample_multihop_groups(result.graph, hops, want,
                                                              derive_seed(seed, "groups/" + std::to_string(hops)),
                                                              config.sampling);
            outcomes = parallel_map(groups.size(), workers, [&](std::size_t g) -> Outcome {
                const auto& group = groups[g];
                const std::string label = join(group, ",");
                std::vector<Clue> picked;
                std::set<std::string> bridge_ids;
                for (std::size_t i = 0; i < group.size(); ++i) {
                    std::set<std::string> near;
                    for (std::size_t j : {i - 1, i + 1}) {
                        if (j >= group.size()) continue;
                        for (const auto& e : result.graph.shared_entities(group[i], group[j])) {
                            if (result.graph.degree(e) <= config.sampling.max_degree) near.insert(e);
                        }
                    }
                    const Clue* choice = nullptr;
                    auto it = clues_of_chunk.find(group[i]);
                    if (it != clues_of_chunk.end()) {
                        for (std::size_t ci : it->second) {
                            for (const auto& e : clue_entities[ci]) {
                                if (near.contains(e)) {
                                    choice = &clues[ci];
                                    bridge_ids.insert(e);
                                    break;
                                }
                            }
                            if (choice) break;
                        }
                    }
                    if (!choice) return {std::nullopt, label + ": no clue mentions a bridge entity"};
                    picked.push_back(*choice);
                }
                std::vector<std::string> bridges;
                for (const auto& e : bridge_ids) bridges.push_back(result.graph.entities.at(e).canonical);
                const auto s = derive_seed(seed, "multi/" + label);
                try {
                    return {finish(gen_multi_hop(picked, backend, s, bridges), s), ""};
                } catch (const Error& e) {
                    if (!is_generation_failure(e)) throw;
                    return {std::nullopt, label + ": " + e.what()};
                }
            });
        }
        std::size_t taken = 0;
        for (auto& o : outcomes) {
            if (taken == target) break;
            if (!o.record) {
                dropped.push_back(o.reason);
                continue;
            }
            auto report = datamodel::validate(*o.record, corpus, {.require_rubric = true});
            if (!report.ok()) {
                dropped.push_back(o.record->query_id + ": failed validation " + report.to_json().dump());
                continue;
            }
            base.push_back(std::move(*o.record));
            ++taken;
        }
        produced[hops] = taken;
        if (taken < target) {
            spdlog::warn("{}-hop: produced {} of {} requested questions", hops, taken, target);
        }
    }
    for (std::size_t i = 0; i < base.size(); ++i) base[i].query_id = format_query_id(i + 1);

    // Transform schedule and completeness variation per base record.
    std::map<std::string, std::size_t> rule_counts;
    std::map<std::string, std::size_t> level_counts;
    struct Derived {
        std::optional<QARecord> transformed;
        std::optional<QARecord> completed;
        std::vector<std::string> failures;
    };
    auto derived = parallel_map(base.size(), workers, [&](std::size_t i) -> Derived {
        const QARecord& rec = base[i];
        Derived d;
        Rng rng(derive_seed(seed, "schedule/" + rec.query_id));
        const auto n_rules = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(config.max_rules) + 1));
        std::vector<RuleId> rules = config.rules;
        rng.shuffle(rules);
        rules.resize(n_rules);
        const bool vary = rng.unit() < config.completeness_rate;
        std::vector<CompletenessLevel> levels = {CompletenessLevel::full};
        if (rec.clues.size() >= 2) {
            levels.push_back(CompletenessLevel::drop_one_clue);
            levels.push_back(CompletenessLevel::single_clue);
        }
        const auto level = levels[static_cast<std::size_t>(rng.below(levels.size()))];
        try {
            if (!rules.empty()) {
                QARecord t = rec;
                for (std::size_t r = 0; r < rules.size(); ++r) {
                    t = apply_transform(t, TransformRule{rules[r]}, backend,
                                        derive_seed(seed, "transform/" + rec.query_id + "/" + std::to_string(r)));
                }
                t.query_id = rec.query_id + "-t";
                d.transformed = std::move(t);
            }
        } catch (const Error& e) {
            if (!is_generation_failure(e)) throw;
            d.failures.push_back(rec.query_id + "-t: " + e.what());
        }
        try {
            if (vary) {
                auto c = apply_completeness(rec, level, backend, derive_seed(seed, "completeness/" + rec.query_id));
                c.query_id = rec.query_id + "-c";
                d.completed = std::move(c);
            }
        } catch (const Error& e) {
            if (!is_generation_failure(e)) throw;
            d.failures.push_back(rec.query_id + "-c: " + e.what());
        }
        return d;
    });

    auto& records = result.dataset.records;
    std::size_t transformed = 0;
    std::size_t completed = 0;
    for (std::size_t i = 0; i < base.size(); ++i) {
        records.push_back(base[i]);
        auto& d = derived[i];
        dropped.insert(dropped.end(), d.failures.begin(), d.failures.end());
        for (auto* extra : {&d.transformed, &d.completed}) {
            if (!*extra) continue;
            auto report = datamodel::validate(**extra, corpus, {.require_rubric = true});
            if (!report.ok()) {
                dropped.push_back((*extra)->query_id + ": failed validation " + report.to_json().dump());
                continue;
            }
            for (const auto& step : (*extra)->lineage) {
                if (step.rfind("completeness:", 0) == 0) {
                    ++level_counts[step.substr(13, step.find(':', 13) - 13)];
                } else if (step != "gen") {
                    ++rule_counts[step];
                }
            }
            (extra == &d.transformed ? transformed : completed) += 1;
            records.push_back(std::move(**extra));
        }
    }

    std::map<std::string, std::size_t> per_hop;
    for (const auto& r : records) per_hop[std::to_string(r.hop_count)] += 1;
    std::map<std::string, std::size_t> base_per_hop;
    for (const auto& [h, n] : produced) base_per_hop[std::to_string(h)] = n;

    json manifest;
    manifest["seed"] = seed;
    manifest["corpus_hash"] = corpus::corpus_hash(chunks);
    manifest["template_hashes"] = backends::template_hashes();
    manifest["generator_model"] = backend.model_name();
    manifest["synthesis_config"] = config_json(config);
    manifest["rule_schedule"] = {{"applied", rule_counts},
                                 {"completeness_levels", level_counts},
                                 {"transformed_records", transformed},
                                 {"completeness_records", completed}};
    manifest["counts_per_hop"] = per_hop;
    manifest["base_counts_per_hop"] = base_per_hop;
    manifest["clues"] = clues.size();
    manifest["clue_warnings"] = extraction_warnings;
    manifest["entities"] = entities.size();
    manifest["records"] = records.size();
    manifest["dropped"] = dropped.size();
    result.manifest = manifest;

    result.dataset.meta = {{"corpus_hash", manifest["corpus_hash"]},
                           {"template_hashes", manifest["template_hashes"]},
                           {"seed", seed},
                           {"generator_model", backend.model_name()}};
    return result;
}

} // namespace dragon::synthesis
