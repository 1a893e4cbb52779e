// Offline stand-in for an instruction-following model. Each known prompt tag
// gets a reply in the format its template asks for, computed from the
// request's structured context. Replies are pure functions of the request.

#include "dragon/backends.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace dragon::backends {

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }

std::string strip_final_punct(std::string s) {
    while (!s.empty() && (s.back() == '.' || s.back() == '?' || s.back() == '!' || is_space(s.back()))) s.pop_back();
    return s;
}

std::string lower_first(std::string s) {
    // Keep proper nouns capitalised: only lowercase a leading function word.
    static const std::set<std::string, std::less<>> function_words = {
        "The", "A", "An", "In", "On", "At", "It", "This", "That", "These", "Those", "There", "Each", "Some",
        "What", "Which", "Who", "Where", "When", "How", "Why", "Given", "Tell", "Could", "First", "Through",
    };
    auto sp = s.find(' ');
    auto first = s.substr(0, sp);
    if (function_words.contains(first)) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    return s;
}

std::string collapse(std::string_view s) {
    std::string out;
    bool pending = false;
    for (char c : trim_view(s)) {
        if (is_space(c)) {
            pending = true;
        } else {
            if (pending) out.push_back(' ');
            pending = false;
            out.push_back(c);
        }
    }
    return out;
}

std::uint64_t request_hash(const ChatRequest& r) {
    return splitmix64(fnv1a64(r.system + "\x1f" + r.user) ^ r.seed);
}

// --- entity heuristic -------------------------------------------------------

struct Word {
    std::size_t begin;
    std::size_t end;      // excluding trailing punctuation
    bool breaks_after;    // token ended with punctuation
};

std::vector<Word> split_words(std::string_view s) {
    std::vector<Word> out;
    for (const auto& t : whitespace_tokens(s)) {
        std::size_t b = t.begin;
        std::size_t e = t.end;
        while (b < e && !std::isalnum(static_cast<unsigned char>(s[b])) && static_cast<unsigned char>(s[b]) < 0x80) ++b;
        bool brk = false;
        while (e > b && !std::isalnum(static_cast<unsigned char>(s[e - 1])) && static_cast<unsigned char>(s[e - 1]) < 0x80) {
            --e;
            brk = true;
        }
        if (e > b) out.push_back({b, e, brk});
    }
    return out;
}

const std::set<std::string, std::less<>>& connector_words() {
    static const std::set<std::string, std::less<>> w = {"of", "the", "de", "la", "du", "von", "van", "der"};
    return w;
}

const std::set<std::string, std::less<>>& capitalised_function_words() {
    static const std::set<std::string, std::less<>> w = {
        "The",   "A",     "An",    "In",    "On",   "At",    "It",     "He",      "She",  "They",  "We",
        "This",  "That",  "These", "Those", "His",  "Her",   "Their",  "Its",     "When", "Where", "What",
        "Who",   "Which", "How",   "Why",   "After", "Before", "During", "If",     "As",   "For",   "With",
        "From",  "By",    "To",    "There", "Also", "However", "Each",  "Some",   "Many", "Most",  "All",
        "One",   "Both",  "Once",  "While", "Although", "Because", "Unlike", "Like", "Since", "Until", "Not",
        "Award", "Yes",   "No",
    };
    return w;
}

std::vector<std::string> heuristic_entities(std::string_view statement) {
    const auto words = split_words(statement);
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::size_t i = 0;
    while (i < words.size()) {
        auto text = [&](std::size_t k) { return statement.substr(words[k].begin, words[k].end - words[k].begin); };
        if (!is_upper(statement[words[i].begin]) || capitalised_function_words().contains(text(i))) {
            ++i;
            continue;
        }
        std::size_t last = i;
        std::size_t k = i;
        while (!words[k].breaks_after && k + 1 < words.size()) {
            const auto next = text(k + 1);
            if (is_upper(statement[words[k + 1].begin]) && !capitalised_function_words().contains(next)) {
                last = ++k;
            } else if (connector_words().contains(next) && k + 2 < words.size() && !words[k + 1].breaks_after &&
                       is_upper(statement[words[k + 2].begin])) {
                k += 2;
                last = k;
            } else {
                break;
            }
        }
        std::string surface(statement.substr(words[i].begin, words[last].end - words[i].begin));
        if (seen.insert(surface).second) out.push_back(surface);
        i = last + 1;
    }
    return out;
}

std::string topic_of(std::string_view statement) {
    auto ents = heuristic_entities(statement);
    if (!ents.empty()) return ents.front();
    auto words = content_words(statement);
    words.resize(std::min<std::size_t>(words.size(), 3));
    return words.empty() ? std::string("this subject") : join(words, " ");
}

std::vector<std::string> context_strings(const json& ctx, const char* key) {
    std::vector<std::string> out;
    if (ctx.contains(key) && ctx[key].is_array()) {
        for (const auto& v : ctx[key]) {
            if (v.is_string()) out.push_back(v.get<std::string>());
        }
    }
    return out;
}

std::string ctx_string(const json& ctx, const char* key) {
    if (ctx.contains(key) && ctx[key].is_string()) return ctx[key].get<std::string>();
    return {};
}

double coverage(std::string_view reference, std::string_view answer) {
    auto ref = content_words(reference);
    if (ref.empty()) return 1.0;
    auto ans = content_words(answer);
    std::set<std::string> have(ans.begin(), ans.end());
    std::size_t hit = 0;
    for (const auto& w : ref) hit += have.contains(w) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(ref.size());
}

std::string first_sentence(std::string_view text) {
    auto t = collapse(text);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if ((t[i] == '.' || t[i] == '?' || t[i] == '!') && t[i + 1] == ' ') return t.substr(0, i + 1);
    }
    return t;
}

std::string rubric_for(const std::string& statement) {
    return "Award 1 point if the response states that " + lower_first(strip_final_punct(collapse(statement))) + ".";
}

// --- per-tag replies --------------------------------------------------------

std::string reply_extract_clues(const json& ctx) {
    json clues = json::array();
    const auto sentences = context_strings(ctx, "sentences");
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        auto s = collapse(sentences[i]);
        if (count_whitespace_tokens(s) < 3) continue;
        clues.push_back({{"statement", s}, {"sentences", {i}}});
    }
    return json{{"clues", clues}}.dump();
}

std::string reply_single_hop(const json& ctx, std::uint64_t h) {
    const auto statement = collapse(ctx_string(ctx, "clue"));
    const auto topic = topic_of(statement);
    auto words = content_words(statement);
    std::vector<std::string> detail;
    const auto topic_words = content_words(topic);
    for (const auto& w : words) {
        if (std::find(topic_words.begin(), topic_words.end(), w) == topic_words.end()) detail.push_back(w);
        if (detail.size() == 3) break;
    }
    static constexpr const char* forms[] = {
        "What is known about {T} concerning {D}?",
        "What do the documents say about {T} and {D}?",
        "Which fact about {T} involves {D}?",
    };
    std::string q = forms[h % std::size(forms)];
    q.replace(q.find("{T}"), 3, topic);
    q.replace(q.find("{D}"), 3, detail.empty() ? std::string("its details") : join(detail, " "));
    return json{{"question", q},
                {"answer", json::array({{{"text", statement}, {"clues", {0}}}})},
                {"rubric", {rubric_for(statement)}}}
        .dump();
}

std::string reply_multi_hop(const json& ctx, std::uint64_t h) {
    const auto clues = context_strings(ctx, "clues");
    const auto bridges = context_strings(ctx, "bridges");
    std::vector<std::string> topics;
    for (const auto& c : clues) {
        auto t = topic_of(c);
        if (std::find(topics.begin(), topics.end(), t) == topics.end()) topics.push_back(t);
    }
    const std::string bridge = bridges.empty() ? (topics.empty() ? "them" : topics.front()) : bridges.front();
    static constexpr const char* forms[] = {
        "How is {B} connected to {X}?",
        "What links {B} with {X}?",
        "Through {B}, what can be said about {X}?",
    };
    std::vector<std::string> others;
    for (const auto& t : topics) {
        if (t != bridge) others.push_back(t);
    }
    if (others.empty()) others.push_back("the related entries");
    std::string q = forms[h % std::size(forms)];
    q.replace(q.find("{B}"), 3, bridge);
    q.replace(q.find("{X}"), 3, join(others, " and "));
    json answer = json::array();
    json rubric = json::array();
    for (std::size_t i = 0; i < clues.size(); ++i) {
        answer.push_back({{"text", collapse(clues[i])}, {"clues", {i}}});
        rubric.push_back(rubric_for(clues[i]));
    }
    return json{{"question", q}, {"answer", answer}, {"rubric", rubric}}.dump();
}

std::string reply_transform(const json& ctx, std::uint64_t h) {
    const std::string rule = ctx_string(ctx, "rule");
    const std::string query = collapse(ctx_string(ctx, "query"));
    const std::string core = strip_final_punct(query);
    json out;
    if (rule == "paraphrase") {
        static constexpr const char* forms[] = {"Could you explain {Q}?", "I would like to know: {Q}?", "Tell me, {Q}?"};
        std::string q = forms[h % std::size(forms)];
        q.replace(q.find("{Q}"), 3, lower_first(core));
        out["question"] = q;
    } else if (rule == "metaphor") {
        out["question"] = "Peeling back the layers of the story, " + lower_first(core) + "?";
    } else if (rule == "add_constraint") {
        static constexpr const char* forms[] = {" Answer in at most two sentences.", " Cite only facts stated in the sources.",
                                                " Keep the answer focused on the named entities."};
        out["question"] = core + "?" + forms[h % std::size(forms)];
    } else if (rule == "introduce_ambiguity") {
        auto ents = heuristic_entities(core);
        std::string q = core;
        if (!ents.empty()) {
            auto pos = q.find(ents.back());
            q.replace(pos, ents.back().size(), "that one");
        }
        out["question"] = q + "?";
    } else if (rule == "split_subquestion") {
        out["question"] = "First, " + lower_first(core) + "? And what follows from that?";
    } else if (rule == "inject_unanswerable") {
        const std::string part = "what did people think of it before any of this was recorded";
        out["question"] = core + "? Also, " + part + "?";
        out["unanswerable_part"] = part;
    } else {
        out["question"] = query;
    }
    return out.dump();
}

std::string reply_completeness(const json& ctx) {
    const auto clues = context_strings(ctx, "clues");
    if (clues.empty()) return json{{"question", ctx_string(ctx, "query")}}.dump();
    const auto topic = topic_of(clues.front());
    return json{{"question", "Given that " + lower_first(strip_final_punct(collapse(clues.front()))) +
                                 ", what else is known about " + topic + "?"}}
        .dump();
}

std::string reply_variant(const json& ctx) {
    json answer = json::array();
    if (ctx.contains("clues") && ctx["clues"].is_array()) {
        for (const auto& c : ctx["clues"]) {
            answer.push_back({{"text", collapse(c.at("statement").get<std::string>())}, {"clues", {c.at("index")}}});
        }
    }
    answer.push_back({{"text", "The remaining details cannot be determined from the available information."},
                      {"clues", json::array()}});
    return json{{"answer", answer}}.dump();
}

std::string reply_rubric(const json& ctx) {
    json rubric = json::array();
    const auto answer = context_strings(ctx, "answer");
    const std::size_t cap = ctx.value("max_criteria", std::size_t{1});
    for (const auto& s : answer) {
        if (rubric.size() >= cap) break;
        rubric.push_back(rubric_for(s));
    }
    return json{{"rubric", rubric}}.dump();
}

std::string reply_rr_plan(const json& ctx) {
    const std::string query = collapse(ctx_string(ctx, "query"));
    std::vector<std::string> parts;
    std::size_t pos = 0;
    const std::string sep = " and ";
    while (true) {
        auto next = query.find(sep, pos);
        parts.push_back(trim(query.substr(pos, next == std::string::npos ? std::string::npos : next - pos)));
        if (next == std::string::npos || parts.size() == 3) break;
        pos = next + sep.size();
    }
    std::erase_if(parts, [](const std::string& p) { return count_whitespace_tokens(p) < 2; });
    if (parts.size() < 2) parts = {query};
    return json{{"subqueries", parts}}.dump();
}

std::string reply_rag_answer(const json& ctx) {
    const auto evidence = context_strings(ctx, "evidence");
    if (evidence.empty()) return "The documents do not contain the answer.";
    std::string out;
    for (std::size_t i = 0; i < evidence.size() && i < 2; ++i) {
        if (i) out += ' ';
        out += first_sentence(evidence[i]);
    }
    return out;
}

std::string reply_flare_generate(const json& ctx) {
    const auto iteration = ctx.value("iteration", 0);
    if (iteration >= 2) return "[DONE]";
    const auto evidence = context_strings(ctx, "evidence");
    if (static_cast<std::size_t>(iteration) < evidence.size()) return first_sentence(evidence[iteration]);
    return "The question concerns " + lower_first(strip_final_punct(collapse(ctx_string(ctx, "query")))) + ".";
}

std::string reply_react(const json& ctx) {
    const auto step = ctx.value("step", 0);
    if (step == 0) return "RETRIEVE[" + collapse(ctx_string(ctx, "query")) + "]";
    if (step == 1) return "AGGREGATE";
    return "STOP[" + reply_rag_answer(ctx) + "]";
}

} // namespace

std::string simulate_reply(const ChatRequest& request) {
    const auto& ctx = request.context;
    const auto h = request_hash(request);
    const auto& tag = request.tag;
    if (tag == "clean") return ctx_string(ctx, "content");
    if (tag == "extract_clues") return reply_extract_clues(ctx);
    if (tag == "extract_entities") return json{{"entities", heuristic_entities(ctx_string(ctx, "statement"))}}.dump();
    if (tag == "gen_single_hop") return reply_single_hop(ctx, h);
    if (tag == "gen_multi_hop") return reply_multi_hop(ctx, h);
    if (tag == "transform") return reply_transform(ctx, h);
    if (tag == "completeness") return reply_completeness(ctx);
    if (tag == "gen_variant") return reply_variant(ctx);
    if (tag == "gen_rubric") return reply_rubric(ctx);
    if (tag == "rr_plan") return reply_rr_plan(ctx);
    if (tag == "rag_answer") return reply_rag_answer(ctx);
    if (tag == "flare_generate") return reply_flare_generate(ctx);
    if (tag == "flare_judge") return ctx.value("iteration", 0) >= 1 ? "DONE" : "CONTINUE";
    if (tag == "react_step") return reply_react(ctx);
    if (tag == "judge_sentence") {
        return coverage(ctx_string(ctx, "sentence"), ctx_string(ctx, "answer")) >= 0.6 ? "YES" : "NO";
    }
    if (tag == "judge_criterion") {
        std::string criterion = ctx_string(ctx, "criterion");
        const std::string lead = "Award 1 point if the response";
        if (criterion.rfind(lead, 0) == 0) criterion = criterion.substr(lead.size());
        return coverage(criterion, ctx_string(ctx, "answer")) >= 0.5 ? "YES" : "NO";
    }
    if (tag == "judge_lj") {
        return coverage(ctx_string(ctx, "reference"), ctx_string(ctx, "answer")) >= 0.5 ? "YES" : "NO";
    }
    return {};
}

} // namespace dragon::backends
