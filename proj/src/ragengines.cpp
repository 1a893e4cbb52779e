#include "dragon/ragengines.hpp"

#include "dragon/error.hpp"
#include "dragon/graph.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <set>

namespace dragon::rag {

std::string_view to_string(StepKind kind) {
    switch (kind) {
    case StepKind::plan: return "plan";
    case StepKind::retrieve: return "retrieve";
    case StepKind::generate: return "generate";
    case StepKind::judge_continue: return "judge_continue";
    case StepKind::aggregate: return "aggregate";
    case StepKind::stop: return "stop";
    }
    return "plan";
}

std::string_view to_string(Engine engine) {
    switch (engine) {
    case Engine::vanilla: return "vanilla";
    case Engine::rr: return "rr";
    case Engine::flare: return "flare";
    case Engine::react: return "react";
    }
    return "vanilla";
}

std::optional<Engine> parse_engine(std::string_view name) {
    for (auto e : {Engine::vanilla, Engine::rr, Engine::flare, Engine::react}) {
        if (to_string(e) == name) return e;
    }
    return std::nullopt;
}

std::size_t RagTrace::count(StepKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [&](const TraceStep& s) { return s.kind == kind; }));
}

json RagTrace::to_json() const {
    json s = json::array();
    for (const auto& step : steps) s.push_back({{"kind", to_string(step.kind)}, {"payload", step.payload}});
    json accounting = {{"retrieve_calls", retrieve_calls}, {"chat_calls", chat_calls}, {"interactions", interactions}};
    if (wall_ms) accounting["wall_ms"] = *wall_ms;
    return {{"query_id", query_id},
            {"engine", engine},
            {"steps", s},
            {"final_answer", final_answer},
            {"retrieved_all", retrieved_all},
            {"accounting", accounting}};
}

std::vector<std::string> check_trace(const RagTrace& trace, std::size_t max_retrieves) {
    std::vector<std::string> problems;
    const auto stops = trace.count(StepKind::stop);
    if (stops != 1) problems.push_back("expected exactly one stop step, found " + std::to_string(stops));
    if (trace.steps.empty() || trace.steps.back().kind != StepKind::stop) problems.push_back("last step is not stop");
    const auto retrieves = trace.count(StepKind::retrieve);
    if (retrieves > max_retrieves) {
        problems.push_back(std::to_string(retrieves) + " retrieve steps exceed the cap of " +
                           std::to_string(max_retrieves));
    }
    std::set<std::string> seen;
    for (const auto& id : trace.retrieved_all) {
        if (!seen.insert(id).second) problems.push_back("retrieved_all repeats " + id);
    }
    return problems;
}

std::vector<retrieval::ScoredChunk> Retriever::retrieve(const std::string& query, std::size_t k) const {
    return retrieval::search(index_, query, k, embed_);
}

std::string Retriever::text(const std::string& chunk_id) const {
    const auto* c = corpus_.find(chunk_id);
    if (!c) throw Error(ErrorCode::Precondition, "index entry " + chunk_id + " is missing from the corpus");
    return c->text;
}

namespace {

/// Per-run bookkeeping shared by all engines.
class Run {
public:
    Run(std::string_view engine, const std::string& query_id, const std::string& query, const Retriever& retriever,
        backends::ChatBackend& gen, const EngineOptions& options)
        : query_(query), retriever_(retriever), gen_(gen), options_(options), start_(std::chrono::steady_clock::now()) {
        trace_.query_id = query_id;
        trace_.engine = std::string(engine);
    }

    std::vector<retrieval::ScoredChunk> retrieve(const std::string& q, std::size_t k, json extra = json::object()) {
        auto hits = retriever_.retrieve(q, k);
        ++trace_.retrieve_calls;
        json results = json::array();
        for (const auto& h : hits) {
            results.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}});
            if (std::find(trace_.retrieved_all.begin(), trace_.retrieved_all.end(), h.chunk_id) ==
                trace_.retrieved_all.end()) {
                trace_.retrieved_all.push_back(h.chunk_id);
            }
        }
        extra["query"] = q;
        extra["k"] = k;
        extra["results"] = results;
        step(StepKind::retrieve, std::move(extra));
        return hits;
    }

    std::string chat(std::string_view tag, const std::map<std::string, std::string>& values, json context) {
        ++trace_.chat_calls;
        auto seed = derive_seed(options_.seed, trace_.query_id + "/" + std::to_string(trace_.chat_calls));
        return gen_.chat(backends::make_request(tag, values, seed, std::move(context)));
    }

    void add_evidence(const std::string& chunk_id) {
        if (std::find(evidence_ids_.begin(), evidence_ids_.end(), chunk_id) == evidence_ids_.end()) {
            evidence_ids_.push_back(chunk_id);
        }
    }
    const std::vector<std::string>& evidence_ids() const { return evidence_ids_; }

    std::vector<std::string> evidence_texts(const std::vector<std::string>& ids) const {
        std::vector<std::string> out;
        for (const auto& id : ids) out.push_back(retriever_.text(id));
        return out;
    }

    static std::string format_evidence(const std::vector<std::string>& ids, const std::vector<std::string>& texts) {
        if (ids.empty()) return "(none)";
        std::string out;
        for (std::size_t i = 0; i < ids.size(); ++i) out += "[" + ids[i] + "] " + texts[i] + "\n\n";
        return out;
    }

    /// Final answer from the given chunks through the rag_answer template.
    std::string answer_from(const std::vector<std::string>& ids, json extra = json::object()) {
        const auto texts = evidence_texts(ids);
        auto answer = trim(chat("rag_answer", {{"query", query_}, {"evidence", format_evidence(ids, texts)}},
                                json{{"query", query_}, {"evidence", texts}}));
        extra["prompt"] = "rag_answer";
        extra["evidence"] = ids;
        extra["text"] = answer;
        step(StepKind::generate, std::move(extra));
        return answer;
    }

    void step(StepKind kind, json payload) { trace_.steps.push_back({kind, std::move(payload)}); }

    RagTrace finish(std::string answer, json stop_payload = json::object()) {
        trace_.final_answer = std::move(answer);
        step(StepKind::stop, std::move(stop_payload));
        if (options_.timing) {
            trace_.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
        }
        return std::move(trace_);
    }

    RagTrace& trace() { return trace_; }
    const std::string& query() const { return query_; }

private:
    std::string query_;
    const Retriever& retriever_;
    backends::ChatBackend& gen_;
    const EngineOptions& options_;
    std::chrono::steady_clock::time_point start_;
    RagTrace trace_;
    std::vector<std::string> evidence_ids_;
};

void require_iterations(const EngineOptions& options) {
    if (options.max_iter < 1) throw Error(ErrorCode::Precondition, "max_iter must be at least 1");
}

} // namespace

RagTrace run_vanilla(const std::string& query_id, const std::string& query, const Retriever& retriever,
                     backends::ChatBackend& gen, const EngineOptions& options) {
    Run run("vanilla", query_id, query, retriever, gen, options);
    std::vector<std::string> ids;
    for (const auto& h : run.retrieve(query, options.k)) ids.push_back(h.chunk_id);
    auto answer = run.answer_from(ids);
    return run.finish(answer);
}

RagTrace run_rr(const std::string& query_id, const std::string& query, const Retriever& retriever,
                backends::ChatBackend& gen, const EngineOptions& options) {
    require_iterations(options);
    Run run("rr", query_id, query, retriever, gen, options);
    const auto reply = run.chat("rr_plan", {{"query", query}}, json{{"query", query}});
    std::vector<std::string> subqueries;
    if (auto parsed = graph::parse_json_reply(reply); parsed && parsed->contains("subqueries") &&
                                                      (*parsed)["subqueries"].is_array()) {
        for (const auto& q : (*parsed)["subqueries"]) {
            if (q.is_string() && !trim_view(q.get<std::string>()).empty()) subqueries.push_back(trim(q.get<std::string>()));
        }
    }
    const bool fallback = subqueries.empty();
    if (fallback) subqueries = {query};
    const auto cap = static_cast<std::size_t>(options.max_iter);
    const bool truncated = subqueries.size() > cap;
    if (truncated) subqueries.resize(cap);
    run.step(StepKind::plan, {{"subqueries", subqueries}, {"fallback_to_query", fallback}, {"truncated", truncated}});

    // Union of per-sub-query hits, re-ranked by the best score each chunk got.
    std::map<std::string, double> best;
    for (const auto& q : subqueries) {
        for (const auto& h : run.retrieve(q, options.per_query_k)) {
            auto [it, inserted] = best.emplace(h.chunk_id, h.score);
            if (!inserted) it->second = std::max(it->second, h.score);
        }
    }
    std::vector<retrieval::ScoredChunk> pooled;
    for (const auto& [id, score] : best) pooled.push_back({id, score});
    std::sort(pooled.begin(), pooled.end(), [](const auto& a, const auto& b) {
        return a.score != b.score ? a.score > b.score : a.chunk_id < b.chunk_id;
    });
    if (pooled.size() > options.rr_keep) pooled.resize(options.rr_keep);
    std::vector<std::string> kept;
    json kept_json = json::array();
    for (const auto& p : pooled) {
        kept.push_back(p.chunk_id);
        kept_json.push_back({{"chunk_id", p.chunk_id}, {"score", p.score}});
    }
    run.step(StepKind::aggregate, {{"method", "max_cosine"}, {"candidates", best.size()}, {"kept", kept_json}});
    auto answer = run.answer_from(kept);
    return run.finish(answer);
}

RagTrace run_flare(const std::string& query_id, const std::string& query, const Retriever& retriever,
                   backends::ChatBackend& gen, const EngineOptions& options) {
    require_iterations(options);
    Run run("flare", query_id, query, retriever, gen, options);
    std::vector<std::string> draft;
    std::string stop_reason = "max_iter";
    for (int iteration = 0; iteration < options.max_iter; ++iteration) {
        const auto texts = run.evidence_texts(run.evidence_ids());
        const auto evidence = Run::format_evidence(run.evidence_ids(), texts);
        const auto draft_text = draft.empty() ? std::string("(empty)") : join(draft, " ");
        ++run.trace().interactions;
        auto reply = trim(run.chat("flare_generate", {{"query", query}, {"evidence", evidence}, {"draft", draft_text}},
                                   json{{"query", query}, {"evidence", texts}, {"iteration", iteration}}));
        // A done marker may follow a final sentence; that sentence is still verified.
        bool done = false;
        if (auto pos = reply.find(kFlareDoneMarker); pos != std::string::npos) {
            done = true;
            reply = trim(reply.substr(0, pos) + reply.substr(pos + kFlareDoneMarker.size()));
        }
        run.step(StepKind::generate, {{"prompt", "flare_generate"}, {"iteration", iteration}, {"text", reply},
                                      {"done", done}});
        if (reply.empty()) {
            stop_reason = "generator_done";
            break;
        }
        draft.push_back(reply);
        for (const auto& h : run.retrieve(reply, options.per_query_k, {{"iteration", iteration}})) {
            run.add_evidence(h.chunk_id);
        }
        if (done) {
            stop_reason = "generator_done";
            break;
        }
        const auto verdict = run.chat(
            "flare_judge",
            {{"query", query},
             {"evidence", Run::format_evidence(run.evidence_ids(), run.evidence_texts(run.evidence_ids()))},
             {"draft", join(draft, " ")}},
            json{{"query", query}, {"iteration", iteration}});
        const auto word = to_lower_ascii(trim_view(verdict).substr(0, 4));
        const bool judged_done = word == "done" || trim_view(verdict).find(kFlareDoneMarker) != std::string_view::npos;
        run.step(StepKind::judge_continue, {{"iteration", iteration}, {"continue", !judged_done}, {"raw", verdict}});
        if (judged_done) {
            stop_reason = "judge_done";
            break;
        }
    }
    auto answer = run.answer_from(run.evidence_ids(), {{"draft", draft}});
    return run.finish(answer, {{"reason", stop_reason}});
}

namespace {

struct Action {
    enum Kind { retrieve, aggregate, stop, malformed } kind = malformed;
    std::string argument;
};

/// RETRIEVE[q], AGGREGATE or STOP[a] on the first non-empty line.
Action parse_action(std::string_view reply) {
    auto text = trim_view(reply);
    auto bracketed = [&](std::string_view keyword) -> std::optional<std::string> {
        if (text.size() < keyword.size() + 2 || text.substr(0, keyword.size()) != keyword) return std::nullopt;
        auto rest = trim_view(text.substr(keyword.size()));
        if (rest.empty() || rest.front() != '[') return std::nullopt;
        auto close = rest.rfind(']');
        if (close == std::string_view::npos || close == 0) return std::nullopt;
        return trim(rest.substr(1, close - 1));
    };
    if (auto q = bracketed("RETRIEVE"); q && !q->empty()) return {Action::retrieve, *q};
    if (auto a = bracketed("STOP")) return {Action::stop, *a};
    auto first_line = trim_view(text.substr(0, text.find('\n')));
    if (first_line == "AGGREGATE") return {Action::aggregate, ""};
    return {};
}

} // namespace

RagTrace run_react(const std::string& query_id, const std::string& query, const Retriever& retriever,
                   backends::ChatBackend& gen, const EngineOptions& options) {
    require_iterations(options);
    Run run("react", query_id, query, retriever, gen, options);
    std::vector<std::string> history;
    for (int step = 0; step < options.max_iter; ++step) {
        const auto texts = run.evidence_texts(run.evidence_ids());
        ++run.trace().interactions;
        const auto reply = run.chat("react_step",
                                    {{"query", query},
                                     {"history", history.empty() ? std::string("(none)") : join(history, "\n")},
                                     {"evidence", Run::format_evidence(run.evidence_ids(), texts)}},
                                    json{{"query", query}, {"step", step}, {"evidence", texts}});
        const auto action = parse_action(reply);
        switch (action.kind) {
        case Action::retrieve: {
            run.step(StepKind::plan, {{"interaction", step}, {"action", "RETRIEVE"}, {"argument", action.argument}});
            std::vector<std::string> got;
            for (const auto& h : run.retrieve(action.argument, options.per_query_k, {{"interaction", step}})) {
                run.add_evidence(h.chunk_id);
                got.push_back(h.chunk_id);
            }
            history.push_back("RETRIEVE[" + action.argument + "] -> " + join(got, ", "));
            break;
        }
        case Action::aggregate:
            run.step(StepKind::plan, {{"interaction", step}, {"action", "AGGREGATE"}});
            run.step(StepKind::aggregate, {{"interaction", step}, {"evidence", run.evidence_ids()}});
            history.push_back("AGGREGATE -> " + std::to_string(run.evidence_ids().size()) + " chunks of evidence");
            break;
        case Action::stop:
            run.step(StepKind::plan, {{"interaction", step}, {"action", "STOP"}});
            return run.finish(action.argument, {{"reason", "planner_stop"}});
        case Action::malformed:
            run.step(StepKind::plan, {{"interaction", step}, {"action", "MALFORMED"}, {"raw", reply}});
            history.push_back("Invalid action. Reply with exactly one of RETRIEVE[query], AGGREGATE or STOP[answer].");
            break;
        }
    }
    auto answer = run.answer_from(run.evidence_ids(), {{"forced", true}});
    return run.finish(answer, {{"reason", "max_iter"}});
}

RagTrace run_engine(Engine engine, const std::string& query_id, const std::string& query, const Retriever& retriever,
                    backends::ChatBackend& gen, const EngineOptions& options) {
    switch (engine) {
    case Engine::vanilla: return run_vanilla(query_id, query, retriever, gen, options);
    case Engine::rr: return run_rr(query_id, query, retriever, gen, options);
    case Engine::flare: return run_flare(query_id, query, retriever, gen, options);
    case Engine::react: return run_react(query_id, query, retriever, gen, options);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown engine");
}

} // namespace dragon::rag
