#include "dragon/graph.hpp"

#include "dragon/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <functional>

namespace dragon::graph {

std::string normalize_entity(std::string_view surface) {
    std::string out;
    bool pending_space = false;
    for (char c : surface) {
        const auto u = static_cast<unsigned char>(c);
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (u < 0x80 && std::ispunct(u)) continue;
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(u < 0x80 ? std::tolower(u) : u));
    }
    return out;
}

std::size_t EntityGraph::degree(const std::string& entity_id) const {
    auto it = chunks_of_entity.find(entity_id);
    return it == chunks_of_entity.end() ? 0 : it->second.size();
}

std::vector<std::string> EntityGraph::shared_entities(const std::string& a, const std::string& b) const {
    std::vector<std::string> out;
    auto ia = entities_of_chunk.find(a);
    auto ib = entities_of_chunk.find(b);
    if (ia == entities_of_chunk.end() || ib == entities_of_chunk.end()) return out;
    std::set_intersection(ia->second.begin(), ia->second.end(), ib->second.begin(), ib->second.end(),
                          std::back_inserter(out));
    return out;
}

std::optional<json> parse_json_reply(std::string_view reply) {
    auto open = reply.find('{');
    auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
    try {
        auto j = json::parse(reply.substr(open, close - open + 1));
        if (j.is_object()) return j;
    } catch (const json::exception&) {
    }
    return std::nullopt;
}

ClueExtraction extract_clues(const corpus::Chunk& chunk, backends::ChatBackend& backend, std::uint64_t seed) {
    if (trim_view(chunk.text).empty() || chunk.sentences.empty()) {
        throw Error(ErrorCode::NoCluesFound, "chunk " + chunk.chunk_id + " has no text");
    }
    std::string numbered;
    json sentences = json::array();
    for (std::size_t i = 0; i < chunk.sentences.size(); ++i) {
        auto s = std::string(chunk.sentence_text(chunk.sentences[i]));
        numbered += "[" + std::to_string(i) + "] " + s + "\n";
        sentences.push_back(s);
    }
    auto request = backends::make_request("extract_clues", {{"numbered_sentences", numbered}}, seed,
                                          json{{"chunk_id", chunk.chunk_id}, {"sentences", sentences}});
    const std::string reply = backend.chat(request);

    ClueExtraction out;
    auto parsed = parse_json_reply(reply);
    if (!parsed || !parsed->contains("clues") || !(*parsed)["clues"].is_array()) {
        throw Error(ErrorCode::RejectedGeneration, "clue extraction for " + chunk.chunk_id + " returned no clue list");
    }
    for (const auto& item : (*parsed)["clues"]) {
        if (!item.is_object() || !item.contains("statement") || !item["statement"].is_string()) {
            out.warnings.push_back(chunk.chunk_id + ": malformed clue entry dropped");
            continue;
        }
        std::string statement = trim(item["statement"].get<std::string>());
        std::vector<datamodel::SentenceRef> refs;
        std::set<std::size_t> seen;
        if (item.contains("sentences") && item["sentences"].is_array()) {
            for (const auto& idx : item["sentences"]) {
                if (!idx.is_number_integer() || idx.get<long long>() < 0 ||
                    static_cast<std::size_t>(idx.get<long long>()) >= chunk.sentences.size()) {
                    out.warnings.push_back(chunk.chunk_id + ": citation " + idx.dump() + " out of range");
                    continue;
                }
                auto k = static_cast<std::size_t>(idx.get<long long>());
                if (seen.insert(k).second) refs.push_back({chunk.chunk_id, chunk.sentences[k].sent_id});
            }
        }
        if (statement.empty() || refs.empty()) {
            out.warnings.push_back(chunk.chunk_id + ": clue without valid support dropped");
            continue;
        }
        datamodel::Clue clue;
        clue.clue_id = chunk.chunk_id + ":c" + std::to_string(out.clues.size());
        clue.statement = std::move(statement);
        clue.support = datamodel::ClueSupport::from_refs(std::move(refs));
        out.clues.push_back(std::move(clue));
    }
    for (const auto& w : out.warnings) spdlog::debug("{}", w);
    if (out.clues.empty()) {
        throw Error(ErrorCode::NoCluesFound, "no usable clues in " + chunk.chunk_id);
    }
    return out;
}

std::vector<EntityMention> extract_entities(const datamodel::Clue& clue, backends::ChatBackend& backend,
                                            std::uint64_t seed) {
    auto request = backends::make_request("extract_entities", {{"statement", clue.statement}}, seed,
                                          json{{"statement", clue.statement}});
    const std::string reply = backend.chat(request);
    std::vector<EntityMention> out;
    auto parsed = parse_json_reply(reply);
    if (!parsed || !parsed->contains("entities") || !(*parsed)["entities"].is_array()) {
        spdlog::debug("entity extraction for {} returned no entity list", clue.clue_id);
        return out;
    }
    const auto& ref = clue.support.sentence_refs.empty() ? datamodel::SentenceRef{} : clue.support.sentence_refs.front();
    std::set<std::string> seen;
    for (const auto& e : (*parsed)["entities"]) {
        if (!e.is_string()) continue;
        std::string surface = trim(e.get<std::string>());
        if (surface.empty() || clue.statement.find(surface) == std::string::npos) continue;
        std::string key = normalize_entity(surface);
        if (key.empty() || !seen.insert(surface).second) continue;
        out.push_back({surface, ref.chunk_id, ref.sent_id, key});
    }
    return out;
}

std::vector<Entity> resolve_entities(std::vector<EntityMention> mentions) {
    auto mention_less = [](const EntityMention& a, const EntityMention& b) {
        return std::tie(a.normalized, a.chunk_id, a.sent_id, a.surface) <
               std::tie(b.normalized, b.chunk_id, b.sent_id, b.surface);
    };
    std::sort(mentions.begin(), mentions.end(), mention_less);

    std::map<std::string, std::vector<EntityMention>> by_key;
    for (auto& m : mentions) {
        if (m.normalized.empty()) m.normalized = normalize_entity(m.surface);
        if (m.normalized.empty()) continue;
        by_key[m.normalized].push_back(std::move(m));
    }
    std::vector<Entity> out;
    for (auto& [key, ms] : by_key) {
        std::map<std::string, std::size_t> freq;
        for (const auto& m : ms) ++freq[m.surface];
        std::string canonical;
        std::size_t best = 0;
        for (const auto& [surface, n] : freq) {  // map order = lexicographic tie-break
            if (n > best) {
                best = n;
                canonical = surface;
            }
        }
        Entity e;
        e.entity_id = "e" + sha256_hex(key).substr(0, 12);
        e.canonical = canonical;
        e.aliases = {key};
        e.mentions = std::move(ms);
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const Entity& a, const Entity& b) { return a.entity_id < b.entity_id; });
    return out;
}

EntityGraph build_graph(const std::vector<Entity>& entities) {
    EntityGraph g;
    std::set<std::pair<std::string, std::string>> edges;
    std::set<std::string> chunks;
    for (const auto& e : entities) {
        g.entities[e.entity_id] = e;
        for (const auto& m : e.mentions) {
            if (m.chunk_id.empty()) continue;
            edges.emplace(e.entity_id, m.chunk_id);
            chunks.insert(m.chunk_id);
        }
        g.chunks_of_entity[e.entity_id];  // degree-0 entities still get a node
    }
    g.edges.assign(edges.begin(), edges.end());
    g.chunk_ids.assign(chunks.begin(), chunks.end());
    for (const auto& [e, c] : g.edges) {
        g.chunks_of_entity[e].push_back(c);
        g.entities_of_chunk[c].push_back(e);
    }
    for (auto& [c, es] : g.entities_of_chunk) std::sort(es.begin(), es.end());
    return g;
}

std::vector<std::vector<std::string>> sample_multihop_groups(const EntityGraph& graph, int hops, std::size_t count,
                                                             std::uint64_t seed, const SamplingConfig& config) {
    if (hops < 2) {
        throw Error(ErrorCode::Precondition, "multi-hop groups need hops >= 2");
    }
    const auto h = static_cast<std::size_t>(hops);
    std::vector<std::vector<std::string>> result;
    if (count == 0) return result;

    // Chunk adjacency through non-hub entities.
    const auto& ids = graph.chunk_ids;
    std::map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < ids.size(); ++i) slot[ids[i]] = i;
    std::vector<std::set<std::size_t>> adj(ids.size());
    for (const auto& [entity, chunks] : graph.chunks_of_entity) {
        if (chunks.size() > config.max_degree) continue;
        for (const auto& a : chunks) {
            for (const auto& b : chunks) {
                if (a != b) adj[slot.at(a)].insert(slot.at(b));
            }
        }
    }

    std::set<std::vector<std::size_t>> seen;
    std::vector<std::vector<std::size_t>> groups;
    auto record = [&](const std::vector<std::size_t>& path) {
        auto key = path;
        std::sort(key.begin(), key.end());
        if (seen.insert(key).second) groups.push_back(path);
    };

    std::size_t budget = config.enumeration_budget;
    bool exhausted_budget = false;
    std::vector<std::size_t> path;
    std::vector<bool> on_path(ids.size(), false);
    std::function<void(std::size_t)> dfs = [&](std::size_t node) {
        if (exhausted_budget) return;
        if (budget-- == 0) {
            exhausted_budget = true;
            return;
        }
        path.push_back(node);
        on_path[node] = true;
        if (path.size() == h) {
            record(path);
        } else {
            for (std::size_t next : adj[node]) {
                if (!on_path[next]) dfs(next);
                if (exhausted_budget) break;
            }
        }
        on_path[node] = false;
        path.pop_back();
    };
    for (std::size_t start = 0; start < ids.size() && !exhausted_budget; ++start) dfs(start);

    Rng rng(seed);
    if (!exhausted_budget) {
        rng.shuffle(groups);
        if (groups.size() > count) groups.resize(count);
    } else {
        // Graph too large to enumerate: seeded random walks.
        seen.clear();
        groups.clear();
        std::vector<std::size_t> starts;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!adj[i].empty()) starts.push_back(i);
        }
        std::size_t failures = 0;
        const std::size_t max_failures = std::max<std::size_t>(1000, count * 100);
        while (!starts.empty() && groups.size() < count && failures < max_failures) {
            std::vector<std::size_t> walk{starts[rng.below(starts.size())]};
            while (walk.size() < h) {
                std::vector<std::size_t> options;
                for (std::size_t n : adj[walk.back()]) {
                    if (std::find(walk.begin(), walk.end(), n) == walk.end()) options.push_back(n);
                }
                if (options.empty()) break;
                walk.push_back(options[rng.below(options.size())]);
            }
            const auto before = groups.size();
            if (walk.size() == h) record(walk);
            failures = groups.size() > before ? 0 : failures + 1;
        }
    }

    for (const auto& g : groups) {
        std::vector<std::string> named;
        for (std::size_t i : g) named.push_back(ids[i]);
        result.push_back(std::move(named));
    }
    return result;
}

std::vector<json> graph_dump(const EntityGraph& graph) {
    std::vector<json> rows;
    for (const auto& [id, e] : graph.entities) {
        auto it = graph.chunks_of_entity.find(id);
        rows.push_back({{"entity_id", id},
                        {"canonical", e.canonical},
                        {"aliases", e.aliases},
                        {"chunk_ids", it == graph.chunks_of_entity.end() ? std::vector<std::string>{} : it->second}});
    }
    return rows;
}

} // namespace dragon::graph
