#include "dragon/backends.hpp"
#include "dragon/error.hpp"

#include <mutex>

namespace dragon::backends {

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_templates();
}

namespace {

PromptTemplate parse_template(std::string_view id, std::string_view content) {
    PromptTemplate t;
    t.id = std::string(id);
    t.hash = sha256_hex(content);
    enum class Section { none, system, user } section = Section::none;
    std::string system;
    std::string user;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string_view::npos) nl = content.size();
        auto line = content.substr(pos, nl - pos);
        pos = nl + 1;
        if (section == Section::none && line.substr(0, 10) == "# version:") {
            t.version = std::stoi(std::string(trim_view(line.substr(10))));
            continue;
        }
        if (line == "[system]") {
            section = Section::system;
            continue;
        }
        if (line == "[user]") {
            section = Section::user;
            continue;
        }
        std::string* target = section == Section::system ? &system : section == Section::user ? &user : nullptr;
        if (target) {
            *target += line;
            *target += '\n';
        }
    }
    t.system = trim(system);
    t.user = trim(user);
    return t;
}

std::string render(std::string_view text, const std::map<std::string, std::string>& values, std::string_view id) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto open = text.find("{{", pos);
        if (open == std::string_view::npos) {
            out += text.substr(pos);
            break;
        }
        auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out += text.substr(pos);
            break;
        }
        out += text.substr(pos, open - pos);
        std::string name(text.substr(open + 2, close - open - 2));
        auto it = values.find(name);
        if (it == values.end()) {
            throw Error(ErrorCode::InvalidConfig, "template " + std::string(id) + " needs a value for {{" + name + "}}");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

const std::map<std::string, PromptTemplate, std::less<>>& registry() {
    static const auto table = [] {
        std::map<std::string, PromptTemplate, std::less<>> m;
        for (const auto& [id, content] : detail::embedded_templates()) {
            m.emplace(std::string(id), parse_template(id, content));
        }
        return m;
    }();
    return table;
}

} // namespace

std::string PromptTemplate::render_user(const std::map<std::string, std::string>& values) const {
    return render(user, values, id);
}

std::string PromptTemplate::render_system(const std::map<std::string, std::string>& values) const {
    return render(system, values, id);
}

const PromptTemplate& prompt_template(std::string_view id) {
    const auto& reg = registry();
    auto it = reg.find(id);
    if (it == reg.end()) {
        throw Error(ErrorCode::InvalidConfig, "unknown prompt template " + std::string(id));
    }
    return it->second;
}

std::vector<std::string> template_ids() {
    std::vector<std::string> ids;
    for (const auto& [id, t] : registry()) ids.push_back(id);
    return ids;
}

std::map<std::string, std::string> template_hashes() {
    std::map<std::string, std::string> out;
    for (const auto& [id, t] : registry()) out[id] = t.hash;
    return out;
}

ChatRequest make_request(std::string_view id, const std::map<std::string, std::string>& values, std::uint64_t seed,
                         json context) {
    const auto& t = prompt_template(id);
    ChatRequest r;
    r.tag = t.id;
    r.system = t.render_system(values);
    r.user = t.render_user(values);
    r.seed = seed;
    r.context = std::move(context);
    return r;
}

} // namespace dragon::backends
