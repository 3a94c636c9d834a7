#include "spmine/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

#include "spmine/embedded.hpp"
#include "spmine/error.hpp"
#include "spmine/text.hpp"

namespace spmine {

using json = nlohmann::json;

ThemeSet::ThemeSet(std::vector<Theme> themes) {
    std::unordered_set<std::string> seen;
    for (auto& t : themes) {
        t.name = text::normalize(t.name);
        t.definition = std::string(text::trim(t.definition));
        if (t.name.empty()) throw DataError("MalformedTaxonomy", "theme with empty name");
        if (!seen.insert(t.name).second) throw DataError("DuplicateTheme", "duplicate theme '" + t.name + "'");
    }
    themes_ = std::move(themes);
}

const ThemeSet& ThemeSet::builtin() {
    static const ThemeSet set = parse_taxonomy(embedded::taxonomy_json, true).themes;
    return set;
}

std::optional<std::size_t> ThemeSet::index_of(std::string_view name) const {
    const auto key = text::normalize(name);
    for (std::size_t i = 0; i < themes_.size(); ++i) {
        if (themes_[i].name == key) return i;
    }
    return std::nullopt;
}

std::vector<std::string> ThemeSet::names() const {
    std::vector<std::string> out;
    out.reserve(themes_.size());
    for (const auto& t : themes_) out.push_back(t.name);
    return out;
}

std::vector<std::string> ThemeSet::missing_definitions() const {
    std::vector<std::string> out;
    for (const auto& t : themes_) {
        if (t.definition.empty()) out.push_back(t.name);
    }
    return out;
}

LoadedTaxonomy parse_taxonomy(std::string_view json_text, bool strict) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw DataError("MalformedTaxonomy", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw DataError("MalformedTaxonomy", "taxonomy must be a JSON array");
    std::vector<Theme> themes;
    for (const auto& entry : doc) {
        if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string()) {
            throw DataError("MalformedTaxonomy", "each entry needs a string 'name'");
        }
        Theme t;
        t.name = entry["name"].get<std::string>();
        if (const auto it = entry.find("definition"); it != entry.end() && it->is_string()) {
            t.definition = it->get<std::string>();
        }
        themes.push_back(std::move(t));
    }
    LoadedTaxonomy out{ThemeSet(std::move(themes)), {}};
    if (strict && out.themes.size() != ThemeSet::kDefaultCount) {
        throw WrongThemeCount(ThemeSet::kDefaultCount, out.themes.size());
    }
    for (const auto& name : out.themes.missing_definitions()) {
        out.warnings.push_back("theme '" + name + "' has no definition");
    }
    return out;
}

LoadedTaxonomy load_taxonomy(const std::filesystem::path& path, bool strict) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("IoError", "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_taxonomy(buf.str(), strict);
}

ThemeMapping parse_mapping(std::string_view response, const ThemeSet& themes) {
    const auto body = text::trim(response);
    const auto arrow = body.rfind("->");
    if (arrow == std::string_view::npos) {
        throw DataError("MalformedMapping", "no '->' in mapping: '" + std::string(body) + "'");
    }
    ThemeMapping m;
    m.issue = text::normalize(body.substr(0, arrow));
    if (m.issue.empty()) throw DataError("MalformedMapping", "empty issue before '->'");
    for (const auto& part : text::split(body.substr(arrow + 2), ',')) {
        auto name = text::normalize(part);
        if (name.empty()) continue;
        if (!themes.contains(name)) throw UnknownTheme(name);
        if (std::find(m.themes.begin(), m.themes.end(), name) == m.themes.end()) m.themes.push_back(std::move(name));
    }
    if (m.themes.empty()) {
        throw DataError("MalformedMapping", "no themes after '->' in mapping: '" + std::string(body) + "'");
    }
    return m;
}

QueriedMapping parse_mapping_for(std::string_view query_issue, std::string_view response, const ThemeSet& themes) {
    QueriedMapping out;
    out.mapping = parse_mapping(response, themes);
    out.echoed_issue = std::move(out.mapping.issue);
    out.mapping.issue = text::normalize(query_issue);
    out.echo_mismatch = out.echoed_issue != out.mapping.issue;
    return out;
}

std::string render_mapping(const ThemeMapping& mapping) {
    return mapping.issue + " -> " + text::join(mapping.themes, ", ");
}

std::vector<ThemeMapping> load_mappings(const std::filesystem::path& path, const ThemeSet& themes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("IoError", "cannot open " + path.string());
    std::vector<ThemeMapping> out;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        ++row;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw MalformedRecord(row, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.contains("issue") || !obj.contains("themes") || !obj["themes"].is_array()) {
            throw MalformedRecord(row, "expected {issue, themes: [..]}");
        }
        ThemeMapping m;
        m.issue = text::normalize(obj["issue"].get<std::string>());
        for (const auto& t : obj["themes"]) {
            auto name = text::normalize(t.get<std::string>());
            if (!themes.contains(name)) throw UnknownTheme(name);
            if (std::find(m.themes.begin(), m.themes.end(), name) == m.themes.end()) m.themes.push_back(std::move(name));
        }
        if (m.issue.empty() || m.themes.empty()) throw MalformedRecord(row, "empty issue or theme list");
        out.push_back(std::move(m));
    }
    return out;
}

void write_mappings(const std::vector<ThemeMapping>& mappings, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("IoError", "cannot write " + path.string());
    for (const auto& m : mappings) {
        nlohmann::ordered_json j;
        j["issue"] = m.issue;
        j["themes"] = m.themes;
        out << j.dump() << '\n';
    }
}

}  // namespace spmine
