#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spmine {

struct Theme {
    std::string name;
    std::string definition;

    friend bool operator==(const Theme&, const Theme&) = default;
};

// Ordered, duplicate-free list of high-level themes. The shipped default holds the
// 28 themes in alphabetical order, which is also the order used when listing them
// in prompts and as the tie-break in ranked tables.
class ThemeSet {
public:
    static constexpr std::size_t kDefaultCount = 28;

    ThemeSet() = default;
    // Throws DataError("DuplicateTheme") on repeated (normalized) names.
    explicit ThemeSet(std::vector<Theme> themes);

    static const ThemeSet& builtin();

    const std::vector<Theme>& themes() const noexcept { return themes_; }
    std::size_t size() const noexcept { return themes_.size(); }
    bool contains(std::string_view name) const { return index_of(name).has_value(); }
    // Position in canonical order of a normalized name.
    std::optional<std::size_t> index_of(std::string_view name) const;
    std::vector<std::string> names() const;
    // Names whose definition is empty.
    std::vector<std::string> missing_definitions() const;

private:
    std::vector<Theme> themes_;
};

struct LoadedTaxonomy {
    ThemeSet themes;
    std::vector<std::string> warnings;
};

// Reads a JSON array of {name, definition}. Strict mode requires exactly 28 entries
// (WrongThemeCount otherwise).
LoadedTaxonomy load_taxonomy(const std::filesystem::path& path, bool strict = true);
LoadedTaxonomy parse_taxonomy(std::string_view json_text, bool strict = true);

struct ThemeMapping {
    std::string issue;
    std::vector<std::string> themes;

    friend bool operator==(const ThemeMapping&, const ThemeMapping&) = default;
};

// `issue -> theme, theme, ...`. Sides are trimmed and lowercased, theme names must
// be in `themes`; repeated themes collapse to the first occurrence. The split is on
// the last "->" so issues containing arrows survive.
// Throws DataError("MalformedMapping") or UnknownTheme.
ThemeMapping parse_mapping(std::string_view response, const ThemeSet& themes);

struct QueriedMapping {
    ThemeMapping mapping;  // issue is the query issue, not the echoed one
    std::string echoed_issue;
    bool echo_mismatch = false;
};

// Parses a model response for a known query issue.
QueriedMapping parse_mapping_for(std::string_view query_issue, std::string_view response, const ThemeSet& themes);

std::string render_mapping(const ThemeMapping& mapping);

// Labeled TM data: JSON lines of {issue, themes: [..]}.
std::vector<ThemeMapping> load_mappings(const std::filesystem::path& path, const ThemeSet& themes);
void write_mappings(const std::vector<ThemeMapping>& mappings, const std::filesystem::path& path);

}  // namespace spmine
