#include <gtest/gtest.h>

#include <algorithm>

#include "spmine/error.hpp"
#include "spmine/rng.hpp"
#include "spmine/taxonomy.hpp"
#include "test_util.hpp"

using namespace spmine;
using spmine::testing::TempDir;
using spmine::testing::write_file;

TEST(Taxonomy, BuiltinHas28SortedThemes) {
    const auto& t = ThemeSet::builtin();
    ASSERT_EQ(t.size(), 28u);
    for (const char* name : {"surveillance", "privacy controls", "data hiding", "authentication",
                             "general comments related to security and privacy"}) {
        EXPECT_TRUE(t.contains(name)) << name;
    }
    const auto names = t.names();
    EXPECT_TRUE(std::is_sorted(names.begin(), names.end()));
    EXPECT_TRUE(t.missing_definitions().empty());
    EXPECT_EQ(t.index_of("  Surveillance "), t.index_of("surveillance"));
}

TEST(Taxonomy, ShippedFileMatchesBuiltin) {
    const auto loaded = load_taxonomy(std::filesystem::path(SPMINE_DATA_DIR) / "taxonomy.json");
    EXPECT_EQ(loaded.themes.themes(), ThemeSet::builtin().themes());
}

TEST(Taxonomy, DuplicateAndCountErrors) {
    EXPECT_THROW(parse_taxonomy(R"([{"name":"a","definition":"x"},{"name":"A ","definition":"y"}])", false),
                 DataError);
    try {
        parse_taxonomy(R"([{"name":"a","definition":"x"}])", true);
        FAIL();
    } catch (const WrongThemeCount& e) {
        EXPECT_EQ(e.actual(), 1u);
    }
}

TEST(Taxonomy, CustomNonStrict) {
    TempDir dir;
    write_file(dir / "t.json", R"([{"name":"e","definition":"5"},{"name":"a","definition":"1"},
        {"name":"c","definition":"3"},{"name":"b","definition":"2"},{"name":"d","definition":""}])");
    const auto t = load_taxonomy(dir / "t.json", false);
    EXPECT_EQ(t.themes.size(), 5u);
    EXPECT_EQ(t.themes.missing_definitions(), std::vector<std::string>{"d"});
}

TEST(Mapping, ParsesWorkedMapping) {
    const auto m = parse_mapping(
        "password sharing as a violation of basic it security principles -> authentication, data sharing",
        ThemeSet::builtin());
    EXPECT_EQ(m.issue, "password sharing as a violation of basic it security principles");
    EXPECT_EQ(m.themes, (std::vector<std::string>{"authentication", "data sharing"}));
}

TEST(Mapping, SingletonUnknownAndMalformed) {
    const auto& t = ThemeSet::builtin();
    EXPECT_EQ(parse_mapping("x -> Surveillance", t).themes, std::vector<std::string>{"surveillance"});
    EXPECT_EQ(parse_mapping("a -> b -> surveillance, surveillance", t).issue, "a -> b");
    EXPECT_EQ(parse_mapping("a -> b -> surveillance, surveillance", t).themes.size(), 1u);
    try {
        parse_mapping("x -> spying", t);
        FAIL();
    } catch (const UnknownTheme& e) {
        EXPECT_EQ(e.name(), "spying");
    }
    EXPECT_THROW(parse_mapping("no arrow here", t), DataError);
    EXPECT_THROW(parse_mapping("x -> ", t), DataError);
    EXPECT_THROW(parse_mapping(" -> surveillance", t), DataError);
}

TEST(Mapping, QueryIssueIsAuthoritative) {
    const auto q = parse_mapping_for("Location Tracking", "location tracker -> location tracking", ThemeSet::builtin());
    EXPECT_EQ(q.mapping.issue, "location tracking");
    EXPECT_EQ(q.echoed_issue, "location tracker");
    EXPECT_TRUE(q.echo_mismatch);
}

TEST(Mapping, RoundTripRandom) {
    const auto& t = ThemeSet::builtin();
    const auto names = t.names();
    const std::vector<std::string> words = {"camera", "data", "leak", "app", "account", "->x", "spy", "cloud"};
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        ThemeMapping m;
        const auto nw = 1 + rng.below(5);
        for (std::uint64_t w = 0; w < nw; ++w) m.issue += (w ? " " : "") + words[rng.below(words.size())];
        const auto nt = 1 + rng.below(4);
        for (std::uint64_t k = 0; k < nt; ++k) {
            const auto& name = names[rng.below(names.size())];
            if (std::find(m.themes.begin(), m.themes.end(), name) == m.themes.end()) m.themes.push_back(name);
        }
        EXPECT_EQ(parse_mapping(render_mapping(m), t), m) << render_mapping(m);
    }
}

TEST(Mapping, LoadAndWrite) {
    TempDir dir;
    const std::vector<ThemeMapping> ms = {{"a", {"surveillance"}}, {"b", {"authentication", "data sharing"}}};
    write_mappings(ms, dir / "m.jsonl");
    EXPECT_EQ(load_mappings(dir / "m.jsonl", ThemeSet::builtin()), ms);
    write_file(dir / "bad.jsonl", R"({"issue":"a","themes":["spying"]})" "\n");
    EXPECT_THROW(load_mappings(dir / "bad.jsonl", ThemeSet::builtin()), DataError);
}
