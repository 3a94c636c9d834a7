#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "spmine/error.hpp"
#include "spmine/report.hpp"
#include "test_util.hpp"

using namespace spmine;
using std::chrono::day;
using std::chrono::month;
using std::chrono::year;
using std::chrono::year_month_day;

namespace {

MappedReview mapped(std::string id, Category cat, std::optional<year_month_day> date,
                    std::vector<ThemeMapping> mappings) {
    return MappedReview{std::move(id), std::move(cat), date, std::move(mappings)};
}

year_month_day ymd(int y, unsigned m, unsigned d) { return year_month_day{year{y}, month{m}, day{d}}; }

}  // namespace

TEST(Ratios, PublishedCountsAndTrivialCases) {
    const auto s = concern_ratios(std::vector<CategoryRatio>{
        {"trackers", 505, 23894}, {"speakers", 847, 32069}, {"cameras", 3544, 35186}});
    EXPECT_NEAR(s.per_category[0].ratio, 0.0211, 5e-5);
    EXPECT_NEAR(s.per_category[1].ratio, 0.0264, 5e-5);
    EXPECT_NEAR(s.per_category[2].ratio, 0.1007, 5e-5);
    EXPECT_EQ(s.overall.concerned, 4896u);
    EXPECT_EQ(s.overall.total, 91149u);
    EXPECT_NEAR(100 * s.overall.ratio, 5.37, 5e-3);

    Corpus c;
    Review a;
    a.id = "a";
    a.category = Category::camera();
    Review b = a;
    b.id = "b";
    c.reviews = {a, b};
    EXPECT_EQ(concern_ratios(c, {{"a", true}, {"b", false}}).overall.ratio, 0.5);
    EXPECT_EQ(concern_ratios(c, {{"a", false}, {"b", false}}).per_category[0].ratio, 0.0);
    EXPECT_THROW(concern_ratios(c, {{"a", true}}), UnclassifiedReview);
}

TEST(ThemeTable, PublishedPercentagesReproduced) {
    const auto table = nlohmann::json::parse(spmine::testing::read_file(spmine::testing::fixture_dir() / "published_theme_table.json"));
    const auto& themes = ThemeSet::builtin();
    std::size_t rows = 0;
    for (const auto& cat : table) {
        std::vector<std::uint64_t> counts(themes.size(), 0);
        for (const auto& r : cat["rows"]) counts[*themes.index_of(r["theme"].get<std::string>())] = r["count"];
        const auto ranked = rank_themes(cat["category"], counts, themes);
        ASSERT_EQ(ranked.rows.size(), 28u);
        double sum = 0;
        for (std::size_t i = 0; i < 28; ++i) {
            const auto& printed = cat["rows"][i];
            EXPECT_EQ(ranked.rows[i].theme, printed["theme"].get<std::string>());
            EXPECT_NEAR(ranked.rows[i].percent, printed["percent"].get<double>(), 0.02);
            sum += ranked.rows[i].percent;
            ++rows;
        }
        EXPECT_NEAR(sum, 100.0, 0.3);
    }
    EXPECT_EQ(rows, 84u);
    EXPECT_EQ(percent_2dp(215, 1724), 12.47);
    EXPECT_EQ(percent_2dp(1, 8), 12.5);
    EXPECT_EQ(percent_2dp(1, 200000), 0.0);
    EXPECT_EQ(percent_2dp(1, 40000), 0.0);
    EXPECT_EQ(percent_2dp(1, 20000), 0.01);
}

TEST(ThemeDistribution, PerReviewDedupAndEmpty) {
    const auto& themes = ThemeSet::builtin();
    const auto d = theme_distribution(
        {mapped("r", Category::camera(), std::nullopt,
                {{"a", {"surveillance"}}, {"b", {"surveillance", "consent"}}, {"c", {"consent"}}})},
        themes);
    ASSERT_EQ(d.categories.size(), 1u);
    EXPECT_EQ(d.categories[0].total, 2u);
    EXPECT_EQ(d.categories[0].rows[0].theme, "consent");
    EXPECT_EQ(d.categories[0].rows[0].count, 1u);
    EXPECT_EQ(d.categories[0].rows[1].theme, "surveillance");
    EXPECT_EQ(d.categories[0].rows[1].count, 1u);

    const auto per_issue = theme_distribution(
        {mapped("r", Category::camera(), std::nullopt, {{"a", {"surveillance"}}, {"b", {"surveillance"}}})}, themes,
        CountMode::per_issue);
    EXPECT_EQ(per_issue.categories[0].rows[0].count, 2u);

    const auto empty = theme_distribution({}, themes);
    ASSERT_EQ(empty.categories.size(), 1u);
    EXPECT_EQ(empty.categories[0].rows.size(), 28u);
    for (const auto& r : empty.categories[0].rows) EXPECT_EQ(r.count, 0u);
}

TEST(ThemeDistribution, PermutationInvariant) {
    const auto& themes = ThemeSet::builtin();
    std::vector<MappedReview> v = {
        mapped("1", Category::tracker(), std::nullopt, {{"a", {"location tracking"}}}),
        mapped("2", Category::camera(), std::nullopt, {{"a", {"surveillance", "consent"}}}),
        mapped("3", Category::tracker(), std::nullopt, {{"a", {"consent"}}})};
    const auto a = to_json(theme_distribution(v, themes)).dump();
    std::reverse(v.begin(), v.end());
    EXPECT_EQ(to_json(theme_distribution(v, themes)).dump(), a);
}

TEST(Trends, CountingRule) {
    const auto& themes = ThemeSet::builtin();
    const std::vector<MappedReview> v = {
        mapped("1", Category::camera(), ymd(2021, 1, 5), {{"x", {"surveillance", "privacy controls"}}}),
        mapped("2", Category::camera(), ymd(2021, 3, 31), {{"x", {"surveillance"}}}),
        mapped("3", Category::camera(), ymd(2021, 4, 1), {{"x", {"usability"}}}),
        mapped("4", Category::camera(), ymd(2021, 6, 30), {{"x", {"privacy controls"}}})};
    const auto t = quarterly_trends(v, themes, 3);
    ASSERT_EQ(t.buckets.size(), 2u);
    EXPECT_EQ(t.buckets[0].quarter.label(), "2021Q1");
    EXPECT_EQ(t.buckets[0].unique_reviews, 2u);
    EXPECT_EQ(t.buckets[0].theme_counts.at("surveillance"), 2u);
    EXPECT_EQ(t.buckets[0].theme_counts.at("privacy controls"), 1u);
    EXPECT_EQ(t.buckets[1].quarter.label(), "2021Q2");
    EXPECT_EQ(t.top_themes.at("camera"),
              (std::vector<std::string>{"privacy controls", "surveillance", "usability"}));

    const auto single = quarterly_trends({v[0], v[1]}, themes);
    EXPECT_EQ(single.buckets.size(), 1u);

    const auto missing = quarterly_trends({mapped("z", Category::camera(), std::nullopt, {{"x", {"consent"}}})}, themes);
    EXPECT_TRUE(missing.buckets.empty());
    ASSERT_EQ(missing.warnings.size(), 1u);
    EXPECT_NE(missing.warnings[0].find("MissingDate"), std::string::npos);
}

TEST(Trends, RandomFixtureMatchesGroupBy) {
    const auto& themes = ThemeSet::builtin();
    const auto names = themes.names();
    const std::vector<Category> cats = {Category::tracker(), Category::speaker(), Category::camera()};
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<MappedReview> v;
        const auto n = rng.below(60);
        for (std::uint64_t i = 0; i < n; ++i) {
            std::optional<year_month_day> date;
            if (rng.below(10) != 0) {
                date = ymd(2019 + static_cast<int>(rng.below(4)), static_cast<unsigned>(1 + rng.below(12)),
                           static_cast<unsigned>(1 + rng.below(28)));
            }
            std::vector<ThemeMapping> ms;
            for (std::uint64_t k = 0, nk = 1 + rng.below(3); k < nk; ++k) {
                ThemeMapping m{"issue" + std::to_string(k), {}};
                for (std::uint64_t t = 0, nt = 1 + rng.below(2); t < nt; ++t) {
                    const auto& name = names[rng.below(6)];
                    if (std::find(m.themes.begin(), m.themes.end(), name) == m.themes.end()) m.themes.push_back(name);
                }
                ms.push_back(m);
            }
            v.push_back(mapped("r" + std::to_string(i), cats[rng.below(3)], date, ms));
        }
        const auto t = quarterly_trends(v, themes, 3);

        // Group-by oracle keyed by (quarter label, category name).
        std::map<std::pair<std::string, std::string>, std::pair<std::uint64_t, std::map<std::string, std::uint64_t>>> ref;
        std::map<std::string, std::map<std::string, std::uint64_t>> cat_totals;
        std::uint64_t dated = 0;
        for (const auto& r : v) {
            std::set<std::string> touched;
            for (const auto& m : r.mappings) touched.insert(m.themes.begin(), m.themes.end());
            for (const auto& th : touched) ++cat_totals[r.category.name()][th];
            if (!r.date) continue;
            ++dated;
            const int q = (static_cast<int>(static_cast<unsigned>(r.date->month())) - 1) / 3 + 1;
            const auto key = std::make_pair(std::to_string(static_cast<int>(r.date->year())) + "Q" + std::to_string(q),
                                            r.category.name());
            ++ref[key].first;
            for (const auto& th : touched) ++ref[key].second[th];
        }
        ASSERT_EQ(t.buckets.size(), ref.size());
        std::uint64_t unique_sum = 0;
        for (const auto& b : t.buckets) {
            const auto it = ref.find({b.quarter.label(), b.category});
            ASSERT_NE(it, ref.end());
            EXPECT_EQ(b.unique_reviews, it->second.first);
            unique_sum += b.unique_reviews;
            for (const auto& [theme, count] : it->second.second) EXPECT_EQ(b.theme_counts.at(theme), count);
            for (const auto& [theme, count] : b.theme_counts) {
                if (count > 0) EXPECT_EQ(it->second.second.at(theme), count);
            }
            std::uint64_t theme_sum = 0;
            for (const auto& [_, count] : b.theme_counts) theme_sum += count;
            EXPECT_LE(b.unique_reviews, theme_sum);
        }
        EXPECT_EQ(unique_sum, dated);
        EXPECT_EQ(t.warnings.size(), v.size() - dated);
        for (const auto& [cat, top] : t.top_themes) {
            // Top themes: highest counts, ties alphabetical.
            std::vector<std::pair<std::string, std::uint64_t>> ranked(cat_totals[cat].begin(), cat_totals[cat].end());
            std::stable_sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) { return a.second > b.second; });
            std::vector<std::string> expected;
            for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) expected.push_back(ranked[i].first);
            EXPECT_EQ(top, expected);
        }
    }
}

TEST(Loss, SummaryRates) {
    const auto& themes = ThemeSet::builtin();
    std::vector<MappedReview> v;
    std::map<std::string, LossAction> actions;
    for (int i = 0; i < 8; ++i) {
        v.push_back(mapped(std::to_string(i), Category::speaker(), std::nullopt, {{"x", {"surveillance"}}}));
        actions[std::to_string(i)] = LossAction::none;
    }
    EXPECT_EQ(customer_loss_summary(v, actions, themes).rate, 0.0);
    actions["2"] = LossAction::uninstalled;
    actions["5"] = LossAction::replaced;
    const auto s = customer_loss_summary(v, actions, themes);
    EXPECT_EQ(s.flagged, 2u);
    EXPECT_EQ(s.rate, 0.25);
    EXPECT_EQ(s.by_action.at("uninstalled"), 1u);
    EXPECT_EQ(s.by_action.at("none"), 6u);
    const auto it = std::find_if(s.by_theme.begin(), s.by_theme.end(), [](auto& r) { return r.theme == "surveillance"; });
    EXPECT_EQ(it->count, 2u);
    EXPECT_EQ(it->percent, 100.0);
    actions.erase("3");
    EXPECT_THROW(customer_loss_summary(v, actions, themes), UnclassifiedReview);
    EXPECT_NEAR(100.0 * 321 / 4896, 6.6, 0.05);
}

TEST(Emitters, TextCsvAndNumbers) {
    EXPECT_EQ(format_number(0.5), "0.5");
    EXPECT_EQ(format_number(2.0), "2");
    EXPECT_EQ(format_number(0.123456), "0.1235");
    const auto table = format_table({"a", "bb"}, {{"xyz", "1"}});
    EXPECT_NE(table.find("xyz  1"), std::string::npos);
    const auto d = theme_distribution(
        {mapped("r", Category::other("a,b"), std::nullopt, {{"x", {"surveillance"}}})}, ThemeSet::builtin());
    const auto csv = to_csv(d);
    EXPECT_EQ(csv.rfind("category,rank,theme,count,percent\n", 0), 0u);
    EXPECT_NE(csv.find("\"a,b\",1,surveillance,1,100"), std::string::npos);
    EXPECT_EQ(quarter_of(ymd(2021, 9, 30)).label(), "2021Q3");
    EXPECT_EQ(quarter_of(ymd(2021, 10, 1)).label(), "2021Q4");
}
