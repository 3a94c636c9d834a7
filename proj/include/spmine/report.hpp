#pragma once

#include <chrono>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "spmine/corpus.hpp"
#include "spmine/prompting.hpp"
#include "spmine/taxonomy.hpp"

namespace spmine {

// --- concern ratios ------------------------------------------------------------------

struct CategoryRatio {
    std::string category;
    std::uint64_t concerned = 0;
    std::uint64_t total = 0;
    double ratio = 0.0;
};

struct ConcernRatioSummary {
    std::vector<CategoryRatio> per_category;  // Category order
    CategoryRatio overall{"overall"};
};

// `concern` maps review id -> Task-1 answer. Throws UnclassifiedReview for a review
// without an entry.
ConcernRatioSummary concern_ratios(const Corpus& corpus, const std::map<std::string, bool>& concern);
// From precomputed counts, e.g. published tables.
ConcernRatioSummary concern_ratios(const std::vector<CategoryRatio>& counts);

// --- theme distribution --------------------------------------------------------------

// One concerned review with its issues mapped to themes.
struct MappedReview {
    std::string review_id;
    Category category;
    std::optional<std::chrono::year_month_day> date;
    std::vector<ThemeMapping> mappings;
};

enum class CountMode {
    per_review,  // a review counts once per theme it touches
    per_issue,   // every issue-theme pair counts
};

struct ThemeRow {
    std::string theme;
    std::uint64_t count = 0;
    double percent = 0.0;  // rounded half-up to 2 decimals
};

struct CategoryThemes {
    std::string category;
    std::uint64_t total = 0;
    std::vector<ThemeRow> rows;  // count desc, ties in ThemeSet order
};

struct ThemeDistribution {
    std::vector<CategoryThemes> categories;
};

// 100 * count / total rounded half-up to 2 decimals, computed in integers.
double percent_2dp(std::uint64_t count, std::uint64_t total);

// Builds ranked rows from per-theme counts aligned with `themes`.
CategoryThemes rank_themes(std::string category, const std::vector<std::uint64_t>& counts, const ThemeSet& themes);

// One column per category present in the input (Category order); every column lists
// all themes, zero counts included. With no input at all a single "all" column of
// zero rows is returned.
ThemeDistribution theme_distribution(const std::vector<MappedReview>& reviews, const ThemeSet& themes,
                                     CountMode mode = CountMode::per_review);

// --- quarterly trends -------------------------------------------------------------------

struct Quarter {
    int year = 0;
    int q = 1;  // 1..4

    auto operator<=>(const Quarter&) const = default;
    std::string label() const;  // "2021Q3"
};

Quarter quarter_of(const std::chrono::year_month_day& date);

struct TrendBucket {
    Quarter quarter;
    std::string category;
    std::map<std::string, std::uint64_t> theme_counts;  // every touched theme; top themes always present
    std::uint64_t unique_reviews = 0;                   // concerned reviews, any theme
};

struct QuarterlyTrend {
    std::map<std::string, std::vector<std::string>> top_themes;  // per category
    std::vector<TrendBucket> buckets;                            // by (quarter, category)
    std::vector<std::string> warnings;
};

QuarterlyTrend quarterly_trends(const std::vector<MappedReview>& reviews, const ThemeSet& themes,
                                std::size_t top_k = 3);

// --- customer loss --------------------------------------------------------------------

struct LossSummary {
    std::uint64_t concerned = 0;
    std::uint64_t flagged = 0;  // any action other than none
    double rate = 0.0;
    std::map<std::string, std::uint64_t> by_action;
    std::vector<ThemeRow> by_theme;  // flagged reviews per theme, ThemeSet order
};

// `actions` maps review id -> classification, for concerned reviews.
LossSummary customer_loss_summary(const std::vector<MappedReview>& concerned,
                                  const std::map<std::string, LossAction>& actions, const ThemeSet& themes);

// --- emitters --------------------------------------------------------------------------

nlohmann::ordered_json to_json(const ConcernRatioSummary& s);
nlohmann::ordered_json to_json(const ThemeDistribution& d);
nlohmann::ordered_json to_json(const QuarterlyTrend& t);
nlohmann::ordered_json to_json(const LossSummary& s);

std::string to_text(const ConcernRatioSummary& s);
std::string to_text(const ThemeDistribution& d);
std::string to_text(const QuarterlyTrend& t);
std::string to_text(const LossSummary& s);

std::string to_csv(const ThemeDistribution& d);
// quarter,category,theme,count,unique_reviews
std::string to_csv(const QuarterlyTrend& t);

// Fixed-width table helper shared by the text emitters.
std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

// Shortest decimal text that round-trips, for stable JSON/CSV output.
std::string format_number(double v, int max_decimals = 4);

}  // namespace spmine
