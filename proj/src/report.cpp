#include "spmine/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "spmine/error.hpp"
#include "spmine/text.hpp"

namespace spmine {

using ojson = nlohmann::ordered_json;

namespace {

double safe_ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string format_number(double v, int max_decimals) {
    auto s = fmt::format("{:.{}f}", v, max_decimals);
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size(), 0);
    auto measure = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
    };
    measure(header);
    for (const auto& r : rows) measure(r);
    auto line = [&](const std::vector<std::string>& row) {
        std::string out;
        for (std::size_t c = 0; c < width.size(); ++c) {
            const auto& cell = c < row.size() ? row[c] : std::string();
            out += cell;
            if (c + 1 < width.size()) out += std::string(width[c] - cell.size() + 2, ' ');
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        return out + "\n";
    };
    std::string out = line(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
    for (const auto& r : rows) out += line(r);
    return out;
}

// --- ratios -------------------------------------------------------------------------------

ConcernRatioSummary concern_ratios(const std::vector<CategoryRatio>& counts) {
    ConcernRatioSummary s;
    for (auto c : counts) {
        if (c.concerned > c.total) throw DataError("DegenerateSample", "more concerned reviews than total in " + c.category);
        c.ratio = safe_ratio(c.concerned, c.total);
        s.overall.concerned += c.concerned;
        s.overall.total += c.total;
        s.per_category.push_back(std::move(c));
    }
    s.overall.ratio = safe_ratio(s.overall.concerned, s.overall.total);
    return s;
}

ConcernRatioSummary concern_ratios(const Corpus& corpus, const std::map<std::string, bool>& concern) {
    std::map<Category, CategoryRatio> by_cat;
    for (const auto& r : corpus.reviews) {
        const auto it = concern.find(r.id);
        if (it == concern.end()) throw UnclassifiedReview(r.id);
        auto& c = by_cat[r.category];
        c.category = r.category.name();
        ++c.total;
        if (it->second) ++c.concerned;
    }
    std::vector<CategoryRatio> counts;
    for (auto& [_, c] : by_cat) counts.push_back(c);
    return concern_ratios(counts);
}

// --- themes -------------------------------------------------------------------------------

double percent_2dp(std::uint64_t count, std::uint64_t total) {
    if (total == 0) return 0.0;
    // hundredths of a percent, rounded half up: floor((2 * 10000 * count + total) / (2 * total))
    const auto hundredths = (20000 * count + total) / (2 * total);
    return static_cast<double>(hundredths) / 100.0;
}

CategoryThemes rank_themes(std::string category, const std::vector<std::uint64_t>& counts, const ThemeSet& themes) {
    if (counts.size() != themes.size()) throw DataError("ShapeMismatch", "one count per theme expected");
    CategoryThemes out;
    out.category = std::move(category);
    out.total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
    std::vector<std::size_t> order(counts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    for (auto i : order) out.rows.push_back({themes.themes()[i].name, counts[i], percent_2dp(counts[i], out.total)});
    return out;
}

namespace {

// Theme indices touched by a review (deduplicated unless per-issue counting).
std::vector<std::size_t> theme_hits(const MappedReview& r, const ThemeSet& themes, CountMode mode) {
    std::vector<std::size_t> hits;
    for (const auto& m : r.mappings) {
        for (const auto& t : m.themes) {
            const auto idx = themes.index_of(t);
            if (!idx) throw UnknownTheme(t);
            hits.push_back(*idx);
        }
    }
    if (mode == CountMode::per_review) {
        std::sort(hits.begin(), hits.end());
        hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    }
    return hits;
}

std::map<Category, std::vector<std::uint64_t>> count_by_category(const std::vector<MappedReview>& reviews,
                                                                 const ThemeSet& themes, CountMode mode) {
    std::map<Category, std::vector<std::uint64_t>> counts;
    for (const auto& r : reviews) {
        auto& c = counts[r.category];
        c.resize(themes.size(), 0);
        for (auto idx : theme_hits(r, themes, mode)) ++c[idx];
    }
    return counts;
}

}  // namespace

ThemeDistribution theme_distribution(const std::vector<MappedReview>& reviews, const ThemeSet& themes,
                                     CountMode mode) {
    ThemeDistribution d;
    const auto counts = count_by_category(reviews, themes, mode);
    if (counts.empty()) {
        d.categories.push_back(rank_themes("all", std::vector<std::uint64_t>(themes.size(), 0), themes));
        return d;
    }
    for (const auto& [cat, c] : counts) d.categories.push_back(rank_themes(cat.name(), c, themes));
    return d;
}

// --- trends -------------------------------------------------------------------------------

std::string Quarter::label() const { return fmt::format("{}Q{}", year, q); }

Quarter quarter_of(const std::chrono::year_month_day& date) {
    const auto month = static_cast<unsigned>(date.month());
    return {static_cast<int>(date.year()), static_cast<int>((month - 1) / 3 + 1)};
}

QuarterlyTrend quarterly_trends(const std::vector<MappedReview>& reviews, const ThemeSet& themes, std::size_t top_k) {
    QuarterlyTrend out;
    const auto counts = count_by_category(reviews, themes, CountMode::per_review);
    std::map<Category, std::vector<std::size_t>> top_idx;
    for (const auto& [cat, c] : counts) {
        const auto ranked = rank_themes(cat.name(), c, themes);
        auto& names = out.top_themes[cat.name()];
        for (std::size_t i = 0; i < ranked.rows.size() && names.size() < top_k; ++i) {
            if (ranked.rows[i].count == 0) break;
            names.push_back(ranked.rows[i].theme);
            top_idx[cat].push_back(*themes.index_of(ranked.rows[i].theme));
        }
    }

    std::map<std::pair<Quarter, Category>, TrendBucket> buckets;
    for (const auto& r : reviews) {
        if (!r.date) {
            out.warnings.push_back("MissingDate: review " + r.review_id + " skipped");
            continue;
        }
        const auto q = quarter_of(*r.date);
        auto& b = buckets[{q, r.category}];
        if (b.unique_reviews == 0) {
            b.quarter = q;
            b.category = r.category.name();
            for (auto idx : top_idx[r.category]) b.theme_counts[themes.themes()[idx].name] = 0;
        }
        ++b.unique_reviews;
        for (auto idx : theme_hits(r, themes, CountMode::per_review)) {
            ++b.theme_counts[themes.themes()[idx].name];
        }
    }
    for (auto& [_, b] : buckets) out.buckets.push_back(std::move(b));
    return out;
}

// --- customer loss ---------------------------------------------------------------------------

LossSummary customer_loss_summary(const std::vector<MappedReview>& concerned,
                                  const std::map<std::string, LossAction>& actions, const ThemeSet& themes) {
    LossSummary s;
    for (auto a : {LossAction::uninstalled, LossAction::replaced, LossAction::stopped_using, LossAction::none}) {
        s.by_action[std::string(to_string(a))] = 0;
    }
    std::vector<std::uint64_t> per_theme(themes.size(), 0);
    for (const auto& r : concerned) {
        ++s.concerned;
        const auto it = actions.find(r.review_id);
        if (it == actions.end()) throw UnclassifiedReview(r.review_id);
        ++s.by_action[std::string(to_string(it->second))];
        if (it->second == LossAction::none) continue;
        ++s.flagged;
        for (auto idx : theme_hits(r, themes, CountMode::per_review)) ++per_theme[idx];
    }
    s.rate = safe_ratio(s.flagged, s.concerned);
    for (std::size_t i = 0; i < themes.size(); ++i) {
        s.by_theme.push_back({themes.themes()[i].name, per_theme[i], percent_2dp(per_theme[i], s.flagged)});
    }
    return s;
}

// --- emitters -------------------------------------------------------------------------------

namespace {

ojson ratio_json(const CategoryRatio& c) {
    ojson j;
    j["category"] = c.category;
    j["concerned"] = c.concerned;
    j["total"] = c.total;
    j["ratio"] = c.ratio;
    return j;
}

}  // namespace

ojson to_json(const ConcernRatioSummary& s) {
    ojson j;
    j["categories"] = ojson::array();
    for (const auto& c : s.per_category) j["categories"].push_back(ratio_json(c));
    j["overall"] = ratio_json(s.overall);
    return j;
}

ojson to_json(const ThemeDistribution& d) {
    ojson j = ojson::array();
    for (const auto& c : d.categories) {
        ojson cat;
        cat["category"] = c.category;
        cat["total"] = c.total;
        cat["rows"] = ojson::array();
        for (std::size_t i = 0; i < c.rows.size(); ++i) {
            ojson row;
            row["rank"] = i + 1;
            row["theme"] = c.rows[i].theme;
            row["count"] = c.rows[i].count;
            row["percent"] = c.rows[i].percent;
            cat["rows"].push_back(std::move(row));
        }
        j.push_back(std::move(cat));
    }
    return j;
}

ojson to_json(const QuarterlyTrend& t) {
    ojson j;
    j["top_themes"] = ojson::object();
    for (const auto& [cat, names] : t.top_themes) j["top_themes"][cat] = names;
    j["buckets"] = ojson::array();
    for (const auto& b : t.buckets) {
        ojson row;
        row["quarter"] = b.quarter.label();
        row["category"] = b.category;
        row["unique_reviews"] = b.unique_reviews;
        row["themes"] = ojson::object();
        for (const auto& [name, count] : b.theme_counts) row["themes"][name] = count;
        j["buckets"].push_back(std::move(row));
    }
    j["warnings"] = t.warnings;
    return j;
}

ojson to_json(const LossSummary& s) {
    ojson j;
    j["concerned"] = s.concerned;
    j["flagged"] = s.flagged;
    j["rate"] = s.rate;
    j["by_action"] = ojson::object();
    for (const auto& [a, n] : s.by_action) j["by_action"][a] = n;
    j["by_theme"] = ojson::array();
    for (const auto& r : s.by_theme) {
        ojson row;
        row["theme"] = r.theme;
        row["count"] = r.count;
        row["percent_of_flagged"] = r.percent;
        j["by_theme"].push_back(std::move(row));
    }
    return j;
}

std::string to_text(const ConcernRatioSummary& s) {
    std::vector<std::vector<std::string>> rows;
    auto add = [&](const CategoryRatio& c) {
        rows.push_back({c.category, std::to_string(c.concerned), std::to_string(c.total), fmt::format("{:.4f}", c.ratio)});
    };
    for (const auto& c : s.per_category) add(c);
    add(s.overall);
    return format_table({"Category", "|C_c|", "|R_c|", "|C_c|/|R_c|"}, rows);
}

std::string to_text(const ThemeDistribution& d) {
    std::string out;
    for (const auto& c : d.categories) {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < c.rows.size(); ++i) {
            rows.push_back({fmt::format("{}. {}", i + 1, c.rows[i].theme), std::to_string(c.rows[i].count),
                            format_number(c.rows[i].percent, 2)});
        }
        out += fmt::format("{} (total {})\n", c.category, c.total);
        out += format_table({"High-level Theme", "#", "%"}, rows);
        out += "\n";
    }
    return out;
}

std::string to_text(const QuarterlyTrend& t) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& b : t.buckets) {
        std::vector<std::string> parts;
        for (const auto& name : t.top_themes.at(b.category)) {
            const auto it = b.theme_counts.find(name);
            parts.push_back(fmt::format("{}={}", name, it == b.theme_counts.end() ? 0 : it->second));
        }
        rows.push_back({b.quarter.label(), b.category, std::to_string(b.unique_reviews), text::join(parts, "; ")});
    }
    auto out = format_table({"Quarter", "Category", "Unique", "Top themes"}, rows);
    for (const auto& w : t.warnings) out += "warning: " + w + "\n";
    return out;
}

std::string to_text(const LossSummary& s) {
    std::string out = fmt::format("Concerned reviews: {}\nFlagged (uninstalled/replaced/stopped using): {}\nRate: {}%\n\n",
                                  s.concerned, s.flagged, format_number(100.0 * s.rate, 2));
    std::vector<std::vector<std::string>> rows;
    for (const auto& [a, n] : s.by_action) rows.push_back({a, std::to_string(n)});
    out += format_table({"Action", "Reviews"}, rows);
    rows.clear();
    for (const auto& r : s.by_theme) {
        if (r.count > 0) rows.push_back({r.theme, std::to_string(r.count), format_number(r.percent, 2)});
    }
    out += "\n" + format_table({"Theme", "Flagged", "% of flagged"}, rows);
    return out;
}

std::string to_csv(const ThemeDistribution& d) {
    std::string out = "category,rank,theme,count,percent\n";
    for (const auto& c : d.categories) {
        for (std::size_t i = 0; i < c.rows.size(); ++i) {
            out += fmt::format("{},{},{},{},{}\n", csv_field(c.category), i + 1, csv_field(c.rows[i].theme),
                               c.rows[i].count, format_number(c.rows[i].percent, 2));
        }
    }
    return out;
}

std::string to_csv(const QuarterlyTrend& t) {
    std::string out = "quarter,category,theme,count,unique_reviews\n";
    for (const auto& b : t.buckets) {
        for (const auto& name : t.top_themes.at(b.category)) {
            const auto it = b.theme_counts.find(name);
            out += fmt::format("{},{},{},{},{}\n", b.quarter.label(), csv_field(b.category), csv_field(name),
                               it == b.theme_counts.end() ? 0 : it->second, b.unique_reviews);
        }
    }
    return out;
}

}  // namespace spmine
