#include "spmine/corpus.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <unordered_set>

#include "csv.hpp"
#include "spmine/error.hpp"
#include "spmine/rng.hpp"
#include "spmine/text.hpp"

namespace spmine {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Category Category::other(std::string name) { return Category(Kind::other, text::normalize(name)); }

Category Category::parse(std::string_view raw) {
    const auto name = text::normalize(raw);
    if (name == "tracker" || name == "trackers") return tracker();
    if (name == "speaker" || name == "speakers") return speaker();
    if (name == "camera" || name == "cameras") return camera();
    return other(name);
}

const Review* Corpus::find(std::string_view id) const {
    for (const auto& r : reviews) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

Label make_label(bool concern, std::string rationale, std::vector<std::string> issues) {
    Label label;
    label.concern = concern;
    label.rationale = std::string(text::trim(rationale));
    std::unordered_set<std::string> seen;
    for (const auto& raw : issues) {
        auto issue = text::normalize(raw);
        if (issue.empty() || !seen.insert(issue).second) continue;
        if (issue == "n/a") throw DataError("InvalidLabel", "\"n/a\" is not an issue");
        if (issue.find(',') != std::string::npos) {
            throw DataError("InvalidLabel", "issue contains the list delimiter ',': '" + issue + "'");
        }
        label.issues.push_back(std::move(issue));
    }
    if (label.rationale.empty()) throw DataError("InvalidLabel", "rationale must not be empty");
    if (concern && label.issues.empty()) throw DataError("InvalidLabel", "a concern label needs at least one issue");
    if (!concern && !label.issues.empty()) throw DataError("InvalidLabel", "a no-concern label must not list issues");
    return label;
}

std::string format_date(const std::chrono::year_month_day& date) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                       static_cast<unsigned>(date.day()));
}

std::optional<std::chrono::year_month_day> parse_date(std::string_view iso) {
    iso = text::trim(iso);
    // Accept "YYYY-MM-DD" optionally followed by a time part.
    if (iso.size() < 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
    if (iso.size() > 10 && iso[10] != 'T' && iso[10] != ' ') return std::nullopt;
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto parse = [](std::string_view s, auto& out) {
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return ec == std::errc() && ptr == s.data() + s.size();
    };
    if (!parse(iso.substr(0, 4), y) || !parse(iso.substr(5, 2), m) || !parse(iso.substr(8, 2), d)) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

InputFormat format_from_path(const std::filesystem::path& path) {
    const auto ext = text::to_lower(path.extension().string());
    if (ext == ".csv") return InputFormat::csv;
    if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return InputFormat::json_lines;
    throw UsageError("cannot infer input format from extension '" + ext + "'");
}

namespace {

// Raw string fields of one input record, before validation.
struct RawRecord {
    std::optional<std::string> id;
    std::optional<std::string> product_id;
    std::optional<std::string> category;
    std::optional<std::string> rating;
    std::optional<std::string> country;
    std::optional<std::string> date;
    std::optional<std::string> text;
};

Review build_review(const RawRecord& raw, std::size_t row) {
    Review r;
    if (!raw.product_id) throw MalformedRecord(row, "missing product_id");
    if (!raw.category) throw MalformedRecord(row, "missing category");
    if (!raw.rating) throw MalformedRecord(row, "missing rating");
    if (!raw.text) throw MalformedRecord(row, "missing text");
    r.product_id = std::string(text::trim(*raw.product_id));
    if (raw.id && !text::trim(*raw.id).empty()) {
        r.id = std::string(text::trim(*raw.id));
    } else {
        r.id = fmt::format("{}-{:06d}", r.product_id, row - 1);
    }
    r.category = Category::parse(*raw.category);

    const auto rating_text = text::trim(*raw.rating);
    int rating = 0;
    auto [ptr, ec] = std::from_chars(rating_text.data(), rating_text.data() + rating_text.size(), rating);
    if (ec != std::errc() || ptr != rating_text.data() + rating_text.size()) {
        // Ratings like "4.0" are common in dumps.
        double value = 0;
        auto [p2, e2] = std::from_chars(rating_text.data(), rating_text.data() + rating_text.size(), value);
        if (e2 != std::errc() || p2 != rating_text.data() + rating_text.size() || value != std::floor(value)) {
            throw MalformedRecord(row, "rating is not an integer: '" + std::string(rating_text) + "'");
        }
        rating = static_cast<int>(value);
    }
    if (rating < 1 || rating > 5) throw MalformedRecord(row, "rating out of range [1,5]: " + std::to_string(rating));
    r.rating = rating;

    if (raw.country && !text::trim(*raw.country).empty()) r.country = std::string(text::trim(*raw.country));
    if (raw.date && !text::trim(*raw.date).empty()) {
        r.date = parse_date(*raw.date);
        if (!r.date) throw MalformedRecord(row, "date is not ISO-8601: '" + *raw.date + "'");
    }
    r.text = *raw.text;
    return r;
}

void add_review(Corpus& corpus, std::unordered_set<std::string>& ids, Review review, std::size_t row) {
    if (!ids.insert(review.id).second) throw MalformedRecord(row, "duplicate id '" + review.id + "'");
    corpus.reviews.push_back(std::move(review));
}

Corpus ingest_csv(std::istream& in) {
    Corpus corpus;
    std::vector<std::string> header;
    if (!csv::read_record(in, header)) return corpus;
    if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column[text::normalize(header[i])] = i;
    for (const char* required : {"product_id", "category", "rating", "text"}) {
        if (!column.contains(required)) throw MalformedRecord(0, std::string("missing column '") + required + "'");
    }

    std::unordered_set<std::string> ids;
    std::vector<std::string> fields;
    std::size_t row = 0;
    while (csv::read_record(in, fields)) {
        ++row;
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != header.size()) {
            throw MalformedRecord(row, fmt::format("expected {} fields, found {}", header.size(), fields.size()));
        }
        auto get = [&](const char* name) -> std::optional<std::string> {
            const auto it = column.find(name);
            if (it == column.end()) return std::nullopt;
            return fields[it->second];
        };
        RawRecord raw{get("id"), get("product_id"), get("category"), get("rating"), get("country"), get("date"), get("text")};
        add_review(corpus, ids, build_review(raw, row), row);
    }
    return corpus;
}

std::optional<std::string> json_field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number()) return it->dump();
    return std::nullopt;
}

Corpus ingest_jsonl(std::istream& in) {
    Corpus corpus;
    std::unordered_set<std::string> ids;
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
        if (!obj.is_object()) throw MalformedRecord(row, "record is not a JSON object");
        RawRecord raw{json_field(obj, "id"),     json_field(obj, "product_id"), json_field(obj, "category"),
                      json_field(obj, "rating"), json_field(obj, "country"),    json_field(obj, "date"),
                      json_field(obj, "text")};
        add_review(corpus, ids, build_review(raw, row), row);
    }
    return corpus;
}

// Common English function words, minus ones that are equally common in Romance
// languages and single letters left behind by apostrophe splitting.
const std::unordered_set<std::string>& english_stopwords() {
    static const std::unordered_set<std::string> words = {
        "i",        "my",       "myself",  "we",      "our",     "ours",    "ourselves", "you",     "your",
        "yours",    "yourself", "he",      "him",     "his",     "himself", "she",       "her",     "hers",
        "herself",  "it",       "its",     "itself",  "they",    "them",    "their",     "theirs",  "themselves",
        "what",     "which",    "who",     "whom",    "this",    "that",    "these",     "those",   "am",
        "is",       "are",      "was",     "were",    "be",      "been",    "being",     "have",    "has",
        "had",      "having",   "do",      "does",    "did",     "doing",   "an",        "the",     "and",
        "but",      "if",       "or",      "because", "as",      "until",   "while",     "of",      "at",
        "by",       "for",      "with",    "about",   "against", "between", "into",      "through", "during",
        "before",   "after",    "above",   "below",   "to",      "from",    "up",        "down",    "in",
        "out",      "on",       "off",     "over",    "under",   "again",   "further",   "then",    "once",
        "here",     "there",    "when",    "where",   "why",     "how",     "all",       "any",     "both",
        "each",     "few",      "more",    "most",    "other",   "some",    "such",      "nor",     "not",
        "only",     "own",      "same",    "so",      "than",    "too",     "very",      "can",     "will",
        "just",     "don",      "should",  "now",     "doesn",   "didn",    "isn",       "wasn",    "aren",
        "couldn",   "wouldn",   "shouldn", "hasn",    "haven",   "hadn",    "weren",     "won",     "would",
        "could",    "it's",     "also",    "get",     "got",     "really",  "much",      "one",     "like",
    };
    return words;
}

}  // namespace

Corpus ingest(const std::filesystem::path& path, InputFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("IoError", "cannot open " + path.string());
    return format == InputFormat::csv ? ingest_csv(in) : ingest_jsonl(in);
}

double StopwordRatioDetector::ratio(std::string_view text) const {
    const auto tokens = text::word_tokens(text);
    if (tokens.empty()) return 0.0;
    const auto& stop = english_stopwords();
    const auto hits = std::count_if(tokens.begin(), tokens.end(), [&](const auto& t) { return stop.contains(t); });
    return static_cast<double>(hits) / static_cast<double>(tokens.size());
}

bool StopwordRatioDetector::is_english(std::string_view text) const { return ratio(text) >= threshold_; }

PreprocessResult preprocess(const Corpus& corpus, const LanguageDetector& detector) {
    PreprocessResult result;
    result.stats.raw_count = corpus.size();

    std::vector<const Review*> stage;
    for (const auto& r : corpus.reviews) {
        if (!text::trim(r.text).empty()) stage.push_back(&r);
    }
    result.stats.after_empty_filter = stage.size();

    std::erase_if(stage, [&](const Review* r) { return !detector.is_english(r->text); });
    result.stats.after_language_filter = stage.size();

    std::unordered_set<std::string> seen;
    for (const Review* r : stage) {
        if (seen.insert(text::normalize(r->text)).second) result.corpus.reviews.push_back(*r);
    }
    result.stats.after_dedup = result.corpus.size();
    return result;
}

PreprocessResult preprocess(const Corpus& corpus) { return preprocess(corpus, StopwordRatioDetector{}); }

std::size_t train_size_for(std::size_t n, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DataError("InvalidSplit", "train_fraction must be in (0,1)");
    }
    // The small epsilon keeps exact products like 0.8 * 5 from rounding up.
    const double exact = train_fraction * static_cast<double>(n);
    return std::min(n, static_cast<std::size_t>(std::ceil(exact - 1e-9)));
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, const SplitSpec& spec) {
    if (n == 0) throw DataError("EmptyDataset", "cannot split an empty dataset");
    const auto n_train = train_size_for(n, spec.train_fraction);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(spec.rng_seed);
    rng.shuffle(order.begin(), order.end());
    std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> validation(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return {std::move(train), std::move(validation)};
}

SplitResult split(const std::vector<LabeledReview>& labeled, const SplitSpec& spec) {
    auto [train_idx, valid_idx] = split_indices(labeled.size(), spec);
    SplitResult result;
    for (auto i : train_idx) result.train.push_back(labeled[i]);
    for (auto i : valid_idx) result.validation.push_back(labeled[i]);
    if (result.validation.empty()) {
        result.warnings.push_back(fmt::format("validation set is empty (n = {}, train_fraction = {})", labeled.size(),
                                              spec.train_fraction));
    }
    if (result.train.empty()) result.warnings.emplace_back("training set is empty");
    return result;
}

BalanceCounts balance_check(const std::vector<LabeledReview>& labeled) {
    BalanceCounts counts;
    for (const auto& l : labeled) (l.label.concern ? counts.positives : counts.negatives)++;
    return counts;
}

namespace {

ordered_json review_to_json(const Review& r) {
    ordered_json j;
    j["id"] = r.id;
    j["product_id"] = r.product_id;
    j["category"] = r.category.name();
    j["rating"] = r.rating;
    j["country"] = r.country ? ordered_json(*r.country) : ordered_json(nullptr);
    j["date"] = r.date ? ordered_json(format_date(*r.date)) : ordered_json(nullptr);
    j["text"] = r.text;
    return j;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("IoError", "cannot write " + path.string());
    return out;
}

}  // namespace

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
    auto out = open_output(path);
    for (const auto& r : corpus.reviews) out << review_to_json(r).dump() << '\n';
}

std::vector<LabeledReview> load_labeled(const std::filesystem::path& path, const Corpus& corpus) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("IoError", "cannot open " + path.string());
    std::map<std::string_view, const Review*> by_id;
    for (const auto& r : corpus.reviews) by_id.emplace(r.id, &r);

    std::vector<LabeledReview> out;
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
        const auto id = json_field(obj, "review_id");
        if (!id) throw MalformedRecord(row, "missing review_id");
        const auto concern = json_field(obj, "concern");
        if (!concern) throw MalformedRecord(row, "missing concern");
        const auto concern_norm = text::normalize(*concern);
        if (concern_norm != "yes" && concern_norm != "no") throw MalformedRecord(row, "concern must be Yes or No");

        std::vector<std::string> issues;
        if (const auto it = obj.find("issues"); it != obj.end()) {
            if (it->is_array()) {
                for (const auto& v : *it) issues.push_back(v.get<std::string>());
            } else if (!(it->is_string() && text::normalize(it->get<std::string>()) == "n/a")) {
                throw MalformedRecord(row, "issues must be an array or \"N/A\"");
            }
        }
        LabeledReview lr;
        try {
            lr.label = make_label(concern_norm == "yes", json_field(obj, "rationale").value_or(""), std::move(issues));
        } catch (const DataError& e) {
            throw MalformedRecord(row, e.what());
        }
        if (const auto found = by_id.find(*id); found != by_id.end()) {
            lr.review = *found->second;
        } else if (const auto inline_text = json_field(obj, "text")) {
            lr.review.id = *id;
            lr.review.text = *inline_text;
            lr.review.category = Category::parse(json_field(obj, "category").value_or("other"));
        } else {
            throw MalformedRecord(row, "review_id '" + *id + "' not found in corpus");
        }
        out.push_back(std::move(lr));
    }
    return out;
}

void write_labeled(const std::vector<LabeledReview>& labeled, const std::filesystem::path& path) {
    auto out = open_output(path);
    for (const auto& l : labeled) {
        ordered_json j;
        j["review_id"] = l.review.id;
        j["concern"] = l.label.concern ? "Yes" : "No";
        j["rationale"] = l.label.rationale;
        j["issues"] = l.label.concern ? ordered_json(l.label.issues) : ordered_json("N/A");
        out << j.dump() << '\n';
    }
}

}  // namespace spmine
