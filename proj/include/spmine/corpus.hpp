#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spmine {

class Category {
public:
    enum class Kind { tracker, speaker, camera, other };

    Category() = default;
    static Category tracker() { return Category(Kind::tracker, "tracker"); }
    static Category speaker() { return Category(Kind::speaker, "speaker"); }
    static Category camera() { return Category(Kind::camera, "camera"); }
    static Category other(std::string name);

    // Accepts the three known names (singular or plural, any case); anything else
    // becomes other(name).
    static Category parse(std::string_view raw);

    Kind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }

    // tracker < speaker < camera < other(name...) by name.
    friend bool operator<(const Category& a, const Category& b) {
        if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
        return a.name_ < b.name_;
    }
    friend bool operator==(const Category& a, const Category& b) = default;

private:
    Category(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}
    Kind kind_ = Kind::other;
    std::string name_;
};

struct Review {
    std::string id;
    std::string product_id;
    Category category;
    int rating = 0;
    std::optional<std::string> country;
    std::optional<std::chrono::year_month_day> date;
    std::string text;
};

struct Corpus {
    std::vector<Review> reviews;

    std::size_t size() const noexcept { return reviews.size(); }
    bool empty() const noexcept { return reviews.empty(); }
    // Linear lookup by id; returns nullptr if absent.
    const Review* find(std::string_view id) const;
};

// Ground truth for the three CRC tasks on one review.
struct Label {
    bool concern = false;
    std::string rationale;
    std::vector<std::string> issues;

    friend bool operator==(const Label&, const Label&) = default;
};

// Normalizes issues (lowercase, trimmed, deduplicated) and enforces
// issues non-empty <=> concern, rationale non-empty. Throws DataError("InvalidLabel").
Label make_label(bool concern, std::string rationale, std::vector<std::string> issues);

struct LabeledReview {
    Review review;
    Label label;
};

struct CorpusStats {
    std::size_t raw_count = 0;
    std::size_t after_empty_filter = 0;
    std::size_t after_language_filter = 0;
    std::size_t after_dedup = 0;

    friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t rng_seed = 0;
};

enum class InputFormat { csv, json_lines };

InputFormat format_from_path(const std::filesystem::path& path);

// One Review per record. Missing ids become product_id + "-" + six-digit row index.
// Throws MalformedRecord(row, reason); row numbers are 1-based data rows.
Corpus ingest(const std::filesystem::path& path, InputFormat format);

class LanguageDetector {
public:
    virtual ~LanguageDetector() = default;
    virtual bool is_english(std::string_view text) const = 0;
};

// English if the fraction of tokens found in an English stopword list reaches the
// threshold. The stopword list leaves out words that are also common function
// words in Spanish/Portuguese/Italian ("a", "no", "y", "me", ...).
class StopwordRatioDetector final : public LanguageDetector {
public:
    explicit StopwordRatioDetector(double threshold = 0.12) : threshold_(threshold) {}
    bool is_english(std::string_view text) const override;
    double ratio(std::string_view text) const;

private:
    double threshold_;
};

struct PreprocessResult {
    Corpus corpus;
    CorpusStats stats;
};

// Drops empty texts, then non-English texts, then duplicates of normalized text
// (first occurrence wins). Output order is a subsequence of input order.
PreprocessResult preprocess(const Corpus& corpus, const LanguageDetector& detector);
PreprocessResult preprocess(const Corpus& corpus);

struct SplitResult {
    std::vector<LabeledReview> train;
    std::vector<LabeledReview> validation;
    std::vector<std::string> warnings;
};

// Seeded Fisher-Yates shuffle, then the first train_size items train.
// train_size = ceil(train_fraction * n). Throws DataError("EmptyDataset").
SplitResult split(const std::vector<LabeledReview>& labeled, const SplitSpec& spec);

// Same partition rule over indices, for callers splitting other record types.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, const SplitSpec& spec);

std::size_t train_size_for(std::size_t n, double train_fraction);

struct BalanceCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

BalanceCounts balance_check(const std::vector<LabeledReview>& labeled);

// --- JSON-lines persistence -------------------------------------------------

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);

// Labeled dataset: {review_id, concern: "Yes"|"No", rationale, issues: [..] | "N/A"}.
// Reviews are joined from `corpus` by id; a record may instead carry its own "text".
std::vector<LabeledReview> load_labeled(const std::filesystem::path& path, const Corpus& corpus);
void write_labeled(const std::vector<LabeledReview>& labeled, const std::filesystem::path& path);

std::string format_date(const std::chrono::year_month_day& date);
std::optional<std::chrono::year_month_day> parse_date(std::string_view iso);

}  // namespace spmine
