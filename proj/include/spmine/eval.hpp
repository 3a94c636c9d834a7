#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "spmine/corpus.hpp"
#include "spmine/embedding.hpp"

namespace spmine {

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Throws DataError("LengthMismatch").
ConfusionMatrix confusion(const std::vector<bool>& predictions, const std::vector<bool>& golds);

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// 0/0 is taken as 0 for every ratio.
PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

struct ClassMetrics {
    PRF prf;
    std::size_t support = 0;
};

struct ClassificationReport {
    ConfusionMatrix matrix;
    ClassMetrics positive;  // class "Yes"
    ClassMetrics negative;  // class "No"
    double accuracy = 0.0;
    PRF macro;
    PRF micro;
    PRF weighted;  // support-weighted
};

// Throws DataError("LengthMismatch") or ("EmptyDataset").
ClassificationReport classification_report(const std::vector<bool>& predictions, const std::vector<bool>& golds);

using BoolMatrix = std::vector<std::vector<bool>>;  // items x themes

struct ThemeMetrics {
    std::string theme;
    std::size_t annotated = 0;
    std::size_t predicted = 0;
    std::size_t tp = 0;
    PRF prf;
};

struct MultiLabelReport {
    std::vector<ThemeMetrics> per_theme;
    PRF macro;  // unweighted mean over every theme, zero-support themes included
    PRF micro;  // from pooled TP/FP/FN
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

// Throws DataError("ShapeMismatch").
MultiLabelReport multilabel_report(const BoolMatrix& predicted, const BoolMatrix& gold,
                                   const std::vector<std::string>& themes);

// LCS-based F1 over tokens; 0 if either side is empty.
double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct MeteorDetail {
    double score = 0.0;
    std::size_t matches = 0;
    std::size_t chunks = 0;
    // False when the chunk search hit its node budget and the best alignment found
    // so far was used.
    bool exact = true;
};

// Exact-match unigram METEOR: maximum matches, then fewest chunks;
// Fmean = 10PR / (R + 9P), penalty = 0.5 (chunks / matches)^3.
MeteorDetail meteor_lite_detail(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                                std::size_t node_budget = 200'000);
double meteor_lite(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

// Sentence-embedding cosine. With anti_aligned_possible the cosine is mapped to
// [0, 1] by (1 + cos) / 2, otherwise it is clamped at 0.
double embed_score(const std::string& candidate, const std::string& reference, DenseEmbedder& embedder,
                   bool anti_aligned_possible);
double embed_score_from_cosine(double cosine, bool anti_aligned_possible);

// Throws DataError("LengthMismatch") or ("EmptyDataset").
double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);
double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b);

// Greedy one-to-one pairing of predicted and gold items by descending rouge_l
// (ties: lowest predicted index, then lowest gold index).
std::vector<std::pair<std::size_t, std::size_t>> greedy_issue_matching(const std::vector<std::string>& predicted,
                                                                       const std::vector<std::string>& gold);

struct TextSimScores {
    double rouge_l = 0.0;
    double meteor_lite = 0.0;
    std::optional<double> embed_score;
    std::size_t items = 0;
};

struct CrcEvaluation {
    ClassificationReport task1;
    TextSimScores task2;
    TextSimScores task3_na;     // gold Task 1 = No
    TextSimScores task3_other;  // gold Task 1 = Yes
    std::size_t evaluated = 0;
    std::size_t anomalous = 0;  // predictions that could not be parsed, left out of every metric
    std::size_t approximate_meteor = 0;
};

struct EmbedScoreOptions {
    DenseEmbedder* embedder = nullptr;
    bool anti_aligned_possible = true;
};

// predictions[i] is nullopt for an anomalous response. Task 3 text for No labels is
// the literal "N/A"; for Yes labels issues are paired greedily and each metric is
// summed over pairs and divided by max(|predicted|, |gold|).
CrcEvaluation evaluate_crc(const std::vector<std::optional<Label>>& predictions, const std::vector<Label>& golds,
                           const EmbedScoreOptions& embed = {});

}  // namespace spmine
