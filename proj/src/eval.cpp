#include "spmine/eval.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "spmine/error.hpp"
#include "spmine/text.hpp"

namespace spmine {

ConfusionMatrix confusion(const std::vector<bool>& predictions, const std::vector<bool>& golds) {
    if (predictions.size() != golds.size()) {
        throw DataError("LengthMismatch", "predictions and golds differ in length");
    }
    ConfusionMatrix m;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        if (predictions[i]) {
            (golds[i] ? m.tp : m.fp)++;
        } else {
            (golds[i] ? m.fn : m.tn)++;
        }
    }
    return m;
}

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

PRF prf_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    PRF out;
    out.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
    out.recall = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
    out.f1 = f1_of(out.precision, out.recall);
    return out;
}

ClassificationReport classification_report(const std::vector<bool>& predictions, const std::vector<bool>& golds) {
    if (predictions.size() != golds.size()) {
        throw DataError("LengthMismatch", "predictions and golds differ in length");
    }
    if (golds.empty()) throw DataError("EmptyDataset", "classification report of zero items");
    ClassificationReport r;
    r.matrix = confusion(predictions, golds);
    const auto& m = r.matrix;
    r.positive = {prf_from_counts(m.tp, m.fp, m.fn), m.tp + m.fn};
    r.negative = {prf_from_counts(m.tn, m.fn, m.fp), m.tn + m.fp};
    const double n = static_cast<double>(m.total());
    r.accuracy = static_cast<double>(m.tp + m.tn) / n;

    r.macro.precision = (r.positive.prf.precision + r.negative.prf.precision) / 2.0;
    r.macro.recall = (r.positive.prf.recall + r.negative.prf.recall) / 2.0;
    r.macro.f1 = (r.positive.prf.f1 + r.negative.prf.f1) / 2.0;

    // Pooled over both classes every error is one FP for one class and one FN for
    // the other, so micro P = R = F1 = accuracy.
    r.micro = prf_from_counts(m.tp + m.tn, m.fp + m.fn, m.fn + m.fp);

    const double wp = static_cast<double>(r.positive.support) / n;
    const double wn = static_cast<double>(r.negative.support) / n;
    r.weighted.precision = wp * r.positive.prf.precision + wn * r.negative.prf.precision;
    r.weighted.recall = wp * r.positive.prf.recall + wn * r.negative.prf.recall;
    r.weighted.f1 = wp * r.positive.prf.f1 + wn * r.negative.prf.f1;
    return r;
}

MultiLabelReport multilabel_report(const BoolMatrix& predicted, const BoolMatrix& gold,
                                   const std::vector<std::string>& themes) {
    if (predicted.size() != gold.size()) throw DataError("ShapeMismatch", "row counts differ");
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (predicted[i].size() != themes.size() || gold[i].size() != themes.size()) {
            throw DataError("ShapeMismatch", "row " + std::to_string(i) + " does not have one column per theme");
        }
    }
    MultiLabelReport r;
    r.per_theme.resize(themes.size());
    for (std::size_t t = 0; t < themes.size(); ++t) {
        auto& tm = r.per_theme[t];
        tm.theme = themes[t];
        std::size_t fp = 0;
        std::size_t fn = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            tm.annotated += gold[i][t];
            tm.predicted += predicted[i][t];
            if (gold[i][t] && predicted[i][t]) ++tm.tp;
            if (!gold[i][t] && predicted[i][t]) ++fp;
            if (gold[i][t] && !predicted[i][t]) ++fn;
        }
        tm.prf = prf_from_counts(tm.tp, fp, fn);
        r.tp += tm.tp;
        r.fp += fp;
        r.fn += fn;
    }
    if (!themes.empty()) {
        for (const auto& tm : r.per_theme) {
            r.macro.precision += tm.prf.precision;
            r.macro.recall += tm.prf.recall;
            r.macro.f1 += tm.prf.f1;
        }
        const double k = static_cast<double>(themes.size());
        r.macro.precision /= k;
        r.macro.recall /= k;
        r.macro.f1 /= k;
    }
    r.micro = prf_from_counts(r.tp, r.fp, r.fn);
    return r;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const auto l = static_cast<double>(lcs_length(candidate, reference));
    if (l == 0.0) return 0.0;
    const double p = l / static_cast<double>(candidate.size());
    const double r = l / static_cast<double>(reference.size());
    return f1_of(p, r);
}

namespace {

// Depth-first search for the alignment with the maximum number of matches and, among
// those, the fewest chunks. Matches per token type are fixed at min(count in
// candidate, count in reference); the search decides which occurrences pair up.
class ChunkSearch {
public:
    ChunkSearch(const std::vector<std::string>& cand, const std::vector<std::string>& ref, std::size_t budget)
        : budget_(budget) {
        std::unordered_map<std::string, int> ids;
        auto id_of = [&](const std::string& s) {
            return ids.try_emplace(s, static_cast<int>(ids.size())).first->second;
        };
        for (const auto& t : cand) cand_.push_back(id_of(t));
        for (const auto& t : ref) ref_.push_back(id_of(t));
        const auto types = ids.size();
        std::vector<int> cand_count(types, 0);
        std::vector<int> ref_count(types, 0);
        for (int t : cand_) ++cand_count[t];
        for (int t : ref_) ++ref_count[t];
        positions_.resize(types);
        for (std::size_t j = 0; j < ref_.size(); ++j) positions_[ref_[j]].push_back(j);
        skips_left_.resize(types);
        for (std::size_t t = 0; t < types; ++t) {
            skips_left_[t] = std::max(0, cand_count[t] - ref_count[t]);
            matches_ += static_cast<std::size_t>(std::min(cand_count[t], ref_count[t]));
        }
        used_.assign(ref_.size(), false);
    }

    std::size_t matches() const { return matches_; }

    // Returns the fewest chunks found and whether the search completed.
    std::pair<std::size_t, bool> run() {
        if (matches_ == 0) return {0, true};
        best_ = matches_ + 1;
        dfs(0, -1, -1, 0);
        return {best_, !exhausted_};
    }

private:
    void dfs(std::size_t i, long last_cand, long last_ref, std::size_t chunks) {
        if (chunks >= best_) return;
        if (++nodes_ > budget_) {
            exhausted_ = true;
            return;
        }
        if (i == cand_.size()) {
            best_ = chunks;
            return;
        }
        const int t = cand_[i];
        const bool adjacent_cand = last_cand >= 0 && static_cast<long>(i) == last_cand + 1;
        // Continue the current chunk first: it is the most promising branch.
        if (adjacent_cand) {
            const auto j = static_cast<std::size_t>(last_ref + 1);
            if (j < ref_.size() && !used_[j] && ref_[j] == t) {
                used_[j] = true;
                dfs(i + 1, static_cast<long>(i), static_cast<long>(j), chunks);
                used_[j] = false;
                if (exhausted_) return;
            }
        }
        for (auto j : positions_[t]) {
            if (used_[j] || (adjacent_cand && static_cast<long>(j) == last_ref + 1)) continue;
            used_[j] = true;
            dfs(i + 1, static_cast<long>(i), static_cast<long>(j), chunks + 1);
            used_[j] = false;
            if (exhausted_) return;
        }
        if (skips_left_[t] > 0) {
            --skips_left_[t];
            dfs(i + 1, last_cand, last_ref, chunks);
            ++skips_left_[t];
        }
    }

    std::vector<int> cand_;
    std::vector<int> ref_;
    std::vector<std::vector<std::size_t>> positions_;
    std::vector<int> skips_left_;
    std::vector<bool> used_;
    std::size_t matches_ = 0;
    std::size_t best_ = 0;
    std::size_t nodes_ = 0;
    std::size_t budget_;
    bool exhausted_ = false;
};

}  // namespace

MeteorDetail meteor_lite_detail(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                                std::size_t node_budget) {
    MeteorDetail d;
    if (candidate.empty() || reference.empty()) return d;
    ChunkSearch search(candidate, reference, node_budget);
    d.matches = search.matches();
    if (d.matches == 0) return d;
    const auto [chunks, exact] = search.run();
    d.chunks = chunks;
    d.exact = exact;
    const double m = static_cast<double>(d.matches);
    const double p = m / static_cast<double>(candidate.size());
    const double r = m / static_cast<double>(reference.size());
    const double fmean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(d.chunks) / m;
    const double penalty = 0.5 * frag * frag * frag;
    d.score = fmean * (1.0 - penalty);
    return d;
}

double meteor_lite(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
    return meteor_lite_detail(candidate, reference).score;
}

double embed_score_from_cosine(double cosine, bool anti_aligned_possible) {
    if (anti_aligned_possible) return std::clamp((1.0 + cosine) / 2.0, 0.0, 1.0);
    return std::clamp(cosine, 0.0, 1.0);
}

double embed_score(const std::string& candidate, const std::string& reference, DenseEmbedder& embedder,
                   bool anti_aligned_possible) {
    if (candidate == reference) return 1.0;
    const auto e = embedder.embed({candidate, reference});
    return embed_score_from_cosine(cosine(e.vectors.row(0), e.vectors.row(1)), anti_aligned_possible);
}

double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.size() != b.size()) throw DataError("LengthMismatch", "rater label lists differ in length");
    if (a.empty()) throw DataError("EmptyDataset", "kappa of zero items");
    const double n = static_cast<double>(a.size());
    std::map<std::string, std::pair<double, double>> marginals;
    double agree = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        marginals[a[i]].first += 1.0;
        marginals[b[i]].second += 1.0;
        if (a[i] == b[i]) agree += 1.0;
    }
    const double po = agree / n;
    double pe = 0.0;
    for (const auto& [_, m] : marginals) pe += (m.first / n) * (m.second / n);
    if (pe >= 1.0) return 1.0;  // both raters constant on the same label
    return (po - pe) / (1.0 - pe);
}

double cohen_kappa(const std::vector<bool>& a, const std::vector<bool>& b) {
    std::vector<std::string> sa;
    std::vector<std::string> sb;
    for (bool x : a) sa.emplace_back(x ? "1" : "0");
    for (bool x : b) sb.emplace_back(x ? "1" : "0");
    return cohen_kappa(sa, sb);
}

std::vector<std::pair<std::size_t, std::size_t>> greedy_issue_matching(const std::vector<std::string>& predicted,
                                                                       const std::vector<std::string>& gold) {
    struct Candidate {
        double score;
        std::size_t p;
        std::size_t g;
    };
    std::vector<Candidate> all;
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        const auto pt = text::whitespace_tokens(predicted[p]);
        for (std::size_t g = 0; g < gold.size(); ++g) all.push_back({rouge_l(pt, text::whitespace_tokens(gold[g])), p, g});
    }
    std::stable_sort(all.begin(), all.end(), [](const Candidate& x, const Candidate& y) {
        if (x.score != y.score) return x.score > y.score;
        if (x.p != y.p) return x.p < y.p;
        return x.g < y.g;
    });
    std::vector<bool> p_used(predicted.size(), false);
    std::vector<bool> g_used(gold.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& c : all) {
        if (p_used[c.p] || g_used[c.g]) continue;
        p_used[c.p] = g_used[c.g] = true;
        pairs.emplace_back(c.p, c.g);
    }
    return pairs;
}

namespace {

struct SimAccumulator {
    double rouge = 0.0;
    double meteor = 0.0;
    double embed = 0.0;
    std::size_t items = 0;
    std::size_t approximate = 0;
    bool with_embed = false;

    struct Scores {
        double rouge;
        double meteor;
        double embed;
    };

    Scores score(const std::string& cand, const std::string& ref, const EmbedScoreOptions& opts) {
        const auto ct = text::whitespace_tokens(cand);
        const auto rt = text::whitespace_tokens(ref);
        const auto m = meteor_lite_detail(ct, rt);
        if (!m.exact) ++approximate;
        double e = 0.0;
        if (opts.embedder != nullptr) e = embed_score(cand, ref, *opts.embedder, opts.anti_aligned_possible);
        return {rouge_l(ct, rt), m.score, e};
    }

    void add(const Scores& s) {
        rouge += s.rouge;
        meteor += s.meteor;
        embed += s.embed;
        ++items;
    }

    TextSimScores finish() const {
        TextSimScores out;
        out.items = items;
        if (items == 0) return out;
        const double n = static_cast<double>(items);
        out.rouge_l = rouge / n;
        out.meteor_lite = meteor / n;
        if (with_embed) out.embed_score = embed / n;
        return out;
    }
};

std::string task3_text(const Label& label) { return label.concern ? text::join(label.issues, ", ") : "N/A"; }

}  // namespace

CrcEvaluation evaluate_crc(const std::vector<std::optional<Label>>& predictions, const std::vector<Label>& golds,
                           const EmbedScoreOptions& embed) {
    if (predictions.size() != golds.size()) {
        throw DataError("LengthMismatch", "predictions and golds differ in length");
    }
    CrcEvaluation out;
    std::vector<bool> pred_flags;
    std::vector<bool> gold_flags;
    SimAccumulator task2;
    SimAccumulator na;
    SimAccumulator other;
    task2.with_embed = na.with_embed = other.with_embed = embed.embedder != nullptr;

    for (std::size_t i = 0; i < golds.size(); ++i) {
        if (!predictions[i]) {
            ++out.anomalous;
            continue;
        }
        const auto& pred = *predictions[i];
        const auto& gold = golds[i];
        pred_flags.push_back(pred.concern);
        gold_flags.push_back(gold.concern);
        task2.add(task2.score(pred.rationale, gold.rationale, embed));

        if (!gold.concern) {
            na.add(na.score(task3_text(pred), "N/A", embed));
            continue;
        }
        // Issue lists: greedy pairs, unmatched issues score 0.
        const auto denom = static_cast<double>(std::max(pred.issues.size(), gold.issues.size()));
        SimAccumulator::Scores sum{0.0, 0.0, 0.0};
        if (pred.concern) {
            for (const auto& [p, g] : greedy_issue_matching(pred.issues, gold.issues)) {
                const auto s = other.score(pred.issues[p], gold.issues[g], embed);
                sum.rouge += s.rouge;
                sum.meteor += s.meteor;
                sum.embed += s.embed;
            }
            sum = {sum.rouge / denom, sum.meteor / denom, sum.embed / denom};
        } else {
            // Predicted "N/A" against real issues.
            sum = other.score("N/A", task3_text(gold), embed);
        }
        other.add(sum);
    }
    out.evaluated = pred_flags.size();
    if (!pred_flags.empty()) out.task1 = classification_report(pred_flags, gold_flags);
    out.task2 = task2.finish();
    out.task3_na = na.finish();
    out.task3_other = other.finish();
    out.approximate_meteor = task2.approximate + na.approximate + other.approximate;
    return out;
}

}  // namespace spmine
