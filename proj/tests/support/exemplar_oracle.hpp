#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "spmine/embedding.hpp"
#include "spmine/error.hpp"
#include "spmine/exemplar.hpp"
#include "spmine/rng.hpp"

namespace spmine::testing {

// Brute-force reference selectors. Every choice is made by comparing each candidate
// against every other one.

// True if i beats j: higher similarity, or equal similarity and lower index.
inline bool beats(const std::vector<double>& sims, std::size_t i, std::size_t j) {
    return sims[i] > sims[j] || (sims[i] == sims[j] && i < j);
}

inline std::optional<std::size_t> best_of(const std::vector<double>& sims, const std::vector<std::size_t>& cands) {
    for (auto i : cands) {
        bool wins = true;
        for (auto j : cands) {
            if (j != i && !beats(sims, i, j)) wins = false;
        }
        if (wins) return i;
    }
    return std::nullopt;
}

struct OracleCrc {
    bool ok = false;  // false: no valid pair exists
    std::size_t closest = 0;
    std::size_t opposite = 0;
    bool fallback = false;
};

inline OracleCrc oracle_crc(const std::vector<double>& sims, const std::vector<bool>& labels,
                            std::optional<std::size_t> target) {
    OracleCrc out;
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        if (!target || i != *target) all.push_back(i);
    }
    const auto t1 = best_of(sims, all);
    if (!t1) return out;
    std::vector<std::size_t> strict, opposite;
    for (auto j : all) {
        if (j == *t1 || labels[j] == labels[*t1]) continue;
        opposite.push_back(j);
        if (sims[j] < sims[*t1]) strict.push_back(j);
    }
    if (opposite.empty()) return out;
    out.ok = true;
    out.closest = *t1;
    if (!strict.empty()) {
        out.opposite = *best_of(sims, strict);
    } else {
        out.opposite = *best_of(sims, opposite);
        out.fallback = true;
    }
    return out;
}

inline std::vector<std::size_t> oracle_tm(const std::vector<double>& sims, std::optional<std::size_t> target,
                                          std::size_t k) {
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        if (!target || i != *target) all.push_back(i);
    }
    std::vector<std::optional<std::size_t>> by_rank(all.size());
    for (auto i : all) {
        std::size_t rank = 0;
        for (auto j : all) {
            if (j != i && beats(sims, j, i)) ++rank;
        }
        by_rank[rank] = i;
    }
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < std::min(k, all.size()); ++r) out.push_back(*by_rank[r]);
    return out;
}

// Small integer vectors so that ties and exact duplicates are common.
inline Matrix random_embeddings(Rng& rng, std::size_t n, std::size_t dim) {
    Matrix m(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) m(i, j) = static_cast<double>(rng.below(5)) - 2.0;
    }
    return m;
}

struct EquivalenceStats {
    std::size_t corpora = 0;
    std::size_t crc_checks = 0;
    std::size_t tm_checks = 0;
    std::size_t fallbacks = 0;
    std::size_t no_candidate = 0;
    std::size_t mismatches = 0;
};

// Compares the library selectors with the oracles for every target of `corpora`
// random pools of size <= 50, plus one out-of-pool query per pool.
inline EquivalenceStats exemplar_equivalence(std::size_t corpora, std::uint64_t seed) {
    EquivalenceStats st;
    Rng rng(seed);
    for (std::size_t c = 0; c < corpora; ++c) {
        ++st.corpora;
        const auto n = static_cast<std::size_t>(1 + rng.below(50));
        const auto dim = static_cast<std::size_t>(1 + rng.below(4));
        // Label skew from all-No to all-Yes so that missing opposite labels occur.
        const double p_yes = static_cast<double>(rng.below(5)) / 4.0;
        std::vector<LabeledReview> pool(n);
        std::vector<ThemeMapping> mappings(n);
        std::vector<bool> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.uniform01() < p_yes;
            pool[i].review.id = std::to_string(i);
            pool[i].review.text = "text " + std::to_string(i);
            pool[i].label = labels[i] ? make_label(true, "r", {"issue"}) : make_label(false, "r", {});
            mappings[i] = ThemeMapping{"issue " + std::to_string(i), {"surveillance"}};
        }
        const auto emb = random_embeddings(rng, n + 1, dim);
        Matrix pool_vectors(n, dim), query(1, dim);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < dim; ++j) pool_vectors(i, j) = emb(i, j);
        }
        for (std::size_t j = 0; j < dim; ++j) query(0, j) = emb(n, j);
        const auto sims = cosine_matrix(pool_vectors);
        const auto cross = cosine_cross(query, pool_vectors);

        auto check_crc = [&](const std::vector<double>& row, std::optional<std::size_t> target) {
            ++st.crc_checks;
            const auto expected = oracle_crc(row, labels, target);
            const auto coin_seed = rng.next();
            Rng lib_rng(coin_seed);
            try {
                const auto pair = target ? select_crc_examples(*target, pool, sims, lib_rng)
                                         : select_crc_examples_for(row, pool, lib_rng);
                if (!expected.ok) {
                    ++st.mismatches;
                    return;
                }
                const bool closest_first = Rng(coin_seed).uniform01() < 0.5;
                const auto first = closest_first ? expected.closest : expected.opposite;
                const auto second = closest_first ? expected.opposite : expected.closest;
                if (pair.closest_is_first != closest_first || pair.first_shown.index != first ||
                    pair.second_shown.index != second ||
                    pair.first_shown.label.concern == pair.second_shown.label.concern) {
                    ++st.mismatches;
                }
                if (expected.fallback) ++st.fallbacks;
            } catch (const DataError& e) {
                if (expected.ok || e.kind() != "NoOppositeLabelCandidate") ++st.mismatches;
                ++st.no_candidate;
            }
        };
        auto check_tm = [&](const std::vector<double>& row, std::optional<std::size_t> target) {
            ++st.tm_checks;
            const auto k = static_cast<std::size_t>(1 + rng.below(7));
            const auto expected = oracle_tm(row, target, k);
            try {
                const auto set = target ? select_tm_examples(*target, mappings, sims, k)
                                        : select_tm_examples_for(row, mappings, k);
                std::vector<std::size_t> got;
                for (const auto& e : set.examples) got.push_back(e.index);
                if (got != expected || (got.size() < k) == set.warnings.empty()) ++st.mismatches;
            } catch (const DataError& e) {
                if (!expected.empty() || e.kind() != "EmptyTrainingSet") ++st.mismatches;
            }
        };

        for (std::size_t t = 0; t < n; ++t) {
            const auto r = sims.row(t);
            const std::vector<double> row(r.begin(), r.end());
            check_crc(row, t);
            check_tm(row, t);
        }
        const auto q = cross.row(0);
        const std::vector<double> qrow(q.begin(), q.end());
        check_crc(qrow, std::nullopt);
        check_tm(qrow, std::nullopt);
    }
    return st;
}

}  // namespace spmine::testing
