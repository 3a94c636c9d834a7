#include "spmine/exemplar.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <numeric>

#include "spmine/error.hpp"

namespace spmine {

CrcIndices select_crc_indices(std::span<const double> sims, const std::vector<bool>& concern,
                              std::optional<std::size_t> exclude) {
    if (sims.size() != concern.size()) {
        throw DataError("LengthMismatch", "similarity row and label list differ in length");
    }
    const auto n = sims.size();
    std::optional<std::size_t> closest;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == exclude) continue;
        if (!closest || sims[i] > sims[*closest]) closest = i;
    }
    if (!closest) throw DataError("NoOppositeLabelCandidate", "no candidate examples besides the target");

    const bool label = concern[*closest];
    const double max_sim = sims[*closest];
    std::optional<std::size_t> strict;
    std::optional<std::size_t> any;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == exclude || i == *closest || concern[i] == label) continue;
        if (!any || sims[i] > sims[*any]) any = i;
        if (sims[i] < max_sim && (!strict || sims[i] > sims[*strict])) strict = i;
    }
    if (!any) {
        throw DataError("NoOppositeLabelCandidate",
                        fmt::format("no example labeled {} besides the target", label ? "No" : "Yes"));
    }
    return strict ? CrcIndices{*closest, *strict, false} : CrcIndices{*closest, *any, true};
}

CrcExemplarPair make_crc_pair(const CrcIndices& picked, const std::vector<LabeledReview>& pool,
                              std::span<const double> sims, double coin) {
    auto example = [&](std::size_t i) {
        return CrcExample{i, pool[i].review.text, pool[i].label, sims[i]};
    };
    CrcExemplarPair pair;
    pair.closest_is_first = coin < 0.5;
    pair.first_shown = example(pair.closest_is_first ? picked.closest : picked.opposite);
    pair.second_shown = example(pair.closest_is_first ? picked.opposite : picked.closest);
    return pair;
}

namespace {

std::vector<bool> concern_flags(const std::vector<LabeledReview>& pool) {
    std::vector<bool> flags(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) flags[i] = pool[i].label.concern;
    return flags;
}

}  // namespace

CrcExemplarPair select_crc_examples(std::size_t target, const std::vector<LabeledReview>& pool,
                                    const SimilarityMatrix& sims, Rng& rng) {
    if (sims.rows() != pool.size() || sims.cols() != pool.size() || target >= pool.size()) {
        throw DataError("ShapeMismatch", "similarity matrix does not match the example pool");
    }
    const auto row = sims.row(target);
    const auto picked = select_crc_indices(row, concern_flags(pool), target);
    return make_crc_pair(picked, pool, row, rng.uniform01());
}

CrcExemplarPair select_crc_examples_for(std::span<const double> sims_to_pool, const std::vector<LabeledReview>& pool,
                                        Rng& rng) {
    const auto picked = select_crc_indices(sims_to_pool, concern_flags(pool), std::nullopt);
    return make_crc_pair(picked, pool, sims_to_pool, rng.uniform01());
}

std::vector<std::size_t> select_tm_indices(std::span<const double> sims, std::optional<std::size_t> exclude,
                                           std::size_t k) {
    std::vector<std::size_t> order;
    order.reserve(sims.size());
    for (std::size_t i = 0; i < sims.size(); ++i) {
        if (i != exclude) order.push_back(i);
    }
    if (order.empty()) throw DataError("EmptyTrainingSet", "no labeled issues to draw examples from");
    const auto take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) { return sims[a] != sims[b] ? sims[a] > sims[b] : a < b; });
    order.resize(take);
    return order;
}

namespace {

TmExemplarSet build_tm_set(const std::vector<std::size_t>& picked, const std::vector<ThemeMapping>& pool,
                           std::span<const double> sims, std::size_t k) {
    TmExemplarSet out;
    for (auto i : picked) out.examples.push_back(TmExample{i, pool[i], sims[i]});
    if (picked.size() < k) {
        out.warnings.push_back(fmt::format("only {} of {} requested examples available", picked.size(), k));
    }
    return out;
}

}  // namespace

TmExemplarSet select_tm_examples(std::size_t target, const std::vector<ThemeMapping>& pool,
                                 const SimilarityMatrix& sims, std::size_t k) {
    if (sims.rows() != pool.size() || sims.cols() != pool.size() || target >= pool.size()) {
        throw DataError("ShapeMismatch", "similarity matrix does not match the mapping pool");
    }
    const auto row = sims.row(target);
    return build_tm_set(select_tm_indices(row, target, k), pool, row, k);
}

TmExemplarSet select_tm_examples_for(std::span<const double> sims_to_pool, const std::vector<ThemeMapping>& pool,
                                     std::size_t k) {
    if (sims_to_pool.size() != pool.size()) throw DataError("ShapeMismatch", "similarity row does not match the pool");
    return build_tm_set(select_tm_indices(sims_to_pool, std::nullopt, k), pool, sims_to_pool, k);
}

}  // namespace spmine
