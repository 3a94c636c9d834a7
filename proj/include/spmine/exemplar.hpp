#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spmine/corpus.hpp"
#include "spmine/embedding.hpp"
#include "spmine/rng.hpp"
#include "spmine/taxonomy.hpp"

namespace spmine {

// --- CRC: one nearest example plus the nearest one with the opposite label -----

struct CrcIndices {
    std::size_t closest = 0;
    std::size_t opposite = 0;
    // True when no opposite-label item was strictly less similar than `closest`.
    bool used_fallback = false;
};

// `sims[i]` is the similarity of the target to pool item i and `concern[i]` its
// Task-1 label. `exclude` is the target's own pool index, if it is in the pool.
// Ties go to the lowest index. Throws DataError("NoOppositeLabelCandidate").
CrcIndices select_crc_indices(std::span<const double> sims, const std::vector<bool>& concern,
                              std::optional<std::size_t> exclude);

struct CrcExample {
    std::size_t index = 0;
    std::string text;
    Label label;
    double similarity = 0.0;
};

struct CrcExemplarPair {
    CrcExample first_shown;
    CrcExample second_shown;
    bool closest_is_first = true;
};

// coin in [0, 1): coin < 0.5 shows the closest example first.
CrcExemplarPair make_crc_pair(const CrcIndices& picked, const std::vector<LabeledReview>& pool,
                              std::span<const double> sims, double coin);

// Target inside the pool (training data): row `target` of the pool's own matrix.
CrcExemplarPair select_crc_examples(std::size_t target, const std::vector<LabeledReview>& pool,
                                    const SimilarityMatrix& sims, Rng& rng);

// Target outside the pool (wild data): similarities to every pool item.
CrcExemplarPair select_crc_examples_for(std::span<const double> sims_to_pool, const std::vector<LabeledReview>& pool,
                                        Rng& rng);

// --- TM: k nearest labeled issues ------------------------------------------------

struct TmExample {
    std::size_t index = 0;
    ThemeMapping mapping;
    double similarity = 0.0;
};

struct TmExemplarSet {
    std::vector<TmExample> examples;  // descending similarity
    std::vector<std::string> warnings;
};

// Indices of the k most similar items except `exclude`, by (similarity desc, index asc).
// Throws DataError("EmptyTrainingSet") when nothing is eligible.
std::vector<std::size_t> select_tm_indices(std::span<const double> sims, std::optional<std::size_t> exclude,
                                           std::size_t k);

TmExemplarSet select_tm_examples(std::size_t target, const std::vector<ThemeMapping>& pool,
                                 const SimilarityMatrix& sims, std::size_t k = 5);

TmExemplarSet select_tm_examples_for(std::span<const double> sims_to_pool, const std::vector<ThemeMapping>& pool,
                                     std::size_t k = 5);

}  // namespace spmine
