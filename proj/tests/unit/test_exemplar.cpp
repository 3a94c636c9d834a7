#include <gtest/gtest.h>

#include "exemplar_oracle.hpp"
#include "spmine/error.hpp"
#include "spmine/exemplar.hpp"

using namespace spmine;

namespace {

LabeledReview item(const std::string& text, bool concern) {
    LabeledReview l;
    l.review.id = text;
    l.review.text = text;
    l.label = concern ? make_label(true, "r", {"issue"}) : make_label(false, "r", {});
    return l;
}

Matrix sims_from(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

// First uniform draw of Rng(seed) is >= 0.5 / < 0.5.
std::uint64_t seed_with_coin(bool below_half) {
    for (std::uint64_t s = 0;; ++s) {
        if ((Rng(s).uniform01() < 0.5) == below_half) return s;
    }
}

}  // namespace

TEST(CrcExemplar, ThreeItemHandBuiltMatrix) {
    // Target 0; A (index 1, Yes) is nearest, B (index 2, No) is the opposite label.
    const std::vector<LabeledReview> pool = {item("t", true), item("A", true), item("B", false)};
    const auto sims = sims_from({{1, 0.9, 0.4}, {0.9, 1, 0.2}, {0.4, 0.2, 1}});
    Rng rng(seed_with_coin(true));
    const auto pair = select_crc_examples(0, pool, sims, rng);
    EXPECT_TRUE(pair.closest_is_first);
    EXPECT_EQ(pair.first_shown.text, "A");
    EXPECT_EQ(pair.second_shown.text, "B");
    EXPECT_DOUBLE_EQ(pair.first_shown.similarity, 0.9);
}

TEST(CrcExemplar, VerbatimDuplicateIsEligible) {
    const std::vector<LabeledReview> pool = {item("t", true), item("t", false), item("x", true)};
    const auto sims = sims_from({{1, 1, 0.5}, {1, 1, 0.5}, {0.5, 0.5, 1}});
    Rng rng(seed_with_coin(true));
    const auto pair = select_crc_examples(0, pool, sims, rng);
    EXPECT_EQ(pair.first_shown.index, 1u);
    EXPECT_EQ(pair.second_shown.index, 2u);
}

TEST(CrcExemplar, CoinAboveHalfShowsOppositeFirst) {
    const std::vector<double> sims{0.9, 0.4};
    const std::vector<LabeledReview> pool = {item("A", true), item("B", false)};
    const auto picked = select_crc_indices(sims, {true, false}, std::nullopt);
    const auto pair = make_crc_pair(picked, pool, sims, 0.7);
    EXPECT_FALSE(pair.closest_is_first);
    EXPECT_EQ(pair.first_shown.text, "B");
    EXPECT_EQ(pair.second_shown.text, "A");
}

TEST(CrcExemplar, FallbackWhenOppositeTiesAtMax) {
    const std::vector<double> sims{0.5, 0.8, 0.8, 0.1};
    const auto picked = select_crc_indices(sims, {false, true, false, true}, 0);
    EXPECT_EQ(picked.closest, 1u);
    EXPECT_EQ(picked.opposite, 2u);
    EXPECT_TRUE(picked.used_fallback);
}

TEST(CrcExemplar, NoOppositeLabel) {
    const std::vector<double> sims{1, 0.5, 0.2};
    try {
        select_crc_indices(sims, {true, true, true}, 0);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.kind(), "NoOppositeLabelCandidate");
    }
}

TEST(CrcExemplar, SeedDeterminism) {
    const std::vector<LabeledReview> pool = {item("a", true), item("b", false), item("c", true), item("d", false)};
    Rng g(9);
    const auto emb = spmine::testing::random_embeddings(g, 4, 3);
    const auto sims = cosine_matrix(emb);
    for (std::size_t t = 0; t < 4; ++t) {
        Rng r1(77), r2(77);
        const auto a = select_crc_examples(t, pool, sims, r1);
        const auto b = select_crc_examples(t, pool, sims, r2);
        EXPECT_EQ(a.first_shown.index, b.first_shown.index);
        EXPECT_EQ(a.closest_is_first, b.closest_is_first);
    }
}

TEST(CrcExemplar, ScaleInvariance) {
    Rng g(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto emb = spmine::testing::random_embeddings(g, 12, 3);
        Matrix scaled = emb;
        for (std::size_t i = 0; i < 12; ++i) {
            for (std::size_t j = 0; j < 3; ++j) scaled(i, j) *= 3.5;
        }
        std::vector<LabeledReview> pool;
        for (int i = 0; i < 12; ++i) pool.push_back(item(std::to_string(i), i % 3 == 0));
        const auto s1 = cosine_matrix(emb);
        const auto s2 = cosine_matrix(scaled);
        for (std::size_t t = 0; t < 12; ++t) {
            Rng a(1), b(1);
            EXPECT_EQ(select_crc_examples(t, pool, s1, a).first_shown.index,
                      select_crc_examples(t, pool, s2, b).first_shown.index);
        }
    }
}

TEST(TmExemplar, SixIssuesGiveFiveSorted) {
    std::vector<ThemeMapping> pool;
    for (int i = 0; i < 6; ++i) pool.push_back({"i" + std::to_string(i), {"surveillance"}});
    Matrix sims(6, 6);
    const std::vector<double> row{1, 0.2, 0.7, 0.7, 0.1, 0.9};
    for (std::size_t j = 0; j < 6; ++j) sims(0, j) = row[j];
    const auto set = select_tm_examples(0, pool, sims);
    ASSERT_EQ(set.examples.size(), 5u);
    const std::vector<std::size_t> expected{5, 2, 3, 1, 4};
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(set.examples[i].index, expected[i]);
    EXPECT_TRUE(set.warnings.empty());
}

TEST(TmExemplar, ShortfallWarns) {
    std::vector<ThemeMapping> pool(3, ThemeMapping{"x", {"surveillance"}});
    Matrix sims(3, 3);
    const auto set = select_tm_examples(1, pool, sims, 5);
    EXPECT_EQ(set.examples.size(), 2u);
    EXPECT_EQ(set.warnings.size(), 1u);
    EXPECT_THROW(select_tm_examples(0, std::vector<ThemeMapping>(1, pool[0]), Matrix(1, 1)), DataError);
}

TEST(TmExemplar, WorkedQueryNearestIsPasswordSecurity) {
    const std::vector<std::string> texts = {"password security", "concerns about password security",
                                            "privacy violation", "concerns about privacy violation",
                                            "potential violation of privacy zones",
                                            "password sharing as a violation of basic it security principles"};
    const auto e = tfidf_embed(texts);
    const auto sims = cosine_matrix(e);
    const auto row = sims.row(5);
    const auto picked = select_tm_indices(row, std::size_t{5}, 5);
    EXPECT_EQ(picked.front(), 0u);
}

TEST(ExemplarOracle, RandomCorporaMatchBruteForce) {
    const auto st = spmine::testing::exemplar_equivalence(60, 12345);
    EXPECT_EQ(st.mismatches, 0u);
    EXPECT_GT(st.fallbacks, 0u);
    EXPECT_GT(st.no_candidate, 0u);
}
