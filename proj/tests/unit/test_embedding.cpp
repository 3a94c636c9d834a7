#include <gtest/gtest.h>

#include <cctype>
#include <cmath>
#include <map>

#include "spmine/embedding.hpp"
#include "spmine/error.hpp"
#include "spmine/rng.hpp"

using namespace spmine;

namespace {

// ASCII-only reference: tokens are maximal alphanumeric runs.
std::vector<std::string> ascii_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct CountingProvider final : EmbeddingProvider {
    int calls = 0;
    bool ragged = false;
    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) override {
        ++calls;
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) {
            std::vector<double> v{static_cast<double>(t.size()), 1.0};
            if (ragged && out.size() == 1) v.push_back(0.5);
            out.push_back(v);
        }
        return out;
    }
    std::string provider_id() const override { return "test"; }
    std::string model_id() const override { return "len"; }
};

}  // namespace

TEST(Tfidf, IdenticalAndDisjointDocuments) {
    const auto same = cosine_matrix(tfidf_embed({"a b", "a b"}));
    EXPECT_DOUBLE_EQ(same(0, 1), 1.0);
    const auto disjoint = cosine_matrix(tfidf_embed({"cat", "dog"}));
    EXPECT_DOUBLE_EQ(disjoint(0, 1), 0.0);
    EXPECT_THROW(tfidf_embed({}), DataError);
}

TEST(Tfidf, MatchesHandComputation) {
    const std::vector<std::string> docs = {"The camera records audio", "camera app, camera cloud!",
                                           "Audio leaks to the cloud", "nothing shared"};
    const auto e = tfidf_embed(docs);

    std::vector<std::string> vocab;
    std::map<std::string, std::size_t> col;
    std::vector<std::map<std::string, double>> tf(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (const auto& t : ascii_tokens(docs[d])) {
            if (!col.count(t)) {
                col[t] = vocab.size();
                vocab.push_back(t);
            }
            tf[d][t] += 1;
        }
    }
    ASSERT_EQ(e.vocabulary, vocab);
    const double n = static_cast<double>(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::vector<double> w(vocab.size(), 0.0);
        for (const auto& [t, c] : tf[d]) {
            double df = 0;
            for (const auto& other : tf) df += other.count(t) ? 1 : 0;
            w[col[t]] = c * (std::log((1 + n) / (1 + df)) + 1);
        }
        double norm = 0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        for (std::size_t j = 0; j < vocab.size(); ++j) EXPECT_NEAR(e.vectors(d, j), w[j] / norm, 1e-12);
    }
}

TEST(Tfidf, DeterministicAndZeroRows) {
    const auto a = tfidf_embed({"x y", "!!!", "y z"});
    const auto b = tfidf_embed({"x y", "!!!", "y z"});
    EXPECT_EQ(a.vectors, b.vectors);
    const auto s = cosine_matrix(a);
    EXPECT_EQ(s(1, 1), 0.0);
    EXPECT_EQ(s(0, 1), 0.0);
}

TEST(Cosine, IdentityAndScale) {
    Matrix m(2, 2);
    m(0, 0) = 1;
    m(1, 1) = 1;
    const auto s = cosine_matrix(m);
    EXPECT_EQ(s(0, 1), 0.0);
    EXPECT_EQ(s(0, 0), 1.0);
    const std::vector<double> v{1, 2, 3}, v2{2, 4, 6};
    EXPECT_NEAR(cosine(v, v2), 1.0, 1e-15);
}

TEST(Cosine, RandomMatchesNaiveOracleAndScaleInvariant) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix m(5, 3), scaled(5, 3);
        const double k = 0.1 + 10 * rng.uniform01();
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                m(i, j) = rng.uniform01() * 2 - 1;
                scaled(i, j) = k * m(i, j);
            }
        }
        const auto s = cosine_matrix(m);
        const auto s2 = cosine_matrix(scaled);
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                double dot = 0, ni = 0, nj = 0;
                for (std::size_t c = 0; c < 3; ++c) {
                    dot += m(i, c) * m(j, c);
                    ni += m(i, c) * m(i, c);
                    nj += m(j, c) * m(j, c);
                }
                EXPECT_NEAR(s(i, j), dot / std::sqrt(ni * nj), 1e-12);
                EXPECT_NEAR(s2(i, j), s(i, j), 1e-12);
                EXPECT_EQ(s(i, j), s(j, i));
                EXPECT_LE(std::abs(s(i, j)), 1.0);
            }
        }
        const auto cross = cosine_cross(m, m);
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(cross(i, j), s(i, j), 1e-12);
        }
    }
}

TEST(Dense, CachesByContent) {
    CountingProvider p;
    DenseEmbedder embedder(p, 2);
    const auto a = embedder.embed({"aa", "b", "aa"});
    EXPECT_EQ(a.n_items(), 3u);
    EXPECT_EQ(a.dim(), 2u);
    EXPECT_EQ(a.source.kind, EmbeddingSource::Kind::dense);
    EXPECT_EQ(a.source.model, "len");
    EXPECT_EQ(a.vectors(0, 0), 2.0);
    const auto calls = embedder.provider_calls();
    EXPECT_GE(calls, 1u);
    embedder.embed({"b", "aa"});
    EXPECT_EQ(embedder.provider_calls(), calls);
    EXPECT_EQ(embedder.cache_size(), 2u);
}

TEST(Dense, RaggedVectorsRejected) {
    CountingProvider p;
    p.ragged = true;
    DenseEmbedder embedder(p);
    try {
        embedder.embed({"x", "yy"});
        FAIL();
    } catch (const DataError& e) {
        EXPECT_EQ(e.kind(), "DimensionMismatch");
    }
}
