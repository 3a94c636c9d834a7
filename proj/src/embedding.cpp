#include "spmine/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "spmine/error.hpp"
#include "spmine/hash.hpp"
#include "spmine/text.hpp"

namespace spmine {

EmbeddingMatrix tfidf_embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw DataError("EmptyCorpus", "tfidf_embed needs at least one text");

    std::unordered_map<std::string, std::size_t> column;
    std::vector<std::string> vocabulary;
    std::vector<std::vector<std::pair<std::size_t, double>>> counts(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        std::unordered_map<std::size_t, double> row;
        std::vector<std::size_t> order;
        for (const auto& tok : text::word_tokens(texts[i])) {
            auto [it, inserted] = column.try_emplace(tok, vocabulary.size());
            if (inserted) vocabulary.push_back(tok);
            if (row[it->second]++ == 0.0) order.push_back(it->second);
        }
        for (auto c : order) counts[i].emplace_back(c, row[c]);
    }

    std::vector<double> df(vocabulary.size(), 0.0);
    for (const auto& row : counts) {
        for (const auto& [c, _] : row) df[c] += 1.0;
    }
    const auto n = static_cast<double>(texts.size());
    std::vector<double> idf(vocabulary.size());
    for (std::size_t c = 0; c < idf.size(); ++c) idf[c] = std::log((1.0 + n) / (1.0 + df[c])) + 1.0;

    EmbeddingMatrix out;
    out.vectors = Matrix(texts.size(), vocabulary.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        double norm2 = 0.0;
        for (const auto& [c, tf] : counts[i]) {
            const double w = tf * idf[c];
            out.vectors(i, c) = w;
            norm2 += w * w;
        }
        if (norm2 > 0.0) {
            const double inv = 1.0 / std::sqrt(norm2);
            for (const auto& [c, _] : counts[i]) out.vectors(i, c) *= inv;
        }
    }
    out.source = EmbeddingSource{EmbeddingSource::Kind::tfidf, "local", "tfidf"};
    out.vocabulary = std::move(vocabulary);
    return out;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

std::vector<double> row_norms(const Matrix& m) {
    std::vector<double> norms(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) norms[i] = std::sqrt(dot(m.row(i), m.row(i)));
    return norms;
}

double bounded_cosine(double d, double na, double nb) {
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(d / (na * nb), -1.0, 1.0);
}

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DataError("DimensionMismatch", "cosine of vectors with different lengths");
    return bounded_cosine(dot(a, b), std::sqrt(dot(a, a)), std::sqrt(dot(b, b)));
}

SimilarityMatrix cosine_matrix(const Matrix& vectors) {
    const auto n = vectors.rows();
    const auto norms = row_norms(vectors);
    SimilarityMatrix sims(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        sims(i, i) = norms[i] > 0.0 ? 1.0 : 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = bounded_cosine(dot(vectors.row(i), vectors.row(j)), norms[i], norms[j]);
            sims(i, j) = s;
            sims(j, i) = s;
        }
    }
    return sims;
}

Matrix cosine_cross(const Matrix& queries, const Matrix& candidates) {
    if (queries.cols() != candidates.cols()) {
        throw DataError("DimensionMismatch", fmt::format("query dim {} != candidate dim {}", queries.cols(), candidates.cols()));
    }
    const auto qn = row_norms(queries);
    const auto cn = row_norms(candidates);
    Matrix out(queries.rows(), candidates.rows());
    for (std::size_t i = 0; i < queries.rows(); ++i) {
        for (std::size_t j = 0; j < candidates.rows(); ++j) {
            out(i, j) = bounded_cosine(dot(queries.row(i), candidates.row(j)), qn[i], cn[j]);
        }
    }
    return out;
}

EmbeddingMatrix DenseEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::string> keys(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) keys[i] = sha256_hex(texts[i]);

    std::vector<std::size_t> missing;
    {
        std::lock_guard lock(mutex_);
        std::unordered_map<std::string, bool> queued;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (!cache_.contains(keys[i]) && !queued[keys[i]]) {
                queued[keys[i]] = true;
                missing.push_back(i);
            }
        }
    }

    for (std::size_t start = 0; start < missing.size(); start += batch_size_) {
        const auto end = std::min(missing.size(), start + batch_size_);
        std::vector<std::string> batch;
        for (auto k = start; k < end; ++k) batch.push_back(texts[missing[k]]);
        ++calls_;
        auto vectors = provider_.embed_batch(batch);
        if (vectors.size() != batch.size()) {
            throw DataError("DimensionMismatch",
                            fmt::format("provider returned {} vectors for {} texts", vectors.size(), batch.size()));
        }
        for (const auto& v : vectors) {
            if (v.size() != vectors.front().size()) {
                throw DataError("DimensionMismatch", fmt::format("provider returned ragged vectors ({} vs {})",
                                                                 v.size(), vectors.front().size()));
            }
        }
        std::lock_guard lock(mutex_);
        for (auto k = start; k < end; ++k) cache_[keys[missing[k]]] = std::move(vectors[k - start]);
    }

    EmbeddingMatrix out;
    out.source = EmbeddingSource{EmbeddingSource::Kind::dense, provider_.provider_id(), provider_.model_id()};
    std::lock_guard lock(mutex_);
    const std::size_t dim = texts.empty() ? 0 : cache_.at(keys[0]).size();
    out.vectors = Matrix(texts.size(), dim);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto& v = cache_.at(keys[i]);
        if (v.size() != dim) {
            throw DataError("DimensionMismatch", fmt::format("vector {} has dim {}, expected {}", i, v.size(), dim));
        }
        for (std::size_t c = 0; c < dim; ++c) {
            if (!std::isfinite(v[c])) throw DataError("NonFiniteValue", "provider returned a non-finite value");
            out.vectors(i, c) = v[c];
        }
    }
    return out;
}

std::size_t DenseEmbedder::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

}  // namespace spmine
