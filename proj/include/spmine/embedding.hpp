#pragma once

#include <atomic>
#include <cstddef>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace spmine {

struct EmbeddingSource {
    enum class Kind { tfidf, dense };
    Kind kind = Kind::tfidf;
    std::string provider;
    std::string model;

    friend bool operator==(const EmbeddingSource&, const EmbeddingSource&) = default;
};

// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct EmbeddingMatrix {
    Matrix vectors;
    EmbeddingSource source;
    // Vocabulary for TF-IDF matrices, in column order.
    std::vector<std::string> vocabulary;

    std::size_t n_items() const noexcept { return vectors.rows(); }
    std::size_t dim() const noexcept { return vectors.cols(); }
};

// Square cosine-similarity matrix.
using SimilarityMatrix = Matrix;

// Lowercase word tokens; raw term counts; idf = ln((1 + N) / (1 + df)) + 1; rows
// L2-normalized (all-zero rows stay zero). Columns follow first appearance.
// Throws DataError("EmptyCorpus").
EmbeddingMatrix tfidf_embed(const std::vector<std::string>& texts);

// sim(i, j) = <vi, vj> / (|vi| |vj|), or 0 when either row is zero. Clamped to [-1, 1]
// and exactly symmetric; the diagonal is 1 for nonzero rows.
SimilarityMatrix cosine_matrix(const Matrix& vectors);
inline SimilarityMatrix cosine_matrix(const EmbeddingMatrix& e) { return cosine_matrix(e.vectors); }

// Cosine similarity of every row of `queries` to every row of `candidates`
// (queries.rows() x candidates.rows()). Column counts must agree.
Matrix cosine_cross(const Matrix& queries, const Matrix& candidates);

double cosine(std::span<const double> a, std::span<const double> b);

// Source of sentence-level vectors, e.g. a remote embeddings endpoint.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) = 0;
    virtual std::string provider_id() const = 0;
    virtual std::string model_id() const = 0;
};

// Caches provider vectors by content hash; safe to share between threads.
class DenseEmbedder {
public:
    explicit DenseEmbedder(EmbeddingProvider& provider, std::size_t batch_size = 64)
        : provider_(provider), batch_size_(batch_size) {}

    // Throws DataError("DimensionMismatch") on ragged vectors; ProviderError passes through.
    EmbeddingMatrix embed(const std::vector<std::string>& texts);

    // Number of embed_batch calls made to the provider.
    std::size_t provider_calls() const noexcept { return calls_.load(); }
    std::size_t cache_size() const;

private:
    EmbeddingProvider& provider_;
    std::size_t batch_size_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::vector<double>> cache_;
    std::atomic<std::size_t> calls_{0};
};

inline EmbeddingMatrix dense_embed(const std::vector<std::string>& texts, DenseEmbedder& embedder) {
    return embedder.embed(texts);
}

}  // namespace spmine
