#pragma once

// Data-parallel inner loops. Each kernel exists twice with identical
// signatures: `serial` is the reference the tests compare against and
// `omp` is the OpenMP version used in production paths. Parallelism is
// only ever over independent output elements, never over a reduction, so
// outputs are bit-identical. The one exception is adam_update, whose OMP
// form hoists the bias corrections and agrees to float rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace grounder::kernels {

// Row-major n x d matrix of float rows.
struct MatrixView {
    std::span<const float> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::span<const float> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

// One sparse input: feature ids with pre-scaled values.
struct SparseInput {
    std::span<const std::uint32_t> index;
    std::span<const double> value;
};

// Compressed per-document term statistics for BM25.
struct PostingsView {
    std::span<const std::size_t> doc_offsets;  // size n_docs + 1
    std::span<const std::uint32_t> term_ids;   // sorted within each document
    std::span<const std::uint32_t> term_freqs;
    std::span<const std::uint32_t> doc_lens;
    double avgdl = 0.0;
    double k1 = 1.5;
    double b = 0.75;
};

struct AdamHyper {
    double lr = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double bias_correction1 = 1.0;  // 1 - beta1^t
    double bias_correction2 = 1.0;  // 1 - beta2^t
};

// inner_product_scores: out[i] = <rows[i], query>, float accumulation in index order.
// l2_distances: out[i] = ||rows[i] - query||_2, double accumulation.
// project_batch: out[i*d, i*d+d) = sum_f x_i[f] * W[f], W feature-major (feature f owns d floats).
// bm25_scores: out[doc] = sum over query terms of weight * saturated tf.
// adam_update: bias-corrected Adam over float parameters and float moments.

namespace serial {
void inner_product_scores(MatrixView rows, std::span<const float> query, std::span<float> out);
void l2_distances(MatrixView rows, std::span<const double> query, std::span<double> out);
void project_batch(std::span<const float> weights, std::size_t d, std::span<const SparseInput> inputs,
                   std::span<double> out);
void bm25_scores(const PostingsView& postings,
                 std::span<const std::pair<std::uint32_t, double>> query_weights,
                 std::span<double> out);
void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> first_moment,
                 std::span<float> second_moment, const AdamHyper& hyper);
}  // namespace serial

namespace omp {
void inner_product_scores(MatrixView rows, std::span<const float> query, std::span<float> out);
void l2_distances(MatrixView rows, std::span<const double> query, std::span<double> out);
void project_batch(std::span<const float> weights, std::size_t d, std::span<const SparseInput> inputs,
                   std::span<double> out);
void bm25_scores(const PostingsView& postings,
                 std::span<const std::pair<std::uint32_t, double>> query_weights,
                 std::span<double> out);
void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> first_moment,
                 std::span<float> second_moment, const AdamHyper& hyper);
}  // namespace omp

}  // namespace grounder::kernels
