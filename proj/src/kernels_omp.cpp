#include <algorithm>
#include <cmath>

#include "grounder/kernels.hpp"

namespace grounder::kernels::omp {

namespace {

// Sum of the saturated-tf terms for one document. Both sides are sorted by
// term id so a single merge pass suffices; addition order follows the query
// order to stay bit-identical with the serial reference.
double bm25_doc(const PostingsView& p, std::size_t doc,
                std::span<const std::pair<std::uint32_t, double>> query_weights) {
    const double norm = p.k1 * (1.0 - p.b + p.b * p.doc_lens[doc] / p.avgdl);
    const auto first = p.term_ids.begin() + static_cast<std::ptrdiff_t>(p.doc_offsets[doc]);
    const auto last = p.term_ids.begin() + static_cast<std::ptrdiff_t>(p.doc_offsets[doc + 1]);
    double score = 0.0;
    for (const auto& [term, weight] : query_weights) {
        const auto it = std::lower_bound(first, last, term);
        if (it == last || *it != term) continue;
        const double tf = p.term_freqs[static_cast<std::size_t>(it - p.term_ids.begin())];
        score += weight * tf * (p.k1 + 1.0) / (tf + norm);
    }
    return score;
}

}  // namespace

void inner_product_scores(MatrixView rows, std::span<const float> query, std::span<float> out) {
    const auto n = static_cast<std::ptrdiff_t>(rows.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const float* row = rows.data.data() + static_cast<std::size_t>(i) * rows.cols;
        float acc = 0.0f;
        for (std::size_t j = 0; j < rows.cols; ++j) acc += row[j] * query[j];
        out[static_cast<std::size_t>(i)] = acc;
    }
}

void l2_distances(MatrixView rows, std::span<const double> query, std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(rows.rows);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const float* row = rows.data.data() + static_cast<std::size_t>(i) * rows.cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < rows.cols; ++j) {
            const double diff = static_cast<double>(row[j]) - query[j];
            acc += diff * diff;
        }
        out[static_cast<std::size_t>(i)] = std::sqrt(acc);
    }
}

void project_batch(std::span<const float> weights, std::size_t d, std::span<const SparseInput> inputs,
                   std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double* dst = out.data() + static_cast<std::size_t>(i) * d;
        std::fill(dst, dst + d, 0.0);
        const auto& in = inputs[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < in.index.size(); ++k) {
            const float* column = weights.data() + static_cast<std::size_t>(in.index[k]) * d;
            const double x = in.value[k];
            for (std::size_t j = 0; j < d; ++j) dst[j] += x * static_cast<double>(column[j]);
        }
    }
}

void bm25_scores(const PostingsView& p, std::span<const std::pair<std::uint32_t, double>> query_weights,
                 std::span<double> out) {
    const auto n = static_cast<std::ptrdiff_t>(p.doc_lens.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t doc = 0; doc < n; ++doc) {
        out[static_cast<std::size_t>(doc)] = bm25_doc(p, static_cast<std::size_t>(doc), query_weights);
    }
}

void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> first_moment,
                 std::span<float> second_moment, const AdamHyper& h) {
    const auto n = static_cast<std::ptrdiff_t>(params.size());
    float* p = params.data();
    const float* g_in = grads.data();
    float* m_io = first_moment.data();
    float* v_io = second_moment.data();
const double b1 = h.beta1;
    const double b2 = h.beta2;
    const double step = h.lr / h.bias_correction1;
    const double inv_bc2 = 1.0 / h.bias_correction2;
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double g = g_in[i];
        const double m = b1 * m_io[i] + (1.0 - b1) * g;
        const double v = b2 * v_io[i] + (1.0 - b2) * g * g;
        m_io[i] = static_cast<float>(m);
        v_io[i] = static_cast<float>(v);
        p[i] = static_cast<float>(p[i] - step * m / (std::sqrt(v * inv_bc2) + h.eps));
    }
}

}  // namespace grounder::kernels::omp
