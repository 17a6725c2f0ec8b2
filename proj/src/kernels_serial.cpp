#include <cmath>

#include "grounder/kernels.hpp"

namespace grounder::kernels::serial {

void inner_product_scores(MatrixView rows, std::span<const float> query, std::span<float> out) {
    for (std::size_t i = 0; i < rows.rows; ++i) {
        const auto row = rows.row(i);
        float acc = 0.0f;
        for (std::size_t j = 0; j < rows.cols; ++j) acc += row[j] * query[j];
        out[i] = acc;
    }
}

void l2_distances(MatrixView rows, std::span<const double> query, std::span<double> out) {
    for (std::size_t i = 0; i < rows.rows; ++i) {
        const auto row = rows.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < rows.cols; ++j) {
            const double diff = static_cast<double>(row[j]) - query[j];
            acc += diff * diff;
        }
        out[i] = std::sqrt(acc);
    }
}

void project_batch(std::span<const float> weights, std::size_t d, std::span<const SparseInput> inputs,
                   std::span<double> out) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto dst = out.subspan(i * d, d);
        for (auto& x : dst) x = 0.0;
        const auto& in = inputs[i];
        for (std::size_t k = 0; k < in.index.size(); ++k) {
            const float* column = weights.data() + static_cast<std::size_t>(in.index[k]) * d;
            const double x = in.value[k];
            for (std::size_t j = 0; j < d; ++j) dst[j] += x * static_cast<double>(column[j]);
        }
    }
}

void bm25_scores(const PostingsView& p, std::span<const std::pair<std::uint32_t, double>> query_weights,
                 std::span<double> out) {
    const std::size_t n_docs = p.doc_lens.size();
    for (std::size_t doc = 0; doc < n_docs; ++doc) {
        const double norm = p.k1 * (1.0 - p.b + p.b * p.doc_lens[doc] / p.avgdl);
        double score = 0.0;
        for (const auto& [term, weight] : query_weights) {
            for (std::size_t k = p.doc_offsets[doc]; k < p.doc_offsets[doc + 1]; ++k) {
                if (p.term_ids[k] != term) continue;
                const double tf = p.term_freqs[k];
                score += weight * tf * (p.k1 + 1.0) / (tf + norm);
                break;
            }
        }
        out[doc] = score;
    }
}

void adam_update(std::span<float> params, std::span<const float> grads, std::span<float> first_moment,
                 std::span<float> second_moment, const AdamHyper& h) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double m = h.beta1 * first_moment[i] + (1.0 - h.beta1) * g;
        const double v = h.beta2 * second_moment[i] + (1.0 - h.beta2) * g * g;
        first_moment[i] = static_cast<float>(m);
        second_moment[i] = static_cast<float>(v);
        const double m_hat = m / h.bias_correction1;
        const double v_hat = v / h.bias_correction2;
        params[i] = static_cast<float>(params[i] - h.lr * m_hat / (std::sqrt(v_hat) + h.eps));
    }
}

}  // namespace grounder::kernels::serial
