#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "grounder/corpus.hpp"
#include "grounder/dual_encoder.hpp"
#include "grounder/ranked_list.hpp"

namespace grounder {

// Exact inner-product index over unit-norm rows, tagged with the
// fingerprint of the model that produced it.
class DenseIndex {
public:
    DenseIndex(std::vector<std::string> item_ids, std::size_t dims, std::vector<float> matrix,
               std::string fingerprint);

    // Row i = knowledge encoding of linearize_table(corpus[i]). Items present
    // in `sidecar` use the supplied embedding instead. Throws ArgumentError on
    // an empty corpus.
    static DenseIndex build(const DualEncoder& model, const Corpus& corpus,
                            const std::unordered_map<std::string, EmbeddingVector>* sidecar = nullptr);

    // Throws DataError on corruption and, unless force is set, when the stored
    // fingerprint differs from `expected_fingerprint` (skipped if it is empty).
    static DenseIndex load(const std::filesystem::path& path, const std::string& expected_fingerprint = {},
                           bool force = false);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return item_ids_.size(); }
    std::size_t dims() const { return dims_; }
    const std::vector<std::string>& item_ids() const { return item_ids_; }
    const std::string& fingerprint() const { return fingerprint_; }
    std::span<const float> row(std::size_t i) const {
        return std::span<const float>(matrix_).subspan(i * dims_, dims_);
    }

    // Dot-product scores for every row (OpenMP kernel).
    std::vector<float> scores(const EmbeddingVector& query) const;

    // Top-k by dot product; ties by row order. Throws ArgumentError on k == 0
    // or a dimension mismatch.
    RankedList<std::string> search(const EmbeddingVector& query, std::size_t k) const;

private:
    std::vector<std::string> item_ids_;
    std::size_t dims_ = 0;
    std::vector<float> matrix_;
    std::string fingerprint_;
};

}  // namespace grounder
