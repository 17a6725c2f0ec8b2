#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "grounder/corpus.hpp"
#include "grounder/kernels.hpp"
#include "grounder/ranked_list.hpp"

namespace grounder {

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
};

// Okapi BM25 over linearized tables, with idf = ln(1 + (N - df + 0.5) / (df + 0.5)).
// Immutable after construction; concurrent scoring is safe.
class Bm25Index {
public:
    // Throws ArgumentError on an empty corpus.
    static Bm25Index build(const Corpus& corpus, Bm25Params params = {});
    static Bm25Index build(std::vector<std::string> doc_ids, std::span<const std::string> texts,
                           Bm25Params params = {});

    static Bm25Index load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t size() const { return doc_ids_.size(); }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<std::uint32_t>& doc_lens() const { return doc_lens_; }
    double avgdl() const { return avgdl_; }
    const Bm25Params& params() const { return params_; }

    // Document frequency of a (lowercase) token; 0 if unseen.
    std::uint32_t df(std::string_view token) const;
    // Term frequency of a token in one document.
    std::uint32_t tf(std::size_t doc_pos, std::string_view token) const;
    double idf(std::string_view token) const;

    // Throws ArgumentError if doc_pos >= size().
    double score(std::string_view query, std::size_t doc_pos) const;

    // Scores for every document, computed by the OpenMP kernel.
    std::vector<double> score_all(std::string_view query) const;
    // Same, using the serial reference kernel.
    std::vector<double> score_all_serial(std::string_view query) const;

    // Top-k by score; ties broken by ascending corpus position. k >= 1.
    RankedList<std::string> search(std::string_view query, std::size_t k) const;

private:
    Bm25Index() = default;

    std::vector<std::pair<std::uint32_t, double>> query_weights(std::string_view query) const;
    kernels::PostingsView postings() const;

    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::uint32_t> vocab_;
    std::vector<std::string> terms_;  // by term id
    std::vector<std::uint32_t> df_;  // by term id
    std::vector<std::size_t> doc_offsets_;
    std::vector<std::uint32_t> term_ids_;
    std::vector<std::uint32_t> term_freqs_;
    std::vector<std::uint32_t> doc_lens_;
    double avgdl_ = 0.0;
};

}  // namespace grounder
