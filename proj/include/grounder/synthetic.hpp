#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "grounder/corpus.hpp"
#include "grounder/training.hpp"

namespace grounder {

// Generator for the shipped demo/benchmark corpus: topics x cities tables
// whose text uses one vocabulary while queries use disjoint synonyms.
struct SyntheticConfig {
    std::uint64_t seed = 7;
    std::size_t topics = 20;  // at most the built-in 20
    std::size_t cities = 10;
    std::size_t rows = 5;
    std::size_t train_dialogues_per_table = 3;  // must leave a row free for the test dialogue
};

struct SyntheticData {
    std::vector<TableDocument> tables;
    std::vector<RetrievalPair> retrieval_train;
    std::vector<RetrievalPair> retrieval_test;
    std::vector<DialogueRecord> dialogues_train;
    std::vector<DialogueRecord> dialogues_test;
};

// Deterministic for a given config. Throws ArgumentError on an impossible config.
SyntheticData generate_synthetic(const SyntheticConfig& config);

// Writes tables.jsonl, retrieval_{train,test}.jsonl, dialogues_{train,test}.jsonl.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

void save_retrieval_pairs(std::span<const RetrievalPair> pairs, const std::filesystem::path& path);

}  // namespace grounder
