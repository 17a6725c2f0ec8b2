#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "grounder/corpus.hpp"
#include "grounder/dual_encoder.hpp"
#include "grounder/optimizer.hpp"

namespace grounder {

// Training hyperparameters; JSON keys match the field names, plus "d" and "V".
struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double lr_peak = 1e-6;
    std::size_t warmup_steps = 5;
    double margin = 1.0;
    std::uint64_t seed = 0;
    std::size_t dims = kDefaultEmbeddingDims;
    std::size_t hash_dims = kDefaultHashDims;
    int ngram_max = kDefaultNgramMax;
    std::size_t history_max_turns = 0;  // ranker anchors; 0 = full history

    FeatureConfig features() const { return {hash_dims, ngram_max}; }
    void validate() const;

    // Missing keys keep their defaults; unknown keys are rejected (ArgumentError).
    static TrainConfig from_json(const nlohmann::json& j);
    static TrainConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

// Freshly initialized encoder pair for a config (seeded).
DualEncoder initial_model(const TrainConfig& config);

struct RetrievalPair {
    std::string query;
    std::string table_id;
};

// JSONL {"query": str, "gold_id": str}; also used for evaluation cases.
std::vector<RetrievalPair> load_retrieval_pairs(const std::filesystem::path& path);
// First-turn queries of each dialogue paired with its gold table.
std::vector<RetrievalPair> first_turn_pairs(std::span<const DialogueRecord> dialogues);

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

struct TrainResult {
    DualEncoder model;
    std::vector<double> epoch_losses;
    std::size_t examples = 0;       // pairs or triplets per epoch
    std::size_t skipped_turns = 0;  // ranker turns without an available negative
    std::size_t steps = 0;
};

// In-batch contrastive training of the query/table encoders. Pairs are
// shuffled with the seeded generator every epoch and cut into batches of
// batch_size (a leftover single pair joins the previous batch).
// Throws DataError for an unknown table id, ArgumentError for fewer than 2 pairs.
TrainResult train_retriever(const DualEncoder& initial, std::span<const RetrievalPair> pairs,
                            const Corpus& corpus, const TrainConfig& config, const EpochCallback& on_epoch = {});

// Triplet-margin training of the history/cell encoders. One triplet per gold
// cell per turn; its negative is resampled each epoch, uniformly among the
// table's non-gold cells. Mean loss over batch_size triplets per Adam step.
TrainResult train_ranker(const DualEncoder& initial, std::span<const DialogueRecord> dialogues,
                         const Corpus& corpus, const TrainConfig& config, const EpochCallback& on_epoch = {});

// Mean in-batch contrastive loss composed through both linear encoders.
// Adds dL/dW into the gradient buffers (caller zeroes them).
template <class Real>
double retrieval_objective(std::span<const Real> query_weights, std::span<const Real> knowledge_weights,
                           std::size_t dims, std::span<const Featurized> queries,
                           std::span<const Featurized> knowledge, std::span<Real> grad_query,
                           std::span<Real> grad_knowledge);

// Mean triplet loss composed through both linear encoders; anchors go
// through the query encoder, cells through the knowledge encoder.
template <class Real>
double ranking_objective(std::span<const Real> query_weights, std::span<const Real> knowledge_weights,
                         std::size_t dims, std::span<const Featurized> anchors,
                         std::span<const Featurized> positives, std::span<const Featurized> negatives,
                         double margin, std::span<Real> grad_query, std::span<Real> grad_knowledge);

}  // namespace grounder
