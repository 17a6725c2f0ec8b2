#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grounder/corpus.hpp"
#include "grounder/dense_index.hpp"
#include "grounder/dual_encoder.hpp"
#include "grounder/responder.hpp"
#include "grounder/sparse_retriever.hpp"
#include "grounder/text_features.hpp"
#include "grounder/training.hpp"

namespace grounder {

struct ResponderSettings {
    KnowledgeMode mode = KnowledgeMode::top(3);
    std::string provider = "mock";
    TableSource table_source = TableSource::dense;
    std::size_t history_max_turns = 0;
    std::size_t knowledge_char_budget = kDefaultKnowledgeCharBudget;
    std::string llm_model = "gpt-3.5-turbo-instruct";
    int max_tokens = 256;
    double temperature = 0.0;
    int timeout_ms = 30000;
    int max_in_flight = 4;

    // HTTP settings merged with GROUNDER_LLM_BASE_URL / GROUNDER_LLM_API_KEY.
    HttpProviderConfig http_config() const;
};

struct ServiceSettings {
    std::string bind = "127.0.0.1:8080";  // GROUNDER_BIND_ADDR overrides
    std::filesystem::path data_dir = "var";  // GROUNDER_DATA_DIR overrides
    std::filesystem::path ui_dir = "ui/dist";
};

// grounder.json; relative paths resolve against the file's directory.
// Unknown keys are rejected. Layout documented in docs/config.md.
struct AppConfig {
    std::uint64_t seed = 0;
    std::filesystem::path tables = "data/synthetic/tables.jsonl";
    std::filesystem::path retrieval_train = "data/synthetic/retrieval_train.jsonl";
    std::filesystem::path retrieval_test = "data/synthetic/retrieval_test.jsonl";
    std::filesystem::path dialogues_train = "data/synthetic/dialogues_train.jsonl";
    std::filesystem::path dialogues_test = "data/synthetic/dialogues_test.jsonl";
    std::filesystem::path stopwords = "data/stopwords.txt";
    std::filesystem::path few_shot = "data/fewshot.json";
    std::filesystem::path artifacts = "artifacts";
    TrainConfig retriever;
    TrainConfig ranker;
    Bm25Params bm25;
    ResponderSettings responder;
    ServiceSettings service;

    static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    // Throws DataError when the file is missing or malformed.
    static AppConfig load(const std::filesystem::path& path);
    // Defaults with paths resolved against base_dir.
    static AppConfig defaults(const std::filesystem::path& base_dir);

    // Replaces the global seed and both training seeds.
    void override_seed(std::uint64_t value);
    // Applies GROUNDER_DATA_DIR and GROUNDER_BIND_ADDR.
    void apply_env();

    std::filesystem::path corpus_path() const { return artifacts / "corpus.jsonl"; }
    std::filesystem::path bm25_path() const { return artifacts / "bm25.gbm2"; }
    std::filesystem::path retriever_path() const { return artifacts / "retriever.gdem"; }
    std::filesystem::path ranker_path() const { return artifacts / "ranker.gdem"; }
    std::filesystem::path index_path() const { return artifacts / "index.gdix"; }
};

// Loaded artifacts. Every member beyond the corpus is optional so a
// command only pays for what it needs; context() wires what is present.
struct Engine {
    Corpus corpus;
    std::optional<DualEncoder> retriever;
    std::optional<DenseIndex> index;
    std::optional<Bm25Index> bm25;
    std::optional<DualEncoder> ranker;
    std::optional<StopwordList> stopwords;
    std::vector<FewShotExample> few_shot;
    std::size_t history_max_turns = 0;
    std::size_t knowledge_char_budget = kDefaultKnowledgeCharBudget;

    struct Parts {
        bool dense = false;  // retriever model + index
        bool bm25 = false;
        bool ranker = false;
        bool responder = false;  // stopwords + few-shot
        bool force = false;      // accept an index built by a different retriever
    };

    // Missing artifacts raise DataError naming the command that creates them.
    static Engine load(const AppConfig& config, Parts parts);

    PipelineContext context(GenerationProvider* provider) const;
};

}  // namespace grounder
