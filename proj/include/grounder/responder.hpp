#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "grounder/corpus.hpp"
#include "grounder/dense_index.hpp"
#include "grounder/dual_encoder.hpp"
#include "grounder/sparse_retriever.hpp"
#include "grounder/state_tracker.hpp"
#include "grounder/text_features.hpp"

namespace grounder {

// How many ranked cells go into the prompt; k == 0 is the no-knowledge mode.
struct KnowledgeMode {
    std::size_t k = 0;

    static KnowledgeMode nok() { return {0}; }
    static KnowledgeMode top(std::size_t k) { return {k}; }
    bool is_nok() const { return k == 0; }

    // "nok", "top1", "top3", ... Throws ArgumentError otherwise.
    static KnowledgeMode parse(std::string_view name);
    std::string name() const;

    friend bool operator==(KnowledgeMode, KnowledgeMode) = default;
};

struct FewShotExample {
    std::string dialogue;  // history text ending in the question, e.g. "Q: ... A: ... Q: ..."
    std::string answer;
};

// JSON array of {"dialogue": str, "answer": str}.
std::vector<FewShotExample> load_few_shot(const std::filesystem::path& path);

inline constexpr std::size_t kDefaultKnowledgeCharBudget = 300;

struct PromptSpec {
    KnowledgeMode mode;
    std::vector<FewShotExample> few_shot;
    DialogueHistory history;
    std::vector<std::string> knowledge;  // linearized cells, best first
    std::size_t history_max_turns = 0;
    std::size_t knowledge_char_budget = kDefaultKnowledgeCharBudget;

    // NoK needs exactly 2 examples and no knowledge; top-k needs at most k lines.
    void validate() const;
};

// Template documented in docs/prompt.md. Knowledge lines are stopword-
// compressed, then cut to knowledge_char_budget bytes on a UTF-8 boundary.
std::string build_prompt(const PromptSpec& spec, const StopwordList& stopwords);

// Cuts to at most max_bytes without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view text, std::size_t max_bytes);

class GenerationProvider {
public:
    virtual ~GenerationProvider() = default;
    // Throws ProviderError. Safe to call concurrently.
    virtual std::string generate(const std::string& prompt) = 0;
    virtual std::string kind() const = 0;
};

inline constexpr std::string_view kMockFallback = "I don't have that information.";

// Deterministic offline provider: echoes the header and value of the K1 line.
class MockProvider final : public GenerationProvider {
public:
    std::string generate(const std::string& prompt) override;
    std::string kind() const override { return "mock"; }
};

// Answer the mock provider gives for a prompt (exposed for tests).
std::string mock_answer(std::string_view prompt);

struct HttpProviderConfig {
    std::string base_url;  // scheme://host[:port][/prefix]
    std::string api_key;   // sent as a bearer token when non-empty
    std::string model = "gpt-3.5-turbo-instruct";
    int max_tokens = 256;
    double temperature = 0.0;
    std::chrono::milliseconds timeout{30000};
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
    std::ptrdiff_t max_in_flight = 4;

    // base_url from GROUNDER_LLM_BASE_URL, api_key from GROUNDER_LLM_API_KEY.
    static HttpProviderConfig from_env();
    void validate() const;
};

// OpenAI-compatible completions client. Retries connection failures, 429 and
// 5xx with exponential backoff; other 4xx and malformed bodies fail at once.
class HttpProvider final : public GenerationProvider {
public:
    explicit HttpProvider(HttpProviderConfig config);
    ~HttpProvider() override;

    std::string generate(const std::string& prompt) override;
    std::string kind() const override { return "http"; }

    // Number of HTTP requests issued so far (tests count retries with it).
    std::size_t requests_sent() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Builds "mock" or "http" (http configured from the environment).
std::unique_ptr<GenerationProvider> make_provider(std::string_view kind);

enum class TableSource { gold, dense, bm25 };
TableSource parse_table_source(std::string_view name);
std::string to_string(TableSource source);

// Read-only artifacts shared by all turns. Pointers that a given call
// does not need may be null (e.g. bm25 when source is dense).
struct PipelineContext {
    const Corpus* corpus = nullptr;
    const DualEncoder* retriever = nullptr;
    const DenseIndex* index = nullptr;
    const Bm25Index* bm25 = nullptr;
    const DualEncoder* ranker = nullptr;
    const StopwordList* stopwords = nullptr;
    const std::vector<FewShotExample>* few_shot = nullptr;
    GenerationProvider* provider = nullptr;
    std::size_t history_max_turns = 0;
    std::size_t knowledge_char_budget = kDefaultKnowledgeCharBudget;
};

struct KnowledgeItem {
    CellRef cell;
    double score = 0.0;
    std::string text;  // linearize_cell output, before compression

    friend bool operator==(const KnowledgeItem&, const KnowledgeItem&) = default;
};

struct TurnResult {
    std::string response;
    std::string table_id;
    std::vector<KnowledgeItem> knowledge;  // empty in NoK mode
    std::string prompt;
    bool retrieved = false;  // table chosen by retrieval on this turn
};

// Table retrieval for an opening query (dense or BM25).
std::string retrieve_table(const PipelineContext& ctx, TableSource source, std::string_view query);

// One turn: without an active table, retrieves one first (source must not be
// gold); then ranks cells of the active table against the history, prompts
// and generates. Exactly one provider call.
TurnResult answer_turn(const PipelineContext& ctx, const DialogueHistory& history,
                       const std::optional<std::string>& active_table_id, KnowledgeMode mode,
                       TableSource source = TableSource::dense);

}  // namespace grounder
