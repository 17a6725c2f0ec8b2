#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "grounder/corpus.hpp"
#include "grounder/ranked_list.hpp"
#include "grounder/responder.hpp"
#include "grounder/training.hpp"

namespace grounder {

// 1-based rank of the gold item, nullopt if absent.
using Rank = std::optional<std::size_t>;

template <class Id>
Rank rank_of(const RankedList<Id>& ranked, const Id& gold) {
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i].id == gold) return i + 1;
    }
    return std::nullopt;
}

// 1/rank within the cutoff, else 0. Throws ArgumentError on cutoff 0.
double reciprocal_rank(Rank rank, std::size_t cutoff);

// Means over cases; both throw ArgumentError on an empty case set or a zero cutoff/k.
double mrr(std::span<const Rank> ranks, std::size_t cutoff);
double topk_accuracy(std::span<const Rank> ranks, std::size_t k);

enum class RougeVariant { one, two, l };

// Length of the longest common subsequence (O(n*m) dynamic program).
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// Clipped n-gram precision (variants one, two) or LCS / candidate length (l),
// over tokenize(). An empty candidate, or one shorter than n, scores 0.
double rouge_precision(std::string_view candidate, std::string_view reference, RougeVariant variant);

// Named metrics plus the labels that place the run in a comparison grid
// (e.g. TR/KR/RG). Insertion order is kept for stable output.
struct MetricReport {
    std::string name;
    std::vector<std::pair<std::string, std::string>> labels;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::pair<std::string, std::size_t>> counts;

    double metric(std::string_view key) const;  // throws NotFoundError
    std::size_t count(std::string_view key) const;
    nlohmann::json to_json() const;
};

// Aligned text table, one row per report; columns are the union of labels
// then metrics, in first-seen order.
std::string format_report_table(std::span<const MetricReport> reports);

struct RetrievalEvalConfig {
    TableSource source = TableSource::dense;  // dense or bm25
    std::size_t cutoff = 10;
};

// MRR@cutoff, Top-1 and Top-3 of table retrieval over the cases.
// Throws ArgumentError on an empty case set, DataError on an unknown gold id.
MetricReport run_retrieval_eval(const PipelineContext& ctx, std::span<const RetrievalPair> cases,
                                const RetrievalEvalConfig& config);

struct DialogueEvalConfig {
    KnowledgeMode mode = KnowledgeMode::top(1);
    TableSource source = TableSource::gold;
    std::size_t cutoff = 10;
};

// Turn-level evaluation with reference (gold) history. Cell ranking metrics
// cover turns with gold cells; a turn's rank is the best rank of any of its
// gold cells. ROUGE precision covers follow-up turns (all but the first),
// averaged per turn and per dialogue.
MetricReport run_dialogue_eval(const PipelineContext& ctx, std::span<const DialogueRecord> dialogues,
                               const DialogueEvalConfig& config);

}  // namespace grounder
