#include "grounder/evaluation.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>

#include "grounder/error.hpp"
#include "grounder/state_tracker.hpp"
#include "grounder/text_features.hpp"

namespace grounder {

using nlohmann::json;

double reciprocal_rank(Rank rank, std::size_t cutoff) {
    if (cutoff == 0) throw ArgumentError("cutoff must be >= 1");
    if (!rank || *rank == 0 || *rank > cutoff) return 0.0;
    return 1.0 / static_cast<double>(*rank);
}

double mrr(std::span<const Rank> ranks, std::size_t cutoff) {
    if (ranks.empty()) throw ArgumentError("MRR over an empty case set");
    double sum = 0.0;
    for (const auto& r : ranks) sum += reciprocal_rank(r, cutoff);
    return sum / static_cast<double>(ranks.size());
}

double topk_accuracy(std::span<const Rank> ranks, std::size_t k) {
    if (ranks.empty()) throw ArgumentError("Top-k over an empty case set");
    if (k == 0) throw ArgumentError("k must be >= 1");
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](const Rank& r) { return r && *r <= k; });
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return out;
}

}  // namespace

double rouge_precision(std::string_view candidate, std::string_view reference, RougeVariant variant) {
    const auto cand = tokenize(candidate);
    const auto ref = tokenize(reference);
    if (cand.empty()) return 0.0;
    if (variant == RougeVariant::l) {
        return static_cast<double>(lcs_length(cand, ref)) / static_cast<double>(cand.size());
    }
    const std::size_t n = variant == RougeVariant::one ? 1 : 2;
    if (cand.size() < n) return 0.0;
    const auto c = ngram_counts(cand, n);
    const auto r = ngram_counts(ref, n);
    std::size_t matched = 0;
    for (const auto& [gram, count] : c) {
        if (auto it = r.find(gram); it != r.end()) matched += std::min(count, it->second);
    }
    return static_cast<double>(matched) / static_cast<double>(cand.size() - n + 1);
}

double MetricReport::metric(std::string_view key) const {
    for (const auto& [k, v] : metrics) {
        if (k == key) return v;
    }
    throw NotFoundError("report '" + name + "' has no metric '" + std::string(key) + "'");
}

std::size_t MetricReport::count(std::string_view key) const {
    for (const auto& [k, v] : counts) {
        if (k == key) return v;
    }
    throw NotFoundError("report '" + name + "' has no count '" + std::string(key) + "'");
}

json MetricReport::to_json() const {
    json j;
    j["report"] = name;
    json l = json::object();
    for (const auto& [k, v] : labels) l[k] = v;
    json m = json::object();
    for (const auto& [k, v] : metrics) m[k] = v;
    json c = json::object();
    for (const auto& [k, v] : counts) c[k] = v;
    j["labels"] = l;
    j["metrics"] = m;
    j["counts"] = c;
    return j;
}

std::string format_report_table(std::span<const MetricReport> reports) {
    std::vector<std::string> label_cols;
    std::vector<std::string> metric_cols;
    auto add = [](std::vector<std::string>& cols, const std::string& key) {
        if (std::find(cols.begin(), cols.end(), key) == cols.end()) cols.push_back(key);
    };
    for (const auto& r : reports) {
        for (const auto& [k, _] : r.labels) add(label_cols, k);
        for (const auto& [k, _] : r.metrics) add(metric_cols, k);
    }

    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header = label_cols;
    header.insert(header.end(), metric_cols.begin(), metric_cols.end());
    grid.push_back(header);
    for (const auto& r : reports) {
        std::vector<std::string> row;
        for (const auto& col : label_cols) {
            auto it = std::find_if(r.labels.begin(), r.labels.end(), [&](const auto& p) { return p.first == col; });
            row.push_back(it == r.labels.end() ? "-" : it->second);
        }
        for (const auto& col : metric_cols) {
            auto it = std::find_if(r.metrics.begin(), r.metrics.end(), [&](const auto& p) { return p.first == col; });
            if (it == r.metrics.end()) {
                row.emplace_back("-");
            } else {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.4f", it->second);
                row.emplace_back(buf);
            }
        }
        grid.push_back(std::move(row));
    }

    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::string out;
    for (const auto& row : grid) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) line += "  ";
            const auto pad = width[c] - row[c].size();
            // Labels left-aligned, numbers right-aligned.
            if (c < label_cols.size()) {
                line += row[c] + std::string(pad, ' ');
            } else {
                line += std::string(pad, ' ') + row[c];
            }
        }
        while (line.ends_with(' ')) line.pop_back();
        out += line + "\n";
    }
    return out;
}

MetricReport run_retrieval_eval(const PipelineContext& ctx, std::span<const RetrievalPair> cases,
                                const RetrievalEvalConfig& config) {
    if (cases.empty()) throw ArgumentError("retrieval evaluation needs at least one case");
    if (!ctx.corpus) throw ArgumentError("retrieval evaluation needs a corpus");
    if (config.source == TableSource::gold) throw ArgumentError("retrieval evaluation needs dense or bm25");
    for (const auto& c : cases) {
        if (!ctx.corpus->position(c.table_id)) throw DataError("case references unknown table '" + c.table_id + "'");
    }
    const std::size_t depth = std::max<std::size_t>(config.cutoff, 3);

    std::vector<Rank> ranks(cases.size());
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            RankedList<std::string> ranked;
            if (config.source == TableSource::dense) {
                if (!ctx.retriever || !ctx.index) throw DataError("dense evaluation needs a retriever model and index");
                ranked = ctx.index->search(ctx.retriever->encode_query(cases[i].query), depth);
            } else {
                if (!ctx.bm25) throw DataError("BM25 evaluation needs a BM25 index");
                ranked = ctx.bm25->search(cases[i].query, depth);
            }
            ranks[i] = rank_of(ranked, cases[i].table_id);
        } catch (...) {
            failed = true;
#pragma omp critical(grounder_eval_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    MetricReport report;
    report.name = "retrieval";
    report.labels = {{"TR", to_string(config.source)}};
    report.metrics = {{"MRR@" + std::to_string(config.cutoff), mrr(ranks, config.cutoff)},
                      {"Top-1", topk_accuracy(ranks, 1)},
                      {"Top-3", topk_accuracy(ranks, 3)}};
    report.counts = {{"cases", cases.size()}};
    return report;
}

namespace {

struct DialogueOutcome {
    std::vector<Rank> ranks;
    std::vector<std::array<double, 3>> rouge;
    std::size_t unranked_turns = 0;
    bool retrieval_miss = false;
};

DialogueOutcome evaluate_dialogue(const PipelineContext& ctx, const DialogueRecord& dialogue,
                                  const DialogueEvalConfig& config) {
    DialogueOutcome out;
    if (!ctx.corpus->position(dialogue.gold_table_id)) {
        throw DataError("dialogue '" + dialogue.dialogue_id + "' references unknown table '" +
                        dialogue.gold_table_id + "'");
    }
    const std::string table_id = config.source == TableSource::gold
                                     ? dialogue.gold_table_id
                                     : retrieve_table(ctx, config.source, dialogue.turns.front().query);
    out.retrieval_miss = table_id != dialogue.gold_table_id;
    const auto& table = ctx.corpus->at(table_id);

    DialogueHistory history;
    for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
        const auto& turn = dialogue.turns[t];
        history.current_query = turn.query;
        if (turn.gold_cells.empty()) {
            ++out.unranked_turns;
        } else {
            if (!ctx.ranker) throw ArgumentError("dialogue evaluation needs a ranker model");
            Rank best;
            if (!out.retrieval_miss) {
                const auto ranked = rank_cells(*ctx.ranker, table, history, table.cell_count(), ctx.history_max_turns);
                for (const auto& gold : turn.gold_cells) {
                    const auto r = rank_of(ranked, gold);
                    if (r && (!best || *r < *best)) best = r;
                }
            }
            out.ranks.push_back(best);
        }
        if (t > 0) {
            const auto result = answer_turn(ctx, history, table_id, config.mode, config.source);
            out.rouge.push_back({rouge_precision(result.response, turn.response, RougeVariant::one),
                                 rouge_precision(result.response, turn.response, RougeVariant::two),
                                 rouge_precision(result.response, turn.response, RougeVariant::l)});
        }
        history.turns.emplace_back(turn.query, turn.response);
    }
    return out;
}

}  // namespace

MetricReport run_dialogue_eval(const PipelineContext& ctx, std::span<const DialogueRecord> dialogues,
                               const DialogueEvalConfig& config) {
    if (dialogues.empty()) throw ArgumentError("dialogue evaluation needs at least one dialogue");
    if (!ctx.corpus || !ctx.provider) throw ArgumentError("dialogue evaluation needs a corpus and a provider");

    std::vector<DialogueOutcome> outcomes(dialogues.size());
    std::exception_ptr failure;
    std::atomic<bool> failed{false};  // skip remaining work, e.g. after a dead provider
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < dialogues.size(); ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            outcomes[i] = evaluate_dialogue(ctx, dialogues[i], config);
        } catch (...) {
            failed = true;
#pragma omp critical(grounder_eval_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    // Serial aggregation in dialogue order keeps reports bit-reproducible.
    std::vector<Rank> ranks;
    std::array<double, 3> turn_sum{};
    std::array<double, 3> dialogue_sum{};
    std::size_t generated = 0;
    std::size_t scored_dialogues = 0;
    std::size_t unranked = 0;
    std::size_t misses = 0;
    for (const auto& o : outcomes) {
        ranks.insert(ranks.end(), o.ranks.begin(), o.ranks.end());
        unranked += o.unranked_turns;
        misses += o.retrieval_miss ? 1 : 0;
        if (o.rouge.empty()) continue;
        std::array<double, 3> local{};
        for (const auto& r : o.rouge) {
            for (std::size_t v = 0; v < 3; ++v) {
                turn_sum[v] += r[v];
                local[v] += r[v];
            }
        }
        for (std::size_t v = 0; v < 3; ++v) dialogue_sum[v] += local[v] / static_cast<double>(o.rouge.size());
        generated += o.rouge.size();
        ++scored_dialogues;
    }

    MetricReport report;
    report.name = "dialogue";
    report.labels = {{"TR", to_string(config.source)},
                     {"KR", config.mode.name()},
                     {"RG", ctx.provider->kind()}};
    if (!ranks.empty()) {
        report.metrics.emplace_back("MRR@" + std::to_string(config.cutoff), mrr(ranks, config.cutoff));
        for (std::size_t k : {1, 3, 10}) report.metrics.emplace_back("Top-" + std::to_string(k), topk_accuracy(ranks, k));
    }
    if (generated > 0) {
        const char* names[] = {"ROUGE-1", "ROUGE-2", "ROUGE-L"};
        for (std::size_t v = 0; v < 3; ++v) {
            report.metrics.emplace_back(names[v], turn_sum[v] / static_cast<double>(generated));
        }
        for (std::size_t v = 0; v < 3; ++v) {
            report.metrics.emplace_back(std::string(names[v]) + "/dialogue",
                                        dialogue_sum[v] / static_cast<double>(scored_dialogues));
        }
    }
    report.counts = {{"dialogues", dialogues.size()},
                     {"ranked_turns", ranks.size()},
                     {"unranked_turns", unranked},
                     {"generated_turns", generated},
                     {"retrieval_misses", misses}};
    return report;
}

}  // namespace grounder
