#include "grounder/training.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "grounder/error.hpp"
#include "grounder/rng.hpp"
#include "grounder/state_tracker.hpp"

namespace grounder {

using nlohmann::json;

void TrainConfig::validate() const {
    if (epochs == 0) throw ArgumentError("epochs must be >= 1");
    if (batch_size < 2) throw ArgumentError("batch_size must be >= 2 (in-batch negatives)");
    if (!(lr_peak >= 0.0)) throw ArgumentError("lr_peak must be >= 0");
    if (!(margin > 0.0)) throw ArgumentError("margin must be > 0");
    if (dims < 2) throw ArgumentError("d must be >= 2");
    features().validate();
}

TrainConfig TrainConfig::from_json(const json& j) {
    static const std::set<std::string> known = {"epochs", "batch_size", "lr_peak", "warmup_steps",
                                                "margin", "seed",       "d",       "V",
                                                "ngram_max", "history_max_turns"};
    if (!j.is_object()) throw ArgumentError("training config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ArgumentError("unknown training config key '" + key + "'");
    }
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr_peak = j.value("lr_peak", c.lr_peak);
        c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
        c.margin = j.value("margin", c.margin);
        c.seed = j.value("seed", c.seed);
        c.dims = j.value("d", c.dims);
        c.hash_dims = j.value("V", c.hash_dims);
        c.ngram_max = j.value("ngram_max", c.ngram_max);
        c.history_max_turns = j.value("history_max_turns", c.history_max_turns);
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("training config: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open training config: " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

json TrainConfig::to_json() const {
    return {{"epochs", epochs}, {"batch_size", batch_size}, {"lr_peak", lr_peak},
            {"warmup_steps", warmup_steps}, {"margin", margin}, {"seed", seed},
            {"d", dims}, {"V", hash_dims}, {"ngram_max", ngram_max},
            {"history_max_turns", history_max_turns}};
}

DualEncoder initial_model(const TrainConfig& config) {
    config.validate();
    return DualEncoder::random(config.features(), config.dims, config.seed);
}

std::vector<RetrievalPair> load_retrieval_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path.string());
    std::vector<RetrievalPair> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = json::parse(line);
            RetrievalPair p{j.at("query").get<std::string>(), j.at("gold_id").get<std::string>()};
            if (p.query.empty() || p.table_id.empty()) throw DataError("query and gold_id must be non-empty");
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<RetrievalPair> first_turn_pairs(std::span<const DialogueRecord> dialogues) {
    std::vector<RetrievalPair> out;
    out.reserve(dialogues.size());
    for (const auto& d : dialogues) out.push_back({d.turns.front().query, d.gold_table_id});
    return out;
}

template <class Real>
double retrieval_objective(std::span<const Real> query_weights, std::span<const Real> knowledge_weights,
                           std::size_t dims, std::span<const Featurized> queries,
                           std::span<const Featurized> knowledge, std::span<Real> grad_query,
                           std::span<Real> grad_knowledge) {
    const std::size_t b = queries.size();
    if (knowledge.size() != b) throw ArgumentError("retrieval batch: query/knowledge count mismatch");
    std::vector<Activation> q_act;
    std::vector<Activation> k_act;
    ContrastiveBatch batch{Matrix(b, dims), Matrix(b, dims)};
    for (std::size_t i = 0; i < b; ++i) {
        q_act.push_back(encode_forward<Real>(query_weights, dims, queries[i]));
        k_act.push_back(encode_forward<Real>(knowledge_weights, dims, knowledge[i]));
        std::copy(q_act[i].unit.begin(), q_act[i].unit.end(), batch.queries.row(i).begin());
        std::copy(k_act[i].unit.begin(), k_act[i].unit.end(), batch.knowledge.row(i).begin());
    }
    const auto result = contrastive_loss(batch);
    for (std::size_t i = 0; i < b; ++i) {
        const auto gq = normalize_backward(q_act[i], result.grad_queries.row(i));
        accumulate_weight_grad<Real>(queries[i], gq, dims, grad_query);
        const auto gk = normalize_backward(k_act[i], result.grad_knowledge.row(i));
        accumulate_weight_grad<Real>(knowledge[i], gk, dims, grad_knowledge);
    }
    return result.loss;
}

template <class Real>
double ranking_objective(std::span<const Real> query_weights, std::span<const Real> knowledge_weights,
                         std::size_t dims, std::span<const Featurized> anchors,
                         std::span<const Featurized> positives, std::span<const Featurized> negatives,
                         double margin, std::span<Real> grad_query, std::span<Real> grad_knowledge) {
    const std::size_t n = anchors.size();
    if (positives.size() != n || negatives.size() != n) throw ArgumentError("triplet batch: size mismatch");
    if (n == 0) return 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const auto a = encode_forward<Real>(query_weights, dims, anchors[t]);
        const auto p = encode_forward<Real>(knowledge_weights, dims, positives[t]);
        const auto q = encode_forward<Real>(knowledge_weights, dims, negatives[t]);
        const auto r = triplet_loss({a.unit, p.unit, q.unit, margin});
        total += r.loss;
        if (!r.active) continue;
        auto scaled = [inv_n](std::vector<double> g) {
            for (auto& v : g) v *= inv_n;
            return g;
        };
        accumulate_weight_grad<Real>(anchors[t], normalize_backward(a, scaled(r.grad_anchor)), dims, grad_query);
        accumulate_weight_grad<Real>(positives[t], normalize_backward(p, scaled(r.grad_positive)), dims,
                                     grad_knowledge);
        accumulate_weight_grad<Real>(negatives[t], normalize_backward(q, scaled(r.grad_negative)), dims,
                                     grad_knowledge);
    }
    return total * inv_n;
}

template double retrieval_objective<float>(std::span<const float>, std::span<const float>, std::size_t,
                                           std::span<const Featurized>, std::span<const Featurized>,
                                           std::span<float>, std::span<float>);
template double retrieval_objective<double>(std::span<const double>, std::span<const double>, std::size_t,
                                            std::span<const Featurized>, std::span<const Featurized>,
                                            std::span<double>, std::span<double>);
template double ranking_objective<float>(std::span<const float>, std::span<const float>, std::size_t,
                                         std::span<const Featurized>, std::span<const Featurized>,
                                         std::span<const Featurized>, double, std::span<float>,
                                         std::span<float>);
template double ranking_objective<double>(std::span<const double>, std::span<const double>, std::size_t,
                                          std::span<const Featurized>, std::span<const Featurized>,
                                          std::span<const Featurized>, double, std::span<double>,
                                          std::span<double>);

namespace {

// Splits [0, n) into consecutive batches of `size`; a trailing batch of one
// item is folded into its predecessor so every batch has >= 2 items.
std::vector<std::pair<std::size_t, std::size_t>> batch_bounds(std::size_t n, std::size_t size) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t start = 0; start < n; start += size) out.emplace_back(start, std::min(n, start + size));
    if (out.size() > 1 && out.back().second - out.back().first < 2) {
        const auto last = out.back();
        out.pop_back();
        out.back().second = last.second;
    }
    return out;
}

// Dense gradient buffers for both encoders plus the Adam state driving them.
struct EncoderTrainer {
    EncoderTrainer(DualEncoder& model, const AdamConfig& adam)
        : model(model),
          grad_query(model.params(EncoderVariant::query).weights.size(), 0.0f),
          grad_knowledge(model.params(EncoderVariant::knowledge).weights.size(), 0.0f),
          adam_query(adam, grad_query.size()),
          adam_knowledge(adam, grad_knowledge.size()) {}

    void step() {
        adam_query.step(model.params(EncoderVariant::query).weights, grad_query);
        adam_knowledge.step(model.params(EncoderVariant::knowledge).weights, grad_knowledge);
    }

    // Only columns of features seen in the batch carry gradient.
    static void clear(std::vector<float>& grad, std::span<const Featurized* const> inputs, std::size_t dims) {
        for (const auto* x : inputs) {
            for (auto f : x->index) std::fill_n(grad.begin() + static_cast<std::ptrdiff_t>(f * dims), dims, 0.0f);
        }
    }

    DualEncoder& model;
    std::vector<float> grad_query;
    std::vector<float> grad_knowledge;
    Adam adam_query;
    Adam adam_knowledge;
};

AdamConfig adam_config(const TrainConfig& config, std::size_t total_steps) {
    AdamConfig adam;
    adam.lr_peak = config.lr_peak;
    adam.total_steps = std::max<std::size_t>(1, total_steps);
    adam.warmup_steps = std::min(config.warmup_steps, adam.total_steps);
    return adam;
}

}  // namespace

TrainResult train_retriever(const DualEncoder& initial, std::span<const RetrievalPair> pairs,
                            const Corpus& corpus, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (pairs.size() < 2) throw ArgumentError("retriever training needs at least 2 pairs");

    TrainResult result{initial, {}, pairs.size(), 0, 0};
    DualEncoder& model = result.model;
    const auto& features = model.features();
    const std::size_t dims = model.dims();

    std::vector<Featurized> queries;
    std::vector<std::size_t> gold;
    std::unordered_map<std::size_t, Featurized> tables;
    for (const auto& p : pairs) {
        const auto pos = corpus.position(p.table_id);
        if (!pos) throw DataError("training pair references unknown table '" + p.table_id + "'");
        queries.push_back(featurize(p.query, features));
        gold.push_back(*pos);
        if (!tables.contains(*pos)) tables.emplace(*pos, featurize(linearize_table(corpus[*pos]), features));
    }

    const auto bounds = batch_bounds(pairs.size(), config.batch_size);
    EncoderTrainer trainer(model, adam_config(config, config.epochs * bounds.size()));
    Rng rng(config.seed);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (const auto& [lo, hi] : bounds) {
            std::vector<Featurized> batch_q;
            std::vector<Featurized> batch_k;
            for (std::size_t i = lo; i < hi; ++i) {
                batch_q.push_back(queries[order[i]]);
                batch_k.push_back(tables.at(gold[order[i]]));
            }
            const auto& wq = model.params(EncoderVariant::query).weights;
            const auto& wk = model.params(EncoderVariant::knowledge).weights;
            epoch_loss += retrieval_objective<float>(wq, wk, dims, batch_q, batch_k, trainer.grad_query,
                                                     trainer.grad_knowledge);
            trainer.step();
            ++result.steps;

            std::vector<const Featurized*> qs;
            std::vector<const Featurized*> ks;
            for (std::size_t i = 0; i < batch_q.size(); ++i) {
                qs.push_back(&batch_q[i]);
                ks.push_back(&batch_k[i]);
            }
            EncoderTrainer::clear(trainer.grad_query, qs, dims);
            EncoderTrainer::clear(trainer.grad_knowledge, ks, dims);
        }
        const double mean = epoch_loss / static_cast<double>(bounds.size());
        result.epoch_losses.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    return result;
}

TrainResult train_ranker(const DualEncoder& initial, std::span<const DialogueRecord> dialogues,
                         const Corpus& corpus, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    TrainResult result{initial, {}, 0, 0, 0};
    DualEncoder& model = result.model;
    const auto& features = model.features();
    const std::size_t dims = model.dims();

    struct Example {
        Featurized anchor;
        std::size_t table = 0;
        std::size_t positive = 0;
        std::vector<std::size_t> negatives;
    };
    std::vector<Example> examples;
    std::unordered_map<std::size_t, std::vector<Featurized>> cells;

    for (const auto& dialogue : dialogues) {
        const auto pos = corpus.position(dialogue.gold_table_id);
        if (!pos) throw DataError("dialogue '" + dialogue.dialogue_id + "' references unknown table '" +
                                  dialogue.gold_table_id + "'");
        const auto& table = corpus[*pos];
        DialogueHistory history;
        for (const auto& turn : dialogue.turns) {
            history.current_query = turn.query;
            if (!turn.gold_cells.empty()) {
                std::vector<bool> is_gold(table.cell_count(), false);
                for (const auto& ref : turn.gold_cells) {
                    if (ref.table_id != table.table_id || ref.row >= table.row_count() ||
                        ref.col >= table.col_count()) {
                        throw DataError("dialogue '" + dialogue.dialogue_id + "' has an invalid gold cell");
                    }
                    is_gold[ref.row * table.col_count() + ref.col] = true;
                }
                std::vector<std::size_t> negatives;
                for (std::size_t c = 0; c < is_gold.size(); ++c) {
                    if (!is_gold[c]) negatives.push_back(c);
                }
                if (negatives.empty()) {
                    ++result.skipped_turns;
                } else {
                    const auto anchor = featurize(history_text(history, config.history_max_turns), features);
                    for (const auto& ref : turn.gold_cells) {
                        examples.push_back({anchor, *pos, ref.row * table.col_count() + ref.col, negatives});
                    }
                    if (!cells.contains(*pos)) {
                        auto& fs = cells[*pos];
                        for (std::size_t r = 0; r < table.row_count(); ++r) {
                            for (std::size_t c = 0; c < table.col_count(); ++c) {
                                fs.push_back(featurize(linearize_cell(table, r, c), features));
                            }
                        }
                    }
                }
            }
            history.turns.emplace_back(turn.query, turn.response);
        }
    }

    result.examples = examples.size();
    if (examples.empty()) return result;

    const auto bounds = batch_bounds(examples.size(), config.batch_size);
    EncoderTrainer trainer(model, adam_config(config, config.epochs * bounds.size()));
    Rng rng(config.seed);
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> negative_of(examples.size());

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t i = 0; i < examples.size(); ++i) {
            const auto& negs = examples[i].negatives;
            negative_of[i] = negs[rng.below(negs.size())];
        }
        double epoch_loss = 0.0;
        for (const auto& [lo, hi] : bounds) {
            std::vector<Featurized> anchors;
            std::vector<Featurized> positives;
            std::vector<Featurized> negatives;
            for (std::size_t i = lo; i < hi; ++i) {
                const auto& ex = examples[order[i]];
                const auto& table_cells = cells.at(ex.table);
                anchors.push_back(ex.anchor);
                positives.push_back(table_cells[ex.positive]);
                negatives.push_back(table_cells[negative_of[order[i]]]);
            }
            const auto& wq = model.params(EncoderVariant::query).weights;
            const auto& wk = model.params(EncoderVariant::knowledge).weights;
            epoch_loss += ranking_objective<float>(wq, wk, dims, anchors, positives, negatives, config.margin,
                                                   trainer.grad_query, trainer.grad_knowledge);
            trainer.step();
            ++result.steps;

            std::vector<const Featurized*> qs;
            std::vector<const Featurized*> ks;
            for (std::size_t i = 0; i < anchors.size(); ++i) {
                qs.push_back(&anchors[i]);
                ks.push_back(&positives[i]);
                ks.push_back(&negatives[i]);
            }
            EncoderTrainer::clear(trainer.grad_query, qs, dims);
            EncoderTrainer::clear(trainer.grad_knowledge, ks, dims);
        }
        const double mean = epoch_loss / static_cast<double>(bounds.size());
        result.epoch_losses.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    return result;
}

}  // namespace grounder
