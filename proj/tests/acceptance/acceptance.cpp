// One PASS/FAIL line per acceptance criterion. Exit status is 0 only when
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "grounder/cli.hpp"
#include "grounder/dense_index.hpp"
#include "grounder/evaluation.hpp"
#include "grounder/optimizer.hpp"
#include "grounder/service.hpp"
#include "grounder/sparse_retriever.hpp"
#include "grounder/state_tracker.hpp"
#include "grounder/text_features.hpp"
#include "objective_check.hpp"
#include "support.hpp"

using namespace grounder;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << std::fixed << v;
    return s.str();
}

std::string sci(double v) {
    std::ostringstream s;
    s.precision(2);
    s << std::scientific << v;
    return s.str();
}

std::vector<std::size_t> stable_order_desc(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    return order;
}

// ---- 1: gradients -------------------------------------------------------

Outcome gradient_correctness() {
    const auto start = Clock::now();
    double worst = 0.0;
    std::size_t contrastive = 0, triplet = 0, skipped = 0;
    for (std::uint64_t seed = 0; contrastive < 100; ++seed) {
        const auto p = test::random_problem(seed, 2 + seed % 4, false);
        worst = std::max(worst, grad_check(test::objective_of(p), p.params).max_relative_error);
        ++contrastive;
    }
    for (std::uint64_t seed = 10000; triplet < 100; ++seed) {
        const auto p = test::random_problem(seed, 1 + seed % 4, true);
        if (test::min_hinge_distance(p) < 1e-3) {
            ++skipped;
            continue;
        }
        worst = std::max(worst, grad_check(test::objective_of(p), p.params).max_relative_error);
        ++triplet;
    }
    const double elapsed = seconds_since(start);
    return {worst < 1e-4 && elapsed < 30.0,
            "max rel err " + sci(worst) + " over " + std::to_string(contrastive) + " contrastive + " +
                std::to_string(triplet) + " triplet seeds (" + std::to_string(skipped) + " near-kink skipped), " +
                fmt(elapsed, 1) + " s"};
}

// ---- 2: closed forms ----------------------------------------------------

Outcome closed_forms() {
    Rng rng(2);
    double worst_logb = 0, worst_shift = 0;
    bool triplet_exact = true;
    for (std::size_t b : {2u, 4u, 8u}) {
        for (int trial = 0; trial < 20; ++trial) {
            Matrix logits(b, b);
            const double c = rng.uniform(-20, 20);
            for (auto& v : logits.data) v = c;
            worst_logb = std::max(worst_logb,
                                  std::abs(contrastive_loss_from_logits(logits).loss - std::log(double(b))));
        }
    }
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(6), p(6);
        for (auto& v : a) v = rng.uniform(-1, 1);
        for (auto& v : p) v = rng.uniform(-1, 1);
        const double m = rng.uniform(0.05, 3.0);
        triplet_exact = triplet_exact && triplet_loss({a, p, p, m}).loss == m;

        const std::size_t b = 2 + rng.below(7);
        Matrix logits(b, b);
        for (auto& v : logits.data) v = rng.uniform(-3, 3);
        auto shifted = logits;
        for (std::size_t i = 0; i < b; ++i) {
            const double c = rng.uniform(-100, 100);
            for (auto& v : shifted.row(i)) v += c;
        }
        worst_shift = std::max(worst_shift, std::abs(contrastive_loss_from_logits(logits).loss -
                                                     contrastive_loss_from_logits(shifted).loss));
    }
    return {worst_logb < 1e-9 && worst_shift < 1e-9 && triplet_exact,
            "|L - ln B| max " + sci(worst_logb) + ", shift diff max " + sci(worst_shift) +
                ", triplet(p==n) == m: " + (triplet_exact ? "yes" : "no")};
}

// ---- 3: ranking oracles -------------------------------------------------

float grid_value(Rng& rng) { return static_cast<float>(static_cast<int>(rng.below(5)) - 2) * 0.25f; }

std::size_t dense_oracle_failures(Rng& rng, int trials) {
    std::size_t failures = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 1 + rng.below(100), d = 1 + rng.below(16);
        std::vector<float> m(n * d);
        for (auto& v : m) v = grid_value(rng);
        EmbeddingVector q;
        for (std::size_t j = 0; j < d; ++j) q.values.push_back(grid_value(rng));
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) ids.push_back("d" + std::to_string(i));
        const DenseIndex idx(ids, d, m, "fp");
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            float acc = 0.0f;
            for (std::size_t j = 0; j < d; ++j) acc += m[i * d + j] * q.values[j];
            scores[i] = acc;
        }
        const auto order = stable_order_desc(scores);
        const std::size_t k = 1 + rng.below(n + 3);
        const auto got = idx.search(q, k);
        bool ok = got.size() == std::min(k, n);
        for (std::size_t r = 0; ok && r < got.size(); ++r) {
            ok = got[r].id == ids[order[r]] && got[r].score == scores[order[r]];
        }
        failures += ok ? 0 : 1;
    }
    return failures;
}

std::vector<double> bm25_oracle(const std::vector<std::string>& texts, const std::string& query, Bm25Params p) {
    std::vector<std::map<std::string, double>> tf(texts.size());
    std::vector<double> len(texts.size(), 0.0);
    std::map<std::string, double> df;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        for (const auto& t : tokenize(texts[i])) tf[i][t] += 1;
        for (const auto& [t, c] : tf[i]) {
            len[i] += c;
            df[t] += 1;
        }
    }
    const double n = static_cast<double>(texts.size());
    const double avgdl = std::accumulate(len.begin(), len.end(), 0.0) / n;
    std::map<std::string, double> q;
    for (const auto& t : tokenize(query)) q[t] += 1;
    std::vector<double> out(texts.size(), 0.0);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        for (const auto& [t, mult] : q) {
            const auto it = tf[i].find(t);
            if (it == tf[i].end()) continue;
            const double idf = std::log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5));
            const double f = it->second;
            out[i] += mult * idf * f * (p.k1 + 1) / (f + p.k1 * (1 - p.b + p.b * len[i] / avgdl));
        }
    }
    return out;
}

std::size_t bm25_oracle_failures(Rng& rng, int trials, double& worst_score_diff) {
    std::size_t failures = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 1 + rng.below(25);
        std::vector<std::string> texts, ids;
        for (std::size_t i = 0; i < n; ++i) {
            texts.push_back(test::random_text(rng, 0, 8));
            ids.push_back("d" + std::to_string(i));
        }
        if (n > 1 && rng.below(4) == 0) texts[n - 1] = texts[0];
        const Bm25Params p{rng.uniform(0.5, 2.0), rng.uniform(0.0, 1.0)};
        const auto idx = Bm25Index::build(ids, texts, p);
        const auto query = test::random_text(rng, 1, 4);
        const auto scores = bm25_oracle(texts, query, p);
        const auto order = stable_order_desc(scores);
        const std::size_t k = 1 + rng.below(n + 2);
        const auto got = idx.search(query, k);
        bool ok = got.size() == std::min(k, n);
        for (std::size_t r = 0; ok && r < got.size(); ++r) {
            ok = got[r].id == ids[order[r]];
            worst_score_diff = std::max(worst_score_diff, std::abs(got[r].score - scores[order[r]]));
        }
        failures += ok ? 0 : 1;
    }
    return failures;
}

std::size_t rank_cells_oracle_failures(Rng& rng, int trials) {
    const auto model = DualEncoder::random({2048, 2}, 8, 4);
    std::size_t failures = 0;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t rows = 1 + rng.below(5), cols = 1 + rng.below(4);
        const auto t = test::random_table(rng, "t", rows, cols);
        const DialogueHistory h{{{test::random_text(rng, 1, 4), test::random_text(rng, 1, 4)}},
                                test::random_text(rng, 1, 5)};
        const auto anchor = model.encode_query(history_text(h));
        std::vector<double> neg_dist;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                const auto e = model.encode_knowledge(linearize_cell(t, r, c));
                double s = 0;
                for (std::size_t j = 0; j < e.dims(); ++j) {
                    const double diff = static_cast<double>(e.values[j]) - anchor.values[j];
                    s += diff * diff;
                }
                neg_dist.push_back(-std::sqrt(s));
            }
        }
        const auto order = stable_order_desc(neg_dist);
        const std::size_t k = 1 + rng.below(rows * cols + 2);
        const auto got = rank_cells(model, t, h, k);
        bool ok = got.size() == std::min(k, rows * cols);
        for (std::size_t i = 0; ok && i < got.size(); ++i) {
            ok = got[i].id == CellRef{"t", order[i] / cols, order[i] % cols} && got[i].score == neg_dist[order[i]];
        }
        failures += ok ? 0 : 1;
    }
    return failures;
}

Outcome ranking_oracles() {
    Rng rng(3);
    constexpr int kTrials = 500;
    double bm25_diff = 0;
    const auto dense = dense_oracle_failures(rng, kTrials);
    const auto bm25 = bm25_oracle_failures(rng, kTrials, bm25_diff);
    const auto cells = rank_cells_oracle_failures(rng, kTrials);
    return {dense == 0 && bm25 == 0 && cells == 0,
            "mismatches over " + std::to_string(kTrials) + " instances each: dense " + std::to_string(dense) +
                ", bm25 " + std::to_string(bm25) + " (max score diff " + sci(bm25_diff) + "), rank_cells " +
                std::to_string(cells)};
}

// ---- 4: metric oracles --------------------------------------------------

bool is_subsequence(const std::vector<std::string>& sub, const std::vector<std::string>& of) {
    std::size_t j = 0;
    for (const auto& tok : of) {
        if (j < sub.size() && sub[j] == tok) ++j;
    }
    return j == sub.size();
}

std::size_t lcs_exhaustive(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
        std::vector<std::string> sub;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (mask & (1u << i)) sub.push_back(a[i]);
        }
        if (sub.size() > best && is_subsequence(sub, b)) best = sub.size();
    }
    return best;
}

Outcome metric_oracles() {
    struct Example {
        const char* name;
        double got;
        double want;
    };
    const std::vector<Rank> r214{2, 1, 4};
    const std::vector<Rank> all_first{1, 1, 1};
    const std::vector<Rank> none{std::nullopt, 11};
    const std::vector<Example> examples{
        {"RR rank 1", reciprocal_rank(1, 10), 1.0},
        {"RR rank 4", reciprocal_rank(4, 10), 0.25},
        {"RR rank 11 @10", reciprocal_rank(11, 10), 0.0},
        {"MRR [2,1,4]", mrr(r214, 10), (0.5 + 1.0 + 0.25) / 3.0},
        {"MRR all rank 1", mrr(all_first, 10), 1.0},
        {"MRR never in top-N", mrr(none, 10), 0.0},
        // The written example lists 1.0 here, but rank 4 is outside the top 3;
        // the stated definition gives 2/3.
        {"Top-3 [2,1,4]", topk_accuracy(r214, 3), 2.0 / 3.0},
        {"Top-1 [2,1,4]", topk_accuracy(r214, 1), 1.0 / 3.0},
        {"Top-k k >= length", topk_accuracy(r214, 4), 1.0},
        {"ROUGE-1", rouge_precision("the cat sat on mat", "the cat", RougeVariant::one), 0.4},
        {"ROUGE-2", rouge_precision("the cat sat on mat", "the cat", RougeVariant::two), 0.25},
        {"ROUGE-L", rouge_precision("a b c d", "a c d", RougeVariant::l), 0.75},
        {"ROUGE empty candidate", rouge_precision("", "the cat", RougeVariant::one), 0.0},
    };
    std::vector<std::string> wrong;
    for (const auto& e : examples) {
        if (e.got != e.want) wrong.push_back(e.name);
    }

    Rng rng(4);
    static const char* alphabet[] = {"x", "y", "z"};
    std::size_t lcs_mismatch = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::string> a(rng.below(9)), b(rng.below(9));
        for (auto& t : a) t = alphabet[rng.below(3)];
        for (auto& t : b) t = alphabet[rng.below(3)];
        lcs_mismatch += lcs_length(a, b) == lcs_exhaustive(a, b) ? 0 : 1;
    }
    std::string detail = std::to_string(examples.size() - wrong.size()) + "/" + std::to_string(examples.size()) +
                         " hand examples exact (Top-3 of [2,1,4] checked as 2/3, the written 1.0 contradicts the"
                         " definition), LCS mismatches " + std::to_string(lcs_mismatch) + "/1000";
    for (const auto& w : wrong) detail += "; wrong: " + w;
    return {wrong.empty() && lcs_mismatch == 0, detail};
}

// ---- 5-7: CLI pipeline --------------------------------------------------

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;
    double seconds = 0;
};

CliRun cli(const std::vector<std::string>& args) {
    std::istringstream in;
    std::ostringstream out, err;
    const auto start = Clock::now();
    const int code = run_cli(args, in, out, err);
    return {code, out.str(), err.str(), seconds_since(start)};
}

struct PipelineRun {
    bool ok = false;
    std::string failure;
    fs::path dir;
    double retriever_seconds = 0;  // train + build-index + eval-retrieval
    double ranker_seconds = 0;     // train + eval-dialogue
    std::vector<json> retrieval_reports;
    std::vector<json> dialogue_reports;
};

std::vector<json> report_lines(const std::string& out) {
    std::vector<json> v;
    std::istringstream s(out);
    for (std::string line; std::getline(s, line);) {
        if (line.empty()) continue;
        auto j = json::parse(line);
        if (j.contains("report")) v.push_back(std::move(j));
    }
    return v;
}

// Full train/eval pipeline on the shipped corpus with the shipped config,
// artifacts redirected into dir.
PipelineRun run_pipeline(const fs::path& source, const fs::path& dir) {
    PipelineRun run;
    run.dir = dir;
    fs::remove_all(dir);
    fs::create_directories(dir);
    json cfg = json::parse(test::read_text(source / "grounder.json"));
    for (auto& [key, value] : cfg["paths"].items()) {
        value = key == "artifacts" ? (dir / "artifacts").string() : (source / value.get<std::string>()).string();
    }
    cfg["service"]["data_dir"] = (dir / "var").string();
    const auto config = (dir / "grounder.json").string();
    test::write_text(config, cfg.dump(2));

    auto step = [&](std::vector<std::string> args, const char* save_as = nullptr) -> std::optional<CliRun> {
        args.insert(args.begin(), {"-c", config});
        auto r = cli(args);
        if (r.code != 0) {
            run.failure = args[2] + " exited " + std::to_string(r.code) + ": " + r.err;
            return std::nullopt;
        }
        if (save_as) test::write_text(dir / save_as, r.out);
        return r;
    };

    if (!step({"ingest"})) return run;
    auto tr = step({"train-retriever"});
    if (!tr) return run;
    auto bi = step({"build-index"});
    if (!bi) return run;
    auto er = step({"eval-retrieval", "--tr", "all", "--format", "json"}, "eval_retrieval.jsonl");
    if (!er) return run;
    run.retriever_seconds = tr->seconds + bi->seconds + er->seconds;
    auto tk = step({"train-ranker"});
    if (!tk) return run;
    auto ed = step({"eval-dialogue", "--mode", "all", "--tr", "gold", "--provider", "mock", "--format", "json"},
                   "eval_dialogue.jsonl");
    if (!ed) return run;
    run.ranker_seconds = tk->seconds + ed->seconds;
    run.retrieval_reports = report_lines(er->out);
    run.dialogue_reports = report_lines(ed->out);
    run.ok = true;
    return run;
}

const json* find_report(const std::vector<json>& reports, const std::string& label, const std::string& value) {
    for (const auto& r : reports) {
        if (r["labels"].value(label, "") == value) return &r;
    }
    return nullptr;
}

Outcome retrieval_analogue(const PipelineRun& run) {
    if (!run.ok) return {false, run.failure};
    const auto* dense = find_report(run.retrieval_reports, "TR", "dense");
    const auto* bm25 = find_report(run.retrieval_reports, "TR", "bm25");
    if (!dense || !bm25) return {false, "missing dense or bm25 report"};
    const double d1 = (*dense)["metrics"]["Top-1"], b1 = (*bm25)["metrics"]["Top-1"];
    const double dm = (*dense)["metrics"]["MRR@10"], bm = (*bm25)["metrics"]["MRR@10"];
    const bool pass = d1 >= 0.95 && d1 - b1 >= 0.20 && dm > bm && run.retriever_seconds < 120.0;
    return {pass, "dense Top-1 " + fmt(d1) + " MRR@10 " + fmt(dm) + " vs BM25 Top-1 " + fmt(b1) + " MRR@10 " + fmt(bm) +
                      ", train+eval " + fmt(run.retriever_seconds, 1) + " s"};
}

Outcome dialogue_analogue(const PipelineRun& run) {
    if (!run.ok) return {false, run.failure};
    const auto* nok = find_report(run.dialogue_reports, "KR", "nok");
    const auto* top1 = find_report(run.dialogue_reports, "KR", "top1");
    const auto* top3 = find_report(run.dialogue_reports, "KR", "top3");
    if (!nok || !top1 || !top3) return {false, "missing nok/top1/top3 report"};
    const double c1 = (*top1)["metrics"]["Top-1"], c3 = (*top1)["metrics"]["Top-3"];
    const double rn = (*nok)["metrics"]["ROUGE-1"], r1 = (*top1)["metrics"]["ROUGE-1"],
                 r3 = (*top3)["metrics"]["ROUGE-1"];
    const bool pass = c1 >= 0.90 && c3 >= 0.98 && r3 >= r1 && r1 > rn && run.ranker_seconds < 120.0;
    return {pass, "cell Top-1 " + fmt(c1) + " Top-3 " + fmt(c3) + "; ROUGE-1 Top-3 " + fmt(r3) + " Top-1 " + fmt(r1) +
                      " NoK " + fmt(rn) + ", train+eval " + fmt(run.ranker_seconds, 1) + " s"};
}

Outcome determinism(const PipelineRun& a, const PipelineRun& b) {
    if (!a.ok || !b.ok) return {false, a.ok ? b.failure : a.failure};
    const std::vector<fs::path> files{"artifacts/retriever.gdem", "artifacts/ranker.gdem", "artifacts/index.gdix",
                                      "artifacts/bm25.gbm2",     "eval_retrieval.jsonl", "eval_dialogue.jsonl"};
    std::vector<std::string> differing;
    for (const auto& f : files) {
        if (!fs::exists(a.dir / f) || test::read_text(a.dir / f) != test::read_text(b.dir / f)) {
            differing.push_back(f.string());
        }
    }
    std::string detail = std::to_string(files.size() - differing.size()) + "/" + std::to_string(files.size()) +
                         " files bit-identical across two seeded runs";
    for (const auto& f : differing) detail += "; differs: " + f;
    return {differing.empty(), detail};
}

// ---- 8: service ---------------------------------------------------------

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

// Slow mock that reports how many questions its prompt carried.
class CountingProvider : public GenerationProvider {
public:
    std::string generate(const std::string& prompt) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(60));
        return "saw " + std::to_string(count_of(prompt, "Q: ")) + " questions";
    }
    std::string kind() const override { return "mock"; }
};

class Served {
public:
    Served(ChatService& chat) : server_(chat) {
        port_ = server_.bind("127.0.0.1", 0);
        thread_ = std::thread([this] { server_.listen(); });
        httplib::Client probe("127.0.0.1", port_);
        for (int i = 0; i < 400 && !probe.Get("/api/health"); ++i) {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
    }
    ~Served() {
        server_.stop();
        thread_.join();
    }
    httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

private:
    HttpServer server_;
    int port_ = 0;
    std::thread thread_;
};

Outcome service_contract(const PipelineRun& run) {
    if (!run.ok) return {false, "pipeline artifacts missing: " + run.failure};
    const auto config = AppConfig::load(run.dir / "grounder.json");
    Engine::Parts parts;
    parts.dense = parts.ranker = parts.responder = true;
    const auto engine = Engine::load(config, parts);
    const auto data_dir = run.dir / "service";
    fs::remove_all(data_dir);

    // Restart round trip.
    std::string id;
    json before;
    {
        ChatService chat(engine, data_dir);
        Served served(chat);
        auto c = served.client();
        auto created = c.Post("/api/sessions", R"({"mode":"top3","provider":"mock"})", "application/json");
        if (!created || created->status != 201) return {false, "session creation failed"};
        id = json::parse(created->body)["session_id"];
        for (const char* q : {"show me soccer sides in Zeiraetesk", "Tell me about Gizaeth.", "Who is the coach?"}) {
            auto r = c.Post("/api/sessions/" + id + "/messages", json{{"query", q}}.dump(), "application/json");
            if (!r || r->status != 200) return {false, std::string("message failed: ") + q};
        }
        before = json::parse(c.Get("/api/sessions/" + id)->body);
    }
    json after;
    {
        ChatService chat(engine, data_dir);
        Served served(chat);
        auto r = served.client().Get("/api/sessions/" + id);
        if (!r || r->status != 200) return {false, "session missing after restart"};
        after = json::parse(r->body);
    }
    const bool restart_ok = before == after && before["turns"].size() == 3;

    // Ten concurrent posts to one session, issued 15 ms apart while each turn takes 60 ms.
    ChatService chat(engine, {}, TableSource::dense,
                     [](const std::string&) { return std::make_unique<CountingProvider>(); });
    Served served(chat);
    auto c = served.client();
    const std::string sid = json::parse(c.Post("/api/sessions", R"({"mode":"top1"})", "application/json")->body)["session_id"];
    constexpr int kPosts = 10;
    std::vector<int> status(kPosts, 0);
    std::vector<std::thread> threads;
    for (int i = 0; i < kPosts; ++i) {
        threads.emplace_back([&, i] {
            auto client = served.client();
            client.set_read_timeout(30, 0);
            const auto q = i == 0 ? std::string("show me soccer sides in Zeiraetesk") : "question " + std::to_string(i);
            auto r = client.Post("/api/sessions/" + sid + "/messages", json{{"query", q}}.dump(), "application/json");
            status[i] = r ? r->status : -1;
        });
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
    }
    for (auto& t : threads) t.join();
    const auto session = chat.get_session(sid);
    bool order_ok = session.turns.size() == kPosts;
    for (int i = 0; order_ok && i < kPosts; ++i) {
        const auto want_query = i == 0 ? std::string("show me soccer sides in Zeiraetesk") : "question " + std::to_string(i);
        order_ok = status[i] == 200 && session.turns[i].query == want_query &&
                   session.turns[i].response == "saw " + std::to_string(i + 1) + " questions";
    }
    return {restart_ok && order_ok, std::string("restart history ") + (restart_ok ? "identical" : "DIFFERS") +
                                        " (3 turns); 10 concurrent posts " +
                                        (order_ok ? "served in arrival order with full history" : "OUT OF ORDER")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app("Acceptance checks; prints one PASS/FAIL line per criterion");
    std::string work = "acceptance_work";
    std::string source = GROUNDER_SOURCE_DIR;
    app.add_option("--work-dir", work, "Scratch directory for pipeline runs")->capture_default_str();
    app.add_option("--source-dir", source, "Repository root (config and data)")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    bool all = true;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
    };

    report(1, "gradient correctness", gradient_correctness);
    report(2, "closed-form loss values", closed_forms);
    report(3, "ranking oracles", ranking_oracles);
    report(4, "metric oracles", metric_oracles);

    const fs::path root = fs::absolute(work);
    PipelineRun first, second;
    try {
        first = run_pipeline(source, root / "run_a");
        second = run_pipeline(source, root / "run_b");
    } catch (const std::exception& e) {
        first.failure = second.failure = e.what();
    }
    report(5, "dense vs sparse table retrieval", [&] { return retrieval_analogue(first); });
    report(6, "cell ranking and knowledge ablation", [&] { return dialogue_analogue(first); });
    report(7, "determinism", [&] { return determinism(first, second); });
    report(8, "service contract", [&] { return service_contract(first); });
    return all ? 0 : 1;
}
