#include "grounder/cli.hpp"

#include <csignal>
#include <iostream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "grounder/dense_index.hpp"
#include "grounder/engine.hpp"
#include "grounder/error.hpp"
#include "grounder/evaluation.hpp"
#include "grounder/service.hpp"
#include "grounder/session.hpp"
#include "grounder/training.hpp"

namespace grounder {

using nlohmann::json;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool force = false;

    std::string tables;
    std::string dialogues;
    std::string pairs;
    std::string cases;
    std::string sidecar;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::string query;
    std::size_t k = 10;
    bool sparse = false;
    std::string mode;
    std::string tr;
    std::string provider;
    std::string format = "json";
    bool plain = false;
    std::string bind;
    std::string data_dir;
};

AppConfig resolve_config(const Options& o) {
    AppConfig c;
    if (!o.config_path.empty()) {
        c = AppConfig::load(o.config_path);
    } else if (std::filesystem::exists("grounder.json")) {
        c = AppConfig::load("grounder.json");
    } else {
        c = AppConfig::defaults(std::filesystem::current_path());
    }
    if (o.seed) c.override_seed(*o.seed);
    c.apply_env();
    return c;
}

void emit(std::ostream& out, const json& j) { out << j.dump() << "\n" << std::flush; }

std::unique_ptr<GenerationProvider> provider_for(const std::string& kind, const AppConfig& c) {
    if (kind == "mock") return std::make_unique<MockProvider>();
    if (kind == "http") return std::make_unique<HttpProvider>(c.responder.http_config());
    throw ArgumentError("unknown provider '" + kind + "' (expected mock|http)");
}

void validate_dialogues(const std::vector<DialogueRecord>& dialogues, const Corpus& corpus) {
    for (const auto& d : dialogues) {
        const auto pos = corpus.position(d.gold_table_id);
        if (!pos) throw DataError("dialogue '" + d.dialogue_id + "' references unknown table '" + d.gold_table_id + "'");
        const auto& t = corpus[*pos];
        for (const auto& turn : d.turns) {
            for (const auto& c : turn.gold_cells) {
                if (c.table_id != t.table_id || c.row >= t.row_count() || c.col >= t.col_count()) {
                    throw DataError("dialogue '" + d.dialogue_id + "' has a gold cell outside table '" + t.table_id + "'");
                }
            }
        }
    }
}

void emit_reports(std::ostream& out, const std::vector<MetricReport>& reports, const std::string& format) {
    if (format == "json" || format == "both") {
        for (const auto& r : reports) emit(out, r.to_json());
    }
    if (format == "table" || format == "both") out << format_report_table(reports);
}

int cmd_ingest(const Options& o, const AppConfig& c, std::ostream& out) {
    const std::filesystem::path tables_path = o.tables.empty() ? c.tables : std::filesystem::path(o.tables);
    Corpus corpus(load_corpus(tables_path));
    std::size_t dialogue_count = 0;
    if (!o.dialogues.empty()) {
        const auto dialogues = load_dialogues(o.dialogues);
        validate_dialogues(dialogues, corpus);
        dialogue_count = dialogues.size();
    }
    std::filesystem::create_directories(c.artifacts);
    save_corpus(corpus.tables(), c.corpus_path());
    Bm25Index::build(corpus, c.bm25).save(c.bm25_path());
    emit(out, {{"tables", corpus.size()},
               {"dialogues", dialogue_count},
               {"corpus", c.corpus_path().string()},
               {"bm25", c.bm25_path().string()}});
    return kExitOk;
}

TrainConfig with_overrides(TrainConfig t, const Options& o) {
    if (o.epochs) t.epochs = *o.epochs;
    if (o.lr) t.lr_peak = *o.lr;
    t.validate();
    return t;
}

EpochCallback epoch_logger(std::ostream& out, const std::filesystem::path& log_path) {
    auto log = std::make_shared<std::ofstream>(log_path, std::ios::trunc);
    if (!*log) throw DataError("cannot write training log " + log_path.string());
    return [&out, log](std::size_t epoch, double loss) {
        const json line = {{"epoch", epoch}, {"mean_loss", loss}};
        *log << line.dump() << "\n" << std::flush;
        emit(out, line);
    };
}

int cmd_train_retriever(const Options& o, const AppConfig& c, std::ostream& out) {
    const auto engine = Engine::load(c, {});
    const auto config = with_overrides(c.retriever, o);
    const auto pairs = load_retrieval_pairs(o.pairs.empty() ? c.retrieval_train : std::filesystem::path(o.pairs));
    auto result = train_retriever(initial_model(config), pairs, engine.corpus, config,
                                  epoch_logger(out, c.artifacts / "retriever_train_log.jsonl"));
    result.model.save(c.retriever_path());
    emit(out, {{"model", c.retriever_path().string()},
               {"fingerprint", result.model.fingerprint()},
               {"pairs", result.examples},
               {"steps", result.steps},
               {"config", config.to_json()}});
    return kExitOk;
}

int cmd_train_ranker(const Options& o, const AppConfig& c, std::ostream& out, std::ostream& err) {
    const auto engine = Engine::load(c, {});
    const auto config = with_overrides(c.ranker, o);
    const auto dialogues = load_dialogues(o.dialogues.empty() ? c.dialogues_train : std::filesystem::path(o.dialogues));
    auto result = train_ranker(initial_model(config), dialogues, engine.corpus, config,
                               epoch_logger(out, c.artifacts / "ranker_train_log.jsonl"));
    if (result.skipped_turns > 0) {
        err << "warning: " << result.skipped_turns << " turn(s) skipped: every cell of the table is gold\n";
    }
    if (result.examples == 0) err << "warning: no trainable turns; the saved model is the initialization\n";
    result.model.save(c.ranker_path());
    emit(out, {{"model", c.ranker_path().string()},
               {"fingerprint", result.model.fingerprint()},
               {"triplets", result.examples},
               {"skipped_turns", result.skipped_turns},
               {"steps", result.steps},
               {"config", config.to_json()}});
    return kExitOk;
}

int cmd_build_index(const Options& o, const AppConfig& c, std::ostream& out) {
    const auto engine = Engine::load(c, {});
    if (!std::filesystem::exists(c.retriever_path())) {
        throw DataError("retriever model not found at " + c.retriever_path().string() +
                        " (run `grounder train-retriever` first)");
    }
    const auto model = DualEncoder::load(c.retriever_path());
    std::optional<std::unordered_map<std::string, EmbeddingVector>> sidecar;
    if (!o.sidecar.empty()) sidecar = load_embedding_sidecar(o.sidecar, model.dims());
    const auto index = DenseIndex::build(model, engine.corpus, sidecar ? &*sidecar : nullptr);
    index.save(c.index_path());
    emit(out, {{"index", c.index_path().string()},
               {"items", index.size()},
               {"dims", index.dims()},
               {"fingerprint", index.fingerprint()},
               {"sidecar_items", sidecar ? sidecar->size() : 0}});
    return kExitOk;
}

int cmd_retrieve(const Options& o, const AppConfig& c, std::ostream& out) {
    if (o.k == 0) throw ArgumentError("-k must be >= 1");
    Engine::Parts parts;
    parts.force = o.force;
    parts.dense = !o.sparse;
    parts.bm25 = o.sparse;
    const auto engine = Engine::load(c, parts);
    const auto ranked = o.sparse ? engine.bm25->search(o.query, o.k)
                                 : engine.index->search(engine.retriever->encode_query(o.query), o.k);
    json results = json::array();
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        results.push_back({{"rank", i + 1}, {"table_id", ranked[i].id}, {"score", ranked[i].score}});
    }
    emit(out, {{"query", o.query}, {"retriever", o.sparse ? "bm25" : "dense"}, {"results", results}});
    return kExitOk;
}

int cmd_eval_retrieval(const Options& o, const AppConfig& c, std::ostream& out) {
    std::vector<TableSource> sources;
    if (o.tr == "all") {
        sources = {TableSource::dense, TableSource::bm25};
    } else {
        sources = {parse_table_source(o.tr)};
        if (sources[0] == TableSource::gold) throw ArgumentError("--tr must be dense, bm25 or all");
    }
    Engine::Parts parts;
    parts.force = o.force;
    for (auto s : sources) (s == TableSource::dense ? parts.dense : parts.bm25) = true;
    const auto engine = Engine::load(c, parts);
    const auto cases = load_retrieval_pairs(o.cases.empty() ? c.retrieval_test : std::filesystem::path(o.cases));
    std::vector<MetricReport> reports;
    for (auto s : sources) reports.push_back(run_retrieval_eval(engine.context(nullptr), cases, {s, 10}));
    emit_reports(out, reports, o.format);
    return kExitOk;
}

int cmd_eval_dialogue(const Options& o, const AppConfig& c, std::ostream& out) {
    const auto source = o.tr.empty() ? TableSource::gold : parse_table_source(o.tr);
    std::vector<KnowledgeMode> modes;
    if (o.mode == "all") {
        modes = {KnowledgeMode::nok(), KnowledgeMode::top(1), KnowledgeMode::top(3)};
    } else {
        modes = {o.mode.empty() ? c.responder.mode : KnowledgeMode::parse(o.mode)};
    }
    Engine::Parts parts;
    parts.force = o.force;
    parts.dense = source == TableSource::dense;
    parts.bm25 = source == TableSource::bm25;
    parts.ranker = true;
    parts.responder = true;
    const auto engine = Engine::load(c, parts);
    const auto dialogues = load_dialogues(o.dialogues.empty() ? c.dialogues_test : std::filesystem::path(o.dialogues));
    const auto provider = provider_for(o.provider.empty() ? c.responder.provider : o.provider, c);
    std::vector<MetricReport> reports;
    for (auto m : modes) reports.push_back(run_dialogue_eval(engine.context(provider.get()), dialogues, {m, source, 10}));
    emit_reports(out, reports, o.format);
    return kExitOk;
}

int cmd_chat(const Options& o, const AppConfig& c, std::istream& in, std::ostream& out) {
    const auto source = o.tr.empty() ? c.responder.table_source : parse_table_source(o.tr);
    if (source == TableSource::gold) throw ArgumentError("chat retrieves its table; use --tr dense or bm25");
    const auto mode = o.mode.empty() ? c.responder.mode : KnowledgeMode::parse(o.mode);
    Engine::Parts parts;
    parts.force = o.force;
    parts.dense = source == TableSource::dense;
    parts.bm25 = source == TableSource::bm25;
    parts.ranker = true;
    parts.responder = true;
    const auto engine = Engine::load(c, parts);
    const auto provider = provider_for(o.provider.empty() ? c.responder.provider : o.provider, c);
    const auto ctx = engine.context(provider.get());

    DialogueHistory history;
    std::optional<std::string> active;
    std::string line;
    if (o.plain) out << "grounder chat (" << mode.name() << "); /reset starts over, /quit exits\n";
    while (std::getline(in, line)) {
        if (line == "/quit") break;
        if (line == "/reset") {
            history = {};
            active.reset();
            continue;
        }
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        history.current_query = line;
        const auto turn = answer_turn(ctx, history, active, mode, source);
        active = turn.table_id;
        history.turns.emplace_back(line, turn.response);
        if (o.plain) {
            out << turn.response << "\n  [table " << turn.table_id << "]\n";
            for (std::size_t i = 0; i < turn.knowledge.size(); ++i) {
                out << "  K" << i + 1 << " (" << turn.knowledge[i].score << ") " << turn.knowledge[i].text << "\n";
            }
            out << std::flush;
        } else {
            json knowledge = json::array();
            for (const auto& k : turn.knowledge) knowledge.push_back(to_json(k));
            emit(out, {{"response", turn.response}, {"table_id", turn.table_id}, {"knowledge", knowledge}});
        }
    }
    return kExitOk;
}

int cmd_serve(const Options& o, AppConfig c, std::ostream& out, std::ostream& err) {
    if (!o.bind.empty()) c.service.bind = o.bind;
    if (!o.data_dir.empty()) c.service.data_dir = o.data_dir;
    const auto [host, port] = parse_bind_address(c.service.bind);
    const auto source = c.responder.table_source == TableSource::gold ? TableSource::dense : c.responder.table_source;
    Engine::Parts parts;
    parts.force = o.force;
    parts.dense = source == TableSource::dense;
    parts.bm25 = source == TableSource::bm25;
    parts.ranker = true;
    parts.responder = true;
    const auto engine = Engine::load(c, parts);
    const auto settings = c.responder;
    ChatService chat(engine, c.service.data_dir, source,
                     [settings](const std::string& kind) -> std::unique_ptr<GenerationProvider> {
                         if (kind == "mock") return std::make_unique<MockProvider>();
                         if (kind == "http") return std::make_unique<HttpProvider>(settings.http_config());
                         throw ArgumentError("unknown provider '" + kind + "'");
                     });
    HttpServer server(chat, {c.responder.mode, c.responder.provider}, c.service.ui_dir);

    // Signals are taken synchronously by a watcher thread so shutdown runs
    // outside signal-handler context.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::thread([&server, signals] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    }).detach();

    const int bound = server.bind(host, port);
    emit(out, {{"listening", host + ":" + std::to_string(bound)},
               {"sessions_dir", (c.service.data_dir / "sessions").string()},
               {"restored_sessions", chat.session_ids().size()}});
    server.listen();
    chat.snapshot_all();
    err << "shutdown: " << chat.session_ids().size() << " session snapshot(s) written\n";
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"grounder: table retrieval, cell ranking and grounded responses for table conversations", "grounder"};
    app.set_help_all_flag("--help-all", "Print help for every subcommand");
    app.require_subcommand(1);
    app.add_option("-c,--config", o.config_path, "Config file (default: ./grounder.json if present)");
    app.add_option("--seed", o.seed, "Override every seed in the config");
    app.add_flag("--force", o.force, "Load a dense index even when its retriever fingerprint differs");

    auto* ingest = app.add_subcommand("ingest", "Validate tables/dialogues, copy the corpus and build the BM25 index");
    ingest->add_option("--tables", o.tables, "Table JSONL (default: paths.tables)");
    ingest->add_option("--dialogues", o.dialogues, "Dialogue JSONL to validate against the tables");

    auto* train_r = app.add_subcommand("train-retriever", "Train the query/table encoders with in-batch negatives");
    train_r->add_option("--pairs", o.pairs, "Query/gold-table JSONL (default: paths.retrieval_train)");
    train_r->add_option("--epochs", o.epochs, "Override retriever.epochs");
    train_r->add_option("--lr", o.lr, "Override retriever.lr_peak");

    auto* train_k = app.add_subcommand("train-ranker", "Train the history/cell encoders with the triplet margin loss");
    train_k->add_option("--dialogues", o.dialogues, "Dialogue JSONL (default: paths.dialogues_train)");
    train_k->add_option("--epochs", o.epochs, "Override ranker.epochs");
    train_k->add_option("--lr", o.lr, "Override ranker.lr_peak");

    auto* build = app.add_subcommand("build-index", "Embed every table with the trained retriever");
    build->add_option("--sidecar", o.sidecar, "JSONL of external embeddings {id, embedding} used instead of encode");

    auto* retrieve = app.add_subcommand("retrieve", "Rank tables for one query");
    retrieve->add_option("--query", o.query, "Query text")->required();
    retrieve->add_option("-k", o.k, "Number of tables to return")->capture_default_str();
    retrieve->add_flag("--sparse", o.sparse, "Use BM25 instead of the dense index");

    auto* eval_r = app.add_subcommand("eval-retrieval", "MRR@10, Top-1 and Top-3 of table retrieval");
    eval_r->add_option("--cases", o.cases, "Query/gold-table JSONL (default: paths.retrieval_test)");
    o.tr = "all";
    eval_r->add_option("--tr", o.tr, "Retriever: dense|bm25|all")->capture_default_str();
    eval_r->add_option("--format", o.format, "Output: json|table|both")
        ->check(CLI::IsMember({"json", "table", "both"}))
        ->capture_default_str();

    auto* eval_d = app.add_subcommand("eval-dialogue", "Cell ranking accuracy and ROUGE precision of responses");
    eval_d->add_option("--dialogues", o.dialogues, "Dialogue JSONL (default: paths.dialogues_test)");
    eval_d->add_option("--mode", o.mode, "Knowledge: nok|top1|top3|all (default: responder.mode)");
    eval_d->add_option("--tr", o.tr, "Table source: gold|dense|bm25 (default: gold)");
    eval_d->add_option("--provider", o.provider, "Generation provider: mock|http (default: responder.provider)");
    eval_d->add_option("--format", o.format, "Output: json|table|both")
        ->check(CLI::IsMember({"json", "table", "both"}))
        ->capture_default_str();

    auto* chat = app.add_subcommand("chat", "Converse on stdin; prints each answer with its ranked knowledge");
    chat->add_option("--mode", o.mode, "Knowledge: nok|top1|top3 (default: responder.mode)");
    chat->add_option("--tr", o.tr, "Table source: dense|bm25 (default: responder.table_source)");
    chat->add_option("--provider", o.provider, "Generation provider: mock|http (default: responder.provider)");
    chat->add_flag("--plain", o.plain, "Human-readable output instead of JSON lines");

    auto* serve = app.add_subcommand("serve", "Run the HTTP chat service");
    serve->add_option("--bind", o.bind, "host:port (default: service.bind or GROUNDER_BIND_ADDR)");
    serve->add_option("--data-dir", o.data_dir, "Session storage (default: service.data_dir or GROUNDER_DATA_DIR)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    // The pre-set "all" default only applies to eval-retrieval.
    if (!eval_r->parsed() && o.tr == "all") o.tr.clear();
    const std::string name = app.get_subcommands().front()->get_name();
    try {
        const auto config = resolve_config(o);
        emit(out, {{"command", name}, {"seed", config.seed}});
        if (name == "ingest") return cmd_ingest(o, config, out);
        if (name == "train-retriever") return cmd_train_retriever(o, config, out);
        if (name == "train-ranker") return cmd_train_ranker(o, config, out, err);
        if (name == "build-index") return cmd_build_index(o, config, out);
        if (name == "retrieve") return cmd_retrieve(o, config, out);
        if (name == "eval-retrieval") return cmd_eval_retrieval(o, config, out);
        if (name == "eval-dialogue") return cmd_eval_dialogue(o, config, out);
        if (name == "chat") return cmd_chat(o, config, in, out);
        if (name == "serve") return cmd_serve(o, config, out, err);
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ProviderError& e) {
        err << "provider error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace grounder
