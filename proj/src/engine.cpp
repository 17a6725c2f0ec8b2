#include "grounder/engine.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "grounder/error.hpp"

namespace grounder {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ArgumentError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ArgumentError("unknown key '" + key + "' in " + where);
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    return p.is_absolute() ? p : (base / p).lexically_normal();
}

void require_file(const std::filesystem::path& path, const std::string& what, const std::string& hint) {
    if (!std::filesystem::exists(path)) {
        throw DataError(what + " not found at " + path.string() + " (" + hint + ")");
    }
}

}  // namespace

HttpProviderConfig ResponderSettings::http_config() const {
    auto c = HttpProviderConfig::from_env();
    c.model = llm_model;
    c.max_tokens = max_tokens;
    c.temperature = temperature;
    c.timeout = std::chrono::milliseconds(timeout_ms);
    c.max_in_flight = max_in_flight;
    return c;
}

AppConfig AppConfig::defaults(const std::filesystem::path& base_dir) { return from_json(json::object(), base_dir); }

AppConfig AppConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    reject_unknown(j, {"seed", "paths", "retriever", "ranker", "bm25", "responder", "service"}, "config");
    AppConfig c;
    try {
        c.seed = j.value("seed", c.seed);

        const json paths = j.value("paths", json::object());
        reject_unknown(paths,
                       {"tables", "retrieval_train", "retrieval_test", "dialogues_train", "dialogues_test",
                        "stopwords", "few_shot", "artifacts"},
                       "paths");
        auto path_of = [&](const char* key, const std::filesystem::path& fallback) {
            return resolve(base_dir, paths.contains(key) ? std::filesystem::path(paths.at(key).get<std::string>())
                                                         : fallback);
        };
        c.tables = path_of("tables", c.tables);
        c.retrieval_train = path_of("retrieval_train", c.retrieval_train);
        c.retrieval_test = path_of("retrieval_test", c.retrieval_test);
        c.dialogues_train = path_of("dialogues_train", c.dialogues_train);
        c.dialogues_test = path_of("dialogues_test", c.dialogues_test);
        c.stopwords = path_of("stopwords", c.stopwords);
        c.few_shot = path_of("few_shot", c.few_shot);
        c.artifacts = path_of("artifacts", c.artifacts);

        // Training sections inherit the global seed unless they set their own.
        for (auto [key, target] : {std::pair{"retriever", &c.retriever}, std::pair{"ranker", &c.ranker}}) {
            json section = j.value(key, json::object());
            if (!section.is_object()) throw ArgumentError(std::string(key) + " must be a JSON object");
            if (!section.contains("seed")) section["seed"] = c.seed;
            *target = TrainConfig::from_json(section);
        }

        const json bm25 = j.value("bm25", json::object());
        reject_unknown(bm25, {"k1", "b"}, "bm25");
        c.bm25.k1 = bm25.value("k1", c.bm25.k1);
        c.bm25.b = bm25.value("b", c.bm25.b);

        const json r = j.value("responder", json::object());
        reject_unknown(r,
                       {"mode", "provider", "table_source", "history_max_turns", "knowledge_char_budget", "llm_model",
                        "max_tokens", "temperature", "timeout_ms", "max_in_flight"},
                       "responder");
        auto& rs = c.responder;
        if (r.contains("mode")) rs.mode = KnowledgeMode::parse(r.at("mode").get<std::string>());
        rs.provider = r.value("provider", rs.provider);
        if (rs.provider != "mock" && rs.provider != "http") throw ArgumentError("responder.provider must be mock|http");
        if (r.contains("table_source")) rs.table_source = parse_table_source(r.at("table_source").get<std::string>());
        rs.history_max_turns = r.value("history_max_turns", rs.history_max_turns);
        rs.knowledge_char_budget = r.value("knowledge_char_budget", rs.knowledge_char_budget);
        rs.llm_model = r.value("llm_model", rs.llm_model);
        rs.max_tokens = r.value("max_tokens", rs.max_tokens);
        rs.temperature = r.value("temperature", rs.temperature);
        rs.timeout_ms = r.value("timeout_ms", rs.timeout_ms);
        rs.max_in_flight = r.value("max_in_flight", rs.max_in_flight);
        if (rs.knowledge_char_budget == 0) throw ArgumentError("responder.knowledge_char_budget must be >= 1");

        const json s = j.value("service", json::object());
        reject_unknown(s, {"bind", "data_dir", "ui_dir"}, "service");
        c.service.bind = s.value("bind", c.service.bind);
        c.service.data_dir = resolve(base_dir, s.value("data_dir", c.service.data_dir.string()));
        c.service.ui_dir = resolve(base_dir, s.value("ui_dir", c.service.ui_dir.string()));
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("config: ") + e.what());
    }
    return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return from_json(j, std::filesystem::absolute(path).parent_path());
}

void AppConfig::override_seed(std::uint64_t value) {
    seed = value;
    retriever.seed = value;
    ranker.seed = value;
}

void AppConfig::apply_env() {
    if (const char* dir = std::getenv("GROUNDER_DATA_DIR"); dir && *dir) service.data_dir = dir;
    if (const char* bind = std::getenv("GROUNDER_BIND_ADDR"); bind && *bind) service.bind = bind;
}

Engine Engine::load(const AppConfig& config, Parts parts) {
    Engine e;
    require_file(config.corpus_path(), "ingested corpus", "run `grounder ingest` first");
    e.corpus = Corpus(load_corpus(config.corpus_path()));
    if (parts.dense) {
        require_file(config.retriever_path(), "retriever model", "run `grounder train-retriever` first");
        require_file(config.index_path(), "dense index", "run `grounder build-index` first");
        e.retriever = DualEncoder::load(config.retriever_path());
        e.index = DenseIndex::load(config.index_path(), e.retriever->fingerprint(), parts.force);
        if (e.index->size() != e.corpus.size()) {
            throw DataError("dense index covers " + std::to_string(e.index->size()) + " tables but the corpus has " +
                            std::to_string(e.corpus.size()) + " (run `grounder build-index`)");
        }
    }
    if (parts.bm25) {
        require_file(config.bm25_path(), "BM25 index", "run `grounder ingest` first");
        e.bm25 = Bm25Index::load(config.bm25_path());
    }
    if (parts.ranker) {
        require_file(config.ranker_path(), "ranker model", "run `grounder train-ranker` first");
        e.ranker = DualEncoder::load(config.ranker_path());
    }
    if (parts.responder) {
        e.stopwords = StopwordList::load(config.stopwords);
        e.few_shot = load_few_shot(config.few_shot);
    }
    e.history_max_turns = config.responder.history_max_turns;
    e.knowledge_char_budget = config.responder.knowledge_char_budget;
    return e;
}

PipelineContext Engine::context(GenerationProvider* provider) const {
    PipelineContext ctx;
    ctx.corpus = &corpus;
    ctx.retriever = retriever ? &*retriever : nullptr;
    ctx.index = index ? &*index : nullptr;
    ctx.bm25 = bm25 ? &*bm25 : nullptr;
    ctx.ranker = ranker ? &*ranker : nullptr;
    ctx.stopwords = stopwords ? &*stopwords : nullptr;
    ctx.few_shot = &few_shot;
    ctx.provider = provider;
    ctx.history_max_turns = history_max_turns;
    ctx.knowledge_char_budget = knowledge_char_budget;
    return ctx;
}

}  // namespace grounder
