#include "grounder/responder.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "grounder/error.hpp"

namespace grounder {

using nlohmann::json;

KnowledgeMode KnowledgeMode::parse(std::string_view name) {
    const auto lower = to_lower(name);
    if (lower == "nok") return nok();
    if (lower.starts_with("top") && lower.size() > 3) {
        std::size_t k = 0;
        for (char c : lower.substr(3)) {
            if (c < '0' || c > '9') throw ArgumentError("unknown mode '" + std::string(name) + "'");
            k = k * 10 + static_cast<std::size_t>(c - '0');
            if (k > 1000) throw ArgumentError("mode k too large");
        }
        if (k == 0) throw ArgumentError("top0 is not a mode; use nok");
        return top(k);
    }
    throw ArgumentError("unknown mode '" + std::string(name) + "' (expected nok|top1|top3)");
}

std::string KnowledgeMode::name() const { return is_nok() ? "nok" : "top" + std::to_string(k); }

std::vector<FewShotExample> load_few_shot(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open few-shot file: " + path.string());
    std::vector<FewShotExample> out;
    try {
        for (const auto& e : json::parse(in)) {
            out.push_back({e.at("dialogue").get<std::string>(), e.at("answer").get<std::string>()});
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return out;
}

void PromptSpec::validate() const {
    if (mode.is_nok()) {
        if (!knowledge.empty()) throw ArgumentError("NoK prompt must not carry knowledge");
        if (few_shot.size() != 2) throw ArgumentError("NoK prompt needs exactly 2 few-shot examples");
    } else if (knowledge.size() > mode.k) {
        throw ArgumentError("more knowledge lines than the mode allows");
    }
    if (history.current_query.empty()) throw ArgumentError("prompt needs a current query");
}

std::string truncate_utf8(std::string_view text, std::size_t max_bytes) {
    if (text.size() <= max_bytes) return std::string(text);
    std::size_t cut = max_bytes;
    // Back off over continuation bytes so the cut lands on a code point start.
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return std::string(text.substr(0, cut));
}

namespace {

std::string one_line(std::string s) {
    for (auto& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

}  // namespace

std::string build_prompt(const PromptSpec& spec, const StopwordList& stopwords) {
    spec.validate();
    std::string out = "Answer the last question about the table in one short sentence.\n\n";
    for (std::size_t i = 0; i < spec.few_shot.size(); ++i) {
        out += "Example " + std::to_string(i + 1) + ":\n";
        out += one_line(spec.few_shot[i].dialogue) + "\n";
        out += "A: " + one_line(spec.few_shot[i].answer) + "\n\n";
    }
    if (!spec.knowledge.empty()) {
        out += "Knowledge:\n";
        for (std::size_t i = 0; i < spec.knowledge.size(); ++i) {
            const auto compressed = remove_stopwords(one_line(spec.knowledge[i]), stopwords);
            out += "K" + std::to_string(i + 1) + ": " + truncate_utf8(compressed, spec.knowledge_char_budget) + "\n";
        }
        out += "\n";
    }
    out += one_line(history_text(spec.history, spec.history_max_turns)) + "\nA:";
    return out;
}

std::string mock_answer(std::string_view prompt) {
    constexpr std::string_view tag = "K1: ";
    std::size_t at = std::string_view::npos;
    for (std::size_t pos = 0; pos < prompt.size();) {
        if (prompt.substr(pos).starts_with(tag)) {
            at = pos + tag.size();
            break;
        }
        const auto nl = prompt.find('\n', pos);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (at == std::string_view::npos) return std::string(kMockFallback);

    auto line = prompt.substr(at, prompt.find('\n', at) - at);
    if (line.starts_with("[CELL]")) line.remove_prefix(6);
    if (const auto link = line.find(" ; "); link != std::string_view::npos) line = line.substr(0, link);
    const auto body = trim(line);
    const auto space = body.find(' ');
    if (space == std::string::npos) return std::string(kMockFallback);
    const auto header = body.substr(0, space);
    const auto value = trim(std::string_view(body).substr(space + 1));
    if (value.empty()) return std::string(kMockFallback);
    return "The " + header + " is " + value + ".";
}

std::string MockProvider::generate(const std::string& prompt) {
    if (prompt.empty()) throw ProviderError("empty prompt");
    return mock_answer(prompt);
}

HttpProviderConfig HttpProviderConfig::from_env() {
    HttpProviderConfig c;
    if (const char* base = std::getenv("GROUNDER_LLM_BASE_URL")) c.base_url = base;
    if (const char* key = std::getenv("GROUNDER_LLM_API_KEY")) c.api_key = key;
    return c;
}

void HttpProviderConfig::validate() const {
    if (base_url.empty()) throw ArgumentError("http provider needs a base URL (GROUNDER_LLM_BASE_URL)");
    if (!base_url.starts_with("http://") && !base_url.starts_with("https://")) {
        throw ArgumentError("base URL must start with http:// or https://");
    }
    if (max_attempts < 1) throw ArgumentError("max_attempts must be >= 1");
    if (max_in_flight < 1) throw ArgumentError("max_in_flight must be >= 1");
    if (max_tokens < 1) throw ArgumentError("max_tokens must be >= 1");
}

struct HttpProvider::Impl {
    explicit Impl(HttpProviderConfig c) : config(std::move(c)), slots(config.max_in_flight) {
        const auto scheme_end = config.base_url.find("://") + 3;
        const auto path_start = config.base_url.find('/', scheme_end);
        origin = config.base_url.substr(0, path_start);
        prefix = path_start == std::string::npos ? "" : config.base_url.substr(path_start);
        while (prefix.ends_with('/')) prefix.pop_back();
    }

    HttpProviderConfig config;
    std::string origin;
    std::string prefix;
    std::counting_semaphore<> slots;
    std::atomic<std::size_t> sent{0};
};

HttpProvider::HttpProvider(HttpProviderConfig config) {
    config.validate();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (config.base_url.starts_with("https://")) throw ArgumentError("this build has no TLS support");
#endif
    impl_ = std::make_unique<Impl>(std::move(config));
}

HttpProvider::~HttpProvider() = default;

std::size_t HttpProvider::requests_sent() const { return impl_->sent.load(); }

std::string HttpProvider::generate(const std::string& prompt) {
    if (prompt.empty()) throw ProviderError("empty prompt");
    const auto& c = impl_->config;
    const json body = {{"model", c.model}, {"prompt", prompt}, {"max_tokens", c.max_tokens},
                       {"temperature", c.temperature}};
    const auto payload = body.dump();
    const auto path = impl_->prefix + "/v1/completions";

    impl_->slots.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{impl_->slots};

    std::string last_error;
    auto backoff = c.initial_backoff;
    for (int attempt = 1; attempt <= c.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Client client(impl_->origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(c.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(c.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        if (!c.api_key.empty()) client.set_bearer_token_auth(c.api_key);

        ++impl_->sent;
        const auto res = client.Post(path, payload, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw ProviderError("provider rejected request: HTTP " + std::to_string(res->status));
        }
        try {
            const auto reply = json::parse(res->body);
            return trim(reply.at("choices").at(0).at("text").get<std::string>());
        } catch (const json::exception& e) {
            throw ProviderError(std::string("malformed provider response: ") + e.what());
        }
    }
    throw ProviderError("provider failed after " + std::to_string(c.max_attempts) + " attempts: " + last_error);
}

std::unique_ptr<GenerationProvider> make_provider(std::string_view kind) {
    if (kind == "mock") return std::make_unique<MockProvider>();
    if (kind == "http") return std::make_unique<HttpProvider>(HttpProviderConfig::from_env());
    throw ArgumentError("unknown provider '" + std::string(kind) + "' (expected mock|http)");
}

TableSource parse_table_source(std::string_view name) {
    if (name == "gold") return TableSource::gold;
    if (name == "dense") return TableSource::dense;
    if (name == "bm25") return TableSource::bm25;
    throw ArgumentError("unknown table source '" + std::string(name) + "' (expected gold|dense|bm25)");
}

std::string to_string(TableSource source) {
    switch (source) {
        case TableSource::gold: return "gold";
        case TableSource::dense: return "dense";
        case TableSource::bm25: return "bm25";
    }
    return "?";
}

std::string retrieve_table(const PipelineContext& ctx, TableSource source, std::string_view query) {
    switch (source) {
        case TableSource::dense: {
            if (!ctx.retriever || !ctx.index) throw DataError("dense retrieval needs a retriever model and index");
            return ctx.index->search(ctx.retriever->encode_query(query), 1)[0].id;
        }
        case TableSource::bm25: {
            if (!ctx.bm25) throw DataError("BM25 retrieval needs a BM25 index");
            return ctx.bm25->search(query, 1)[0].id;
        }
        case TableSource::gold: break;
    }
    throw ArgumentError("gold table source cannot retrieve; supply the active table");
}

TurnResult answer_turn(const PipelineContext& ctx, const DialogueHistory& history,
                       const std::optional<std::string>& active_table_id, KnowledgeMode mode,
                       TableSource source) {
    if (history.current_query.empty()) throw ArgumentError("query is empty");
    if (!ctx.corpus || !ctx.stopwords || !ctx.provider) throw ArgumentError("pipeline context is incomplete");

    TurnResult result;
    if (active_table_id) {
        result.table_id = *active_table_id;
    } else {
        result.table_id = retrieve_table(ctx, source, history.current_query);
        result.retrieved = true;
    }
    const auto& table = ctx.corpus->at(result.table_id);

    PromptSpec spec;
    spec.mode = mode;
    spec.history = history;
    spec.history_max_turns = ctx.history_max_turns;
    spec.knowledge_char_budget = ctx.knowledge_char_budget;
    if (mode.is_nok()) {
        if (!ctx.few_shot) throw ArgumentError("NoK mode needs few-shot examples");
        spec.few_shot = *ctx.few_shot;
    } else {
        if (!ctx.ranker) throw ArgumentError("knowledge modes need a ranker model");
        for (const auto& [cell, score] : rank_cells(*ctx.ranker, table, history, mode.k, ctx.history_max_turns)) {
            auto text = linearize_cell(table, cell);
            spec.knowledge.push_back(text);
            result.knowledge.push_back({cell, score, std::move(text)});
        }
    }
    result.prompt = build_prompt(spec, *ctx.stopwords);
    result.response = ctx.provider->generate(result.prompt);
    return result;
}

}  // namespace grounder
