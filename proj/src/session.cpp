#include "grounder/session.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>

#include "grounder/error.hpp"

namespace grounder {

using nlohmann::json;

json to_json(const KnowledgeItem& item) {
    return {{"cell", to_json(item.cell)}, {"score", item.score}, {"text", item.text}};
}

KnowledgeItem knowledge_item_from_json(const json& j) {
    return {cell_ref_from_json(j.at("cell")), j.at("score").get<double>(), j.at("text").get<std::string>()};
}

namespace {

json turn_to_json(const SessionTurn& t) {
    json knowledge = json::array();
    for (const auto& k : t.knowledge) knowledge.push_back(to_json(k));
    return {{"query", t.query}, {"response", t.response}, {"table_id", t.table_id}, {"knowledge", knowledge}};
}

SessionTurn turn_from_json(const json& j) {
    SessionTurn turn{j.at("query").get<std::string>(), j.at("response").get<std::string>(),
                     j.at("table_id").get<std::string>(), {}};
    for (const auto& k : j.at("knowledge")) turn.knowledge.push_back(knowledge_item_from_json(k));
    return turn;
}

}  // namespace

json DialogueSession::to_json() const {
    json turns_json = json::array();
    for (const auto& t : turns) turns_json.push_back(turn_to_json(t));
    return {{"session_id", session_id},
            {"created_at", created_at},
            {"mode", mode.name()},
            {"provider", provider},
            {"active_table_id", active_table_id ? json(*active_table_id) : json(nullptr)},
            {"turns", turns_json}};
}

DialogueSession DialogueSession::from_json(const json& j) {
    DialogueSession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.created_at = j.at("created_at").get<std::string>();
    s.mode = KnowledgeMode::parse(j.at("mode").get<std::string>());
    s.provider = j.at("provider").get<std::string>();
    if (const auto& a = j.at("active_table_id"); !a.is_null()) s.active_table_id = a.get<std::string>();
    for (const auto& t : j.at("turns")) s.turns.push_back(turn_from_json(t));
    return s;
}

std::string new_session_id() {
    static thread_local std::random_device device;
    std::string out;
    char buf[9];
    for (int i = 0; i < 4; ++i) {
        std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(device()));
        out += buf;
    }
    return out;
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool valid_session_id(const std::string& id) {
    return id.size() == 32 && std::all_of(id.begin(), id.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

}  // namespace

SessionStore::SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

void SessionStore::append(const std::string& session_id, const json& event) {
    if (!persistent()) return;
    const auto path = dir_ / (session_id + ".jsonl");
    const auto line = event.dump() + "\n";
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw DataError("cannot open session log " + path.string());
    const bool ok = ::write(fd, line.data(), line.size()) == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw DataError("cannot append to session log " + path.string());
}

void SessionStore::record_created(const DialogueSession& session) {
    append(session.session_id, {{"event", "created"},
                                {"session_id", session.session_id},
                                {"created_at", session.created_at},
                                {"mode", session.mode.name()},
                                {"provider", session.provider}});
}

void SessionStore::record_turn(const DialogueSession& session, std::size_t index) {
    append(session.session_id, {{"event", "turn"}, {"index", index}, {"turn", turn_to_json(session.turns.at(index))}});
}

void SessionStore::write_snapshot(const DialogueSession& session) {
    if (!persistent()) return;
    const auto path = dir_ / (session.session_id + ".snapshot.json");
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << session.to_json().dump() << "\n";
        if (!out) throw DataError("cannot write snapshot " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::vector<DialogueSession> SessionStore::load_all() const {
    std::vector<DialogueSession> out;
    if (!persistent() || !std::filesystem::exists(dir_)) return out;
    std::vector<std::filesystem::path> logs;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() == ".jsonl" && valid_session_id(entry.path().stem().string())) {
            logs.push_back(entry.path());
        }
    }
    std::sort(logs.begin(), logs.end());

    for (const auto& log : logs) {
        const auto id = log.stem().string();
        std::optional<DialogueSession> session;
        const auto snapshot = dir_ / (id + ".snapshot.json");
        try {
            if (std::filesystem::exists(snapshot)) {
                std::ifstream in(snapshot);
                session = DialogueSession::from_json(json::parse(in));
            }
        } catch (const std::exception& e) {
            throw DataError(snapshot.string() + ": " + e.what());
        }

        std::ifstream in(log);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const auto event = json::parse(line);
                const auto kind = event.at("event").get<std::string>();
                if (kind == "created") {
                    if (session) continue;
                    session = DialogueSession{event.at("session_id").get<std::string>(),
                                              event.at("created_at").get<std::string>(),
                                              KnowledgeMode::parse(event.at("mode").get<std::string>()),
                                              event.at("provider").get<std::string>(),
                                              std::nullopt,
                                              {}};
                } else if (kind == "turn") {
                    if (!session) throw DataError("turn before session creation");
                    const auto index = event.at("index").get<std::size_t>();
                    if (index < session->turns.size()) continue;  // already in the snapshot
                    if (index > session->turns.size()) throw DataError("missing turn " + std::to_string(session->turns.size()));
                    auto turn = turn_from_json(event.at("turn"));
                    if (!session->active_table_id) session->active_table_id = turn.table_id;
                    session->turns.push_back(std::move(turn));
                } else {
                    throw DataError("unknown event '" + kind + "'");
                }
            } catch (const json::exception& e) {
                throw DataError(log.string() + ":" + std::to_string(line_no) + ": " + e.what());
            } catch (const DataError& e) {
                throw DataError(log.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (session) out.push_back(std::move(*session));
    }
    return out;
}

struct ChatService::Entry {
    std::mutex mutex;
    std::condition_variable turn_done;
    std::uint64_t next_ticket = 0;
    std::uint64_t serving = 0;
    DialogueSession session;
};

ChatService::ChatService(const Engine& engine, std::filesystem::path data_dir, TableSource table_source,
                         ProviderFactory factory)
    : engine_(engine),
      table_source_(table_source),
      factory_(factory ? std::move(factory) : ProviderFactory([](const std::string& kind) { return make_provider(kind); })),
      store_(data_dir.empty() ? std::filesystem::path() : data_dir / "sessions") {
    for (auto& s : store_.load_all()) {
        auto e = std::make_unique<Entry>();
        e->session = std::move(s);
        const auto id = e->session.session_id;
        sessions_.emplace(id, std::move(e));
    }
}

ChatService::~ChatService() = default;

GenerationProvider& ChatService::provider(const std::string& kind) {
    std::lock_guard lock(providers_mutex_);
    auto it = providers_.find(kind);
    if (it == providers_.end()) {
        std::unique_ptr<GenerationProvider> p;
        try {
            p = factory_(kind);
        } catch (const ArgumentError& e) {
            if (kind == "mock" || kind == "http") throw ServiceUnavailable(e.what());
            throw;
        }
        it = providers_.emplace(kind, std::move(p)).first;
    }
    return *it->second;
}

ChatService::Entry& ChatService::entry(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + session_id + "'");
    return *it->second;
}

std::string ChatService::create_session(KnowledgeMode mode, const std::string& provider_kind) {
    if (provider_kind != "mock" && provider_kind != "http") {
        throw ArgumentError("unknown provider '" + provider_kind + "' (expected mock|http)");
    }
    const bool can_retrieve = table_source_ == TableSource::bm25 ? engine_.bm25.has_value()
                                                                 : engine_.retriever && engine_.index;
    if (!can_retrieve || !engine_.stopwords || (!mode.is_nok() && !engine_.ranker) ||
        (mode.is_nok() && engine_.few_shot.size() != 2)) {
        throw ServiceUnavailable("engine is not fully loaded (index, models or responder data missing)");
    }
    provider(provider_kind);

    auto e = std::make_unique<Entry>();
    e->session = DialogueSession{new_session_id(), utc_now(), mode, provider_kind, std::nullopt, {}};
    store_.record_created(e->session);
    const auto id = e->session.session_id;
    std::unique_lock lock(sessions_mutex_);
    sessions_.emplace(id, std::move(e));
    return id;
}

ChatService::PostResult ChatService::post_message(const std::string& session_id, const std::string& query) {
    if (query.find_first_not_of(" \t\r\n") == std::string::npos) throw ArgumentError("query is empty");
    Entry& e = entry(session_id);

    std::unique_lock lock(e.mutex);
    const auto ticket = e.next_ticket++;
    e.turn_done.wait(lock, [&] { return e.serving == ticket; });
    // Hand the session to the next ticket however this turn ends.
    struct Advance {
        Entry& e;
        std::unique_lock<std::mutex>& lock;
        ~Advance() {
            if (!lock.owns_lock()) lock.lock();
            ++e.serving;
            e.turn_done.notify_all();
        }
    } advance{e, lock};

    DialogueHistory history;
    for (const auto& t : e.session.turns) history.turns.emplace_back(t.query, t.response);
    history.current_query = query;
    const auto active = e.session.active_table_id;
    const auto mode = e.session.mode;
    auto& gen = provider(e.session.provider);

    // Readers may inspect the session while the provider works.
    lock.unlock();
    auto turn = answer_turn(engine_.context(&gen), history, active, mode, table_source_);
    lock.lock();

    e.session.turns.push_back({query, turn.response, turn.table_id, turn.knowledge});
    if (!e.session.active_table_id) e.session.active_table_id = turn.table_id;
    const auto index = e.session.turns.size() - 1;
    try {
        store_.record_turn(e.session, index);
    } catch (...) {
        e.session.turns.pop_back();
        if (index == 0) e.session.active_table_id.reset();
        throw;
    }
    return {std::move(turn), index};
}

DialogueSession ChatService::get_session(const std::string& session_id) const {
    Entry& e = entry(session_id);
    std::lock_guard lock(e.mutex);
    return e.session;
}

std::vector<std::string> ChatService::session_ids() const {
    std::shared_lock lock(sessions_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions_) ids.push_back(id);
    return ids;
}

void ChatService::snapshot_all() {
    for (const auto& id : session_ids()) store_.write_snapshot(get_session(id));
}

}  // namespace grounder
