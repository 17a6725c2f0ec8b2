#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "grounder/engine.hpp"
#include "grounder/responder.hpp"

namespace grounder {

struct SessionTurn {
    std::string query;
    std::string response;
    std::string table_id;
    std::vector<KnowledgeItem> knowledge;

    friend bool operator==(const SessionTurn&, const SessionTurn&) = default;
};

struct DialogueSession {
    std::string session_id;  // 32 lowercase hex digits
    std::string created_at;  // ISO-8601 UTC
    KnowledgeMode mode;
    std::string provider;
    std::optional<std::string> active_table_id;
    std::vector<SessionTurn> turns;

    nlohmann::json to_json() const;
    static DialogueSession from_json(const nlohmann::json& j);

    friend bool operator==(const DialogueSession&, const DialogueSession&) = default;
};

nlohmann::json to_json(const KnowledgeItem& item);
KnowledgeItem knowledge_item_from_json(const nlohmann::json& j);

// 128 random bits as 32 hex digits.
std::string new_session_id();

// Append-only JSONL event log per session ({dir}/{id}.jsonl) plus an
// optional snapshot ({dir}/{id}.snapshot.json). An empty dir keeps
// everything in memory.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path dir);

    void record_created(const DialogueSession& session);
    void record_turn(const DialogueSession& session, std::size_t index);
    void write_snapshot(const DialogueSession& session);

    // Snapshot first (if any), then log events past the snapshot.
    // Throws DataError on a corrupt log line.
    std::vector<DialogueSession> load_all() const;

    bool persistent() const { return !dir_.empty(); }

private:
    void append(const std::string& session_id, const nlohmann::json& event);

    std::filesystem::path dir_;
};

using ProviderFactory = std::function<std::unique_ptr<GenerationProvider>(const std::string& kind)>;

// Session-based conversation over a loaded engine. Posts to one session are
// served strictly in arrival order; distinct sessions proceed in parallel.
class ChatService {
public:
    // The engine must outlive the service and needs the dense (or bm25),
    // ranker and responder parts. The factory is asked for "mock" and "http".
    ChatService(const Engine& engine, std::filesystem::path data_dir, TableSource table_source = TableSource::dense,
                ProviderFactory factory = {});
    ~ChatService();

    // Throws ArgumentError on an unknown provider kind, ServiceUnavailable when
    // the engine lacks a required artifact or the provider cannot be built.
    std::string create_session(KnowledgeMode mode, const std::string& provider);

    struct PostResult {
        TurnResult turn;
        std::size_t turn_index = 0;
    };
    // Throws NotFoundError, ArgumentError (empty query), ProviderError (turn not recorded).
    PostResult post_message(const std::string& session_id, const std::string& query);

    DialogueSession get_session(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;

    // Writes a snapshot of every session (called on shutdown).
    void snapshot_all();

    const Engine& engine() const { return engine_; }

private:
    struct Entry;
    Entry& entry(const std::string& session_id) const;
    GenerationProvider& provider(const std::string& kind);

    const Engine& engine_;
    TableSource table_source_;
    ProviderFactory factory_;
    SessionStore store_;

    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::unique_ptr<Entry>> sessions_;

    std::mutex providers_mutex_;
    std::map<std::string, std::unique_ptr<GenerationProvider>> providers_;
};

// Engine is missing something a request needs (maps to HTTP 503).
class ServiceUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace grounder
