#include "grounder/service.hpp"

#include <charconv>

#include <httplib.h>

#include "grounder/error.hpp"

namespace grounder {

using nlohmann::json;

std::pair<std::string, int> parse_bind_address(std::string_view address) {
    const auto colon = address.rfind(':');
    if (colon == std::string_view::npos) throw ArgumentError("bind address must be host:port");
    std::string host(address.substr(0, colon));
    if (host.empty()) host = "127.0.0.1";
    const auto port_text = address.substr(colon + 1);
    int port = -1;
    const auto [end, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc() || end != port_text.data() + port_text.size() || port < 0 || port > 65535) {
        throw ArgumentError("invalid port in bind address '" + std::string(address) + "'");
    }
    return {host, port};
}

struct HttpServer::Impl {
    Impl(ChatService& c, ServiceDefaults d) : chat(c), defaults(std::move(d)) {}

    ChatService& chat;
    ServiceDefaults defaults;
    httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

// Maps the library's exception types onto HTTP status codes.
template <class Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const NotFoundError& e) {
            reply(res, 404, {{"error", e.what()}});
        } catch (const ArgumentError& e) {
            reply(res, 400, {{"error", e.what()}});
        } catch (const json::exception& e) {
            reply(res, 400, {{"error", std::string("bad request body: ") + e.what()}});
        } catch (const ProviderError& e) {
            reply(res, 502, {{"error", e.what()}});
        } catch (const ServiceUnavailable& e) {
            reply(res, 503, {{"error", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", e.what()}});
        }
    };
}

json turn_payload(const ChatService::PostResult& r) {
    json knowledge = json::array();
    for (const auto& k : r.turn.knowledge) knowledge.push_back(to_json(k));
    return {{"response", r.turn.response},
            {"table_id", r.turn.table_id},
            {"knowledge", knowledge},
            {"turn_index", r.turn_index}};
}

}  // namespace

HttpServer::HttpServer(ChatService& chat, ServiceDefaults defaults, std::filesystem::path ui_dir)
    : impl_(std::make_unique<Impl>(chat, std::move(defaults))) {
    auto& s = impl_->server;
    auto* self = impl_.get();

    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
    s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Get("/api/health", guarded([self](const httplib::Request&, httplib::Response& res) {
              const auto& e = self->chat.engine();
              reply(res, 200,
                    {{"status", "ok"},
                     {"tables", e.corpus.size()},
                     {"index", e.index ? json(e.index->fingerprint()) : json(nullptr)},
                     {"ranker", e.ranker ? json(e.ranker->fingerprint()) : json(nullptr)},
                     {"sessions", self->chat.session_ids().size()}});
          }));

    s.Post("/api/sessions", guarded([self](const httplib::Request& req, httplib::Response& res) {
               const json body = req.body.empty() ? json::object() : json::parse(req.body);
               const auto mode = body.contains("mode") ? KnowledgeMode::parse(body.at("mode").get<std::string>())
                                                       : self->defaults.mode;
               const auto provider = body.value("provider", self->defaults.provider);
               reply(res, 201, {{"session_id", self->chat.create_session(mode, provider)}});
           }));

    s.Post(R"(/api/sessions/([0-9a-f]+)/messages)",
           guarded([self](const httplib::Request& req, httplib::Response& res) {
               const json body = json::parse(req.body);
               const auto query = body.at("query").get<std::string>();
               reply(res, 200, turn_payload(self->chat.post_message(req.matches[1], query)));
           }));

    s.Get(R"(/api/sessions/([0-9a-f]+))", guarded([self](const httplib::Request& req, httplib::Response& res) {
              reply(res, 200, self->chat.get_session(req.matches[1]).to_json());
          }));

    s.Get(R"(/api/tables/([^/]+))", guarded([self](const httplib::Request& req, httplib::Response& res) {
              reply(res, 200, to_json(self->chat.engine().corpus.at(req.matches[1].str())));
          }));

    if (!ui_dir.empty() && std::filesystem::is_directory(ui_dir)) s.set_mount_point("/ui", ui_dir.string());
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& s = impl_->server;
    const int bound = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace grounder
