#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include "grounder/session.hpp"

namespace grounder {

// "host:port" or ":port" (host defaults to 127.0.0.1). Throws ArgumentError.
std::pair<std::string, int> parse_bind_address(std::string_view address);

struct ServiceDefaults {
    KnowledgeMode mode = KnowledgeMode::top(3);
    std::string provider = "mock";
};

// JSON API over a ChatService, plus static hosting of the chat UI under /ui/.
class HttpServer {
public:
    HttpServer(ChatService& chat, ServiceDefaults defaults = {}, std::filesystem::path ui_dir = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Binds the socket (port 0 picks a free port) and returns the bound port.
    // Throws std::runtime_error when the address is unavailable.
    int bind(const std::string& host, int port);
    // Serves until stop(); call bind() first.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace grounder
