#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "crowd/session.hpp"

namespace crowd {

struct ServeOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8080;  // 0 picks a free port
    /// Broadcast every Nth step.
    int every = 1;
    /// Wall-clock seconds per step at speed 1.
    double step_period = 1.0 / 30.0;
    /// Frames kept per client before the oldest is dropped.
    std::size_t client_queue = 64;
    /// Every stepped frame, one JSON line each (optional).
    std::string record_path;
    /// Written on stop (optional).
    std::string log_path;
    EngineOptions engine;
};

/// Websocket front end of a LiveSession. One thread runs network I/O, a
/// second one steps the engine.
class SessionServer {
public:
    SessionServer(ScenarioConfig config, std::string scenario_ref, ServeOptions options);
    ~SessionServer();

    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    /// Binds and starts both threads; throws std::system_error when the port
    /// is unavailable.
    void start();
    /// Stops stepping, closes connections and writes the session log.
    void stop();
    /// Blocks until SIGINT/SIGTERM, then stops.
    void wait_for_signal();

    unsigned short port() const;
    SessionLog log() const;
    const LiveSession& session() const;

private:
    struct Impl;
    friend class Client;
    std::unique_ptr<Impl> impl_;
};

}  // namespace crowd
