#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowd/engine.hpp"
#include "crowd/scenario.hpp"

namespace crowd {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::array<double, 5> kSpeedFactors{0.25, 0.5, 1.0, 2.0, 4.0};

enum class CommandKind { TriggerMoshpit, TriggerCirclepit, StopBehavior, Pause, Resume, SetSpeed };

/// Wire spelling: "TRIGGER_MOSHPIT", "PAUSE", ...
const char* to_string(CommandKind kind);
CommandKind command_kind_from_string(std::string_view s);

bool targets_behavior(CommandKind kind);

/// An operator command as it travels through the live session.
struct Command {
    CommandKind kind = CommandKind::Pause;
    std::optional<std::string> behavior_id;
    std::optional<double> factor;
    std::int64_t issued_at = 0;         // wall clock, ms since epoch
    std::int64_t applied_at_step = -1;  // stamped when applied
    bool operator==(const Command&) const = default;
};

/// Throws ParseError when a behavior command lacks its id or SET_SPEED has a
/// factor outside kSpeedFactors.
void validate(const Command& command);

/// Engine-level form of a behavior command; nullopt for session-only kinds.
std::optional<EngineCommand> to_engine_command(const Command& command);

/// Everything needed to reproduce a session's frame stream.
struct SessionLog {
    std::string scenario_ref;  // preset name or file path, informational
    ScenarioConfig scenario;   // embedded so replay does not depend on the file
    std::string record_ref;    // recorded frame stream, when one was written
    std::int64_t steps = 0;
    std::vector<Command> commands;  // applied commands in application order
};

std::string to_json(const SessionLog& log);
SessionLog session_log_from_json(std::string_view text);
SessionLog load_session_log(const std::string& path);

/// Re-runs a log. Behavior commands are fed at their applied step; pause,
/// resume and speed changes do not affect the stream and are skipped.
MetricsReport replay(const SessionLog& log, const FrameSink& sink = {}, EngineOptions options = {});

/// Parses one client->server wire message. Throws ParseError with a
/// human-readable reason.
Command parse_client_message(std::string_view text, std::int64_t now_ms);

std::string error_message(std::string_view reason);

/// One-time static description of the world sent to each new client.
std::string world_message(const Engine& engine);

/// A running simulation driven from outside: commands are queued from any
/// thread and applied at the next step boundary by tick().
class LiveSession {
public:
    using ClientId = std::uint64_t;

    struct Rejection {
        ClientId client = 0;
        std::string reason;
    };

    struct Tick {
        std::optional<FrameSnapshot> frame;  // empty while paused
        std::vector<Rejection> rejections;
    };

    LiveSession(ScenarioConfig config, std::string scenario_ref, EngineOptions options = {});

    /// Validates and queues. Returns the rejection reason when the command is
    /// refused outright (malformed, unknown behavior, behavior busy).
    std::optional<std::string> submit(Command command, ClientId client = 0);

    /// Drains the queue, then advances one step unless paused.
    Tick tick();

    bool paused() const;
    double speed() const;
    std::int64_t step_index() const;
    SessionLog log() const;
    std::string world() const;

private:
    struct Pending {
        Command command;
        ClientId client;
    };

    mutable std::mutex mutex_;
    Engine engine_;
    SessionLog log_;
    std::deque<Pending> queue_;
    bool paused_ = false;
    double speed_ = 1.0;
};

}  // namespace crowd
