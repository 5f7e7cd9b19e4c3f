#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crowd/behaviors.hpp"
#include "crowd/marker_field.hpp"
#include "crowd/rng.hpp"
#include "crowd/scenario.hpp"
#include "crowd/snapshot.hpp"

namespace crowd {

enum class EngineCommandKind { TriggerMoshpit, TriggerCirclepit, StopBehavior };

const char* to_string(EngineCommandKind kind);
EngineCommandKind engine_command_from_string(std::string_view s);

/// A behavior command addressed to one area of effect ("aoe0", "aoe1", ...).
struct EngineCommand {
    EngineCommandKind kind = EngineCommandKind::TriggerMoshpit;
    std::string behavior_id;
    bool operator==(const EngineCommand&) const = default;
};

struct CommandOutcome {
    bool accepted = true;
    std::string error;
};

/// Command fed to a headless run at a fixed simulation time.
struct ScheduledCommand {
    double time = 0.0;
    EngineCommand command;
};

std::string behavior_id(int aoe_index);
/// -1 when `id` is not of the form "aoe<N>".
int parse_behavior_id(std::string_view id);

/// Per-participant angular progress around a circlepit center.
struct LapTracker {
    double cumulative_angle = 0.0;  // radians, counter-clockwise positive
    double window_angle = 0.0;
    Vec2 window_origin;
    int window_fill = 0;
    int windows = 0;
    int ccw_windows = 0;
    /// Windows whose net displacement fell below half of max_speed * window.
    int blocked_windows = 0;
    int active_steps = 0;
    bool operator==(const LapTracker&) const = default;
};

struct LapCount {
    AgentId agent = 0;
    double laps = 0.0;
    int windows = 0;
    int ccw_windows = 0;
    double active_seconds = 0.0;
    /// Covered at least half of max_speed in every full window.
    bool unobstructed = false;
};

struct BehaviorMetrics {
    std::string id;
    PitKind kind = PitKind::Moshpit;
    PitPhase final_phase = PitPhase::Idle;
    int realized_participants = 0;
    int selected_participants = 0;
    double open_space_radius = 0.0;
    int active_steps = 0;
    /// Active steps whose open-space radius was at least half the area radius.
    int open_steps = 0;
    std::vector<LapCount> laps;

    double open_fraction() const { return active_steps ? double(open_steps) / active_steps : 0.0; }
};

struct MetricsReport {
    std::int64_t steps = 0;
    double sim_time = 0.0;
    std::vector<BehaviorMetrics> behaviors;
    double min_pairwise_agent_distance = 0.0;
    double queue_inversions = 0.0;
    int queue_completed = 0;
    int agents_spawned = 0;
    int agents_despawned = 0;
};

std::string to_json(const MetricsReport& report);

/// Normalized Kendall distance between two rankings of the same items:
/// discordant pairs / all pairs. Tied pairs are never discordant. 0 with
/// fewer than two items.
double kendall_distance(std::span<const std::int64_t> first, std::span<const std::int64_t> second);

/// Ranks agents by when they first cross the queue entry line and by when
/// they first reach their final goal; scores the two orders.
class QueueTracker {
public:
    QueueTracker() = default;
    explicit QueueTracker(QueueMetricConfig line) : line_(line) {}

    /// One step of motion from `from` to `to`.
    void observe_move(AgentId id, Vec2 from, Vec2 to, std::int64_t step);
    void observe_arrival(AgentId id, std::int64_t step);

    /// Agents with both an entry and an arrival.
    int completed() const;
    /// Kendall distance between entry and arrival order over completed agents.
    double inversions() const;

private:
    QueueMetricConfig line_;
    std::map<AgentId, std::int64_t> entry_step_;
    std::map<AgentId, std::int64_t> arrival_step_;
};

struct SimState {
    std::int64_t step_index = 0;
    double dt = 1.0 / 30.0;
    std::vector<Agent> agents;  // ascending id
    std::shared_ptr<const MarkerField> field;
    std::vector<PitBehaviorState> behaviors;
    Rng spawn_rng;
    Rng selection_rng;
    std::vector<std::int64_t> last_spawn_step;
    AgentId next_agent_id = 0;

    double sim_time() const { return static_cast<double>(step_index) * dt; }
};

/// Canonical JSON text of the full state (agents, markers, behaviors, RNG
/// streams, spawn clocks).
std::string serialize_state(const SimState& state);

struct EngineOptions {
    /// Run the per-step invariant sweep; throws std::logic_error naming the
    /// step and agent on violation.
    bool check_invariants =
#ifdef NDEBUG
        false;
#else
        true;
#endif
};

/// Fixed-timestep simulation. One step runs, in order:
///   1. apply commands      2. spawn due agents     3. assign marker ownership
///   4. step behaviors      5. move agents          6. metrics     7. snapshot
class Engine {
public:
    explicit Engine(ScenarioConfig config, EngineOptions options = {});

    const ScenarioConfig& config() const { return config_; }
    const SimState& state() const { return state_; }

    /// Validates a command against the current state without applying it.
    CommandOutcome check(const EngineCommand& command) const;

    FrameSnapshot step(const std::vector<EngineCommand>& commands = {},
                       std::vector<CommandOutcome>* outcomes = nullptr);

    FrameSnapshot snapshot() const;
    MetricsReport report() const;

    /// Window used by the "last second" metrics: round(1/dt) steps.
    int window_steps() const { return window_; }

    /// Throws std::logic_error on the first violated invariant.
    void check_invariants() const;

private:
    CommandOutcome apply(const EngineCommand& command);
    void spawn(int area_index, int count);
    double open_space(int behavior_index) const;
    double min_agent_distance() const;
    void track_laps(const std::vector<Vec2>& before);

    ScenarioConfig config_;
    EngineOptions options_;
    SimState state_;
    std::vector<PitContext> pits_;
    std::vector<Vec2> final_goals_;  // per spawn area
    int window_ = 30;

    // metric accumulators
    std::vector<std::map<AgentId, LapTracker>> laps_;
    std::vector<int> active_steps_;
    std::vector<int> open_steps_;
    std::vector<int> selected_;
    std::vector<double> last_open_space_;
    std::vector<int> last_realized_;
    std::vector<Vec2> last_displacements_;
    double min_distance_seen_ = INFINITY;
    double last_min_distance_ = 0.0;
    std::optional<QueueTracker> queue_;
    int spawned_ = 0;
    int despawned_ = 0;
};

/// Steps needed to cover `duration`: ceil(duration / dt).
std::int64_t steps_for(double duration, double dt);
/// Step on which a command scheduled at `time` is applied (>= 1).
std::int64_t step_for_time(double time, double dt);

using FrameSink = std::function<void(const FrameSnapshot&)>;

/// Headless run: ceil(duration/dt) steps with the timeline's commands fed at
/// their scheduled steps. Each frame goes to `sink` when given.
MetricsReport run(const ScenarioConfig& config, const std::vector<ScheduledCommand>& timeline,
                  double duration, const FrameSink& sink = {}, EngineOptions options = {});

}  // namespace crowd
