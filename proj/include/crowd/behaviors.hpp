#pragma once

#include <map>
#include <span>
#include <vector>

#include "crowd/agent_dynamics.hpp"
#include "crowd/rng.hpp"
#include "crowd/scenario.hpp"

namespace crowd {

enum class PitKind { Moshpit, Circlepit };
enum class PitPhase { Idle, Opening, Active, Ending };

const char* to_string(PitKind kind);
const char* to_string(PitPhase phase);

/// Lifecycle of one moshpit or circlepit over one area of effect.
///
///   Idle --trigger--> Opening --time_to_start--> Active --stop--> Ending --> Idle
///
/// Openers are every untagged agent inside the area at trigger time; they
/// are pushed away from the center (repel mode) and hold that ring until the
/// behavior ends. Participants are drawn from the openers nearest the center
/// once the space has opened.
struct PitBehaviorState {
    int aoe_index = 0;
    PitKind kind = PitKind::Moshpit;
    PitPhase phase = PitPhase::Idle;
    /// Steps spent in the current phase.
    int phase_steps = 0;
    std::vector<AgentId> openers;       // ascending
    std::vector<AgentId> participants;  // ascending
    std::map<AgentId, MotionMode> participant_modes;

    double phase_elapsed(double dt) const { return phase_steps * dt; }
    bool operator==(const PitBehaviorState&) const = default;
};

/// Resolved geometry and timing for one area of effect.
struct PitContext {
    AreaOfEffect aoe;
    Vec2 center_goal;
    std::vector<Vec2> ring;
    double goal_distance_threshold = 1.0;
    double dt = 1.0 / 30.0;

    static PitContext from(const ScenarioConfig& config, int aoe_index);
};

/// Participants are drawn uniformly from this many × number_agents_pit
/// openers nearest the center.
inline constexpr int kSelectionPoolFactor = 2;

/// Starts a behavior. `agents` must be sorted by id. Throws BehaviorBusy
/// unless the state is Idle.
void trigger(PitBehaviorState& state, PitKind kind, std::span<Agent> agents, const PitContext& ctx);

/// Advances one step. No-op while Idle.
void step_behavior(PitBehaviorState& state, std::span<Agent> agents, const PitContext& ctx, Rng& selection);

/// Requests the end of an Opening or Active behavior; restoration happens on
/// the next step_behavior. No-op otherwise.
void stop(PitBehaviorState& state);

/// Participants that moved within the last `window_steps` steps, given each
/// agent's last step with nonzero displacement.
int realized_participants(const PitBehaviorState& state, std::span<const Agent> agents,
                          std::int64_t current_step, int window_steps);

/// Drops a despawned agent from the behavior's sets.
void forget_agent(PitBehaviorState& state, AgentId id);

/// Index of the ring goal nearest `p` (lowest index on ties).
std::size_t nearest_goal_index(std::span<const Vec2> goals, Vec2 p);

/// Agent lookup in an id-sorted list; nullptr when absent.
Agent* find_agent(std::span<Agent> agents, AgentId id);
const Agent* find_agent(std::span<const Agent> agents, AgentId id);

}  // namespace crowd
