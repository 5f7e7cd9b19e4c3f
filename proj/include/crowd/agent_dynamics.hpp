#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crowd/geometry.hpp"
#include "crowd/marker_field.hpp"

namespace crowd {

enum class MotionMode { Attract, Repel };
enum class BehaviorTag { None, Opener, Participant };

const char* to_string(MotionMode mode);
const char* to_string(BehaviorTag tag);

/// Ordered goals with per-goal waits. `wait_remaining` is nonzero only while
/// the agent sits inside the threshold of the current goal.
struct GoalProgram {
    std::vector<Vec2> goals;
    std::vector<double> waits;
    double distance_threshold = 1.0;
    std::size_t cursor = 0;
    double wait_remaining = 0.0;
    bool looping = false;

    Vec2 current_goal() const { return goals[cursor]; }
    bool at_last_goal() const { return cursor + 1 == goals.size(); }
    bool operator==(const GoalProgram&) const = default;
};

/// Program with a single goal and no wait.
GoalProgram single_goal_program(Vec2 goal, double distance_threshold);

struct Agent {
    AgentId id = 0;
    Vec2 position;
    double radius = 1.0;
    double max_speed = 1.3;
    GoalProgram program;
    MotionMode mode = MotionMode::Attract;
    BehaviorTag tag = BehaviorTag::None;
    std::optional<GoalProgram> saved_program;
    /// Index of the behavior that tagged this agent, -1 when untagged.
    int behavior = -1;
    int spawn_area = -1;
    /// Last step on which the agent's displacement was nonzero, -1 if never.
    std::int64_t last_moved_step = -1;

    bool operator==(const Agent&) const = default;
};

struct MotionResult {
    Vec2 velocity;
    int captured = 0;
};

/// Angular marker weight: (1 + cos θ)/2 toward the goal, complemented in
/// repel mode. A zero offset gets the neutral 0.5.
double raw_weight(Vec2 goal_dir, Vec2 marker_offset, MotionMode mode);

/// Weighted mean of marker offsets, converted to a velocity over `dt` and
/// capped at the agent's max speed. No markers (or all-zero weights) means
/// the agent stays put.
MotionResult motion_vector(const Agent& agent, std::span<const Vec2> owned_markers, double dt);

enum class GoalEvent { None, Advanced, Completed };

struct GoalAdvance {
    GoalProgram program;
    GoalEvent event = GoalEvent::None;
};

/// Wait-and-advance rule for the current goal. `Completed` is reported when
/// the wait on the last goal of a non-looping program expires.
GoalAdvance advance_goal_program(const GoalProgram& program, Vec2 position, double dt);

struct StepContext {
    const MarkerField& field;
    const Ownership& ownership;
    std::span<const ConvexPolygon> obstacles;
    Rect bounds;
    double dt = 1.0 / 30.0;
};

struct AgentStep {
    Agent agent;
    Vec2 displacement;
    int captured = 0;
    GoalEvent event = GoalEvent::None;
};

/// Moves the agent toward its owned markers (the ones at `ownership_index`
/// in the step's ownership) and then advances its goal program. Motion that
/// would enter an obstacle stops just short of its boundary.
AgentStep step_agent(const Agent& agent, std::size_t ownership_index, const StepContext& ctx);

/// Clips a proposed move a→b so it never enters an obstacle's interior or
/// leaves the bounds.
Vec2 clip_move(Vec2 a, Vec2 b, std::span<const ConvexPolygon> obstacles, const Rect& bounds);

}  // namespace crowd
