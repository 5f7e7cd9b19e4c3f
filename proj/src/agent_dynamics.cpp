#include "crowd/agent_dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace crowd {

namespace {

// Motion stops this far short of an obstacle boundary.
constexpr double kWallGap = 1e-6;

}  // namespace

const char* to_string(MotionMode mode) {
    return mode == MotionMode::Attract ? "attract" : "repel";
}

const char* to_string(BehaviorTag tag) {
    switch (tag) {
        case BehaviorTag::None: return "none";
        case BehaviorTag::Opener: return "opener";
        case BehaviorTag::Participant: return "participant";
    }
    return "none";
}

GoalProgram single_goal_program(Vec2 goal, double distance_threshold) {
    GoalProgram p;
    p.goals = {goal};
    p.waits = {0.0};
    p.distance_threshold = distance_threshold;
    return p;
}

double raw_weight(Vec2 goal_dir, Vec2 marker_offset, MotionMode mode) {
    const double len = marker_offset.length();
    if (len == 0.0) return 0.5;
    const double cos_theta = std::clamp(dot(goal_dir, marker_offset) / len, -1.0, 1.0);
    const double attract = 0.5 * (1.0 + cos_theta);
    return mode == MotionMode::Attract ? attract : 1.0 - attract;
}

namespace {

// Per-step displacement, capped at max_speed * dt.
Vec2 weighted_step(const Agent& agent, std::span<const Vec2> owned_markers, double dt) {
    if (owned_markers.empty()) return {};

    const Vec2 to_goal = agent.program.current_goal() - agent.position;
    const double goal_len = to_goal.length();
    const bool has_dir = goal_len > 0.0;
    const Vec2 goal_dir = has_dir ? to_goal / goal_len : Vec2{};

    double total = 0.0;
    Vec2 sum;
    for (const Vec2& m : owned_markers) {
        const Vec2 offset = m - agent.position;
        const double w = has_dir ? raw_weight(goal_dir, offset, agent.mode) : 0.5;
        total += w;
        sum += offset * w;
    }
    if (!(total > 0.0)) return {};

    const Vec2 move = sum / total;
    const double len = move.length();
    const double cap = agent.max_speed * dt;
    return len > cap ? move * (cap / len) : move;
}

}  // namespace

MotionResult motion_vector(const Agent& agent, std::span<const Vec2> owned_markers, double dt) {
    MotionResult result;
    result.captured = static_cast<int>(owned_markers.size());
    result.velocity = weighted_step(agent, owned_markers, dt) / dt;
    return result;
}

GoalAdvance advance_goal_program(const GoalProgram& program, Vec2 position, double dt) {
    GoalAdvance out{program, GoalEvent::None};
    GoalProgram& p = out.program;
    const double threshold2 = p.distance_threshold * p.distance_threshold;
    if (distance_squared(position, p.current_goal()) > threshold2) {
        p.wait_remaining = 0.0;
        return out;
    }
    if (p.wait_remaining <= 0.0) p.wait_remaining = p.waits[p.cursor];
    p.wait_remaining -= dt;
    if (p.wait_remaining > 1e-12) return out;

    p.wait_remaining = 0.0;
    if (!p.at_last_goal()) {
        ++p.cursor;
        out.event = GoalEvent::Advanced;
    } else if (p.looping) {
        p.cursor = 0;
        out.event = GoalEvent::Advanced;
    } else {
        out.event = GoalEvent::Completed;
    }
    return out;
}

Vec2 clip_move(Vec2 a, Vec2 b, std::span<const ConvexPolygon> obstacles, const Rect& bounds) {
    const Vec2 d = b - a;
    const double len = d.length();
    if (len == 0.0) return a;

    double t = 1.0;
    for (const ConvexPolygon& o : obstacles) {
        if (auto hit = o.first_entry(a, b)) t = std::min(t, *hit);
    }
    if (t < 1.0) t = std::max(0.0, t - kWallGap / len);
    Vec2 out = a + d * t;
    out.x = std::clamp(out.x, bounds.min.x, bounds.max.x);
    out.y = std::clamp(out.y, bounds.min.y, bounds.max.y);
    for (const ConvexPolygon& o : obstacles) {
        if (o.contains_strict(out)) return a;
    }
    return out;
}

AgentStep step_agent(const Agent& agent, std::size_t ownership_index, const StepContext& ctx) {
    AgentStep out{agent, {}, 0, GoalEvent::None};

    const auto owned = ctx.ownership.owned_by_index(ownership_index);
    std::vector<Vec2> positions;
    positions.reserve(owned.size());
    const auto markers = ctx.field.markers();
    for (MarkerId id : owned) positions.push_back(markers[static_cast<std::size_t>(id)].position);

    out.captured = static_cast<int>(positions.size());
    const Vec2 target = agent.position + weighted_step(agent, positions, ctx.dt);
    out.agent.position = clip_move(agent.position, target, ctx.obstacles, ctx.bounds);
    out.displacement = out.agent.position - agent.position;

    GoalAdvance adv = advance_goal_program(out.agent.program, out.agent.position, ctx.dt);
    out.agent.program = std::move(adv.program);
    out.event = adv.event;
    return out;
}

}  // namespace crowd
