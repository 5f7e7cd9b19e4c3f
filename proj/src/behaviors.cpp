#include "crowd/behaviors.hpp"

#include <algorithm>
#include <cmath>

#include "crowd/errors.hpp"

namespace crowd {

const char* to_string(PitKind kind) { return kind == PitKind::Moshpit ? "moshpit" : "circlepit"; }

const char* to_string(PitPhase phase) {
    switch (phase) {
        case PitPhase::Idle: return "idle";
        case PitPhase::Opening: return "opening";
        case PitPhase::Active: return "active";
        case PitPhase::Ending: return "ending";
    }
    return "idle";
}

PitContext PitContext::from(const ScenarioConfig& config, int aoe_index) {
    PitContext ctx;
    ctx.aoe = config.areas_of_effect.at(static_cast<std::size_t>(aoe_index));
    ctx.center_goal = config.goal_position(ctx.aoe.center_goal);
    for (const std::string& n : ctx.aoe.ring_goals) ctx.ring.push_back(config.goal_position(n));
    ctx.goal_distance_threshold = config.params.goal_distance_threshold;
    ctx.dt = config.params.dt;
    return ctx;
}

Agent* find_agent(std::span<Agent> agents, AgentId id) {
    auto it = std::lower_bound(agents.begin(), agents.end(), id,
                               [](const Agent& a, AgentId v) { return a.id < v; });
    return it != agents.end() && it->id == id ? &*it : nullptr;
}

const Agent* find_agent(std::span<const Agent> agents, AgentId id) {
    auto it = std::lower_bound(agents.begin(), agents.end(), id,
                               [](const Agent& a, AgentId v) { return a.id < v; });
    return it != agents.end() && it->id == id ? &*it : nullptr;
}

std::size_t nearest_goal_index(std::span<const Vec2> goals, Vec2 p) {
    std::size_t best = 0;
    double best_d2 = INFINITY;
    for (std::size_t i = 0; i < goals.size(); ++i) {
        const double d2 = distance_squared(goals[i], p);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return best;
}

namespace {

int steps_to_start(const PitContext& ctx) {
    return static_cast<int>(std::ceil(ctx.aoe.time_to_start / ctx.dt - 1e-9));
}

void select_participants(PitBehaviorState& state, std::span<Agent> agents, const PitContext& ctx,
                         Rng& rng) {
    std::vector<std::pair<double, AgentId>> ranked;
    for (AgentId id : state.openers) {
        if (const Agent* a = find_agent(agents, id)) {
            ranked.emplace_back(distance_squared(a->position, ctx.aoe.center), id);
        }
    }
    std::sort(ranked.begin(), ranked.end());
    const std::size_t wanted = static_cast<std::size_t>(ctx.aoe.number_agents_pit);
    const std::size_t pool = std::min(ranked.size(), wanted * kSelectionPoolFactor);
    const std::size_t take = std::min(pool, wanted);

    // partial Fisher–Yates over the pool
    std::vector<AgentId> candidates;
    for (std::size_t i = 0; i < pool; ++i) candidates.push_back(ranked[i].second);
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(take);
    std::sort(candidates.begin(), candidates.end());
    state.participants = candidates;

    for (AgentId id : state.participants) {
        Agent* a = find_agent(agents, id);
        a->tag = BehaviorTag::Participant;
        a->mode = MotionMode::Attract;
        if (state.kind == PitKind::Moshpit) {
            a->program = single_goal_program(ctx.center_goal, ctx.goal_distance_threshold);
            state.participant_modes[id] = MotionMode::Attract;
        } else {
            GoalProgram ring;
            ring.goals = ctx.ring;
            ring.waits.assign(ctx.ring.size(), 0.0);
            ring.distance_threshold = ctx.goal_distance_threshold;
            ring.looping = true;
            ring.cursor = nearest_goal_index(ctx.ring, a->position);
            a->program = std::move(ring);
        }
    }
}

void restore(PitBehaviorState& state, std::span<Agent> agents) {
    for (Agent& a : agents) {
        if (a.behavior != state.aoe_index || a.tag == BehaviorTag::None) continue;
        if (a.saved_program) a.program = *a.saved_program;
        a.saved_program.reset();
        a.mode = MotionMode::Attract;
        a.tag = BehaviorTag::None;
        a.behavior = -1;
    }
    state.openers.clear();
    state.participants.clear();
    state.participant_modes.clear();
}

void enter(PitBehaviorState& state, PitPhase phase) {
    state.phase = phase;
    state.phase_steps = 0;
}

}  // namespace

void trigger(PitBehaviorState& state, PitKind kind, std::span<Agent> agents, const PitContext& ctx) {
    if (state.phase != PitPhase::Idle) throw BehaviorBusy();
    if (kind == PitKind::Circlepit && ctx.ring.empty()) {
        throw ConfigError("area of effect has no ring goals for a circlepit");
    }
    state.kind = kind;
    state.openers.clear();
    state.participants.clear();
    state.participant_modes.clear();
    const double r2 = ctx.aoe.radius * ctx.aoe.radius;
    for (Agent& a : agents) {
        if (a.tag != BehaviorTag::None) continue;
        if (distance_squared(a.position, ctx.aoe.center) > r2) continue;
        a.saved_program = a.program;
        a.program = single_goal_program(ctx.center_goal, ctx.goal_distance_threshold);
        a.mode = MotionMode::Repel;
        a.tag = BehaviorTag::Opener;
        a.behavior = state.aoe_index;
        state.openers.push_back(a.id);
    }
    enter(state, PitPhase::Opening);
}

void step_behavior(PitBehaviorState& state, std::span<Agent> agents, const PitContext& ctx, Rng& selection) {
    switch (state.phase) {
        case PitPhase::Idle:
            return;
        case PitPhase::Opening:
            if (state.phase_steps >= steps_to_start(ctx)) {
                select_participants(state, agents, ctx, selection);
                enter(state, PitPhase::Active);
            } else {
                ++state.phase_steps;
            }
            return;
        case PitPhase::Active:
            if (state.participants.empty()) {
                enter(state, PitPhase::Ending);
                return;
            }
            if (state.kind == PitKind::Moshpit) {
                for (AgentId id : state.participants) {
                    Agent* a = find_agent(agents, id);
                    if (!a) continue;
                    const double d = distance(a->position, ctx.aoe.center);
                    if (d <= ctx.aoe.reflect_min) {
                        a->mode = MotionMode::Repel;
                    } else if (d >= ctx.aoe.reflect_max) {
                        a->mode = MotionMode::Attract;
                    }
                    state.participant_modes[id] = a->mode;
                }
            }
            ++state.phase_steps;
            return;
        case PitPhase::Ending:
            restore(state, agents);
            enter(state, PitPhase::Idle);
            return;
    }
}

void stop(PitBehaviorState& state) {
    if (state.phase == PitPhase::Opening || state.phase == PitPhase::Active) {
        enter(state, PitPhase::Ending);
    }
}

int realized_participants(const PitBehaviorState& state, std::span<const Agent> agents,
                          std::int64_t current_step, int window_steps) {
    if (state.phase != PitPhase::Active) return 0;
    int n = 0;
    for (AgentId id : state.participants) {
        const Agent* a = find_agent(agents, id);
        if (a && a->last_moved_step >= 0 && a->last_moved_step > current_step - window_steps) ++n;
    }
    return n;
}

void forget_agent(PitBehaviorState& state, AgentId id) {
    auto drop = [id](std::vector<AgentId>& v) {
        auto it = std::lower_bound(v.begin(), v.end(), id);
        if (it != v.end() && *it == id) v.erase(it);
    };
    drop(state.openers);
    drop(state.participants);
    state.participant_modes.erase(id);
}

}  // namespace crowd
