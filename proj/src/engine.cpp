#include "crowd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "crowd/errors.hpp"

namespace crowd {

using Json = nlohmann::ordered_json;

namespace {

constexpr double kTimeEps = 1e-9;
constexpr int kSpawnAttempts = 1000;

Json pt(Vec2 p) { return Json::array({p.x, p.y}); }

Json program_json(const GoalProgram& p) {
    Json goals = Json::array();
    for (Vec2 g : p.goals) goals.push_back(pt(g));
    return Json{{"goals", goals},
                {"waits", p.waits},
                {"distance_threshold", p.distance_threshold},
                {"cursor", p.cursor},
                {"wait_remaining", p.wait_remaining},
                {"looping", p.looping}};
}

}  // namespace

const char* to_string(EngineCommandKind kind) {
    switch (kind) {
        case EngineCommandKind::TriggerMoshpit: return "trigger_moshpit";
        case EngineCommandKind::TriggerCirclepit: return "trigger_circlepit";
        case EngineCommandKind::StopBehavior: return "stop_behavior";
    }
    return "trigger_moshpit";
}

EngineCommandKind engine_command_from_string(std::string_view s) {
    if (s == "trigger_moshpit") return EngineCommandKind::TriggerMoshpit;
    if (s == "trigger_circlepit") return EngineCommandKind::TriggerCirclepit;
    if (s == "stop_behavior") return EngineCommandKind::StopBehavior;
    throw ParseError("kind", "unknown command kind '" + std::string(s) + "'");
}

std::string behavior_id(int aoe_index) { return "aoe" + std::to_string(aoe_index); }

int parse_behavior_id(std::string_view id) {
    if (id.size() < 4 || id.substr(0, 3) != "aoe") return -1;
    int value = 0;
    for (char c : id.substr(3)) {
        if (c < '0' || c > '9') return -1;
        value = value * 10 + (c - '0');
        if (value > 1'000'000) return -1;
    }
    return value;
}

double kendall_distance(std::span<const std::int64_t> first, std::span<const std::int64_t> second) {
    const std::size_t n = std::min(first.size(), second.size());
    if (n < 2) return 0.0;
    std::int64_t discordant = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto a = first[i] - first[j];
            const auto b = second[i] - second[j];
            if ((a < 0 && b > 0) || (a > 0 && b < 0)) ++discordant;
        }
    }
    return static_cast<double>(discordant) / (static_cast<double>(n) * (n - 1) / 2.0);
}

std::int64_t steps_for(double duration, double dt) {
    return static_cast<std::int64_t>(std::ceil(duration / dt - kTimeEps));
}

std::int64_t step_for_time(double time, double dt) {
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(time / dt - kTimeEps)));
}

// ------------------------------------------------------------------ Engine

Engine::Engine(ScenarioConfig config, EngineOptions options)
    : config_(std::move(config)), options_(options) {
    validate(config_);
    const GlobalParams& p = config_.params;
    state_.dt = p.dt;
    window_ = std::max(1, static_cast<int>(std::lround(1.0 / p.dt)));

    MarkerGenerationOptions gen;
    gen.cell_size = p.agent_radius;
    state_.field = std::make_shared<const MarkerField>(generate_markers(
        config_.bounds, p.marker_density, p.marker_radius, config_.obstacles, config_.seed, gen));

    for (std::size_t i = 0; i < config_.areas_of_effect.size(); ++i) {
        PitBehaviorState b;
        b.aoe_index = static_cast<int>(i);
        state_.behaviors.push_back(b);
        pits_.push_back(PitContext::from(config_, static_cast<int>(i)));
    }
    const std::size_t nb = state_.behaviors.size();
    laps_.resize(nb);
    active_steps_.assign(nb, 0);
    open_steps_.assign(nb, 0);
    selected_.assign(nb, 0);
    last_open_space_.assign(nb, 0.0);
    last_realized_.assign(nb, 0);

    for (const SpawnArea& s : config_.spawn_areas) {
        final_goals_.push_back(config_.goal_position(s.goal_list.back()));
    }
    if (config_.queue) queue_.emplace(*config_.queue);
    state_.spawn_rng = Rng::substream(config_.seed, "spawns");
    state_.selection_rng = Rng::substream(config_.seed, "selection");
    state_.last_spawn_step.assign(config_.spawn_areas.size(), 0);

    // Initial agents are interleaved across areas so the global cap is
    // shared fairly.
    std::vector<int> remaining;
    for (const SpawnArea& s : config_.spawn_areas) remaining.push_back(s.initial_agents);
    bool any = true;
    while (any && static_cast<int>(state_.agents.size()) < p.max_agents) {
        any = false;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            if (remaining[i] == 0 || static_cast<int>(state_.agents.size()) >= p.max_agents) continue;
            spawn(static_cast<int>(i), 1);
            --remaining[i];
            any = true;
        }
    }
    last_displacements_.assign(state_.agents.size(), Vec2{});
    last_min_distance_ = min_agent_distance();
    for (std::size_t i = 0; i < nb; ++i) last_open_space_[i] = open_space(static_cast<int>(i));
}

void Engine::spawn(int area_index, int count) {
    const SpawnArea& area = config_.spawn_areas[static_cast<std::size_t>(area_index)];
    const GlobalParams& p = config_.params;
    for (int n = 0; n < count; ++n) {
        std::optional<Vec2> pos;
        for (int attempt = 0; attempt < kSpawnAttempts && !pos; ++attempt) {
            const Vec2 candidate{state_.spawn_rng.uniform(area.region.min.x, area.region.max.x),
                                 state_.spawn_rng.uniform(area.region.min.y, area.region.max.y)};
            const bool blocked = std::any_of(config_.obstacles.begin(), config_.obstacles.end(),
                                             [&](const ConvexPolygon& o) { return o.contains_strict(candidate); });
            if (!blocked) pos = candidate;
        }
        if (!pos) continue;

        Agent a;
        a.id = state_.next_agent_id++;
        a.position = *pos;
        a.radius = p.agent_radius;
        a.max_speed = p.max_speed;
        for (const std::string& g : area.goal_list) a.program.goals.push_back(config_.goal_position(g));
        a.program.waits = area.wait_list.empty() ? std::vector<double>(area.goal_list.size(), 0.0) : area.wait_list;
        a.program.distance_threshold = p.goal_distance_threshold;
        a.spawn_area = area_index;
        state_.agents.push_back(std::move(a));
        ++spawned_;
    }
}

CommandOutcome Engine::check(const EngineCommand& command) const {
    const int index = parse_behavior_id(command.behavior_id);
    if (index < 0 || index >= static_cast<int>(state_.behaviors.size())) {
        return {false, "unknown behavior '" + command.behavior_id + "'"};
    }
    const PitBehaviorState& b = state_.behaviors[static_cast<std::size_t>(index)];
    switch (command.kind) {
        case EngineCommandKind::TriggerMoshpit:
        case EngineCommandKind::TriggerCirclepit:
            if (b.phase != PitPhase::Idle) return {false, "behavior busy"};
            if (command.kind == EngineCommandKind::TriggerCirclepit &&
                pits_[static_cast<std::size_t>(index)].ring.empty()) {
                return {false, "area has no ring goals"};
            }
            return {};
        case EngineCommandKind::StopBehavior:
            return {};
    }
    return {};
}

CommandOutcome Engine::apply(const EngineCommand& command) {
    CommandOutcome outcome = check(command);
    if (!outcome.accepted) return outcome;
    const auto index = static_cast<std::size_t>(parse_behavior_id(command.behavior_id));
    PitBehaviorState& b = state_.behaviors[index];
    if (command.kind == EngineCommandKind::StopBehavior) {
        stop(b);
    } else {
        const PitKind kind =
            command.kind == EngineCommandKind::TriggerMoshpit ? PitKind::Moshpit : PitKind::Circlepit;
        trigger(b, kind, state_.agents, pits_[index]);
    }
    return outcome;
}

double Engine::open_space(int behavior_index) const {
    const auto i = static_cast<std::size_t>(behavior_index);
    const PitBehaviorState& b = state_.behaviors[i];
    const AreaOfEffect& aoe = pits_[i].aoe;
    double best2 = aoe.radius * aoe.radius;
    for (const Agent& a : state_.agents) {
        if (std::binary_search(b.participants.begin(), b.participants.end(), a.id)) continue;
        best2 = std::min(best2, distance_squared(a.position, aoe.center));
    }
    return std::sqrt(best2);
}

double Engine::min_agent_distance() const {
    const auto& agents = state_.agents;
    if (agents.size() < 2) return 0.0;
    double best2 = INFINITY;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
            best2 = std::min(best2, distance_squared(agents[i].position, agents[j].position));
        }
    }
    return std::sqrt(best2);
}

void Engine::track_laps(const std::vector<Vec2>& before) {
    for (std::size_t bi = 0; bi < state_.behaviors.size(); ++bi) {
        const PitBehaviorState& b = state_.behaviors[bi];
        if (b.kind != PitKind::Circlepit || b.phase != PitPhase::Active) continue;
        const Vec2 c = pits_[bi].aoe.center;
        for (AgentId id : b.participants) {
            const auto it = std::lower_bound(state_.agents.begin(), state_.agents.end(), id,
                                             [](const Agent& a, AgentId v) { return a.id < v; });
            if (it == state_.agents.end() || it->id != id) continue;
            const std::size_t k = static_cast<std::size_t>(it - state_.agents.begin());
            const Vec2 from = before[k] - c;
            const Vec2 to = it->position - c;
            const double delta = (from.length_squared() > 0 && to.length_squared() > 0) ? signed_angle(from, to) : 0.0;

            LapTracker& t = laps_[bi][id];
            if (t.window_fill == 0) t.window_origin = before[k];
            t.cumulative_angle += delta;
            t.window_angle += delta;
            ++t.active_steps;
            if (++t.window_fill == window_) {
                ++t.windows;
                if (t.window_angle > 0) ++t.ccw_windows;
                const double span = window_ * state_.dt;
                if (distance(t.window_origin, it->position) < 0.5 * it->max_speed * span) ++t.blocked_windows;
                t.window_fill = 0;
                t.window_angle = 0.0;
            }
        }
    }
}

FrameSnapshot Engine::step(const std::vector<EngineCommand>& commands, std::vector<CommandOutcome>* outcomes) {
    const GlobalParams& p = config_.params;
    ++state_.step_index;
    const std::int64_t step = state_.step_index;

    // 1. commands
    for (const EngineCommand& c : commands) {
        CommandOutcome o = apply(c);
        if (outcomes) outcomes->push_back(std::move(o));
    }

    // 2. spawns
    for (std::size_t i = 0; i < config_.spawn_areas.size(); ++i) {
        const SpawnArea& area = config_.spawn_areas[i];
        const double elapsed = static_cast<double>(step - state_.last_spawn_step[i]) * p.dt;
        if (elapsed + kTimeEps < area.cycle_length) continue;
        const int due = spawn_due(area, elapsed + kTimeEps, 0.0, static_cast<int>(state_.agents.size()), p.max_agents);
        state_.last_spawn_step[i] = step;
        spawn(static_cast<int>(i), due);
    }

    // 3. ownership, frozen for the rest of the step
    std::vector<OwnershipCandidate> candidates;
    candidates.reserve(state_.agents.size());
    for (const Agent& a : state_.agents) candidates.push_back({a.id, a.position, a.radius});
    const Ownership ownership = assign_ownership(*state_.field, candidates);

    // 4. behaviors
    for (std::size_t i = 0; i < state_.behaviors.size(); ++i) {
        PitBehaviorState& b = state_.behaviors[i];
        const PitPhase before = b.phase;
        step_behavior(b, state_.agents, pits_[i], state_.selection_rng);
        if (before == PitPhase::Opening && b.phase == PitPhase::Active) {
            selected_[i] = static_cast<int>(b.participants.size());
            laps_[i].clear();
            if (b.kind == PitKind::Circlepit) {
                for (AgentId id : b.participants) laps_[i][id] = LapTracker{};
            }
        }
    }

    // 5. agents
    const StepContext ctx{*state_.field, ownership, config_.obstacles, config_.bounds, p.dt};
    std::vector<Vec2> before;
    before.reserve(state_.agents.size());
    for (const Agent& a : state_.agents) before.push_back(a.position);
    last_displacements_.assign(state_.agents.size(), Vec2{});
    std::vector<AgentId> completed;
    for (std::size_t i = 0; i < state_.agents.size(); ++i) {
        AgentStep r = step_agent(state_.agents[i], i, ctx);
        Agent& a = state_.agents[i];
        a = std::move(r.agent);
        last_displacements_[i] = r.displacement;
        if (r.displacement != Vec2{}) a.last_moved_step = step;

        if (queue_) {
            queue_->observe_move(a.id, before[i], a.position, step);
            if (a.tag == BehaviorTag::None && a.spawn_area >= 0 && a.program.at_last_goal() &&
                distance(a.position, final_goals_[static_cast<std::size_t>(a.spawn_area)]) <=
                    a.program.distance_threshold) {
                queue_->observe_arrival(a.id, step);
            }
        }
        if (r.event == GoalEvent::Completed && p.despawn_on_completion && a.tag == BehaviorTag::None) {
            completed.push_back(a.id);
        }
    }
    track_laps(before);

    if (!completed.empty()) {
        std::vector<Agent> kept;
        std::vector<Vec2> kept_disp;
        kept.reserve(state_.agents.size());
        for (std::size_t i = 0; i < state_.agents.size(); ++i) {
            if (std::binary_search(completed.begin(), completed.end(), state_.agents[i].id)) continue;
            kept.push_back(std::move(state_.agents[i]));
            kept_disp.push_back(last_displacements_[i]);
        }
        state_.agents = std::move(kept);
        last_displacements_ = std::move(kept_disp);
        for (AgentId id : completed) {
            for (PitBehaviorState& b : state_.behaviors) forget_agent(b, id);
        }
        despawned_ += static_cast<int>(completed.size());
    }

    // 6. metrics
    last_min_distance_ = min_agent_distance();
    if (state_.agents.size() >= 2) min_distance_seen_ = std::min(min_distance_seen_, last_min_distance_);
    for (std::size_t i = 0; i < state_.behaviors.size(); ++i) {
        const PitBehaviorState& b = state_.behaviors[i];
        last_open_space_[i] = open_space(static_cast<int>(i));
        last_realized_[i] = realized_participants(b, state_.agents, step, window_);
        if (b.phase == PitPhase::Active) {
            ++active_steps_[i];
            if (last_open_space_[i] >= 0.5 * pits_[i].aoe.radius) ++open_steps_[i];
        }
    }

    if (options_.check_invariants) check_invariants();

    // 7. snapshot
    return snapshot();
}

FrameSnapshot Engine::snapshot() const {
    FrameSnapshot f;
    f.step = state_.step_index;
    f.time = state_.sim_time();
    f.agents.reserve(state_.agents.size());
    for (const Agent& a : state_.agents) f.agents.push_back({a.id, a.position, a.mode, a.tag, a.program.cursor});
    for (std::size_t i = 0; i < state_.behaviors.size(); ++i) {
        const PitBehaviorState& b = state_.behaviors[i];
        f.behaviors.push_back({behavior_id(static_cast<int>(i)), b.kind, b.phase, b.participants,
                               last_realized_[i], last_open_space_[i]});
    }
    f.min_distance = last_min_distance_;
    f.live_agents = static_cast<int>(state_.agents.size());
    return f;
}

MetricsReport Engine::report() const {
    MetricsReport r;
    r.steps = state_.step_index;
    r.sim_time = state_.sim_time();
    for (std::size_t i = 0; i < state_.behaviors.size(); ++i) {
        const PitBehaviorState& b = state_.behaviors[i];
        BehaviorMetrics m;
        m.id = behavior_id(static_cast<int>(i));
        m.kind = b.kind;
        m.final_phase = b.phase;
        m.realized_participants = last_realized_[i];
        m.selected_participants = selected_[i];
        m.open_space_radius = last_open_space_[i];
        m.active_steps = active_steps_[i];
        m.open_steps = open_steps_[i];
        for (const auto& [id, t] : laps_[i]) {
            LapCount c;
            c.agent = id;
            c.laps = std::abs(t.cumulative_angle) / (2.0 * std::numbers::pi);
            c.windows = t.windows;
            c.ccw_windows = t.ccw_windows;
            c.active_seconds = t.active_steps * state_.dt;
            c.unobstructed = t.windows > 0 && t.blocked_windows == 0;
            m.laps.push_back(c);
        }
        r.behaviors.push_back(std::move(m));
    }
    r.min_pairwise_agent_distance = std::isfinite(min_distance_seen_) ? min_distance_seen_ : 0.0;

    if (queue_) {
        r.queue_inversions = queue_->inversions();
        r.queue_completed = queue_->completed();
    }
    r.agents_spawned = spawned_;
    r.agents_despawned = despawned_;
    return r;
}

void Engine::check_invariants() const {
    const GlobalParams& p = config_.params;
    const std::int64_t step = state_.step_index;
    auto fail = [step](AgentId id, const std::string& what) {
        std::ostringstream msg;
        msg << "invariant violated at step " << step;
        if (id >= 0) msg << ", agent " << id;
        msg << ": " << what;
        throw std::logic_error(msg.str());
    };
    if (static_cast<int>(state_.agents.size()) > p.max_agents) fail(-1, "live agents exceed max_agents");
    const double cap = p.max_speed * p.dt * (1.0 + 1e-9) + 1e-12;
    for (std::size_t i = 0; i < state_.agents.size(); ++i) {
        const Agent& a = state_.agents[i];
        if (i > 0 && state_.agents[i - 1].id >= a.id) fail(a.id, "agent ids out of order");
        if (!config_.bounds.contains(a.position)) fail(a.id, "outside world bounds");
        for (const ConvexPolygon& o : config_.obstacles) {
            if (o.contains_strict(a.position)) fail(a.id, "inside an obstacle");
        }
        if (i < last_displacements_.size() && last_displacements_[i].length() > cap) fail(a.id, "speed cap exceeded");
        if (a.saved_program.has_value() != (a.tag != BehaviorTag::None)) fail(a.id, "stashed program out of sync with tag");
    }
    for (std::size_t i = 0; i < state_.behaviors.size(); ++i) {
        const PitBehaviorState& b = state_.behaviors[i];
        if (static_cast<int>(b.participants.size()) > pits_[i].aoe.number_agents_pit) {
            fail(-1, behavior_id(static_cast<int>(i)) + " has too many participants");
        }
    }
}

// ------------------------------------------------------------ serialization

std::string serialize_state(const SimState& s) {
    Json agents = Json::array();
    for (const Agent& a : s.agents) {
        agents.push_back(Json{{"id", a.id},
                              {"position", pt(a.position)},
                              {"radius", a.radius},
                              {"max_speed", a.max_speed},
                              {"program", program_json(a.program)},
                              {"mode", to_string(a.mode)},
                              {"tag", to_string(a.tag)},
                              {"saved_program", a.saved_program ? program_json(*a.saved_program) : Json(nullptr)},
                              {"behavior", a.behavior},
                              {"spawn_area", a.spawn_area},
                              {"last_moved_step", a.last_moved_step}});
    }
    Json markers = Json::array();
    if (s.field) {
        for (const Marker& m : s.field->markers()) markers.push_back(pt(m.position));
    }
    Json behaviors = Json::array();
    for (const PitBehaviorState& b : s.behaviors) {
        Json modes = Json::object();
        for (const auto& [id, mode] : b.participant_modes) modes[std::to_string(id)] = to_string(mode);
        behaviors.push_back(Json{{"aoe", b.aoe_index},
                                 {"kind", to_string(b.kind)},
                                 {"phase", to_string(b.phase)},
                                 {"phase_steps", b.phase_steps},
                                 {"openers", b.openers},
                                 {"participants", b.participants},
                                 {"participant_modes", modes}});
    }
    Json j{{"step", s.step_index},
           {"time", s.sim_time()},
           {"dt", s.dt},
           {"agents", agents},
           {"markers", markers},
           {"behaviors", behaviors},
           {"rng", Json{{"spawns", s.spawn_rng.state()}, {"selection", s.selection_rng.state()}}},
           {"last_spawn_step", s.last_spawn_step},
           {"next_agent_id", s.next_agent_id}};
    return j.dump();
}

std::string to_json(const MetricsReport& r) {
    Json behaviors = Json::array();
    for (const BehaviorMetrics& b : r.behaviors) {
        Json laps = Json::array();
        for (const LapCount& l : b.laps) {
            laps.push_back(Json{{"agent", l.agent},
                                {"laps", l.laps},
                                {"windows", l.windows},
                                {"ccw_windows", l.ccw_windows},
                                {"active_seconds", l.active_seconds},
                                {"unobstructed", l.unobstructed}});
        }
        behaviors.push_back(Json{{"id", b.id},
                                 {"kind", to_string(b.kind)},
                                 {"final_phase", to_string(b.final_phase)},
                                 {"realized_participants", b.realized_participants},
                                 {"selected_participants", b.selected_participants},
                                 {"open_space_radius", b.open_space_radius},
                                 {"active_steps", b.active_steps},
                                 {"open_steps", b.open_steps},
                                 {"lap_counts", laps}});
    }
    Json j{{"steps", r.steps},
           {"sim_time", r.sim_time},
           {"behaviors", behaviors},
           {"min_pairwise_agent_distance", r.min_pairwise_agent_distance},
           {"queue_inversions", r.queue_inversions},
           {"queue_completed", r.queue_completed},
           {"agents_spawned", r.agents_spawned},
           {"agents_despawned", r.agents_despawned}};
    return j.dump(2) + "\n";
}

// -------------------------------------------------------------------- queue

void QueueTracker::observe_move(AgentId id, Vec2 from, Vec2 to, std::int64_t step) {
    if (entry_step_.contains(id)) return;
    if (segments_intersect(from, to, line_.entry_a, line_.entry_b)) entry_step_[id] = step;
}

void QueueTracker::observe_arrival(AgentId id, std::int64_t step) { arrival_step_.try_emplace(id, step); }

int QueueTracker::completed() const {
    int n = 0;
    for (const auto& [id, arrived] : arrival_step_) n += entry_step_.contains(id) ? 1 : 0;
    return n;
}

double QueueTracker::inversions() const {
    std::vector<std::int64_t> entries;
    std::vector<std::int64_t> arrivals;
    for (const auto& [id, arrived] : arrival_step_) {
        const auto e = entry_step_.find(id);
        if (e == entry_step_.end()) continue;
        entries.push_back(e->second);
        arrivals.push_back(arrived);
    }
    return kendall_distance(entries, arrivals);
}

// ---------------------------------------------------------------------- run

MetricsReport run(const ScenarioConfig& config, const std::vector<ScheduledCommand>& timeline, double duration,
                  const FrameSink& sink, EngineOptions options) {
    if (!(duration > 0)) throw ConfigError("duration must be positive");
    Engine engine(config, options);
    const double dt = config.params.dt;
    std::map<std::int64_t, std::vector<EngineCommand>> by_step;
    for (const ScheduledCommand& c : timeline) by_step[step_for_time(c.time, dt)].push_back(c.command);

    const std::int64_t steps = steps_for(duration, dt);
    static const std::vector<EngineCommand> none;
    for (std::int64_t k = 1; k <= steps; ++k) {
        const auto it = by_step.find(k);
        const FrameSnapshot f = engine.step(it == by_step.end() ? none : it->second);
        if (sink) sink(f);
    }
    return engine.report();
}

}  // namespace crowd
