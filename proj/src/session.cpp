#include "crowd/session.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <json.hpp>

#include "crowd/errors.hpp"

namespace crowd {

using Json = nlohmann::ordered_json;

const char* to_string(CommandKind kind) {
    switch (kind) {
        case CommandKind::TriggerMoshpit: return "TRIGGER_MOSHPIT";
        case CommandKind::TriggerCirclepit: return "TRIGGER_CIRCLEPIT";
        case CommandKind::StopBehavior: return "STOP_BEHAVIOR";
        case CommandKind::Pause: return "PAUSE";
        case CommandKind::Resume: return "RESUME";
        case CommandKind::SetSpeed: return "SET_SPEED";
    }
    return "?";
}

CommandKind command_kind_from_string(std::string_view s) {
    for (CommandKind k : {CommandKind::TriggerMoshpit, CommandKind::TriggerCirclepit, CommandKind::StopBehavior,
                          CommandKind::Pause, CommandKind::Resume, CommandKind::SetSpeed}) {
        if (s == to_string(k)) return k;
    }
    throw ParseError("kind", "unknown command kind '" + std::string(s) + "'");
}

bool targets_behavior(CommandKind kind) {
    return kind == CommandKind::TriggerMoshpit || kind == CommandKind::TriggerCirclepit ||
           kind == CommandKind::StopBehavior;
}

void validate(const Command& c) {
    if (targets_behavior(c.kind) && (!c.behavior_id || c.behavior_id->empty())) {
        throw ParseError("behavior_id", std::string(to_string(c.kind)) + " requires a behavior_id");
    }
    if (c.kind == CommandKind::SetSpeed) {
        if (!c.factor) throw ParseError("factor", "SET_SPEED requires a factor");
        if (std::find(kSpeedFactors.begin(), kSpeedFactors.end(), *c.factor) == kSpeedFactors.end()) {
            throw ParseError("factor", "speed factor must be one of 0.25, 0.5, 1, 2, 4");
        }
    }
}

std::optional<EngineCommand> to_engine_command(const Command& c) {
    switch (c.kind) {
        case CommandKind::TriggerMoshpit: return EngineCommand{EngineCommandKind::TriggerMoshpit, c.behavior_id.value_or("")};
        case CommandKind::TriggerCirclepit: return EngineCommand{EngineCommandKind::TriggerCirclepit, c.behavior_id.value_or("")};
        case CommandKind::StopBehavior: return EngineCommand{EngineCommandKind::StopBehavior, c.behavior_id.value_or("")};
        default: return std::nullopt;
    }
}

namespace {

Json command_json(const Command& c) {
    Json j{{"kind", to_string(c.kind)}};
    if (c.behavior_id) j["behavior_id"] = *c.behavior_id;
    if (c.factor) j["factor"] = *c.factor;
    j["issued_at"] = c.issued_at;
    j["applied_at_step"] = c.applied_at_step;
    return j;
}

Command command_from_json(const Json& j) {
    Command c;
    c.kind = command_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("behavior_id")) c.behavior_id = j.at("behavior_id").get<std::string>();
    if (j.contains("factor")) c.factor = j.at("factor").get<double>();
    c.issued_at = j.value("issued_at", std::int64_t{0});
    c.applied_at_step = j.at("applied_at_step").get<std::int64_t>();
    validate(c);
    return c;
}

Json point(Vec2 p) { return Json::array({p.x, p.y}); }

}  // namespace

std::string to_json(const SessionLog& log) {
    Json commands = Json::array();
    for (const Command& c : log.commands) commands.push_back(command_json(c));
    Json j{{"type", "session_log"},
           {"version", kProtocolVersion},
           {"scenario_ref", log.scenario_ref},
           {"record", log.record_ref},
           {"seed", log.scenario.seed},
           {"dt", log.scenario.params.dt},
           {"steps", log.steps},
           {"commands", std::move(commands)},
           {"scenario", Json::parse(serialize(log.scenario))}};
    return j.dump(2) + "\n";
}

SessionLog session_log_from_json(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw ParseError("session log", e.what());
    }
    try {
        if (j.value("type", "") != "session_log") throw ParseError("type", "not a session log");
        if (j.value("version", 0) != kProtocolVersion) throw ParseError("version", "unsupported log version");
        SessionLog log;
        log.scenario_ref = j.value("scenario_ref", "");
        log.record_ref = j.value("record", "");
        log.scenario = load_scenario(j.at("scenario").dump());
        log.scenario.seed = j.at("seed").get<std::uint64_t>();
        log.steps = j.at("steps").get<std::int64_t>();
        for (const Json& c : j.at("commands")) log.commands.push_back(command_from_json(c));
        return log;
    } catch (const Json::exception& e) {
        throw ParseError("session log", e.what());
    }
}

SessionLog load_session_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open session log '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return session_log_from_json(ss.str());
}

MetricsReport replay(const SessionLog& log, const FrameSink& sink, EngineOptions options) {
    Engine engine(log.scenario, options);
    std::map<std::int64_t, std::vector<EngineCommand>> by_step;
    for (const Command& c : log.commands) {
        if (auto ec = to_engine_command(c)) by_step[c.applied_at_step].push_back(std::move(*ec));
    }
    static const std::vector<EngineCommand> none;
    for (std::int64_t k = 1; k <= log.steps; ++k) {
        const auto it = by_step.find(k);
        const FrameSnapshot f = engine.step(it == by_step.end() ? none : it->second);
        if (sink) sink(f);
    }
    return engine.report();
}

Command parse_client_message(std::string_view text, std::int64_t now_ms) {
    Json j;
    try {
        j = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error&) {
        throw ParseError("message", "not valid JSON");
    }
    if (!j.is_object()) throw ParseError("message", "expected a JSON object");
    if (j.contains("version") && j["version"] != kProtocolVersion) {
        throw ParseError("version", "unsupported protocol version");
    }
    if (!j.contains("type") || !j["type"].is_string()) throw ParseError("type", "missing message type");

    const std::string type = j["type"].get<std::string>();
    Command c;
    c.issued_at = now_ms;
    try {
        if (type == "command") {
            if (!j.contains("kind") || !j["kind"].is_string()) throw ParseError("kind", "missing command kind");
            c.kind = command_kind_from_string(j["kind"].get<std::string>());
        } else if (type == "pause") {
            c.kind = CommandKind::Pause;
        } else if (type == "resume") {
            c.kind = CommandKind::Resume;
        } else if (type == "set_speed") {
            c.kind = CommandKind::SetSpeed;
        } else {
            throw ParseError("type", "unknown message type '" + type + "'");
        }
        if (j.contains("behavior_id") && !j["behavior_id"].is_null()) c.behavior_id = j["behavior_id"].get<std::string>();
        if (j.contains("factor") && !j["factor"].is_null()) c.factor = j["factor"].get<double>();
    } catch (const Json::exception&) {
        throw ParseError("message", "field has the wrong type");
    }
    validate(c);
    return c;
}

std::string error_message(std::string_view reason) {
    return Json{{"type", "error"}, {"version", kProtocolVersion}, {"reason", reason}}.dump();
}

std::string world_message(const Engine& engine) {
    const ScenarioConfig& c = engine.config();
    Json obstacles = Json::array();
    for (const ConvexPolygon& o : c.obstacles) {
        Json ring = Json::array();
        for (Vec2 v : o.vertices()) ring.push_back(point(v));
        obstacles.push_back(std::move(ring));
    }
    Json goals = Json::array();
    for (const NamedGoal& g : c.goals) goals.push_back(Json{{"name", g.name}, {"x", g.position.x}, {"y", g.position.y}});
    Json markers = Json::array();
    for (const Marker& m : engine.state().field->markers()) markers.push_back(point(m.position));
    Json aoes = Json::array();
    for (std::size_t i = 0; i < c.areas_of_effect.size(); ++i) {
        const AreaOfEffect& a = c.areas_of_effect[i];
        Json ring = Json::array();
        for (const std::string& g : a.ring_goals) ring.push_back(point(c.goal_position(g)));
        aoes.push_back(Json{{"id", behavior_id(static_cast<int>(i))},
                            {"center", point(a.center)},
                            {"radius", a.radius},
                            {"ring", std::move(ring)}});
    }
    Json j{{"type", "world"},
           {"version", kProtocolVersion},
           {"scenario", c.name},
           {"dt", c.params.dt},
           {"step", engine.state().step_index},
           {"bounds", Json{{"min", point(c.bounds.min)}, {"max", point(c.bounds.max)}}},
           {"obstacles", std::move(obstacles)},
           {"goals", std::move(goals)},
           {"markers", std::move(markers)},
           {"areas_of_effect", std::move(aoes)},
           {"speed_factors", kSpeedFactors}};
    return j.dump();
}

LiveSession::LiveSession(ScenarioConfig config, std::string scenario_ref, EngineOptions options)
    : engine_(config, options) {
    log_.scenario_ref = std::move(scenario_ref);
    log_.scenario = std::move(config);
}

std::optional<std::string> LiveSession::submit(Command command, ClientId client) {
    try {
        validate(command);
    } catch (const ParseError& e) {
        return std::string(e.what());
    }
    std::lock_guard lock(mutex_);
    if (auto ec = to_engine_command(command)) {
        CommandOutcome o = engine_.check(*ec);
        if (!o.accepted) return o.error;
    }
    queue_.push_back({std::move(command), client});
    return std::nullopt;
}

LiveSession::Tick LiveSession::tick() {
    std::lock_guard lock(mutex_);
    Tick result;
    const std::int64_t next = engine_.state().step_index + 1;

    std::vector<Pending> behavior;
    while (!queue_.empty()) {
        Pending p = std::move(queue_.front());
        queue_.pop_front();
        switch (p.command.kind) {
            case CommandKind::Pause: paused_ = true; break;
            case CommandKind::Resume: paused_ = false; break;
            case CommandKind::SetSpeed: speed_ = *p.command.factor; break;
            default:
                behavior.push_back(std::move(p));
                continue;
        }
        p.command.applied_at_step = next;
        log_.commands.push_back(p.command);
    }
    if (paused_) {
        // behavior commands wait for the step that follows the resume
        queue_.insert(queue_.begin(), std::make_move_iterator(behavior.begin()),
                      std::make_move_iterator(behavior.end()));
        return result;
    }

    std::vector<EngineCommand> commands;
    for (const Pending& p : behavior) commands.push_back(*to_engine_command(p.command));
    std::vector<CommandOutcome> outcomes;
    result.frame = engine_.step(commands, &outcomes);
    log_.steps = engine_.state().step_index;
    for (std::size_t i = 0; i < behavior.size(); ++i) {
        if (outcomes[i].accepted) {
            Command c = behavior[i].command;
            c.applied_at_step = result.frame->step;
            log_.commands.push_back(std::move(c));
        } else {
            result.rejections.push_back({behavior[i].client, outcomes[i].error});
        }
    }
    return result;
}

bool LiveSession::paused() const {
    std::lock_guard lock(mutex_);
    return paused_;
}

double LiveSession::speed() const {
    std::lock_guard lock(mutex_);
    return speed_;
}

std::int64_t LiveSession::step_index() const {
    std::lock_guard lock(mutex_);
    return engine_.state().step_index;
}

SessionLog LiveSession::log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::string LiveSession::world() const {
    std::lock_guard lock(mutex_);
    return world_message(engine_);
}

}  // namespace crowd
