#include "crowd/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "crowd/errors.hpp"

namespace crowd {

using Json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- reading

std::string line_col(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void reject_unknown(const Json& obj, const std::string& path,
                    std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ParseError(path.empty() ? key : path + "." + key, "unknown field");
        }
    }
}

const Json& require(const Json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) throw ParseError(path.empty() ? key : path + "." + key, "missing field");
    return obj.at(key);
}

std::string join(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
}

const Json& expect_object(const Json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError(path, "expected an object");
    return j;
}

const Json& expect_array(const Json& j, const std::string& path) {
    if (!j.is_array()) throw ParseError(path, "expected an array");
    return j;
}

double number(const Json& j, const std::string& path) {
    if (!j.is_number()) throw ParseError(path, "expected a number");
    return j.get<double>();
}

int integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
    return j.get<int>();
}

std::string string(const Json& j, const std::string& path) {
    if (!j.is_string()) throw ParseError(path, "expected a string");
    return j.get<std::string>();
}

Vec2 point(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw ParseError(path, "expected [x, y]");
    return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
}

Rect rect(const Json& j, const std::string& path) {
    expect_object(j, path);
    reject_unknown(j, path, {"min", "max"});
    return {point(require(j, path, "min"), join(path, "min")),
            point(require(j, path, "max"), join(path, "max"))};
}

std::vector<std::string> names(const Json& j, const std::string& path) {
    expect_array(j, path);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(string(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

ScenarioConfig from_json(const Json& root) {
    expect_object(root, "<document>");
    reject_unknown(root, "", {"name", "bounds", "obstacles", "goals", "spawn_areas",
                              "areas_of_effect", "params", "seed", "queue"});
    ScenarioConfig c;
    c.name = root.contains("name") ? string(root["name"], "name") : "";
    c.bounds = rect(require(root, "", "bounds"), "bounds");

    if (root.contains("obstacles")) {
        const Json& obs = expect_array(root["obstacles"], "obstacles");
        for (std::size_t i = 0; i < obs.size(); ++i) {
            const std::string p = at("obstacles", i);
            expect_object(obs[i], p);
            reject_unknown(obs[i], p, {"vertices"});
            const Json& verts = expect_array(require(obs[i], p, "vertices"), join(p, "vertices"));
            std::vector<Vec2> ring;
            for (std::size_t k = 0; k < verts.size(); ++k) {
                ring.push_back(point(verts[k], at(join(p, "vertices"), k)));
            }
            try {
                c.obstacles.emplace_back(std::move(ring));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(p + ": " + e.what());
            }
        }
    }

    const Json& goals = expect_object(require(root, "", "goals"), "goals");
    for (const auto& [key, value] : goals.items()) {
        c.goals.push_back({key, point(value, "goals." + key)});
    }

    const Json& spawns = expect_array(require(root, "", "spawn_areas"), "spawn_areas");
    for (std::size_t i = 0; i < spawns.size(); ++i) {
        const std::string p = at("spawn_areas", i);
        const Json& s = expect_object(spawns[i], p);
        reject_unknown(s, p, {"region", "initial_agents", "goal_list", "wait_list", "cycle_length",
                              "quantity_per_cycle"});
        SpawnArea a;
        a.region = rect(require(s, p, "region"), join(p, "region"));
        a.goal_list = names(require(s, p, "goal_list"), join(p, "goal_list"));
        if (s.contains("initial_agents")) a.initial_agents = integer(s["initial_agents"], join(p, "initial_agents"));
        if (s.contains("cycle_length")) a.cycle_length = number(s["cycle_length"], join(p, "cycle_length"));
        if (s.contains("quantity_per_cycle")) {
            a.quantity_per_cycle = integer(s["quantity_per_cycle"], join(p, "quantity_per_cycle"));
        }
        if (s.contains("wait_list")) {
            const Json& w = expect_array(s["wait_list"], join(p, "wait_list"));
            for (std::size_t k = 0; k < w.size(); ++k) {
                a.wait_list.push_back(number(w[k], at(join(p, "wait_list"), k)));
            }
        }
        c.spawn_areas.push_back(std::move(a));
    }

    if (root.contains("areas_of_effect")) {
        const Json& aoes = expect_array(root["areas_of_effect"], "areas_of_effect");
        for (std::size_t i = 0; i < aoes.size(); ++i) {
            const std::string p = at("areas_of_effect", i);
            const Json& s = expect_object(aoes[i], p);
            reject_unknown(s, p, {"center", "radius", "center_goal", "ring_goals", "number_agents_pit",
                                  "reflect_min", "reflect_max", "time_to_start"});
            AreaOfEffect a;
            a.center = point(require(s, p, "center"), join(p, "center"));
            a.center_goal = string(require(s, p, "center_goal"), join(p, "center_goal"));
            if (s.contains("radius")) a.radius = number(s["radius"], join(p, "radius"));
            if (s.contains("ring_goals")) a.ring_goals = names(s["ring_goals"], join(p, "ring_goals"));
            if (s.contains("number_agents_pit")) {
                a.number_agents_pit = integer(s["number_agents_pit"], join(p, "number_agents_pit"));
            }
            if (s.contains("reflect_min")) a.reflect_min = number(s["reflect_min"], join(p, "reflect_min"));
            if (s.contains("reflect_max")) a.reflect_max = number(s["reflect_max"], join(p, "reflect_max"));
            if (s.contains("time_to_start")) a.time_to_start = number(s["time_to_start"], join(p, "time_to_start"));
            c.areas_of_effect.push_back(std::move(a));
        }
    }

    if (root.contains("params")) {
        const Json& s = expect_object(root["params"], "params");
        reject_unknown(s, "params", {"max_agents", "agent_radius", "marker_density", "marker_radius",
                                     "goal_distance_threshold", "max_speed", "dt",
                                     "despawn_on_completion"});
        GlobalParams& g = c.params;
        if (s.contains("max_agents")) g.max_agents = integer(s["max_agents"], "params.max_agents");
        if (s.contains("agent_radius")) g.agent_radius = number(s["agent_radius"], "params.agent_radius");
        if (s.contains("marker_density")) g.marker_density = number(s["marker_density"], "params.marker_density");
        if (s.contains("marker_radius")) g.marker_radius = number(s["marker_radius"], "params.marker_radius");
        if (s.contains("goal_distance_threshold")) {
            g.goal_distance_threshold = number(s["goal_distance_threshold"], "params.goal_distance_threshold");
        }
        if (s.contains("max_speed")) g.max_speed = number(s["max_speed"], "params.max_speed");
        if (s.contains("dt")) g.dt = number(s["dt"], "params.dt");
        if (s.contains("despawn_on_completion")) {
            if (!s["despawn_on_completion"].is_boolean()) {
                throw ParseError("params.despawn_on_completion", "expected a boolean");
            }
            g.despawn_on_completion = s["despawn_on_completion"].get<bool>();
        }
    }

    if (root.contains("seed")) {
        const Json& s = root["seed"];
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
            throw ParseError("seed", "expected a non-negative integer");
        }
        c.seed = s.get<std::uint64_t>();
    }

    if (root.contains("queue")) {
        const Json& q = expect_object(root["queue"], "queue");
        reject_unknown(q, "queue", {"entry_line"});
        const Json& line = expect_array(require(q, "queue", "entry_line"), "queue.entry_line");
        if (line.size() != 2) throw ParseError("queue.entry_line", "expected two points");
        c.queue = QueueMetricConfig{point(line[0], "queue.entry_line[0]"),
                                    point(line[1], "queue.entry_line[1]")};
    }
    return c;
}

// ---------------------------------------------------------------- writing

Json pt(Vec2 p) { return Json::array({p.x, p.y}); }
Json rc(const Rect& r) { return Json{{"min", pt(r.min)}, {"max", pt(r.max)}}; }

Json to_json(const ScenarioConfig& c) {
    Json root;
    if (!c.name.empty()) root["name"] = c.name;
    root["bounds"] = rc(c.bounds);
    Json obstacles = Json::array();
    for (const ConvexPolygon& o : c.obstacles) {
        Json verts = Json::array();
        for (Vec2 v : o.vertices()) verts.push_back(pt(v));
        obstacles.push_back(Json{{"vertices", verts}});
    }
    root["obstacles"] = obstacles;
    Json goals = Json::object();
    for (const NamedGoal& g : c.goals) goals[g.name] = pt(g.position);
    root["goals"] = goals;
    Json spawns = Json::array();
    for (const SpawnArea& s : c.spawn_areas) {
        spawns.push_back(Json{{"region", rc(s.region)},
                              {"initial_agents", s.initial_agents},
                              {"goal_list", s.goal_list},
                              {"wait_list", s.wait_list},
                              {"cycle_length", s.cycle_length},
                              {"quantity_per_cycle", s.quantity_per_cycle}});
    }
    root["spawn_areas"] = spawns;
    Json aoes = Json::array();
    for (const AreaOfEffect& a : c.areas_of_effect) {
        aoes.push_back(Json{{"center", pt(a.center)},
                            {"radius", a.radius},
                            {"center_goal", a.center_goal},
                            {"ring_goals", a.ring_goals},
                            {"number_agents_pit", a.number_agents_pit},
                            {"reflect_min", a.reflect_min},
                            {"reflect_max", a.reflect_max},
                            {"time_to_start", a.time_to_start}});
    }
    root["areas_of_effect"] = aoes;
    const GlobalParams& g = c.params;
    root["params"] = Json{{"max_agents", g.max_agents},
                          {"agent_radius", g.agent_radius},
                          {"marker_density", g.marker_density},
                          {"marker_radius", g.marker_radius},
                          {"goal_distance_threshold", g.goal_distance_threshold},
                          {"max_speed", g.max_speed},
                          {"dt", g.dt},
                          {"despawn_on_completion", g.despawn_on_completion}};
    root["seed"] = c.seed;
    if (c.queue) {
        root["queue"] = Json{{"entry_line", Json::array({pt(c.queue->entry_a), pt(c.queue->entry_b)})}};
    }
    return root;
}

// ---------------------------------------------------------------- presets

Rect box(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y1}}; }

ScenarioConfig queue_scene(int scene, double gap) {
    ScenarioConfig c;
    c.bounds = box(0, 0, 60, 20);
    c.queue = QueueMetricConfig{{46, 0}, {46, 20}};
    c.params.max_agents = 100;
    c.params.despawn_on_completion = true;
    c.seed = 1;

    SpawnArea spawn;
    spawn.region = box(52, 4, 58, 16);
    spawn.initial_agents = 30;
    spawn.cycle_length = 3.0;
    spawn.quantity_per_cycle = 3;

    if (scene == 1) {
        // open floor, a row of seven goals
        c.params.marker_density = 0.75;
        c.params.agent_radius = 1.0;
        const double xs[] = {44, 38, 32, 26, 20, 14, 8};
        for (int i = 0; i < 7; ++i) {
            const std::string n = "q" + std::to_string(i + 1);
            c.goals.push_back({n, {xs[i], 10}});
            spawn.goal_list.push_back(n);
        }
    } else {
        c.params.marker_density = 0.5;
        c.params.agent_radius = 5.0;
        // two walls filling the space above and below a corridor from x=10 to x=46
        const double half = gap / 2.0;
        c.obstacles.push_back(ConvexPolygon::from_rect(box(10, 10 + half, 46, 20)));
        c.obstacles.push_back(ConvexPolygon::from_rect(box(10, 0, 46, 10 - half)));
        if (scene == 2) {
            c.goals.push_back({"service", {12, 10}});
            spawn.goal_list = {"service"};
        } else {
            const double xs[] = {42, 34, 26, 18, 12};
            for (int i = 0; i < 5; ++i) {
                const std::string n = "q" + std::to_string(i + 1);
                c.goals.push_back({n, {xs[i], 10}});
                spawn.goal_list.push_back(n);
            }
        }
    }
    spawn.wait_list.assign(spawn.goal_list.size(), 0.0);
    c.spawn_areas.push_back(std::move(spawn));
    return c;
}

ScenarioConfig concert_scene() {
    ScenarioConfig c;
    c.name = "concert";
    c.bounds = box(0, 0, 40, 40);
    c.seed = 42;
    c.params.max_agents = 200;
    c.params.marker_density = 0.5;
    c.params.agent_radius = 5.0;

    // crowd barrier across the whole stage front
    c.obstacles.push_back(ConvexPolygon::from_rect(box(0, 34, 40, 35)));
    c.goals.push_back({"stage_left", {12, 37}});
    c.goals.push_back({"stage_center", {20, 37}});
    c.goals.push_back({"stage_right", {28, 37}});

    const Vec2 center{20, 20};
    c.goals.push_back({"pit_center", center});
    AreaOfEffect aoe;
    aoe.center = center;
    aoe.radius = 5.0;
    aoe.center_goal = "pit_center";
    aoe.number_agents_pit = 20;
    aoe.reflect_min = 1.0;
    aoe.reflect_max = 4.0;
    aoe.time_to_start = 3.0;
    constexpr double ring_radius = 3.0;
    for (int i = 0; i < 8; ++i) {
        const double angle = 2.0 * std::numbers::pi * i / 8.0;  // counter-clockwise
        const std::string n = "ring" + std::to_string(i);
        c.goals.push_back({n, center + Vec2{std::cos(angle), std::sin(angle)} * ring_radius});
        aoe.ring_goals.push_back(n);
    }
    c.areas_of_effect.push_back(std::move(aoe));

    const char* front[] = {"stage_left", "stage_center", "stage_right"};
    const double xs[] = {2, 14, 26, 38};
    for (int i = 0; i < 3; ++i) {
        SpawnArea s;
        s.region = box(xs[i], 2, xs[i + 1], 32);
        s.initial_agents = 100;
        s.goal_list = {front[i]};
        s.wait_list = {0.0};
        s.cycle_length = 10.0;
        s.quantity_per_cycle = 0;
        c.spawn_areas.push_back(std::move(s));
    }
    return c;
}

void check(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

Vec2 ScenarioConfig::goal_position(std::string_view goal_name) const {
    for (const NamedGoal& g : goals) {
        if (g.name == goal_name) return g.position;
    }
    throw ConfigError("unknown goal '" + std::string(goal_name) + "'");
}

bool ScenarioConfig::has_goal(std::string_view goal_name) const {
    return std::any_of(goals.begin(), goals.end(), [&](const NamedGoal& g) { return g.name == goal_name; });
}

void validate(const ScenarioConfig& c) {
    check(!c.bounds.degenerate(), "bounds must have positive width and height");

    const GlobalParams& g = c.params;
    check(g.max_agents >= 1, "params.max_agents must be >= 1");
    check(g.agent_radius > 0, "params.agent_radius must be positive");
    check(g.marker_density > 0, "params.marker_density must be positive");
    check(g.marker_radius > 0, "params.marker_radius must be positive");
    check(g.goal_distance_threshold > 0, "params.goal_distance_threshold must be positive");
    check(g.max_speed > 0, "params.max_speed must be positive");
    check(g.dt > 0, "params.dt must be positive");

    for (std::size_t i = 0; i < c.goals.size(); ++i) {
        for (std::size_t k = i + 1; k < c.goals.size(); ++k) {
            check(c.goals[i].name != c.goals[k].name, "duplicate goal '" + c.goals[i].name + "'");
        }
    }
    auto known = [&](const std::string& name, const std::string& where) {
        check(c.has_goal(name), where + ": dangling goal reference '" + name + "'");
    };

    for (std::size_t i = 0; i < c.spawn_areas.size(); ++i) {
        const SpawnArea& s = c.spawn_areas[i];
        const std::string p = "spawn_areas[" + std::to_string(i) + "]";
        check(!s.region.degenerate(), p + ": region must have positive area");
        check(c.bounds.contains(s.region), p + ": region must lie inside bounds");
        check(s.initial_agents >= 0, p + ": initial_agents must be >= 0");
        check(s.quantity_per_cycle >= 0, p + ": quantity_per_cycle must be >= 0");
        check(s.cycle_length > 0, p + ": cycle_length must be positive");
        check(!s.goal_list.empty(), p + ": goal_list must not be empty");
        check(s.wait_list.empty() || s.wait_list.size() == s.goal_list.size(),
              p + ": wait_list must match goal_list length");
        for (double w : s.wait_list) check(w >= 0, p + ": waits must be >= 0");
        for (const std::string& n : s.goal_list) known(n, p);
        double covered = 0.0;
        for (const ConvexPolygon& o : c.obstacles) covered += o.clipped_area(s.region);
        check(covered < s.region.area() * (1.0 - 1e-9), p + ": region is entirely covered by obstacles");
    }

    for (std::size_t i = 0; i < c.areas_of_effect.size(); ++i) {
        const AreaOfEffect& a = c.areas_of_effect[i];
        const std::string p = "areas_of_effect[" + std::to_string(i) + "]";
        check(a.radius > 0, p + ": radius must be positive");
        check(c.bounds.contains(Rect{a.center - Vec2{a.radius, a.radius}, a.center + Vec2{a.radius, a.radius}}),
              p + ": area must lie inside bounds");
        check(a.reflect_min > 0 && a.reflect_min < a.reflect_max && a.reflect_max <= a.radius,
              p + ": need 0 < reflect_min < reflect_max <= radius");
        check(a.number_agents_pit >= 1, p + ": number_agents_pit must be >= 1");
        check(a.time_to_start >= 0, p + ": time_to_start must be >= 0");
        known(a.center_goal, p);
        for (const std::string& n : a.ring_goals) {
            known(n, p);
            check(distance(c.goal_position(n), a.center) <= a.radius,
                  p + ": ring goal '" + n + "' lies outside the area");
        }
    }

    if (c.queue) {
        check(c.queue->entry_a != c.queue->entry_b, "queue.entry_line must have two distinct points");
    }
}

ScenarioConfig load_scenario(std::string_view document) {
    Json root;
    try {
        root = Json::parse(document.begin(), document.end());
    } catch (const Json::parse_error& e) {
        throw ParseError(line_col(document, e.byte == 0 ? 0 : e.byte - 1), e.what());
    }
    ScenarioConfig c = from_json(root);
    validate(c);
    return c;
}

ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return load_scenario(buffer.str());
}

std::string serialize(const ScenarioConfig& config) { return to_json(config).dump(2) + "\n"; }

std::vector<std::string> preset_names() {
    return {"queue1", "queue2_wide", "queue2_narrow", "queue3_wide", "queue3_narrow", "concert"};
}

ScenarioConfig preset(std::string_view name) {
    ScenarioConfig c;
    if (name == "queue1") {
        c = queue_scene(1, 0);
    } else if (name == "queue2_wide") {
        c = queue_scene(2, kWideGap);
    } else if (name == "queue2_narrow") {
        c = queue_scene(2, kNarrowGap);
    } else if (name == "queue3_wide") {
        c = queue_scene(3, kWideGap);
    } else if (name == "queue3_narrow") {
        c = queue_scene(3, kNarrowGap);
    } else if (name == "concert") {
        c = concert_scene();
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "'");
    }
    c.name = std::string(name);
    validate(c);
    return c;
}

int spawn_due(const SpawnArea& area, double sim_time, double last_spawn_time, int live_agents,
              int max_agents) {
    if (sim_time - last_spawn_time < area.cycle_length) return 0;
    return std::max(0, std::min(area.quantity_per_cycle, max_agents - live_agents));
}

}  // namespace crowd
