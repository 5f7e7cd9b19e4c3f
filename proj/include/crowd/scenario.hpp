#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowd/geometry.hpp"

namespace crowd {

struct NamedGoal {
    std::string name;
    Vec2 position;
    bool operator==(const NamedGoal&) const = default;
};

struct SpawnArea {
    Rect region;
    int initial_agents = 0;
    std::vector<std::string> goal_list;
    /// Per-goal waits in seconds; empty means zero wait everywhere.
    std::vector<double> wait_list;
    double cycle_length = 1.0;
    int quantity_per_cycle = 0;
    bool operator==(const SpawnArea&) const = default;
};

struct AreaOfEffect {
    Vec2 center;
    double radius = 5.0;
    std::string center_goal;
    std::vector<std::string> ring_goals;
    int number_agents_pit = 20;
    double reflect_min = 1.0;
    double reflect_max = 4.0;
    double time_to_start = 3.0;
    bool operator==(const AreaOfEffect&) const = default;
};

struct GlobalParams {
    int max_agents = 200;
    double agent_radius = 1.0;
    double marker_density = 0.75;
    double marker_radius = 0.6;
    double goal_distance_threshold = 1.0;
    double max_speed = 1.3;
    double dt = 1.0 / 30.0;
    /// Remove agents once the last goal of their (non-looping) program is
    /// reached and waited out.
    bool despawn_on_completion = false;
    bool operator==(const GlobalParams&) const = default;
};

/// Line that marks the entrance of a queue; agents are ranked by the step on
/// which they first cross it.
struct QueueMetricConfig {
    Vec2 entry_a;
    Vec2 entry_b;
    bool operator==(const QueueMetricConfig&) const = default;
};

struct ScenarioConfig {
    std::string name;
    Rect bounds{{0, 0}, {40, 40}};
    std::vector<ConvexPolygon> obstacles;
    std::vector<NamedGoal> goals;
    std::vector<SpawnArea> spawn_areas;
    std::vector<AreaOfEffect> areas_of_effect;
    GlobalParams params;
    std::uint64_t seed = 0;
    std::optional<QueueMetricConfig> queue;

    /// Throws ConfigError when `name` is not declared.
    Vec2 goal_position(std::string_view goal_name) const;
    bool has_goal(std::string_view goal_name) const;

    bool operator==(const ScenarioConfig&) const = default;
};

/// Checks every config invariant; throws ConfigError naming the first
/// violation.
void validate(const ScenarioConfig& config);

/// Parses and validates a scenario document (JSON object tree). Syntax errors
/// and wrong field types raise ParseError with a line or field location;
/// invariant violations raise ConfigError.
ScenarioConfig load_scenario(std::string_view document);
ScenarioConfig load_scenario_file(const std::string& path);

/// Canonical document text; load_scenario(serialize(c)) == c.
std::string serialize(const ScenarioConfig& config);

std::vector<std::string> preset_names();

/// Built-in scenes: queue1, queue2_wide, queue2_narrow, queue3_wide,
/// queue3_narrow, concert. Throws ConfigError for any other name.
ScenarioConfig preset(std::string_view name);

/// Corridor widths used by the *_wide and *_narrow queue presets, meters.
inline constexpr double kNarrowGap = 2.0;
inline constexpr double kWideGap = 6.0;

/// Agents a spawn area should create now, honoring the global cap.
int spawn_due(const SpawnArea& area, double sim_time, double last_spawn_time, int live_agents,
              int max_agents);

}  // namespace crowd
