#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowd/agent_dynamics.hpp"
#include "crowd/behaviors.hpp"

namespace crowd {

struct AgentRecord {
    AgentId id = 0;
    Vec2 position;
    MotionMode mode = MotionMode::Attract;
    BehaviorTag tag = BehaviorTag::None;
    std::size_t cursor = 0;
    bool operator==(const AgentRecord&) const = default;
};

struct BehaviorRecord {
    std::string id;
    PitKind kind = PitKind::Moshpit;
    PitPhase phase = PitPhase::Idle;
    std::vector<AgentId> participants;
    int realized = 0;
    double open_space = 0.0;
    bool operator==(const BehaviorRecord&) const = default;
};

/// Immutable record of one step. Its JSON form is both the recorded
/// trajectory line and the live `frame` message.
struct FrameSnapshot {
    std::int64_t step = 0;
    double time = 0.0;
    std::vector<AgentRecord> agents;
    std::vector<BehaviorRecord> behaviors;
    /// Smallest distance between two agents this step (0 with < 2 agents).
    double min_distance = 0.0;
    int live_agents = 0;
    bool operator==(const FrameSnapshot&) const = default;
};

/// Single-line JSON with a fixed field order.
std::string to_json_line(const FrameSnapshot& frame);

/// Throws ParseError on malformed input.
FrameSnapshot frame_from_json(std::string_view line);

MotionMode motion_mode_from_string(std::string_view s);
BehaviorTag behavior_tag_from_string(std::string_view s);
PitKind pit_kind_from_string(std::string_view s);
PitPhase pit_phase_from_string(std::string_view s);

}  // namespace crowd
