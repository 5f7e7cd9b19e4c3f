#include "crowd/snapshot.hpp"

#include <json.hpp>

#include "crowd/errors.hpp"

namespace crowd {

using Json = nlohmann::ordered_json;

MotionMode motion_mode_from_string(std::string_view s) {
    if (s == "attract") return MotionMode::Attract;
    if (s == "repel") return MotionMode::Repel;
    throw ParseError("mode", "unknown motion mode '" + std::string(s) + "'");
}

BehaviorTag behavior_tag_from_string(std::string_view s) {
    if (s == "none") return BehaviorTag::None;
    if (s == "opener") return BehaviorTag::Opener;
    if (s == "participant") return BehaviorTag::Participant;
    throw ParseError("tag", "unknown behavior tag '" + std::string(s) + "'");
}

PitKind pit_kind_from_string(std::string_view s) {
    if (s == "moshpit") return PitKind::Moshpit;
    if (s == "circlepit") return PitKind::Circlepit;
    throw ParseError("kind", "unknown behavior kind '" + std::string(s) + "'");
}

PitPhase pit_phase_from_string(std::string_view s) {
    if (s == "idle") return PitPhase::Idle;
    if (s == "opening") return PitPhase::Opening;
    if (s == "active") return PitPhase::Active;
    if (s == "ending") return PitPhase::Ending;
    throw ParseError("phase", "unknown phase '" + std::string(s) + "'");
}

std::string to_json_line(const FrameSnapshot& f) {
    Json agents = Json::array();
    for (const AgentRecord& a : f.agents) {
        agents.push_back(Json{{"id", a.id},
                              {"x", a.position.x},
                              {"y", a.position.y},
                              {"mode", to_string(a.mode)},
                              {"tag", to_string(a.tag)},
                              {"cursor", a.cursor}});
    }
    Json behaviors = Json::array();
    for (const BehaviorRecord& b : f.behaviors) {
        behaviors.push_back(Json{{"id", b.id},
                                 {"kind", to_string(b.kind)},
                                 {"phase", to_string(b.phase)},
                                 {"participants", b.participants},
                                 {"realized", b.realized},
                                 {"open_space", b.open_space}});
    }
    Json j{{"type", "frame"},
           {"step", f.step},
           {"time", f.time},
           {"agents", std::move(agents)},
           {"behaviors", std::move(behaviors)},
           {"metrics", Json{{"min_distance", f.min_distance}, {"live_agents", f.live_agents}}}};
    return j.dump();
}

FrameSnapshot frame_from_json(std::string_view line) {
    try {
        const Json j = Json::parse(line.begin(), line.end());
        if (j.value("type", "") != "frame") throw ParseError("type", "not a frame record");
        FrameSnapshot f;
        f.step = j.at("step").get<std::int64_t>();
        f.time = j.at("time").get<double>();
        for (const Json& a : j.at("agents")) {
            f.agents.push_back({a.at("id").get<AgentId>(),
                                {a.at("x").get<double>(), a.at("y").get<double>()},
                                motion_mode_from_string(a.at("mode").get<std::string>()),
                                behavior_tag_from_string(a.at("tag").get<std::string>()),
                                a.at("cursor").get<std::size_t>()});
        }
        for (const Json& b : j.at("behaviors")) {
            f.behaviors.push_back({b.at("id").get<std::string>(),
                                   pit_kind_from_string(b.at("kind").get<std::string>()),
                                   pit_phase_from_string(b.at("phase").get<std::string>()),
                                   b.at("participants").get<std::vector<AgentId>>(),
                                   b.at("realized").get<int>(),
                                   b.at("open_space").get<double>()});
        }
        f.min_distance = j.at("metrics").at("min_distance").get<double>();
        f.live_agents = j.at("metrics").at("live_agents").get<int>();
        return f;
    } catch (const Json::exception& e) {
        throw ParseError("frame", e.what());
    }
}

}  // namespace crowd
