#include <doctest.h>

#include <json.hpp>

#include "crowd/errors.hpp"
#include "crowd/session.hpp"

using namespace crowd;

TEST_CASE("client messages parse into commands") {
    Command c = parse_client_message(R"({"type":"command","kind":"TRIGGER_MOSHPIT","behavior_id":"aoe0"})", 1234);
    CHECK(c.kind == CommandKind::TriggerMoshpit);
    CHECK(c.behavior_id == "aoe0");
    CHECK(c.issued_at == 1234);
    CHECK(c.applied_at_step == -1);

    CHECK(parse_client_message(R"({"type":"pause"})", 0).kind == CommandKind::Pause);
    CHECK(parse_client_message(R"({"type":"resume","version":1})", 0).kind == CommandKind::Resume);
    c = parse_client_message(R"({"type":"set_speed","factor":0.25})", 0);
    CHECK(c.kind == CommandKind::SetSpeed);
    CHECK(c.factor == 0.25);
}

TEST_CASE("malformed client messages") {
    const char* bad[] = {
        "{",
        "[1,2]",
        R"({"kind":"PAUSE"})",
        R"({"type":"dance"})",
        R"({"type":"command","kind":"TRIGGER_MOSHPIT"})",
        R"({"type":"command","kind":"JUMP","behavior_id":"aoe0"})",
        R"({"type":"command","kind":"STOP_BEHAVIOR","behavior_id":7})",
        R"({"type":"set_speed","factor":3})",
        R"({"type":"set_speed"})",
        R"({"type":"pause","version":2})",
    };
    for (const char* text : bad) {
        CAPTURE(text);
        CHECK_THROWS_AS(parse_client_message(text, 0), ParseError);
    }
}

TEST_CASE("command invariants") {
    for (double f : kSpeedFactors) CHECK_NOTHROW(validate(Command{CommandKind::SetSpeed, {}, f, 0, -1}));
    CHECK_THROWS_AS(validate(Command{CommandKind::SetSpeed, {}, 1.5, 0, -1}), ParseError);
    CHECK_THROWS_AS(validate(Command{CommandKind::StopBehavior, {}, {}, 0, -1}), ParseError);
    CHECK_NOTHROW(validate(Command{CommandKind::Pause, {}, {}, 0, -1}));
}

TEST_CASE("error and world messages carry type and version") {
    const auto err = nlohmann::json::parse(error_message("behavior busy"));
    CHECK(err["type"] == "error");
    CHECK(err["version"] == kProtocolVersion);
    CHECK(err["reason"] == "behavior busy");

    const Engine e(preset("concert"));
    const auto world = nlohmann::json::parse(world_message(e));
    CHECK(world["type"] == "world");
    CHECK(world["version"] == kProtocolVersion);
    CHECK(world["markers"].size() == e.state().field->size());
    CHECK(world["obstacles"].size() == 1);
    CHECK(world["areas_of_effect"][0]["id"] == "aoe0");
    CHECK(world["areas_of_effect"][0]["ring"].size() == 8);
    CHECK(world.contains("bounds"));
    CHECK(world.contains("goals"));
}

TEST_CASE("session log round-trips") {
    SessionLog log;
    log.scenario_ref = "concert";
    log.scenario = preset("concert");
    log.scenario.seed = 77;
    log.record_ref = "stream.jsonl";
    log.steps = 321;
    log.commands = {{CommandKind::TriggerMoshpit, "aoe0", {}, 1000, 12},
                    {CommandKind::SetSpeed, {}, 2.0, 1001, 13},
                    {CommandKind::StopBehavior, "aoe0", {}, 1002, 200}};
    const SessionLog back = session_log_from_json(to_json(log));
    CHECK(back.scenario == log.scenario);
    CHECK(back.scenario_ref == log.scenario_ref);
    CHECK(back.record_ref == log.record_ref);
    CHECK(back.steps == log.steps);
    CHECK(back.commands == log.commands);
    CHECK_THROWS_AS(session_log_from_json("{}"), ParseError);
}

TEST_CASE("live session: trigger then busy") {
    LiveSession s(preset("concert"), "concert");
    CHECK_FALSE(s.submit({CommandKind::TriggerMoshpit, "aoe0", {}, 0, -1}, 1).has_value());
    const LiveSession::Tick t = s.tick();
    REQUIRE(t.frame.has_value());
    CHECK(t.frame->behaviors[0].phase == PitPhase::Opening);
    CHECK(s.submit({CommandKind::TriggerCirclepit, "aoe0", {}, 0, -1}, 1) == "behavior busy");
    CHECK(s.submit({CommandKind::TriggerCirclepit, "aoe3", {}, 0, -1}, 1).has_value());
    const SessionLog log = s.log();
    REQUIRE(log.commands.size() == 1);
    CHECK(log.commands[0].applied_at_step == 1);
}

TEST_CASE("live session: two triggers in one tick, second is rejected at the boundary") {
    LiveSession s(preset("concert"), "concert");
    CHECK_FALSE(s.submit({CommandKind::TriggerMoshpit, "aoe0", {}, 0, -1}, 1).has_value());
    CHECK_FALSE(s.submit({CommandKind::TriggerCirclepit, "aoe0", {}, 0, -1}, 2).has_value());
    const LiveSession::Tick t = s.tick();
    REQUIRE(t.rejections.size() == 1);
    CHECK(t.rejections[0].client == 2);
    CHECK(t.rejections[0].reason == "behavior busy");
    CHECK(s.log().commands.size() == 1);
}

TEST_CASE("live session: pause holds the step index") {
    LiveSession s(preset("concert"), "concert");
    for (int i = 0; i < 5; ++i) s.tick();
    s.submit({CommandKind::Pause, {}, {}, 0, -1});
    CHECK_FALSE(s.tick().frame.has_value());
    CHECK(s.paused());
    for (int i = 0; i < 10; ++i) CHECK_FALSE(s.tick().frame.has_value());
    CHECK(s.step_index() == 5);
    // a trigger sent while paused waits for the resume
    s.submit({CommandKind::TriggerMoshpit, "aoe0", {}, 0, -1});
    CHECK_FALSE(s.tick().frame.has_value());
    s.submit({CommandKind::Resume, {}, {}, 0, -1});
    const LiveSession::Tick t = s.tick();
    REQUIRE(t.frame.has_value());
    CHECK(t.frame->step == 6);
    CHECK(t.frame->behaviors[0].phase == PitPhase::Opening);
    s.submit({CommandKind::SetSpeed, {}, 4.0, 0, -1});
    s.tick();
    CHECK(s.speed() == 4.0);
}

TEST_CASE("replaying a live session log reproduces its stream") {
    LiveSession s(preset("concert"), "concert");
    std::vector<std::string> live;
    auto tick = [&] {
        const auto t = s.tick();
        if (t.frame) live.push_back(to_json_line(*t.frame));
    };
    for (int i = 0; i < 30; ++i) tick();
    s.submit({CommandKind::TriggerCirclepit, "aoe0", {}, 0, -1});
    for (int i = 0; i < 20; ++i) tick();
    s.submit({CommandKind::Pause, {}, {}, 0, -1});
    for (int i = 0; i < 7; ++i) tick();
    s.submit({CommandKind::Resume, {}, {}, 0, -1});
    s.submit({CommandKind::SetSpeed, {}, 2.0, 0, -1});
    for (int i = 0; i < 120; ++i) tick();
    s.submit({CommandKind::StopBehavior, "aoe0", {}, 0, -1});
    for (int i = 0; i < 30; ++i) tick();

    const SessionLog log = session_log_from_json(to_json(s.log()));
    CHECK(log.steps == static_cast<std::int64_t>(live.size()));
    std::vector<std::string> replayed;
    replay(log, [&](const FrameSnapshot& f) { replayed.push_back(to_json_line(f)); });
    CHECK(replayed == live);
}
