#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "../oracles.hpp"
#include "crowd/engine.hpp"
#include "crowd/errors.hpp"

using namespace crowd;

namespace {

EngineOptions checked() {
    EngineOptions o;
    o.check_invariants = true;
    return o;
}

}  // namespace

TEST_CASE("ten seconds at 30 Hz is 300 snapshots") {
    int frames = 0;
    std::int64_t last = 0;
    const MetricsReport r = run(preset("queue1"), {}, 10.0, [&](const FrameSnapshot& f) {
        ++frames;
        CHECK(f.step == last + 1);
        CHECK(f.time == static_cast<double>(f.step) * (1.0 / 30.0));
        last = f.step;
    });
    CHECK(frames == 300);
    CHECK(r.steps == 300);
}

TEST_CASE("step and time arithmetic") {
    CHECK(steps_for(10.0, 1.0 / 30) == 300);
    CHECK(steps_for(60.0, 1.0 / 30) == 1800);
    CHECK(steps_for(0.01, 1.0 / 30) == 1);
    CHECK(step_for_time(5.0, 1.0 / 30) == 150);
    CHECK(step_for_time(0.0, 1.0 / 30) == 1);
    CHECK_THROWS_AS(run(preset("queue1"), {}, 0.0), ConfigError);
}

TEST_CASE("init places agents inside their spawn regions") {
    const Engine e(preset("concert"), checked());
    const auto& agents = e.state().agents;
    CHECK(agents.size() > 0);
    CHECK(agents.size() <= 200);
    for (const Agent& a : agents) {
        CHECK(e.config().spawn_areas[static_cast<std::size_t>(a.spawn_area)].region.contains(a.position));
    }
    for (const auto& b : e.state().behaviors) CHECK(b.phase == PitPhase::Idle);
    CHECK(e.state().step_index == 0);
}

TEST_CASE("equal configs give identical states") {
    const Engine a(preset("concert")), b(preset("concert"));
    CHECK(serialize_state(a.state()) == serialize_state(b.state()));
    ScenarioConfig other = preset("concert");
    other.seed = 43;
    CHECK(serialize_state(a.state()) != serialize_state(Engine(other).state()));
}

TEST_CASE("no marker inside the corridor walls") {
    ScenarioConfig c = preset("queue3_narrow");
    c.params.marker_density = 0.5;
    const Engine e(c);
    for (const Marker& m : e.state().field->markers()) {
        for (const ConvexPolygon& o : c.obstacles) CHECK_FALSE(o.contains_strict(m.position));
    }
}

TEST_CASE("trigger at step k shows opening in snapshot k") {
    Engine e(preset("concert"), checked());
    for (int i = 0; i < 4; ++i) e.step();
    const FrameSnapshot f = e.step({{EngineCommandKind::TriggerMoshpit, "aoe0"}});
    CHECK(f.step == 5);
    REQUIRE(f.behaviors.size() == 1);
    CHECK(f.behaviors[0].phase == PitPhase::Opening);
}

TEST_CASE("bad commands are rejected and the step proceeds") {
    Engine e(preset("concert"));
    std::vector<CommandOutcome> out;
    const FrameSnapshot f = e.step({{EngineCommandKind::TriggerMoshpit, "aoe7"},
                                    {EngineCommandKind::TriggerMoshpit, "stage"},
                                    {EngineCommandKind::TriggerCirclepit, "aoe0"},
                                    {EngineCommandKind::TriggerMoshpit, "aoe0"}},
                                   &out);
    REQUIRE(out.size() == 4);
    CHECK_FALSE(out[0].accepted);
    CHECK_FALSE(out[1].accepted);
    CHECK(out[2].accepted);
    CHECK_FALSE(out[3].accepted);
    CHECK(out[3].error == "behavior busy");
    CHECK(f.step == 1);
}

TEST_CASE("idle step with nothing due only moves agents") {
    ScenarioConfig c = preset("concert");
    Engine e(c);
    const std::size_t n = e.state().agents.size();
    const FrameSnapshot f = e.step();
    CHECK(e.state().agents.size() == n);
    CHECK(f.behaviors[0].phase == PitPhase::Idle);
}

TEST_CASE("double run gives byte-identical streams") {
    const std::vector<ScheduledCommand> timeline{{2.0, {EngineCommandKind::TriggerCirclepit, "aoe0"}},
                                                 {9.0, {EngineCommandKind::StopBehavior, "aoe0"}}};
    std::string a, b;
    run(preset("concert"), timeline, 12.0, [&](const FrameSnapshot& f) { a += to_json_line(f) + "\n"; });
    run(preset("concert"), timeline, 12.0, [&](const FrameSnapshot& f) { b += to_json_line(f) + "\n"; });
    CHECK(a == b);
    CHECK(a.size() > 0);
}

TEST_CASE("snapshot lines round-trip") {
    Engine e(preset("concert"));
    e.step({{EngineCommandKind::TriggerMoshpit, "aoe0"}});
    for (int i = 0; i < 120; ++i) {
        const FrameSnapshot f = e.step();
        const std::string line = to_json_line(f);
        REQUIRE(frame_from_json(line) == f);
        REQUIRE(to_json_line(frame_from_json(line)) == line);
    }
    CHECK_THROWS_AS(frame_from_json("{\"type\":\"world\"}"), ParseError);
    CHECK_THROWS_AS(frame_from_json("not json"), ParseError);
}

TEST_CASE("invariant sweep holds on every preset") {
    for (const std::string& name : preset_names()) {
        CAPTURE(name);
        std::vector<ScheduledCommand> timeline;
        if (name == "concert") {
            timeline = {{1.0, {EngineCommandKind::TriggerMoshpit, "aoe0"}},
                        {10.0, {EngineCommandKind::StopBehavior, "aoe0"}},
                        {11.0, {EngineCommandKind::TriggerCirclepit, "aoe0"}}};
        }
        CHECK_NOTHROW(run(preset(name), timeline, 20.0, {}, checked()));
    }
}

TEST_CASE("live agents never exceed the cap") {
    ScenarioConfig c = preset("queue1");
    c.params.max_agents = 40;
    c.params.despawn_on_completion = false;
    Engine e(c);
    for (int i = 0; i < 900; ++i) {
        const FrameSnapshot f = e.step();
        REQUIRE(f.live_agents <= 40);
    }
    CHECK(e.state().agents.size() == 40);
}

TEST_CASE("kendall distance matches pair enumeration") {
    std::mt19937 gen(9);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = static_cast<int>(gen() % 40);
        std::vector<std::int64_t> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
        for (auto& v : a) v = gen() % 15;
        for (auto& v : b) v = gen() % 15;
        const std::vector<long long> la(a.begin(), a.end()), lb(b.begin(), b.end());
        CHECK(kendall_distance(a, b) == doctest::Approx(oracle::kendall_pairs(la, lb)).epsilon(1e-12));
    }
    const std::vector<std::int64_t> same{1, 2, 3, 4};
    const std::vector<std::int64_t> reversed{4, 3, 2, 1};
    CHECK(kendall_distance(same, same) == 0.0);
    CHECK(kendall_distance(same, reversed) == 1.0);
}

TEST_CASE("single-file trajectory has no inversions") {
    // ten agents walk a line in file, two meters apart, through the entry
    // line at x = 10 and on to the goal at x = 30
    QueueTracker q(QueueMetricConfig{{10, 0}, {10, 4}});
    const Vec2 goal{30, 2};
    std::vector<Vec2> pos;
    for (int i = 0; i < 10; ++i) pos.push_back({8.0 - 2.0 * i, 2.0});
    for (std::int64_t step = 1; step <= 400; ++step) {
        for (AgentId id = 0; id < 10; ++id) {
            Vec2& p = pos[static_cast<std::size_t>(id)];
            const Vec2 next{std::min(p.x + 0.2, goal.x), p.y};
            q.observe_move(id, p, next, step);
            p = next;
            if (distance(p, goal) <= 1.0) q.observe_arrival(id, step);
        }
    }
    CHECK(q.completed() == 10);
    CHECK(q.inversions() == 0.0);
}

TEST_CASE("an overtaking trajectory counts its inversions") {
    QueueTracker q(QueueMetricConfig{{10, 0}, {10, 4}});
    // agents enter in id order and arrive in reverse order
    for (AgentId id = 0; id < 4; ++id) q.observe_move(id, {9, 2}, {11, 2}, 10 + id);
    for (AgentId id = 0; id < 4; ++id) q.observe_arrival(id, 100 - id);
    q.observe_arrival(9, 50);  // never entered
    CHECK(q.completed() == 4);
    CHECK(q.inversions() == 1.0);
}

TEST_CASE("openers spread out over the opening") {
    ScenarioConfig c = preset("concert");
    Engine e(c);
    for (int i = 0; i < 90; ++i) e.step();
    e.step({{EngineCommandKind::TriggerMoshpit, "aoe0"}});
    const auto openers = e.state().behaviors[0].openers;
    REQUIRE(openers.size() > 0);
    auto mean_distance = [&] {
        double sum = 0;
        for (AgentId id : openers) {
            sum += distance(find_agent(std::span<const Agent>(e.state().agents), id)->position, c.areas_of_effect[0].center);
        }
        return sum / static_cast<double>(openers.size());
    };
    double previous = mean_distance();
    for (int window = 0; window < 2; ++window) {
        for (int i = 0; i < e.window_steps(); ++i) e.step();
        const double now = mean_distance();
        CHECK(now >= previous);
        previous = now;
    }
}

TEST_CASE("same seed and trigger times give the same participants") {
    auto participants = [](std::uint64_t seed) {
        ScenarioConfig c = preset("concert");
        c.seed = seed;
        Engine e(c);
        e.step({{EngineCommandKind::TriggerMoshpit, "aoe0"}});
        for (int i = 0; i < 95; ++i) e.step();
        return e.state().behaviors[0].participants;
    };
    CHECK(participants(42) == participants(42));
    CHECK(participants(7) == participants(7));
}
