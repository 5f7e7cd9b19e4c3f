#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "crowd/cli.hpp"
#include "crowd/errors.hpp"

using namespace crowd;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "crowdsim");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

struct Scratch {
    std::filesystem::path dir =
        std::filesystem::temp_directory_path() / ("crowd_cli_test_" + std::to_string(::getpid()));
    Scratch() { std::filesystem::create_directories(dir); }
    ~Scratch() { std::filesystem::remove_all(dir); }
    std::string operator()(const std::string& name) const { return (dir / name).string(); }
};

std::vector<std::string> lines_of(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("trigger specs") {
    const ScheduledCommand c = parse_trigger("moshpit@5,aoe0");
    CHECK(c.time == 5.0);
    CHECK(c.command.kind == EngineCommandKind::TriggerMoshpit);
    CHECK(c.command.behavior_id == "aoe0");
    CHECK(parse_trigger("circlepit@12.5,aoe1").command.kind == EngineCommandKind::TriggerCirclepit);
    CHECK(parse_trigger("stop@30,aoe0").command.kind == EngineCommandKind::StopBehavior);
    for (const char* bad : {"moshpit", "moshpit@5", "dance@5,aoe0", "moshpit@x,aoe0", "moshpit@5,stage", "moshpit@-1,aoe0"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(parse_trigger(bad), ParseError);
    }
}

TEST_CASE("grid files") {
    const auto rows = parse_grid("# comment\nmax_agents, marker_density ,agent_radius\n300,0.75,1\n\n200,0.5,5\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].values[1] == std::pair<std::string, double>{"marker_density", 0.5});
    CHECK_THROWS_WITH_AS(parse_grid("max_agents,colour\n1,2\n"), doctest::Contains("colour"), ParseError);
    CHECK_THROWS_WITH_AS(parse_grid("max_agents\n1,2\n"), doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_AS(parse_grid("max_agents\nmany\n"), ParseError);
    CHECK_THROWS_AS(parse_grid(""), ParseError);
}

TEST_CASE("parameter overrides") {
    ScenarioConfig c = preset("concert");
    apply_parameter(c, "max_agents", 300);
    apply_parameter(c, "number_agents_pit", 12);
    apply_parameter(c, "reflect_max", 3.5);
    CHECK(c.params.max_agents == 300);
    CHECK(c.areas_of_effect[0].number_agents_pit == 12);
    CHECK(c.areas_of_effect[0].reflect_max == 3.5);
    CHECK_THROWS_AS(apply_parameter(c, "max_agents", 2.5), ConfigError);
    CHECK_THROWS_AS(apply_parameter(c, "colour", 1), ConfigError);
}

TEST_CASE("run writes metrics, record and a log that verifies") {
    Scratch tmp;
    const Result r = cli({"run", "--preset", "concert", "--duration", "8", "--trigger", "moshpit@5,aoe0", "--seed",
                          "42", "--metrics", tmp("m.json"), "--record", tmp("s.jsonl"), "--log", tmp("s.log")});
    REQUIRE(r.code == 0);
    const auto metrics = nlohmann::json::parse(std::ifstream(tmp("m.json")));
    CHECK(metrics["behaviors"][0].contains("realized_participants"));
    CHECK(metrics["steps"] == 240);
    CHECK(lines_of(tmp("s.jsonl")).size() == 240);

    Result v = cli({"replay", "--log", tmp("s.log"), "--verify"});
    CHECK(v.code == 0);

    // tamper with one recorded frame
    auto lines = lines_of(tmp("s.jsonl"));
    lines[99].replace(lines[99].find("\"time\""), 6, "\"tyme\"");
    {
        std::ofstream out(tmp("bad.jsonl"));
        for (const auto& l : lines) out << l << '\n';
    }
    v = cli({"replay", "--log", tmp("s.log"), "--verify", tmp("bad.jsonl")});
    CHECK(v.code != 0);
    CHECK(v.err.find("step 100") != std::string::npos);

    v = cli({"replay", "--log", tmp("s.log"), "--stream", tmp("again.jsonl")});
    CHECK(v.code == 0);
    CHECK(lines_of(tmp("again.jsonl")) == lines_of(tmp("s.jsonl")));
}

TEST_CASE("usage errors exit nonzero with usage text") {
    Result r = cli({"fly"});
    CHECK(r.code != 0);
    CHECK((r.out + r.err).find("Usage") != std::string::npos);
    r = cli({"run", "--frobnicate"});
    CHECK(r.code != 0);
    CHECK((r.out + r.err).find("Usage") != std::string::npos);
    r = cli({"run", "--preset", "stadium"});
    CHECK(r.code != 0);
    r = cli({});
    CHECK(r.code != 0);
    r = cli({"run", "--preset", "concert", "--scenario", "x.json"});
    CHECK(r.code != 0);
}

TEST_CASE("sweep rows, ordering and per-run failures") {
    Scratch tmp;
    {
        std::ofstream g(tmp("g.grid"));
        g << "max_agents,marker_density,agent_radius\n60,0.75,1\n60,-1,5\n";
    }
    const Result r = cli({"sweep", "--preset", "concert", "--grid", tmp("g.grid"), "--seeds", "2", "--seed-base",
                          "5", "--duration", "1", "--out", tmp("out.csv")});
    REQUIRE(r.code == 0);
    const auto lines = lines_of(tmp("out.csv"));
    REQUIRE(lines.size() == 5);
    CHECK(lines[0].rfind("row,seed,max_agents,marker_density,agent_radius,status", 0) == 0);
    CHECK(lines[0].find("aoe0_realized") != std::string::npos);
    CHECK(lines[1].rfind("0,5,", 0) == 0);
    CHECK(lines[2].rfind("0,6,", 0) == 0);
    CHECK(lines[1].find(",ok,") != std::string::npos);
    CHECK(lines[3].rfind("1,5,", 0) == 0);
    CHECK(lines[3].find(",error,") != std::string::npos);

    const Result none = cli({"sweep", "--preset", "concert", "--grid", tmp("g.grid"), "--seeds", "0"});
    CHECK(none.code != 0);
    CHECK(none.err.find("seed") != std::string::npos);
}

TEST_CASE("sample grid gives four rows per seed") {
    const auto grid = parse_grid(
        "max_agents,marker_density,agent_radius\n300,0.75,1\n300,0.75,5\n200,0.5,1\n200,0.5,5\n");
    const auto runs = sweep(preset("concert"), grid, {1, 2, 3}, {}, 0.2);
    CHECK(runs.size() == 12);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        CHECK(runs[i].row == i / 3);
        CHECK(runs[i].seed == 1 + i % 3);
        CHECK(runs[i].report.has_value());
    }
    CHECK_THROWS_AS(sweep(preset("concert"), grid, {}, {}, 1.0), ConfigError);
}

TEST_CASE("preset export loads back as the same scene") {
    Result r = cli({"preset", "--list"});
    CHECK(r.code == 0);
    CHECK(r.out.find("queue3_narrow") != std::string::npos);
    r = cli({"preset", "concert"});
    REQUIRE(r.code == 0);
    CHECK(load_scenario(r.out) == preset("concert"));
    CHECK(cli({"preset", "stadium"}).code != 0);
}
