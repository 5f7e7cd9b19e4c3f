#include "crowd/cli.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "crowd/errors.hpp"
#include "crowd/server.hpp"
#include "crowd/session.hpp"

namespace crowd {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_number(std::string_view text, const std::string& where) {
    const std::string t = trim(text);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw ParseError(where, "expected a number, got '" + t + "'");
    }
    if (used != t.size()) throw ParseError(where, "expected a number, got '" + t + "'");
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
    return lines;
}

int to_int(double v, std::string_view name) {
    if (v != static_cast<double>(static_cast<int>(v))) {
        throw ConfigError(std::string(name) + " must be an integer");
    }
    return static_cast<int>(v);
}

std::vector<Command> commands_for(const std::vector<ScheduledCommand>& timeline, double dt) {
    std::vector<Command> out;
    for (const ScheduledCommand& s : timeline) {
        Command c;
        switch (s.command.kind) {
            case EngineCommandKind::TriggerMoshpit: c.kind = CommandKind::TriggerMoshpit; break;
            case EngineCommandKind::TriggerCirclepit: c.kind = CommandKind::TriggerCirclepit; break;
            case EngineCommandKind::StopBehavior: c.kind = CommandKind::StopBehavior; break;
        }
        c.behavior_id = s.command.behavior_id;
        c.applied_at_step = step_for_time(s.time, dt);
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Command& a, const Command& b) { return a.applied_at_step < b.applied_at_step; });
    return out;
}

}  // namespace

ScheduledCommand parse_trigger(std::string_view spec) {
    const auto at = spec.find('@');
    const auto comma = spec.find(',', at == std::string_view::npos ? 0 : at);
    if (at == std::string_view::npos || comma == std::string_view::npos) {
        throw ParseError("--trigger", "expected <kind>@<seconds>,<aoe>, got '" + std::string(spec) + "'");
    }
    const std::string kind = trim(spec.substr(0, at));
    ScheduledCommand c;
    if (kind == "moshpit") {
        c.command.kind = EngineCommandKind::TriggerMoshpit;
    } else if (kind == "circlepit") {
        c.command.kind = EngineCommandKind::TriggerCirclepit;
    } else if (kind == "stop") {
        c.command.kind = EngineCommandKind::StopBehavior;
    } else {
        throw ParseError("--trigger", "unknown kind '" + kind + "' (moshpit, circlepit, stop)");
    }
    c.time = parse_number(spec.substr(at + 1, comma - at - 1), "--trigger");
    if (c.time < 0) throw ParseError("--trigger", "time must not be negative");
    c.command.behavior_id = trim(spec.substr(comma + 1));
    if (parse_behavior_id(c.command.behavior_id) < 0) {
        throw ParseError("--trigger", "behavior id must look like aoe0, got '" + c.command.behavior_id + "'");
    }
    return c;
}

std::vector<std::string> parameter_names() {
    return {"max_agents",   "agent_radius",      "marker_density", "marker_radius", "goal_distance_threshold",
            "max_speed",    "dt",                "seed",           "number_agents_pit", "aoe_radius",
            "reflect_min",  "reflect_max",       "time_to_start"};
}

void apply_parameter(ScenarioConfig& c, std::string_view name, double v) {
    GlobalParams& p = c.params;
    if (name == "max_agents") p.max_agents = to_int(v, name);
    else if (name == "agent_radius") p.agent_radius = v;
    else if (name == "marker_density") p.marker_density = v;
    else if (name == "marker_radius") p.marker_radius = v;
    else if (name == "goal_distance_threshold") p.goal_distance_threshold = v;
    else if (name == "max_speed") p.max_speed = v;
    else if (name == "dt") p.dt = v;
    else if (name == "seed") c.seed = static_cast<std::uint64_t>(to_int(v, name));
    else if (name == "number_agents_pit") for (auto& a : c.areas_of_effect) a.number_agents_pit = to_int(v, name);
    else if (name == "aoe_radius") for (auto& a : c.areas_of_effect) a.radius = v;
    else if (name == "reflect_min") for (auto& a : c.areas_of_effect) a.reflect_min = v;
    else if (name == "reflect_max") for (auto& a : c.areas_of_effect) a.reflect_max = v;
    else if (name == "time_to_start") for (auto& a : c.areas_of_effect) a.time_to_start = v;
    else throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

std::vector<GridRow> parse_grid(std::string_view text) {
    std::vector<std::string> header;
    std::vector<GridRow> rows;
    std::istringstream in{std::string(text)};
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(t);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
        const std::string where = "line " + std::to_string(line_no);
        if (header.empty()) {
            const auto known = parameter_names();
            for (const std::string& name : cells) {
                if (std::find(known.begin(), known.end(), name) == known.end()) {
                    throw ParseError(where, "unknown parameter '" + name + "'");
                }
            }
            header = std::move(cells);
            continue;
        }
        if (cells.size() != header.size()) {
            throw ParseError(where, fmt::format("expected {} values, got {}", header.size(), cells.size()));
        }
        GridRow row;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            row.values.emplace_back(header[i], parse_number(cells[i], where + ", column " + header[i]));
        }
        rows.push_back(std::move(row));
    }
    if (header.empty()) throw ParseError("grid", "missing header line");
    return rows;
}

std::vector<SweepRun> sweep(const ScenarioConfig& base, const std::vector<GridRow>& grid,
                            const std::vector<std::uint64_t>& seeds, const std::vector<ScheduledCommand>& timeline,
                            double duration) {
    if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
    std::vector<SweepRun> runs;
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (std::uint64_t seed : seeds) {
            SweepRun run{r, seed, std::nullopt, {}};
            try {
                ScenarioConfig c = base;
                for (const auto& [name, value] : grid[r].values) apply_parameter(c, name, value);
                c.seed = seed;
                run.report = crowd::run(c, timeline, duration);
            } catch (const std::exception& e) {
                run.error = e.what();
            }
            runs.push_back(std::move(run));
        }
    }
    return runs;
}

void write_sweep_csv(std::ostream& out, const ScenarioConfig& base, const std::vector<GridRow>& grid,
                     const std::vector<SweepRun>& runs) {
    std::vector<std::string> params;
    if (!grid.empty()) {
        for (const auto& [name, value] : grid.front().values) params.push_back(name);
    }
    out << "row,seed";
    for (const std::string& p : params) out << ',' << p;
    out << ",status,error,steps,min_distance,queue_inversions,queue_completed,agents_spawned,agents_despawned";
    for (std::size_t b = 0; b < base.areas_of_effect.size(); ++b) {
        const std::string id = behavior_id(static_cast<int>(b));
        out << fmt::format(",{0}_kind,{0}_phase,{0}_realized,{0}_selected,{0}_open_fraction,{0}_mean_laps", id);
    }
    out << '\n';
    for (const SweepRun& run : runs) {
        out << run.row << ',' << run.seed;
        for (const auto& [name, value] : grid[run.row].values) out << ',' << fmt::format("{}", value);
        if (!run.report) {
            std::string msg = run.error;
            std::replace(msg.begin(), msg.end(), '"', '\'');
            out << ",error,\"" << msg << "\",,,,,,";
            for (std::size_t b = 0; b < base.areas_of_effect.size(); ++b) out << ",,,,,,";
            out << '\n';
            continue;
        }
        const MetricsReport& m = *run.report;
        out << fmt::format(",ok,,{},{:.6f},{:.6f},{},{},{}", m.steps, m.min_pairwise_agent_distance, m.queue_inversions,
                           m.queue_completed, m.agents_spawned, m.agents_despawned);
        for (const BehaviorMetrics& b : m.behaviors) {
            double laps = 0;
            for (const LapCount& l : b.laps) laps += l.laps;
            const double mean_laps = b.laps.empty() ? 0.0 : laps / static_cast<double>(b.laps.size());
            out << fmt::format(",{},{},{},{},{:.4f},{:.4f}", to_string(b.kind), to_string(b.final_phase),
                               b.realized_participants, b.selected_participants, b.open_fraction(), mean_laps);
        }
        out << '\n';
    }
}

std::optional<std::int64_t> first_divergence(const std::vector<std::string>& expected,
                                             const std::vector<std::string>& actual) {
    const std::size_t n = std::min(expected.size(), actual.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (expected[i] != actual[i]) return static_cast<std::int64_t>(i + 1);
    }
    if (expected.size() != actual.size()) return static_cast<std::int64_t>(n + 1);
    return std::nullopt;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Deterministic marker-based crowd simulator", "crowdsim"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    std::string scenario_path, preset_name, record_path, metrics_path, log_path, grid_path, out_path;
    std::string verify_path, stream_path;
    double duration = 60.0;
    std::vector<std::string> triggers;
    std::optional<std::uint64_t> seed;
    std::size_t seed_count = 20;
    std::optional<std::uint64_t> seed_base;
    unsigned short port = 8080;
    int every = 1;
    double step_period = 1.0 / 30.0;
    bool no_checks = false;

    bool list_presets = false;
    auto scenario_flags = [&](CLI::App* sub) {
        auto* file = sub->add_option("--scenario", scenario_path, "Scenario file");
        auto* pre = sub->add_option("--preset", preset_name, "Built-in scene")->check(CLI::IsMember(preset_names()));
        file->excludes(pre);
        sub->add_option("--seed", seed, "Override the scenario seed");
    };
    auto timeline_flags = [&](CLI::App* sub) {
        sub->add_option("--duration", duration, "Simulated seconds")->check(CLI::PositiveNumber);
        sub->add_option("--trigger", triggers, "<moshpit|circlepit|stop>@<seconds>,<aoeN> (repeatable)");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "Headless run");
    scenario_flags(run_cmd);
    timeline_flags(run_cmd);
    run_cmd->add_option("--record", record_path, "Write every frame as a JSON line");
    run_cmd->add_option("--metrics", metrics_path, "Write the metrics report");
    run_cmd->add_option("--log", log_path, "Write a replayable session log");
    run_cmd->add_flag("--no-checks", no_checks, "Skip the per-step invariant sweep");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Parameter grid x seeds");
    scenario_flags(sweep_cmd);
    timeline_flags(sweep_cmd);
    sweep_cmd->add_option("--grid", grid_path, "CSV grid of parameter values")->required();
    sweep_cmd->add_option("--seeds", seed_count, "Seeds per grid row");
    sweep_cmd->add_option("--seed-base", seed_base, "First seed (default: scenario seed)");
    sweep_cmd->add_option("--out", out_path, "CSV output (default: stdout)");

    CLI::App* replay_cmd = app.add_subcommand("replay", "Re-run a session log");
    replay_cmd->add_option("--log", log_path, "Session log")->required();
    auto* verify_opt = replay_cmd->add_option("--verify", verify_path, "Compare against a recorded stream")
                           ->expected(0, 1);
    replay_cmd->add_option("--stream", stream_path, "Write the replayed frames");

    CLI::App* serve_cmd = app.add_subcommand("serve", "Live session over websocket");
    scenario_flags(serve_cmd);
    serve_cmd->add_option("--port", port, "TCP port");
    serve_cmd->add_option("--every", every, "Broadcast every Nth frame")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--step-period", step_period, "Wall-clock seconds per step at speed 1")
        ->check(CLI::PositiveNumber);
    serve_cmd->add_option("--record", record_path, "Write every frame as a JSON line");
    serve_cmd->add_option("--log", log_path, "Session log written on shutdown");

    CLI::App* preset_cmd = app.add_subcommand("preset", "Print a built-in scene as a scenario document");
    std::string export_name;
    preset_cmd->add_option("name", export_name, "Scene name")->check(CLI::IsMember(preset_names()));
    preset_cmd->add_flag("--list", list_presets, "List the built-in scenes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    auto load_config = [&] {
        ScenarioConfig c = !scenario_path.empty() ? load_scenario_file(scenario_path)
                                                  : preset(preset_name.empty() ? "concert" : preset_name);
        if (seed) c.seed = *seed;
        return c;
    };
    const std::string scenario_ref = !scenario_path.empty() ? scenario_path
                                     : preset_name.empty()  ? "concert"
                                                            : preset_name;
    auto load_timeline = [&] {
        std::vector<ScheduledCommand> t;
        for (const std::string& s : triggers) t.push_back(parse_trigger(s));
        return t;
    };

    try {
        if (preset_cmd->parsed()) {
            if (list_presets || export_name.empty()) {
                for (const std::string& name : preset_names()) out << name << '\n';
            } else {
                out << serialize(preset(export_name)) << '\n';
            }
            return 0;
        }

        if (run_cmd->parsed()) {
            const ScenarioConfig config = load_config();
            const auto timeline = load_timeline();
            std::ofstream record;
            if (!record_path.empty()) {
                record.open(record_path);
                if (!record) throw ConfigError("cannot write '" + record_path + "'");
            }
            EngineOptions options;
            if (no_checks) options.check_invariants = false;
            const MetricsReport report = run(
                config, timeline, duration,
                [&](const FrameSnapshot& f) {
                    if (record.is_open()) record << to_json_line(f) << '\n';
                },
                options);
            const std::string metrics = to_json(report);
            if (!metrics_path.empty()) {
                std::ofstream m(metrics_path);
                m << metrics;
            } else {
                out << metrics;
            }
            if (!log_path.empty()) {
                SessionLog log{scenario_ref, config, record_path, report.steps, commands_for(timeline, config.params.dt)};
                std::ofstream l(log_path);
                l << to_json(log);
            }
            return 0;
        }

        if (sweep_cmd->parsed()) {
            const ScenarioConfig base = load_config();
            const auto timeline = load_timeline();
            const auto grid = parse_grid(read_file(grid_path));
            std::vector<std::uint64_t> seeds;
            const std::uint64_t first = seed_base.value_or(base.seed);
            for (std::size_t i = 0; i < seed_count; ++i) seeds.push_back(first + i);
            const auto runs = sweep(base, grid, seeds, timeline, duration);
            if (out_path.empty()) {
                write_sweep_csv(out, base, grid, runs);
            } else {
                std::ofstream o(out_path);
                write_sweep_csv(o, base, grid, runs);
            }
            return 0;
        }

        if (replay_cmd->parsed()) {
            const SessionLog log = load_session_log(log_path);
            std::vector<std::string> frames;
            replay(log, [&](const FrameSnapshot& f) { frames.push_back(to_json_line(f)); });
            if (!stream_path.empty()) {
                std::ofstream s(stream_path);
                for (const std::string& f : frames) s << f << '\n';
            }
            if (verify_opt->count() > 0) {
                const std::string against = verify_path.empty() ? log.record_ref : verify_path;
                if (against.empty()) throw ConfigError("no recorded stream to verify against");
                const auto expected = read_lines(against);
                if (auto step = first_divergence(expected, frames)) {
                    err << "replay diverges at step " << *step << '\n';
                    return 1;
                }
                out << "replay matches " << frames.size() << " frames\n";
            }
            return 0;
        }

        if (serve_cmd->parsed()) {
            ServeOptions options;
            options.port = port;
            options.every = every;
            options.step_period = step_period;
            options.record_path = record_path;
            options.log_path = log_path;
            options.engine.check_invariants = false;
            SessionServer server(load_config(), scenario_ref, options);
            server.start();
            out << "serving on ws://127.0.0.1:" << server.port() << std::endl;
            server.wait_for_signal();
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace crowd
