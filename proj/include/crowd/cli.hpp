#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowd/engine.hpp"
#include "crowd/scenario.hpp"

namespace crowd {

/// "moshpit@5,aoe0", "circlepit@12.5,aoe1", "stop@30,aoe0".
ScheduledCommand parse_trigger(std::string_view spec);

/// Overrides one named parameter. Area-of-effect parameters apply to every
/// area. Throws ConfigError for unknown names.
void apply_parameter(ScenarioConfig& config, std::string_view name, double value);
std::vector<std::string> parameter_names();

/// One configuration of a sweep: parameter name -> value, in column order.
struct GridRow {
    std::vector<std::pair<std::string, double>> values;
};

/// CSV with a header of parameter names and one configuration per line.
/// Blank lines and lines starting with '#' are skipped.
std::vector<GridRow> parse_grid(std::string_view text);

struct SweepRun {
    std::size_t row = 0;
    std::uint64_t seed = 0;
    std::optional<MetricsReport> report;
    std::string error;
};

/// Every grid row x every seed, ordered by (row, seed). A failing run is
/// recorded with its error and the sweep carries on. Throws ConfigError when
/// `seeds` is empty.
std::vector<SweepRun> sweep(const ScenarioConfig& base, const std::vector<GridRow>& grid,
                            const std::vector<std::uint64_t>& seeds,
                            const std::vector<ScheduledCommand>& timeline, double duration);

void write_sweep_csv(std::ostream& out, const ScenarioConfig& base, const std::vector<GridRow>& grid,
                     const std::vector<SweepRun>& runs);

/// First step at which two frame streams differ (1-based line number), or
/// nullopt when they are identical.
std::optional<std::int64_t> first_divergence(const std::vector<std::string>& expected,
                                             const std::vector<std::string>& actual);

/// Entry point of the crowdsim tool.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crowd
