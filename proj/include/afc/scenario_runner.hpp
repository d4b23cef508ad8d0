// scenario_runner.hpp - executes a parsed scenario and writes its artifacts
#pragma once

#include <cstdint>
#include <string>

#include "afc/scenario.hpp"

namespace afc {

struct RunnerOptions {
    std::string out_dir;
    bool has_seed_override = false;
    std::uint64_t seed_override = 0;
    std::size_t workers = 1;
};

// Runs the scenario and writes resolved_config.json, results.csv,
// summary.json, spectrum.csv and (for runs with detection) histogram CSVs
// with a JSON sidecar into options.out_dir.  The directory is prepared
// before any computation, so an unusable destination fails with nothing
// written.  Returns a one-line summary for stdout; throws on failure.
std::string run_scenario(const Scenario& scenario, const RunnerOptions& options);

}  // namespace afc
