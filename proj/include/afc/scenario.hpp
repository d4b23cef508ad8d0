// scenario.hpp - declarative experiment descriptions loaded from JSON
//
// A scenario file is a strict JSON document: every physical quantity carries
// its unit in the key name (pulse_fwhm_ns, span_mhz, ...), unknown or
// misspelled keys are rejected with their full path, and a version field
// guards the schema.  The full schema with defaults is documented in the
// README; resolved_scenario_json materializes all defaults back into the
// same schema for provenance.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afc/experiment_suite.hpp"

namespace afc {

enum class ExperimentKind { single_mode, linearity, decay, multimode, interference };

std::string to_string(ExperimentKind kind);

// One fully resolved experiment: the common config plus the kind-specific
// parameters (only those matching `kind` are meaningful).
struct Scenario {
    int version = 1;
    std::string name;
    std::string description;
    ExperimentKind kind = ExperimentKind::single_mode;

    ExperimentConfig base;

    std::vector<double> input_nbars;  // linearity

    std::vector<double> storage_times_s;  // decay
    bool equal_mean_depth = true;
    bool decay_with_detection = false;

    std::size_t n_modes = 4;  // multimode
    double mode_spacing_s = 0.0;
    std::vector<double> mode_nbars;
    bool multimode_with_detection = false;

    TimeBinQubitSpec qubit;  // interference
    double storage_a_s = 200e-9;
    double storage_b_s = 300e-9;
    double comb_finesse = 2.0;
    double grating_weight = 0.5;
    bool auto_balance = true;
    std::vector<double> phases_rad;
    bool interference_with_detection = true;
};

// Parses scenario JSON text; throws std::runtime_error naming the offending
// key on any schema violation.
Scenario parse_scenario_text(const std::string& json_text);

// Reads and parses a scenario file.
Scenario load_scenario(const std::string& path);

// Serializes the scenario with every default materialized, in the same
// schema the parser accepts.
std::string resolved_scenario_json(const Scenario& scenario);

}  // namespace afc
