#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "afc/scenario.hpp"
#include "afc/scenario_runner.hpp"

using namespace afc;
namespace fs = std::filesystem;

namespace {

// Minimal valid synthetic single-mode scenario; tests mutate the parsed JSON.
const char* kMinimal = R"({
  "version": 1,
  "name": "unit",
  "experiment": "single_mode",
  "time_grid": {"step_ns": 2, "samples": 512},
  "frequency_grid": {"span_mhz": 64, "points": 1025},
  "spectrum": {
    "source": "synthetic",
    "comb": {"period_mhz": 4, "tooth_fwhm_mhz": 1.33, "d_peak": 2.0, "envelope_fwhm_mhz": 20}
  },
  "input": {"pulse_center_ns": 100, "pulse_fwhm_ns": 30, "nbar": 0.5}
})";

std::string with_patch(const std::function<void(nlohmann::json&)>& patch) {
    nlohmann::json doc = nlohmann::json::parse(kMinimal);
    patch(doc);
    return doc.dump();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

fs::path fresh_dir(const std::string& leaf) {
    fs::path dir = fs::temp_directory_path() / leaf;
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("a minimal scenario parses with documented defaults") {
    Scenario sc = parse_scenario_text(kMinimal);
    CHECK(sc.name == "unit");
    CHECK(sc.kind == ExperimentKind::single_mode);
    CHECK(sc.base.master_seed == 1);
    CHECK(sc.base.time_grid.t0_s == 0.0);
    CHECK(sc.base.time_grid.dt_s == doctest::Approx(2e-9));
    CHECK(sc.base.freq_grid.span_hz == doctest::Approx(64e6));
    CHECK(sc.base.comb.period_hz == doctest::Approx(4e6));
    CHECK(sc.base.pulse_fwhm_s == doctest::Approx(30e-9));
    CHECK(sc.base.input_nbar == 0.5);

    // Library defaults survive when their sections are omitted.
    CHECK(sc.base.material.d_max == 4.0);
    CHECK(sc.base.material.tz_spin_s == doctest::Approx(6e-3));
    CHECK(sc.base.detector.eta_d == 0.32);
    CHECK(sc.base.detector.eta_t == doctest::Approx(0.2));
    CHECK(sc.base.detector.dark_rate_hz == 100.0);
    CHECK(sc.base.plan.n_trials == 400);
    CHECK(sc.base.plan.n_sequences == 1);
    CHECK(sc.base.include_dispersion);
}

TEST_CASE("schema violations are rejected with the offending key") {
    CHECK_THROWS_WITH_AS(parse_scenario_text("{not json"), doctest::Contains("not valid JSON"),
                         std::runtime_error);

    CHECK_THROWS_WITH_AS(
        parse_scenario_text(with_patch([](nlohmann::json& d) { d["typo_key"] = 1; })),
        doctest::Contains("typo_key"), std::runtime_error);

    CHECK_THROWS_WITH_AS(
        parse_scenario_text(
            with_patch([](nlohmann::json& d) { d["spectrum"]["comb"]["tooth_width"] = 1; })),
        doctest::Contains("spectrum.comb.tooth_width"), std::runtime_error);

    CHECK_THROWS_WITH_AS(
        parse_scenario_text(
            with_patch([](nlohmann::json& d) { d["spectrum"]["comb"].erase("tooth_fwhm_mhz"); })),
        doctest::Contains("tooth_fwhm_mhz"), std::runtime_error);

    CHECK_THROWS_WITH_AS(
        parse_scenario_text(with_patch([](nlohmann::json& d) { d["version"] = 2; })),
        doctest::Contains("version"), std::runtime_error);

    CHECK_THROWS_WITH_AS(
        parse_scenario_text(with_patch([](nlohmann::json& d) { d.erase("name"); })),
        doctest::Contains("name"), std::runtime_error);

    CHECK_THROWS_WITH_AS(
        parse_scenario_text(
            with_patch([](nlohmann::json& d) { d["input"]["pulse_fwhm_ns"] = "thirty"; })),
        doctest::Contains("input.pulse_fwhm_ns"), std::runtime_error);

    CHECK_THROWS_WITH_AS(
        parse_scenario_text(with_patch([](nlohmann::json& d) { d["experiment"] = "storageee"; })),
        doctest::Contains("experiment"), std::runtime_error);

    // Kind-specific sections are required for their kind.
    CHECK_THROWS_WITH_AS(
        parse_scenario_text(with_patch([](nlohmann::json& d) { d["experiment"] = "decay"; })),
        doctest::Contains("decay"), std::runtime_error);
}

TEST_CASE("kind-specific sections parse into their unit-bearing fields") {
    std::string text = with_patch([](nlohmann::json& d) {
        d["experiment"] = "interference";
        d["interference"] = {{"storage_a_ns", 200},
                             {"storage_b_ns", 300},
                             {"phases_deg", {0, 90, 180, 270}},
                             {"qubit", {{"tau_ns", 100}, {"phi_deg", 45}, {"nbar_total", 1.0}}}};
    });
    Scenario sc = parse_scenario_text(text);
    CHECK(sc.kind == ExperimentKind::interference);
    CHECK(sc.storage_a_s == doctest::Approx(200e-9));
    CHECK(sc.phases_rad.size() == 4);
    CHECK(sc.phases_rad[1] == doctest::Approx(std::numbers::pi / 2.0));
    CHECK(sc.qubit.phi_rad == doctest::Approx(std::numbers::pi / 4.0));
    CHECK(sc.auto_balance);

    text = with_patch([](nlohmann::json& d) {
        d["experiment"] = "decay";
        d["spectrum"]["comb"].erase("period_mhz");
        d["decay"] = {{"storage_times_ns", {250, 500, 750}}, {"with_detection", true}};
    });
    sc = parse_scenario_text(text);
    CHECK(sc.kind == ExperimentKind::decay);
    CHECK(sc.storage_times_s.size() == 3);
    CHECK(sc.storage_times_s[2] == doctest::Approx(750e-9));
    CHECK(sc.equal_mean_depth);
    CHECK(sc.decay_with_detection);

    text = with_patch([](nlohmann::json& d) {
        d["experiment"] = "multimode";
        d["multimode"] = {{"modes", 4}, {"mode_spacing_ns", 110}, {"mode_nbars", {0.8, 0.6, 0.45, 0.3}}};
    });
    sc = parse_scenario_text(text);
    CHECK(sc.n_modes == 4);
    CHECK(sc.mode_spacing_s == doctest::Approx(110e-9));
    CHECK(sc.mode_nbars.size() == 4);

    // A prepared spectrum parses pulse pairs with degree-valued areas.
    text = with_patch([](nlohmann::json& d) {
        nlohmann::json pair = {{"area_deg", 20}, {"tau_ns", 250}};
        d["spectrum"] = {{"source", "prepared"},
                         {"sequence",
                          {{"pairs", nlohmann::json::array({pair})},
                           {"repetitions", 100},
                           {"tooth_width_floor_mhz", 1.0}}}};
    });
    sc = parse_scenario_text(text);
    CHECK(sc.base.source == SpectrumSource::prepared);
    CHECK(sc.base.sequence.pairs.size() == 1);
    CHECK(sc.base.sequence.pairs[0].first.area_theta_rad ==
          doctest::Approx(20.0 * std::numbers::pi / 180.0));
    CHECK(sc.base.sequence.pairs[0].first.tau_s_s == doctest::Approx(250e-9));
    CHECK(sc.base.sequence.pairs[0].second == 1.0);
}

TEST_CASE("resolving a scenario materializes defaults and round-trips exactly") {
    Scenario sc = parse_scenario_text(kMinimal);
    std::string resolved = resolved_scenario_json(sc);

    // The resolved form is itself a valid scenario and is a fixed point.
    Scenario again = parse_scenario_text(resolved);
    CHECK(resolved_scenario_json(again) == resolved);

    nlohmann::json doc = nlohmann::json::parse(resolved);
    CHECK(doc["detector"]["eta_d"] == 0.32);
    CHECK(doc["material"]["d_max"] == 4.0);
    CHECK(doc["plan"]["trials"] == 400);
    CHECK(doc["analysis"]["include_dispersion"] == true);
}

TEST_CASE("the runner writes the advertised artifacts deterministically") {
    std::string text = with_patch([](nlohmann::json& d) {
        d["plan"] = {{"sequences", 50}};
        d["seed"] = 11;
    });
    Scenario sc = parse_scenario_text(text);

    RunnerOptions opts_a;
    opts_a.out_dir = fresh_dir("afc_runner_a").string();
    std::string line_a = run_scenario(sc, opts_a);
    CHECK(line_a.find("echo at") != std::string::npos);

    const std::vector<std::string> expected = {
        "resolved_config.json", "summary.json",       "results.csv",
        "spectrum.csv",         "field_output.csv",   "histogram.csv",
        "histogram_sidecar.json", "reference_histogram.csv", "control_histogram.csv"};
    for (const std::string& name : expected)
        CHECK(fs::exists(fs::path(opts_a.out_dir) / name));

    nlohmann::json summary =
        nlohmann::json::parse(read_file(fs::path(opts_a.out_dir) / "summary.json"));
    CHECK(summary["name"] == "unit");
    CHECK(summary["experiment"] == "single_mode");
    CHECK(summary["seed"] == 11);
    CHECK(summary["assertions"]["echo_at_expected_delay"] == true);
    CHECK(summary["assertions"]["control_echo_below_1e-6"] == true);

    // Identical seeds reproduce every artifact byte for byte.
    RunnerOptions opts_b;
    opts_b.out_dir = fresh_dir("afc_runner_b").string();
    run_scenario(sc, opts_b);
    for (const std::string& name : expected)
        CHECK(read_file(fs::path(opts_a.out_dir) / name) ==
              read_file(fs::path(opts_b.out_dir) / name));

    // A seed override changes the counting record but not the physics.
    RunnerOptions opts_c;
    opts_c.out_dir = fresh_dir("afc_runner_c").string();
    opts_c.has_seed_override = true;
    opts_c.seed_override = 12;
    run_scenario(sc, opts_c);
    CHECK(read_file(fs::path(opts_a.out_dir) / "spectrum.csv") ==
          read_file(fs::path(opts_c.out_dir) / "spectrum.csv"));
    CHECK(read_file(fs::path(opts_a.out_dir) / "field_output.csv") ==
          read_file(fs::path(opts_c.out_dir) / "field_output.csv"));
    CHECK(read_file(fs::path(opts_a.out_dir) / "histogram.csv") !=
          read_file(fs::path(opts_c.out_dir) / "histogram.csv"));

    fs::remove_all(opts_a.out_dir);
    fs::remove_all(opts_b.out_dir);
    fs::remove_all(opts_c.out_dir);
}

TEST_CASE("an unusable output directory fails before any computation") {
    Scenario sc = parse_scenario_text(kMinimal);

    RunnerOptions opts;
    opts.out_dir = "";
    CHECK_THROWS_AS(run_scenario(sc, opts), std::runtime_error);

    // A regular file blocks directory creation underneath it.
    fs::path blocker = fs::temp_directory_path() / "afc_blocker";
    std::ofstream(blocker.string()) << "x";
    opts.out_dir = (blocker / "out").string();
    CHECK_THROWS_WITH_AS(run_scenario(sc, opts), doctest::Contains("output directory"),
                         std::runtime_error);
    CHECK(!fs::exists(opts.out_dir));
    fs::remove(blocker);
}

TEST_CASE("shipped presets parse, validate and name themselves consistently") {
    const fs::path preset_dir = AFC_PRESET_DIR;
    const std::vector<std::pair<std::string, ExperimentKind>> presets = {
        {"fig2_single_mode", ExperimentKind::single_mode},
        {"fig3a_linearity", ExperimentKind::linearity},
        {"fig3b_decay", ExperimentKind::decay},
        {"fig4_multimode", ExperimentKind::multimode},
        {"fig5_interference", ExperimentKind::interference},
    };
    for (const auto& [id, kind] : presets) {
        fs::path file = preset_dir / (id + ".json");
        REQUIRE(fs::exists(file));
        Scenario sc = load_scenario(file.string());
        CHECK(sc.name == id);
        CHECK(sc.kind == kind);
        CHECK(!sc.description.empty());
    }
}
