#include "afc/scenario_runner.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "afc/text_io.hpp"

namespace afc {

namespace {

using ordered = nlohmann::ordered_json;
namespace fs = std::filesystem;

// JSON has no infinities; degenerate fit parameters become null.
ordered number_or_null(double v) {
    return std::isfinite(v) ? ordered(v) : ordered(nullptr);
}

ordered fit_json(const FitResult& fit) {
    ordered params = ordered::object();
    ordered errs = ordered::object();
    for (const std::string& name : fit.param_names) {
        params[name] = number_or_null(fit.params.at(name));
        errs[name] = number_or_null(fit.stderrs.at(name));
    }
    ordered j;
    j["params"] = params;
    j["stderrs"] = errs;
    j["residual_norm"] = number_or_null(fit.residual_norm);
    j["converged"] = fit.converged;
    j["non_identifiable"] = fit.non_identifiable;
    j["excluded_points"] = fit.excluded_points;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("scenario_runner: cannot write '" + path.string() + "'");
    out << text;
    if (!out)
        throw std::runtime_error("scenario_runner: failed writing '" + path.string() + "'");
}

std::string line_printf(const char* format, ...) {
    char buffer[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buffer, sizeof buffer, format, args);
    va_end(args);
    return buffer;
}

// Fringe amplitude consistent with zero within 3 sigma.
bool phase_independent(const std::vector<double>& phases, const std::vector<double>& values) {
    FitResult fit = fit_visibility(phases, values);
    const double v = fit.params.at("visibility");
    const double sigma = fit.stderrs.at("visibility");
    return v <= 3.0 * sigma;
}

void run_single_mode_kind(const Scenario& sc, const fs::path& dir, ordered& summary,
                          ordered& assertions, std::string& line) {
    SingleModeResult res = run_single_mode(sc.base);

    write_spectrum_csv(res.spectrum, (dir / "spectrum.csv").string());
    write_field_csv(res.propagation.output, (dir / "field_output.csv").string());
    write_histogram_csv(res.histogram, (dir / "histogram.csv").string());
    write_histogram_sidecar(res.histogram, sc.base.detector, sc.base.plan, sc.base.master_seed,
                            (dir / "histogram_sidecar.json").string());
    write_histogram_csv(res.reference_histogram, (dir / "reference_histogram.csv").string());
    write_histogram_csv(res.control_histogram, (dir / "control_histogram.csv").string());

    CsvWriter csv((dir / "results.csv").string(),
                  {"storage_time_s", "echo_peak_time_s", "efficiency", "detected_efficiency",
                   "transmitted_fraction", "control_transmission", "calibrated_nbar",
                   "calibrated_nbar_stderr"});
    csv.write_row({res.storage_time_s, res.echo_peak_time_s, res.efficiency,
                   res.detected_efficiency, res.transmitted_fraction, res.control_transmission,
                   res.input_calibration.nbar, res.input_calibration.standard_error});

    summary["storage_time_s"] = res.storage_time_s;
    summary["echo_peak_time_s"] = res.echo_peak_time_s;
    summary["echo_window_start_s"] = res.echo_window_start_s;
    summary["echo_window_end_s"] = res.echo_window_end_s;
    summary["efficiency"] = res.efficiency;
    summary["detected_efficiency"] = res.detected_efficiency;
    summary["transmitted_fraction"] = res.transmitted_fraction;
    summary["control_transmission"] = res.control_transmission;
    summary["control_echo_fraction"] = res.control_echo_fraction;
    summary["input_calibration"] = {{"nbar", res.input_calibration.nbar},
                                    {"standard_error", res.input_calibration.standard_error},
                                    {"clamped", res.input_calibration.clamped}};

    const double expected = sc.base.pulse_center_s + res.storage_time_s;
    assertions["echo_at_expected_delay"] =
        std::abs(res.echo_peak_time_s - expected) <= 0.5 * sc.base.pulse_fwhm_s;
    assertions["control_echo_below_1e-6"] = res.control_echo_fraction < 1e-6;

    line = line_printf("echo at %.1f ns, efficiency %.3f%% (detected %.3f%%), control "
                       "transmission %.2f%%",
                       res.echo_peak_time_s * 1e9, res.efficiency * 100.0,
                       res.detected_efficiency * 100.0, res.control_transmission * 100.0);
}

void run_linearity_kind(const Scenario& sc, const fs::path& dir, std::size_t workers,
                        ordered& summary, ordered& assertions, std::string& line) {
    LinearityScanConfig cfg;
    cfg.base = sc.base;
    cfg.input_nbars = sc.input_nbars;
    cfg.n_workers = workers;
    LinearityScanResult res = run_linearity_scan(cfg);

    write_spectrum_csv(build_spectrum(sc.base), (dir / "spectrum.csv").string());
    CsvWriter csv((dir / "results.csv").string(),
                  {"input_nbar", "efficiency", "echo_counts", "echo_counts_corrected"});
    for (const LinearityPoint& pt : res.points)
        csv.write_row({pt.input_nbar, pt.efficiency, static_cast<double>(pt.echo_counts),
                       pt.echo_counts_corrected});

    summary["fit"] = {{"slope", res.fit.slope},
                      {"slope_stderr", res.fit.slope_stderr},
                      {"r_squared", res.fit.r_squared}};
    assertions["line_through_origin_r2_gt_0.99"] = res.fit.r_squared > 0.99;

    line = line_printf("linearity: %.4g corrected counts per photon, R^2 = %.5f", res.fit.slope,
                       res.fit.r_squared);
}

void run_decay_kind(const Scenario& sc, const fs::path& dir, std::size_t workers,
                    ordered& summary, ordered& assertions, std::string& line) {
    DecayScanConfig cfg;
    cfg.base = sc.base;
    cfg.storage_times_s = sc.storage_times_s;
    cfg.equal_mean_depth = sc.equal_mean_depth;
    cfg.with_detection = sc.decay_with_detection;
    cfg.n_workers = workers;
    DecayScanResult res = run_decay_scan(cfg);

    // Provenance spectrum: the comb of the first scan point.
    ExperimentConfig first = sc.base;
    first.comb.period_hz = 1.0 / sc.storage_times_s.front();
    if (cfg.equal_mean_depth)
        first.comb.d_peak =
            d_peak_for_mean_depth(first.comb, first.freq_grid, sc.base.comb.d_peak);
    write_spectrum_csv(build_spectrum(first), (dir / "spectrum.csv").string());

    CsvWriter csv((dir / "results.csv").string(),
                  {"storage_time_s", "efficiency", "echo_counts_corrected"});
    for (const DecayPoint& pt : res.points)
        csv.write_row({pt.storage_time_s, pt.efficiency, pt.echo_counts_corrected});

    summary["fit"] = fit_json(res.fit);
    assertions["fit_converged"] = res.fit.converged;

    const double tau = res.fit.params.count("tau") ? res.fit.params.at("tau") : 0.0;
    if (res.fit.params.count("beat_freq"))
        line = line_printf("decay: tau_d = %.1f ns, beat %.3f MHz", tau * 1e9,
                           res.fit.params.at("beat_freq") / 1e6);
    else
        line = line_printf("decay: tau_d = %.1f ns", tau * 1e9);
}

void run_multimode_kind(const Scenario& sc, const fs::path& dir, ordered& summary,
                        ordered& assertions, std::string& line) {
    MultimodeConfig cfg;
    cfg.base = sc.base;
    cfg.n_modes = sc.n_modes;
    cfg.mode_spacing_s = sc.mode_spacing_s;
    cfg.mode_nbars = sc.mode_nbars;
    cfg.with_detection = sc.multimode_with_detection;
    MultimodeResult res = run_multimode(cfg);

    write_spectrum_csv(res.spectrum, (dir / "spectrum.csv").string());
    write_field_csv(res.propagation.output, (dir / "field_output.csv").string());
    if (cfg.with_detection) {
        write_histogram_csv(res.histogram, (dir / "histogram.csv").string());
        write_histogram_sidecar(res.histogram, sc.base.detector, sc.base.plan,
                                sc.base.master_seed, (dir / "histogram_sidecar.json").string());
    }

    const std::vector<double>& nbars =
        sc.mode_nbars.empty() ? std::vector<double>(sc.n_modes, sc.base.input_nbar)
                              : sc.mode_nbars;
    CsvWriter csv((dir / "results.csv").string(),
                  {"mode_index", "input_nbar", "echo_peak_time_s", "efficiency"});
    for (std::size_t k = 0; k < res.mode_efficiencies.size(); ++k)
        csv.write_row({static_cast<double>(k), nbars[k], res.mode_peak_times_s[k],
                       res.mode_efficiencies[k]});

    summary["mode_peak_times_s"] = res.mode_peak_times_s;
    summary["mode_efficiencies"] = res.mode_efficiencies;
    summary["efficiency_spread"] = res.efficiency_spread;
    summary["ordering_preserved"] = res.ordering_preserved;
    assertions["ordering_preserved"] = res.ordering_preserved;
    assertions["efficiency_spread_lt_0.10"] = res.efficiency_spread < 0.10;

    line = line_printf("multimode: %zu modes recalled %s, efficiency spread %.1f%%", sc.n_modes,
                       res.ordering_preserved ? "in input order" : "OUT OF ORDER",
                       res.efficiency_spread * 100.0);
}

void run_interference_kind(const Scenario& sc, const fs::path& dir, std::size_t workers,
                           ordered& summary, ordered& assertions, std::string& line) {
    InterferenceConfig cfg;
    cfg.base = sc.base;
    cfg.qubit = sc.qubit;
    cfg.storage_a_s = sc.storage_a_s;
    cfg.storage_b_s = sc.storage_b_s;
    cfg.comb_finesse = sc.comb_finesse;
    cfg.grating_weight = sc.grating_weight;
    cfg.auto_balance = sc.auto_balance;
    cfg.phases_rad = sc.phases_rad;
    cfg.with_detection = sc.interference_with_detection;
    cfg.n_workers = workers;
    InterferenceResult res = run_interference(cfg);

    write_spectrum_csv(res.spectrum, (dir / "spectrum.csv").string());
    if (cfg.with_detection) {
        write_histogram_csv(res.histogram, (dir / "histogram.csv").string());
        write_histogram_sidecar(res.histogram, sc.base.detector, sc.base.plan,
                                sc.base.master_seed, (dir / "histogram_sidecar.json").string());
    }

    CsvWriter csv((dir / "results.csv").string(),
                  {"phase_rad", "overlap_energy", "early_energy", "late_energy", "overlap_counts",
                   "early_counts", "late_counts", "overlap_counts_corrected"});
    std::vector<double> phases, early, late;
    for (const InterferencePoint& pt : res.points) {
        csv.write_row({pt.phase_rad, pt.overlap_energy, pt.early_energy, pt.late_energy,
                       static_cast<double>(pt.overlap_counts),
                       static_cast<double>(pt.early_counts),
                       static_cast<double>(pt.late_counts), pt.overlap_counts_corrected});
        phases.push_back(pt.phase_rad);
        early.push_back(static_cast<double>(pt.early_counts));
        late.push_back(static_cast<double>(pt.late_counts));
    }

    summary["v_noiseless"] = res.visibility_noiseless;
    summary["v_raw"] = res.visibility_raw;
    summary["v_corrected"] = res.visibility_corrected;
    summary["grating_weight"] = res.grating_weight;
    summary["window_width_s"] = res.window_width_s;
    summary["window_centers_s"] = {res.early_window_center_s, res.overlap_window_center_s,
                                   res.late_window_center_s};
    summary["noiseless_fit"] = fit_json(res.noiseless_fit);
    if (cfg.with_detection) {
        summary["raw_fit"] = fit_json(res.raw_fit);
        summary["corrected_fit"] = fit_json(res.corrected_fit);
    }

    assertions["noiseless_visibility_gt_0.99"] = res.visibility_noiseless > 0.99;
    if (cfg.with_detection) {
        assertions["outer_windows_phase_independent_3sigma"] =
            phase_independent(phases, early) && phase_independent(phases, late);
        line = line_printf("interference: V_noiseless = %.4f, V_raw = %.4f, V_corrected = %.4f",
                           res.visibility_noiseless, res.visibility_raw,
                           res.visibility_corrected);
    } else {
        line = line_printf("interference: V_noiseless = %.4f", res.visibility_noiseless);
    }
}

}  // namespace

std::string run_scenario(const Scenario& scenario, const RunnerOptions& options) {
    Scenario sc = scenario;
    if (options.has_seed_override)
        sc.base.master_seed = options.seed_override;

    if (options.out_dir.empty())
        throw std::runtime_error("scenario_runner: output directory must not be empty");
    const fs::path dir(options.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw std::runtime_error("scenario_runner: cannot create output directory '" +
                                 options.out_dir + "'");

    ordered summary;
    summary["name"] = sc.name;
    summary["experiment"] = to_string(sc.kind);
    summary["seed"] = sc.base.master_seed;
    ordered assertions = ordered::object();
    std::string line;

    switch (sc.kind) {
        case ExperimentKind::single_mode:
            run_single_mode_kind(sc, dir, summary, assertions, line);
            break;
        case ExperimentKind::linearity:
            run_linearity_kind(sc, dir, options.workers, summary, assertions, line);
            break;
        case ExperimentKind::decay:
            run_decay_kind(sc, dir, options.workers, summary, assertions, line);
            break;
        case ExperimentKind::multimode:
            run_multimode_kind(sc, dir, summary, assertions, line);
            break;
        case ExperimentKind::interference:
            run_interference_kind(sc, dir, options.workers, summary, assertions, line);
            break;
    }

    summary["assertions"] = assertions;
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    write_text(dir / "resolved_config.json", resolved_scenario_json(sc));
    return line;
}

}  // namespace afc
