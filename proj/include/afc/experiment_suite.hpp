// experiment_suite.hpp - measurement campaigns built from the core models
//
// Each run_* function wires the same chain: build an absorption spectrum,
// filter weak pulses through it, then accumulate photon-counting statistics
// and reduce them with the fitting helpers.  All randomness is derived from
// the master seed, so a campaign is a pure function of its config; scan
// points are independent jobs seeded by (master_seed, point index) and may
// run on worker threads without changing any output.
#pragma once

#include <cstdint>
#include <vector>

#include "afc/comb_preparation.hpp"
#include "afc/field_propagation.hpp"
#include "afc/fitting.hpp"
#include "afc/photon_detection.hpp"
#include "afc/spectral_medium.hpp"

namespace afc {

enum class SpectrumSource { synthetic, prepared };

// Common description of one storage-and-retrieval experiment.
struct ExperimentConfig {
    TimeGrid time_grid;
    FrequencyGrid freq_grid;
    MaterialParams material;

    SpectrumSource source = SpectrumSource::synthetic;
    CombParams comb;               // used when source == synthetic
    PreparationSequence sequence;  // used when source == prepared

    double pulse_center_s = 0.0;
    double pulse_fwhm_s = 30e-9;
    double input_nbar = 1.0;        // mean photon number per trial
    bool include_dispersion = true;

    DetectorModel detector;
    TrialPlan plan;

    // Counting window width centered on the expected echo; 0 picks
    // 4 * pulse_fwhm_s, wide enough for >99.99% of a Gaussian echo.
    double echo_window_s = 0.0;
    std::uint64_t master_seed = 1;
};

// Two weak pulses separated by tau with a programmed relative phase; the
// photon number is the total over both bins, split equally.
struct TimeBinQubitSpec {
    double tau_s = 100e-9;
    double phi_rad = 0.0;
    double nbar_total = 1.0;
};

// Echo delay the config is built for: 1/period for a synthetic comb, the
// pulse-pair separation of the heaviest pair for a prepared one.
double expected_storage_time(const ExperimentConfig& config);

// Resolved counting window width (applies the 4 * fwhm default).
double echo_window_width(const ExperimentConfig& config);

// Spectrum the experiment runs against, including the superhyperfine doublet
// of the material when its splitting is nonzero.
AbsorptionSpectrum build_spectrum(const ExperimentConfig& config);

// d_peak that makes the comb's mean depth over the central period equal to
// target_mean (background excluded).  The decay scan uses this so every scan
// point carries the same integrated absorption per unit bandwidth.
double d_peak_for_mean_depth(const CombParams& params, const FrequencyGrid& grid,
                             double target_mean);

// --- single mode ---------------------------------------------------------

struct SingleModeResult {
    AbsorptionSpectrum spectrum;
    PropagationResult propagation;  // noiseless filtered output
    double storage_time_s = 0.0;
    double echo_window_start_s = 0.0;
    double echo_window_end_s = 0.0;
    double efficiency = 0.0;             // echo energy / input photon number
    double transmitted_fraction = 0.0;   // energy left in the input window
    double echo_peak_time_s = 0.0;

    ArrivalHistogram histogram;            // detected storage trials
    ArrivalHistogram reference_histogram;  // transparent medium, for calibration
    CalibrationResult input_calibration;
    double detected_efficiency = 0.0;

    // Control with the comb replaced by the unprepared line (flat depth
    // d_max): only the attenuated input survives, no echo.
    ArrivalHistogram control_histogram;
    double control_transmission = 0.0;   // total transmitted fraction
    double control_echo_fraction = 0.0;  // energy in the echo window
};

// One storage experiment: noiseless analysis plus detection of the stored
// signal, a transparent-medium reference (input calibration) and a
// flat-spectrum control.  For a prepared spectrum the signal mean of trial j
// is scaled by the spin relaxation of the grating across the sequence.
SingleModeResult run_single_mode(const ExperimentConfig& config);

// --- input photon number scan ---------------------------------------------

struct LinearityScanConfig {
    ExperimentConfig base;
    std::vector<double> input_nbars;  // >= 4 values spanning >= 10x
    std::size_t n_workers = 1;
};

struct LinearityPoint {
    double input_nbar = 0.0;
    double efficiency = 0.0;  // noiseless, identical across points
    std::uint64_t echo_counts = 0;
    double echo_counts_corrected = 0.0;  // dark subtracted
};

struct LinearityScanResult {
    std::vector<LinearityPoint> points;
    LineFit fit;  // corrected echo counts vs input photon number
};

// Scans the input photon number at fixed medium; a linear filter plus
// Poisson counting must give corrected counts proportional to the input.
LinearityScanResult run_linearity_scan(const LinearityScanConfig& config);

// --- storage time scan ------------------------------------------------------

struct DecayScanConfig {
    ExperimentConfig base;  // base.comb.period_hz is overridden per point
    std::vector<double> storage_times_s;
    // Reinterpret base.comb.d_peak as the mean tooth depth and renormalize
    // per point; keeps the absorbed energy fixed while the period changes.
    bool equal_mean_depth = true;
    bool with_detection = false;
    std::size_t n_workers = 1;
};

struct DecayPoint {
    double storage_time_s = 0.0;
    double efficiency = 0.0;
    double echo_counts_corrected = 0.0;  // when with_detection
};

struct DecayScanResult {
    std::vector<DecayPoint> points;
    // Exponential in storage time; when the material carries a doublet
    // splitting the model gains a cosine beat.
    FitResult fit;
};

DecayScanResult run_decay_scan(const DecayScanConfig& config);

// --- multimode train ---------------------------------------------------------

struct MultimodeConfig {
    ExperimentConfig base;  // pulse_center_s positions the first pulse
    std::size_t n_modes = 4;
    double mode_spacing_s = 0.0;
    // Photon number per mode; empty = base.input_nbar for every mode.
    std::vector<double> mode_nbars;
    bool with_detection = false;
};

struct MultimodeResult {
    AbsorptionSpectrum spectrum;
    PropagationResult propagation;
    std::vector<double> mode_efficiencies;
    std::vector<double> mode_peak_times_s;
    double efficiency_spread = 0.0;   // (max - min) / mean over modes
    bool ordering_preserved = false;  // echo peaks strictly in input order
    ArrivalHistogram histogram;       // when with_detection
};

// Stores a train of pulses in one shot; every mode is recalled after the
// same storage time, so the train plus counting window must fit inside the
// storage time or echoes would overlap later inputs.
MultimodeResult run_multimode(const MultimodeConfig& config);

// --- two-path interference ---------------------------------------------------

struct InterferenceConfig {
    // With a synthetic source, base.comb supplies tooth shape, depth and
    // envelope; grating periods come from the storage times below and tooth
    // widths from comb_finesse (period / finesse).  With a prepared source
    // the sequence must hold exactly two pulse pairs whose separations are
    // the two storage times.
    ExperimentConfig base;
    TimeBinQubitSpec qubit;  // qubit.tau_s must equal storage_b_s - storage_a_s
    double storage_a_s = 200e-9;
    double storage_b_s = 300e-9;
    double comb_finesse = 2.0;
    // Superposition weight of the fast grating; 0.5 = symmetric.
    double grating_weight = 0.5;
    // Tune grating_weight so both recall paths reach the overlap window with
    // equal energy.
    bool auto_balance = true;
    std::vector<double> phases_rad;  // scanned values of the qubit phase
    bool with_detection = true;
    std::size_t n_workers = 1;
};

struct InterferencePoint {
    double phase_rad = 0.0;
    double overlap_energy = 0.0;  // noiseless photons in the overlap window
    double early_energy = 0.0;    // first path alone, phase independent
    double late_energy = 0.0;     // second path alone, phase independent
    std::uint64_t overlap_counts = 0;
    double overlap_counts_corrected = 0.0;
    std::uint64_t early_counts = 0;
    std::uint64_t late_counts = 0;
};

struct InterferenceResult {
    AbsorptionSpectrum spectrum;  // superposed double grating
    double grating_weight = 0.5;  // after auto balancing
    double window_width_s = 0.0;
    double early_window_center_s = 0.0;
    double overlap_window_center_s = 0.0;
    double late_window_center_s = 0.0;
    ArrivalHistogram histogram;  // arrival times at the first scanned phase
    std::vector<InterferencePoint> points;
    FitResult noiseless_fit;
    FitResult raw_fit;        // meaningful when with_detection
    FitResult corrected_fit;  // dark-subtracted counts
    double visibility_noiseless = 0.0;
    double visibility_raw = 0.0;
    double visibility_corrected = 0.0;
};

// Stores a time-bin qubit in a double grating.  The first pulse recalled by
// the slow grating and the second recalled by the fast one leave at the same
// instant; their interference maps the qubit phase onto the overlap-window
// counts while the outer windows watch each path alone.  The counting window
// width defaults to the pulse FWHM here (the outer windows sit close to the
// input pulses).
InterferenceResult run_interference(const InterferenceConfig& config);

}  // namespace afc
