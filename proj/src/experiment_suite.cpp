#include "afc/experiment_suite.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "afc/rng.hpp"

namespace afc {

namespace {

// Seed salts so every detection stream in a campaign is independent.
constexpr std::uint64_t kSignalSalt = 1;
constexpr std::uint64_t kReferenceSalt = 2;
constexpr std::uint64_t kControlSalt = 3;
constexpr std::uint64_t kScanSaltBase = 1000;
constexpr std::uint64_t kPhaseSaltBase = 2000;

void validate_common(const ExperimentConfig& config) {
    config.material.validate();
    config.detector.validate();
    config.plan.validate();
    if (config.input_nbar <= 0.0)
        throw std::invalid_argument("experiment_suite: input_nbar must be > 0");
    if (config.pulse_fwhm_s <= 0.0)
        throw std::invalid_argument("experiment_suite: pulse_fwhm_s must be > 0");
    if (config.echo_window_s < 0.0)
        throw std::invalid_argument("experiment_suite: echo_window_s must be >= 0");
}

// Per-trial multiplier for a prepared grating relaxing across a sequence.
// Synthetic spectra are static, so they get no scaling.
std::function<double(std::size_t)> sequence_decay(const ExperimentConfig& config) {
    if (config.source != SpectrumSource::prepared)
        return {};
    const MaterialParams material = config.material;
    const double rate = config.plan.trial_rate_hz;
    return [material, rate](std::size_t j) {
        return echo_decay_multiplier(material, static_cast<double>(j) / rate);
    };
}

double window_energy(const PropagationResult& prop, double start_s, double end_s) {
    return energy_fraction(prop, start_s, end_s) * prop.input_nbar;
}

// Runs body(0..n-1) on the given number of threads; bodies only touch their
// own index, so results are identical for any worker count.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(workers, n); ++t)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

}  // namespace

double expected_storage_time(const ExperimentConfig& config) {
    if (config.source == SpectrumSource::synthetic) {
        if (config.comb.period_hz <= 0.0)
            throw std::invalid_argument("experiment_suite: comb period not set");
        return 1.0 / config.comb.period_hz;
    }
    if (config.sequence.pairs.empty())
        throw std::invalid_argument("experiment_suite: preparation sequence has no pulse pairs");
    const auto* heaviest = &config.sequence.pairs.front();
    for (const auto& entry : config.sequence.pairs)
        if (entry.second > heaviest->second)
            heaviest = &entry;
    return heaviest->first.tau_s_s;
}

double echo_window_width(const ExperimentConfig& config) {
    return config.echo_window_s > 0.0 ? config.echo_window_s : 4.0 * config.pulse_fwhm_s;
}

AbsorptionSpectrum build_spectrum(const ExperimentConfig& config) {
    AbsorptionSpectrum spectrum =
        config.source == SpectrumSource::synthetic
            ? synthetic_comb(config.freq_grid, config.comb)
            : prepare_comb(config.material, config.sequence, config.freq_grid).spectrum;
    if (config.material.shf_splitting_hz > 0.0)
        spectrum = apply_superhyperfine_splitting(spectrum, config.material.shf_splitting_hz,
                                                  config.material.shf_weight);
    return spectrum;
}

double d_peak_for_mean_depth(const CombParams& params, const FrequencyGrid& grid,
                             double target_mean) {
    if (target_mean <= 0.0)
        throw std::invalid_argument("experiment_suite: target mean depth must be > 0");
    CombParams unit = params;
    unit.d_peak = 1.0;
    unit.d_background = 0.0;
    AbsorptionSpectrum probe = synthetic_comb(grid, unit, 1e300);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        if (std::abs(grid.point(i)) <= 0.5 * unit.period_hz) {
            sum += probe.d[i];
            ++n;
        }
    }
    if (n == 0 || sum <= 0.0)
        throw std::runtime_error("experiment_suite: comb has no depth in the central period");
    return target_mean * static_cast<double>(n) / sum;
}

SingleModeResult run_single_mode(const ExperimentConfig& config) {
    validate_common(config);

    SingleModeResult res;
    res.spectrum = build_spectrum(config);
    res.storage_time_s = expected_storage_time(config);

    FieldEnvelope input = gaussian_pulse(config.time_grid, config.pulse_center_s,
                                         config.pulse_fwhm_s, config.input_nbar, 0.0);
    TransferFunction tf = transfer_function(res.spectrum, config.include_dispersion);
    res.propagation = propagate(input, tf);

    const double w = echo_window_width(config);
    res.echo_window_start_s = config.pulse_center_s + res.storage_time_s - 0.5 * w;
    res.echo_window_end_s = config.pulse_center_s + res.storage_time_s + 0.5 * w;
    res.efficiency =
        echo_efficiency(res.propagation, res.echo_window_start_s, res.echo_window_end_s);
    res.transmitted_fraction =
        energy_fraction(res.propagation, res.propagation.input_support_begin_s,
                        res.propagation.input_support_end_s);
    res.echo_peak_time_s = find_peak_in_window(res.propagation.output, res.echo_window_start_s,
                                               res.echo_window_end_s);

    res.histogram = detect(res.propagation.output, config.detector, config.plan,
                           derive_seed(config.master_seed, kSignalSalt), sequence_decay(config));
    res.reference_histogram = detect(input, config.detector, config.plan,
                                     derive_seed(config.master_seed, kReferenceSalt));
    res.input_calibration = calibrate_nbar(res.reference_histogram, config.detector);

    const double echo_corrected = window_counts_corrected(
        res.histogram, config.detector, res.echo_window_start_s, res.echo_window_end_s);
    const double denom = static_cast<double>(config.plan.total_trials()) * config.detector.eta_d *
                         config.detector.eta_t * res.input_calibration.nbar;
    res.detected_efficiency = denom > 0.0 ? std::max(echo_corrected, 0.0) / denom : 0.0;

    // Unprepared line: flat absorption at the material's peak depth.
    const AbsorptionSpectrum control_line =
        flat_absorption(config.freq_grid, config.material.d_max);
    const TransferFunction control_tf = transfer_function(control_line, config.include_dispersion);
    PropagationResult control = propagate(input, control_tf);
    res.control_transmission =
        energy_fraction(control, config.time_grid.t0_s, config.time_grid.end());
    res.control_echo_fraction =
        energy_fraction(control, res.echo_window_start_s, res.echo_window_end_s);
    res.control_histogram = detect(control.output, config.detector, config.plan,
                                   derive_seed(config.master_seed, kControlSalt));
    return res;
}

LinearityScanResult run_linearity_scan(const LinearityScanConfig& config) {
    validate_common(config.base);
    if (config.input_nbars.size() < 4)
        throw std::invalid_argument("experiment_suite: linearity scan needs at least four points");
    for (double nbar : config.input_nbars)
        if (nbar <= 0.0)
            throw std::invalid_argument("experiment_suite: scan photon numbers must be > 0");
    const auto [lo, hi] = std::minmax_element(config.input_nbars.begin(), config.input_nbars.end());
    if (*hi < 10.0 * *lo)
        throw std::invalid_argument(
            "experiment_suite: linearity scan must span at least a factor of 10 in photon number");

    const AbsorptionSpectrum spectrum = build_spectrum(config.base);
    const TransferFunction tf = transfer_function(spectrum, config.base.include_dispersion);
    const double storage = expected_storage_time(config.base);
    const double w = echo_window_width(config.base);
    const double ws = config.base.pulse_center_s + storage - 0.5 * w;
    const double we = config.base.pulse_center_s + storage + 0.5 * w;
    const auto scale = sequence_decay(config.base);

    LinearityScanResult out;
    out.points.resize(config.input_nbars.size());
    parallel_for(config.input_nbars.size(), config.n_workers, [&](std::size_t i) {
        FieldEnvelope input = gaussian_pulse(config.base.time_grid, config.base.pulse_center_s,
                                             config.base.pulse_fwhm_s, config.input_nbars[i], 0.0);
        PropagationResult prop = propagate(input, tf);

        LinearityPoint pt;
        pt.input_nbar = config.input_nbars[i];
        pt.efficiency = echo_efficiency(prop, ws, we);
        ArrivalHistogram hist =
            detect(prop.output, config.base.detector, config.base.plan,
                   derive_seed(config.base.master_seed, kScanSaltBase + i), scale);
        pt.echo_counts = window_counts(hist, ws, we);
        pt.echo_counts_corrected = window_counts_corrected(hist, config.base.detector, ws, we);
        out.points[i] = pt;
    });

    std::vector<double> xs, ys;
    for (const LinearityPoint& pt : out.points) {
        xs.push_back(pt.input_nbar);
        ys.push_back(pt.echo_counts_corrected);
    }
    out.fit = fit_line_through_origin(xs, ys);
    return out;
}

DecayScanResult run_decay_scan(const DecayScanConfig& config) {
    validate_common(config.base);
    if (config.base.source != SpectrumSource::synthetic)
        throw std::invalid_argument("experiment_suite: decay scan requires a synthetic comb");
    if (config.storage_times_s.size() < 3)
        throw std::invalid_argument("experiment_suite: decay scan needs at least three points");
    for (double storage : config.storage_times_s)
        if (storage <= 0.0)
            throw std::invalid_argument("experiment_suite: storage times must be > 0");

    DecayScanResult out;
    out.points.resize(config.storage_times_s.size());
    parallel_for(config.storage_times_s.size(), config.n_workers, [&](std::size_t i) {
        const double storage = config.storage_times_s[i];
        ExperimentConfig point = config.base;
        point.comb.period_hz = 1.0 / storage;
        if (config.equal_mean_depth)
            point.comb.d_peak =
                d_peak_for_mean_depth(point.comb, point.freq_grid, config.base.comb.d_peak);
        point.master_seed = derive_seed(config.base.master_seed, kScanSaltBase + i);

        const AbsorptionSpectrum spectrum = build_spectrum(point);
        const TransferFunction tf = transfer_function(spectrum, point.include_dispersion);
        FieldEnvelope input = gaussian_pulse(point.time_grid, point.pulse_center_s,
                                             point.pulse_fwhm_s, point.input_nbar, 0.0);
        PropagationResult prop = propagate(input, tf);

        const double w = echo_window_width(point);
        const double ws = point.pulse_center_s + storage - 0.5 * w;
        const double we = point.pulse_center_s + storage + 0.5 * w;

        DecayPoint dp;
        dp.storage_time_s = storage;
        dp.efficiency = echo_efficiency(prop, ws, we);
        if (config.with_detection) {
            ArrivalHistogram hist = detect(prop.output, point.detector, point.plan,
                                           derive_seed(point.master_seed, kSignalSalt));
            dp.echo_counts_corrected = window_counts_corrected(hist, point.detector, ws, we);
        }
        out.points[i] = dp;
    });

    std::vector<double> xs, ys;
    for (const DecayPoint& dp : out.points) {
        xs.push_back(dp.storage_time_s);
        ys.push_back(dp.efficiency);
    }
    out.fit = config.base.material.shf_splitting_hz > 0.0 ? fit_decay_with_beat(xs, ys)
                                                          : fit_exponential(xs, ys);
    return out;
}

MultimodeResult run_multimode(const MultimodeConfig& config) {
    validate_common(config.base);
    if (config.n_modes < 2)
        throw std::invalid_argument("experiment_suite: multimode run needs at least two modes");
    if (config.mode_spacing_s <= 0.0)
        throw std::invalid_argument("experiment_suite: mode_spacing_s must be > 0");
    std::vector<double> nbars = config.mode_nbars;
    if (nbars.empty())
        nbars.assign(config.n_modes, config.base.input_nbar);
    if (nbars.size() != config.n_modes)
        throw std::invalid_argument("experiment_suite: mode_nbars size must equal n_modes");
    double total_nbar = 0.0;
    for (double nbar : nbars) {
        if (nbar <= 0.0)
            throw std::invalid_argument("experiment_suite: mode photon numbers must be > 0");
        total_nbar += nbar;
    }

    const double storage = expected_storage_time(config.base);
    const double w = echo_window_width(config.base);
    const double train = static_cast<double>(config.n_modes - 1) * config.mode_spacing_s;
    if (config.mode_spacing_s < w)
        throw std::invalid_argument(
            "experiment_suite: mode spacing is narrower than the counting window");
    if (storage < train + 0.5 * w + 3.0 * config.base.pulse_fwhm_s)
        throw std::invalid_argument(
            "experiment_suite: input train would overlap the first echo; shorten the train or "
            "extend the storage time");

    FieldEnvelope input = gaussian_pulse(config.base.time_grid, config.base.pulse_center_s,
                                         config.base.pulse_fwhm_s, nbars[0], 0.0);
    for (std::size_t k = 1; k < config.n_modes; ++k)
        add_gaussian_pulse(input,
                           config.base.pulse_center_s +
                               static_cast<double>(k) * config.mode_spacing_s,
                           config.base.pulse_fwhm_s, nbars[k], 0.0);

    MultimodeResult res;
    res.spectrum = build_spectrum(config.base);
    const TransferFunction tf = transfer_function(res.spectrum, config.base.include_dispersion);
    res.propagation = propagate(input, tf);

    // energy_fraction divides by the total input; rescale to the per-mode
    // photon number so each entry is a storage efficiency.
    for (std::size_t k = 0; k < config.n_modes; ++k) {
        const double center = config.base.pulse_center_s +
                              static_cast<double>(k) * config.mode_spacing_s + storage;
        const double frac = energy_fraction(res.propagation, center - 0.5 * w, center + 0.5 * w);
        res.mode_efficiencies.push_back(frac * total_nbar / nbars[k]);
        res.mode_peak_times_s.push_back(
            find_peak_in_window(res.propagation.output, center - 0.5 * w, center + 0.5 * w));
    }
    const auto [lo, hi] =
        std::minmax_element(res.mode_efficiencies.begin(), res.mode_efficiencies.end());
    double mean = 0.0;
    for (double e : res.mode_efficiencies)
        mean += e;
    mean /= static_cast<double>(res.mode_efficiencies.size());
    res.efficiency_spread = mean > 0.0 ? (*hi - *lo) / mean : 0.0;
    res.ordering_preserved =
        std::adjacent_find(res.mode_peak_times_s.begin(), res.mode_peak_times_s.end(),
                           [](double a, double b) { return a >= b; }) ==
        res.mode_peak_times_s.end();

    if (config.with_detection)
        res.histogram = detect(res.propagation.output, config.base.detector, config.base.plan,
                               derive_seed(config.base.master_seed, kSignalSalt),
                               sequence_decay(config.base));
    return res;
}

InterferenceResult run_interference(const InterferenceConfig& config) {
    validate_common(config.base);
    if (config.phases_rad.size() < 4)
        throw std::invalid_argument("experiment_suite: phase scan needs at least four points");
    if (!(config.storage_b_s > config.storage_a_s) || config.storage_a_s <= 0.0)
        throw std::invalid_argument(
            "experiment_suite: storage times must satisfy 0 < storage_a_s < storage_b_s");
    if (config.qubit.nbar_total <= 0.0)
        throw std::invalid_argument("experiment_suite: qubit.nbar_total must be > 0");
    if (config.qubit.tau_s <= config.base.pulse_fwhm_s)
        throw std::invalid_argument("experiment_suite: qubit.tau_s must exceed the pulse FWHM");
    const double split = config.storage_b_s - config.storage_a_s;
    if (std::abs(config.qubit.tau_s - split) > 1e-9 * split)
        throw std::invalid_argument(
            "experiment_suite: qubit.tau_s must equal storage_b_s - storage_a_s so the two "
            "recall paths overlap");

    InterferenceResult res;
    res.grating_weight = config.grating_weight;

    const double t1 = config.base.pulse_center_s;
    const double t2 = t1 + config.qubit.tau_s;
    res.early_window_center_s = t1 + config.storage_a_s;
    res.overlap_window_center_s = t1 + config.storage_b_s;  // == t2 + storage_a_s
    res.late_window_center_s = t2 + config.storage_b_s;

    const double w =
        config.base.echo_window_s > 0.0 ? config.base.echo_window_s : config.base.pulse_fwhm_s;
    res.window_width_s = w;
    if (config.qubit.tau_s < w)
        throw std::invalid_argument(
            "experiment_suite: counting windows overlap; widen the storage time split or "
            "narrow echo_window_s");
    if (res.early_window_center_s - 0.5 * w < t2 + 2.8 * config.base.pulse_fwhm_s)
        throw std::invalid_argument(
            "experiment_suite: first counting window overlaps the input pulses; increase "
            "storage_a_s or shorten the pulses");
    if (res.late_window_center_s + 0.5 * w > config.base.time_grid.end())
        throw std::invalid_argument(
            "experiment_suite: time grid too short for the last counting window");

    auto windowed = [&](const PropagationResult& prop, double center) {
        return window_energy(prop, center - 0.5 * w, center + 0.5 * w);
    };
    const double nbar_bin = 0.5 * config.qubit.nbar_total;

    // Build the two constituent gratings; the double grating is their weighted
    // superposition and the weight balances the two recall paths.
    AbsorptionSpectrum grating_a;
    AbsorptionSpectrum grating_b;
    if (config.base.source == SpectrumSource::synthetic) {
        if (config.comb_finesse <= 1.0)
            throw std::invalid_argument("experiment_suite: comb_finesse must exceed 1");
        auto grating = [&](double storage) {
            CombParams p = config.base.comb;
            p.period_hz = 1.0 / storage;
            p.tooth_fwhm_hz = p.period_hz / config.comb_finesse;
            return synthetic_comb(config.base.freq_grid, p);
        };
        grating_a = grating(config.storage_a_s);
        grating_b = grating(config.storage_b_s);
    } else {
        if (config.base.sequence.pairs.size() != 2)
            throw std::invalid_argument(
                "experiment_suite: a prepared interference run needs exactly two pulse pairs");
        const double tau0 = config.base.sequence.pairs[0].first.tau_s_s;
        const double tau1 = config.base.sequence.pairs[1].first.tau_s_s;
        if (std::abs(std::min(tau0, tau1) - config.storage_a_s) > 1e-9 * config.storage_a_s ||
            std::abs(std::max(tau0, tau1) - config.storage_b_s) > 1e-9 * config.storage_b_s)
            throw std::invalid_argument(
                "experiment_suite: pair separations must equal the two storage times");
        // Each grating comes from its own single-pair preparation; interleaved
        // two-pair pumping would additionally imprint the difference period.
        auto prepared = [&](std::size_t index) {
            PreparationSequence seq = config.base.sequence;
            seq.pairs = {config.base.sequence.pairs[index]};
            return prepare_comb(config.base.material, seq, config.base.freq_grid).spectrum;
        };
        const std::size_t index_a = tau0 <= tau1 ? 0 : 1;
        grating_a = prepared(index_a);
        grating_b = prepared(1 - index_a);
    }

    auto double_grating = [&](double weight) {
        AbsorptionSpectrum s = superpose_spectra(grating_a, grating_b, weight);
        if (config.base.material.shf_splitting_hz > 0.0)
            s = apply_superhyperfine_splitting(s, config.base.material.shf_splitting_hz,
                                               config.base.material.shf_weight);
        return s;
    };

    if (config.auto_balance) {
        // Equalize the overlap-window energy of the two recall paths by
        // shifting depth between the gratings.  The path amplitudes are
        // linear in the weights to first order, so iterate twice.
        for (int pass = 0; pass < 2; ++pass) {
            const TransferFunction probe_tf = transfer_function(
                double_grating(res.grating_weight), config.base.include_dispersion);
            FieldEnvelope p1 = gaussian_pulse(config.base.time_grid, t1,
                                              config.base.pulse_fwhm_s, nbar_bin, 0.0);
            FieldEnvelope p2 = gaussian_pulse(config.base.time_grid, t2,
                                              config.base.pulse_fwhm_s, nbar_bin, 0.0);
            const double via_b = windowed(propagate(p1, probe_tf), res.overlap_window_center_s);
            const double via_a = windowed(propagate(p2, probe_tf), res.overlap_window_center_s);
            if (via_a <= 0.0 || via_b <= 0.0)
                throw std::runtime_error(
                    "experiment_suite: a recall path carries no energy; check the grating "
                    "depths");
            // amplitude(path a) ~ weight, amplitude(path b) ~ 1 - weight
            const double ratio =
                std::sqrt(via_b / via_a) * res.grating_weight / (1.0 - res.grating_weight);
            res.grating_weight = ratio / (1.0 + ratio);
        }
    }
    res.spectrum = double_grating(res.grating_weight);
    const TransferFunction tf = transfer_function(res.spectrum, config.base.include_dispersion);

    const auto scale = sequence_decay(config.base);
    res.points.resize(config.phases_rad.size());
    parallel_for(config.phases_rad.size(), config.n_workers, [&](std::size_t i) {
        const double phi = config.phases_rad[i];
        FieldEnvelope input =
            gaussian_pulse(config.base.time_grid, t1, config.base.pulse_fwhm_s, nbar_bin, 0.0);
        add_gaussian_pulse(input, t2, config.base.pulse_fwhm_s, nbar_bin, phi);
        PropagationResult prop = propagate(input, tf);

        InterferencePoint pt;
        pt.phase_rad = phi;
        pt.overlap_energy = windowed(prop, res.overlap_window_center_s);
        pt.early_energy = windowed(prop, res.early_window_center_s);
        pt.late_energy = windowed(prop, res.late_window_center_s);
        if (config.with_detection) {
            ArrivalHistogram hist =
                detect(prop.output, config.base.detector, config.base.plan,
                       derive_seed(config.base.master_seed, kPhaseSaltBase + i), scale);
            auto counts = [&](double center) {
                return window_counts(hist, center - 0.5 * w, center + 0.5 * w);
            };
            pt.overlap_counts = counts(res.overlap_window_center_s);
            pt.early_counts = counts(res.early_window_center_s);
            pt.late_counts = counts(res.late_window_center_s);
            pt.overlap_counts_corrected =
                window_counts_corrected(hist, config.base.detector,
                                        res.overlap_window_center_s - 0.5 * w,
                                        res.overlap_window_center_s + 0.5 * w);
            if (i == 0)
                res.histogram = std::move(hist);
        }
        res.points[i] = pt;
    });

    std::vector<double> phases, energies, raw, corrected;
    for (const InterferencePoint& pt : res.points) {
        phases.push_back(pt.phase_rad);
        energies.push_back(pt.overlap_energy);
        raw.push_back(static_cast<double>(pt.overlap_counts));
        corrected.push_back(pt.overlap_counts_corrected);
    }
    res.noiseless_fit = fit_visibility(phases, energies);
    res.visibility_noiseless = res.noiseless_fit.params.at("visibility");
    if (config.with_detection) {
        res.raw_fit = fit_visibility(phases, raw);
        res.visibility_raw = res.raw_fit.params.at("visibility");
        res.corrected_fit = fit_visibility(phases, corrected);
        res.visibility_corrected = res.corrected_fit.params.at("visibility");
    }
    return res;
}

}  // namespace afc
