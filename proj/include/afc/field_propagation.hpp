// field_propagation.hpp - linear propagation of weak pulses through a
// structured absorption spectrum
//
// The medium acts as a linear filter H(nu) = exp(-d(nu)/2 + i*phi(nu)).  The
// phase phi is the discrete Hilbert transform of -d/2, which makes the filter
// causal (minimum phase); a frequency comb of period P then re-emits an echo
// of the input at delay 1/P after the transmitted pulse.
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "afc/spectral_medium.hpp"

namespace afc {

struct TimeGrid {
    double t0_s = 0.0;
    double dt_s = 0.0;
    std::size_t n_samples = 0;

    double point(std::size_t i) const { return t0_s + static_cast<double>(i) * dt_s; }
    double end() const { return point(n_samples - 1); }
    bool operator==(const TimeGrid& o) const {
        return t0_s == o.t0_s && dt_s == o.dt_s && n_samples == o.n_samples;
    }
};

TimeGrid make_time_grid(double t0_s, double dt_s, std::size_t n_samples);

// Slowly varying complex field envelope; |a|^2 integrates to the mean photon
// number of the pulse.
struct FieldEnvelope {
    TimeGrid grid;
    std::vector<std::complex<double>> a;

    double nbar() const;  // sum |a|^2 dt
};

// Transform-limited Gaussian pulse with exact mean photon number nbar and a
// constant phase.  Requires fwhm >= 4 dt so the envelope is resolved.
FieldEnvelope gaussian_pulse(const TimeGrid& grid, double center_s, double fwhm_s, double nbar,
                             double phase_rad);

// Coherently adds another Gaussian pulse to an existing envelope.
void add_gaussian_pulse(FieldEnvelope& field, double center_s, double fwhm_s, double nbar,
                        double phase_rad);

// Amplitude response of a medium on its spectral grid, kept as
// (log-magnitude, phase) so interpolation preserves |H| <= 1.
struct TransferFunction {
    FrequencyGrid grid;
    std::vector<double> log_magnitude;  // -d/2 per grid point
    std::vector<double> phase;          // radians per grid point

    std::complex<double> response(std::size_t i) const {
        return std::exp(std::complex<double>(log_magnitude[i], phase[i]));
    }
};

TransferFunction transfer_function(const AbsorptionSpectrum& spectrum,
                                   bool include_dispersion = true);

struct PropagationResult {
    FieldEnvelope output;
    double input_nbar = 0.0;
    // Interval where the input intensity exceeds 1e-9 of its peak.
    double input_support_begin_s = 0.0;
    double input_support_end_s = 0.0;
};

// Filters the input through H.  The time window must satisfy the sampling
// theorem for the spectral grid (1/(2 dt) >= span/2) and be long enough to
// contain the medium response; as a guideline leave at least 1.5x the
// intended storage time after the last input pulse.  If more than 0.5% of
// the output energy falls beyond the window the response does not fit and an
// error is raised.
PropagationResult propagate(const FieldEnvelope& input, const TransferFunction& tf);

// Energy in [window_start, window_end] divided by the input photon number.
// No restriction on window placement (use for transmission measurements).
double energy_fraction(const PropagationResult& result, double window_start_s,
                       double window_end_s);

// Same ratio, but the window must lie strictly after the input support;
// throws if it overlaps the input pulse(s).
double echo_efficiency(const PropagationResult& result, double window_start_s,
                       double window_end_s);

// Time of the intensity maximum after the input support (the echo position).
double find_echo_peak(const PropagationResult& result);

// Time of the intensity maximum within a window of any placement.
double find_peak_in_window(const FieldEnvelope& field, double window_start_s,
                           double window_end_s);

// Four-column CSV: time_s, re, im, intensity.
void write_field_csv(const FieldEnvelope& field, const std::string& path);

// --- discrete-atom reference model -------------------------------------
//
// Independent cross-check of the filter: each atom accumulates the input
// field at its own detuning and re-radiates with its free-evolution phase.
// First order in the coupling, valid for weak absorption (d_peak <= 0.1).

struct AtomEnsemble {
    std::vector<double> detuning_hz;
    std::vector<double> weight;  // >= 0, proportional to local absorption
};

enum class SamplingMode { grid, stochastic };

// grid mode: one atom per grid point, weight = d(nu); n_atoms must be 0 (all
// points) or equal to the grid size.  stochastic mode: n_atoms detunings
// drawn with density proportional to d, unit weights.
AtomEnsemble sample_ensemble(const AbsorptionSpectrum& spectrum, std::size_t n_atoms,
                             SamplingMode mode, std::uint64_t seed);

// Total forward field (attenuated transmitted + re-emitted) from the Born
// sum over atoms.  Matching the filter model requires
// coupling = integrated_depth(spectrum).  Throws if the re-emitted energy
// exceeds 20% of the input (outside the weak-absorption regime).
PropagationResult atom_sum_echo(const AtomEnsemble& ensemble, const FieldEnvelope& input,
                                double coupling);

}  // namespace afc
