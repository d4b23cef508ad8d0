// comb_preparation.hpp - spectral grating preparation by pulse-pair pumping
//
// A sequence of coherent pulse pairs burns a frequency-periodic hole pattern
// into the ground-state population: each pair pumps atoms at detuning delta
// with probability proportional to cos^2(pi * delta * tau_s), so population
// survives at the fringe nodes and a grating of period 1/tau_s remains.
// Pumped atoms relax into an auxiliary spin state with lifetime TZ.
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "afc/spectral_medium.hpp"

namespace afc {

struct PulsePair {
    double area_theta_rad = 0.0;   // single-pulse area, 0 < theta < pi/2
    double tau_s_s = 0.0;          // separation between the two pulses of the pair
    double pulse_fwhm_s = 30e-9;   // intensity FWHM of each pulse

    void validate() const;
};

struct PreparationSequence {
    std::vector<std::pair<PulsePair, double>> pairs;  // (pair, weight >= 0)
    std::size_t n_repetitions = 100;
    double pair_spacing_s = 15e-6;          // interval between successive pairs
    double wait_before_storage_s = 1200e-6; // dead time before the storage pulse
    // Prepared structures cannot be narrower than this; applied as a
    // Lorentzian convolution of the final spectrum (0 disables).
    double tooth_width_floor_fwhm_hz = 1e6;

    void validate() const;
};

// Ground (p_g) and auxiliary (p_aux) state populations per grid point;
// p_g + p_aux = 1 at every point.
struct GroundPopulations {
    FrequencyGrid grid;
    std::vector<double> p_g;
    std::vector<double> p_aux;
};

// Probability that one pulse pair pumps an atom at the given detuning:
// sin^2(theta) * E(delta) * cos^2(pi * delta * tau_s), with E the normalized
// single-pulse power spectrum (Gaussian, FWHM 0.44 / pulse_fwhm).
double pump_probability(double delta_hz, const PulsePair& pair);

struct PreparationResult {
    AbsorptionSpectrum spectrum;
    GroundPopulations populations;
};

// Runs the pumping recurrence over n_repetitions, lets the pattern relax for
// wait_before_storage, and converts populations to an absorption spectrum
// d(nu) = 2 * p_g(nu) * d_initial(nu) with d_initial the unprepared line.
PreparationResult prepare_comb(const MaterialParams& material, const PreparationSequence& sequence,
                               const FrequencyGrid& grid);

// Spin relaxation of a stored pattern toward the unpolarized state over the
// given time.
GroundPopulations grating_decay(const GroundPopulations& populations,
                                const MaterialParams& material, double elapsed_s);

// Spectrum corresponding to a population pattern (same mapping prepare_comb
// uses; floor_fwhm_hz > 0 applies the width-floor convolution).
AbsorptionSpectrum spectrum_from_populations(const GroundPopulations& populations,
                                             const MaterialParams& material,
                                             double floor_fwhm_hz = 0.0);

// Echo-efficiency multiplier after the grating has relaxed for elapsed_s: the
// grating contrast decays as exp(-t/TZ) and efficiency goes as its square.
double echo_decay_multiplier(const MaterialParams& material, double elapsed_s);

// Three-column CSV: detuning_hz, p_g, p_aux.
void write_populations_csv(const GroundPopulations& populations, const std::string& path);

}  // namespace afc
