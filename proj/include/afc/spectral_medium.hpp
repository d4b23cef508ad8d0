// spectral_medium.hpp - absorption spectra of the storage medium
//
// Everything here lives on a uniform detuning grid (Hz, relative to the
// optical carrier).  Optical depth d is dimensionless: amplitude transmission
// through the medium is exp(-d/2), intensity transmission exp(-d).
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace afc {

// Uniform detuning axis, symmetric about zero: points at
// -span/2 + i * spacing with spacing = span / (n_points - 1).
struct FrequencyGrid {
    double span_hz = 0.0;
    std::size_t n_points = 0;

    double spacing() const { return span_hz / static_cast<double>(n_points - 1); }
    double point(std::size_t i) const {
        return -0.5 * span_hz + static_cast<double>(i) * spacing();
    }
    bool operator==(const FrequencyGrid& o) const {
        return span_hz == o.span_hz && n_points == o.n_points;
    }
};

FrequencyGrid make_frequency_grid(double span_hz, std::size_t n_points);

// Static properties of the storage medium and its level structure.
struct MaterialParams {
    double t1_excited_s = 100e-6;        // excited-state lifetime
    double t2_optical_s = 7e-6;          // optical coherence time
    double tz_spin_s = 6e-3;             // population lifetime of the spin levels
    double inhom_fwhm_hz = 2e9;          // inhomogeneous line width
    double d_max = 4.0;                  // peak optical depth of the unprepared line
    double branching_to_aux = 0.5;       // decay branching ratio into the auxiliary spin state
    double shf_splitting_hz = 0.0;       // superhyperfine doublet splitting, 0 = off
    double shf_weight = 0.5;             // weight of the upshifted doublet component

    void validate() const;  // throws std::invalid_argument on violation
};

enum class ToothShape { lorentzian, gaussian, square };

// Parameters of a synthetic spectral grating.  Tooth heights follow a
// Gaussian envelope (envelope_fwhm_hz > 0) or a fixed odd tooth count
// (n_teeth > 0); exactly one of the two must be set.
struct CombParams {
    double period_hz = 0.0;       // tooth spacing; stored pulses revive after 1/period
    double tooth_fwhm_hz = 0.0;   // FWHM of each tooth
    ToothShape shape = ToothShape::lorentzian;
    double d_peak = 0.0;          // depth of the central tooth above background
    double d_background = 0.0;    // residual flat depth between teeth
    double envelope_fwhm_hz = 0.0;
    std::size_t n_teeth = 0;

    void validate() const;
};

struct AbsorptionSpectrum {
    FrequencyGrid grid;
    std::vector<double> d;  // optical depth per grid point, >= 0

    double max_depth() const;
    double min_depth() const;
};

// Flat line of depth d0 across the whole grid.
AbsorptionSpectrum flat_absorption(const FrequencyGrid& grid, double d0);

// Sum of identical teeth spaced by the comb period under the height
// envelope, scaled so the central tooth peaks at d_peak, plus background.
// Depths above d_ceiling are clipped with a warning on stderr.
AbsorptionSpectrum synthetic_comb(const FrequencyGrid& grid, const CombParams& params,
                                  double d_ceiling = 4.0);

// weight * a + (1 - weight) * b; grids must match, weight in [0, 1].
AbsorptionSpectrum superpose_spectra(const AbsorptionSpectrum& a, const AbsorptionSpectrum& b,
                                     double weight);

// Replaces d(nu) by w * d(nu - s/2) + (1-w) * d(nu + s/2), linearly
// interpolated on the grid; models a doublet substructure of every feature.
AbsorptionSpectrum apply_superhyperfine_splitting(const AbsorptionSpectrum& spectrum,
                                                  double splitting_hz, double weight);

// Convolution with an area-normalized Lorentzian of the given FWHM; models a
// lower bound on achievable spectral feature widths.
AbsorptionSpectrum convolve_lorentzian(const AbsorptionSpectrum& spectrum, double fwhm_hz);

// Integral of d over the grid (Hz).
double integrated_depth(const AbsorptionSpectrum& spectrum);

// Two-column CSV: detuning_hz, optical_depth.
void write_spectrum_csv(const AbsorptionSpectrum& spectrum, const std::string& path);

}  // namespace afc
