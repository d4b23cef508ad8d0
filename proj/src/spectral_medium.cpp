#include "afc/spectral_medium.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "afc/text_io.hpp"

namespace afc {

namespace {

constexpr double kFourLn2 = 2.772588722239781;  // 4 * ln 2

double tooth_profile(ToothShape shape, double delta, double fwhm) {
    switch (shape) {
        case ToothShape::lorentzian: {
            double hw = 0.5 * fwhm;
            return hw * hw / (delta * delta + hw * hw);
        }
        case ToothShape::gaussian:
            return std::exp(-kFourLn2 * delta * delta / (fwhm * fwhm));
        case ToothShape::square:
            return std::abs(delta) <= 0.5 * fwhm ? 1.0 : 0.0;
    }
    return 0.0;
}

// Teeth with envelope weight below this threshold are dropped; the cutoff is
// part of the documented construction so it can be reproduced exactly.
constexpr double kEnvelopeCutoff = 1e-14;

}  // namespace

FrequencyGrid make_frequency_grid(double span_hz, std::size_t n_points) {
    if (!(span_hz > 0.0))
        throw std::invalid_argument("spectral_medium: grid span must be positive");
    if (n_points < 2)
        throw std::invalid_argument("spectral_medium: grid needs at least 2 points");
    return FrequencyGrid{span_hz, n_points};
}

void MaterialParams::validate() const {
    if (!(t1_excited_s > 0.0 && t2_optical_s > 0.0 && tz_spin_s > 0.0))
        throw std::invalid_argument("spectral_medium: material lifetimes must be positive");
    if (t2_optical_s > 2.0 * t1_excited_s)
        throw std::invalid_argument(
            "spectral_medium: optical coherence time cannot exceed twice the excited lifetime");
    if (!(inhom_fwhm_hz > 0.0))
        throw std::invalid_argument("spectral_medium: inhomogeneous width must be positive");
    if (!(d_max > 0.0))
        throw std::invalid_argument("spectral_medium: peak depth must be positive");
    if (branching_to_aux < 0.0 || branching_to_aux > 1.0)
        throw std::invalid_argument("spectral_medium: branching ratio must lie in [0, 1]");
    if (shf_splitting_hz < 0.0)
        throw std::invalid_argument("spectral_medium: doublet splitting cannot be negative");
    if (shf_weight < 0.0 || shf_weight > 1.0)
        throw std::invalid_argument("spectral_medium: doublet weight must lie in [0, 1]");
}

void CombParams::validate() const {
    if (!(period_hz > 0.0) || !(tooth_fwhm_hz > 0.0))
        throw std::invalid_argument("spectral_medium: comb period and tooth width must be positive");
    if (period_hz / tooth_fwhm_hz <= 1.0)
        throw std::invalid_argument("spectral_medium: comb finesse (period/width) must exceed 1");
    if (d_background < 0.0 || !(d_peak > d_background))
        throw std::invalid_argument("spectral_medium: need tooth depth > background depth >= 0");
    bool has_envelope = envelope_fwhm_hz > 0.0;
    bool has_count = n_teeth > 0;
    if (has_envelope == has_count)
        throw std::invalid_argument(
            "spectral_medium: set exactly one of envelope width or tooth count");
    if (has_count && n_teeth % 2 == 0)
        throw std::invalid_argument("spectral_medium: tooth count must be odd (central tooth at 0)");
}

double AbsorptionSpectrum::max_depth() const {
    return *std::max_element(d.begin(), d.end());
}

double AbsorptionSpectrum::min_depth() const {
    return *std::min_element(d.begin(), d.end());
}

AbsorptionSpectrum flat_absorption(const FrequencyGrid& grid, double d0) {
    if (grid.n_points < 2)
        throw std::invalid_argument("spectral_medium: invalid grid");
    if (d0 < 0.0)
        throw std::invalid_argument("spectral_medium: optical depth cannot be negative");
    return AbsorptionSpectrum{grid, std::vector<double>(grid.n_points, d0)};
}

AbsorptionSpectrum synthetic_comb(const FrequencyGrid& grid, const CombParams& params,
                                  double d_ceiling) {
    params.validate();
    if (grid.spacing() > params.tooth_fwhm_hz / 8.0)
        throw std::invalid_argument(
            "spectral_medium: grid spacing must be at most tooth FWHM / 8");

    // Envelope weight of tooth k (height modulation, not a mask on nu).
    long k_max;
    auto envelope = [&](long k) {
        double f = static_cast<double>(k) * params.period_hz;
        if (params.n_teeth > 0)
            return 1.0;
        return std::exp(-kFourLn2 * f * f / (params.envelope_fwhm_hz * params.envelope_fwhm_hz));
    };
    if (params.n_teeth > 0) {
        k_max = static_cast<long>((params.n_teeth - 1) / 2);
    } else {
        k_max = 0;
        while (envelope(k_max + 1) >= kEnvelopeCutoff)
            ++k_max;
    }

    auto comb_sum = [&](double nu) {
        double s = 0.0;
        for (long k = -k_max; k <= k_max; ++k)
            s += envelope(k) *
                 tooth_profile(params.shape, nu - static_cast<double>(k) * params.period_hz,
                               params.tooth_fwhm_hz);
        return s;
    };

    const double s0 = comb_sum(0.0);  // central-tooth peak including neighbour tails
    AbsorptionSpectrum out{grid, std::vector<double>(grid.n_points)};
    bool clipped = false;
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        double v = params.d_background + params.d_peak * comb_sum(grid.point(i)) / s0;
        if (v > d_ceiling) {
            v = d_ceiling;
            clipped = true;
        }
        out.d[i] = v;
    }
    if (clipped)
        std::cerr << "spectral_medium: comb depth clipped at ceiling " << d_ceiling << "\n";
    return out;
}

AbsorptionSpectrum superpose_spectra(const AbsorptionSpectrum& a, const AbsorptionSpectrum& b,
                                     double weight) {
    if (!(a.grid == b.grid))
        throw std::invalid_argument("spectral_medium: cannot superpose spectra on different grids");
    if (weight < 0.0 || weight > 1.0)
        throw std::invalid_argument("spectral_medium: superposition weight must lie in [0, 1]");
    AbsorptionSpectrum out{a.grid, std::vector<double>(a.d.size())};
    for (std::size_t i = 0; i < a.d.size(); ++i)
        out.d[i] = weight * a.d[i] + (1.0 - weight) * b.d[i];
    return out;
}

namespace {

// d sampled at nu - shift with linear interpolation, zero outside the grid.
double sample_shifted(const AbsorptionSpectrum& s, std::size_t i, double shift) {
    double pos = static_cast<double>(i) - shift / s.grid.spacing();
    if (pos <= -1.0 || pos >= static_cast<double>(s.grid.n_points))
        return 0.0;
    long lo = static_cast<long>(std::floor(pos));
    double frac = pos - static_cast<double>(lo);
    double vlo = (lo >= 0 && lo < static_cast<long>(s.grid.n_points)) ? s.d[lo] : 0.0;
    long hi = lo + 1;
    double vhi = (hi >= 0 && hi < static_cast<long>(s.grid.n_points)) ? s.d[hi] : 0.0;
    return vlo + frac * (vhi - vlo);
}

}  // namespace

AbsorptionSpectrum apply_superhyperfine_splitting(const AbsorptionSpectrum& spectrum,
                                                  double splitting_hz, double weight) {
    if (splitting_hz < 0.0)
        throw std::invalid_argument("spectral_medium: doublet splitting cannot be negative");
    if (weight < 0.0 || weight > 1.0)
        throw std::invalid_argument("spectral_medium: doublet weight must lie in [0, 1]");
    if (splitting_hz == 0.0)
        return spectrum;
    AbsorptionSpectrum out{spectrum.grid, std::vector<double>(spectrum.d.size())};
    const double half = 0.5 * splitting_hz;
    for (std::size_t i = 0; i < spectrum.d.size(); ++i)
        out.d[i] = weight * sample_shifted(spectrum, i, half) +
                   (1.0 - weight) * sample_shifted(spectrum, i, -half);
    return out;
}

AbsorptionSpectrum convolve_lorentzian(const AbsorptionSpectrum& spectrum, double fwhm_hz) {
    if (!(fwhm_hz > 0.0))
        throw std::invalid_argument("spectral_medium: convolution width must be positive");
    const double dnu = spectrum.grid.spacing();
    const double hw = 0.5 * fwhm_hz;
    // Kernel truncated at 60 half-widths and renormalized to unit sum, so the
    // integrated depth is conserved exactly.
    long reach = static_cast<long>(std::ceil(60.0 * hw / dnu));
    reach = std::min<long>(reach, static_cast<long>(spectrum.grid.n_points) - 1);
    std::vector<double> kernel(2 * reach + 1);
    double norm = 0.0;
    for (long j = -reach; j <= reach; ++j) {
        double x = static_cast<double>(j) * dnu;
        kernel[j + reach] = hw * hw / (x * x + hw * hw);
        norm += kernel[j + reach];
    }
    for (double& k : kernel)
        k /= norm;
    const long n = static_cast<long>(spectrum.grid.n_points);
    AbsorptionSpectrum out{spectrum.grid, std::vector<double>(spectrum.d.size(), 0.0)};
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        long j0 = std::max(-reach, -i), j1 = std::min(reach, n - 1 - i);
        for (long j = j0; j <= j1; ++j)
            acc += kernel[j + reach] * spectrum.d[i + j];
        out.d[i] = acc;
    }
    return out;
}

double integrated_depth(const AbsorptionSpectrum& spectrum) {
    double s = 0.0;
    for (double v : spectrum.d)
        s += v;
    return s * spectrum.grid.spacing();
}

void write_spectrum_csv(const AbsorptionSpectrum& spectrum, const std::string& path) {
    CsvWriter csv(path, {"detuning_hz", "optical_depth"});
    for (std::size_t i = 0; i < spectrum.grid.n_points; ++i)
        csv.write_row({spectrum.grid.point(i), spectrum.d[i]});
}

}  // namespace afc
