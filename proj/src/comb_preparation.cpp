#include "afc/comb_preparation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "afc/text_io.hpp"

namespace afc {

namespace {
constexpr double kFourLn2 = 2.772588722239781;
constexpr double kSpectralFwhmFactor = 0.44;  // time-bandwidth product of a Gaussian pulse
}  // namespace

void PulsePair::validate() const {
    if (!(area_theta_rad > 0.0) || !(area_theta_rad < std::numbers::pi / 2.0))
        throw std::invalid_argument("comb_preparation: pulse area must lie in (0, pi/2)");
    if (!(tau_s_s > 0.0))
        throw std::invalid_argument("comb_preparation: pair separation must be positive");
    if (!(pulse_fwhm_s > 0.0))
        throw std::invalid_argument("comb_preparation: pulse width must be positive");
}

void PreparationSequence::validate() const {
    if (pairs.empty())
        throw std::invalid_argument("comb_preparation: sequence needs at least one pulse pair");
    for (const auto& [pair, weight] : pairs) {
        pair.validate();
        if (weight < 0.0)
            throw std::invalid_argument("comb_preparation: pair weight cannot be negative");
    }
    if (!(pair_spacing_s > 0.0))
        throw std::invalid_argument("comb_preparation: pair spacing must be positive");
    if (wait_before_storage_s < 0.0)
        throw std::invalid_argument("comb_preparation: wait time cannot be negative");
    if (tooth_width_floor_fwhm_hz < 0.0)
        throw std::invalid_argument("comb_preparation: width floor cannot be negative");
}

double pump_probability(double delta_hz, const PulsePair& pair) {
    pair.validate();
    double sin_theta = std::sin(pair.area_theta_rad);
    double spectral_fwhm = kSpectralFwhmFactor / pair.pulse_fwhm_s;
    double envelope = std::exp(-kFourLn2 * delta_hz * delta_hz / (spectral_fwhm * spectral_fwhm));
    double fringe = std::cos(std::numbers::pi * delta_hz * pair.tau_s_s);
    return sin_theta * sin_theta * envelope * fringe * fringe;
}

namespace {

void relax_toward_equilibrium(GroundPopulations& pop, double elapsed_s, double tz_s) {
    double keep = std::exp(-elapsed_s / tz_s);
    for (std::size_t i = 0; i < pop.p_aux.size(); ++i) {
        pop.p_aux[i] = 0.5 + (pop.p_aux[i] - 0.5) * keep;
        pop.p_g[i] = 1.0 - pop.p_aux[i];
    }
}

}  // namespace

PreparationResult prepare_comb(const MaterialParams& material, const PreparationSequence& sequence,
                               const FrequencyGrid& grid) {
    material.validate();
    sequence.validate();
    if (!(sequence.pair_spacing_s > material.t2_optical_s))
        throw std::invalid_argument(
            "comb_preparation: pair spacing must exceed the optical coherence time");
    for (const auto& [pair, weight] : sequence.pairs) {
        double fringe_period = 1.0 / pair.tau_s_s;
        if (grid.spacing() > fringe_period / 8.0)
            throw std::invalid_argument(
                "comb_preparation: grid too coarse to resolve the pumping fringe");
    }

    GroundPopulations pop{grid, std::vector<double>(grid.n_points, 0.5),
                          std::vector<double>(grid.n_points, 0.5)};

    // Combined pumping probability per repetition, clamped to [0, 1].
    std::vector<double> p_eff(grid.n_points, 0.0);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        double p = 0.0;
        for (const auto& [pair, weight] : sequence.pairs)
            p += weight * pump_probability(grid.point(i), pair);
        p_eff[i] = std::clamp(p, 0.0, 1.0);
    }

    for (std::size_t rep = 0; rep < sequence.n_repetitions; ++rep) {
        if (rep > 0)
            relax_toward_equilibrium(pop, sequence.pair_spacing_s, material.tz_spin_s);
        for (std::size_t i = 0; i < grid.n_points; ++i) {
            double moved = pop.p_g[i] * p_eff[i] * material.branching_to_aux;
            pop.p_aux[i] += moved;
            pop.p_g[i] = 1.0 - pop.p_aux[i];
        }
    }
    relax_toward_equilibrium(pop, sequence.wait_before_storage_s, material.tz_spin_s);

    return PreparationResult{
        spectrum_from_populations(pop, material, sequence.tooth_width_floor_fwhm_hz), pop};
}

GroundPopulations grating_decay(const GroundPopulations& populations,
                                const MaterialParams& material, double elapsed_s) {
    material.validate();
    if (elapsed_s < 0.0)
        throw std::invalid_argument("comb_preparation: elapsed time cannot be negative");
    GroundPopulations out = populations;
    relax_toward_equilibrium(out, elapsed_s, material.tz_spin_s);
    return out;
}

AbsorptionSpectrum spectrum_from_populations(const GroundPopulations& populations,
                                             const MaterialParams& material,
                                             double floor_fwhm_hz) {
    const FrequencyGrid& grid = populations.grid;
    AbsorptionSpectrum out{grid, std::vector<double>(grid.n_points)};
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        double nu = grid.point(i);
        double line = material.d_max *
                      std::exp(-kFourLn2 * nu * nu / (material.inhom_fwhm_hz * material.inhom_fwhm_hz));
        out.d[i] = 2.0 * populations.p_g[i] * line;
    }
    if (floor_fwhm_hz > 0.0)
        out = convolve_lorentzian(out, floor_fwhm_hz);
    return out;
}

double echo_decay_multiplier(const MaterialParams& material, double elapsed_s) {
    if (elapsed_s < 0.0)
        throw std::invalid_argument("comb_preparation: elapsed time cannot be negative");
    double contrast = std::exp(-elapsed_s / material.tz_spin_s);
    return contrast * contrast;
}

void write_populations_csv(const GroundPopulations& populations, const std::string& path) {
    CsvWriter csv(path, {"detuning_hz", "p_g", "p_aux"});
    for (std::size_t i = 0; i < populations.grid.n_points; ++i)
        csv.write_row({populations.grid.point(i), populations.p_g[i], populations.p_aux[i]});
}

}  // namespace afc
