#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "afc/field_propagation.hpp"
#include "afc/spectral_medium.hpp"

using namespace afc;

namespace {

constexpr double kFourLn2 = 2.772588722239781;

CombParams basic_comb(ToothShape shape, double period_hz, double tooth_fwhm_hz, double d_peak) {
    CombParams p;
    p.period_hz = period_hz;
    p.tooth_fwhm_hz = tooth_fwhm_hz;
    p.shape = shape;
    p.d_peak = d_peak;
    p.envelope_fwhm_hz = 20e6;
    return p;
}

}  // namespace

TEST_CASE("gaussian pulse carries exactly the requested photon number") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FieldEnvelope pulse = gaussian_pulse(grid, 300e-9, 30e-9, 0.75, 0.4);
    CHECK(pulse.nbar() == doctest::Approx(0.75).epsilon(1e-12));

    // Peak sits at the center sample with the programmed phase.
    std::size_t peak = 0;
    for (std::size_t i = 1; i < grid.n_samples; ++i)
        if (std::norm(pulse.a[i]) > std::norm(pulse.a[peak]))
            peak = i;
    CHECK(grid.point(peak) == doctest::Approx(300e-9).epsilon(1e-12));
    CHECK(std::arg(pulse.a[peak]) == doctest::Approx(0.4).epsilon(1e-9));

    // Half the peak intensity at half the FWHM off center.
    std::size_t half = peak + static_cast<std::size_t>(std::lround(15e-9 / grid.dt_s));
    double t = grid.point(half) - 300e-9;
    double expected = std::norm(pulse.a[peak]) * std::exp(-kFourLn2 * t * t / (30e-9 * 30e-9));
    CHECK(std::norm(pulse.a[half]) == doctest::Approx(expected).epsilon(1e-6));

    CHECK_THROWS_AS(gaussian_pulse(grid, 300e-9, 7e-9, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_pulse(grid, -10e-9, 30e-9, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_pulse(grid, 300e-9, 30e-9, -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("input support brackets the pulse at the documented intensity level") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FieldEnvelope pulse = gaussian_pulse(grid, 300e-9, 30e-9, 1.0, 0.0);
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    PropagationResult res = propagate(pulse, transfer_function(flat_absorption(fgrid, 0.0)));

    // Intensity crosses 1e-9 of the peak at +-fwhm * sqrt(ln(1e9) / (4 ln 2)).
    double half_support = 30e-9 * std::sqrt(std::log(1e9) / kFourLn2);
    CHECK(res.input_support_begin_s == doctest::Approx(300e-9 - half_support).epsilon(0.03));
    CHECK(res.input_support_end_s == doctest::Approx(300e-9 + half_support).epsilon(0.03));
}

TEST_CASE("flat absorption attenuates without reshaping or delaying") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    FieldEnvelope pulse = gaussian_pulse(grid, 300e-9, 30e-9, 1.0, 0.0);

    const double d0 = 3.9;
    PropagationResult res = propagate(pulse, transfer_function(flat_absorption(fgrid, d0)));
    CHECK(res.output.nbar() == doctest::Approx(std::exp(-d0)).epsilon(1e-9));
    for (std::size_t i = 0; i < grid.n_samples; ++i)
        CHECK(std::abs(res.output.a[i] - pulse.a[i] * std::exp(-0.5 * d0)) < 1e-9);
}

TEST_CASE("comb filtering revives the pulse one period-inverse later") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 1024);
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    FieldEnvelope pulse = gaussian_pulse(grid, 150e-9, 30e-9, 1.0, 0.0);

    for (double period : {4e6, 2e6}) {
        CombParams comb = basic_comb(ToothShape::gaussian, period, period / 2.0, 2.0);
        PropagationResult res = propagate(pulse, transfer_function(synthetic_comb(fgrid, comb)));
        double echo = find_echo_peak(res);
        CHECK(std::abs(echo - (150e-9 + 1.0 / period)) < 8e-9);
    }
}

TEST_CASE("dispersion phase matches the analytic single-line response") {
    // A single Lorentzian line of depth d0 and half-width a has the
    // minimum-phase response phi(nu) = -(d0/2) * a * nu / (nu^2 + a^2).
    FrequencyGrid fgrid = make_frequency_grid(128e6, 8193);
    CombParams params = basic_comb(ToothShape::lorentzian, 8e6, 1e6, 1.0);
    params.envelope_fwhm_hz = 0.0;
    params.n_teeth = 1;
    AbsorptionSpectrum line = synthetic_comb(fgrid, params);
    TransferFunction tf = transfer_function(line, true);

    const double a = 0.5e6, d0 = 1.0;
    double max_err = 0.0;
    for (std::size_t i = 0; i < fgrid.n_points; ++i) {
        double nu = fgrid.point(i);
        if (std::abs(nu) > 20e6)
            continue;  // Exclude the window edges, where periodization bites.
        double oracle = -0.5 * d0 * a * nu / (nu * nu + a * a);
        max_err = std::max(max_err, std::abs(tf.phase[i] - oracle));
    }
    CHECK(max_err < 4e-3);  // peak |phase| is d0 / 4
}

TEST_CASE("the medium response is causal; removing dispersion makes it acausal") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 1024);
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    AbsorptionSpectrum comb =
        synthetic_comb(fgrid, basic_comb(ToothShape::gaussian, 4e6, 2e6, 2.0));
    FieldEnvelope pulse = gaussian_pulse(grid, 400e-9, 30e-9, 1.0, 0.0);

    // The discrete Hilbert transform leaves a tiny pre-pulse residue; the
    // bound sits three decades under the acausal pre-echo checked below.
    PropagationResult causal = propagate(pulse, transfer_function(comb, true));
    CHECK(energy_fraction(causal, 0.0, 300e-9) < 1e-7);

    // The zero-phase filter responds before the pulse arrives (pre-echo at
    // the comb delay ahead of the input).
    PropagationResult zero_phase = propagate(pulse, transfer_function(comb, false));
    CHECK(energy_fraction(zero_phase, 100e-9, 200e-9) > 1e-4);
}

TEST_CASE("propagation is linear in the input field") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 1024);
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    TransferFunction tf =
        transfer_function(synthetic_comb(fgrid, basic_comb(ToothShape::lorentzian, 4e6, 1e6, 2.0)));

    FieldEnvelope p1 = gaussian_pulse(grid, 150e-9, 30e-9, 1.0, 0.0);
    FieldEnvelope p2 = gaussian_pulse(grid, 250e-9, 30e-9, 0.5, 1.3);
    FieldEnvelope sum = p1;
    for (std::size_t i = 0; i < grid.n_samples; ++i)
        sum.a[i] += p2.a[i];

    PropagationResult o1 = propagate(p1, tf);
    PropagationResult o2 = propagate(p2, tf);
    PropagationResult osum = propagate(sum, tf);
    // Absolute bounds: peak amplitudes are of order 1e3, so 1e-9 is ~1e-12
    // relative, i.e. bare FFT roundoff.
    for (std::size_t i = 0; i < grid.n_samples; ++i)
        CHECK(std::abs(osum.output.a[i] - (o1.output.a[i] + o2.output.a[i])) < 1e-9);

    FieldEnvelope scaled = p1;
    for (auto& v : scaled.a)
        v *= 3.0;
    PropagationResult oscaled = propagate(scaled, tf);
    for (std::size_t i = 0; i < grid.n_samples; ++i)
        CHECK(std::abs(oscaled.output.a[i] - 3.0 * o1.output.a[i]) < 1e-9);
}

TEST_CASE("filtering never creates energy") {
    // Deep square teeth ring for microseconds, and the zero-phase filter
    // rings backwards too, so give the pulse a long window on both sides or
    // the truncation guard refuses the configuration.
    TimeGrid grid = make_time_grid(0.0, 2e-9, 8192);
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    FieldEnvelope pulse = gaussian_pulse(grid, 8191e-9, 30e-9, 1.0, 0.0);

    for (ToothShape shape : {ToothShape::lorentzian, ToothShape::gaussian, ToothShape::square}) {
        for (double d_peak : {0.5, 2.0, 4.0}) {
            AbsorptionSpectrum comb =
                synthetic_comb(fgrid, basic_comb(shape, 4e6, 1.5e6, d_peak));
            for (bool dispersion : {true, false}) {
                PropagationResult res = propagate(pulse, transfer_function(comb, dispersion));
                CHECK(res.output.nbar() <= res.input_nbar * (1.0 + 1e-9));
            }
        }
    }
}

TEST_CASE("analysis window helpers validate their arguments") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    FieldEnvelope pulse = gaussian_pulse(grid, 150e-9, 30e-9, 1.0, 0.0);
    PropagationResult res = propagate(
        pulse, transfer_function(synthetic_comb(fgrid, basic_comb(ToothShape::gaussian, 4e6, 2e6, 2.0))));

    CHECK_THROWS_AS(echo_efficiency(res, 180e-9, 300e-9), std::invalid_argument);  // inside support
    CHECK_THROWS_AS(energy_fraction(res, 300e-9, 200e-9), std::invalid_argument);  // empty window
    CHECK_THROWS_AS(energy_fraction(res, -100e-9, 200e-9), std::invalid_argument);
    CHECK_THROWS_AS(energy_fraction(res, 200e-9, 2e-6), std::invalid_argument);
    CHECK_NOTHROW(echo_efficiency(res, 340e-9, 460e-9));
}

TEST_CASE("a time window too short for the medium response is rejected") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 128);  // ends at 256 ns
    FrequencyGrid fgrid = make_frequency_grid(64e6, 2049);
    // The revival at 350 ns falls entirely beyond the window.
    AbsorptionSpectrum comb =
        synthetic_comb(fgrid, basic_comb(ToothShape::lorentzian, 4e6, 1e6, 3.0));
    FieldEnvelope pulse = gaussian_pulse(grid, 100e-9, 20e-9, 1.0, 0.0);
    CHECK_THROWS_WITH_AS(propagate(pulse, transfer_function(comb)),
                         doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("nyquist guard rejects a time step too coarse for the spectral grid") {
    TimeGrid grid = make_time_grid(0.0, 20e-9, 128);  // 25 MHz Nyquist
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    FieldEnvelope pulse = gaussian_pulse(grid, 500e-9, 100e-9, 1.0, 0.0);
    CHECK_THROWS_AS(propagate(pulse, transfer_function(flat_absorption(fgrid, 1.0))),
                    std::invalid_argument);
}

TEST_CASE("atom ensemble reproduces the filter in the weak-absorption limit") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FrequencyGrid fgrid = make_frequency_grid(64e6, 16385);
    CombParams params = basic_comb(ToothShape::gaussian, 4e6, 0.5e6, 0.08);
    AbsorptionSpectrum comb = synthetic_comb(fgrid, params);
    FieldEnvelope pulse = gaussian_pulse(grid, 150e-9, 30e-9, 1.0, 0.0);

    PropagationResult filter = propagate(pulse, transfer_function(comb, true));
    AtomEnsemble ensemble = sample_ensemble(comb, 0, SamplingMode::grid, 0);
    PropagationResult atoms = atom_sum_echo(ensemble, pulse, integrated_depth(comb));

    double eff_filter = echo_efficiency(filter, 340e-9, 460e-9);
    double eff_atoms = echo_efficiency(atoms, 340e-9, 460e-9);
    CHECK(eff_atoms == doctest::Approx(eff_filter).epsilon(0.02));
    CHECK(std::abs(find_echo_peak(atoms) - find_echo_peak(filter)) <= grid.dt_s);
}

TEST_CASE("atom sampling validates its inputs and refuses strong absorption") {
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    AbsorptionSpectrum comb =
        synthetic_comb(fgrid, basic_comb(ToothShape::gaussian, 4e6, 1e6, 2.0));
    AbsorptionSpectrum zero = flat_absorption(fgrid, 0.0);

    CHECK_THROWS_AS(sample_ensemble(zero, 100, SamplingMode::stochastic, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(sample_ensemble(comb, 0, SamplingMode::stochastic, 1), std::invalid_argument);
    CHECK_THROWS_AS(sample_ensemble(comb, 17, SamplingMode::grid, 1), std::invalid_argument);

    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FieldEnvelope pulse = gaussian_pulse(grid, 150e-9, 30e-9, 1.0, 0.0);
    AtomEnsemble ensemble = sample_ensemble(comb, 0, SamplingMode::grid, 0);
    // Full optical depth 2 scatters far more than the perturbative budget.
    CHECK_THROWS_AS(atom_sum_echo(ensemble, pulse, integrated_depth(comb)), std::runtime_error);
}

TEST_CASE("stochastic atom sampling is seeded and follows the depth profile") {
    FrequencyGrid fgrid = make_frequency_grid(64e6, 1025);
    AbsorptionSpectrum comb =
        synthetic_comb(fgrid, basic_comb(ToothShape::gaussian, 4e6, 1e6, 1.0));

    AtomEnsemble e1 = sample_ensemble(comb, 50000, SamplingMode::stochastic, 99);
    AtomEnsemble e2 = sample_ensemble(comb, 50000, SamplingMode::stochastic, 99);
    CHECK(e1.detuning_hz == e2.detuning_hz);
    AtomEnsemble e3 = sample_ensemble(comb, 50000, SamplingMode::stochastic, 100);
    CHECK(e1.detuning_hz != e3.detuning_hz);

    // Atoms inside the central tooth versus one dark inter-tooth band.
    auto count_in = [&](double lo, double hi) {
        std::size_t n = 0;
        for (double nu : e1.detuning_hz)
            if (nu >= lo && nu < hi)
                ++n;
        return n;
    };
    CHECK(count_in(-0.5e6, 0.5e6) > 50 * count_in(1.5e6, 2.5e6));
}
