#include "afc/field_propagation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "afc/fft.hpp"
#include "afc/rng.hpp"
#include "afc/text_io.hpp"

namespace afc {

namespace {

constexpr double kFourLn2 = 2.772588722239781;
// Intensity threshold (relative to peak) defining the input pulse support.
constexpr double kSupportLevel = 1e-9;
// Fraction of output energy allowed to fall beyond the time window.
constexpr double kTruncationBudget = 5e-3;

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n)
        p <<= 1;
    return p;
}

}  // namespace

TimeGrid make_time_grid(double t0_s, double dt_s, std::size_t n_samples) {
    if (!(dt_s > 0.0))
        throw std::invalid_argument("field_propagation: time step must be positive");
    if (n_samples < 2)
        throw std::invalid_argument("field_propagation: time grid needs at least 2 samples");
    return TimeGrid{t0_s, dt_s, n_samples};
}

double FieldEnvelope::nbar() const {
    double s = 0.0;
    for (const auto& v : a)
        s += std::norm(v);
    return s * grid.dt_s;
}

FieldEnvelope gaussian_pulse(const TimeGrid& grid, double center_s, double fwhm_s, double nbar,
                             double phase_rad) {
    FieldEnvelope field{grid, std::vector<std::complex<double>>(grid.n_samples, 0.0)};
    add_gaussian_pulse(field, center_s, fwhm_s, nbar, phase_rad);
    return field;
}

void add_gaussian_pulse(FieldEnvelope& field, double center_s, double fwhm_s, double nbar,
                        double phase_rad) {
    const TimeGrid& grid = field.grid;
    if (grid.n_samples < 2)
        throw std::invalid_argument("field_propagation: empty time grid");
    if (!(fwhm_s >= 4.0 * grid.dt_s))
        throw std::invalid_argument("field_propagation: pulse FWHM must be at least 4 time steps");
    if (nbar < 0.0)
        throw std::invalid_argument("field_propagation: photon number cannot be negative");
    if (center_s < grid.t0_s || center_s > grid.end())
        throw std::invalid_argument("field_propagation: pulse center outside the time window");
    if (nbar == 0.0)
        return;
    // Peak intensity nbar * (2/fwhm) * sqrt(ln2/pi); discretization is then
    // scaled out so the sampled photon number is exactly nbar.
    const double peak = nbar * (2.0 / fwhm_s) * std::sqrt(std::numbers::ln2 / std::numbers::pi);
    std::vector<double> amp(grid.n_samples);
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.n_samples; ++i) {
        double t = grid.point(i) - center_s;
        double intensity = peak * std::exp(-kFourLn2 * t * t / (fwhm_s * fwhm_s));
        amp[i] = std::sqrt(intensity);
        sum += intensity;
    }
    double scale = std::sqrt(nbar / (sum * grid.dt_s));
    std::complex<double> ph = std::polar(scale, phase_rad);
    for (std::size_t i = 0; i < grid.n_samples; ++i)
        field.a[i] += amp[i] * ph;
}

TransferFunction transfer_function(const AbsorptionSpectrum& spectrum, bool include_dispersion) {
    if (spectrum.d.size() != spectrum.grid.n_points || spectrum.grid.n_points < 4)
        throw std::invalid_argument("field_propagation: malformed absorption spectrum");
    TransferFunction tf;
    tf.grid = spectrum.grid;
    tf.log_magnitude.resize(spectrum.d.size());
    for (std::size_t i = 0; i < spectrum.d.size(); ++i) {
        if (spectrum.d[i] < 0.0)
            throw std::invalid_argument("field_propagation: negative optical depth");
        tf.log_magnitude[i] = -0.5 * spectrum.d[i];
    }
    if (include_dispersion)
        tf.phase = hilbert_transform(tf.log_magnitude);
    else
        tf.phase.assign(spectrum.d.size(), 0.0);
    return tf;
}

namespace {

// Linear interpolation of (log-magnitude, phase) at frequency f, clamped to
// the edge values outside the spectral grid.  Linear interpolation of the
// log-magnitude keeps |H| <= 1 wherever the grid satisfies it.
std::pair<double, double> interp_response(const TransferFunction& tf, double f) {
    const double n_minus_1 = static_cast<double>(tf.grid.n_points - 1);
    double pos = (f + 0.5 * tf.grid.span_hz) / tf.grid.spacing();
    pos = std::clamp(pos, 0.0, n_minus_1);
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo >= tf.grid.n_points - 1)
        return {tf.log_magnitude.back(), tf.phase.back()};
    double frac = pos - static_cast<double>(lo);
    return {tf.log_magnitude[lo] + frac * (tf.log_magnitude[lo + 1] - tf.log_magnitude[lo]),
            tf.phase[lo] + frac * (tf.phase[lo + 1] - tf.phase[lo])};
}

PropagationResult make_result(const FieldEnvelope& input, FieldEnvelope output) {
    PropagationResult res{std::move(output), input.nbar(), input.grid.t0_s, input.grid.t0_s};
    double peak = 0.0;
    for (const auto& v : input.a)
        peak = std::max(peak, std::norm(v));
    if (peak > 0.0) {
        std::size_t first = 0, last = 0;
        bool found = false;
        for (std::size_t i = 0; i < input.a.size(); ++i) {
            if (std::norm(input.a[i]) >= kSupportLevel * peak) {
                if (!found)
                    first = i;
                last = i;
                found = true;
            }
        }
        res.input_support_begin_s = input.grid.point(first);
        res.input_support_end_s = input.grid.point(last);
    }
    return res;
}

}  // namespace

PropagationResult propagate(const FieldEnvelope& input, const TransferFunction& tf) {
    const TimeGrid& grid = input.grid;
    if (input.a.size() != grid.n_samples || grid.n_samples < 2)
        throw std::invalid_argument("field_propagation: malformed input field");
    if (0.5 / grid.dt_s < 0.5 * tf.grid.span_hz * (1.0 - 1e-12))
        throw std::invalid_argument(
            "field_propagation: time step too coarse for the spectral grid (Nyquist)");

    const std::size_t n = grid.n_samples;
    const std::size_t n_pad = next_pow2(2 * n);
    std::vector<std::complex<double>> buf(n_pad, 0.0);
    std::copy(input.a.begin(), input.a.end(), buf.begin());

    fft_in_place(buf, 1);  // time -> spectrum
    const double df = 1.0 / (static_cast<double>(n_pad) * grid.dt_s);
    for (std::size_t j = 0; j < n_pad; ++j) {
        double f = (2 * j <= n_pad ? static_cast<double>(j)
                                   : static_cast<double>(j) - static_cast<double>(n_pad)) *
                   df;
        auto [logm, ph] = interp_response(tf, f);
        buf[j] *= std::exp(std::complex<double>(logm, ph));
    }
    fft_in_place(buf, -1);  // spectrum -> time
    const double inv_n = 1.0 / static_cast<double>(n_pad);
    for (auto& v : buf)
        v *= inv_n;

    FieldEnvelope output{grid, std::vector<std::complex<double>>(buf.begin(), buf.begin() + n)};
    double kept = output.nbar();
    double lost = 0.0;
    for (std::size_t i = n; i < n_pad; ++i)
        lost += std::norm(buf[i]);
    lost *= grid.dt_s;

    double total = kept + lost;
    double nbar_in = input.nbar();
    if (total > 0.0 && lost > kTruncationBudget * total)
        throw std::runtime_error(
            "field_propagation: time window too short, medium response truncated");
    if (total > nbar_in * (1.0 + 1e-9))
        throw std::runtime_error("field_propagation: passivity violated (numerical)");

    return make_result(input, std::move(output));
}

namespace {

double window_energy(const FieldEnvelope& field, double start_s, double end_s) {
    double e = 0.0;
    for (std::size_t i = 0; i < field.grid.n_samples; ++i) {
        double t = field.grid.point(i);
        if (t >= start_s && t <= end_s)
            e += std::norm(field.a[i]);
    }
    return e * field.grid.dt_s;
}

void check_window(const TimeGrid& grid, double start_s, double end_s) {
    if (!(start_s < end_s))
        throw std::invalid_argument("field_propagation: empty analysis window");
    if (start_s < grid.t0_s - 0.5 * grid.dt_s || end_s > grid.end() + 0.5 * grid.dt_s)
        throw std::invalid_argument("field_propagation: analysis window outside the time grid");
}

}  // namespace

double energy_fraction(const PropagationResult& result, double window_start_s,
                       double window_end_s) {
    check_window(result.output.grid, window_start_s, window_end_s);
    if (!(result.input_nbar > 0.0))
        throw std::invalid_argument("field_propagation: zero input photon number");
    return window_energy(result.output, window_start_s, window_end_s) / result.input_nbar;
}

double echo_efficiency(const PropagationResult& result, double window_start_s,
                       double window_end_s) {
    if (window_start_s < result.input_support_end_s)
        throw std::invalid_argument(
            "field_propagation: echo window overlaps the input pulse support");
    return energy_fraction(result, window_start_s, window_end_s);
}

double find_echo_peak(const PropagationResult& result) {
    const FieldEnvelope& f = result.output;
    double best = -1.0, best_t = 0.0;
    for (std::size_t i = 0; i < f.grid.n_samples; ++i) {
        double t = f.grid.point(i);
        if (t <= result.input_support_end_s)
            continue;
        double v = std::norm(f.a[i]);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    if (best <= 0.0)
        throw std::runtime_error("field_propagation: no signal after the input pulse");
    return best_t;
}

double find_peak_in_window(const FieldEnvelope& field, double window_start_s,
                           double window_end_s) {
    check_window(field.grid, window_start_s, window_end_s);
    double best = -1.0, best_t = window_start_s;
    for (std::size_t i = 0; i < field.grid.n_samples; ++i) {
        double t = field.grid.point(i);
        if (t < window_start_s || t > window_end_s)
            continue;
        double v = std::norm(field.a[i]);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    return best_t;
}

void write_field_csv(const FieldEnvelope& field, const std::string& path) {
    CsvWriter csv(path, {"time_s", "re", "im", "intensity"});
    for (std::size_t i = 0; i < field.grid.n_samples; ++i)
        csv.write_row({field.grid.point(i), field.a[i].real(), field.a[i].imag(),
                       std::norm(field.a[i])});
}

AtomEnsemble sample_ensemble(const AbsorptionSpectrum& spectrum, std::size_t n_atoms,
                             SamplingMode mode, std::uint64_t seed) {
    double total = 0.0;
    for (double v : spectrum.d)
        total += v;
    if (!(total > 0.0))
        throw std::invalid_argument("field_propagation: cannot sample atoms from a zero spectrum");

    AtomEnsemble ens;
    if (mode == SamplingMode::grid) {
        if (n_atoms != 0 && n_atoms != spectrum.grid.n_points)
            throw std::invalid_argument(
                "field_propagation: grid sampling uses one atom per grid point");
        ens.detuning_hz.resize(spectrum.grid.n_points);
        ens.weight = spectrum.d;
        for (std::size_t i = 0; i < spectrum.grid.n_points; ++i)
            ens.detuning_hz[i] = spectrum.grid.point(i);
        return ens;
    }

    if (n_atoms == 0)
        throw std::invalid_argument("field_propagation: stochastic sampling needs n_atoms > 0");
    std::vector<double> cdf(spectrum.d.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < spectrum.d.size(); ++i) {
        acc += spectrum.d[i];
        cdf[i] = acc / total;
    }
    RandomStream rng(seed);
    ens.detuning_hz.resize(n_atoms);
    ens.weight.assign(n_atoms, 1.0);
    const double dnu = spectrum.grid.spacing();
    for (std::size_t k = 0; k < n_atoms; ++k) {
        double u = rng.uniform();
        std::size_t i = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        if (i >= cdf.size())
            i = cdf.size() - 1;
        // Uniform jitter inside the grid cell keeps the density piecewise flat.
        ens.detuning_hz[k] = spectrum.grid.point(i) + (rng.uniform() - 0.5) * dnu;
    }
    return ens;
}

PropagationResult atom_sum_echo(const AtomEnsemble& ensemble, const FieldEnvelope& input,
                                double coupling) {
    if (ensemble.detuning_hz.size() != ensemble.weight.size() || ensemble.detuning_hz.empty())
        throw std::invalid_argument("field_propagation: malformed atom ensemble");
    if (!(coupling >= 0.0))
        throw std::invalid_argument("field_propagation: coupling cannot be negative");
    double wsum = 0.0;
    for (double w : ensemble.weight) {
        if (w < 0.0)
            throw std::invalid_argument("field_propagation: atom weights cannot be negative");
        wsum += w;
    }
    if (!(wsum > 0.0))
        throw std::invalid_argument("field_propagation: atom ensemble has zero total weight");

    const TimeGrid& grid = input.grid;
    const std::size_t n = grid.n_samples;
    const double dt = grid.dt_s;
    std::vector<std::complex<double>> scat(n, 0.0);

    // Retarded response: each atom integrates the field with phase
    // exp(+2 pi i delta t') and re-emits with exp(-2 pi i delta t).
    for (std::size_t k = 0; k < ensemble.detuning_hz.size(); ++k) {
        double w = ensemble.weight[k] / wsum;
        if (w == 0.0)
            continue;
        const double delta = ensemble.detuning_hz[k];
        const std::complex<double> step =
            std::polar(1.0, 2.0 * std::numbers::pi * delta * dt);
        std::complex<double> rot = std::polar(1.0, 2.0 * std::numbers::pi * delta * grid.t0_s);
        std::complex<double> s = 0.0;
        const double cw = coupling * w;
        for (std::size_t i = 0; i < n; ++i) {
            std::complex<double> inc = input.a[i] * rot * dt;
            scat[i] -= cw * std::conj(rot) * (s + 0.5 * inc);
            s += inc;
            rot *= step;
        }
    }

    double scat_energy = 0.0;
    for (const auto& v : scat)
        scat_energy += std::norm(v);
    scat_energy *= dt;
    double nbar_in = input.nbar();
    if (scat_energy > 0.2 * nbar_in)
        throw std::runtime_error(
            "field_propagation: re-emission exceeds the weak-absorption regime; "
            "use the transfer-function model");

    FieldEnvelope output{grid, input.a};
    for (std::size_t i = 0; i < n; ++i)
        output.a[i] += scat[i];
    return make_result(input, std::move(output));
}

}  // namespace afc
