#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "afc/field_propagation.hpp"
#include "afc/photon_detection.hpp"
#include "afc/rng.hpp"

using namespace afc;

namespace {

TrialPlan small_plan(std::size_t sequences) {
    TrialPlan plan;
    plan.n_trials = 400;
    plan.trial_rate_hz = 200e3;
    plan.sequence_rate_hz = 40.0;
    plan.n_sequences = sequences;
    return plan;
}

}  // namespace

TEST_CASE("poisson sampler reproduces mean, variance and low-order masses") {
    RandomStream rng(2024);
    const double mean = 2.0;
    const std::size_t n = 200000;
    std::vector<std::size_t> freq(12, 0);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t k = rng.poisson(mean);
        sum += static_cast<double>(k);
        sum2 += static_cast<double>(k) * static_cast<double>(k);
        if (k < freq.size())
            ++freq[k];
    }
    double m = sum / n;
    double var = sum2 / n - m * m;
    CHECK(std::abs(m - mean) < 5.0 * std::sqrt(mean / n));
    CHECK(std::abs(var - mean) < 5.0 * std::sqrt(2.0 * mean * mean / n));

    // Each probability mass within 5 sigma of the binomial expectation.
    double pmf = std::exp(-mean);
    for (std::size_t k = 0; k < 10; ++k) {
        double expect = pmf * n;
        CHECK(std::abs(static_cast<double>(freq[k]) - expect) <
              5.0 * std::sqrt(expect * (1.0 - pmf)) + 1.0);
        pmf *= mean / static_cast<double>(k + 1);
    }

    CHECK(rng.poisson(0.0) == 0);
    // Chunked sampling stays accurate for large means.
    RandomStream rng2(5);
    double big = 0.0;
    for (int i = 0; i < 400; ++i)
        big += static_cast<double>(rng2.poisson(1e4));
    CHECK(std::abs(big / 400.0 - 1e4) < 5.0 * std::sqrt(1e4 / 400.0));
}

TEST_CASE("detected counts follow the quantum efficiency and trial count") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FieldEnvelope pulse = gaussian_pulse(grid, 300e-9, 30e-9, 0.5, 0.0);
    DetectorModel det;
    det.dark_rate_hz = 0.0;
    TrialPlan plan = small_plan(250);  // 1e5 trials

    ArrivalHistogram hist = detect(pulse, det, plan, 42);
    double expected = det.eta_d * det.eta_t * 0.5 * static_cast<double>(plan.total_trials());
    double total = static_cast<double>(hist.total_counts());
    CHECK(std::abs(total - expected) < 5.0 * std::sqrt(expected));

    // Counts concentrate where the pulse is.
    double in_window = static_cast<double>(window_counts(hist, 250e-9, 350e-9));
    CHECK(in_window / total > 0.999);
}

TEST_CASE("dark counts fill the histogram uniformly when no field arrives") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FieldEnvelope empty{grid, std::vector<std::complex<double>>(grid.n_samples, 0.0)};
    DetectorModel det;
    det.dark_rate_hz = 1000.0;
    TrialPlan plan = small_plan(250);

    ArrivalHistogram hist = detect(empty, det, plan, 7);
    double duration = static_cast<double>(grid.n_samples) * grid.dt_s;
    double expected = det.dark_rate_hz * duration * static_cast<double>(plan.total_trials());
    CHECK(std::abs(static_cast<double>(hist.total_counts()) - expected) <
          5.0 * std::sqrt(expected));

    // First and second half of the record collect comparable counts.
    std::uint64_t first = window_counts(hist, 0.0, 512e-9);
    std::uint64_t second = hist.total_counts() - first;
    CHECK(std::abs(static_cast<double>(first) - static_cast<double>(second)) <
          5.0 * std::sqrt(static_cast<double>(hist.total_counts())));
}

TEST_CASE("detection is deterministic in the seed") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FieldEnvelope pulse = gaussian_pulse(grid, 300e-9, 30e-9, 0.5, 0.0);
    DetectorModel det;
    TrialPlan plan = small_plan(10);

    ArrivalHistogram a = detect(pulse, det, plan, 1234);
    ArrivalHistogram b = detect(pulse, det, plan, 1234);
    CHECK(a.counts == b.counts);
    ArrivalHistogram c = detect(pulse, det, plan, 1235);
    CHECK(a.counts != c.counts);
}

TEST_CASE("per-trial signal scaling reweights the detected signal") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FieldEnvelope pulse = gaussian_pulse(grid, 300e-9, 30e-9, 0.5, 0.0);
    DetectorModel det;
    det.dark_rate_hz = 0.0;
    TrialPlan plan = small_plan(100);

    ArrivalHistogram off = detect(pulse, det, plan, 3, [](std::size_t) { return 0.0; });
    CHECK(off.total_counts() == 0);

    ArrivalHistogram doubled = detect(pulse, det, plan, 3, [](std::size_t) { return 2.0; });
    double expected = 2.0 * det.eta_d * det.eta_t * 0.5 * static_cast<double>(plan.total_trials());
    CHECK(std::abs(static_cast<double>(doubled.total_counts()) - expected) <
          5.0 * std::sqrt(expected));

    CHECK_THROWS_AS(detect(pulse, det, plan, 3, [](std::size_t) { return -1.0; }),
                    std::invalid_argument);
}

TEST_CASE("dead time suppresses the observed rate nonparalyzably") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FieldEnvelope pulse = gaussian_pulse(grid, 300e-9, 120e-9, 200.0, 0.0);
    DetectorModel det;
    det.dark_rate_hz = 0.0;
    det.dead_time_s = 50e-9;
    TrialPlan plan = small_plan(50);

    ArrivalHistogram throttled = detect(pulse, det, plan, 11);
    det.dead_time_s = 0.0;
    ArrivalHistogram free_running = detect(pulse, det, plan, 11);

    // Expected suppression in the peak bin: m -> m / (1 + r * dead_time).
    std::size_t peak = 0;
    for (std::size_t b = 0; b < free_running.counts.size(); ++b)
        if (free_running.counts[b] > free_running.counts[peak])
            peak = b;
    double m_free = static_cast<double>(free_running.counts[peak]);
    double rate = m_free / static_cast<double>(plan.total_trials()) / det.bin_width_s;
    double predicted = m_free / (1.0 + rate * 50e-9);
    CHECK(static_cast<double>(throttled.counts[peak]) ==
          doctest::Approx(predicted).epsilon(0.1));
    CHECK(throttled.counts[peak] < free_running.counts[peak]);
}

TEST_CASE("input calibration inverts the detection chain") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 512);
    FieldEnvelope pulse = gaussian_pulse(grid, 300e-9, 30e-9, 0.5, 0.0);
    DetectorModel det;
    TrialPlan plan = small_plan(250);  // 1e5 trials

    ArrivalHistogram hist = detect(pulse, det, plan, 21);
    CalibrationResult cal = calibrate_nbar(hist, det);
    CHECK(std::abs(cal.nbar - 0.5) < 3.0 * cal.standard_error);
    CHECK(!cal.clamped);
    CHECK(cal.standard_error < 0.02);

    // All-zero histogram with a nonzero dark expectation clamps at zero.
    ArrivalHistogram zeros{0.0, 10e-9, std::vector<std::uint64_t>(51, 0), 1000};
    CalibrationResult clamped = calibrate_nbar(zeros, det);
    CHECK(clamped.nbar == 0.0);
    CHECK(clamped.clamped);
}

TEST_CASE("window counts select bins by center, inclusive start exclusive end") {
    ArrivalHistogram hist{0.0, 10e-9, {1, 2, 4, 8, 16}, 100};
    // Bin centers at 5, 15, 25, 35, 45 ns.
    CHECK(window_counts(hist, 0.0, 50e-9) == 31);
    CHECK(window_counts(hist, 5e-9, 45e-9) == 15);   // [5, 45) keeps bins 0..3
    CHECK(window_counts(hist, 10e-9, 30e-9) == 6);   // centers 15 and 25
    CHECK(window_counts(hist, 46e-9, 60e-9) == 0);

    DetectorModel det;
    det.dark_rate_hz = 1e6;  // 1 expected dark count per bin: 10 ns * 100 trials
    CHECK(window_counts_corrected(hist, det, 10e-9, 30e-9) == doctest::Approx(4.0));
    // Dark subtraction may drive quiet windows negative.
    CHECK(window_counts_corrected(hist, det, 0.0, 20e-9) == doctest::Approx(1.0));
    ArrivalHistogram quiet{0.0, 10e-9, {0, 0}, 100};
    CHECK(window_counts_corrected(quiet, det, 0.0, 20e-9) == doctest::Approx(-2.0));
}

TEST_CASE("detector and plan validation reject unphysical settings") {
    DetectorModel det;
    det.eta_d = 0.0;
    CHECK_THROWS_AS(det.validate(), std::invalid_argument);
    det = DetectorModel{};
    det.eta_t = 1.5;
    CHECK_THROWS_AS(det.validate(), std::invalid_argument);
    det = DetectorModel{};
    det.dark_rate_hz = -1.0;
    CHECK_THROWS_AS(det.validate(), std::invalid_argument);
    det = DetectorModel{};
    det.bin_width_s = 0.0;
    CHECK_THROWS_AS(det.validate(), std::invalid_argument);

    TrialPlan plan;
    plan.n_trials = 0;
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
    plan = TrialPlan{};
    plan.trial_rate_hz = 10e3;  // 400 trials at 10 kHz exceed the 25 ms sequence period
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
    plan = TrialPlan{};
    CHECK_NOTHROW(plan.validate());
    CHECK(plan.total_trials() == 400);
}

TEST_CASE("histogram artifacts carry the acquisition metadata") {
    TimeGrid grid = make_time_grid(0.0, 2e-9, 256);
    FieldEnvelope pulse = gaussian_pulse(grid, 200e-9, 30e-9, 0.5, 0.0);
    DetectorModel det;
    TrialPlan plan = small_plan(5);
    ArrivalHistogram hist = detect(pulse, det, plan, 77);

    CHECK(hist.t_start_s == 0.0);
    CHECK(hist.bin_width_s == det.bin_width_s);
    CHECK(hist.counts.size() == 51);  // 512 ns of record at 10 ns per bin
    CHECK(hist.n_total_trials == plan.total_trials());
    CHECK(hist.bin_center(0) == doctest::Approx(5e-9));
}
