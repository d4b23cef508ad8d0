// photon_detection.hpp - single-photon counting of the output field
//
// Detection is modeled per time bin: the expected count is the binned output
// intensity scaled by the detector and transmission efficiencies plus a dark
// contribution, and observed counts are Poisson.  Counts from independent
// trials add, so the histogram is drawn from the per-bin total mean; this is
// distribution-exact and keeps runs reproducible and fast.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "afc/field_propagation.hpp"

namespace afc {

struct DetectorModel {
    double eta_d = 0.32;        // detector quantum efficiency
    double eta_t = 0.2;         // transmission from medium to detector
    double dark_rate_hz = 100.0;
    double bin_width_s = 10e-9;
    double dead_time_s = 0.0;   // non-paralyzable; first-order rate correction

    void validate() const;
};

// Trials are grouped into sequences: n_trials pulses at trial_rate inside
// one sequence, sequences repeated at sequence_rate.  A sequence must fit in
// its repetition period.
struct TrialPlan {
    std::size_t n_trials = 400;
    double trial_rate_hz = 200e3;
    double sequence_rate_hz = 40.0;
    std::size_t n_sequences = 1;

    std::size_t total_trials() const { return n_trials * n_sequences; }
    void validate() const;
};

struct ArrivalHistogram {
    double t_start_s = 0.0;
    double bin_width_s = 0.0;
    std::vector<std::uint64_t> counts;
    std::size_t n_total_trials = 0;

    double bin_center(std::size_t i) const {
        return t_start_s + (static_cast<double>(i) + 0.5) * bin_width_s;
    }
    std::uint64_t total_counts() const;
};

// Accumulates detection statistics of the given output field over the whole
// plan.  signal_scale, if set, multiplies the signal (not dark) mean of trial
// j within each sequence; use it to model grating decay across a sequence.
ArrivalHistogram detect(const FieldEnvelope& output, const DetectorModel& detector,
                        const TrialPlan& plan, std::uint64_t seed,
                        const std::function<double(std::size_t)>& signal_scale = {});

struct CalibrationResult {
    double nbar = 0.0;
    double standard_error = 0.0;
    bool clamped = false;  // true when dark subtraction drove the estimate below 0
};

// Inverts the detection model on a histogram of a directly transmitted pulse:
// nbar = (total counts - expected dark) / (trials * eta_d * eta_t).
CalibrationResult calibrate_nbar(const ArrivalHistogram& histogram,
                                 const DetectorModel& detector);

// Expected dark counts removed per bin; values may be negative.
std::vector<double> subtract_dark(const ArrivalHistogram& histogram,
                                  const DetectorModel& detector);

// Sum of counts over bins whose centers lie in [start, end).
std::uint64_t window_counts(const ArrivalHistogram& histogram, double start_s, double end_s);

// Same window sum on dark-subtracted values.
double window_counts_corrected(const ArrivalHistogram& histogram, const DetectorModel& detector,
                               double start_s, double end_s);

// Three-column CSV: bin_start_s, bin_end_s, counts.
void write_histogram_csv(const ArrivalHistogram& histogram, const std::string& path);

// JSON sidecar describing how the histogram was taken.
void write_histogram_sidecar(const ArrivalHistogram& histogram, const DetectorModel& detector,
                             const TrialPlan& plan, std::uint64_t seed, const std::string& path);

}  // namespace afc
