#include "afc/photon_detection.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "afc/rng.hpp"
#include "afc/text_io.hpp"

namespace afc {

void DetectorModel::validate() const {
    if (!(eta_d > 0.0 && eta_d <= 1.0) || !(eta_t > 0.0 && eta_t <= 1.0))
        throw std::invalid_argument("photon_detection: efficiencies must lie in (0, 1]");
    if (dark_rate_hz < 0.0)
        throw std::invalid_argument("photon_detection: dark rate cannot be negative");
    if (!(bin_width_s > 0.0))
        throw std::invalid_argument("photon_detection: bin width must be positive");
    if (dead_time_s < 0.0)
        throw std::invalid_argument("photon_detection: dead time cannot be negative");
}

void TrialPlan::validate() const {
    if (n_trials == 0 || n_sequences == 0)
        throw std::invalid_argument("photon_detection: trial counts must be positive");
    if (!(trial_rate_hz > 0.0) || !(sequence_rate_hz > 0.0))
        throw std::invalid_argument("photon_detection: rates must be positive");
    if (static_cast<double>(n_trials) / trial_rate_hz >= 1.0 / sequence_rate_hz)
        throw std::invalid_argument(
            "photon_detection: a sequence of trials must fit within the sequence period");
}

std::uint64_t ArrivalHistogram::total_counts() const {
    std::uint64_t s = 0;
    for (auto c : counts)
        s += c;
    return s;
}

ArrivalHistogram detect(const FieldEnvelope& output, const DetectorModel& detector,
                        const TrialPlan& plan, std::uint64_t seed,
                        const std::function<double(std::size_t)>& signal_scale) {
    detector.validate();
    plan.validate();
    const TimeGrid& grid = output.grid;
    double duration = static_cast<double>(grid.n_samples) * grid.dt_s;
    std::size_t n_bins = static_cast<std::size_t>(duration / detector.bin_width_s);
    if (n_bins == 0)
        throw std::invalid_argument("photon_detection: field shorter than one detection bin");

    // Binned signal energy of a single trial.
    std::vector<double> signal(n_bins, 0.0);
    for (std::size_t i = 0; i < grid.n_samples; ++i) {
        double t = grid.point(i) - grid.t0_s;
        std::size_t b = static_cast<std::size_t>(t / detector.bin_width_s);
        if (b < n_bins)
            signal[b] += std::norm(output.a[i]) * grid.dt_s;
    }

    // Summed signal weight over all trials (sequence pattern repeats).
    double weight = 0.0;
    for (std::size_t j = 0; j < plan.n_trials; ++j) {
        double w = signal_scale ? signal_scale(j) : 1.0;
        if (w < 0.0)
            throw std::invalid_argument("photon_detection: signal scale cannot be negative");
        weight += w;
    }
    weight *= static_cast<double>(plan.n_sequences);
    const double total_trials = static_cast<double>(plan.total_trials());
    const double eta = detector.eta_d * detector.eta_t;

    ArrivalHistogram hist{grid.t0_s, detector.bin_width_s, std::vector<std::uint64_t>(n_bins, 0),
                          plan.total_trials()};
    RandomStream rng(seed);
    for (std::size_t b = 0; b < n_bins; ++b) {
        double mean_per_trial = eta * signal[b];
        double mean = mean_per_trial * weight +
                      detector.dark_rate_hz * detector.bin_width_s * total_trials;
        if (detector.dead_time_s > 0.0 && mean > 0.0) {
            double rate = mean / total_trials / detector.bin_width_s;
            mean /= 1.0 + rate * detector.dead_time_s;
        }
        hist.counts[b] = rng.poisson(mean);
    }
    return hist;
}

CalibrationResult calibrate_nbar(const ArrivalHistogram& histogram,
                                 const DetectorModel& detector) {
    detector.validate();
    if (histogram.n_total_trials == 0)
        throw std::invalid_argument("photon_detection: histogram carries no trials");
    const double trials = static_cast<double>(histogram.n_total_trials);
    const double window = static_cast<double>(histogram.counts.size()) * histogram.bin_width_s;
    const double expected_dark = detector.dark_rate_hz * window * trials;
    const double eta = detector.eta_d * detector.eta_t;
    double total = static_cast<double>(histogram.total_counts());

    CalibrationResult res;
    res.nbar = (total - expected_dark) / (trials * eta);
    res.standard_error = std::sqrt(total > 0.0 ? total : expected_dark) / (trials * eta);
    if (res.nbar < 0.0) {
        res.nbar = 0.0;
        res.clamped = true;
    }
    return res;
}

std::vector<double> subtract_dark(const ArrivalHistogram& histogram,
                                  const DetectorModel& detector) {
    detector.validate();
    const double dark_per_bin = detector.dark_rate_hz * histogram.bin_width_s *
                                static_cast<double>(histogram.n_total_trials);
    std::vector<double> corrected(histogram.counts.size());
    for (std::size_t i = 0; i < histogram.counts.size(); ++i)
        corrected[i] = static_cast<double>(histogram.counts[i]) - dark_per_bin;
    return corrected;
}

std::uint64_t window_counts(const ArrivalHistogram& histogram, double start_s, double end_s) {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
        double c = histogram.bin_center(i);
        if (c >= start_s && c < end_s)
            s += histogram.counts[i];
    }
    return s;
}

double window_counts_corrected(const ArrivalHistogram& histogram, const DetectorModel& detector,
                               double start_s, double end_s) {
    std::vector<double> corrected = subtract_dark(histogram, detector);
    double s = 0.0;
    for (std::size_t i = 0; i < corrected.size(); ++i) {
        double c = histogram.bin_center(i);
        if (c >= start_s && c < end_s)
            s += corrected[i];
    }
    return s;
}

void write_histogram_csv(const ArrivalHistogram& histogram, const std::string& path) {
    CsvWriter csv(path, {"bin_start_s", "bin_end_s", "counts"});
    for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
        double start = histogram.t_start_s + static_cast<double>(i) * histogram.bin_width_s;
        csv.write_row_raw({format_double(start), format_double(start + histogram.bin_width_s),
                           std::to_string(histogram.counts[i])});
    }
}

void write_histogram_sidecar(const ArrivalHistogram& histogram, const DetectorModel& detector,
                             const TrialPlan& plan, std::uint64_t seed, const std::string& path) {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["plan"] = {{"n_trials", plan.n_trials},
                 {"trial_rate_hz", plan.trial_rate_hz},
                 {"sequence_rate_hz", plan.sequence_rate_hz},
                 {"n_sequences", plan.n_sequences}};
    j["detector"] = {{"eta_d", detector.eta_d},
                     {"eta_t", detector.eta_t},
                     {"dark_rate_hz", detector.dark_rate_hz},
                     {"bin_width_s", detector.bin_width_s},
                     {"dead_time_s", detector.dead_time_s}};
    j["histogram"] = {{"t_start_s", histogram.t_start_s},
                      {"bin_width_s", histogram.bin_width_s},
                      {"n_bins", histogram.counts.size()},
                      {"n_total_trials", histogram.n_total_trials}};
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("photon_detection: cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

}  // namespace afc
