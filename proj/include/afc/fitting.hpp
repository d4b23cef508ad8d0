// fitting.hpp - least-squares estimators for the experiment analyses
#pragma once

#include <map>
#include <string>
#include <vector>

namespace afc {

struct FitResult {
    std::map<std::string, double> params;
    std::map<std::string, double> stderrs;       // 1-sigma parameter uncertainties
    std::vector<std::vector<double>> covariance; // ordered like param_names
    std::vector<std::string> param_names;
    double residual_norm = 0.0;                  // sqrt(sum of squared residuals)
    bool converged = false;
    bool non_identifiable = false;
    std::size_t excluded_points = 0;  // inputs dropped before fitting (y <= 0)
};

// y = amplitude * exp(-x / tau) on >= 3 points.  Non-positive y values (dark
// subtraction can undershoot) are excluded and counted in excluded_points.
// A constant series has no decay scale and is flagged non-identifiable.
FitResult fit_exponential(const std::vector<double>& x, const std::vector<double>& y);

// y = amplitude * exp(-x / tau) * (1 + beat_contrast * cos(2 pi beat_freq x + beat_phase)).
// Same exclusion rule as fit_exponential; needs >= 5 usable points.
FitResult fit_decay_with_beat(const std::vector<double>& x, const std::vector<double>& y);

// counts = contrast * (1 + visibility * cos(phi + phase)) on >= 4 phases
// spanning at least 3 pi / 2.  Solved as a linear trigonometric regression
// with Poisson weights (variance max(count, 1), so near-zero fringes reduce
// to the unweighted fit); visibility is reported in [0, 1].
FitResult fit_visibility(const std::vector<double>& phi, const std::vector<double>& counts);

struct LineFit {
    double slope = 0.0;
    double slope_stderr = 0.0;
    double r_squared = 0.0;
};

// Least-squares line through the origin; R^2 measured against the mean.
LineFit fit_line_through_origin(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace afc
