#include "afc/fitting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace afc {

namespace {

using Model = std::function<double(double x, const std::vector<double>& p)>;

struct LmOutcome {
    std::vector<double> p;
    Eigen::MatrixXd covariance;
    double residual_norm = 0.0;
    bool converged = false;
};

double rss(const Model& model, const std::vector<double>& x, const std::vector<double>& y,
           const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - model(x[i], p);
        s += r * r;
    }
    return s;
}

// Levenberg-Marquardt with a central-difference Jacobian; adequate for the
// small smooth models used here.
LmOutcome levenberg_marquardt(const Model& model, const std::vector<double>& x,
                              const std::vector<double>& y, std::vector<double> p) {
    const std::size_t n = x.size(), k = p.size();
    if (n < k)
        throw std::invalid_argument("fitting: fewer points than parameters");

    auto jacobian = [&](const std::vector<double>& q) {
        Eigen::MatrixXd J(n, k);
        std::vector<double> lo = q, hi = q;
        for (std::size_t j = 0; j < k; ++j) {
            double h = std::max(1e-7 * std::abs(q[j]), 1e-12);
            hi[j] = q[j] + h;
            lo[j] = q[j] - h;
            for (std::size_t i = 0; i < n; ++i)
                J(i, j) = (model(x[i], hi) - model(x[i], lo)) / (2.0 * h);
            hi[j] = q[j];
            lo[j] = q[j];
        }
        return J;
    };

    double lambda = 1e-3;
    double cost = rss(model, x, y, p);
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
        Eigen::MatrixXd J = jacobian(p);
        Eigen::VectorXd r(n);
        for (std::size_t i = 0; i < n; ++i)
            r(i) = y[i] - model(x[i], p);
        Eigen::MatrixXd jtj = J.transpose() * J;
        Eigen::VectorXd jtr = J.transpose() * r;

        bool stepped = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            for (std::size_t j = 0; j < k; ++j)
                damped(j, j) += lambda * std::max(jtj(j, j), 1e-12);
            Eigen::VectorXd delta = damped.ldlt().solve(jtr);
            std::vector<double> trial = p;
            for (std::size_t j = 0; j < k; ++j)
                trial[j] += delta(j);
            double trial_cost = rss(model, x, y, trial);
            if (std::isfinite(trial_cost) && trial_cost <= cost) {
                double rel = std::abs(cost - trial_cost) / std::max(cost, 1e-300);
                p = trial;
                cost = trial_cost;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (rel < 1e-13 || delta.norm() < 1e-14)
                    converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped || converged) {
            converged = converged || stepped || cost == 0.0;
            break;
        }
    }

    LmOutcome out;
    out.p = p;
    out.residual_norm = std::sqrt(cost);
    out.converged = converged || cost <= 1e-24;
    Eigen::MatrixXd J = jacobian(p);
    Eigen::MatrixXd jtj = J.transpose() * J;
    double dof = static_cast<double>(n > k ? n - k : 1);
    double sigma2 = cost / dof;
    Eigen::MatrixXd inv = jtj.completeOrthogonalDecomposition().pseudoInverse();
    out.covariance = inv * sigma2;
    return out;
}

FitResult pack_result(const LmOutcome& lm, const std::vector<std::string>& names) {
    FitResult res;
    res.param_names = names;
    res.converged = lm.converged;
    res.residual_norm = lm.residual_norm;
    res.covariance.assign(names.size(), std::vector<double>(names.size(), 0.0));
    for (std::size_t i = 0; i < names.size(); ++i) {
        res.params[names[i]] = lm.p[i];
        double var = lm.covariance(i, i);
        res.stderrs[names[i]] = var > 0.0 ? std::sqrt(var) : 0.0;
        for (std::size_t j = 0; j < names.size(); ++j)
            res.covariance[i][j] = lm.covariance(i, j);
    }
    return res;
}

void check_xy(const std::vector<double>& x, const std::vector<double>& y, std::size_t min_n) {
    if (x.size() != y.size())
        throw std::invalid_argument("fitting: x and y sizes differ");
    if (x.size() < min_n)
        throw std::invalid_argument("fitting: not enough points");
}

// Log-linear regression on the positive samples; starting point for the
// exponential fits.
bool log_linear_init(const std::vector<double>& x, const std::vector<double>& y, double& amplitude,
                     double& tau) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] > 0.0) {
            double ly = std::log(y[i]);
            sx += x[i];
            sy += ly;
            sxx += x[i] * x[i];
            sxy += x[i] * ly;
            ++m;
        }
    }
    if (m < 2)
        return false;
    double denom = static_cast<double>(m) * sxx - sx * sx;
    if (denom == 0.0)
        return false;
    double slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / static_cast<double>(m);
    amplitude = std::exp(intercept);
    tau = slope < 0.0 ? -1.0 / slope : std::numeric_limits<double>::infinity();
    return true;
}

}  // namespace

// Drops (x, y) pairs with y <= 0; returns how many were removed.
std::size_t exclude_nonpositive(std::vector<double>& x, std::vector<double>& y) {
    std::size_t kept = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (y[i] > 0.0) {
            x[kept] = x[i];
            y[kept] = y[i];
            ++kept;
        }
    }
    const std::size_t removed = x.size() - kept;
    x.resize(kept);
    y.resize(kept);
    return removed;
}

FitResult fit_exponential(const std::vector<double>& x_in, const std::vector<double>& y_in) {
    check_xy(x_in, y_in, 3);
    std::vector<double> x = x_in, y = y_in;
    const std::size_t excluded = exclude_nonpositive(x, y);
    if (x.size() < 3)
        throw std::invalid_argument("fitting: fewer than three positive points");
    const double x_range = *std::max_element(x.begin(), x.end()) -
                           *std::min_element(x.begin(), x.end());
    if (!(x_range > 0.0))
        throw std::invalid_argument("fitting: x values must not be all equal");

    double a0 = 0.0, tau0 = 0.0;
    bool have_init = log_linear_init(x, y, a0, tau0);
    if (!have_init || !std::isfinite(tau0) || tau0 <= 0.0) {
        // Flat or non-decaying data; report the mean with an unbounded scale.
        double mean = 0.0;
        for (double v : y)
            mean += v;
        mean /= static_cast<double>(y.size());
        FitResult res;
        res.param_names = {"amplitude", "tau"};
        res.params["amplitude"] = mean;
        res.params["tau"] = std::numeric_limits<double>::infinity();
        res.stderrs["amplitude"] = 0.0;
        res.stderrs["tau"] = std::numeric_limits<double>::infinity();
        res.covariance.assign(2, std::vector<double>(2, 0.0));
        res.converged = false;
        res.non_identifiable = true;
        res.excluded_points = excluded;
        return res;
    }

    Model model = [](double xv, const std::vector<double>& p) {
        return p[0] * std::exp(-xv / p[1]);
    };
    LmOutcome lm = levenberg_marquardt(model, x, y, {a0, tau0});
    FitResult res = pack_result(lm, {"amplitude", "tau"});
    res.excluded_points = excluded;
    if (res.params["tau"] > 50.0 * x_range || res.params["tau"] <= 0.0) {
        res.non_identifiable = true;
        res.converged = false;
    }
    return res;
}

FitResult fit_decay_with_beat(const std::vector<double>& x_in, const std::vector<double>& y_in) {
    check_xy(x_in, y_in, 5);
    std::vector<double> x = x_in, y = y_in;
    const std::size_t excluded = exclude_nonpositive(x, y);
    if (x.size() < 5)
        throw std::invalid_argument("fitting: fewer than five positive points");
    FitResult base = fit_exponential(x, y);
    double a0 = base.params.at("amplitude");
    double tau0 = base.params.at("tau");
    if (!std::isfinite(tau0))
        tau0 = 10.0 * (*std::max_element(x.begin(), x.end()));

    // Modulation of the residual ratio picks the beat frequency.
    std::vector<double> ratio(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double envelope = a0 * std::exp(-x[i] / tau0);
        ratio[i] = envelope > 0.0 ? y[i] / envelope - 1.0 : 0.0;
    }
    std::vector<double> xs = x;
    std::sort(xs.begin(), xs.end());
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < xs.size(); ++i)
        min_gap = std::min(min_gap, xs[i] - xs[i - 1]);
    double range = xs.back() - xs.front();
    double f_lo = 0.25 / range, f_hi = 0.5 / min_gap;
    double best_f = f_lo, best_mag = -1.0, best_re = 0.0, best_im = 0.0;
    for (int s = 0; s <= 2000; ++s) {
        double f = f_lo + (f_hi - f_lo) * static_cast<double>(s) / 2000.0;
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double ang = 2.0 * std::numbers::pi * f * x[i];
            re += ratio[i] * std::cos(ang);
            im += ratio[i] * std::sin(ang);
        }
        double mag = re * re + im * im;
        if (mag > best_mag) {
            best_mag = mag;
            best_f = f;
            best_re = re;
            best_im = im;
        }
    }
    double n_half = static_cast<double>(x.size()) / 2.0;
    double b0 = std::min(1.0, std::sqrt(best_mag) / n_half);
    double theta0 = std::atan2(-best_im, best_re);

    Model model = [](double xv, const std::vector<double>& p) {
        return p[0] * std::exp(-xv / p[1]) *
               (1.0 + p[2] * std::cos(2.0 * std::numbers::pi * p[3] * xv + p[4]));
    };
    LmOutcome lm = levenberg_marquardt(model, x, y, {a0, tau0, b0, best_f, theta0});
    lm.p[2] = std::abs(lm.p[2]);
    lm.p[3] = std::abs(lm.p[3]);
    FitResult res = pack_result(lm, {"amplitude", "tau", "beat_contrast", "beat_freq", "beat_phase"});
    res.excluded_points = excluded;
    return res;
}

FitResult fit_visibility(const std::vector<double>& phi, const std::vector<double>& counts) {
    check_xy(phi, counts, 4);
    const double span = *std::max_element(phi.begin(), phi.end()) -
                        *std::min_element(phi.begin(), phi.end());
    if (span < 1.5 * std::numbers::pi - 1e-9)
        throw std::invalid_argument("fitting: phase scan must span at least 3 pi / 2");

    // Counting noise is Poisson, so weight by 1/max(count, 1); fringes of
    // sub-unity values (noiseless energies) degrade to the unweighted fit.
    const std::size_t n = phi.size();
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd Y(n);
    Eigen::VectorXd wgt(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = std::cos(phi[i]);
        X(i, 2) = std::sin(phi[i]);
        Y(i) = counts[i];
        wgt(i) = 1.0 / std::max(counts[i], 1.0);
    }
    Eigen::MatrixXd xtwx = X.transpose() * wgt.asDiagonal() * X;
    Eigen::VectorXd beta = xtwx.ldlt().solve(X.transpose() * (wgt.asDiagonal() * Y));
    double a = beta(0), b = beta(1), c = beta(2);

    double rss_v = (Y - X * beta).squaredNorm();
    // With true 1/variance weights the parameter covariance is the inverse
    // normal matrix itself, no residual rescaling.
    Eigen::MatrixXd cov_lin = xtwx.inverse();

    FitResult res;
    res.param_names = {"contrast", "visibility", "phase"};
    res.converged = a > 0.0;
    res.residual_norm = std::sqrt(rss_v);
    double amp = std::hypot(b, c);
    double vis = a > 0.0 ? amp / a : 0.0;
    bool clipped = vis > 1.0;
    if (clipped)
        vis = 1.0;
    res.params["contrast"] = a;
    res.params["visibility"] = vis;
    res.params["phase"] = std::atan2(-c, b);

    // First-order error propagation from the linear coefficients.
    double se_a = std::sqrt(std::max(cov_lin(0, 0), 0.0));
    double se_b = std::sqrt(std::max(cov_lin(1, 1), 0.0));
    double se_c = std::sqrt(std::max(cov_lin(2, 2), 0.0));
    res.stderrs["contrast"] = se_a;
    if (a > 0.0 && amp > 0.0) {
        double db = b / (amp * a), dc = c / (amp * a), da = -amp / (a * a);
        res.stderrs["visibility"] =
            std::sqrt(db * db * se_b * se_b + dc * dc * se_c * se_c + da * da * se_a * se_a);
        res.stderrs["phase"] = std::sqrt((c * c * se_b * se_b + b * b * se_c * se_c) /
                                         (amp * amp * amp * amp));
    } else {
        res.stderrs["visibility"] = 0.0;
        res.stderrs["phase"] = 0.0;
    }
    res.covariance.assign(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            res.covariance[i][j] = cov_lin(i, j);
    return res;
}

LineFit fit_line_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
    check_xy(x, y, 2);
    double sxx = 0.0, sxy = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        sy += y[i];
    }
    if (!(sxx > 0.0))
        throw std::invalid_argument("fitting: x values are all zero");
    LineFit fit;
    fit.slope = sxy / sxx;
    double mean = sy / static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - fit.slope * x[i];
        ss_res += r * r;
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    double dof = static_cast<double>(x.size() > 1 ? x.size() - 1 : 1);
    fit.slope_stderr = std::sqrt(ss_res / dof / sxx);
    return fit;
}

}  // namespace afc
