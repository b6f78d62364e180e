#pragma once

// Least-squares fits used by the harness: hinge (ablation threshold),
// saturation R_max P / (P + P_sat) and ordinary linear regression.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ablatron/error.hpp"

namespace ablatron {

struct FitResult {
    std::map<std::string, double> parameters;
    double residual_norm = 0.0;
    std::map<std::string, double> covariance_diagonal;
    /// Largest diagonal of (J^T J)^-1 in log-parameters with unit-rms data.
    /// Values above 1e3 mean the data cannot pin the parameters down.
    double relative_conditioning = 0.0;
    bool identifiable = true;

    double operator[](const std::string& name) const { return parameters.at(name); }
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

inline LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::DegenerateData, "points", "need >= 2 points");
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) throw Error(ErrorKind::DegenerateData, "points", "all x values identical");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

namespace detail {

using Model2 = std::function<double(double x, const std::array<double, 2>& p)>;
using Grad2 = std::function<std::array<double, 2>(double x, const std::array<double, 2>& p)>;

inline double sum_squares(const std::vector<double>& x, const std::vector<double>& y, const Model2& f,
                          const std::array<double, 2>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f(x[i], p);
        s += r * r;
    }
    return s;
}

/// Levenberg-Marquardt on two parameters with an analytic gradient.
inline std::array<double, 2> levenberg_marquardt(const std::vector<double>& x, const std::vector<double>& y,
                                                 const Model2& f, const Grad2& grad, std::array<double, 2> p) {
    double lambda = 1e-3;
    double cost = sum_squares(x, y, f, p);
    for (int iter = 0; iter < 500 && cost > 0.0; ++iter) {
        double a00 = 0, a01 = 0, a11 = 0, b0 = 0, b1 = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto g = grad(x[i], p);
            const double r = y[i] - f(x[i], p);
            a00 += g[0] * g[0];
            a01 += g[0] * g[1];
            a11 += g[1] * g[1];
            b0 += g[0] * r;
            b1 += g[1] * r;
        }
        bool improved = false;
        for (int tries = 0; tries < 40; ++tries) {
            const double m00 = a00 * (1.0 + lambda), m11 = a11 * (1.0 + lambda);
            const double det = m00 * m11 - a01 * a01;
            if (!(std::abs(det) > 0.0)) {
                lambda *= 10.0;
                continue;
            }
            const std::array<double, 2> step{(m11 * b0 - a01 * b1) / det, (m00 * b1 - a01 * b0) / det};
            const std::array<double, 2> trial{p[0] + step[0], p[1] + step[1]};
            const double c = sum_squares(x, y, f, trial);
            if (std::isfinite(c) && c <= cost) {
                const bool tiny = std::abs(step[0]) <= 1e-15 * std::abs(p[0]) + 1e-300 &&
                                  std::abs(step[1]) <= 1e-15 * std::abs(p[1]) + 1e-300;
                p = trial;
                improved = c < cost && !tiny;
                cost = c;
                lambda = std::max(lambda / 10.0, 1e-12);
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }
    return p;
}

/// Fills residual norm, covariance and conditioning for a converged fit.
inline void summarize(FitResult& out, const std::vector<double>& x, const std::vector<double>& y, const Model2& f,
                      const Grad2& grad, const std::array<double, 2>& p, const std::array<std::string, 2>& names) {
    const double sse = sum_squares(x, y, f, p);
    out.residual_norm = std::sqrt(sse);
    double a00 = 0, a01 = 0, a11 = 0;   // raw J^T J
    double l00 = 0, l01 = 0, l11 = 0;   // log-parameter J^T J
    double ms = 0;
    for (double v : y) ms += v * v;
    ms = ms > 0.0 ? ms / static_cast<double>(y.size()) : 1.0;
    for (double xi : x) {
        const auto g = grad(xi, p);
        a00 += g[0] * g[0];
        a01 += g[0] * g[1];
        a11 += g[1] * g[1];
        const double h0 = g[0] * p[0], h1 = g[1] * p[1];
        l00 += h0 * h0 / ms;
        l01 += h0 * h1 / ms;
        l11 += h1 * h1 / ms;
    }
    const double dof = std::max<double>(1.0, static_cast<double>(x.size()) - 2.0);
    const double sigma2 = sse / dof;
    const double det = a00 * a11 - a01 * a01;
    const double inf = std::numeric_limits<double>::infinity();
    out.covariance_diagonal[names[0]] = det > 0.0 ? sigma2 * a11 / det : inf;
    out.covariance_diagonal[names[1]] = det > 0.0 ? sigma2 * a00 / det : inf;
    const double ldet = l00 * l11 - l01 * l01;
    out.relative_conditioning = ldet > 0.0 ? std::max(l11, l00) / ldet : inf;
    out.identifiable = out.relative_conditioning <= 1e3;
}

}  // namespace detail

/// Hinge fit depth = n_pulses * max(0, slope (F - F_th)). A coarse grid over
/// F_th with the closed-form slope seeds Levenberg-Marquardt.
inline FitResult fit_threshold(const std::vector<double>& fluence, const std::vector<double>& depth,
                               double n_pulses = 1.0) {
    if (fluence.size() != depth.size()) throw Error(ErrorKind::DegenerateData, "points", "length mismatch");
    if (fluence.size() < 4) throw Error(ErrorKind::DegenerateData, "points", "need >= 4 points");
    if (std::all_of(depth.begin(), depth.end(), [](double d) { return d <= 0.0; }))
        throw Error(ErrorKind::DegenerateData, "depth", "all depths are zero: every point lies below the hinge");
    const auto [fmin_it, fmax_it] = std::minmax_element(fluence.begin(), fluence.end());
    const double fmin = *fmin_it, fmax = *fmax_it;
    if (std::all_of(depth.begin(), depth.end(), [](double d) { return d > 0.0; }))
        throw Error(ErrorKind::DegenerateData, "depth", "no point lies below the hinge");

    const detail::Model2 model = [n_pulses](double f, const std::array<double, 2>& p) {
        return n_pulses * std::max(0.0, p[1] * (f - p[0]));
    };
    const detail::Grad2 grad = [n_pulses](double f, const std::array<double, 2>& p) -> std::array<double, 2> {
        if (p[1] * (f - p[0]) <= 0.0) return {0.0, 0.0};
        return {-n_pulses * p[1], n_pulses * (f - p[0])};
    };

    std::array<double, 2> best{fmin, 0.0};
    double best_cost = std::numeric_limits<double>::infinity();
    constexpr int grid = 400;
    for (int k = 0; k <= grid; ++k) {
        const double th = fmin + (fmax - fmin) * k / grid;
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < fluence.size(); ++i) {
            const double xi = n_pulses * std::max(0.0, fluence[i] - th);
            sxx += xi * xi;
            sxy += xi * depth[i];
        }
        if (sxx <= 0.0) continue;
        const std::array<double, 2> p{th, sxy / sxx};
        const double c = detail::sum_squares(fluence, depth, model, p);
        if (c < best_cost) {
            best_cost = c;
            best = p;
        }
    }
    const auto p = detail::levenberg_marquardt(fluence, depth, model, grad, best);
    FitResult out;
    out.parameters["threshold"] = p[0];
    out.parameters["slope"] = p[1];
    detail::summarize(out, fluence, depth, model, grad, p, {"threshold", "slope"});
    return out;
}

/// rate = R_max P / (P + P_sat). Also reports the linear-regime slope.
inline FitResult fit_saturation(const std::vector<double>& power, const std::vector<double>& rate) {
    if (power.size() != rate.size()) throw Error(ErrorKind::DegenerateData, "points", "length mismatch");
    if (power.size() < 3) throw Error(ErrorKind::DegenerateData, "points", "need >= 3 points");
    if (std::any_of(power.begin(), power.end(), [](double p) { return !(p >= 0.0); }))
        throw Error(ErrorKind::DegenerateData, "power", "powers must be >= 0");
    if (std::all_of(rate.begin(), rate.end(), [](double r) { return r == 0.0; }))
        throw Error(ErrorKind::DegenerateData, "rate", "all rates are zero");
    const auto [pmin_it, pmax_it] = std::minmax_element(power.begin(), power.end());
    if (*pmax_it <= 0.0 || *pmax_it == *pmin_it)
        throw Error(ErrorKind::DegenerateData, "power", "need at least two distinct positive powers");

    const detail::Model2 model = [](double x, const std::array<double, 2>& p) { return p[0] * x / (x + p[1]); };
    const detail::Grad2 grad = [](double x, const std::array<double, 2>& p) -> std::array<double, 2> {
        const double d = x + p[1];
        return {x / d, -p[0] * x / (d * d)};
    };

    const double lo = std::max(*pmax_it * 1e-4, 1e-300);
    const double hi = *pmax_it * 1e3;
    std::array<double, 2> best{0.0, lo};
    double best_cost = std::numeric_limits<double>::infinity();
    constexpr int grid = 400;
    for (int k = 0; k <= grid; ++k) {
        const double ps = lo * std::pow(hi / lo, static_cast<double>(k) / grid);
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < power.size(); ++i) {
            const double xi = power[i] / (power[i] + ps);
            sxx += xi * xi;
            sxy += xi * rate[i];
        }
        const std::array<double, 2> p{sxy / sxx, ps};
        const double c = detail::sum_squares(power, rate, model, p);
        if (c < best_cost) {
            best_cost = c;
            best = p;
        }
    }
    const auto p = detail::levenberg_marquardt(power, rate, model, grad, best);
    FitResult out;
    out.parameters["r_max"] = p[0];
    out.parameters["p_sat"] = p[1];
    out.parameters["linear_slope"] = p[0] / p[1];
    detail::summarize(out, power, rate, model, grad, p, {"r_max", "p_sat"});
    return out;
}

}  // namespace ablatron
