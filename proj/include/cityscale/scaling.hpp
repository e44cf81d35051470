#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cityscale/csv.hpp"
#include "cityscale/error.hpp"
#include "cityscale/ingest.hpp"

namespace cityscale {

/// One city observation for the scaling fit: population N and property
/// total Y, both strictly positive.
struct ScalingPoint {
    std::string city_id;
    double n_pop = 0.0;
    double y_value = 0.0;
};

/// Output of the log-log power-law fit Y = Y0 * N^beta.
struct FitResult {
    double beta = 0.0;
    double ln_y0 = 0.0;  // Y0 = exp(ln_y0)
    double se_beta = 0.0;
    double ci_low = 0.0;   // 95% interval
    double ci_high = 0.0;
    double r2 = 0.0;
    int n_obs = 0;
};

// ---------------------------------------------------------------------------
// OLS core, shared by fit_power_law and correlate_loglog
// ---------------------------------------------------------------------------

struct OlsResult {
    double slope = 0.0;
    double intercept = 0.0;
    double se_slope = 0.0;
    double r2 = 0.0;
    int n = 0;
};

inline OlsResult ols_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw input_error("ols_fit: mismatched series lengths");
    const int n = static_cast<int>(x.size());
    if (n < 3) throw input_error("ols_fit: fewer than 3 usable points (" + std::to_string(n) + ")");
    double mean_x = 0.0, mean_y = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mean_x) * (x[i] - mean_x);
        sxy += (x[i] - mean_x) * (y[i] - mean_y);
    }
    if (sxx == 0.0) throw input_error("ols_fit: degenerate abscissa (zero variance)");
    OlsResult out;
    out.n = n;
    out.slope = sxy / sxx;
    out.intercept = mean_y - out.slope * mean_x;
    double ss_res = 0.0, ss_tot = 0.0;
    for (int i = 0; i < n; ++i) {
        const double fitted = out.intercept + out.slope * x[i];
        ss_res += (y[i] - fitted) * (y[i] - fitted);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    out.r2 = ss_tot == 0.0 ? 0.0 : 1.0 - ss_res / ss_tot;
    out.se_slope = std::sqrt(std::max(0.0, ss_res / (n - 2)) / sxx);
    return out;
}

// ---------------------------------------------------------------------------
// Student-t 97.5% quantile via numeric inversion of the regularized
// incomplete beta function (continued fraction, Lentz's method)
// ---------------------------------------------------------------------------

namespace detail {

inline double beta_cont_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

/// I_x(a, b), the regularized incomplete beta function.
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cont_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_cont_fraction(b, a, 1.0 - x) / b;
}

/// t such that P(T <= t) = 0.975 for Student's t with `dof` degrees of
/// freedom, accurate to ~1e-10. Uses I_x(dof/2, 1/2) = 0.05 with
/// x = dof / (dof + t^2), solved by bisection (I_x is increasing in x).
inline double student_t_quantile_975(int dof) {
    if (dof < 1) throw input_error("student_t_quantile_975: dof must be >= 1");
    const double a = dof / 2.0, b = 0.5;
    constexpr double target = 0.05;  // two-sided tail mass
    double lo = 0.0, hi = 1.0;
    for (int iter = 0; iter < 200 && hi - lo > 1e-16; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (regularized_incomplete_beta(a, b, mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double x = 0.5 * (lo + hi);
    return std::sqrt(dof * (1.0 - x) / x);
}

// ---------------------------------------------------------------------------
// Scaling-law operations
// ---------------------------------------------------------------------------

/// Ordinary least squares of ln Y on ln N. beta is the slope, ln_y0 the
/// intercept, and the 95% interval is beta +- t(0.975, n-2) * se_beta.
inline FitResult fit_power_law(std::span<const ScalingPoint> points) {
    std::vector<double> ln_n, ln_y;
    ln_n.reserve(points.size());
    ln_y.reserve(points.size());
    for (const ScalingPoint& p : points) {
        if (!(p.n_pop > 0.0) || !(p.y_value > 0.0) || !std::isfinite(p.n_pop) ||
            !std::isfinite(p.y_value))
            throw input_error("fit_power_law: city '" + p.city_id +
                              "' has non-positive N or Y; exclude it before fitting");
        ln_n.push_back(std::log(p.n_pop));
        ln_y.push_back(std::log(p.y_value));
    }
    OlsResult ols;
    try {
        ols = ols_fit(ln_n, ln_y);
    } catch (const input_error& e) {
        throw input_error(std::string("fit_power_law: ") + e.what());
    }
    FitResult fit;
    fit.beta = ols.slope;
    fit.ln_y0 = ols.intercept;
    fit.se_beta = ols.se_slope;
    fit.r2 = ols.r2;
    fit.n_obs = ols.n;
    const double t = student_t_quantile_975(ols.n - 2);
    fit.ci_low = fit.beta - t * fit.se_beta;
    fit.ci_high = fit.beta + t * fit.se_beta;
    return fit;
}

enum class ScalingRegime { sublinear, linear, superlinear };

inline std::string to_string(ScalingRegime regime) {
    switch (regime) {
        case ScalingRegime::sublinear: return "sublinear";
        case ScalingRegime::linear: return "linear";
        default: return "superlinear";
    }
}

/// Linear iff the 95% CI contains 1, otherwise classified by beta.
inline ScalingRegime classify_regime(const FitResult& fit) {
    if (fit.ci_low <= 1.0 && 1.0 <= fit.ci_high) return ScalingRegime::linear;
    return fit.beta < 1.0 ? ScalingRegime::sublinear : ScalingRegime::superlinear;
}

/// Positivity screen applied before any fit: engine empty rows and
/// non-positive N or Y are excluded and counted.
struct ScreenedPoints {
    std::vector<ScalingPoint> points;
    std::size_t n_excluded = 0;
};

inline ScreenedPoints screen_scaling_points(std::span<const JoinedRow> rows) {
    ScreenedPoints out;
    out.points.reserve(rows.size());
    for (const JoinedRow& r : rows) {
        if (r.population > 0.0 && r.property > 0.0 && std::isfinite(r.population) &&
            std::isfinite(r.property))
            out.points.push_back(ScalingPoint{r.city_id, r.population, r.property});
        else
            ++out.n_excluded;
    }
    return out;
}

struct RemovedPoint {
    ScalingPoint point;
    std::string reason;  // "unknown gdp" or "below threshold"
};

struct GdpFilterResult {
    std::vector<ScalingPoint> kept;
    std::vector<RemovedPoint> removed;
};

/// Keeps cities whose country GDP per capita is >= threshold; cities with
/// no resolvable GDP go to removed with reason "unknown gdp".
inline GdpFilterResult filter_by_gdp(std::span<const ScalingPoint> points,
                                     std::span<const CityMeta> catalog, double threshold_usd) {
    std::map<std::string, const CityMeta*> by_id;
    for (const CityMeta& m : catalog) by_id[m.id] = &m;
    GdpFilterResult out;
    for (const ScalingPoint& p : points) {
        const auto it = by_id.find(p.city_id);
        if (it == by_id.end() || !it->second->gdp_per_capita) {
            out.removed.push_back(RemovedPoint{p, "unknown gdp"});
        } else if (*it->second->gdp_per_capita >= threshold_usd) {
            out.kept.push_back(p);
        } else {
            out.removed.push_back(RemovedPoint{p, "below threshold"});
        }
    }
    return out;
}

inline std::vector<ScalingPoint> filter_by_country(std::span<const ScalingPoint> points,
                                                   std::span<const CityMeta> catalog,
                                                   const std::string& country_code) {
    std::map<std::string, const CityMeta*> by_id;
    for (const CityMeta& m : catalog) by_id[m.id] = &m;
    std::vector<ScalingPoint> out;
    for (const ScalingPoint& p : points) {
        const auto it = by_id.find(p.city_id);
        if (it != by_id.end() && it->second->country == country_code) out.push_back(p);
    }
    return out;
}

struct Correlation {
    double coefficient = 0.0;  // OLS slope of ln y on ln x
    double r2 = 0.0;
    int n = 0;
};

/// Linear correlation after natural-log transform of both attributes.
inline Correlation correlate_loglog(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw input_error("correlate_loglog: mismatched series lengths");
    std::vector<double> ln_x, ln_y;
    ln_x.reserve(x.size());
    ln_y.reserve(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw input_error("correlate_loglog: values must be strictly positive");
        ln_x.push_back(std::log(x[i]));
        ln_y.push_back(std::log(y[i]));
    }
    const OlsResult ols = ols_fit(ln_x, ln_y);
    return Correlation{ols.slope, ols.r2, ols.n};
}

/// k smallest values ascending; ties broken by ascending city id. Asking
/// for more than the population returns everything.
inline std::vector<std::pair<std::string, double>> bottom_k(
    std::span<const std::pair<std::string, double>> values, std::size_t k) {
    if (k < 1) throw input_error("bottom_k: k must be >= 1");
    std::vector<std::pair<std::string, double>> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
    if (sorted.size() > k) sorted.resize(k);
    return sorted;
}

/// Country counts, descending by count then ascending by code.
inline std::vector<std::pair<std::string, std::size_t>> country_histogram(
    std::span<const std::pair<std::string, std::string>> cities) {
    std::map<std::string, std::size_t> counts;
    for (const auto& [city_id, country] : cities) ++counts[country];
    std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Output formats
// ---------------------------------------------------------------------------

inline std::string fit_to_json(const FitResult& fit, std::size_t n_excluded) {
    nlohmann::json j{{"beta", fit.beta},
                     {"ln_y0", fit.ln_y0},
                     {"se_beta", fit.se_beta},
                     {"ci_low", fit.ci_low},
                     {"ci_high", fit.ci_high},
                     {"r2", fit.r2},
                     {"n_obs", fit.n_obs},
                     {"n_excluded", n_excluded},
                     {"regime", to_string(classify_regime(fit))}};
    return j.dump() + "\n";
}

/// Log-log scatter plus the fitted line, for external plotting.
inline std::string write_scatter_csv(std::span<const ScalingPoint> points, const FitResult& fit) {
    std::string out = "city_id,ln_n,ln_y,fitted_ln_y\n";
    for (const ScalingPoint& p : points) {
        const double ln_n = std::log(p.n_pop);
        out += p.city_id;
        out += ',';
        out += format_double(ln_n);
        out += ',';
        out += format_double(std::log(p.y_value));
        out += ',';
        out += format_double(fit.ln_y0 + fit.beta * ln_n);
        out += '\n';
    }
    return out;
}

}  // namespace cityscale
