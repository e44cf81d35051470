#pragma once

// Statistical fixtures shared by the unit tests and the acceptance suite.

#include <cstdint>
#include <string>
#include <vector>

#include "cityscale/ingest.hpp"
#include "cityscale/rng.hpp"
#include "cityscale/scaling.hpp"

namespace fixtures {

/// Cities drawn from Y = y0 * N^beta * exp(eps), eps ~ N(0, sigma^2),
/// N log-uniform over [n_lo, n_hi].
inline std::vector<cityscale::ScalingPoint> power_law_sample(cityscale::Rng& rng, int n_cities,
                                                             double beta, double y0, double sigma,
                                                             double n_lo = 1e3, double n_hi = 1e7,
                                                             const std::string& prefix = "c") {
    std::vector<cityscale::ScalingPoint> points;
    points.reserve(n_cities);
    for (int i = 0; i < n_cities; ++i) {
        const double n_pop = std::exp(rng.uniform(std::log(n_lo), std::log(n_hi)));
        const double y = y0 * std::pow(n_pop, beta) * std::exp(sigma * rng.normal());
        points.push_back({prefix + std::to_string(i), n_pop, y});
    }
    return points;
}

/// Fraction of seeded trials whose 95% CI covers the true exponent.
struct CoverageResult {
    int trials = 0;
    int covered = 0;
};

inline CoverageResult ci_coverage(std::uint64_t seed, int trials, int n_cities, double sigma,
                                  double beta_true) {
    const cityscale::Rng base(seed);
    CoverageResult out{trials, 0};
    for (int t = 0; t < trials; ++t) {
        cityscale::Rng rng = base.fork("trial", static_cast<std::uint64_t>(t));
        const auto points = power_law_sample(rng, n_cities, beta_true, 3.0, sigma);
        const cityscale::FitResult fit = cityscale::fit_power_law(points);
        if (fit.ci_low <= beta_true && beta_true <= fit.ci_high) ++out.covered;
    }
    return out;
}

/// Two-cohort world mirroring the GDP outlier story: a developed cohort on
/// the true power law, and an underdeveloped cohort of populous cities with
/// a strongly depressed Y0 that drags the pooled slope down.
struct TwoCohortFixture {
    std::vector<cityscale::ScalingPoint> points;
    std::vector<cityscale::CityMeta> catalog;
    double developed_beta = 0.0;
};

inline TwoCohortFixture two_cohort_fixture(std::uint64_t seed, double developed_beta = 0.83) {
    cityscale::Rng rng(seed);
    TwoCohortFixture out;
    out.developed_beta = developed_beta;
    cityscale::Rng dev_rng = rng.fork("developed");
    cityscale::Rng und_rng = rng.fork("underdeveloped");
    const auto developed =
        power_law_sample(dev_rng, 400, developed_beta, 50.0, 0.08, 1e3, 1e7, "dev");
    const auto underdeveloped =
        power_law_sample(und_rng, 200, developed_beta, 50.0 / 30.0, 0.08, 1e5, 1e7, "und");
    for (const auto& p : developed) {
        out.points.push_back(p);
        out.catalog.push_back({p.city_id, "", "DEV", p.n_pop, 40000.0});
    }
    for (const auto& p : underdeveloped) {
        out.points.push_back(p);
        out.catalog.push_back({p.city_id, "", "UND", p.n_pop, 1200.0});
    }
    return out;
}

inline std::vector<cityscale::JoinedRow> to_joined_rows(const TwoCohortFixture& fx) {
    std::vector<cityscale::JoinedRow> rows;
    rows.reserve(fx.points.size());
    for (std::size_t i = 0; i < fx.points.size(); ++i)
        rows.push_back({fx.points[i].city_id, fx.points[i].n_pop, fx.points[i].y_value,
                        fx.catalog[i].country});
    return rows;
}

}  // namespace fixtures
