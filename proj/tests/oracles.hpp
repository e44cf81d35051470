#pragma once

// Test-only reference implementations. Everything here is deliberately
// independent of the library code paths it checks: containment uses the
// winding number instead of ray parity, aggregation uses a naive double
// loop with plain summation, and matrices are reconstructed densely.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cityscale/geo.hpp"
#include "cityscale/grid.hpp"
#include "cityscale/rng.hpp"

namespace oracles {

using cityscale::GeoPoint;
using cityscale::PolygonBoundary;
using cityscale::Ring;

/// Sunday's winding-number test, lon as x and lat as y. Nonzero winding
/// equals even-odd parity for simple (non-self-intersecting) rings.
inline int winding_number(const GeoPoint& p, const Ring& ring) {
    const auto is_left = [](const GeoPoint& a, const GeoPoint& b, const GeoPoint& q) {
        return (b.lon - a.lon) * (q.lat - a.lat) - (q.lon - a.lon) * (b.lat - a.lat);
    };
    int wn = 0;
    const auto& v = ring.vertices;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if (v[j].lat <= p.lat) {
            if (v[i].lat > p.lat && is_left(v[j], v[i], p) > 0.0) ++wn;
        } else {
            if (v[i].lat <= p.lat && is_left(v[j], v[i], p) < 0.0) --wn;
        }
    }
    return wn;
}

inline bool winding_inside(const GeoPoint& p, const Ring& ring) {
    return winding_number(p, ring) != 0;
}

/// Planar point-to-segment distance in degrees.
inline double segment_distance(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
    const double vx = b.lon - a.lon, vy = b.lat - a.lat;
    const double wx = p.lon - a.lon, wy = p.lat - a.lat;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = wx - t * vx, dy = wy - t * vy;
    return std::sqrt(dx * dx + dy * dy);
}

inline double min_edge_distance(const GeoPoint& p, const Ring& ring) {
    const auto& v = ring.vertices;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++)
        best = std::min(best, segment_distance(p, v[j], v[i]));
    return best;
}

/// Random simple polygon: star-shaped around a center, vertices at sorted
/// angles with jittered radii. Star-shaped implies non-self-intersecting,
/// and concavity comes for free from the radius jitter.
inline Ring random_simple_polygon(cityscale::Rng& rng, std::size_t n_vertices) {
    const double center_lat = rng.uniform(-55.0, 55.0);
    const double center_lon = rng.uniform(-150.0, 150.0);
    const double max_radius = rng.uniform(0.5, 4.0);
    std::vector<double> angles(n_vertices);
    for (double& a : angles) a = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    std::sort(angles.begin(), angles.end());
    std::vector<GeoPoint> verts;
    verts.reserve(n_vertices);
    for (double a : angles) {
        const double r = max_radius * rng.uniform(0.15, 1.0);
        verts.push_back(GeoPoint{center_lat + r * std::sin(a), center_lon + r * std::cos(a)});
    }
    return cityscale::make_ring(verts);
}

/// Query point in the padded bbox of the ring, at least min_clearance
/// degrees from every edge.
inline GeoPoint random_query_point(cityscale::Rng& rng, const Ring& ring, double min_clearance) {
    cityscale::BoundingBox box = cityscale::compute_bbox(std::span(&ring, 1));
    const double pad = 0.25;
    while (true) {
        const GeoPoint p{rng.uniform(box.min_lat - pad, box.max_lat + pad),
                         rng.uniform(box.min_lon - pad, box.max_lon + pad)};
        if (min_edge_distance(p, ring) >= min_clearance) return p;
    }
}

struct PointValue {
    GeoPoint location;
    double value = 0.0;
};

/// Student-t pdf with dof degrees of freedom.
inline double t_pdf(double t, int dof) {
    const double half = (dof + 1) / 2.0;
    const double log_c =
        std::lgamma(half) - std::lgamma(dof / 2.0) - 0.5 * std::log(dof * 3.14159265358979323846);
    return std::exp(log_c - half * std::log1p(t * t / dof));
}

inline double simpson(double a, double b, int dof) {
    const double m = 0.5 * (a + b);
    return (b - a) / 6.0 * (t_pdf(a, dof) + 4.0 * t_pdf(m, dof) + t_pdf(b, dof));
}

inline double adaptive_simpson(double a, double b, int dof, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = simpson(a, m, dof);
    const double right = simpson(m, b, dof);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(a, m, dof, left, tol / 2.0, depth - 1) +
           adaptive_simpson(m, b, dof, right, tol / 2.0, depth - 1);
}

/// P(T <= t) for Student's t by adaptive Simpson quadrature of the pdf;
/// an independent check on the incomplete-beta inversion.
inline double t_cdf_by_quadrature(double t, int dof) {
    if (t < 0.0) return 1.0 - t_cdf_by_quadrature(-t, dof);
    return 0.5 + adaptive_simpson(0.0, t, dof, simpson(0.0, t, dof), 1e-13, 40);
}

/// Naive per-city aggregation: double loop, no prefilter, plain summation.
inline std::map<std::string, std::pair<double, std::uint64_t>> brute_force_vector_join(
    const std::vector<PointValue>& points, const std::vector<PolygonBoundary>& boundaries) {
    std::map<std::string, std::pair<double, std::uint64_t>> out;
    for (const auto& b : boundaries) out[b.id] = {0.0, 0};
    for (const auto& b : boundaries) {
        auto& slot = out[b.id];
        for (const auto& pt : points) {
            if (cityscale::point_in_boundary(pt.location, b)) {
                slot.first += pt.value;
                slot.second += 1;
            }
        }
    }
    return out;
}

}  // namespace oracles
