#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cityscale/error.hpp"

namespace cityscale {

inline constexpr double kEarthRadiusMeters = 6'371'000.0;

/// WGS84 decimal degrees, (lat, lon) order everywhere inside the engine.
struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline bool valid_point(const GeoPoint& p) {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 &&
           p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

inline void require_valid_point(const GeoPoint& p, const std::string& what) {
    if (!valid_point(p))
        throw input_error(what + ": coordinates out of range (" + std::to_string(p.lat) +
                          ", " + std::to_string(p.lon) + ")");
}

/// Closed polygon ring stored unclosed: the edge (last, first) is implicit.
/// Invariants (enforced by make_ring): >= 3 vertices, no two consecutive
/// vertices identical, all coordinates in range.
struct Ring {
    std::vector<GeoPoint> vertices;
};

/// Normalizes a raw vertex list into a Ring: collapses consecutive duplicate
/// vertices, strips a duplicated closing vertex, validates the remainder.
inline Ring make_ring(std::span<const GeoPoint> raw) {
    std::vector<GeoPoint> verts;
    verts.reserve(raw.size());
    for (const GeoPoint& p : raw) {
        require_valid_point(p, "ring vertex");
        if (verts.empty() || !(verts.back() == p)) verts.push_back(p);
    }
    if (verts.size() >= 2 && verts.front() == verts.back()) verts.pop_back();
    if (verts.size() < 3)
        throw input_error("ring needs at least 3 distinct vertices, got " +
                          std::to_string(verts.size()));
    return Ring{std::move(verts)};
}

struct BoundingBox {
    double min_lat = 0.0;
    double min_lon = 0.0;
    double max_lat = 0.0;
    double max_lon = 0.0;

    bool contains(const GeoPoint& p) const {
        return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Exact vertex min/max over a set of rings.
inline BoundingBox compute_bbox(std::span<const Ring> rings) {
    BoundingBox b{90.0, 180.0, -90.0, -180.0};
    for (const Ring& r : rings) {
        for (const GeoPoint& p : r.vertices) {
            b.min_lat = std::min(b.min_lat, p.lat);
            b.min_lon = std::min(b.min_lon, p.lon);
            b.max_lat = std::max(b.max_lat, p.lat);
            b.max_lon = std::max(b.max_lon, p.lon);
        }
    }
    return b;
}

/// One named polygonal region: outer rings and holes combined by the
/// even-odd rule, plus the cached exact bounding box.
struct PolygonBoundary {
    std::string id;
    std::string name;
    std::string country;  // ISO code, may be empty
    std::vector<Ring> rings;
    BoundingBox bbox;
};

inline PolygonBoundary make_boundary(std::string id, std::string name, std::string country,
                                     std::vector<Ring> rings) {
    if (rings.empty()) throw input_error("boundary '" + id + "' has no rings");
    BoundingBox bbox = compute_bbox(rings);
    return PolygonBoundary{std::move(id), std::move(name), std::move(country),
                           std::move(rings), bbox};
}

inline BoundingBox bbox_of(const PolygonBoundary& b) { return b.bbox; }

/// Franklin ray-cast (even-odd rule) in the planar (lat, lon) space. For each
/// edge the half-open lat-span guard runs first, then the lon intersection
/// is compared, so horizontal edges never divide by zero. Points exactly on
/// an edge get half-open behavior: implementation-defined in or out.
inline bool point_in_polygon(const GeoPoint& p, const Ring& ring) {
    const std::vector<GeoPoint>& v = ring.vertices;
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].lat > p.lat) != (v[j].lat > p.lat)) {
            const double lon_cross =
                (v[j].lon - v[i].lon) * (p.lat - v[i].lat) / (v[j].lat - v[i].lat) + v[i].lon;
            if (p.lon < lon_cross) inside = !inside;
        }
    }
    return inside;
}

/// Even-odd membership over all rings of a boundary: holes subtract,
/// disjoint parts union.
inline bool point_in_boundary(const GeoPoint& p, const PolygonBoundary& b) {
    bool inside = false;
    for (const Ring& r : b.rings) inside ^= point_in_polygon(p, r);
    return inside;
}

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Great-circle distance in meters on a sphere of radius 6,371,000 m.
inline double haversine_length(const GeoPoint& a, const GeoPoint& b) {
    const double phi_a = deg_to_rad(a.lat);
    const double phi_b = deg_to_rad(b.lat);
    const double sin_dphi = std::sin(deg_to_rad(b.lat - a.lat) / 2.0);
    const double sin_dlon = std::sin(deg_to_rad(b.lon - a.lon) / 2.0);
    const double h = sin_dphi * sin_dphi + std::cos(phi_a) * std::cos(phi_b) * sin_dlon * sin_dlon;
    return 2.0 * kEarthRadiusMeters * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Arithmetic mean of the endpoint coordinates. Pairs spanning the
/// antimeridian have no meaningful planar mean and are rejected.
inline GeoPoint midpoint(const GeoPoint& a, const GeoPoint& b) {
    if (std::fabs(a.lon - b.lon) >= 180.0)
        throw input_error("midpoint: segment crosses the antimeridian");
    return GeoPoint{(a.lat + b.lat) / 2.0, (a.lon + b.lon) / 2.0};
}

}  // namespace cityscale
