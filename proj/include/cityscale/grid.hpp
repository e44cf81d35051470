#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cityscale/error.hpp"
#include "cityscale/geo.hpp"

namespace cityscale {

/// Raster metadata: north-west anchor, square cells in degrees, matrix shape.
/// Row 0 is the northernmost row. The default is the global 30 arc-second
/// grid (cell 1/120 deg, 21600 x 43200).
struct GridSpec {
    double top_lat = 90.0;
    double left_lon = -180.0;
    double cell_size = 1.0 / 120.0;
    std::int64_t nrows = 21600;
    std::int64_t ncols = 43200;

    double south_lat() const { return top_lat - static_cast<double>(nrows) * cell_size; }
    double east_lon() const { return left_lon + static_cast<double>(ncols) * cell_size; }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline void validate_grid(const GridSpec& spec) {
    if (!(spec.cell_size > 0.0) || !std::isfinite(spec.cell_size))
        throw input_error("grid spec: cell_size must be > 0");
    if (spec.nrows < 1 || spec.ncols < 1)
        throw input_error("grid spec: nrows and ncols must be >= 1");
    if (!std::isfinite(spec.top_lat) || !std::isfinite(spec.left_lon))
        throw input_error("grid spec: non-finite anchor");
    if (spec.top_lat > 90.0 + 1e-9 || spec.south_lat() < -90.0 - 1e-9)
        throw input_error("grid spec: latitude extent outside [-90, 90]");
    if (spec.left_lon < -180.0 - 1e-9 || spec.east_lon() > 180.0 + 1e-9)
        throw input_error("grid spec: longitude extent outside [-180, 180]");
}

struct CellIndex {
    std::int64_t row = 0;
    std::int64_t col = 0;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct CellRecord {
    CellIndex cell;
    double value = 0.0;
};

inline bool in_bounds(const CellIndex& c, const GridSpec& spec) {
    return c.row >= 0 && c.row < spec.nrows && c.col >= 0 && c.col < spec.ncols;
}

/// Maps a point to the cell containing it. Points exactly on the south/east
/// grid boundary clamp to the last row/col; anything outside the extent is
/// an error.
inline CellIndex cell_of(const GeoPoint& p, const GridSpec& spec) {
    if (!(p.lat <= spec.top_lat && p.lat >= spec.south_lat() && p.lon >= spec.left_lon &&
          p.lon <= spec.east_lon()))
        throw input_error("point (" + std::to_string(p.lat) + ", " + std::to_string(p.lon) +
                          ") lies outside the grid extent");
    std::int64_t row = static_cast<std::int64_t>(std::floor((spec.top_lat - p.lat) / spec.cell_size));
    std::int64_t col = static_cast<std::int64_t>(std::floor((p.lon - spec.left_lon) / spec.cell_size));
    row = std::clamp<std::int64_t>(row, 0, spec.nrows - 1);
    col = std::clamp<std::int64_t>(col, 0, spec.ncols - 1);
    return CellIndex{row, col};
}

/// Center point of a cell; the reference location for cell-borne data.
inline GeoPoint center_of(const CellIndex& c, const GridSpec& spec) {
    if (!in_bounds(c, spec))
        throw input_error("cell index (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                          ") out of grid bounds");
    return GeoPoint{spec.top_lat - (static_cast<double>(c.row) + 0.5) * spec.cell_size,
                    spec.left_lon + (static_cast<double>(c.col) + 0.5) * spec.cell_size};
}

/// Binary mask of a boundary on the grid: exactly the in-bounds cells whose
/// center passes the even-odd test. The scan is restricted to the index
/// window covering the boundary's bbox; output is sorted by (row, col).
inline std::vector<CellIndex> rasterize_boundary(const PolygonBoundary& b, const GridSpec& spec) {
    const BoundingBox box = b.bbox;
    std::vector<CellIndex> cells;
    if (box.min_lat > spec.top_lat || box.max_lat < spec.south_lat() ||
        box.min_lon > spec.east_lon() || box.max_lon < spec.left_lon)
        return cells;
    const auto window = [&](double offset) { return offset / spec.cell_size; };
    const std::int64_t row_begin = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::floor(window(spec.top_lat - box.max_lat))), 0, spec.nrows - 1);
    const std::int64_t row_end = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::floor(window(spec.top_lat - box.min_lat))), 0, spec.nrows - 1);
    const std::int64_t col_begin = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::floor(window(box.min_lon - spec.left_lon))), 0, spec.ncols - 1);
    const std::int64_t col_end = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::floor(window(box.max_lon - spec.left_lon))), 0, spec.ncols - 1);
    for (std::int64_t row = row_begin; row <= row_end; ++row) {
        for (std::int64_t col = col_begin; col <= col_end; ++col) {
            const CellIndex c{row, col};
            const GeoPoint center = center_of(c, spec);
            if (!box.contains(center)) continue;
            if (point_in_boundary(center, b)) cells.push_back(c);
        }
    }
    return cells;
}

/// Dense row-major matrix. Exists only for the brute-force oracle and tests;
/// production data flows as sparse CellRecord tables.
struct DenseGrid {
    std::int64_t nrows = 0;
    std::int64_t ncols = 0;
    std::vector<double> values;  // nrows * ncols, row-major

    static DenseGrid zeros(std::int64_t nrows, std::int64_t ncols) {
        return DenseGrid{nrows, ncols,
                         std::vector<double>(static_cast<std::size_t>(nrows * ncols), 0.0)};
    }

    double& at(std::int64_t r, std::int64_t c) {
        return values[static_cast<std::size_t>(r * ncols + c)];
    }
    double at(std::int64_t r, std::int64_t c) const {
        return values[static_cast<std::size_t>(r * ncols + c)];
    }
};

/// Element-wise multiply-accumulate of a data matrix against a 0/1 mask.
/// This is the brute-force reference for the sparse raster query path.
inline double dense_raster_query(const DenseGrid& data, const DenseGrid& mask) {
    if (data.nrows != mask.nrows || data.ncols != mask.ncols)
        throw input_error("dense_raster_query: matrix dimensions differ");
    double result = 0.0;
    for (std::int64_t i = 0; i < data.nrows; ++i)
        for (std::int64_t j = 0; j < data.ncols; ++j) result += data.at(i, j) * mask.at(i, j);
    return result;
}

}  // namespace cityscale
