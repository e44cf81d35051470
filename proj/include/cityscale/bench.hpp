#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "cityscale/engine.hpp"
#include "cityscale/error.hpp"
#include "cityscale/rng.hpp"

namespace cityscale {

/// Synthetic workload knobs for the vector-vs-raster timing comparison.
/// Both modes answer the same polygon queries over the same underlying
/// world: the raster side sees the points binned into grid cells.
struct BenchScenario {
    std::size_t n_points = 1'000'000;
    std::size_t n_boundaries = 200;
    std::size_t vertices_per_boundary = 128;
    int repetitions = 5;
    int partitions = 8;
    int workers = 0;  // 0 = hardware concurrency
    std::uint64_t seed = 7;
};

struct BenchRow {
    QueryMode mode = QueryMode::vector;
    int repetition = 0;
    double wall_seconds = 0.0;
    double busy_core_seconds = 0.0;
};

struct BenchReport {
    BenchScenario scenario;
    int workers = 1;
    std::size_t n_cells = 0;  // non-empty cells after binning
    std::vector<BenchRow> rows;
    double vector_median_wall = 0.0;
    double raster_median_wall = 0.0;
    double vector_median_busy = 0.0;
    double raster_median_busy = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Star polygon: sorted angles with jittered radii, so it is simple but
/// has the vertex count the scenario demands.
inline PolygonBoundary bench_boundary(Rng& rng, std::size_t index, std::size_t n_vertices) {
    const double center_lat = rng.uniform(6.0, 34.0);
    const double center_lon = rng.uniform(6.0, 34.0);
    const double base_radius = rng.uniform(1.0, 2.5);
    std::vector<double> angles(n_vertices);
    for (double& a : angles) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::sort(angles.begin(), angles.end());
    std::vector<GeoPoint> verts;
    verts.reserve(n_vertices);
    for (const double a : angles) {
        const double r = base_radius * rng.uniform(0.55, 1.0);
        verts.push_back(GeoPoint{center_lat + r * std::sin(a), center_lon + r * std::cos(a)});
    }
    return make_boundary("b" + std::to_string(index), "", "", {make_ring(verts)});
}

}  // namespace detail

inline BenchReport run_bench(const BenchScenario& scenario) {
    if (scenario.n_points < 1 || scenario.n_boundaries < 1 || scenario.repetitions < 1 ||
        scenario.vertices_per_boundary < 3 || scenario.partitions < 1 || scenario.workers < 0)
        throw input_error("bench: invalid scenario");

    BenchReport report;
    report.scenario = scenario;
    report.workers = scenario.workers ? scenario.workers
                                      : std::max(1u, std::thread::hardware_concurrency());

    const Rng root(scenario.seed);
    const GridSpec spec{40.0, 0.0, 0.05, 800, 800};

    // points uniform over the region, then binned into cells for the raster side
    std::vector<PointRecord> points;
    points.reserve(scenario.n_points);
    Rng point_rng = root.fork("points");
    for (std::size_t i = 0; i < scenario.n_points; ++i)
        points.push_back(PointRecord{{point_rng.uniform(0.0, 40.0), point_rng.uniform(0.0, 40.0)},
                                     point_rng.uniform(0.0, 100.0)});

    std::unordered_map<std::uint64_t, double> bins;
    bins.reserve(scenario.n_points);
    for (const PointRecord& p : points) {
        const CellIndex c = cell_of(p.location, spec);
        bins[static_cast<std::uint64_t>(c.row) * 800 + static_cast<std::uint64_t>(c.col)] +=
            p.value;
    }
    CellTable cells{spec, {}};
    cells.records.reserve(bins.size());
    for (const auto& [key, value] : bins)
        cells.records.push_back(CellRecord{{static_cast<std::int64_t>(key / 800),
                                            static_cast<std::int64_t>(key % 800)},
                                           value});
    std::sort(cells.records.begin(), cells.records.end(),
              [](const CellRecord& a, const CellRecord& b) { return a.cell < b.cell; });
    report.n_cells = cells.records.size();

    Rng boundary_rng = root.fork("boundaries");
    std::vector<PolygonBoundary> boundaries;
    boundaries.reserve(scenario.n_boundaries);
    for (std::size_t i = 0; i < scenario.n_boundaries; ++i)
        boundaries.push_back(
            detail::bench_boundary(boundary_rng, i, scenario.vertices_per_boundary));

    // boundary rasterization is query preparation, not query execution
    const RasterizedCatalog rasterized = rasterize_catalog(boundaries, spec);

    QueryPlan vector_plan{QueryMode::vector, AggregateKind::sum, scenario.partitions,
                          report.workers, true};
    QueryPlan raster_plan = vector_plan;
    raster_plan.mode = QueryMode::raster;

    std::vector<double> vector_wall, raster_wall, vector_busy, raster_busy;
    for (int rep = 0; rep < scenario.repetitions; ++rep) {
        const ExecStats vstats = vector_polygon_query(points, boundaries, vector_plan).stats;
        report.rows.push_back(
            BenchRow{QueryMode::vector, rep, vstats.wall_seconds, vstats.busy_core_seconds});
        vector_wall.push_back(vstats.wall_seconds);
        vector_busy.push_back(vstats.busy_core_seconds);

        const ExecStats rstats = raster_polygon_query(cells, rasterized, raster_plan).stats;
        report.rows.push_back(
            BenchRow{QueryMode::raster, rep, rstats.wall_seconds, rstats.busy_core_seconds});
        raster_wall.push_back(rstats.wall_seconds);
        raster_busy.push_back(rstats.busy_core_seconds);
    }
    report.vector_median_wall = detail::median(vector_wall);
    report.raster_median_wall = detail::median(raster_wall);
    report.vector_median_busy = detail::median(vector_busy);
    report.raster_median_busy = detail::median(raster_busy);
    return report;
}

inline std::string bench_report_csv(const BenchReport& report) {
    std::string out = "mode,repetition,wall_seconds,busy_core_seconds\n";
    for (const BenchRow& row : report.rows) {
        out += to_string(row.mode);
        out += ',';
        out += std::to_string(row.repetition);
        out += ',';
        out += format_double(row.wall_seconds);
        out += ',';
        out += format_double(row.busy_core_seconds);
        out += '\n';
    }
    out += "vector,median," + format_double(report.vector_median_wall) + ',' +
           format_double(report.vector_median_busy) + '\n';
    out += "raster,median," + format_double(report.raster_median_wall) + ',' +
           format_double(report.raster_median_busy) + '\n';
    return out;
}

}  // namespace cityscale
