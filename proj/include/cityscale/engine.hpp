#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cityscale/csv.hpp"
#include "cityscale/error.hpp"
#include "cityscale/geo.hpp"
#include "cityscale/grid.hpp"
#include "cityscale/ingest.hpp"

namespace cityscale {

/// Mergeable per-polygon partial result. The mean is always derived as
/// sum/count downstream, never stored, so merging stays a two-field monoid.
struct CityAggregate {
    std::string city_id;
    double sum = 0.0;
    std::uint64_t count = 0;

    bool empty() const { return count == 0; }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

inline CityAggregate merge_aggregates(const CityAggregate& a, const CityAggregate& b) {
    if (a.city_id != b.city_id)
        throw input_error("merge_aggregates: city_id mismatch ('" + a.city_id + "' vs '" +
                          b.city_id + "')");
    return CityAggregate{a.city_id, a.sum + b.sum, a.count + b.count};
}

enum class QueryMode { vector, raster };

inline std::string to_string(QueryMode mode) {
    return mode == QueryMode::vector ? "vector" : "raster";
}

enum class AggregateKind { sum, count, mean };

/// Execution knobs for the single-machine emulation of the partitioned
/// cluster run: the table splits into `partitions` contiguous shards and at
/// most `workers` of them are processed concurrently.
struct QueryPlan {
    QueryMode mode = QueryMode::vector;
    AggregateKind aggregate = AggregateKind::sum;
    int partitions = 1;
    int workers = 1;
    bool bbox_prefilter = true;  // affects ExecStats only, never results
};

inline void validate_plan(const QueryPlan& plan) {
    if (plan.partitions < 1 || plan.workers < 1)
        throw input_error("query plan: partitions and workers must be >= 1");
}

/// Run accounting. busy_core_seconds sums the per-partition processing
/// times across workers; divided by 60 it is the core x min analogue.
struct ExecStats {
    double wall_seconds = 0.0;
    double busy_core_seconds = 0.0;
    std::uint64_t rows_scanned = 0;
    std::uint64_t rows_matched = 0;
    int partitions = 1;
    int workers = 1;
};

inline std::string stats_to_json(const ExecStats& stats, QueryMode mode) {
    nlohmann::json j{{"wall_seconds", stats.wall_seconds},
                     {"busy_core_seconds", stats.busy_core_seconds},
                     {"rows_scanned", stats.rows_scanned},
                     {"rows_matched", stats.rows_matched},
                     {"partitions", stats.partitions},
                     {"workers", stats.workers},
                     {"mode", to_string(mode)}};
    return j.dump() + "\n";
}

/// Compensated (Kahan) summation; keeps per-partition sums reproducible and
/// well below the 1e-9 relative tolerances.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }

    double value() const { return sum; }
};

struct PartialAggregate {
    KahanSum sum;
    std::uint64_t count = 0;

    void add(double value) {
        sum.add(value);
        ++count;
    }
};

struct QueryOutput {
    std::vector<CityAggregate> per_city;  // aligned with the input city order
    ExecStats stats;
};

namespace detail {

struct PartitionOutcome {
    std::vector<PartialAggregate> per_city;
    std::uint64_t rows_matched = 0;
    double busy_seconds = 0.0;
};

/// Shared partition driver: contiguous shards, a worker pool of identical
/// threads, and a single-threaded merge in ascending partition order so the
/// final float sums are deterministic for a fixed partition count.
template <typename MapRange>
QueryOutput run_partitioned(std::uint64_t row_count, std::span<const std::string> city_ids,
                            const QueryPlan& plan, MapRange&& map_range) {
    validate_plan(plan);
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n_partitions = static_cast<std::size_t>(plan.partitions);
    std::vector<PartitionOutcome> outcomes(n_partitions);

    const auto run_one = [&](std::size_t p) {
        const auto start = std::chrono::steady_clock::now();
        PartitionOutcome& out = outcomes[p];
        out.per_city.assign(city_ids.size(), PartialAggregate{});
        const std::uint64_t begin = row_count * p / n_partitions;
        const std::uint64_t end = row_count * (p + 1) / n_partitions;
        map_range(begin, end, out);
        out.busy_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                               .count();
    };

    if (plan.workers == 1) {
        for (std::size_t p = 0; p < n_partitions; ++p) run_one(p);
    } else {
        std::atomic<std::size_t> next{0};
        const std::size_t n_threads =
            std::min<std::size_t>(static_cast<std::size_t>(plan.workers), n_partitions);
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t p = next.fetch_add(1);
                    if (p >= n_partitions) break;
                    run_one(p);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    QueryOutput out;
    out.per_city.reserve(city_ids.size());
    for (const std::string& id : city_ids) out.per_city.push_back(CityAggregate{id, 0.0, 0});
    for (const PartitionOutcome& pc : outcomes) {
        for (std::size_t c = 0; c < city_ids.size(); ++c) {
            out.per_city[c].sum += pc.per_city[c].sum.value();
            out.per_city[c].count += pc.per_city[c].count;
        }
        out.stats.rows_matched += pc.rows_matched;
        out.stats.busy_core_seconds += pc.busy_seconds;
    }
    out.stats.rows_scanned = row_count;
    out.stats.partitions = plan.partitions;
    out.stats.workers = plan.workers;
    out.stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

inline std::vector<std::string> city_ids_of(std::span<const PolygonBoundary> boundaries) {
    std::vector<std::string> ids;
    ids.reserve(boundaries.size());
    for (const PolygonBoundary& b : boundaries) ids.push_back(b.id);
    return ids;
}

}  // namespace detail

/// Vector path: per boundary, aggregate every point that passes the
/// even-odd containment test, with a bbox prefilter ahead of it. A point
/// inside k overlapping boundaries contributes to all k. Results are
/// identical for any partitions/workers combination up to float summation
/// order across partition counts.
inline QueryOutput vector_polygon_query(std::span<const PointRecord> points,
                                        std::span<const PolygonBoundary> boundaries,
                                        const QueryPlan& plan) {
    if (plan.mode != QueryMode::vector)
        throw input_error("vector_polygon_query: plan mode is not 'vector'");
    const std::vector<std::string> ids = detail::city_ids_of(boundaries);
    const bool prefilter = plan.bbox_prefilter;
    return detail::run_partitioned(
        points.size(), ids, plan,
        [&](std::uint64_t begin, std::uint64_t end, detail::PartitionOutcome& out) {
            for (std::uint64_t row = begin; row < end; ++row) {
                const PointRecord& pt = points[row];
                bool matched = false;
                for (std::size_t c = 0; c < boundaries.size(); ++c) {
                    if (prefilter && !boundaries[c].bbox.contains(pt.location)) continue;
                    if (point_in_boundary(pt.location, boundaries[c])) {
                        out.per_city[c].add(pt.value);
                        matched = true;
                    }
                }
                if (matched) ++out.rows_matched;
            }
        });
}

struct CellTable {
    GridSpec spec;
    std::vector<CellRecord> records;
};

struct RasterizedCity {
    std::string city_id;
    std::vector<CellIndex> cells;
};

/// Per-city binary masks on a shared grid, the build side of the raster
/// equi-join.
struct RasterizedCatalog {
    GridSpec spec;
    std::vector<RasterizedCity> cities;
};

inline RasterizedCatalog rasterize_catalog(std::span<const PolygonBoundary> boundaries,
                                           const GridSpec& spec) {
    validate_grid(spec);
    RasterizedCatalog out{spec, {}};
    out.cities.reserve(boundaries.size());
    for (const PolygonBoundary& b : boundaries)
        out.cities.push_back(RasterizedCity{b.id, rasterize_boundary(b, spec)});
    return out;
}

/// Raster path: an equi-join of cell records against the per-city cell sets
/// on (row, col), hash-built from the city sets (the smaller relation).
inline QueryOutput raster_polygon_query(const CellTable& cells, const RasterizedCatalog& rasterized,
                                        const QueryPlan& plan) {
    if (plan.mode != QueryMode::raster)
        throw input_error("raster_polygon_query: plan mode is not 'raster'");
    if (!(cells.spec == rasterized.spec))
        throw input_error("raster_polygon_query: cell table and rasterized boundaries use "
                          "different grid specs");

    const GridSpec& spec = cells.spec;
    const auto key_of = [&spec](const CellIndex& c) {
        return static_cast<std::uint64_t>(c.row) * static_cast<std::uint64_t>(spec.ncols) +
               static_cast<std::uint64_t>(c.col);
    };

    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> build;
    std::vector<std::string> ids;
    ids.reserve(rasterized.cities.size());
    for (std::size_t c = 0; c < rasterized.cities.size(); ++c) {
        ids.push_back(rasterized.cities[c].city_id);
        for (const CellIndex& cell : rasterized.cities[c].cells) {
            if (!in_bounds(cell, spec))
                throw input_error("raster_polygon_query: rasterized cell out of grid bounds");
            build[key_of(cell)].push_back(static_cast<std::uint32_t>(c));
        }
    }

    for (const CellRecord& rec : cells.records)
        if (!in_bounds(rec.cell, spec))
            throw input_error("raster_polygon_query: cell record (" + std::to_string(rec.cell.row) +
                              ", " + std::to_string(rec.cell.col) + ") out of grid bounds");

    return detail::run_partitioned(
        cells.records.size(), ids, plan,
        [&](std::uint64_t begin, std::uint64_t end, detail::PartitionOutcome& out) {
            for (std::uint64_t row = begin; row < end; ++row) {
                const CellRecord& rec = cells.records[row];
                const auto hit = build.find(key_of(rec.cell));
                if (hit == build.end()) continue;
                for (const std::uint32_t c : hit->second) out.per_city[c].add(rec.value);
                ++out.rows_matched;
            }
        });
}

/// Aggregate output table: one row per city in catalog order, zero-match
/// cities included and flagged.
inline std::string write_aggregate_csv(std::span<const CityAggregate> aggregates) {
    std::string out = "city_id,sum,count,mean,empty_flag\n";
    for (const CityAggregate& a : aggregates) {
        out += a.city_id;
        out += ',';
        out += format_double(a.sum);
        out += ',';
        out += std::to_string(a.count);
        out += ',';
        out += format_double(a.mean());
        out += ',';
        out += a.empty() ? '1' : '0';
        out += '\n';
    }
    return out;
}

struct AggregateRow {
    std::string city_id;
    double sum = 0.0;
    std::uint64_t count = 0;
    double mean = 0.0;
    bool empty_flag = false;
};

inline std::vector<AggregateRow> read_aggregate_csv(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw input_error("aggregate table: empty file");
    expect_header(line, "city_id,sum,count,mean,empty_flag", "aggregate table");
    std::vector<AggregateRow> out;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        const std::string where = "aggregate table line " + std::to_string(reader.line_no());
        const auto fields = split_csv(line);
        if (fields.size() != 5) throw input_error(where + ": expected 5 columns");
        AggregateRow row;
        row.city_id = std::string(fields[0]);
        row.sum = parse_double(fields[1], where);
        row.count = static_cast<std::uint64_t>(parse_i64(fields[2], where));
        row.mean = parse_double(fields[3], where);
        row.empty_flag = parse_i64(fields[4], where) != 0;
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace cityscale
