// cityscale — partition-parallel polygon aggregation over point and raster
// tables, plus the urban-scaling analysis layer. Subcommands: ingest, query,
// fit, rank, synth, bench.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cityscale/bench.hpp"
#include "cityscale/csv.hpp"
#include "cityscale/engine.hpp"
#include "cityscale/error.hpp"
#include "cityscale/ingest.hpp"
#include "cityscale/scaling.hpp"
#include "cityscale/synth.hpp"

namespace {

using namespace cityscale;

/// All command outputs are staged in memory and written together at the
/// end; a failure mid-write removes every file this run created.
class OutputStager {
public:
    void stage(std::string path, std::string content) {
        files_.emplace_back(std::move(path), std::move(content));
    }

    void commit() {
        std::vector<std::string> written;
        try {
            for (const auto& [path, content] : files_) {
                write_text_file(path, content);
                written.push_back(path);
            }
        } catch (...) {
            for (const std::string& path : written) {
                std::error_code ec;
                std::filesystem::remove(path, ec);
            }
            throw;
        }
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open file: " + path);
    return in;
}

void emit(bool json_mode, const nlohmann::json& summary, const std::string& human) {
    if (json_mode)
        std::cout << summary.dump() << "\n";
    else
        std::cout << human << "\n";
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOptions {
    std::string format;
    std::string in_path;
    std::string out_path;
    std::string spec_out;
    bool drop_zeros = false;
    bool json = false;
};

void run_ingest(const IngestOptions& opt) {
    OutputStager stager;
    nlohmann::json summary{{"command", "ingest"}, {"format", opt.format}};
    std::string human;

    if (opt.format == "geojson-boundaries") {
        const auto boundaries = parse_boundary_geojson(read_text_file(opt.in_path));
        stager.stage(opt.out_path, write_boundary_catalog(boundaries));
        summary["boundaries"] = boundaries.size();
        human = "wrote " + std::to_string(boundaries.size()) + " boundaries to " + opt.out_path;
    } else if (opt.format == "ascii-grid") {
        if (opt.spec_out.empty())
            throw input_error("ingest --format ascii-grid requires --spec-out");
        auto in = open_input(opt.in_path);
        const AsciiGridData grid = read_ascii_grid(in);
        std::vector<CellRecord> cells = grid.cells;
        std::size_t dropped = 0;
        if (opt.drop_zeros) {
            const std::size_t before = cells.size();
            cells = sparsify(cells);
            dropped = before - cells.size();
        }
        stager.stage(opt.out_path, write_cell_csv(cells));
        stager.stage(opt.spec_out, write_grid_spec_json(grid.spec));
        summary["cells"] = cells.size();
        summary["zeros_dropped"] = dropped;
        human = "wrote " + std::to_string(cells.size()) + " cell records to " + opt.out_path +
                " (" + std::to_string(dropped) + " zeros dropped), spec to " + opt.spec_out;
    } else if (opt.format == "point-csv") {
        auto in = open_input(opt.in_path);
        const auto points = read_point_csv(in);
        stager.stage(opt.out_path, write_point_csv(points));
        summary["points"] = points.size();
        human = "wrote " + std::to_string(points.size()) + " point records to " + opt.out_path;
    } else if (opt.format == "edge-csv") {
        auto in = open_input(opt.in_path);
        const auto edges = read_edge_csv(in);
        const EdgePoints converted = edges_to_points(edges);
        stager.stage(opt.out_path, write_point_csv(converted.points));
        summary["points"] = converted.points.size();
        summary["edges_skipped"] = converted.skipped;
        human = "wrote " + std::to_string(converted.points.size()) + " point records to " +
                opt.out_path + " (skipped " + std::to_string(converted.skipped) +
                " antimeridian-crossing edges)";
    } else if (opt.format == "gdp-csv") {
        auto in = open_input(opt.in_path);
        const auto gdp = read_gdp_csv(in);
        stager.stage(opt.out_path, write_gdp_csv(gdp));
        summary["countries"] = gdp.size();
        human = "wrote " + std::to_string(gdp.size()) + " country records to " + opt.out_path;
    } else {
        throw input_error("unknown ingest format: " + opt.format);
    }

    stager.commit();
    emit(opt.json, summary, human);
}

// ---------------------------------------------------------------------------
// query
// ---------------------------------------------------------------------------

struct QueryOptions {
    std::string mode = "vector";
    std::string agg = "sum";
    std::string boundaries_path;
    std::string points_path;
    std::string cells_path;
    std::string grid_spec_path;
    std::string out_path;
    std::string stats_out;
    int partitions = 8;
    int workers = 0;  // 0 = hardware concurrency
    bool no_prefilter = false;
    bool json = false;
};

void run_query(const QueryOptions& opt) {
    auto bin = open_input(opt.boundaries_path);
    const auto boundaries = read_boundary_catalog(bin);

    QueryPlan plan;
    plan.mode = opt.mode == "raster" ? QueryMode::raster : QueryMode::vector;
    plan.aggregate = opt.agg == "count"  ? AggregateKind::count
                     : opt.agg == "mean" ? AggregateKind::mean
                                         : AggregateKind::sum;
    plan.partitions = opt.partitions;
    plan.workers = opt.workers ? opt.workers
                               : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    plan.bbox_prefilter = !opt.no_prefilter;

    QueryOutput output;
    if (plan.mode == QueryMode::vector) {
        if (opt.points_path.empty()) throw input_error("query --mode vector requires --points");
        auto pin = open_input(opt.points_path);
        const auto points = read_point_csv(pin);
        output = vector_polygon_query(points, boundaries, plan);
    } else {
        if (opt.cells_path.empty() || opt.grid_spec_path.empty())
            throw input_error("query --mode raster requires --cells and --grid-spec");
        auto cin_ = open_input(opt.cells_path);
        CellTable cells{read_grid_spec_json(read_text_file(opt.grid_spec_path)),
                        read_cell_csv(cin_)};
        const RasterizedCatalog rasterized = rasterize_catalog(boundaries, cells.spec);
        output = raster_polygon_query(cells, rasterized, plan);
    }

    OutputStager stager;
    stager.stage(opt.out_path, write_aggregate_csv(output.per_city));
    stager.stage(opt.stats_out, stats_to_json(output.stats, plan.mode));
    stager.commit();

    nlohmann::json summary{{"command", "query"},
                           {"mode", to_string(plan.mode)},
                           {"aggregate", opt.agg},
                           {"cities", output.per_city.size()},
                           {"rows_scanned", output.stats.rows_scanned},
                           {"rows_matched", output.stats.rows_matched},
                           {"wall_seconds", output.stats.wall_seconds},
                           {"busy_core_seconds", output.stats.busy_core_seconds}};
    emit(opt.json, summary,
         "aggregated " + std::to_string(output.stats.rows_scanned) + " rows into " +
             std::to_string(output.per_city.size()) + " cities (" + to_string(plan.mode) +
             " mode) in " + format_double(output.stats.wall_seconds) + " s");
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitOptions {
    std::string in_path;
    std::string aggregates_path;
    std::string catalog_path;
    std::string gdp_path;
    std::string out_path;
    std::string scatter_out;
    double min_gdp = -1.0;  // < 0 means no filter
    std::string country;
    bool json = false;
};

std::vector<JoinedRow> load_joined_rows(const FitOptions& opt) {
    if (!opt.in_path.empty()) {
        auto in = open_input(opt.in_path);
        return read_joined_csv(in);
    }
    if (opt.aggregates_path.empty() || opt.catalog_path.empty())
        throw input_error("fit requires --in, or --aggregates together with --catalog");
    auto ain = open_input(opt.aggregates_path);
    const auto aggregates = read_aggregate_csv(ain);
    auto kin = open_input(opt.catalog_path);
    const auto catalog = read_city_catalog_csv(kin);
    std::map<std::string, const CityMeta*> by_id;
    for (const CityMeta& m : catalog) by_id[m.id] = &m;
    std::vector<JoinedRow> rows;
    rows.reserve(aggregates.size());
    for (const AggregateRow& a : aggregates) {
        const auto it = by_id.find(a.city_id);
        if (it == by_id.end())
            throw input_error("fit: city '" + a.city_id + "' missing from catalog");
        rows.push_back(JoinedRow{a.city_id, it->second->population.value_or(0.0), a.sum,
                                 it->second->country});
    }
    return rows;
}

void run_fit(const FitOptions& opt) {
    const std::vector<JoinedRow> rows = load_joined_rows(opt);
    const ScreenedPoints screened = screen_scaling_points(rows);

    // city metadata for the cohort filters: country from the rows, GDP per
    // capita resolved from the gdp table (by country) when provided
    std::map<std::string, double> gdp;
    if (!opt.gdp_path.empty()) {
        auto gin = open_input(opt.gdp_path);
        gdp = read_gdp_csv(gin);
    }
    std::vector<CityMeta> catalog;
    catalog.reserve(rows.size());
    for (const JoinedRow& r : rows) {
        CityMeta meta{r.city_id, "", r.country, r.population, std::nullopt};
        const auto it = gdp.find(r.country);
        if (it != gdp.end()) meta.gdp_per_capita = it->second;
        catalog.push_back(std::move(meta));
    }

    std::vector<ScalingPoint> points = screened.points;
    std::size_t removed_by_country = 0;
    if (!opt.country.empty()) {
        const std::size_t before = points.size();
        points = filter_by_country(points, catalog, opt.country);
        removed_by_country = before - points.size();
    }
    std::size_t removed_by_gdp = 0;
    if (opt.min_gdp >= 0.0) {
        if (opt.gdp_path.empty()) throw input_error("fit --min-gdp requires --gdp");
        GdpFilterResult filtered = filter_by_gdp(points, catalog, opt.min_gdp);
        removed_by_gdp = filtered.removed.size();
        points = std::move(filtered.kept);
    }

    const FitResult fit = fit_power_law(points);

    OutputStager stager;
    stager.stage(opt.out_path, fit_to_json(fit, screened.n_excluded));
    if (!opt.scatter_out.empty()) stager.stage(opt.scatter_out, write_scatter_csv(points, fit));
    stager.commit();

    nlohmann::json summary{{"command", "fit"},
                           {"beta", fit.beta},
                           {"ci_low", fit.ci_low},
                           {"ci_high", fit.ci_high},
                           {"r2", fit.r2},
                           {"n_obs", fit.n_obs},
                           {"n_excluded", screened.n_excluded},
                           {"removed_by_country", removed_by_country},
                           {"removed_by_gdp", removed_by_gdp},
                           {"regime", to_string(classify_regime(fit))}};
    char line[160];
    std::snprintf(line, sizeof(line), "beta=%.6f ci=[%.6f, %.6f] r2=%.4f n=%d (%s)", fit.beta,
                  fit.ci_low, fit.ci_high, fit.r2, fit.n_obs,
                  to_string(classify_regime(fit)).c_str());
    emit(opt.json, summary, line);
}

// ---------------------------------------------------------------------------
// rank
// ---------------------------------------------------------------------------

struct RankOptions {
    std::string in_path;
    std::string gdp_path;
    std::string out_path;
    std::string hist_out;
    std::string corr_out;
    std::size_t k = 10;
    std::size_t hist_k = 100;
    bool json = false;
};

void run_rank(const RankOptions& opt) {
    auto in = open_input(opt.in_path);
    const auto rows = read_joined_csv(in);

    // per-capita property, computed at full precision before any logging
    std::vector<std::pair<std::string, double>> per_capita;
    std::map<std::string, const JoinedRow*> row_by_id;
    std::size_t skipped = 0;
    for (const JoinedRow& r : rows) {
        row_by_id[r.city_id] = &r;
        if (r.population > 0.0)
            per_capita.emplace_back(r.city_id, r.property / r.population);
        else
            ++skipped;
    }

    const auto lowest = bottom_k(per_capita, opt.k);
    std::string bottom_csv = "city_id,per_capita\n";
    for (const auto& [id, value] : lowest)
        bottom_csv += id + "," + format_double(value) + "\n";

    OutputStager stager;
    stager.stage(opt.out_path, bottom_csv);

    nlohmann::json summary{{"command", "rank"},
                           {"cities", per_capita.size()},
                           {"k", lowest.size()},
                           {"skipped_no_population", skipped}};

    if (!opt.hist_out.empty()) {
        const auto lowest_for_hist = bottom_k(per_capita, opt.hist_k);
        std::vector<std::pair<std::string, std::string>> city_countries;
        for (const auto& [id, value] : lowest_for_hist)
            city_countries.emplace_back(id, row_by_id.at(id)->country);
        std::string hist_csv = "country,count\n";
        for (const auto& [country, count] : country_histogram(city_countries))
            hist_csv += country + "," + std::to_string(count) + "\n";
        stager.stage(opt.hist_out, hist_csv);
        summary["hist_k"] = lowest_for_hist.size();
    }

    if (!opt.corr_out.empty()) {
        if (opt.gdp_path.empty()) throw input_error("rank --corr-out requires --gdp");
        auto gin = open_input(opt.gdp_path);
        const auto gdp = read_gdp_csv(gin);
        std::vector<double> x, y;
        std::size_t unmatched = 0;
        for (const auto& [id, value] : per_capita) {
            const auto it = gdp.find(row_by_id.at(id)->country);
            if (it == gdp.end() || !(it->second > 0.0) || !(value > 0.0)) {
                ++unmatched;
                continue;
            }
            x.push_back(it->second);
            y.push_back(value);
        }
        const Correlation corr = correlate_loglog(x, y);
        nlohmann::json corr_json{{"coefficient", corr.coefficient},
                                 {"r2", corr.r2},
                                 {"n", corr.n},
                                 {"skipped", unmatched}};
        stager.stage(opt.corr_out, corr_json.dump() + "\n");
        summary["correlation"] = corr.coefficient;
        summary["correlation_r2"] = corr.r2;
    }

    stager.commit();
    emit(opt.json, summary,
         "ranked " + std::to_string(per_capita.size()) + " cities, wrote bottom " +
             std::to_string(lowest.size()) + " to " + opt.out_path);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOptions {
    int cities = 100;
    double beta = 0.85;
    double sigma = 0.1;
    double y0 = 2.0;
    std::uint64_t seed = 42;
    std::string out_dir;
    bool json = false;
};

void run_synth(const SynthOptions& opt) {
    SynthConfig cfg{opt.cities, opt.beta, opt.y0, opt.sigma, opt.seed};
    const SynthWorld world = generate_synthetic_world(cfg);
    std::filesystem::create_directories(opt.out_dir);
    OutputStager stager;
    for (auto& [name, content] : world_files(world))
        stager.stage((std::filesystem::path(opt.out_dir) / name).string(), std::move(content));
    stager.commit();
    nlohmann::json summary{{"command", "synth"},
                           {"cities", world.boundaries.size()},
                           {"points", world.points.size()},
                           {"cells", world.cells.size()},
                           {"beta_true", cfg.beta_true},
                           {"seed", cfg.seed},
                           {"out", opt.out_dir}};
    emit(opt.json, summary,
         "wrote fixture with " + std::to_string(world.boundaries.size()) + " cities, " +
             std::to_string(world.cells.size()) + " cells to " + opt.out_dir);
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchOptions {
    BenchScenario scenario;
    std::string out_path;
    bool json = false;
};

void run_bench_cmd(const BenchOptions& opt) {
    const BenchReport report = run_bench(opt.scenario);
    const std::string table = bench_report_csv(report);
    if (!opt.out_path.empty()) {
        OutputStager stager;
        stager.stage(opt.out_path, table);
        stager.commit();
    }
    nlohmann::json summary{{"command", "bench"},
                           {"n_points", report.scenario.n_points},
                           {"n_cells", report.n_cells},
                           {"n_boundaries", report.scenario.n_boundaries},
                           {"repetitions", report.scenario.repetitions},
                           {"workers", report.workers},
                           {"vector_median_wall_seconds", report.vector_median_wall},
                           {"raster_median_wall_seconds", report.raster_median_wall},
                           {"vector_median_busy_core_seconds", report.vector_median_busy},
                           {"raster_median_busy_core_seconds", report.raster_median_busy}};
    if (opt.json)
        std::cout << summary.dump() << "\n";
    else
        std::cout << table;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cityscale: per-city aggregation over point/raster tables and scaling-law fits"};
    app.require_subcommand(1);

    IngestOptions ingest_opt;
    CLI::App* ingest = app.add_subcommand("ingest", "parse external data into canonical tables");
    ingest->add_option("--format", ingest_opt.format, "input format")
        ->required()
        ->check(CLI::IsMember(
            {"geojson-boundaries", "ascii-grid", "point-csv", "edge-csv", "gdp-csv"}));
    ingest->add_option("--in", ingest_opt.in_path, "input file")->required();
    ingest->add_option("--out", ingest_opt.out_path, "output table")->required();
    ingest->add_option("--spec-out", ingest_opt.spec_out, "grid spec sidecar (ascii-grid)");
    ingest->add_flag("--drop-zeros", ingest_opt.drop_zeros, "drop zero-valued cells");
    ingest->add_flag("--json", ingest_opt.json, "print a JSON summary line");

    QueryOptions query_opt;
    CLI::App* query = app.add_subcommand("query", "per-city aggregation over a table");
    query->add_option("--mode", query_opt.mode, "query path")
        ->required()
        ->check(CLI::IsMember({"vector", "raster"}));
    query->add_option("--agg", query_opt.agg, "aggregate kind")
        ->check(CLI::IsMember({"sum", "count", "mean"}));
    query->add_option("--boundaries", query_opt.boundaries_path, "boundary catalog (JSON lines)")
        ->required();
    query->add_option("--points", query_opt.points_path, "point table CSV (vector mode)");
    query->add_option("--cells", query_opt.cells_path, "cell table CSV (raster mode)");
    query->add_option("--grid-spec", query_opt.grid_spec_path, "grid spec JSON (raster mode)");
    query->add_option("--out", query_opt.out_path, "aggregate CSV output")->required();
    query->add_option("--stats-out", query_opt.stats_out, "stats JSON output")->required();
    query->add_option("--partitions", query_opt.partitions, "partition count")
        ->check(CLI::PositiveNumber);
    query->add_option("--workers", query_opt.workers, "worker count (0 = hardware)");
    query->add_flag("--no-prefilter", query_opt.no_prefilter, "disable the bbox prefilter");
    query->add_flag("--json", query_opt.json, "print a JSON summary line");

    FitOptions fit_opt;
    CLI::App* fit = app.add_subcommand("fit", "fit the scaling law Y = Y0 * N^beta");
    fit->add_option("--in", fit_opt.in_path, "joined CSV: city_id,population,property,country");
    fit->add_option("--aggregates", fit_opt.aggregates_path, "aggregate CSV from 'query'");
    fit->add_option("--catalog", fit_opt.catalog_path, "city catalog CSV");
    fit->add_option("--gdp", fit_opt.gdp_path, "country GDP table CSV");
    fit->add_option("--min-gdp", fit_opt.min_gdp, "keep countries with GDP per capita >= USD")
        ->check(CLI::NonNegativeNumber);
    fit->add_option("--country", fit_opt.country, "restrict to one country code");
    fit->add_option("--out", fit_opt.out_path, "fit JSON output")->required();
    fit->add_option("--scatter-out", fit_opt.scatter_out, "scatter CSV output");
    fit->add_flag("--json", fit_opt.json, "print a JSON summary line");

    RankOptions rank_opt;
    CLI::App* rank = app.add_subcommand("rank", "per-capita rankings and country histogram");
    rank->add_option("--in", rank_opt.in_path, "joined CSV: city_id,population,property,country")
        ->required();
    rank->add_option("--k", rank_opt.k, "bottom-k size")->check(CLI::PositiveNumber);
    rank->add_option("--hist-k", rank_opt.hist_k, "cities counted in the country histogram")
        ->check(CLI::PositiveNumber);
    rank->add_option("--out", rank_opt.out_path, "bottom-k CSV output")->required();
    rank->add_option("--hist-out", rank_opt.hist_out, "country histogram CSV output");
    rank->add_option("--gdp", rank_opt.gdp_path, "country GDP table CSV");
    rank->add_option("--corr-out", rank_opt.corr_out, "per-capita vs GDP correlation JSON");
    rank->add_flag("--json", rank_opt.json, "print a JSON summary line");

    SynthOptions synth_opt;
    CLI::App* synth = app.add_subcommand("synth", "generate a seeded synthetic world");
    synth->add_option("--cities", synth_opt.cities, "number of cities")->required();
    synth->add_option("--beta", synth_opt.beta, "true scaling exponent");
    synth->add_option("--sigma", synth_opt.sigma, "lognormal noise sigma");
    synth->add_option("--y0", synth_opt.y0, "normalization constant");
    synth->add_option("--seed", synth_opt.seed, "random seed");
    synth->add_option("--out", synth_opt.out_dir, "output directory")->required();
    synth->add_flag("--json", synth_opt.json, "print a JSON summary line");

    BenchOptions bench_opt;
    CLI::App* bench = app.add_subcommand("bench", "vector vs raster timing comparison");
    bench->add_option("--points", bench_opt.scenario.n_points, "point count");
    bench->add_option("--boundaries", bench_opt.scenario.n_boundaries, "boundary count");
    bench->add_option("--vertices", bench_opt.scenario.vertices_per_boundary,
                      "vertices per boundary");
    bench->add_option("--reps", bench_opt.scenario.repetitions, "repetitions per mode");
    bench->add_option("--partitions", bench_opt.scenario.partitions, "partition count");
    bench->add_option("--workers", bench_opt.scenario.workers, "worker count (0 = hardware)");
    bench->add_option("--seed", bench_opt.scenario.seed, "random seed");
    bench->add_option("--out", bench_opt.out_path, "also write the table to this CSV");
    bench->add_flag("--json", bench_opt.json, "print a JSON summary line");

    try {
        app.parse(argc, argv);
        if (ingest->parsed()) run_ingest(ingest_opt);
        if (query->parsed()) run_query(query_opt);
        if (fit->parsed()) run_fit(fit_opt);
        if (rank->parsed()) run_rank(rank_opt);
        if (synth->parsed()) run_synth(synth_opt);
        if (bench->parsed()) run_bench_cmd(bench_opt);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
