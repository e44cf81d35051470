#include <catch2/catch.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cityscale/engine.hpp"
#include "cityscale/ingest.hpp"
#include "cityscale/synth.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cityscale;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
};

CmdResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out_file = dir / "_stdout.txt";
    const std::string command = "cd '" + dir.string() + "' && '" + CITYSCALE_CLI_PATH + "' " +
                                args + " > '" + out_file.string() + "' 2> _stderr.txt";
    const int status = std::system(command.c_str());
    CmdResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (fs::exists(out_file)) result.out = read_text_file(out_file.string());
    return result;
}

fs::path make_temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("cityscale_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

/// Cell-center world with small integer values: every sum is exactly
/// representable, so the golden aggregate CSV is byte-exact.
void write_integer_fixture(const fs::path& dir) {
    const GridSpec spec{10, 0, 0.5, 20, 20};
    std::vector<CellRecord> cells;
    Rng rng(404);
    for (std::int64_t r = 0; r < 20; ++r)
        for (std::int64_t c = 0; c < 20; ++c)
            if (rng.next_unit() < 0.6)
                cells.push_back({{r, c}, static_cast<double>(1 + rng.next_below(9))});
    const std::vector<PolygonBoundary> boundaries{
        make_boundary("alpha", "Alpha", "US",
                      {make_ring(std::vector<GeoPoint>{{1, 1}, {1, 6}, {6, 6}, {6, 1}})}),
        make_boundary("beta", "Beta", "CN",
                      {make_ring(std::vector<GeoPoint>{{4, 4}, {4, 9.5}, {9.5, 9.5}, {9.5, 4}})}),
        make_boundary("empty", "Empty", "UG",
                      {make_ring(std::vector<GeoPoint>{{-5, -5}, {-5, -4}, {-4, -4}, {-4, -5}})})};
    write_text_file((dir / "cells.csv").string(), write_cell_csv(cells));
    write_text_file((dir / "grid_spec.json").string(), write_grid_spec_json(spec));
    write_text_file((dir / "points.csv").string(), write_point_csv(cells_to_points(cells, spec)));
    write_text_file((dir / "boundaries.jsonl").string(), write_boundary_catalog(boundaries));
}

/// Single-threaded reference aggregates for the integer fixture, computed
/// with the naive double loop and plain summation.
std::string golden_aggregate_csv(const fs::path& dir) {
    std::ifstream bin(dir / "boundaries.jsonl");
    const auto boundaries = read_boundary_catalog(bin);
    std::ifstream pin(dir / "points.csv");
    const auto points = read_point_csv(pin);
    std::vector<oracles::PointValue> oracle_points;
    for (const auto& p : points) oracle_points.push_back({p.location, p.value});
    const auto expected = oracles::brute_force_vector_join(oracle_points, boundaries);
    std::vector<CityAggregate> rows;
    for (const auto& b : boundaries) {
        const auto& [sum, count] = expected.at(b.id);
        rows.push_back(CityAggregate{b.id, sum, count});
    }
    return write_aggregate_csv(rows);
}

}  // namespace

TEST_CASE("cli: synth is deterministic and honors the requested parameters") {
    const fs::path dir = make_temp_dir("synth");
    const std::string args = "synth --cities 12 --beta 0.9 --sigma 0.2 --seed 31 --y0 3.5";
    CHECK(run_cli(args + " --out w1 --json", dir).exit_code == 0);
    CHECK(run_cli(args + " --out w2", dir).exit_code == 0);
    for (const char* name : {"boundaries.jsonl", "points.csv", "cells.csv", "grid_spec.json",
                             "catalog.csv", "gdp.csv", "ledger.json"})
        CHECK(slurp(dir / "w1" / name) == slurp(dir / "w2" / name));

    const nlohmann::json ledger = nlohmann::json::parse(slurp(dir / "w1" / "ledger.json"));
    CHECK(ledger["beta_true"].get<double>() == 0.9);
    CHECK(ledger["noise_sigma"].get<double>() == 0.2);
    CHECK(ledger["seed"].get<std::uint64_t>() == 31);
    CHECK(ledger["cities"].size() == 12);
    fs::remove_all(dir);
}

TEST_CASE("cli: vector query matches the single-threaded oracle golden file") {
    const fs::path dir = make_temp_dir("golden");
    write_integer_fixture(dir);
    const std::string golden = golden_aggregate_csv(dir);

    const CmdResult res = run_cli(
        "query --mode vector --boundaries boundaries.jsonl --points points.csv "
        "--out agg.csv --stats-out stats.json --partitions 5 --workers 2",
        dir);
    REQUIRE(res.exit_code == 0);
    CHECK(slurp(dir / "agg.csv") == golden);

    const nlohmann::json stats = nlohmann::json::parse(slurp(dir / "stats.json"));
    CHECK(stats["mode"] == "vector");
    CHECK(stats["partitions"] == 5);
    CHECK(stats["workers"] == 2);
    CHECK(stats["rows_scanned"].get<std::uint64_t>() > 0);
    fs::remove_all(dir);
}

TEST_CASE("cli: raster query agrees with vector query on the fixture") {
    const fs::path dir = make_temp_dir("modes");
    write_integer_fixture(dir);
    REQUIRE(run_cli("query --mode vector --boundaries boundaries.jsonl --points points.csv "
                    "--out agg_v.csv --stats-out stats_v.json",
                    dir)
                .exit_code == 0);
    REQUIRE(run_cli("query --mode raster --boundaries boundaries.jsonl --cells cells.csv "
                    "--grid-spec grid_spec.json --out agg_r.csv --stats-out stats_r.json",
                    dir)
                .exit_code == 0);
    // integer fixture at cell centers: the two paths agree byte for byte
    CHECK(slurp(dir / "agg_v.csv") == slurp(dir / "agg_r.csv"));
    // the empty city is present and flagged
    CHECK_THAT(slurp(dir / "agg_v.csv"), Catch::Contains("empty,0,0,0,1"));
    fs::remove_all(dir);
}

TEST_CASE("cli: aggregate output is byte-identical across worker counts") {
    const fs::path dir = make_temp_dir("workers");
    write_integer_fixture(dir);
    const std::string base =
        "query --mode vector --boundaries boundaries.jsonl --points points.csv "
        "--stats-out stats.json --partitions 6 ";
    REQUIRE(run_cli(base + "--workers 1 --out w1.csv", dir).exit_code == 0);
    REQUIRE(run_cli(base + "--workers 2 --out w2.csv", dir).exit_code == 0);
    REQUIRE(run_cli(base + "--workers 8 --out w8.csv", dir).exit_code == 0);
    CHECK(slurp(dir / "w1.csv") == slurp(dir / "w2.csv"));
    CHECK(slurp(dir / "w1.csv") == slurp(dir / "w8.csv"));

    // idempotence: identical invocation, identical bytes
    REQUIRE(run_cli(base + "--workers 2 --out w2b.csv", dir).exit_code == 0);
    CHECK(slurp(dir / "w2.csv") == slurp(dir / "w2b.csv"));
    fs::remove_all(dir);
}

TEST_CASE("cli: ingest round-trips an ascii grid and edge table") {
    const fs::path dir = make_temp_dir("ingest");
    write_text_file((dir / "g.asc").string(),
                    "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n"
                    "1 0 2\n-9999 3 0\n");
    const CmdResult grid = run_cli(
        "ingest --format ascii-grid --in g.asc --out cells.csv --spec-out spec.json --drop-zeros "
        "--json",
        dir);
    REQUIRE(grid.exit_code == 0);
    const nlohmann::json summary = nlohmann::json::parse(grid.out);
    CHECK(summary["cells"] == 3);  // two zeros dropped, one NODATA skipped
    CHECK(summary["zeros_dropped"] == 2);
    std::ifstream cin_(dir / "cells.csv");
    CHECK(read_cell_csv(cin_).size() == 3);
    CHECK(read_grid_spec_json(slurp(dir / "spec.json")).nrows == 2);

    write_text_file((dir / "edges.csv").string(),
                    "way_id,start_lat,start_lon,end_lat,end_lon\n"
                    "w1,0,0,0,1\nw2,0,179.9,0,-179.9\n");
    const CmdResult edges = run_cli("ingest --format edge-csv --in edges.csv --out pts.csv", dir);
    REQUIRE(edges.exit_code == 0);
    CHECK_THAT(edges.out, Catch::Contains("skipped 1"));
    std::ifstream pin(dir / "pts.csv");
    CHECK(read_point_csv(pin).size() == 1);

    // geojson ingest feeds straight into query
    write_text_file((dir / "cities.geojson").string(),
                    R"({"type":"FeatureCollection","features":[{"type":"Feature",
                        "properties":{"id":"sq","name":"Square","country":"US"},
                        "geometry":{"type":"Polygon",
                        "coordinates":[[[0,0],[3,0],[3,3],[0,3],[0,0]]]}}]})");
    REQUIRE(run_cli("ingest --format geojson-boundaries --in cities.geojson --out b.jsonl", dir)
                .exit_code == 0);
    std::ifstream bin(dir / "b.jsonl");
    const auto boundaries = read_boundary_catalog(bin);
    REQUIRE(boundaries.size() == 1);
    CHECK(boundaries[0].id == "sq");
    fs::remove_all(dir);
}

TEST_CASE("cli: fit applies the gdp cohort filter") {
    const fs::path dir = make_temp_dir("fit");
    const fixtures::TwoCohortFixture fx = fixtures::two_cohort_fixture(808, 0.83);
    const auto rows = fixtures::to_joined_rows(fx);
    write_text_file((dir / "joined.csv").string(), write_joined_csv(rows));
    write_text_file((dir / "gdp.csv").string(),
                    "country,gdp_per_capita\nDEV,40000\nUND,1200\n");

    REQUIRE(run_cli("fit --in joined.csv --out all.json --scatter-out scatter.csv", dir)
                .exit_code == 0);
    REQUIRE(run_cli("fit --in joined.csv --gdp gdp.csv --min-gdp 3000 --out dev.json", dir)
                .exit_code == 0);
    const nlohmann::json all = nlohmann::json::parse(slurp(dir / "all.json"));
    const nlohmann::json dev = nlohmann::json::parse(slurp(dir / "dev.json"));
    CHECK(std::fabs(dev["beta"].get<double>() - 0.83) <
          std::fabs(all["beta"].get<double>() - 0.83));
    CHECK(dev["r2"].get<double>() > all["r2"].get<double>());
    CHECK(dev["n_obs"] == 400);

    // country filter composes the same way
    REQUIRE(run_cli("fit --in joined.csv --country DEV --out c.json", dir).exit_code == 0);
    const nlohmann::json by_country = nlohmann::json::parse(slurp(dir / "c.json"));
    CHECK(by_country["n_obs"] == 400);
    CHECK(by_country["beta"] == dev["beta"]);

    // scatter carries one row per fitted city plus header
    std::ifstream sc(dir / "scatter.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(sc, line)) ++lines;
    CHECK(lines == rows.size() + 1);
    fs::remove_all(dir);
}

TEST_CASE("cli: rank orders per-capita values with id tie-break") {
    const fs::path dir = make_temp_dir("rank");
    write_text_file((dir / "joined.csv").string(),
                    "city_id,population,property,country\n"
                    "a,100,1,X\nb,100,1,X\nc,10,5,Z\nd,0,9,Z\n");
    const CmdResult res =
        run_cli("rank --in joined.csv --k 2 --out bottom.csv --hist-out hist.csv --hist-k 3 --json",
                dir);
    REQUIRE(res.exit_code == 0);
    CHECK(slurp(dir / "bottom.csv") == "city_id,per_capita\na,0.01\nb,0.01\n");
    CHECK(slurp(dir / "hist.csv") == "country,count\nX,2\nZ,1\n");
    const nlohmann::json summary = nlohmann::json::parse(res.out);
    CHECK(summary["skipped_no_population"] == 1);
    fs::remove_all(dir);
}

TEST_CASE("cli: synth -> query -> fit pipeline recovers the planted exponent") {
    const fs::path dir = make_temp_dir("pipeline");
    REQUIRE(run_cli("synth --cities 80 --beta 0.85 --sigma 0.1 --seed 2718 --out w", dir)
                .exit_code == 0);
    REQUIRE(run_cli("query --mode raster --boundaries w/boundaries.jsonl --cells w/cells.csv "
                    "--grid-spec w/grid_spec.json --out agg.csv --stats-out stats.json",
                    dir)
                .exit_code == 0);
    REQUIRE(run_cli("fit --aggregates agg.csv --catalog w/catalog.csv --out fit.json", dir)
                .exit_code == 0);
    const nlohmann::json fit = nlohmann::json::parse(slurp(dir / "fit.json"));
    // planted exponent within the fitted 95% interval (the 2-sigma band)
    CHECK(fit["ci_low"].get<double>() <= 0.85);
    CHECK(0.85 <= fit["ci_high"].get<double>());
    CHECK(fit["n_obs"] == 80);

    // noiseless fixture: the pipeline reproduces the exponent exactly
    REQUIRE(run_cli("synth --cities 40 --beta 0.85 --sigma 0 --seed 99 --out w0", dir)
                .exit_code == 0);
    REQUIRE(run_cli("query --mode vector --boundaries w0/boundaries.jsonl --points w0/points.csv "
                    "--out agg0.csv --stats-out stats0.json",
                    dir)
                .exit_code == 0);
    REQUIRE(run_cli("fit --aggregates agg0.csv --catalog w0/catalog.csv --out fit0.json", dir)
                .exit_code == 0);
    const nlohmann::json fit0 = nlohmann::json::parse(slurp(dir / "fit0.json"));
    CHECK(std::fabs(fit0["beta"].get<double>() - 0.85) <= 1e-8);
    CHECK(fit0["r2"].get<double>() >= 1.0 - 1e-9);
    fs::remove_all(dir);
}

TEST_CASE("cli: exit codes distinguish user errors") {
    const fs::path dir = make_temp_dir("errors");
    CHECK(run_cli("ingest --format bogus --in a --out b", dir).exit_code == 1);
    CHECK(run_cli("query --mode vector --boundaries nope.jsonl --points p.csv --out a "
                  "--stats-out s",
                  dir)
              .exit_code == 1);
    CHECK(run_cli("fit --out f.json", dir).exit_code == 1);  // no input given
    CHECK(run_cli("synth --cities 1 --out w", dir).exit_code == 1);
    CHECK(run_cli("--help", dir).exit_code == 0);
    CHECK(run_cli("query --definitely-not-a-flag", dir).exit_code == 1);

    // failed ingest leaves no partial outputs behind
    write_text_file((dir / "bad.asc").string(), "ncols 2\nnrows 2\n");
    CHECK(run_cli("ingest --format ascii-grid --in bad.asc --out cells.csv --spec-out spec.json",
                  dir)
              .exit_code == 1);
    CHECK_FALSE(fs::exists(dir / "cells.csv"));
    CHECK_FALSE(fs::exists(dir / "spec.json"));
    fs::remove_all(dir);
}
