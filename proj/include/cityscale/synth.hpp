#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cityscale/engine.hpp"
#include "cityscale/error.hpp"
#include "cityscale/geo.hpp"
#include "cityscale/grid.hpp"
#include "cityscale/ingest.hpp"
#include "cityscale/rng.hpp"

namespace cityscale {

struct SynthConfig {
    int n_cities = 100;
    double beta_true = 0.85;
    double y0 = 2.0;
    double noise_sigma = 0.1;
    std::uint64_t seed = 42;
};

struct CityTruth {
    std::string id;
    double n_pop = 0.0;
    double y_true = 0.0;
};

/// Deterministic desk-scale world: disjoint rectangular cities on a 0.05
/// degree grid, with per-city property totals drawn from Y = y0 * N^beta *
/// exp(eps) and spread over the city's cells. The point table re-expresses
/// the cell table at cell centers, so both query paths see the same world.
struct SynthWorld {
    SynthConfig config;
    std::vector<PolygonBoundary> boundaries;
    GridSpec spec;
    std::vector<CellRecord> cells;
    std::vector<PointRecord> points;
    std::vector<RasterizedCity> city_cells;  // aligned with boundaries
    std::vector<CityMeta> catalog;
    std::map<std::string, double> gdp;  // country -> GDP per capita
    std::vector<CityTruth> truth;
};

inline SynthWorld generate_synthetic_world(const SynthConfig& config) {
    // city slots on a 2-degree lattice; extents stay well inside a slot
    constexpr int kSlotCols = 180;
    constexpr int kSlotRows = 60;
    if (config.n_cities < 2) throw input_error("synth: n_cities must be >= 2");
    if (config.n_cities > kSlotCols * kSlotRows)
        throw input_error("synth: n_cities must be <= " + std::to_string(kSlotCols * kSlotRows));
    if (!(config.y0 > 0.0)) throw input_error("synth: y0 must be > 0");
    if (config.noise_sigma < 0.0) throw input_error("synth: noise_sigma must be >= 0");
    if (!std::isfinite(config.beta_true)) throw input_error("synth: beta_true must be finite");

    SynthWorld world;
    world.config = config;
    world.spec = GridSpec{90.0, -180.0, 0.05, 3600, 7200};

    const Rng root(config.seed);
    const int n_countries = std::clamp(config.n_cities / 40, 2, 24);
    Rng gdp_rng = root.fork("gdp");
    for (int k = 0; k < n_countries; ++k) {
        const std::string code = "C" + std::string(1, static_cast<char>('A' + k / 5)) +
                                 std::string(1, static_cast<char>('A' + k % 5));
        world.gdp[code] = std::floor(gdp_rng.uniform(800.0, 60000.0));
    }
    std::vector<std::string> countries;
    for (const auto& [code, value] : world.gdp) countries.push_back(code);

    char id_buf[16];
    for (int i = 0; i < config.n_cities; ++i) {
        Rng rng = root.fork("city", static_cast<std::uint64_t>(i));
        std::snprintf(id_buf, sizeof(id_buf), "city%05d", i);
        const std::string id(id_buf);

        const double slot_lat = 59.0 - 2.0 * (i / kSlotCols);
        const double slot_lon = -179.0 + 2.0 * (i % kSlotCols);
        const double center_lat = slot_lat + rng.uniform(-0.1, 0.1);
        const double center_lon = slot_lon + rng.uniform(-0.1, 0.1);
        const double half_h = rng.uniform(0.35, 0.85);
        const double half_w = rng.uniform(0.35, 0.85);
        const double lat0 = center_lat - half_h, lat1 = center_lat + half_h;
        const double lon0 = center_lon - half_w, lon1 = center_lon + half_w;
        PolygonBoundary boundary = make_boundary(
            id, "City " + std::to_string(i), countries[static_cast<std::size_t>(i) % countries.size()],
            {make_ring(std::vector<GeoPoint>{
                {lat0, lon0}, {lat0, lon1}, {lat1, lon1}, {lat1, lon0}})});

        std::vector<CellIndex> cells = rasterize_boundary(boundary, world.spec);
        if (cells.empty()) throw input_error("synth: internal error, city with no cells");

        const double n_pop = std::exp(rng.uniform(std::log(1e3), std::log(1e7)));
        const double y_total = config.y0 * std::pow(n_pop, config.beta_true) *
                               std::exp(config.noise_sigma * rng.normal());

        std::vector<double> weights(cells.size());
        double weight_sum = 0.0;
        for (double& w : weights) {
            w = rng.uniform(0.5, 1.5);
            weight_sum += w;
        }
        for (std::size_t c = 0; c < cells.size(); ++c)
            world.cells.push_back(CellRecord{cells[c], y_total * weights[c] / weight_sum});

        world.city_cells.push_back(RasterizedCity{id, std::move(cells)});
        world.catalog.push_back(CityMeta{id, boundary.name, boundary.country, n_pop,
                                         world.gdp.at(boundary.country)});
        world.truth.push_back(CityTruth{id, n_pop, y_total});
        world.boundaries.push_back(std::move(boundary));
    }

    world.points = cells_to_points(world.cells, world.spec);
    return world;
}

inline std::string write_truth_ledger_json(const SynthWorld& world) {
    nlohmann::json cities = nlohmann::json::array();
    for (const CityTruth& t : world.truth)
        cities.push_back({{"id", t.id}, {"n_pop", t.n_pop}, {"y_true", t.y_true}});
    nlohmann::json j{{"n_cities", world.config.n_cities},
                     {"beta_true", world.config.beta_true},
                     {"y0", world.config.y0},
                     {"noise_sigma", world.config.noise_sigma},
                     {"seed", world.config.seed},
                     {"cities", std::move(cities)}};
    return j.dump(2) + "\n";
}

/// Fixture directory contents as (file name, bytes) pairs.
inline std::vector<std::pair<std::string, std::string>> world_files(const SynthWorld& world) {
    return {{"boundaries.jsonl", write_boundary_catalog(world.boundaries)},
            {"points.csv", write_point_csv(world.points)},
            {"cells.csv", write_cell_csv(world.cells)},
            {"grid_spec.json", write_grid_spec_json(world.spec)},
            {"catalog.csv", write_city_catalog_csv(world.catalog)},
            {"gdp.csv", write_gdp_csv(world.gdp)},
            {"ledger.json", write_truth_ledger_json(world)}};
}

/// Writes the full fixture directory: boundaries.jsonl, points.csv,
/// cells.csv, grid_spec.json, catalog.csv, gdp.csv, ledger.json.
inline void write_world(const SynthWorld& world, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : world_files(world))
        write_text_file((std::filesystem::path(dir) / name).string(), content);
}

}  // namespace cityscale
