#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cityscale/csv.hpp"
#include "cityscale/error.hpp"
#include "cityscale/geo.hpp"
#include "cityscale/grid.hpp"

namespace cityscale {

/// One observation of the point-table representation: a location plus the
/// attribute value carried there.
struct PointRecord {
    GeoPoint location;
    double value = 0.0;
};

/// Road segment between two nodes; way_id is the source way it came from.
struct EdgeRecord {
    GeoPoint start;
    GeoPoint end;
    std::string way_id;
};

/// Per-city descriptive record used by the analysis layer.
struct CityMeta {
    std::string id;
    std::string name;
    std::string country;
    std::optional<double> population;      // N, when known
    std::optional<double> gdp_per_capita;  // country-level, USD
};

namespace detail {

inline std::string json_scalar_to_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_float()) return format_double(v.get<double>());
    return {};
}

inline GeoPoint coord_from_json(const nlohmann::json& pair, bool lon_first,
                                const std::string& where) {
    if (!pair.is_array() || pair.size() < 2 || !pair[0].is_number() || !pair[1].is_number())
        throw input_error(where + ": coordinate must be a numeric pair");
    const double first = pair[0].get<double>();
    const double second = pair[1].get<double>();
    const GeoPoint p = lon_first ? GeoPoint{second, first} : GeoPoint{first, second};
    require_valid_point(p, where);
    return p;
}

inline Ring ring_from_json(const nlohmann::json& arr, bool lon_first, const std::string& where) {
    if (!arr.is_array()) throw input_error(where + ": ring must be an array");
    if (arr.empty()) throw input_error(where + ": empty polygon");
    std::vector<GeoPoint> verts;
    verts.reserve(arr.size());
    for (const auto& pair : arr) verts.push_back(coord_from_json(pair, lon_first, where));
    try {
        return make_ring(verts);
    } catch (const input_error& e) {
        throw input_error(where + ": " + e.what());
    }
}

}  // namespace detail

/// Parses a GeoJSON FeatureCollection of Polygon / MultiPolygon features.
/// GeoJSON stores [lon, lat]; output is the internal (lat, lon) order. The
/// feature id comes from property "id", then "osm_id", then the feature
/// index rendered as text.
inline std::vector<PolygonBoundary> parse_boundary_geojson(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw input_error("boundary GeoJSON: malformed JSON");
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc["features"].is_array())
        throw input_error("boundary GeoJSON: expected a FeatureCollection with features");

    std::vector<PolygonBoundary> out;
    std::size_t index = 0;
    for (const auto& feature : doc["features"]) {
        std::string id = std::to_string(index);
        std::string name;
        std::string country;
        if (feature.contains("properties") && feature["properties"].is_object()) {
            const auto& props = feature["properties"];
            std::string from_props;
            if (props.contains("id")) from_props = detail::json_scalar_to_text(props["id"]);
            if (from_props.empty() && props.contains("osm_id"))
                from_props = detail::json_scalar_to_text(props["osm_id"]);
            if (!from_props.empty()) id = std::move(from_props);
            if (props.contains("name") && props["name"].is_string())
                name = props["name"].get<std::string>();
            if (props.contains("country") && props["country"].is_string())
                country = props["country"].get<std::string>();
        }
        const std::string where = "feature " + std::to_string(index) + " (id '" + id + "')";
        if (!feature.is_object() || !feature.contains("geometry") ||
            !feature["geometry"].is_object())
            throw input_error(where + ": missing geometry");
        const auto& geom = feature["geometry"];
        const std::string type = geom.value("type", "");
        if (!geom.contains("coordinates"))
            throw input_error(where + ": geometry has no coordinates");
        const auto& coords = geom["coordinates"];
        std::vector<Ring> rings;
        if (type == "Polygon") {
            for (const auto& ring : coords)
                rings.push_back(detail::ring_from_json(ring, /*lon_first=*/true, where));
        } else if (type == "MultiPolygon") {
            for (const auto& part : coords)
                for (const auto& ring : part)
                    rings.push_back(detail::ring_from_json(ring, /*lon_first=*/true, where));
        } else {
            throw input_error(where + ": unsupported geometry '" + type + "'");
        }
        out.push_back(make_boundary(std::move(id), std::move(name), std::move(country),
                                    std::move(rings)));
        ++index;
    }
    return out;
}

/// Parses the string form of a polygon: a JSON array of [lat, lon] pairs,
/// e.g. "[[35.29,-97.41],[35.31,-97.41],[35.31,-97.44]]".
inline Ring parse_polygon_string(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw input_error("polygon string: malformed JSON");
    return detail::ring_from_json(doc, /*lon_first=*/false, "polygon string");
}

struct AsciiGridData {
    GridSpec spec;
    std::vector<CellRecord> cells;  // NODATA cells omitted
    double nodata = 0.0;
};

/// Reads the plain-text grid format: six header lines (ncols, nrows,
/// xllcorner, yllcorner, cellsize, NODATA_value) followed by nrows rows of
/// ncols values, top row first.
inline AsciiGridData read_ascii_grid(std::istream& in) {
    LineReader reader(in);
    std::map<std::string, double> header;
    std::string line;
    for (int i = 0; i < 6; ++i) {
        if (!reader.next(line))
            throw input_error("ascii grid: truncated header at line " +
                              std::to_string(reader.line_no() + 1));
        std::istringstream ls(line);
        std::string key, value;
        if (!(ls >> key >> value))
            throw input_error("ascii grid line " + std::to_string(reader.line_no()) +
                              ": expected 'key value'");
        for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        header[key] = parse_double(value, "ascii grid line " + std::to_string(reader.line_no()));
    }
    for (const char* key : {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"})
        if (!header.count(key))
            throw input_error(std::string("ascii grid: missing header key '") + key + "'");

    if (header["ncols"] != std::floor(header["ncols"]) ||
        header["nrows"] != std::floor(header["nrows"]))
        throw input_error("ascii grid: ncols and nrows must be integers");
    const auto ncols = static_cast<std::int64_t>(header["ncols"]);
    const auto nrows = static_cast<std::int64_t>(header["nrows"]);
    const double cellsize = header["cellsize"];
    const double nodata = header["nodata_value"];
    GridSpec spec{header["yllcorner"] + static_cast<double>(nrows) * cellsize, header["xllcorner"],
                  cellsize, nrows, ncols};
    validate_grid(spec);

    AsciiGridData out{spec, {}, nodata};
    std::int64_t row = 0;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        if (row >= nrows)
            throw input_error("ascii grid line " + std::to_string(reader.line_no()) +
                              ": row count mismatch (expected " + std::to_string(nrows) + " rows)");
        std::istringstream ls(line);
        std::string token;
        std::int64_t col = 0;
        while (ls >> token) {
            if (col >= ncols)
                throw input_error("ascii grid line " + std::to_string(reader.line_no()) +
                                  ": column count mismatch (expected " + std::to_string(ncols) +
                                  " columns)");
            const double v =
                parse_double(token, "ascii grid line " + std::to_string(reader.line_no()));
            if (v != nodata) {
                if (!std::isfinite(v))
                    throw input_error("ascii grid line " + std::to_string(reader.line_no()) +
                                      ": non-finite cell value");
                out.cells.push_back(CellRecord{{row, col}, v});
            }
            ++col;
        }
        if (col != ncols)
            throw input_error("ascii grid line " + std::to_string(reader.line_no()) +
                              ": column count mismatch (expected " + std::to_string(ncols) +
                              " columns, got " + std::to_string(col) + ")");
        ++row;
    }
    if (row != nrows)
        throw input_error("ascii grid: row count mismatch (expected " + std::to_string(nrows) +
                          " rows, got " + std::to_string(row) + ")");
    return out;
}

/// Drops zero-valued cells, preserving order. The sparse table convention:
/// absent means zero.
inline std::vector<CellRecord> sparsify(std::span<const CellRecord> cells) {
    std::vector<CellRecord> out;
    out.reserve(cells.size());
    for (const CellRecord& c : cells)
        if (c.value != 0.0) out.push_back(c);
    return out;
}

struct EdgePoints {
    std::vector<PointRecord> points;
    std::size_t skipped = 0;  // antimeridian-crossing edges
};

/// Each edge becomes one point: location is the edge midpoint and the value
/// is the great-circle edge length in meters. Antimeridian-crossing edges
/// are skipped and counted.
inline EdgePoints edges_to_points(std::span<const EdgeRecord> edges) {
    EdgePoints out;
    out.points.reserve(edges.size());
    for (const EdgeRecord& e : edges) {
        if (std::fabs(e.start.lon - e.end.lon) >= 180.0) {
            ++out.skipped;
            continue;
        }
        out.points.push_back(PointRecord{midpoint(e.start, e.end), haversine_length(e.start, e.end)});
    }
    return out;
}

/// Cell records re-expressed as points at cell centers; how raster datasets
/// enter the vector query path.
inline std::vector<PointRecord> cells_to_points(std::span<const CellRecord> cells,
                                                const GridSpec& spec) {
    std::vector<PointRecord> out;
    out.reserve(cells.size());
    for (const CellRecord& c : cells) out.push_back(PointRecord{center_of(c.cell, spec), c.value});
    return out;
}

// ---------------------------------------------------------------------------
// Table file formats
// ---------------------------------------------------------------------------

inline void expect_header(std::string_view got, std::string_view want, const std::string& what) {
    if (trim(got) != want)
        throw input_error(what + ": expected header '" + std::string(want) + "', got '" +
                          std::string(trim(got)) + "'");
}

inline std::vector<PointRecord> read_point_csv(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw input_error("point table: empty file");
    expect_header(line, "lat,lon,value", "point table");
    std::vector<PointRecord> out;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        const std::string where = "point table line " + std::to_string(reader.line_no());
        const auto fields = split_csv(line);
        if (fields.size() != 3) throw input_error(where + ": expected 3 columns");
        PointRecord rec{{parse_double(fields[0], where), parse_double(fields[1], where)},
                        parse_double(fields[2], where)};
        require_valid_point(rec.location, where);
        if (!std::isfinite(rec.value)) throw input_error(where + ": non-finite value");
        out.push_back(rec);
    }
    return out;
}

inline std::string write_point_csv(std::span<const PointRecord> points) {
    std::string out = "lat,lon,value\n";
    for (const PointRecord& p : points) {
        out += format_degrees(p.location.lat);
        out += ',';
        out += format_degrees(p.location.lon);
        out += ',';
        out += format_double(p.value);
        out += '\n';
    }
    return out;
}

inline std::vector<CellRecord> read_cell_csv(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw input_error("cell table: empty file");
    expect_header(line, "row,col,value", "cell table");
    std::vector<CellRecord> out;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        const std::string where = "cell table line " + std::to_string(reader.line_no());
        const auto fields = split_csv(line);
        if (fields.size() != 3) throw input_error(where + ": expected 3 columns");
        CellRecord rec{{parse_i64(fields[0], where), parse_i64(fields[1], where)},
                       parse_double(fields[2], where)};
        if (rec.cell.row < 0 || rec.cell.col < 0) throw input_error(where + ": negative cell index");
        if (!std::isfinite(rec.value)) throw input_error(where + ": non-finite value");
        out.push_back(rec);
    }
    return out;
}

inline std::string write_cell_csv(std::span<const CellRecord> cells) {
    std::string out = "row,col,value\n";
    for (const CellRecord& c : cells) {
        out += std::to_string(c.cell.row);
        out += ',';
        out += std::to_string(c.cell.col);
        out += ',';
        out += format_double(c.value);
        out += '\n';
    }
    return out;
}

inline std::string write_grid_spec_json(const GridSpec& spec) {
    nlohmann::json j{{"top_lat", spec.top_lat},
                     {"left_lon", spec.left_lon},
                     {"cell_size", spec.cell_size},
                     {"nrows", spec.nrows},
                     {"ncols", spec.ncols}};
    return j.dump() + "\n";
}

inline GridSpec read_grid_spec_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw input_error("grid spec: malformed JSON");
    for (const char* key : {"top_lat", "left_lon", "cell_size", "nrows", "ncols"})
        if (!j.contains(key))
            throw input_error(std::string("grid spec: missing key '") + key + "'");
    GridSpec spec{j["top_lat"].get<double>(), j["left_lon"].get<double>(),
                  j["cell_size"].get<double>(), j["nrows"].get<std::int64_t>(),
                  j["ncols"].get<std::int64_t>()};
    validate_grid(spec);
    return spec;
}

inline std::vector<EdgeRecord> read_edge_csv(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw input_error("edge table: empty file");
    expect_header(line, "way_id,start_lat,start_lon,end_lat,end_lon", "edge table");
    std::vector<EdgeRecord> out;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        const std::string where = "edge table line " + std::to_string(reader.line_no());
        const auto fields = split_csv(line);
        if (fields.size() != 5) throw input_error(where + ": expected 5 columns");
        EdgeRecord rec{{parse_double(fields[1], where), parse_double(fields[2], where)},
                       {parse_double(fields[3], where), parse_double(fields[4], where)},
                       std::string(fields[0])};
        require_valid_point(rec.start, where);
        require_valid_point(rec.end, where);
        if (rec.start == rec.end) throw input_error(where + ": degenerate edge (start == end)");
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::map<std::string, double> read_gdp_csv(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw input_error("gdp table: empty file");
    expect_header(line, "country,gdp_per_capita", "gdp table");
    std::map<std::string, double> out;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        const std::string where = "gdp table line " + std::to_string(reader.line_no());
        const auto fields = split_csv(line);
        if (fields.size() != 2) throw input_error(where + ": expected 2 columns");
        const std::string country(fields[0]);
        if (country.empty()) throw input_error(where + ": empty country code");
        if (!out.emplace(country, parse_double(fields[1], where)).second)
            throw input_error(where + ": duplicate country '" + country + "'");
    }
    return out;
}

inline std::string write_gdp_csv(const std::map<std::string, double>& gdp) {
    std::string out = "country,gdp_per_capita\n";
    for (const auto& [country, value] : gdp) {
        out += country;
        out += ',';
        out += format_double(value);
        out += '\n';
    }
    return out;
}

/// Boundary catalog: JSON lines, one object per city with rings stored as
/// [lat, lon] pairs.
inline std::string write_boundary_catalog(std::span<const PolygonBoundary> boundaries) {
    std::string out;
    for (const PolygonBoundary& b : boundaries) {
        nlohmann::json rings = nlohmann::json::array();
        for (const Ring& r : b.rings) {
            nlohmann::json ring = nlohmann::json::array();
            for (const GeoPoint& p : r.vertices) ring.push_back({p.lat, p.lon});
            rings.push_back(std::move(ring));
        }
        nlohmann::json j{{"id", b.id}, {"name", b.name}, {"country", b.country},
                         {"rings", std::move(rings)}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

inline std::vector<PolygonBoundary> read_boundary_catalog(std::istream& in) {
    LineReader reader(in);
    std::string line;
    std::vector<PolygonBoundary> out;
    std::map<std::string, std::size_t> seen;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        const std::string where = "boundary catalog line " + std::to_string(reader.line_no());
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw input_error(where + ": malformed JSON");
        if (!j.contains("id") || !j["id"].is_string())
            throw input_error(where + ": missing string 'id'");
        if (!j.contains("rings") || !j["rings"].is_array() || j["rings"].empty())
            throw input_error(where + ": missing non-empty 'rings'");
        std::vector<Ring> rings;
        for (const auto& ring : j["rings"])
            rings.push_back(detail::ring_from_json(ring, /*lon_first=*/false, where));
        std::string id = j["id"].get<std::string>();
        if (!seen.emplace(id, reader.line_no()).second)
            throw input_error(where + ": duplicate boundary id '" + id + "'");
        out.push_back(make_boundary(std::move(id), j.value("name", ""), j.value("country", ""),
                                    std::move(rings)));
    }
    return out;
}

inline std::string write_city_catalog_csv(std::span<const CityMeta> catalog) {
    std::string out = "city_id,name,country,population,gdp_per_capita\n";
    for (const CityMeta& c : catalog) {
        out += c.id;
        out += ',';
        out += c.name;
        out += ',';
        out += c.country;
        out += ',';
        if (c.population) out += format_double(*c.population);
        out += ',';
        if (c.gdp_per_capita) out += format_double(*c.gdp_per_capita);
        out += '\n';
    }
    return out;
}

inline std::vector<CityMeta> read_city_catalog_csv(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw input_error("city catalog: empty file");
    expect_header(line, "city_id,name,country,population,gdp_per_capita", "city catalog");
    std::vector<CityMeta> out;
    std::map<std::string, std::size_t> seen;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        const std::string where = "city catalog line " + std::to_string(reader.line_no());
        const auto fields = split_csv(line);
        if (fields.size() != 5) throw input_error(where + ": expected 5 columns");
        CityMeta meta;
        meta.id = std::string(fields[0]);
        meta.name = std::string(fields[1]);
        meta.country = std::string(fields[2]);
        if (meta.id.empty()) throw input_error(where + ": empty city_id");
        if (!seen.emplace(meta.id, reader.line_no()).second)
            throw input_error(where + ": duplicate city_id '" + meta.id + "'");
        if (!fields[3].empty()) meta.population = parse_double(fields[3], where);
        if (!fields[4].empty()) meta.gdp_per_capita = parse_double(fields[4], where);
        out.push_back(std::move(meta));
    }
    return out;
}

/// One row of the analysis input: city with population N, property total Y,
/// and country code.
struct JoinedRow {
    std::string city_id;
    double population = 0.0;
    double property = 0.0;
    std::string country;
};

inline std::vector<JoinedRow> read_joined_csv(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw input_error("joined table: empty file");
    expect_header(line, "city_id,population,property,country", "joined table");
    std::vector<JoinedRow> out;
    while (reader.next(line)) {
        if (trim(line).empty()) continue;
        const std::string where = "joined table line " + std::to_string(reader.line_no());
        const auto fields = split_csv(line);
        if (fields.size() != 4) throw input_error(where + ": expected 4 columns");
        out.push_back(JoinedRow{std::string(fields[0]), parse_double(fields[1], where),
                                parse_double(fields[2], where), std::string(fields[3])});
    }
    return out;
}

inline std::string write_joined_csv(std::span<const JoinedRow> rows) {
    std::string out = "city_id,population,property,country\n";
    for (const JoinedRow& r : rows) {
        out += r.city_id;
        out += ',';
        out += format_double(r.population);
        out += ',';
        out += format_double(r.property);
        out += ',';
        out += r.country;
        out += '\n';
    }
    return out;
}

}  // namespace cityscale
