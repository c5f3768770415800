#include "arcade/grid_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include <nlohmann/json.hpp>

#include "arcade/errors.hpp"

namespace arcade {

namespace {

using json = nlohmann::json;

constexpr const char* kCsvHeader = "pci,rsrp_dbm,lat,lon,timestamp_ms,source,ue_token";

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, int line, const char* what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ParseError(line, std::string("bad ") + what + " value '" + s + "'");
    return v;
}

std::int64_t parse_i64(const std::string& s, int line, const char* what) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ParseError(line, std::string("bad ") + what + " value '" + s + "'");
    return v;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

std::vector<RawSample> read_samples_csv(std::istream& in) {
    std::vector<RawSample> samples;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            if (line != kCsvHeader)
                throw ParseError(lineno, "expected header '" + std::string(kCsvHeader) + "'");
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 7)
            throw ParseError(lineno, "expected 7 fields, got " + std::to_string(f.size()));
        RawSample s;
        const auto pci = parse_i64(f[0], lineno, "pci");
        if (pci < 0) throw ParseError(lineno, "pci must be >= 0");
        s.pci = static_cast<int>(pci);
        s.rsrp_dbm = parse_double(f[1], lineno, "rsrp_dbm");
        if (s.rsrp_dbm < -160.0 || s.rsrp_dbm > -20.0)
            throw ParseError(lineno, "rsrp_dbm " + f[1] + " outside [-160,-20]");
        if (f[2].empty() != f[3].empty())
            throw ParseError(lineno, "lat and lon must both be set or both empty");
        if (!f[2].empty()) {
            s.position = GeoPoint{parse_double(f[2], lineno, "lat"),
                                  parse_double(f[3], lineno, "lon")};
        }
        s.timestamp_ms = parse_i64(f[4], lineno, "timestamp_ms");
        try {
            s.source = source_from_string(f[5]);
        } catch (const ConfigError& e) {
            throw ParseError(lineno, e.what());
        }
        if (s.source != Source::MR && !s.position)
            throw ParseError(lineno, to_string(s.source) + " sample must have a position");
        s.ue_token = f[6];
        samples.push_back(std::move(s));
    }
    if (!header_seen) throw ParseError(1, "empty file, header missing");
    return samples;
}

std::vector<RawSample> read_samples_csv_file(const std::string& path) {
    auto in = open_in(path);
    return read_samples_csv(in);
}

void write_samples_csv(std::ostream& out, std::span<const RawSample> samples) {
    out << kCsvHeader << '\n';
    for (const RawSample& s : samples) {
        out << s.pci << ',' << format_double(s.rsrp_dbm) << ',';
        if (s.position)
            out << format_double(s.position->lat_deg) << ','
                << format_double(s.position->lon_deg);
        else
            out << ',';
        out << ',' << s.timestamp_ms << ',' << to_string(s.source) << ','
            << s.ue_token << '\n';
    }
}

void write_samples_csv_file(const std::string& path, std::span<const RawSample> samples) {
    auto out = open_out(path);
    write_samples_csv(out, samples);
}

CoverageGrid read_grid_json(std::istream& in) {
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("grid JSON: ") + e.what());
    }
    try {
        CoverageGrid grid;
        const auto& js = j.at("spec");
        grid.spec.origin = {js.at("origin_lat").get<double>(), js.at("origin_lon").get<double>()};
        grid.spec.cell_size_m = js.at("cell_size_m").get<double>();
        grid.spec.rows = js.at("rows").get<int>();
        grid.spec.cols = js.at("cols").get<int>();
        grid.spec.validate();
        grid.cells.resize(static_cast<std::size_t>(grid.spec.n_elements()));
        for (const auto& jc : j.at("cells")) {
            GridCoord c{jc.at("row").get<int>(), jc.at("col").get<int>()};
            if (c.row < 0 || c.row >= grid.spec.rows || c.col < 0 || c.col >= grid.spec.cols)
                throw ConfigError("grid JSON: cell coordinate out of range");
            const int count = jc.at("count").get<int>();
            if (count < 1) throw ConfigError("grid JSON: count must be >= 1");
            grid.cells[grid.spec.index_of(c)][jc.at("pci").get<int>()] =
                {jc.at("mean_rsrp_dbm").get<double>(), count};
        }
        return grid;
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("grid JSON: ") + e.what());
    }
}

CoverageGrid read_grid_json_file(const std::string& path) {
    auto in = open_in(path);
    return read_grid_json(in);
}

void write_grid_json(std::ostream& out, const CoverageGrid& grid) {
    json j;
    j["spec"] = {{"origin_lat", grid.spec.origin.lat_deg},
                 {"origin_lon", grid.spec.origin.lon_deg},
                 {"cell_size_m", grid.spec.cell_size_m},
                 {"rows", grid.spec.rows},
                 {"cols", grid.spec.cols}};
    json cells = json::array();
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        const GridCoord c = grid.spec.coord_of(static_cast<int>(i));
        for (const auto& [pci, stat] : grid.cells[i]) {
            cells.push_back({{"row", c.row},
                             {"col", c.col},
                             {"pci", pci},
                             {"mean_rsrp_dbm", stat.mean_rsrp_dbm},
                             {"count", stat.count}});
        }
    }
    j["cells"] = std::move(cells);
    out << j.dump(2) << '\n';
}

void write_grid_json_file(const std::string& path, const CoverageGrid& grid) {
    auto out = open_out(path);
    write_grid_json(out, grid);
}

}  // namespace arcade
