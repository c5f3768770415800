#pragma once

#include <cmath>
#include <optional>

#include "arcade/errors.hpp"

namespace arcade {

inline constexpr double kMetersPerDegree = 111320.0;

struct GeoPoint {
    double lat_deg = 0.0;
    double lon_deg = 0.0;
};

struct GridCoord {
    int row = 0;
    int col = 0;

    friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

// Local east/north offset from the grid origin, in meters.
struct EastNorth {
    double east_m = 0.0;
    double north_m = 0.0;
};

// Georeferenced grid frame. Row 0 is the southernmost row, col 0 the
// westernmost column; element ownership is half-open [south,north)x[west,east).
// The projection is a local equirectangular flattening around the origin.
struct GridSpec {
    GeoPoint origin;
    double cell_size_m = 50.0;
    int rows = 1;
    int cols = 1;

    void validate() const {
        if (rows < 1 || cols < 1)
            throw ConfigError("GridSpec: rows and cols must be >= 1");
        if (!(cell_size_m > 0.0))
            throw ConfigError("GridSpec: cell_size_m must be > 0");
        if (origin.lat_deg < -90.0 || origin.lat_deg > 90.0 ||
            origin.lon_deg < -180.0 || origin.lon_deg > 180.0)
            throw ConfigError("GridSpec: origin out of geographic range");
    }

    double width_m() const { return cols * cell_size_m; }
    double height_m() const { return rows * cell_size_m; }
    int n_elements() const { return rows * cols; }

    EastNorth to_local(const GeoPoint& p) const {
        const double lat_scale = kMetersPerDegree;
        const double lon_scale = kMetersPerDegree * std::cos(origin.lat_deg * M_PI / 180.0);
        return {(p.lon_deg - origin.lon_deg) * lon_scale,
                (p.lat_deg - origin.lat_deg) * lat_scale};
    }

    GeoPoint to_geographic(const EastNorth& q) const {
        const double lat_scale = kMetersPerDegree;
        const double lon_scale = kMetersPerDegree * std::cos(origin.lat_deg * M_PI / 180.0);
        return {origin.lat_deg + q.north_m / lat_scale,
                origin.lon_deg + q.east_m / lon_scale};
    }

    std::optional<GridCoord> project_local(const EastNorth& q) const {
        const int col = static_cast<int>(std::floor(q.east_m / cell_size_m));
        const int row = static_cast<int>(std::floor(q.north_m / cell_size_m));
        if (row < 0 || row >= rows || col < 0 || col >= cols) return std::nullopt;
        return GridCoord{row, col};
    }

    std::optional<GridCoord> project(const GeoPoint& p) const {
        return project_local(to_local(p));
    }

    EastNorth center_local(const GridCoord& c) const {
        return {(c.col + 0.5) * cell_size_m, (c.row + 0.5) * cell_size_m};
    }

    GeoPoint center_of(const GridCoord& c) const {
        return to_geographic(center_local(c));
    }

    int index_of(const GridCoord& c) const { return c.row * cols + c.col; }
    GridCoord coord_of(int index) const { return {index / cols, index % cols}; }
};

}  // namespace arcade
