#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "arcade/grid.hpp"

namespace arcade {

// Shortest decimal representation that round-trips exactly (std::to_chars).
std::string format_double(double v);

// samples CSV: header `pci,rsrp_dbm,lat,lon,timestamp_ms,source,ue_token`,
// UTF-8, LF line endings, '.' decimal separator. Empty lat/lon = unpositioned.
std::vector<RawSample> read_samples_csv(std::istream& in);
std::vector<RawSample> read_samples_csv_file(const std::string& path);
void write_samples_csv(std::ostream& out, std::span<const RawSample> samples);
void write_samples_csv_file(const std::string& path, std::span<const RawSample> samples);

// grid JSON: {"spec": {...}, "cells": [{row,col,pci,mean_rsrp_dbm,count}...]}
// cells sorted by (row, col, pci) so re-serialization is canonical.
CoverageGrid read_grid_json(std::istream& in);
CoverageGrid read_grid_json_file(const std::string& path);
void write_grid_json(std::ostream& out, const CoverageGrid& grid);
void write_grid_json_file(const std::string& path, const CoverageGrid& grid);

}  // namespace arcade
