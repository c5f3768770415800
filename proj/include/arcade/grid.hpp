#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arcade/geo.hpp"

namespace arcade {

enum class Source { MDT, MR, DT, SYNTH };

std::string to_string(Source s);
Source source_from_string(const std::string& s);

struct RawSample {
    int pci = 0;
    double rsrp_dbm = -120.0;
    std::optional<GeoPoint> position;
    std::int64_t timestamp_ms = 0;
    Source source = Source::MDT;
    std::string ue_token;
};

struct CellStat {
    double mean_rsrp_dbm = 0.0;
    int count = 0;
};

// Element index -> mean RSRP for one PCI. Ordered map so iteration order is
// deterministic.
using SparseField = std::map<int, double>;

// One value per grid element, row-major, size rows*cols.
using DenseField = std::vector<double>;

// Immutable after ingest; safe to share across threads.
struct CoverageGrid {
    GridSpec spec;
    // One slot per grid element, each mapping pci -> aggregate.
    std::vector<std::map<int, CellStat>> cells;

    const std::map<int, CellStat>& at(const GridCoord& c) const {
        return cells[spec.index_of(c)];
    }
    std::vector<int> pcis() const;
};

struct IngestResult {
    CoverageGrid grid;
    std::size_t ingested = 0;
    std::size_t skipped = 0;  // samples without a position
};

IngestResult ingest(const GridSpec& spec, std::span<const RawSample> samples);

// Count-weighted mean merge of two grids over the same spec.
CoverageGrid merge(const CoverageGrid& a, const CoverageGrid& b);

SparseField field_of(const CoverageGrid& grid, int pci);

}  // namespace arcade
