#include "arcade/grid.hpp"

#include <algorithm>
#include <set>

#include "arcade/errors.hpp"

namespace arcade {

std::string to_string(Source s) {
    switch (s) {
        case Source::MDT: return "MDT";
        case Source::MR: return "MR";
        case Source::DT: return "DT";
        case Source::SYNTH: return "SYNTH";
    }
    return "MDT";
}

Source source_from_string(const std::string& s) {
    if (s == "MDT") return Source::MDT;
    if (s == "MR") return Source::MR;
    if (s == "DT") return Source::DT;
    if (s == "SYNTH") return Source::SYNTH;
    throw ConfigError("unknown sample source: " + s);
}

std::vector<int> CoverageGrid::pcis() const {
    std::set<int> seen;
    for (const auto& cell : cells)
        for (const auto& [pci, _] : cell) seen.insert(pci);
    return {seen.begin(), seen.end()};
}

IngestResult ingest(const GridSpec& spec, std::span<const RawSample> samples) {
    spec.validate();
    IngestResult out;
    out.grid.spec = spec;
    out.grid.cells.resize(static_cast<std::size_t>(spec.n_elements()));

    // Collect contributing values per slot, then sum in sorted order: the
    // result is bit-identical under any permutation of the input.
    std::vector<std::map<int, std::vector<double>>> acc(out.grid.cells.size());
    for (const RawSample& s : samples) {
        if (!s.position) {
            ++out.skipped;
            continue;
        }
        auto coord = spec.project(*s.position);
        if (!coord) {
            ++out.skipped;
            continue;
        }
        acc[spec.index_of(*coord)][s.pci].push_back(s.rsrp_dbm);
        ++out.ingested;
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        for (auto& [pci, values] : acc[i]) {
            std::sort(values.begin(), values.end());
            double sum = 0.0;
            for (double v : values) sum += v;
            out.grid.cells[i][pci] = {sum / static_cast<double>(values.size()),
                                      static_cast<int>(values.size())};
        }
    }
    return out;
}

CoverageGrid merge(const CoverageGrid& a, const CoverageGrid& b) {
    if (a.spec.rows != b.spec.rows || a.spec.cols != b.spec.cols ||
        a.spec.cell_size_m != b.spec.cell_size_m)
        throw ConfigError("merge: grid specs differ");
    CoverageGrid out = a;
    for (std::size_t i = 0; i < b.cells.size(); ++i) {
        for (const auto& [pci, stat] : b.cells[i]) {
            auto it = out.cells[i].find(pci);
            if (it == out.cells[i].end()) {
                out.cells[i][pci] = stat;
            } else {
                const int n = it->second.count + stat.count;
                it->second.mean_rsrp_dbm =
                    (it->second.mean_rsrp_dbm * it->second.count +
                     stat.mean_rsrp_dbm * stat.count) / n;
                it->second.count = n;
            }
        }
    }
    return out;
}

SparseField field_of(const CoverageGrid& grid, int pci) {
    SparseField field;
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        auto it = grid.cells[i].find(pci);
        if (it != grid.cells[i].end() && it->second.count >= 1)
            field[static_cast<int>(i)] = it->second.mean_rsrp_dbm;
    }
    return field;
}

}  // namespace arcade
