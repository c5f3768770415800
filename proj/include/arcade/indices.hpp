#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arcade/geo.hpp"
#include "arcade/simulator.hpp"  // DenseField

namespace arcade {

// Dense per-PCI fields over one grid; keys are PCIs.
using FieldMap = std::map<int, DenseField>;

struct ServiceMap {
    GridSpec spec;
    std::vector<int> best_pci;        // -1 where no cell is serviceable
    std::vector<double> best_rsrp;    // valid where best_pci >= 0
    std::vector<double> second_rsrp;  // NaN where no serviceable runner-up
};

// best = argmax over serviceable (>= t_serv) fields, ties to lowest PCI.
ServiceMap service_map(const FieldMap& fields, const GridSpec& spec, double t_serv);

struct CellIndices {
    double ci = 0.0;      // Coverage Index
    double isi = 0.0;     // Interference Source Index
    double iax = 0.0;     // Interference Affected Index
    double oi = 0.0;      // Overlap Index
    double cquali = 0.0;  // Cell Quality Index
};

struct IndexParams {
    double delta_db = 6.0;
    double t_serv = -110.0;
};

std::map<int, CellIndices> compute_indices(const FieldMap& fields, const ServiceMap& smap,
                                           const IndexParams& params);

// Victim-row convention: m[i][j] = fraction of i's dominance area where j is
// within delta_db of i. m[i][i] = 1.
struct CoverageMatrix {
    std::vector<int> pcis;
    Eigen::MatrixXd m;
};

CoverageMatrix coverage_matrix(const FieldMap& fields, const ServiceMap& smap,
                               double delta_db);

struct AnomalyParams {
    double t_serv = -110.0;
    int m_abn = 5;     // min fragment size, elements
    double k_os = 2.0; // overshoot distance factor vs principal radius
};

struct CellAnomaly {
    bool overshooter = false;
    bool fragmented = false;
    double score = 0.0;
};

std::map<int, CellAnomaly> detect_anomalies(const FieldMap& fields, const ServiceMap& smap,
                                            const GridSpec& spec,
                                            const AnomalyParams& params);

struct ReportParams {
    IndexParams index;
    AnomalyParams anomaly;
};

struct DiagnosisReport {
    ReportParams params;
    std::map<int, CellIndices> indices;
    std::map<int, CellAnomaly> anomalies;
    CoverageMatrix matrix;
    std::vector<int> ranking;  // PCIs by descending score, ties by CQualI then PCI

    std::string to_json_string() const;  // versioned schema, 2-space indent
    static DiagnosisReport from_json_string(const std::string& text);
};

DiagnosisReport build_report(const FieldMap& fields, const GridSpec& spec,
                             const ReportParams& params);

}  // namespace arcade
