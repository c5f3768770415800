#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "arcade/grid.hpp"

namespace arcade {

// Additive boost on a distance ring inside the boresight sector; the exact
// membership set is known, which makes detection scoring exact.
struct OvershootSpec {
    double boost_db = 0.0;
    double ring_inner_m = 0.0;
    double ring_outer_m = 0.0;
};

struct AzimuthErrorSpec {
    double delta_deg = 0.0;
};

struct PowerFaultSpec {
    double delta_db = 0.0;
};

using AnomalySpec = std::variant<OvershootSpec, AzimuthErrorSpec, PowerFaultSpec>;

struct CellConfig {
    int pci = 0;
    GeoPoint site;
    double azimuth_deg = 0.0;    // boresight bearing, clockwise from north
    double beamwidth_deg = 65.0; // 3 dB beamwidth
    double eirp_dbm = 43.0;
    double pl_exponent = 3.5;
    std::vector<AnomalySpec> anomalies;
};

struct EnvironmentConfig {
    GridSpec spec;
    std::vector<CellConfig> cells;
    double shadowing_sigma_db = 0.0;
    double noise_floor_dbm = -120.0;
    double measurement_sigma_db = 2.0;
    double outlier_rate = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    const CellConfig& cell(int pci) const;  // throws ConfigError if unknown
};

// Log-distance path loss (d0 = 10 m, PL0 = 60 dB) with a parabolic antenna
// pattern capped at 25 dB, anomaly terms, and seeded correlated shadowing.
// Clamped to [noise_floor, -20]. Deterministic for a fixed config.
DenseField ground_truth_field(const EnvironmentConfig& env, int pci);

// Same field with shadowing and anomaly terms suppressed (test hook).
DenseField ground_truth_field_nominal(const EnvironmentConfig& env, int pci);

std::vector<RawSample> sample_mdt(const EnvironmentConfig& env, int n_per_cell,
                                  std::uint64_t seed);

struct MrReportSet {
    std::string ue_id;
    std::vector<RawSample> samples;  // unpositioned, source = MR
    GeoPoint hidden_position;        // evaluation only, never fed to the pipeline
};

std::vector<MrReportSet> sample_mr(const EnvironmentConfig& env, int n_ue,
                                   int reports_per_ue, std::uint64_t seed);

EnvironmentConfig read_env_json_file(const std::string& path);
void write_env_json_file(const std::string& path, const EnvironmentConfig& env);

}  // namespace arcade
