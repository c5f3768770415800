#include "arcade/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "arcade/errors.hpp"
#include "arcade/rng.hpp"

namespace arcade {

namespace {

using json = nlohmann::json;

constexpr double kRefDistanceM = 10.0;
constexpr double kRefLossDb = 60.0;
constexpr double kPatternFloorDb = 25.0;
constexpr double kMaxRsrpDbm = -20.0;
constexpr int kMrStrongestK = 8;

double wrap_deg(double d) {
    while (d > 180.0) d -= 360.0;
    while (d < -180.0) d += 360.0;
    return d;
}

// Grid-sampled N(0, sigma^2) field smoothed by a 3x3 box filter. The smoothed
// interior is rescaled by 3 so the per-element std stays ~sigma.
DenseField shadowing_field(const GridSpec& spec, double sigma, std::uint64_t seed) {
    const int n = spec.n_elements();
    DenseField raw(static_cast<std::size_t>(n));
    Rng rng(seed);
    for (double& v : raw) v = rng.normal();
    DenseField out(static_cast<std::size_t>(n), 0.0);
    if (sigma <= 0.0) return out;
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            double sum = 0.0;
            int cnt = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= spec.rows || cc < 0 || cc >= spec.cols) continue;
                    sum += raw[rr * spec.cols + cc];
                    ++cnt;
                }
            }
            out[r * spec.cols + c] = sigma * 3.0 * sum / cnt;
        }
    }
    return out;
}

DenseField field_impl(const EnvironmentConfig& env, int pci, bool with_shadowing,
                      bool with_anomalies) {
    const CellConfig& cell = env.cell(pci);
    const GridSpec& spec = env.spec;

    double azimuth = cell.azimuth_deg;
    double eirp = cell.eirp_dbm;
    const OvershootSpec* overshoot = nullptr;
    if (with_anomalies) {
        for (const AnomalySpec& a : cell.anomalies) {
            if (const auto* az = std::get_if<AzimuthErrorSpec>(&a)) azimuth += az->delta_deg;
            if (const auto* pf = std::get_if<PowerFaultSpec>(&a)) eirp += pf->delta_db;
            if (const auto* ov = std::get_if<OvershootSpec>(&a)) overshoot = ov;
        }
    }

    const EastNorth site = spec.to_local(cell.site);
    DenseField shadow;
    if (with_shadowing && env.shadowing_sigma_db > 0.0)
        shadow = shadowing_field(spec, env.shadowing_sigma_db,
                                 derive_seed(env.seed, 0x5AD0 + static_cast<std::uint64_t>(pci)));

    DenseField out(static_cast<std::size_t>(spec.n_elements()));
    for (int i = 0; i < spec.n_elements(); ++i) {
        const EastNorth p = spec.center_local(spec.coord_of(i));
        const double de = p.east_m - site.east_m;
        const double dn = p.north_m - site.north_m;
        const double d = std::hypot(de, dn);
        const double bearing = std::atan2(de, dn) * 180.0 / M_PI;
        const double dtheta = wrap_deg(bearing - azimuth);
        const double path_loss =
            kRefLossDb + 10.0 * cell.pl_exponent *
                             std::log10(std::max(d, kRefDistanceM) / kRefDistanceM);
        // Inside the reference distance the bearing is near-field noise;
        // suppress the pattern term so the site element is exactly eirp - PL0.
        const double pattern =
            d < kRefDistanceM
                ? 0.0
                : std::min(12.0 * (dtheta / cell.beamwidth_deg) * (dtheta / cell.beamwidth_deg),
                           kPatternFloorDb);
        double rsrp = eirp - path_loss - pattern;
        if (overshoot && d >= overshoot->ring_inner_m && d <= overshoot->ring_outer_m &&
            std::abs(dtheta) <= cell.beamwidth_deg / 2.0)
            rsrp += overshoot->boost_db;
        if (!shadow.empty()) rsrp += shadow[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] =
            std::clamp(rsrp, env.noise_floor_dbm, kMaxRsrpDbm);
    }
    return out;
}

json anomaly_to_json(const AnomalySpec& a) {
    if (const auto* ov = std::get_if<OvershootSpec>(&a))
        return {{"kind", "overshoot"},
                {"boost_db", ov->boost_db},
                {"ring_inner_m", ov->ring_inner_m},
                {"ring_outer_m", ov->ring_outer_m}};
    if (const auto* az = std::get_if<AzimuthErrorSpec>(&a))
        return {{"kind", "azimuth_error"}, {"delta_deg", az->delta_deg}};
    const auto& pf = std::get<PowerFaultSpec>(a);
    return {{"kind", "power_fault"}, {"delta_db", pf.delta_db}};
}

AnomalySpec anomaly_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "overshoot") {
        OvershootSpec ov{j.at("boost_db").get<double>(), j.at("ring_inner_m").get<double>(),
                         j.at("ring_outer_m").get<double>()};
        if (!(ov.boost_db > 0.0) || !(ov.ring_outer_m > ov.ring_inner_m) ||
            !(ov.ring_inner_m > 0.0))
            throw ConfigError("overshoot anomaly: need boost_db > 0 and outer > inner > 0");
        return ov;
    }
    if (kind == "azimuth_error") return AzimuthErrorSpec{j.at("delta_deg").get<double>()};
    if (kind == "power_fault") return PowerFaultSpec{j.at("delta_db").get<double>()};
    throw ConfigError("unknown anomaly kind: " + kind);
}

}  // namespace

void EnvironmentConfig::validate() const {
    spec.validate();
    if (shadowing_sigma_db < 0.0) throw ConfigError("shadowing_sigma_db must be >= 0");
    if (measurement_sigma_db < 0.0) throw ConfigError("measurement_sigma_db must be >= 0");
    if (outlier_rate < 0.0 || outlier_rate > 1.0)
        throw ConfigError("outlier_rate must be in [0,1]");
    std::set<int> seen;
    for (const CellConfig& c : cells) {
        if (!seen.insert(c.pci).second)
            throw ConfigError("duplicate PCI " + std::to_string(c.pci));
        if (!(c.beamwidth_deg > 0.0) || c.beamwidth_deg > 360.0)
            throw ConfigError("beamwidth_deg must be in (0,360]");
        if (c.pl_exponent < 2.0 || c.pl_exponent > 5.0)
            throw ConfigError("pl_exponent must be in [2,5]");
    }
}

const CellConfig& EnvironmentConfig::cell(int pci) const {
    for (const CellConfig& c : cells)
        if (c.pci == pci) return c;
    throw ConfigError("unknown PCI " + std::to_string(pci));
}

DenseField ground_truth_field(const EnvironmentConfig& env, int pci) {
    return field_impl(env, pci, true, true);
}

DenseField ground_truth_field_nominal(const EnvironmentConfig& env, int pci) {
    return field_impl(env, pci, false, false);
}

std::vector<RawSample> sample_mdt(const EnvironmentConfig& env, int n_per_cell,
                                  std::uint64_t seed) {
    env.validate();
    std::vector<RawSample> out;
    if (n_per_cell <= 0) return out;

    // Total received power per element, for the dominance-share weighting.
    const int n = env.spec.n_elements();
    std::vector<double> total_mw(static_cast<std::size_t>(n), 0.0);
    std::vector<DenseField> fields;
    fields.reserve(env.cells.size());
    for (const CellConfig& c : env.cells) {
        fields.push_back(ground_truth_field(env, c.pci));
        for (int i = 0; i < n; ++i)
            total_mw[static_cast<std::size_t>(i)] += std::pow(10.0, fields.back()[i] / 10.0);
    }
    const double floor_mw = std::pow(10.0, env.noise_floor_dbm / 10.0);

    std::int64_t ts = 0;
    for (std::size_t ci = 0; ci < env.cells.size(); ++ci) {
        const CellConfig& cell = env.cells[ci];
        const DenseField& field = fields[ci];
        // Sampling density proportional to the cell's linearized dominance
        // share (own power over total, floored by the noise level).
        std::vector<double> cdf(static_cast<std::size_t>(n));
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            const double own = std::pow(10.0, field[i] / 10.0);
            acc += own / std::max(total_mw[static_cast<std::size_t>(i)], floor_mw);
            cdf[static_cast<std::size_t>(i)] = acc;
        }
        Rng rng(derive_seed(seed, 0x3D7 + static_cast<std::uint64_t>(cell.pci)));
        for (int k = 0; k < n_per_cell; ++k) {
            const double u = rng.uniform() * acc;
            const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
            const int idx = static_cast<int>(it - cdf.begin());
            const GridCoord coord = env.spec.coord_of(std::min(idx, n - 1));
            const EastNorth pos{(coord.col + rng.uniform()) * env.spec.cell_size_m,
                                (coord.row + rng.uniform()) * env.spec.cell_size_m};
            double rsrp = field[env.spec.index_of(coord)] +
                          rng.normal() * env.measurement_sigma_db;
            if (env.outlier_rate > 0.0 && rng.uniform() < env.outlier_rate)
                rsrp = rng.uniform(-140.0, -60.0);
            RawSample s;
            s.pci = cell.pci;
            s.rsrp_dbm = std::clamp(rsrp, -160.0, kMaxRsrpDbm);
            s.position = env.spec.to_geographic(pos);
            s.timestamp_ms = ts++;
            s.source = Source::MDT;
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<MrReportSet> sample_mr(const EnvironmentConfig& env, int n_ue,
                                   int reports_per_ue, std::uint64_t seed) {
    env.validate();
    std::vector<MrReportSet> out;
    if (n_ue <= 0) return out;

    std::vector<DenseField> fields;
    std::vector<int> pcis;
    for (const CellConfig& c : env.cells) {
        fields.push_back(ground_truth_field(env, c.pci));
        pcis.push_back(c.pci);
    }

    Rng rng(derive_seed(seed, 0x4E0));
    for (int u = 0; u < n_ue; ++u) {
        MrReportSet set;
        set.ue_id = "ue-" + std::to_string(u);
        const EastNorth pos{rng.uniform() * env.spec.width_m(),
                            rng.uniform() * env.spec.height_m()};
        set.hidden_position = env.spec.to_geographic(pos);
        const int idx = env.spec.index_of(*env.spec.project_local(pos));

        // Strongest K cells above the noise floor, strongest first.
        std::vector<std::pair<double, int>> heard;
        for (std::size_t ci = 0; ci < fields.size(); ++ci) {
            const double v = fields[ci][idx];
            if (v > env.noise_floor_dbm) heard.emplace_back(v, pcis[ci]);
        }
        std::sort(heard.begin(), heard.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        if (heard.size() > kMrStrongestK) heard.resize(kMrStrongestK);

        for (int r = 0; r < reports_per_ue; ++r) {
            for (const auto& [v, pci] : heard) {
                RawSample s;
                s.pci = pci;
                s.rsrp_dbm = std::clamp(v + rng.normal() * env.measurement_sigma_db,
                                        -160.0, kMaxRsrpDbm);
                s.timestamp_ms = static_cast<std::int64_t>(u) * 100000 + r * 1000;
                s.source = Source::MR;
                s.ue_token = set.ue_id;
                set.samples.push_back(std::move(s));
            }
        }
        out.push_back(std::move(set));
    }
    return out;
}

EnvironmentConfig read_env_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        EnvironmentConfig env;
        const auto& js = j.at("grid");
        env.spec.origin = {js.at("origin_lat").get<double>(), js.at("origin_lon").get<double>()};
        env.spec.cell_size_m = js.at("cell_size_m").get<double>();
        env.spec.rows = js.at("rows").get<int>();
        env.spec.cols = js.at("cols").get<int>();
        env.shadowing_sigma_db = j.value("shadowing_sigma_db", 0.0);
        env.noise_floor_dbm = j.value("noise_floor_dbm", -120.0);
        env.measurement_sigma_db = j.value("measurement_sigma_db", 2.0);
        env.outlier_rate = j.value("outlier_rate", 0.0);
        env.seed = j.value("seed", std::uint64_t{0});
        for (const auto& jc : j.at("cells")) {
            CellConfig c;
            c.pci = jc.at("pci").get<int>();
            c.site = {jc.at("site_lat").get<double>(), jc.at("site_lon").get<double>()};
            c.azimuth_deg = jc.value("azimuth_deg", 0.0);
            c.beamwidth_deg = jc.value("beamwidth_deg", 65.0);
            c.eirp_dbm = jc.value("eirp_dbm", 43.0);
            c.pl_exponent = jc.value("pl_exponent", 3.5);
            for (const auto& ja : jc.value("anomalies", json::array()))
                c.anomalies.push_back(anomaly_from_json(ja));
            env.cells.push_back(std::move(c));
        }
        env.validate();
        return env;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_env_json_file(const std::string& path, const EnvironmentConfig& env) {
    json j;
    j["grid"] = {{"origin_lat", env.spec.origin.lat_deg},
                 {"origin_lon", env.spec.origin.lon_deg},
                 {"cell_size_m", env.spec.cell_size_m},
                 {"rows", env.spec.rows},
                 {"cols", env.spec.cols}};
    j["shadowing_sigma_db"] = env.shadowing_sigma_db;
    j["noise_floor_dbm"] = env.noise_floor_dbm;
    j["measurement_sigma_db"] = env.measurement_sigma_db;
    j["outlier_rate"] = env.outlier_rate;
    j["seed"] = env.seed;
    json cells = json::array();
    for (const CellConfig& c : env.cells) {
        json jc = {{"pci", c.pci},           {"site_lat", c.site.lat_deg},
                   {"site_lon", c.site.lon_deg}, {"azimuth_deg", c.azimuth_deg},
                   {"beamwidth_deg", c.beamwidth_deg}, {"eirp_dbm", c.eirp_dbm},
                   {"pl_exponent", c.pl_exponent}};
        json anomalies = json::array();
        for (const AnomalySpec& a : c.anomalies) anomalies.push_back(anomaly_to_json(a));
        jc["anomalies"] = std::move(anomalies);
        cells.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace arcade
