#include "arcade/indices.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "arcade/errors.hpp"
#include "arcade/labeling.hpp"

namespace arcade {

namespace {

using json = nlohmann::json;

void check_fields(const FieldMap& fields, const GridSpec& spec) {
    for (const auto& [pci, f] : fields)
        if (static_cast<int>(f.size()) != spec.n_elements())
            throw ConfigError("field for PCI " + std::to_string(pci) +
                              " does not match the grid");
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = p * (static_cast<double>(v.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

ServiceMap service_map(const FieldMap& fields, const GridSpec& spec, double t_serv) {
    check_fields(fields, spec);
    const int n = spec.n_elements();
    ServiceMap out;
    out.spec = spec;
    out.best_pci.assign(static_cast<std::size_t>(n), -1);
    out.best_rsrp.assign(static_cast<std::size_t>(n),
                         -std::numeric_limits<double>::infinity());
    out.second_rsrp.assign(static_cast<std::size_t>(n),
                           std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < n; ++i) {
        int best = -1;
        double best_v = -std::numeric_limits<double>::infinity();
        double second_v = -std::numeric_limits<double>::infinity();
        for (const auto& [pci, f] : fields) {
            const double v = f[static_cast<std::size_t>(i)];
            if (v < t_serv) continue;
            if (v > best_v) {
                second_v = best_v;
                best_v = v;
                best = pci;
            } else if (v > second_v) {
                second_v = v;
            }
            // Ties break to the lowest PCI; map iteration is ascending, so the
            // first holder of best_v wins.
        }
        if (best >= 0) {
            out.best_pci[static_cast<std::size_t>(i)] = best;
            out.best_rsrp[static_cast<std::size_t>(i)] = best_v;
            if (std::isfinite(second_v))
                out.second_rsrp[static_cast<std::size_t>(i)] = second_v;
        }
    }
    return out;
}

std::map<int, CellIndices> compute_indices(const FieldMap& fields, const ServiceMap& smap,
                                           const IndexParams& params) {
    check_fields(fields, smap.spec);
    const int n = smap.spec.n_elements();
    std::map<int, CellIndices> out;
    for (const auto& [pci, field] : fields) {
        CellIndices idx;
        int s_count = 0, oi_count = 0;
        int d_count = 0, iax_count = 0;
        int others_dom = 0, isi_count = 0;
        for (int e = 0; e < n; ++e) {
            const double own = field[static_cast<std::size_t>(e)];
            const bool serviceable = own >= params.t_serv;
            if (serviceable) {
                ++s_count;
                for (const auto& [opci, ofield] : fields) {
                    if (opci == pci) continue;
                    const double ov = ofield[static_cast<std::size_t>(e)];
                    if (ov >= params.t_serv && ov >= own - params.delta_db) {
                        ++oi_count;
                        break;
                    }
                }
            }
            const int best = smap.best_pci[static_cast<std::size_t>(e)];
            if (best == pci) {
                ++d_count;
                for (const auto& [opci, ofield] : fields) {
                    if (opci == pci) continue;
                    if (ofield[static_cast<std::size_t>(e)] >= own - params.delta_db) {
                        ++iax_count;
                        break;
                    }
                }
            } else if (best >= 0) {
                ++others_dom;
                if (own >= smap.best_rsrp[static_cast<std::size_t>(e)] - params.delta_db)
                    ++isi_count;
            }
        }
        idx.ci = static_cast<double>(s_count) / n;
        idx.oi = s_count ? static_cast<double>(oi_count) / s_count : 0.0;
        idx.iax = d_count ? static_cast<double>(iax_count) / d_count : 0.0;
        idx.isi = others_dom ? static_cast<double>(isi_count) / others_dom : 0.0;
        idx.cquali = idx.ci * (1.0 - (idx.iax + idx.isi) / 2.0);
        out[pci] = idx;
    }
    return out;
}

CoverageMatrix coverage_matrix(const FieldMap& fields, const ServiceMap& smap,
                               double delta_db) {
    check_fields(fields, smap.spec);
    CoverageMatrix out;
    for (const auto& [pci, _] : fields) out.pcis.push_back(pci);
    const int k = static_cast<int>(out.pcis.size());
    out.m = Eigen::MatrixXd::Zero(k, k);
    const int n = smap.spec.n_elements();
    for (int i = 0; i < k; ++i) {
        out.m(i, i) = 1.0;
        const DenseField& fi = fields.at(out.pcis[i]);
        int d_count = 0;
        std::vector<int> within(static_cast<std::size_t>(k), 0);
        for (int e = 0; e < n; ++e) {
            if (smap.best_pci[static_cast<std::size_t>(e)] != out.pcis[i]) continue;
            ++d_count;
            for (int j = 0; j < k; ++j) {
                if (j == i) continue;
                if (fields.at(out.pcis[j])[static_cast<std::size_t>(e)] >=
                    fi[static_cast<std::size_t>(e)] - delta_db)
                    ++within[static_cast<std::size_t>(j)];
            }
        }
        if (d_count > 0)
            for (int j = 0; j < k; ++j)
                if (j != i)
                    out.m(i, j) = static_cast<double>(within[static_cast<std::size_t>(j)]) /
                                  d_count;
    }
    return out;
}

std::map<int, CellAnomaly> detect_anomalies(const FieldMap& fields, const ServiceMap& smap,
                                            const GridSpec& spec,
                                            const AnomalyParams& params) {
    check_fields(fields, spec);
    std::map<int, CellAnomaly> out;
    const int n = spec.n_elements();
    for (const auto& [pci, field] : fields) {
        CellAnomaly an;
        std::vector<char> mask(static_cast<std::size_t>(n), 0);
        int s_count = 0;
        for (int e = 0; e < n; ++e) {
            if (field[static_cast<std::size_t>(e)] >= params.t_serv) {
                mask[static_cast<std::size_t>(e)] = 1;
                ++s_count;
            }
        }
        if (s_count == 0) {
            out[pci] = an;
            continue;
        }
        const Components comps = connected_components8(mask, spec.rows, spec.cols);
        std::size_t principal = 0;
        for (std::size_t c = 1; c < comps.members.size(); ++c)
            if (comps.members[c].size() > comps.members[principal].size()) principal = c;

        // Cell center from the strong-signal centroid of the principal blob
        // (site positions are not an input).
        const auto& pmembers = comps.members[principal];
        std::vector<double> pvalues;
        pvalues.reserve(pmembers.size());
        for (int e : pmembers) pvalues.push_back(field[static_cast<std::size_t>(e)]);
        const double decile_cut = percentile(pvalues, 0.9);
        double cx = 0.0, cy = 0.0;
        int cn = 0;
        for (int e : pmembers) {
            if (field[static_cast<std::size_t>(e)] < decile_cut) continue;
            const EastNorth p = spec.center_local(spec.coord_of(e));
            cx += p.east_m;
            cy += p.north_m;
            ++cn;
        }
        cx /= cn;
        cy /= cn;
        std::vector<double> dists;
        dists.reserve(pmembers.size());
        for (int e : pmembers) {
            const EastNorth p = spec.center_local(spec.coord_of(e));
            dists.push_back(std::hypot(p.east_m - cx, p.north_m - cy));
        }
        const double principal_radius = percentile(dists, 0.75);
        const double far_cut = params.k_os * principal_radius;

        int fragment_area = 0;
        for (std::size_t c = 0; c < comps.members.size(); ++c) {
            if (c == principal) continue;
            if (comps.members[c].size() < static_cast<std::size_t>(params.m_abn)) continue;
            an.fragmented = true;
            fragment_area += static_cast<int>(comps.members[c].size());
            double fx = 0.0, fy = 0.0;
            for (int e : comps.members[c]) {
                const EastNorth p = spec.center_local(spec.coord_of(e));
                fx += p.east_m;
                fy += p.north_m;
            }
            fx /= static_cast<double>(comps.members[c].size());
            fy /= static_cast<double>(comps.members[c].size());
            if (std::hypot(fx - cx, fy - cy) > far_cut) an.overshooter = true;
        }

        int d_count = 0, d_far = 0;
        for (int e = 0; e < n; ++e) {
            if (smap.best_pci[static_cast<std::size_t>(e)] != pci) continue;
            ++d_count;
            const EastNorth p = spec.center_local(spec.coord_of(e));
            if (std::hypot(p.east_m - cx, p.north_m - cy) > far_cut) ++d_far;
        }
        an.score = 0.5 * static_cast<double>(fragment_area) / s_count +
                   0.5 * (d_count ? static_cast<double>(d_far) / d_count : 0.0);
        out[pci] = an;
    }
    return out;
}

DiagnosisReport build_report(const FieldMap& fields, const GridSpec& spec,
                             const ReportParams& params) {
    DiagnosisReport report;
    report.params = params;
    const ServiceMap smap = service_map(fields, spec, params.index.t_serv);
    report.indices = compute_indices(fields, smap, params.index);
    report.anomalies = detect_anomalies(fields, smap, spec, params.anomaly);
    report.matrix = coverage_matrix(fields, smap, params.index.delta_db);
    for (const auto& [pci, _] : fields) report.ranking.push_back(pci);
    std::sort(report.ranking.begin(), report.ranking.end(), [&](int a, int b) {
        const CellAnomaly& aa = report.anomalies.at(a);
        const CellAnomaly& ab = report.anomalies.at(b);
        if (aa.score != ab.score) return aa.score > ab.score;
        const double qa = report.indices.at(a).cquali;
        const double qb = report.indices.at(b).cquali;
        if (qa != qb) return qa < qb;
        return a < b;
    });
    return report;
}

std::string DiagnosisReport::to_json_string() const {
    json j;
    j["version"] = 1;
    j["params"] = {{"delta_db", params.index.delta_db},
                   {"t_serv_dbm", params.index.t_serv},
                   {"m_abn", params.anomaly.m_abn},
                   {"k_os", params.anomaly.k_os}};
    json cells = json::array();
    for (const auto& [pci, idx] : indices) {
        const CellAnomaly& an = anomalies.at(pci);
        cells.push_back({{"pci", pci},
                         {"ci", idx.ci},
                         {"isi", idx.isi},
                         {"iax", idx.iax},
                         {"oi", idx.oi},
                         {"cquali", idx.cquali},
                         {"overshooter", an.overshooter},
                         {"fragmented", an.fragmented},
                         {"score", an.score}});
    }
    j["cells"] = std::move(cells);
    json m = json::array();
    for (Eigen::Index r = 0; r < matrix.m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < matrix.m.cols(); ++c) row.push_back(matrix.m(r, c));
        m.push_back(std::move(row));
    }
    j["matrix"] = std::move(m);
    j["matrix_pcis"] = matrix.pcis;
    j["ranking"] = ranking;
    return j.dump(2) + "\n";
}

DiagnosisReport DiagnosisReport::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("report JSON: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw ConfigError("report JSON: unsupported version");
        DiagnosisReport report;
        report.params.index.delta_db = j.at("params").at("delta_db").get<double>();
        report.params.index.t_serv = j.at("params").at("t_serv_dbm").get<double>();
        report.params.anomaly.t_serv = report.params.index.t_serv;
        report.params.anomaly.m_abn = j.at("params").at("m_abn").get<int>();
        report.params.anomaly.k_os = j.at("params").at("k_os").get<double>();
        for (const auto& jc : j.at("cells")) {
            const int pci = jc.at("pci").get<int>();
            report.indices[pci] = {jc.at("ci").get<double>(), jc.at("isi").get<double>(),
                                   jc.at("iax").get<double>(), jc.at("oi").get<double>(),
                                   jc.at("cquali").get<double>()};
            report.anomalies[pci] = {jc.at("overshooter").get<bool>(),
                                     jc.at("fragmented").get<bool>(),
                                     jc.at("score").get<double>()};
        }
        report.matrix.pcis = j.at("matrix_pcis").get<std::vector<int>>();
        const auto& jm = j.at("matrix");
        const Eigen::Index k = static_cast<Eigen::Index>(jm.size());
        report.matrix.m.resize(k, k);
        for (Eigen::Index r = 0; r < k; ++r)
            for (Eigen::Index c = 0; c < k; ++c)
                report.matrix.m(r, c) = jm.at(r).at(c).get<double>();
        report.ranking = j.at("ranking").get<std::vector<int>>();
        return report;
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("report JSON: ") + e.what());
    }
}

}  // namespace arcade
