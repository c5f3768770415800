// Acceptance harness: one pass/fail line per criterion, exit code = number of
// failures. Criteria 4-6 share the same 20-seed seven-cell scenario runs so the
// expensive pipeline work happens once.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>

#include "arcade/collector.hpp"
#include "arcade/extrapolation.hpp"
#include "arcade/grid_io.hpp"
#include "arcade/indices.hpp"
#include "arcade/nn.hpp"
#include "arcade/rng.hpp"
#include "arcade/simulator.hpp"
#include "arcade/transport.hpp"

using namespace arcade;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::cout << "CRITERION " << criterion << (pass ? " PASS " : " FAIL ") << detail
              << std::endl;
    if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---- criterion 1: GP vs dense direct solve ---------------------------------

double rbf(double ax, double ay, double bx, double by, const GpHyper& h) {
    const double dx = ax - bx, dy = ay - by;
    return h.signal_std_db * h.signal_std_db *
           std::exp(-(dx * dx + dy * dy) / (2.0 * h.lengthscale_m * h.lengthscale_m));
}

AugmentedSet make_set(const std::vector<std::array<double, 2>>& pos,
                      const std::vector<double>& vals,
                      const std::vector<double>& weights = {}) {
    AugmentedSet aug;
    const Eigen::Index n = static_cast<Eigen::Index>(pos.size());
    aug.positions.resize(n, 2);
    aug.values.resize(n);
    aug.weights.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        aug.positions(i, 0) = pos[i][0];
        aug.positions(i, 1) = pos[i][1];
        aug.values(i) = vals[i];
        aug.weights(i) = weights.empty() ? 1.0 : weights[i];
        aug.provenance.push_back(Provenance::Real);
        aug.element.push_back(static_cast<int>(i));
    }
    return aug;
}

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;

    const GpHyper hyper{150.0, 12.0, 2.0, 1e-8};
    Rng rng(101);
    std::vector<std::array<double, 2>> pos;
    std::vector<double> vals, weights;
    for (int i = 0; i < 20; ++i) {
        pos.push_back({rng.uniform(0.0, 2000.0), rng.uniform(0.0, 2000.0)});
        vals.push_back(rng.uniform(-120.0, -60.0));
        weights.push_back(i % 3 == 0 ? 3.0 : 1.0);
    }
    const GpModel model = fit_gp(make_set(pos, vals, weights), hyper);

    Eigen::Matrix<double, Eigen::Dynamic, 2> qpts(40, 2);
    std::vector<std::array<double, 2>> query;
    for (int i = 0; i < 40; ++i) {
        query.push_back({rng.uniform(-500.0, 2500.0), rng.uniform(-500.0, 2500.0)});
        qpts(i, 0) = query[i][0];
        qpts(i, 1) = query[i][1];
    }
    const GpPrediction pred = gp_predict(model, qpts);

    // Dense direct solve, no Cholesky.
    const int n = 20;
    double wsum = 0.0, mu = 0.0;
    for (int i = 0; i < n; ++i) {
        wsum += weights[i];
        mu += weights[i] * vals[i];
    }
    mu /= wsum;
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            k(i, j) = rbf(pos[i][0], pos[i][1], pos[j][0], pos[j][1], hyper);
    for (int i = 0; i < n; ++i)
        k(i, i) += hyper.noise_std_db * hyper.noise_std_db / weights[i] + model.jitter_used;
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = vals[i] - mu;
    const Eigen::VectorXd alpha = k.fullPivLu().solve(y);
    double max_delta = 0.0;
    for (int q = 0; q < 40; ++q) {
        double mean = mu;
        for (int i = 0; i < n; ++i)
            mean += rbf(query[q][0], query[q][1], pos[i][0], pos[i][1], hyper) * alpha(i);
        max_delta = std::max(max_delta, std::abs(pred.mean_dbm(q) - mean));
    }
    if (max_delta >= 1e-8) pass = false;
    detail += "max|mean-oracle|=" + fmt(max_delta);

    // Interpolation limit with near-zero noise.
    const GpHyper tight{150.0, 12.0, 1e-3, 1e-8};
    const GpModel tm = fit_gp(make_set(pos, vals), tight);
    const GpPrediction tp = gp_predict(tm, tm.train_points);
    double max_interp = 0.0;
    for (int i = 0; i < n; ++i)
        max_interp = std::max(max_interp, std::abs(tp.mean_dbm(i) - vals[i]));
    if (max_interp > 0.1) pass = false;
    detail += " interp=" + fmt(max_interp);

    // Prior reversion beyond 10 lengthscales.
    Eigen::Matrix<double, Eigen::Dynamic, 2> far(1, 2);
    far << 1000.0 + 10.0 * hyper.lengthscale_m + 500.0, 1000.0;
    const double rev = std::abs(gp_predict(model, far).mean_dbm(0) - model.mean_offset_db);
    if (rev > 0.1) pass = false;
    detail += " reversion=" + fmt(rev);

    const double dt = seconds_since(t0);
    if (dt >= 1.0) pass = false;
    report(1, pass, detail + " time=" + fmt(dt) + "s");
}

// ---- criterion 2: gradient vs finite differences ----------------------------

void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    const MlpSpec spec{{3, 8, 5, 2}, Activation::Tanh};
    Mlp mlp = mlp_init(spec, 17);
    Rng rng(23);
    Eigen::MatrixXd x(3, 8), t(2, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd w(8);
    for (Eigen::Index i = 0; i < 8; ++i) w(i) = rng.uniform(0.5, 3.0);

    const Gradients g = mlp_grad(mlp, x, t, w);
    const double eps = 1e-4;
    double max_rel = 0.0;
    for (int checked = 0; checked < 100; ++checked) {
        const std::size_t layer = rng.uniform_index(mlp.weights.size());
        const bool bias = rng.uniform() < 0.2;
        double* p;
        double analytic;
        if (bias) {
            const Eigen::Index i = rng.uniform_index(mlp.biases[layer].size());
            p = &mlp.biases[layer](i);
            analytic = g.d_biases[layer](i);
        } else {
            const Eigen::Index i = rng.uniform_index(mlp.weights[layer].size());
            p = mlp.weights[layer].data() + i;
            analytic = g.d_weights[layer].data()[i];
        }
        const double saved = *p;
        *p = saved + eps;
        const double lp = mlp_grad(mlp, x, t, w).loss;
        *p = saved - eps;
        const double lm = mlp_grad(mlp, x, t, w).loss;
        *p = saved;
        const double numeric = (lp - lm) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    const double dt = seconds_since(t0);
    report(2, max_rel < 1e-4 && dt < 5.0,
           "max_rel_err=" + fmt(max_rel) + " time=" + fmt(dt) + "s");
}

// ---- criterion 3: index brute-force oracle ----------------------------------

struct OracleOut {
    std::map<int, CellIndices> indices;
    std::map<int, std::map<int, double>> matrix;
};

OracleOut brute_force(const FieldMap& fields, const GridSpec& spec, double delta,
                      double t_serv) {
    const int n = spec.n_elements();
    std::map<int, std::set<int>> s, d;
    std::vector<int> best(static_cast<std::size_t>(n), -1);
    for (int e = 0; e < n; ++e) {
        double best_v = -1e300;
        for (const auto& [pci, f] : fields) {
            if (f[e] >= t_serv) s[pci].insert(e);
            if (f[e] >= t_serv && f[e] > best_v) {
                best_v = f[e];
                best[e] = pci;
            }
        }
        if (best[e] >= 0) d[best[e]].insert(e);
    }
    OracleOut out;
    for (const auto& [pci, f] : fields) {
        CellIndices idx;
        int oi = 0;
        for (int e : s[pci]) {
            bool overlapped = false;
            for (const auto& [opci, of] : fields)
                if (opci != pci && s[opci].count(e) && of[e] >= f[e] - delta)
                    overlapped = true;
            if (overlapped) ++oi;
        }
        int iax = 0;
        for (int e : d[pci]) {
            bool hit = false;
            for (const auto& [opci, of] : fields)
                if (opci != pci && of[e] >= f[e] - delta) hit = true;
            if (hit) ++iax;
        }
        std::set<int> others;
        for (const auto& [opci, de] : d)
            if (opci != pci) others.insert(de.begin(), de.end());
        int isi = 0;
        for (int e : others)
            if (f[e] >= fields.at(best[e])[e] - delta) ++isi;
        const int sc = static_cast<int>(s[pci].size());
        const int dc = static_cast<int>(d[pci].size());
        idx.ci = static_cast<double>(sc) / n;
        idx.oi = sc ? static_cast<double>(oi) / sc : 0.0;
        idx.iax = dc ? static_cast<double>(iax) / dc : 0.0;
        idx.isi = others.empty() ? 0.0 : static_cast<double>(isi) / others.size();
        idx.cquali = idx.ci * (1.0 - (idx.iax + idx.isi) / 2.0);
        out.indices[pci] = idx;
        for (const auto& [opci, of] : fields) {
            if (opci == pci) {
                out.matrix[pci][opci] = 1.0;
                continue;
            }
            int within = 0;
            for (int e : d[pci])
                if (of[e] >= f[e] - delta) ++within;
            out.matrix[pci][opci] = dc ? static_cast<double>(within) / dc : 0.0;
        }
    }
    return out;
}

GridSpec make_spec(int rows, int cols, double cell = 50.0) {
    GridSpec spec;
    spec.origin = {45.0, 9.0};
    spec.cell_size_m = cell;
    spec.rows = rows;
    spec.cols = cols;
    return spec;
}

void criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(303);
    int mismatches = 0;
    for (int iter = 0; iter < 50; ++iter) {
        const GridSpec spec = make_spec(2 + static_cast<int>(rng.uniform_index(7)),
                                        2 + static_cast<int>(rng.uniform_index(7)));
        FieldMap fields;
        const int n_cells = 1 + static_cast<int>(rng.uniform_index(4));
        for (int c = 0; c < n_cells; ++c) {
            DenseField f(static_cast<std::size_t>(spec.n_elements()));
            for (double& v : f) v = rng.uniform(-130.0, -70.0);
            fields[c * 2 + 1] = std::move(f);
        }
        const double delta = rng.uniform(2.0, 10.0);
        const double t_serv = rng.uniform(-115.0, -95.0);
        const ServiceMap smap = service_map(fields, spec, t_serv);
        const auto idx = compute_indices(fields, smap, {delta, t_serv});
        const CoverageMatrix m = coverage_matrix(fields, smap, delta);
        const OracleOut oracle = brute_force(fields, spec, delta, t_serv);
        for (const auto& [pci, want] : oracle.indices) {
            const CellIndices& got = idx.at(pci);
            if (got.ci != want.ci || got.oi != want.oi || got.iax != want.iax ||
                got.isi != want.isi || got.cquali != want.cquali)
                ++mismatches;
        }
        for (std::size_t i = 0; i < m.pcis.size(); ++i)
            for (std::size_t j = 0; j < m.pcis.size(); ++j)
                if (m.m(i, j) != oracle.matrix.at(m.pcis[i]).at(m.pcis[j])) ++mismatches;
    }
    const double dt = seconds_since(t0);
    report(3, mismatches == 0 && dt < 10.0,
           "instances=50 mismatches=" + std::to_string(mismatches) + " time=" + fmt(dt) +
               "s");
}

// ---- criteria 4-6: shared seven-cell scenario -------------------------------

constexpr int kOvershooterPci = 1;

EnvironmentConfig scenario_env(std::uint64_t seed) {
    EnvironmentConfig env;
    env.spec = make_spec(100, 100, 50.0);
    env.shadowing_sigma_db = 4.0;
    env.noise_floor_dbm = -140.0;
    env.measurement_sigma_db = 6.0;  // noisy enough that GP smoothing pays off
    env.outlier_rate = 0.0;
    env.seed = seed;

    // Contained layout: every cell's serviceable disk stays clear of the grid
    // border (where unpopulated elements get floor pseudo-samples), while the
    // center cell's 3-4 km overshoot ring lands in the four corner regions,
    // detached from its ~1.26 km principal disk.
    const EastNorth center{2525.0, 2525.0};
    for (int k = 0; k < 7; ++k) {
        CellConfig cell;
        cell.pci = k + 1;
        if (k == 0) {
            cell.site = env.spec.to_geographic(center);
            cell.eirp_dbm = 34.0;
            cell.anomalies.push_back(OvershootSpec{20.0, 3000.0, 4000.0});
        } else {
            const double a = (k - 1) * 60.0 * M_PI / 180.0;
            cell.site = env.spec.to_geographic(
                {center.east_m + 1100.0 * std::sin(a), center.north_m + 1100.0 * std::cos(a)});
            cell.eirp_dbm = 28.0;
        }
        cell.beamwidth_deg = 360.0;
        cell.pl_exponent = 4.0;
        env.cells.push_back(cell);
    }
    return env;
}

struct SeedResult {
    bool top1 = false;
    double gp_rmse = 0.0;
    double nn_rmse = 0.0;
    double interp_rmse = 0.0;
    double locator_median = 0.0;
    double knn_median = 0.0;
    double pipeline_seconds = 0.0;
};

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

SeedResult run_scenario(std::uint64_t seed) {
    SeedResult result;
    const EnvironmentConfig env = scenario_env(seed);
    const GridSpec& spec = env.spec;
    const int n = spec.n_elements();

    const std::vector<RawSample> samples = sample_mdt(env, 800, seed);

    // --- detection pipeline (the timed part) ---
    const auto t0 = std::chrono::steady_clock::now();
    const IngestResult ingested = ingest(spec, samples);
    FieldMap fields;
    std::map<int, DenseTrainingSet> dense_sets;
    ExtrapolationParams ep;
    ep.hyper = GpHyper{3.0 * spec.cell_size_m, 12.0, 6.0, 1e-8};
    for (const CellConfig& cell : env.cells) {
        const SparseField field = field_of(ingested.grid, cell.pci);
        DenseTrainingSet dense = extrapolate_cell(field, spec, ep);
        TrainConfig tc;
        tc.epochs = 40;
        tc.batch_size = 256;
        tc.learning_rate = 3e-3;
        tc.seed = derive_seed(seed, static_cast<std::uint64_t>(cell.pci));
        // ReLU fits the detached overshoot ring far faster than tanh here
        const CoverageModel model =
            train_coverage_model(dense, tc, {{2, 64, 64, 1}, Activation::ReLU});
        fields[cell.pci] = evaluate_coverage(model);
        dense_sets.emplace(cell.pci, std::move(dense));
    }
    const DiagnosisReport diag = build_report(fields, spec, {});
    result.pipeline_seconds = seconds_since(t0);
    result.top1 = !diag.ranking.empty() && diag.ranking.front() == kOvershooterPci;

    // --- extrapolation quality vs oracles (untimed) ---
    double se_gp = 0.0, se_nn = 0.0, se_interp = 0.0;
    long n_eval = 0;
    for (const CellConfig& cell : env.cells) {
        const DenseField truth = ground_truth_field(env, cell.pci);
        const DenseTrainingSet& dense = dense_sets.at(cell.pci);
        const DenseField& nn_field = fields.at(cell.pci);
        const SparseField sparse = field_of(ingested.grid, cell.pci);
        std::vector<std::array<double, 2>> sample_pos;
        std::vector<double> sample_val;
        for (const auto& [e, v] : sparse) {
            const EastNorth p = spec.center_local(spec.coord_of(e));
            sample_pos.push_back({p.east_m, p.north_m});
            sample_val.push_back(v);
        }
        for (int e = 0; e < n; ++e) {
            if (truth[e] < -110.0) continue;  // serviceable area only
            if (dense.source[e] == DenseSource::BoundaryPseudo)
                continue;  // boundary constants, not extrapolation output
            const EastNorth p = spec.center_local(spec.coord_of(e));
            double best_d = 1e300, nn_val = 0.0;
            for (std::size_t i = 0; i < sample_pos.size(); ++i) {
                const double dx = p.east_m - sample_pos[i][0];
                const double dy = p.north_m - sample_pos[i][1];
                const double d2 = dx * dx + dy * dy;
                if (d2 < best_d) {
                    best_d = d2;
                    nn_val = sample_val[i];
                }
            }
            se_gp += (dense.values(e) - truth[e]) * (dense.values(e) - truth[e]);
            se_nn += (nn_field[e] - truth[e]) * (nn_field[e] - truth[e]);
            se_interp += (nn_val - truth[e]) * (nn_val - truth[e]);
            ++n_eval;
        }
    }
    result.gp_rmse = std::sqrt(se_gp / n_eval);
    result.nn_rmse = std::sqrt(se_nn / n_eval);
    result.interp_rmse = std::sqrt(se_interp / n_eval);

    // --- localization vs k-NN fingerprint oracle (untimed) ---
    std::vector<int> pcis;
    for (const CellConfig& c : env.cells) pcis.push_back(c.pci);
    std::vector<RawSample> train, test;
    for (const RawSample& s : samples) {
        const auto coord = spec.project(*s.position);
        if (!coord) continue;
        const int e = spec.index_of(*coord);
        (static_cast<std::uint64_t>(e) % 5 == seed % 5 ? test : train).push_back(s);
    }
    TrainConfig ltc;
    ltc.epochs = 60;
    ltc.batch_size = 128;
    ltc.learning_rate = 3e-3;
    ltc.seed = derive_seed(seed, 0x10CA);
    const Locator locator = train_locator(train, pcis, spec, ltc);
    const FingerprintSet train_fp = build_fingerprints(train, pcis, spec);
    const FingerprintSet test_fp = build_fingerprints(test, pcis, spec);

    std::vector<double> loc_err, knn_err;
    for (Eigen::Index q = 0; q < test_fp.inputs.cols(); ++q) {
        const Eigen::VectorXd fp = test_fp.inputs.col(q);
        const std::vector<double> fpv(fp.data(), fp.data() + fp.size());
        const GeoPoint got = geolocate(locator, fpv);
        const EastNorth gl = spec.to_local(got);
        loc_err.push_back(std::hypot(gl.east_m - test_fp.targets_m(0, q),
                                     gl.north_m - test_fp.targets_m(1, q)));

        // brute-force k-NN (k=5) over the training fingerprints
        std::vector<std::pair<double, Eigen::Index>> dist;
        for (Eigen::Index i = 0; i < train_fp.inputs.cols(); ++i)
            dist.emplace_back((train_fp.inputs.col(i) - fp).squaredNorm(), i);
        std::partial_sort(dist.begin(), dist.begin() + std::min<std::size_t>(5, dist.size()),
                          dist.end());
        double ex = 0.0, ey = 0.0;
        const int k = static_cast<int>(std::min<std::size_t>(5, dist.size()));
        for (int i = 0; i < k; ++i) {
            ex += train_fp.targets_m(0, dist[i].second);
            ey += train_fp.targets_m(1, dist[i].second);
        }
        knn_err.push_back(std::hypot(ex / k - test_fp.targets_m(0, q),
                                     ey / k - test_fp.targets_m(1, q)));
    }
    result.locator_median = median_of(loc_err);
    result.knn_median = median_of(knn_err);
    return result;
}

void criteria_4_5_6() {
    std::vector<SeedResult> results;
    double pipeline_total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        results.push_back(run_scenario(seed));
        pipeline_total += results.back().pipeline_seconds;
    }

    int top1 = 0, gp_wins = 0, nn_ok = 0, loc_ok = 0;
    for (const SeedResult& r : results) {
        if (r.top1) ++top1;
        if (r.gp_rmse <= r.interp_rmse) ++gp_wins;
        if (r.nn_rmse <= 1.25 * r.gp_rmse) ++nn_ok;
        if (r.locator_median <= 1.5 * r.knn_median) ++loc_ok;
    }
    report(4, top1 >= 18 && pipeline_total < 300.0,
           "overshooter_top1=" + std::to_string(top1) + "/20 pipeline_time=" +
               fmt(pipeline_total) + "s");
    report(5, gp_wins >= 18 && nn_ok >= 15,
           "gp<=interp=" + std::to_string(gp_wins) + "/20 nn<=1.25gp=" +
               std::to_string(nn_ok) + "/20 (gp_rmse~" + fmt(results[0].gp_rmse) +
               " nn_rmse~" + fmt(results[0].nn_rmse) + " interp~" +
               fmt(results[0].interp_rmse) + ")");
    report(6, loc_ok >= 15,
           "locator<=1.5knn=" + std::to_string(loc_ok) + "/20 (locator~" +
               fmt(results[0].locator_median) + "m knn~" + fmt(results[0].knn_median) +
               "m)");
}

// ---- criterion 7: collector protocol -----------------------------------------

std::vector<MrEvent> random_events(int n, std::uint64_t seed, const std::string& prefix) {
    Rng rng(seed);
    std::vector<MrEvent> events;
    for (int i = 0; i < n; ++i)
        events.push_back({prefix + std::to_string(rng.uniform_index(9)),
                          static_cast<int>(rng.uniform_index(6)) + 1,
                          rng.uniform(-120.0, -60.0),
                          static_cast<std::int64_t>(rng.uniform_index(20000))});
    return events;
}

void criterion_7() {
    bool pass = true;
    std::string detail;

    Rng rng(707);
    int roundtrip_fail = 0;
    for (int i = 0; i < 1000; ++i) {
        WireMessage msg;
        msg.kind = static_cast<MsgKind>(rng.uniform_index(4));
        msg.payload.resize(rng.uniform_index(500));
        for (char& c : msg.payload) c = static_cast<char>(rng.uniform_index(256));
        const std::string frame = encode(msg);
        if (!(decode(frame) == msg) || encode(decode(frame)) != frame) ++roundtrip_fail;
    }
    if (roundtrip_fail) pass = false;
    detail += "roundtrip_fail=" + std::to_string(roundtrip_fail) + "/1000";

    // Clean delivery conserves events.
    {
        AgentConfig cfg;
        cfg.window_ms = 500;
        cfg.agent_id = "acc-clean";
        const auto events = random_events(200, 1, "ue-");
        auto [a, b] = make_pipe();
        RecordStore store;
        std::thread collector([&] { collector_session(*b, store); });
        agent_run(events, cfg, *a);
        collector.join();
        if (store.total_count() != 200) pass = false;
        detail += " clean=" + std::to_string(store.total_count()) + "/200";
    }

    // Duplicate replay stores nothing extra.
    {
        RecordStore store;
        auto [client, server] = make_pipe();
        std::thread collector([&] { collector_session(*server, store); });
        std::vector<ConsolidatedRecord> records;
        for (int i = 0; i < 10; ++i)
            records.push_back({"tok-" + std::to_string(i), 0, {{1, -90.0, 1}}});
        client->write_all(encode(make_hello("acc-dup")));
        client->write_all(encode(make_batch(0, records)));
        parse_ack(read_message(*client));
        client->write_all(encode(make_batch(0, records)));
        parse_ack(read_message(*client));
        client->write_all(encode(make_bye()));
        collector.join();
        if (store.size() != 10) pass = false;
        detail += " dup_stored=" + std::to_string(store.size()) + "/10";
    }

    // Three concurrent agents.
    {
        RecordStore store;
        std::vector<std::thread> threads;
        for (int a = 0; a < 3; ++a) {
            threads.emplace_back([&, a] {
                AgentConfig cfg;
                cfg.window_ms = 500;
                cfg.agent_id = "acc-" + std::to_string(a);
                cfg.max_batch = 9;
                const auto events = random_events(100, 10 + a, "u" + std::to_string(a) + "-");
                auto [ae, ce] = make_pipe();
                std::thread collector([&] { collector_session(*ce, store); });
                agent_run(events, cfg, *ae);
                collector.join();
            });
        }
        for (auto& t : threads) t.join();
        if (store.total_count() != 300) pass = false;
        detail += " concurrent=" + std::to_string(store.total_count()) + "/300";
    }

    report(7, pass, detail);
}

// ---- criterion 8: CLI determinism ---------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ARCADE_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return status < 0 ? status : WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_8() {
    bool pass = true;
    std::string detail;
    const fs::path dir = "acceptance_scratch";
    fs::remove_all(dir);
    fs::create_directories(dir);

    EnvironmentConfig env;
    env.spec = make_spec(20, 20);
    env.shadowing_sigma_db = 3.0;
    env.measurement_sigma_db = 1.0;
    env.noise_floor_dbm = -140.0;
    env.seed = 9;
    for (int k = 0; k < 2; ++k) {
        CellConfig cell;
        cell.pci = k + 1;
        cell.site = env.spec.center_of({k == 0 ? 5 : 14, k == 0 ? 5 : 14});
        cell.beamwidth_deg = 360.0;
        cell.pl_exponent = 4.0;
        env.cells.push_back(cell);
    }
    write_env_json_file((dir / "env.json").string(), env);

    const std::string sim = "simulate --env " + (dir / "env.json").string() +
                            " --seed 13 --samples-per-cell 200 --out ";
    if (run_cli(sim + (dir / "s1").string()) != 0) pass = false;
    if (run_cli(sim + (dir / "s2").string()) != 0) pass = false;
    const bool sim_same =
        slurp(dir / "s1" / "samples.csv") == slurp(dir / "s2" / "samples.csv") &&
        !slurp(dir / "s1" / "samples.csv").empty();
    if (!sim_same) pass = false;
    detail += std::string("simulate_identical=") + (sim_same ? "yes" : "no");

    const std::string ana = "analyze --samples " + (dir / "s1" / "samples.csv").string() +
                            " --env " + (dir / "env.json").string() +
                            " --seed 13 --epochs 40 --jobs 1 --out ";
    if (run_cli(ana + (dir / "a1").string()) != 0) pass = false;
    if (run_cli(ana + (dir / "a2").string()) != 0) pass = false;
    const bool ana_same =
        slurp(dir / "a1" / "report.json") == slurp(dir / "a2" / "report.json") &&
        !slurp(dir / "a1" / "report.json").empty();
    if (!ana_same) pass = false;
    detail += std::string(" analyze_identical=") + (ana_same ? "yes" : "no");

    report(8, pass, detail);
}

// ---- criterion 9: trivial identities ------------------------------------------

void criterion_9() {
    bool pass = true;
    std::string detail;
    const GridSpec spec = make_spec(6, 6);

    // single-cell cluster
    {
        DenseField f(36, -120.0);
        for (int e = 0; e < 12; ++e) f[e] = -90.0;
        const FieldMap fields{{1, f}};
        const ServiceMap smap = service_map(fields, spec, -110.0);
        const auto idx = compute_indices(fields, smap, {6.0, -110.0});
        const bool ok = idx.at(1).oi == 0.0 && idx.at(1).isi == 0.0 &&
                        idx.at(1).iax == 0.0 && idx.at(1).cquali == idx.at(1).ci;
        if (!ok) pass = false;
        detail += std::string("single_cell=") + (ok ? "ok" : "bad");
    }
    // co-located identical pair
    {
        const FieldMap fields{{1, DenseField(36, -85.0)}, {2, DenseField(36, -85.0)}};
        const ServiceMap smap = service_map(fields, spec, -110.0);
        const CoverageMatrix m = coverage_matrix(fields, smap, 6.0);
        const bool ok = m.m(0, 1) == 1.0;
        if (!ok) pass = false;
        detail += std::string(" colocated_pair=") + (ok ? "ok" : "bad");
    }
    // delta below any field gap
    {
        const FieldMap fields{{1, DenseField(36, -80.0)}, {2, DenseField(36, -90.0)}};
        const ServiceMap smap = service_map(fields, spec, -110.0);
        const auto idx = compute_indices(fields, smap, {-1e18, -110.0});
        const CoverageMatrix m = coverage_matrix(fields, smap, -1e18);
        bool ok = m.m.isIdentity(0.0);
        for (const auto& [_, v] : idx)
            if (v.oi != 0.0 || v.isi != 0.0 || v.iax != 0.0) ok = false;
        if (!ok) pass = false;
        detail += std::string(" tiny_delta=") + (ok ? "ok" : "bad");
    }
    report(9, pass, detail);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criteria_4_5_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::cout << (g_failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL") << " ("
              << (9 - g_failures) << "/9)" << std::endl;
    return g_failures;
}
