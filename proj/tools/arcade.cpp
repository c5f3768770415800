// arcade: batch diagnostics CLI for the coverage-anomaly pipeline.
//
// Subcommands: simulate | analyze | train-locator | serve | agent.
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical error, 4 transport error.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "arcade/collector.hpp"
#include "arcade/errors.hpp"
#include "arcade/extrapolation.hpp"
#include "arcade/grid_io.hpp"
#include "arcade/indices.hpp"
#include "arcade/nn.hpp"
#include "arcade/rng.hpp"
#include "arcade/simulator.hpp"
#include "arcade/transport.hpp"

namespace fs = std::filesystem;
using namespace arcade;

namespace {

enum LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("ARCADE_LOG");
        if (!env) return kWarn;
        const std::string s = env;
        if (s == "error") return kError;
        if (s == "warn") return kWarn;
        if (s == "info") return kInfo;
        if (s == "debug") return kDebug;
        return kWarn;
    }();
    return level;
}

void log(LogLevel level, const std::string& msg) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (level <= log_level()) std::cerr << "[" << names[level] << "] " << msg << "\n";
}

struct PipelineParams {
    double t_serv = -110.0;
    double delta_db = 6.0;
    double t_class = -115.0;
    int m_abn = 5;
    double k_os = 2.0;
    double floor_dbm = -140.0;
    int r_bc = 10;
    int s_bc = 5;
    double w_emph = 3.0;
    double lengthscale_m = 0.0;  // 0 = 3 x cell_size
    double signal_std_db = 12.0;
    double noise_std_db = 2.0;
    int epochs = 120;
    double learning_rate = 3e-3;
    int batch_size = 128;
    std::uint64_t seed = 0;
};

void add_pipeline_flags(CLI::App* cmd, PipelineParams& p) {
    cmd->add_option("--t-serv", p.t_serv, "Serviceability threshold, dBm");
    cmd->add_option("--delta-db", p.delta_db, "Co-channel margin, dB");
    cmd->add_option("--t-class", p.t_class, "Region classification threshold, dBm");
    cmd->add_option("--m-abn", p.m_abn, "Min elements for an abnormal component");
    cmd->add_option("--k-os", p.k_os, "Overshoot distance factor");
    cmd->add_option("--floor-dbm", p.floor_dbm, "Boundary/fingerprint floor, dBm");
    cmd->add_option("--r-bc", p.r_bc, "Boundary lattice exclusion radius, elements");
    cmd->add_option("--s-bc", p.s_bc, "Boundary lattice stride, elements");
    cmd->add_option("--w-emph", p.w_emph, "Weight for abnormal samples");
    cmd->add_option("--lengthscale", p.lengthscale_m, "GP lengthscale, m (0 = 3x cell size)");
    cmd->add_option("--signal-std", p.signal_std_db, "GP signal std, dB");
    cmd->add_option("--noise-std", p.noise_std_db, "GP noise std, dB");
    cmd->add_option("--epochs", p.epochs, "NN training epochs");
    cmd->add_option("--learning-rate", p.learning_rate, "NN learning rate");
    cmd->add_option("--batch-size", p.batch_size, "NN batch size");
    cmd->add_option("--seed", p.seed, "Pipeline seed");
}

void write_field_csv(const std::string& path, const DenseField& field, const GridSpec& spec) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "row,col,rsrp_dbm\n";
    for (int i = 0; i < spec.n_elements(); ++i) {
        const GridCoord c = spec.coord_of(i);
        out << c.row << ',' << c.col << ','
            << format_double(field[static_cast<std::size_t>(i)]) << '\n';
    }
}

// P2 (ASCII) grayscale heatmap; [-140,-40] dBm maps linearly to [0,255].
void write_field_pgm(const std::string& path, const DenseField& field, const GridSpec& spec) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P2\n" << spec.cols << ' ' << spec.rows << "\n255\n";
    for (int r = spec.rows - 1; r >= 0; --r) {  // north at the top
        for (int c = 0; c < spec.cols; ++c) {
            const double v = field[static_cast<std::size_t>(r * spec.cols + c)];
            const double t = std::clamp((v + 140.0) / 100.0, 0.0, 1.0);
            out << static_cast<int>(std::lround(t * 255.0));
            out << (c + 1 == spec.cols ? '\n' : ' ');
        }
    }
}

void write_best_server_geojson(const std::string& path, const ServiceMap& smap) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const GridSpec& spec = smap.spec;
    out << "{\"type\":\"FeatureCollection\",\"features\":[";
    bool first = true;
    for (int i = 0; i < spec.n_elements(); ++i) {
        const int best = smap.best_pci[static_cast<std::size_t>(i)];
        if (best < 0) continue;
        const GridCoord c = spec.coord_of(i);
        const GeoPoint sw = spec.to_geographic(
            {c.col * spec.cell_size_m, c.row * spec.cell_size_m});
        const GeoPoint ne = spec.to_geographic(
            {(c.col + 1) * spec.cell_size_m, (c.row + 1) * spec.cell_size_m});
        if (!first) out << ',';
        first = false;
        out << "{\"type\":\"Feature\",\"properties\":{\"best_pci\":" << best
            << ",\"best_rsrp\":" << format_double(smap.best_rsrp[static_cast<std::size_t>(i)])
            << "},\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[["
            << '[' << format_double(sw.lon_deg) << ',' << format_double(sw.lat_deg) << "],"
            << '[' << format_double(ne.lon_deg) << ',' << format_double(sw.lat_deg) << "],"
            << '[' << format_double(ne.lon_deg) << ',' << format_double(ne.lat_deg) << "],"
            << '[' << format_double(sw.lon_deg) << ',' << format_double(ne.lat_deg) << "],"
            << '[' << format_double(sw.lon_deg) << ',' << format_double(sw.lat_deg) << "]"
            << "]]}}";
    }
    out << "]}\n";
}

int cmd_simulate(const std::string& env_path, std::uint64_t seed, int n_per_cell,
                 int mr_ue, int mr_reports, const std::string& out_dir) {
    EnvironmentConfig env = read_env_json_file(env_path);
    fs::create_directories(out_dir);

    std::vector<RawSample> samples = sample_mdt(env, n_per_cell, seed);
    if (mr_ue > 0) {
        for (const MrReportSet& set : sample_mr(env, mr_ue, mr_reports, seed)) {
            samples.insert(samples.end(), set.samples.begin(), set.samples.end());
        }
    }
    write_samples_csv_file((fs::path(out_dir) / "samples.csv").string(), samples);
    for (const CellConfig& cell : env.cells) {
        const DenseField field = ground_truth_field(env, cell.pci);
        write_field_csv(
            (fs::path(out_dir) / ("ground_truth_" + std::to_string(cell.pci) + ".csv"))
                .string(),
            field, env.spec);
    }
    log(kInfo, "simulate: wrote " + std::to_string(samples.size()) + " samples");
    std::cout << "RESULT ok cells=" << env.cells.size() << " samples=" << samples.size()
              << "\n";
    return 0;
}

int cmd_analyze(const std::string& samples_path, const GridSpec& spec,
                const PipelineParams& p, const std::string& locator_path,
                const std::string& out_dir, int jobs, bool dump_stages) {
    spec.validate();
    std::vector<RawSample> samples = read_samples_csv_file(samples_path);
    fs::create_directories(out_dir);

    // Unpositioned MR samples are geolocated first when a locator is given.
    std::vector<RawSample> positioned;
    std::vector<RawSample> unpositioned;
    for (RawSample& s : samples)
        (s.position ? positioned : unpositioned).push_back(std::move(s));
    if (!unpositioned.empty()) {
        if (locator_path.empty())
            throw ConfigError(std::to_string(unpositioned.size()) +
                              " unpositioned samples but no --locator model given");
        const Locator locator = load_locator_file(locator_path);
        // One record per (ue_token, timestamp): readings across PCIs.
        std::map<std::pair<std::string, std::int64_t>, std::map<int, std::pair<double, int>>>
            groups;
        for (const RawSample& s : unpositioned) {
            auto& slot = groups[{s.ue_token, s.timestamp_ms}][s.pci];
            slot.first += s.rsrp_dbm;
            slot.second += 1;
        }
        std::vector<ConsolidatedRecord> records;
        for (const auto& [key, by_pci] : groups) {
            ConsolidatedRecord r;
            r.ue_token = key.first;
            r.window_start_ms = key.second;
            for (const auto& [pci, sum_count] : by_pci)
                r.readings.push_back(
                    {pci, sum_count.first / sum_count.second, sum_count.second});
            records.push_back(std::move(r));
        }
        const GeolocateResult geo = geolocate_batch(records, locator);
        log(kInfo, "analyze: geolocated " + std::to_string(geo.samples.size()) +
                       " MR readings (" + std::to_string(geo.dropped_readings) +
                       " dropped)");
        positioned.insert(positioned.end(), geo.samples.begin(), geo.samples.end());
    }

    const IngestResult ingested = ingest(spec, positioned);
    const std::vector<int> pcis = ingested.grid.pcis();
    if (pcis.empty()) throw ConfigError("no samples for any PCI");
    if (pcis.size() == 1)
        log(kWarn, "single-PCI cluster: interference indices will be zero");

    ExtrapolationParams ep;
    ep.classify = {p.t_class, p.m_abn};
    ep.augment = {p.floor_dbm, p.r_bc, p.s_bc, p.w_emph};
    ep.hyper = GpHyper{p.lengthscale_m > 0.0 ? p.lengthscale_m : 3.0 * spec.cell_size_m,
                       p.signal_std_db, p.noise_std_db, 1e-8};
    TrainConfig tc;
    tc.epochs = p.epochs;
    tc.learning_rate = p.learning_rate;
    tc.batch_size = p.batch_size;
    tc.seed = p.seed;

    // Per-cell extrapolation + coverage modeling; cells are independent.
    std::vector<DenseField> dense_fields(pcis.size());
    std::vector<std::string> cell_errors(pcis.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= pcis.size()) return;
            try {
                const SparseField field = field_of(ingested.grid, pcis[i]);
                const DenseTrainingSet dense = extrapolate_cell(field, spec, ep);
                if (dump_stages) {
                    std::ofstream dump((fs::path(out_dir) /
                                        ("stage_dense_" + std::to_string(pcis[i]) + ".csv"))
                                           .string());
                    dump << "element,value,weight\n";
                    for (int e = 0; e < spec.n_elements(); ++e)
                        dump << e << ',' << format_double(dense.values(e)) << ','
                             << format_double(dense.weights(e)) << '\n';
                }
                TrainConfig cell_tc = tc;
                cell_tc.seed = derive_seed(tc.seed, static_cast<std::uint64_t>(pcis[i]));
                const CoverageModel model = train_coverage_model(dense, cell_tc);
                dense_fields[i] = evaluate_coverage(model);
            } catch (const std::exception& e) {
                cell_errors[i] = e.what();
            }
        }
    };
    const int n_jobs = std::max(1, jobs);
    std::vector<std::thread> pool;
    for (int t = 1; t < n_jobs; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    for (std::size_t i = 0; i < pcis.size(); ++i)
        if (!cell_errors[i].empty())
            throw NumericalError("PCI " + std::to_string(pcis[i]) + ": " + cell_errors[i]);

    FieldMap fields;
    for (std::size_t i = 0; i < pcis.size(); ++i) fields[pcis[i]] = dense_fields[i];

    ReportParams rp;
    rp.index = {p.delta_db, p.t_serv};
    rp.anomaly = {p.t_serv, p.m_abn, p.k_os};
    const DiagnosisReport report = build_report(fields, spec, rp);

    {
        std::ofstream out((fs::path(out_dir) / "report.json").string());
        if (!out) throw IoError("cannot write report.json");
        out << report.to_json_string();
    }
    const ServiceMap smap = service_map(fields, spec, p.t_serv);
    for (const auto& [pci, field] : fields) {
        write_field_csv(
            (fs::path(out_dir) / ("field_" + std::to_string(pci) + ".csv")).string(), field,
            spec);
        write_field_pgm(
            (fs::path(out_dir) / ("field_" + std::to_string(pci) + ".pgm")).string(), field,
            spec);
    }
    write_best_server_geojson((fs::path(out_dir) / "best_server.geojson").string(), smap);

    int anomalies = 0;
    for (const auto& [_, an] : report.anomalies)
        if (an.overshooter || an.fragmented) ++anomalies;
    std::cout << "RESULT ok cells=" << pcis.size() << " anomalies=" << anomalies << "\n";
    return 0;
}

int cmd_train_locator(const std::string& samples_path, const std::string& env_path,
                      const PipelineParams& p, const std::string& out_path) {
    const EnvironmentConfig env = read_env_json_file(env_path);
    std::vector<int> pcis;
    for (const CellConfig& c : env.cells) pcis.push_back(c.pci);
    const std::vector<RawSample> samples = read_samples_csv_file(samples_path);
    TrainConfig tc;
    tc.epochs = p.epochs;
    tc.learning_rate = p.learning_rate;
    tc.batch_size = p.batch_size;
    tc.seed = p.seed;
    const Locator locator = train_locator(samples, pcis, env.spec, tc);
    save_locator_file(out_path, locator);
    std::cout << "RESULT ok pcis=" << pcis.size() << " model=" << out_path << "\n";
    return 0;
}

std::pair<std::string, int> split_addr(const std::string& addr) {
    const auto pos = addr.rfind(':');
    if (pos == std::string::npos)
        throw ConfigError("address must be host:port, got '" + addr + "'");
    return {addr.substr(0, pos), std::stoi(addr.substr(pos + 1))};
}

int cmd_serve(const std::string& listen, const std::string& out_dir, int max_sessions) {
    const auto [host, port] = split_addr(listen);
    (void)host;  // loopback listener
    fs::create_directories(out_dir);
    TcpListener listener(port);
    std::cout << "LISTENING port=" << listener.port() << std::endl;
    RecordStore store;
    int sessions = 0;
    while (max_sessions <= 0 || sessions < max_sessions) {
        auto stream = listener.accept();
        const SessionReport session = collector_session(*stream, store);
        log(kInfo, "session from " + session.agent_id + ": " +
                       std::to_string(session.batches) + " batches, " +
                       std::to_string(session.duplicates) + " duplicates");
        ++sessions;
    }
    // Persist one JSON-lines file per agent.
    for (const std::string& agent : store.agent_ids()) {
        std::ofstream out((fs::path(out_dir) / (agent + ".jsonl")).string());
        for (const ConsolidatedRecord& r : store.records_for(agent)) {
            nlohmann::json readings = nlohmann::json::array();
            for (const Reading& rd : r.readings)
                readings.push_back({{"count", rd.count},
                                    {"mean_rsrp_dbm", rd.mean_rsrp_dbm},
                                    {"pci", rd.pci}});
            out << nlohmann::json{{"readings", std::move(readings)},
                                  {"ue_token", r.ue_token},
                                  {"window_start_ms", r.window_start_ms}}
                       .dump()
                << '\n';
        }
    }
    std::cout << "RESULT ok sessions=" << sessions << " records=" << store.size()
              << " events=" << store.total_count() << "\n";
    return 0;
}

std::vector<MrEvent> read_events_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::vector<MrEvent> events;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != "ue_id,pci,rsrp_dbm,t_ms")
                throw ParseError(lineno, "expected header 'ue_id,pci,rsrp_dbm,t_ms'");
            continue;
        }
        if (line.empty()) continue;
        std::istringstream ss(line);
        MrEvent e;
        std::string field;
        try {
            std::getline(ss, e.ue_id, ',');
            std::getline(ss, field, ',');
            e.pci = std::stoi(field);
            std::getline(ss, field, ',');
            e.rsrp_dbm = std::stod(field);
            std::getline(ss, field, ',');
            e.t_ms = std::stoll(field);
        } catch (const std::exception&) {
            throw ParseError(lineno, "malformed event row");
        }
        events.push_back(std::move(e));
    }
    return events;
}

int cmd_agent(const std::string& connect, const std::string& events_path,
              const AgentConfig& cfg) {
    const std::vector<MrEvent> events = read_events_csv(events_path);
    const auto [host, port] = split_addr(connect);
    auto stream = TcpStream::connect(host, port);
    const AgentReport report = agent_run(events, cfg, *stream);
    std::cout << "RESULT ok batches=" << report.batches_sent
              << " records=" << report.records_sent << " retries=" << report.retries
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ARCADE coverage-anomaly diagnostics"};
    app.require_subcommand(1);
    app.set_config("--config");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate synthetic samples + ground truth");
    std::string sim_env, sim_out = "out";
    std::uint64_t sim_seed = 0;
    int sim_n = 100, sim_mr_ue = 0, sim_mr_reports = 1;
    sim->add_option("--env", sim_env, "Environment config JSON")->required();
    sim->add_option("--seed", sim_seed, "Sampling seed");
    sim->add_option("--samples-per-cell", sim_n, "MDT samples per cell");
    sim->add_option("--mr-ue", sim_mr_ue, "Number of MR UEs (0 = none)");
    sim->add_option("--mr-reports", sim_mr_reports, "Reports per MR UE");
    sim->add_option("--out", sim_out, "Output directory")->required();

    // analyze
    auto* ana = app.add_subcommand("analyze", "Run the diagnosis pipeline on samples");
    std::string ana_samples, ana_env, ana_locator, ana_out = "out";
    GridSpec ana_spec;
    PipelineParams ana_params;
    int ana_jobs = static_cast<int>(std::thread::hardware_concurrency());
    bool ana_dump = false;
    ana->add_option("--samples", ana_samples, "Samples CSV")->required();
    ana->add_option("--env", ana_env, "Environment JSON (grid spec source)");
    ana->add_option("--origin-lat", ana_spec.origin.lat_deg, "Grid origin latitude");
    ana->add_option("--origin-lon", ana_spec.origin.lon_deg, "Grid origin longitude");
    ana->add_option("--cell-size", ana_spec.cell_size_m, "Grid element size, m");
    ana->add_option("--rows", ana_spec.rows, "Grid rows");
    ana->add_option("--cols", ana_spec.cols, "Grid cols");
    ana->add_option("--locator", ana_locator, "Locator model for unpositioned MRs");
    ana->add_option("--jobs", ana_jobs, "Parallel per-cell workers");
    ana->add_flag("--dump-stages", ana_dump, "Dump intermediate stages as CSV");
    ana->add_option("--out", ana_out, "Output directory")->required();
    add_pipeline_flags(ana, ana_params);

    // train-locator
    auto* trn = app.add_subcommand("train-locator", "Train the MR geolocation model");
    std::string trn_samples, trn_env, trn_out;
    PipelineParams trn_params;
    trn_params.epochs = 300;
    trn->add_option("--samples", trn_samples, "MDT samples CSV")->required();
    trn->add_option("--env", trn_env, "Environment JSON (PCI list + grid)")->required();
    trn->add_option("--out", trn_out, "Output model JSON")->required();
    add_pipeline_flags(trn, trn_params);

    // serve
    auto* srv = app.add_subcommand("serve", "Run the central collector");
    std::string srv_listen = "127.0.0.1:0", srv_out = "collector_out";
    int srv_sessions = 0;
    srv->add_option("--listen", srv_listen, "host:port (port 0 = ephemeral)");
    srv->add_option("--out", srv_out, "Directory for per-agent JSON-lines");
    srv->add_option("--sessions", srv_sessions, "Exit after N sessions (0 = forever)");

    // agent
    auto* agt = app.add_subcommand("agent", "Run one AI-Agent session");
    std::string agt_connect, agt_events;
    AgentConfig agt_cfg;
    agt->add_option("--connect", agt_connect, "Collector host:port")->required();
    agt->add_option("--events", agt_events, "Raw MR events CSV")->required();
    agt->add_option("--agent-id", agt_cfg.agent_id, "Agent identity");
    agt->add_option("--salt", agt_cfg.salt, "Anonymization salt");
    agt->add_option("--window-ms", agt_cfg.window_ms, "Consolidation window, ms");
    agt->add_option("--max-batch", agt_cfg.max_batch, "Records per Batch message");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim) return cmd_simulate(sim_env, sim_seed, sim_n, sim_mr_ue, sim_mr_reports,
                                      sim_out);
        if (*ana) {
            GridSpec spec = ana_spec;
            if (!ana_env.empty()) spec = read_env_json_file(ana_env).spec;
            return cmd_analyze(ana_samples, spec, ana_params, ana_locator, ana_out,
                               ana_jobs, ana_dump);
        }
        if (*trn) return cmd_train_locator(trn_samples, trn_env, trn_params, trn_out);
        if (*srv) return cmd_serve(srv_listen, srv_out, srv_sessions);
        if (*agt) return cmd_agent(agt_connect, agt_events, agt_cfg);
    } catch (const TransportError& e) {
        log(kError, e.what());
        return 4;
    } catch (const NumericalError& e) {
        log(kError, e.what());
        return 3;
    } catch (const TrainError& e) {
        log(kError, e.what());
        return 3;
    } catch (const std::exception& e) {
        log(kError, e.what());
        return 2;
    }
    return 1;
}
