#include "arcade/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "arcade/errors.hpp"
#include "arcade/grid_io.hpp"
#include "arcade/rng.hpp"

namespace arcade {

namespace {

using json = nlohmann::json;

constexpr double kMaxRsrpDbm = -20.0;

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
    if (act == Activation::Tanh) return z.array().tanh().matrix();
    return z.cwiseMax(0.0);
}

Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& z,
                              Activation act) {
    if (act == Activation::Tanh) return (1.0 - a.array().square()).matrix();
    return (z.array() > 0.0).cast<double>().matrix();
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto nr = j.size();
    if (nr == 0) throw ConfigError("model JSON: empty matrix");
    const auto nc = j.at(0).size();
    Eigen::MatrixXd m(nr, nc);
    for (std::size_t r = 0; r < nr; ++r) {
        if (j.at(r).size() != nc) throw ConfigError("model JSON: ragged matrix");
        for (std::size_t c = 0; c < nc; ++c) m(r, c) = j.at(r).at(c).get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j.at(i).get<double>();
    return v;
}

json mlp_to_json(const Mlp& mlp) {
    json j;
    j["layer_sizes"] = mlp.spec.layer_sizes;
    j["activation"] = mlp.spec.activation == Activation::Tanh ? "tanh" : "relu";
    json layers = json::array();
    for (std::size_t l = 0; l < mlp.weights.size(); ++l)
        layers.push_back({{"w", matrix_to_json(mlp.weights[l])},
                          {"b", vector_to_json(mlp.biases[l])}});
    j["layers"] = std::move(layers);
    j["input_norm"] = {{"offset", vector_to_json(mlp.input_norm.offset)},
                       {"scale", vector_to_json(mlp.input_norm.scale)}};
    j["output_norm"] = {{"offset", vector_to_json(mlp.output_norm.offset)},
                        {"scale", vector_to_json(mlp.output_norm.scale)}};
    return j;
}

Mlp mlp_from_json(const json& j) {
    Mlp mlp;
    mlp.spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    mlp.spec.activation =
        j.at("activation").get<std::string>() == "relu" ? Activation::ReLU : Activation::Tanh;
    mlp.spec.validate();
    for (const auto& jl : j.at("layers")) {
        mlp.weights.push_back(matrix_from_json(jl.at("w")));
        mlp.biases.push_back(vector_from_json(jl.at("b")));
    }
    mlp.input_norm = {vector_from_json(j.at("input_norm").at("offset")),
                      vector_from_json(j.at("input_norm").at("scale"))};
    mlp.output_norm = {vector_from_json(j.at("output_norm").at("offset")),
                       vector_from_json(j.at("output_norm").at("scale"))};
    if (mlp.weights.size() + 1 != mlp.spec.layer_sizes.size())
        throw ConfigError("model JSON: layer count mismatch");
    return mlp;
}

json spec_to_json(const GridSpec& spec) {
    return {{"origin_lat", spec.origin.lat_deg},
            {"origin_lon", spec.origin.lon_deg},
            {"cell_size_m", spec.cell_size_m},
            {"rows", spec.rows},
            {"cols", spec.cols}};
}

GridSpec spec_from_json(const json& j) {
    GridSpec spec;
    spec.origin = {j.at("origin_lat").get<double>(), j.at("origin_lon").get<double>()};
    spec.cell_size_m = j.at("cell_size_m").get<double>();
    spec.rows = j.at("rows").get<int>();
    spec.cols = j.at("cols").get<int>();
    spec.validate();
    return spec;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void dump_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace

void MlpSpec::validate() const {
    if (layer_sizes.size() < 3)
        throw ConfigError("MlpSpec: need input, at least one hidden, and output layer");
    for (int s : layer_sizes)
        if (s < 1) throw ConfigError("MlpSpec: all layer sizes must be >= 1");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
    if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
}

Mlp mlp_init(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    Mlp mlp;
    mlp.spec = spec;
    Rng rng(derive_seed(seed, 0x11117));
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const int fan_in = spec.layer_sizes[l];
        const int fan_out = spec.layer_sizes[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = rng.uniform(-limit, limit);
        mlp.weights.push_back(std::move(w));
        mlp.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    mlp.input_norm = Normalization::identity(spec.input_dim());
    mlp.output_norm = Normalization::identity(spec.output_dim());
    return mlp;
}

Eigen::MatrixXd mlp_forward(const Mlp& mlp, const Eigen::MatrixXd& x) {
    if (x.rows() != mlp.spec.input_dim())
        throw ConfigError("mlp_forward: input dimension mismatch");
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        Eigen::MatrixXd z = (mlp.weights[l] * a).colwise() + mlp.biases[l];
        a = (l + 1 == mlp.weights.size()) ? z : activate(z, mlp.spec.activation);
    }
    return a;
}

Eigen::MatrixXd mlp_predict(const Mlp& mlp, const Eigen::MatrixXd& x_raw) {
    return mlp.output_norm.invert(mlp_forward(mlp, mlp.input_norm.apply(x_raw)));
}

Gradients mlp_grad(const Mlp& mlp, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets,
                   const Eigen::VectorXd& sample_weights) {
    if (x.rows() != mlp.spec.input_dim())
        throw ConfigError("mlp_grad: input dimension mismatch");
    if (targets.rows() != mlp.spec.output_dim() || targets.cols() != x.cols() ||
        sample_weights.size() != x.cols())
        throw ConfigError("mlp_grad: target/weight shape mismatch");

    const std::size_t n_layers = mlp.weights.size();
    std::vector<Eigen::MatrixXd> activations(n_layers + 1);
    std::vector<Eigen::MatrixXd> pre(n_layers);
    activations[0] = x;
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = (mlp.weights[l] * activations[l]).colwise() + mlp.biases[l];
        activations[l + 1] =
            (l + 1 == n_layers) ? pre[l] : activate(pre[l], mlp.spec.activation);
    }

    const double weight_sum = sample_weights.sum();
    const Eigen::MatrixXd err = activations[n_layers] - targets;
    Gradients g;
    g.loss = (err.colwise().squaredNorm() * sample_weights.asDiagonal()).sum() / weight_sum;

    // dL/dy_i = 2 w_i (y_i - t_i) / sum(w)
    Eigen::MatrixXd delta = (2.0 / weight_sum) * (err * sample_weights.asDiagonal());
    g.d_weights.resize(n_layers);
    g.d_biases.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        g.d_weights[l] = delta * activations[l].transpose();
        g.d_biases[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (mlp.weights[l].transpose() * delta).array() *
                    activate_grad(activations[l], pre[l - 1], mlp.spec.activation).array();
        }
    }
    return g;
}

TrainResult mlp_train(Mlp& mlp, const Eigen::MatrixXd& inputs_raw,
                      const Eigen::MatrixXd& targets_raw,
                      const Eigen::VectorXd& sample_weights, const TrainConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = inputs_raw.cols();
    if (n == 0) throw ConfigError("mlp_train: empty dataset");
    if (targets_raw.cols() != n || sample_weights.size() != n)
        throw ConfigError("mlp_train: dataset shape mismatch");

    const Eigen::MatrixXd inputs = mlp.input_norm.apply(inputs_raw);
    const Eigen::MatrixXd targets = mlp.output_norm.apply(targets_raw);

    // Adam state mirrors the parameter shapes.
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
    for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
        mw.push_back(Eigen::MatrixXd::Zero(mlp.weights[l].rows(), mlp.weights[l].cols()));
        vw.push_back(Eigen::MatrixXd::Zero(mlp.weights[l].rows(), mlp.weights[l].cols()));
        mb.push_back(Eigen::VectorXd::Zero(mlp.biases[l].size()));
        vb.push_back(Eigen::VectorXd::Zero(mlp.biases[l].size()));
    }

    Rng rng(derive_seed(cfg.seed, 0x7EA1));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);

    TrainResult result;
    std::int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        double epoch_weight = 0.0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n - start);
            Eigen::MatrixXd bx(inputs.rows(), bs);
            Eigen::MatrixXd bt(targets.rows(), bs);
            Eigen::VectorXd bw(bs);
            for (Eigen::Index i = 0; i < bs; ++i) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
                bx.col(i) = inputs.col(src);
                bt.col(i) = targets.col(src);
                bw(i) = sample_weights(src);
            }
            Gradients g = mlp_grad(mlp, bx, bt, bw);
            if (!std::isfinite(g.loss))
                throw TrainError(epoch, "non-finite training loss");
            epoch_loss += g.loss * bw.sum();
            epoch_weight += bw.sum();

            ++step;
            const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
                const Eigen::MatrixXd gw = g.d_weights[l] + cfg.weight_decay * mlp.weights[l];
                mw[l] = cfg.beta1 * mw[l] + (1.0 - cfg.beta1) * gw;
                vw[l] = cfg.beta2 * vw[l] + (1.0 - cfg.beta2) * gw.cwiseProduct(gw);
                mlp.weights[l].array() -=
                    cfg.learning_rate * (mw[l].array() / corr1) /
                    ((vw[l].array() / corr2).sqrt() + cfg.epsilon);

                const Eigen::VectorXd& gb = g.d_biases[l];
                mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * gb;
                vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * gb.cwiseProduct(gb);
                mlp.biases[l].array() -=
                    cfg.learning_rate * (mb[l].array() / corr1) /
                    ((vb[l].array() / corr2).sqrt() + cfg.epsilon);
            }
        }
        result.loss_trace.push_back(epoch_loss / epoch_weight);
    }
    return result;
}

CoverageModel train_coverage_model(const DenseTrainingSet& dense, const TrainConfig& cfg,
                                   const MlpSpec& spec) {
    spec.validate();
    if (spec.input_dim() != 2 || spec.output_dim() != 1)
        throw ConfigError("coverage model needs a 2-input, 1-output spec");
    const GridSpec& gs = dense.spec;
    const int n = gs.n_elements();
    if (dense.values.size() != n)
        throw ConfigError("coverage model: dense set does not cover the grid");

    CoverageModel model;
    model.spec = gs;
    model.mlp = mlp_init(spec, cfg.seed);
    // Grid coordinates normalized to [0,1]; targets affine from [floor, -20].
    model.mlp.input_norm = {Eigen::Vector2d::Zero(),
                            Eigen::Vector2d(gs.width_m(), gs.height_m())};
    model.mlp.output_norm =
        Normalization::affine_range(1, model.floor_dbm, kMaxRsrpDbm);

    Eigen::MatrixXd inputs(2, n);
    Eigen::MatrixXd targets(1, n);
    for (int i = 0; i < n; ++i) {
        const EastNorth p = gs.center_local(gs.coord_of(i));
        inputs(0, i) = p.east_m;
        inputs(1, i) = p.north_m;
        targets(0, i) = dense.values(i);
    }
    mlp_train(model.mlp, inputs, targets, dense.weights, cfg);
    return model;
}

DenseField evaluate_coverage(const CoverageModel& model) {
    const GridSpec& gs = model.spec;
    const int n = gs.n_elements();
    Eigen::MatrixXd inputs(2, n);
    for (int i = 0; i < n; ++i) {
        const EastNorth p = gs.center_local(gs.coord_of(i));
        inputs(0, i) = p.east_m;
        inputs(1, i) = p.north_m;
    }
    const Eigen::MatrixXd y = mlp_predict(model.mlp, inputs);
    DenseField out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = std::clamp(y(0, i), model.floor_dbm, kMaxRsrpDbm);
    return out;
}

std::vector<double> make_fingerprint(const std::map<int, double>& readings,
                                     const std::vector<int>& pcis, double floor_dbm) {
    std::vector<double> fp(pcis.size(), floor_dbm);
    for (std::size_t i = 0; i < pcis.size(); ++i) {
        const auto it = readings.find(pcis[i]);
        if (it != readings.end())
            fp[i] = std::clamp(it->second, floor_dbm, kMaxRsrpDbm);
    }
    return fp;
}

FingerprintSet build_fingerprints(std::span<const RawSample> samples,
                                  const std::vector<int>& pcis, const GridSpec& spec,
                                  double floor_dbm) {
    // element -> pci -> (sum, count); plus mean position per element.
    std::map<int, std::map<int, std::pair<double, int>>> acc;
    std::map<int, std::pair<EastNorth, int>> pos_acc;
    for (const RawSample& s : samples) {
        if (!s.position) continue;
        const auto coord = spec.project(*s.position);
        if (!coord) continue;
        const int idx = spec.index_of(*coord);
        auto& slot = acc[idx][s.pci];
        slot.first += s.rsrp_dbm;
        slot.second += 1;
        const EastNorth p = spec.to_local(*s.position);
        auto& pa = pos_acc[idx];
        pa.first.east_m += p.east_m;
        pa.first.north_m += p.north_m;
        pa.second += 1;
    }

    FingerprintSet out;
    const Eigen::Index n = static_cast<Eigen::Index>(acc.size());
    out.inputs.resize(static_cast<Eigen::Index>(pcis.size()), n);
    out.targets_m.resize(2, n);
    Eigen::Index col = 0;
    for (const auto& [idx, by_pci] : acc) {
        std::map<int, double> readings;
        for (const auto& [pci, sum_count] : by_pci)
            readings[pci] = sum_count.first / sum_count.second;
        const std::vector<double> fp = make_fingerprint(readings, pcis, floor_dbm);
        for (std::size_t d = 0; d < fp.size(); ++d)
            out.inputs(static_cast<Eigen::Index>(d), col) = fp[d];
        const auto& pa = pos_acc[idx];
        out.targets_m(0, col) = pa.first.east_m / pa.second;
        out.targets_m(1, col) = pa.first.north_m / pa.second;
        out.element.push_back(idx);
        ++col;
    }
    return out;
}

Locator train_locator(std::span<const RawSample> mdt, const std::vector<int>& pcis,
                      const GridSpec& spec, const TrainConfig& cfg,
                      const std::vector<int>& hidden) {
    Locator loc;
    loc.pcis = pcis;
    std::sort(loc.pcis.begin(), loc.pcis.end());
    loc.spec = spec;

    const FingerprintSet fps = build_fingerprints(mdt, loc.pcis, spec, loc.floor_dbm);
    if (fps.inputs.cols() == 0) throw ConfigError("train_locator: empty training set");

    MlpSpec mspec;
    mspec.layer_sizes.push_back(static_cast<int>(loc.pcis.size()));
    mspec.layer_sizes.insert(mspec.layer_sizes.end(), hidden.begin(), hidden.end());
    mspec.layer_sizes.push_back(2);
    loc.mlp = mlp_init(mspec, cfg.seed);
    loc.mlp.input_norm = Normalization::affine_range(static_cast<int>(loc.pcis.size()),
                                                     loc.floor_dbm, kMaxRsrpDbm);
    loc.mlp.output_norm = {Eigen::Vector2d::Zero(),
                           Eigen::Vector2d(spec.width_m(), spec.height_m())};

    mlp_train(loc.mlp, fps.inputs, fps.targets_m,
              Eigen::VectorXd::Ones(fps.inputs.cols()), cfg);
    return loc;
}

GeoPoint geolocate(const Locator& locator, std::span<const double> fingerprint) {
    if (fingerprint.size() != locator.pcis.size())
        throw ConfigError("geolocate: fingerprint dimension mismatch");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(fingerprint.size()), 1);
    for (std::size_t i = 0; i < fingerprint.size(); ++i)
        x(static_cast<Eigen::Index>(i), 0) = fingerprint[i];
    const Eigen::MatrixXd y = mlp_predict(locator.mlp, x);
    const EastNorth p{std::clamp(y(0, 0), 0.0, locator.spec.width_m()),
                      std::clamp(y(1, 0), 0.0, locator.spec.height_m())};
    return locator.spec.to_geographic(p);
}

void save_coverage_model_file(const std::string& path, const CoverageModel& model) {
    json j;
    j["version"] = 1;
    j["kind"] = "coverage";
    j["grid"] = spec_to_json(model.spec);
    j["floor_dbm"] = model.floor_dbm;
    j["mlp"] = mlp_to_json(model.mlp);
    dump_json_file(path, j);
}

CoverageModel load_coverage_model_file(const std::string& path) {
    const json j = load_json_file(path);
    try {
        if (j.at("version").get<int>() != 1 || j.at("kind").get<std::string>() != "coverage")
            throw ConfigError(path + ": not a version-1 coverage model");
        CoverageModel model;
        model.spec = spec_from_json(j.at("grid"));
        model.floor_dbm = j.at("floor_dbm").get<double>();
        model.mlp = mlp_from_json(j.at("mlp"));
        return model;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void save_locator_file(const std::string& path, const Locator& locator) {
    json j;
    j["version"] = 1;
    j["kind"] = "locator";
    j["grid"] = spec_to_json(locator.spec);
    j["floor_dbm"] = locator.floor_dbm;
    j["pcis"] = locator.pcis;
    j["mlp"] = mlp_to_json(locator.mlp);
    dump_json_file(path, j);
}

Locator load_locator_file(const std::string& path) {
    const json j = load_json_file(path);
    try {
        if (j.at("version").get<int>() != 1 || j.at("kind").get<std::string>() != "locator")
            throw ConfigError(path + ": not a version-1 locator model");
        Locator loc;
        loc.spec = spec_from_json(j.at("grid"));
        loc.floor_dbm = j.at("floor_dbm").get<double>();
        loc.pcis = j.at("pcis").get<std::vector<int>>();
        loc.mlp = mlp_from_json(j.at("mlp"));
        if (static_cast<int>(loc.pcis.size()) != loc.mlp.spec.input_dim())
            throw ConfigError(path + ": pci list does not match input dimension");
        return loc;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace arcade
