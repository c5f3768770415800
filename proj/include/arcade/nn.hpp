#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arcade/extrapolation.hpp"
#include "arcade/grid.hpp"

namespace arcade {

enum class Activation { Tanh, ReLU };

struct MlpSpec {
    std::vector<int> layer_sizes;  // input, hidden..., output
    Activation activation = Activation::Tanh;

    void validate() const;
    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
};

// Per-dimension affine map: normalized = (x - offset) / scale.
struct Normalization {
    Eigen::VectorXd offset;
    Eigen::VectorXd scale;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        return scale.cwiseInverse().asDiagonal() * (x.colwise() - offset);
    }
    Eigen::MatrixXd invert(const Eigen::MatrixXd& x) const {
        return (scale.asDiagonal() * x).colwise() + offset;
    }
    static Normalization identity(int dim) {
        return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
    }
    // Maps [lo, hi] per dimension to [0, 1].
    static Normalization affine_range(int dim, double lo, double hi) {
        return {Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi - lo)};
    }
};

struct Mlp {
    MlpSpec spec;
    std::vector<Eigen::MatrixXd> weights;  // per layer, (out x in)
    std::vector<Eigen::VectorXd> biases;
    Normalization input_norm;
    Normalization output_norm;
};

// Glorot-uniform weights, zero biases, deterministic per seed.
Mlp mlp_init(const MlpSpec& spec, std::uint64_t seed);

// Forward pass in normalized space: x is (input_dim x batch).
Eigen::MatrixXd mlp_forward(const Mlp& mlp, const Eigen::MatrixXd& x);

// Denormalizing convenience: raw in, raw out.
Eigen::MatrixXd mlp_predict(const Mlp& mlp, const Eigen::MatrixXd& x_raw);

struct Gradients {
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_biases;
    double loss = 0.0;  // weighted MSE: sum_i w_i |y_i - t_i|^2 / sum_i w_i
};

Gradients mlp_grad(const Mlp& mlp, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets,
                   const Eigen::VectorXd& sample_weights);

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 500;
    int batch_size = 64;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-6;

    void validate() const;
};

struct TrainResult {
    std::vector<double> loss_trace;  // mean weighted MSE per epoch, normalized space
};

// Mini-batch Adam over raw inputs/targets; normalization from mlp.input_norm /
// mlp.output_norm is applied internally. Throws TrainError on non-finite loss.
TrainResult mlp_train(Mlp& mlp, const Eigen::MatrixXd& inputs_raw,
                      const Eigen::MatrixXd& targets_raw,
                      const Eigen::VectorXd& sample_weights, const TrainConfig& cfg);

// ---- Coverage model -------------------------------------------------------

struct CoverageModel {
    Mlp mlp;
    GridSpec spec;
    double floor_dbm = -140.0;
};

CoverageModel train_coverage_model(const DenseTrainingSet& dense, const TrainConfig& cfg,
                                   const MlpSpec& spec = {{2, 64, 64, 1}, Activation::Tanh});

// Evaluates the model on every grid element; clamped to [floor_dbm, -20].
DenseField evaluate_coverage(const CoverageModel& model);

// ---- Locator --------------------------------------------------------------

// Fixed ascending-PCI fingerprint; missing entries encoded as floor_dbm.
std::vector<double> make_fingerprint(const std::map<int, double>& readings,
                                     const std::vector<int>& pcis, double floor_dbm);

struct FingerprintSet {
    Eigen::MatrixXd inputs;     // (|pcis| x n)
    Eigen::MatrixXd targets_m;  // (2 x n), east/north meters
    std::vector<int> element;   // grid element per fingerprint
};

// Groups positioned samples by grid element into one fingerprint per element
// (per-PCI mean), targeted at the mean position of its contributing samples.
FingerprintSet build_fingerprints(std::span<const RawSample> samples,
                                  const std::vector<int>& pcis, const GridSpec& spec,
                                  double floor_dbm = -140.0);

struct Locator {
    Mlp mlp;
    std::vector<int> pcis;  // ascending, the fingerprint dimension order
    GridSpec spec;
    double floor_dbm = -140.0;
};

Locator train_locator(std::span<const RawSample> mdt, const std::vector<int>& pcis,
                      const GridSpec& spec, const TrainConfig& cfg,
                      const std::vector<int>& hidden = {128, 64});

// Inferred position, clamped to the grid extent.
GeoPoint geolocate(const Locator& locator, std::span<const double> fingerprint);

// ---- Model persistence ----------------------------------------------------
// Versioned JSON; floats serialized as shortest round-trip decimals, so
// load(save(m)) restores weights exactly.

void save_coverage_model_file(const std::string& path, const CoverageModel& model);
CoverageModel load_coverage_model_file(const std::string& path);
void save_locator_file(const std::string& path, const Locator& locator);
Locator load_locator_file(const std::string& path);

}  // namespace arcade
