#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "arcade/grid.hpp"

namespace arcade {

struct GpHyper {
    double lengthscale_m = 150.0;
    double signal_std_db = 12.0;
    double noise_std_db = 2.0;
    double jitter = 1e-8;
};

inline GpHyper default_hyper(const GridSpec& spec) {
    return {3.0 * spec.cell_size_m, 12.0, 2.0, 1e-8};
}

enum class RegionLabel { Normal, Abnormal, Outlier };

struct ClassifyParams {
    double t_class_dbm = -115.0;  // occupancy threshold for region building
    int m_abn = 5;                // min elements for an Abnormal component
};

// Per populated element: Normal / Abnormal / Outlier (see module contract).
std::map<int, RegionLabel> classify_regions(const SparseField& field, const GridSpec& spec,
                                            const ClassifyParams& params = {});

enum class Provenance { Real, BoundaryPseudo, EmphasisCopy };

struct AugmentedSet {
    Eigen::Matrix<double, Eigen::Dynamic, 2> positions;  // meters (east, north)
    Eigen::VectorXd values;                              // dBm
    Eigen::VectorXd weights;
    std::vector<Provenance> provenance;
    std::vector<int> element;  // grid element index per sample

    Eigen::Index size() const { return values.size(); }
};

struct AugmentParams {
    double floor_dbm = -140.0;
    int r_bc = 10;       // lattice pseudo-samples only beyond this many elements
    int s_bc = 5;        // lattice stride, elements
    double w_emph = 3.0; // weight for Abnormal samples
};

AugmentedSet augment(const SparseField& field, const std::map<int, RegionLabel>& labels,
                     const GridSpec& spec, const AugmentParams& params = {});

struct GpModel {
    GpHyper hyper;
    Eigen::Matrix<double, Eigen::Dynamic, 2> train_points;
    Eigen::VectorXd train_values;
    Eigen::VectorXd weights;
    double mean_offset_db = 0.0;
    Eigen::MatrixXd chol_lower;  // L with L L^T = K + diag(noise) + jitter I
    Eigen::VectorXd alpha;
    double jitter_used = 0.0;
};

// Weighted RBF-kernel GP fit; per-sample noise variance = noise_std^2 / weight.
// Escalates jitter x10 up to 3 times before throwing NumericalError.
GpModel fit_gp(const AugmentedSet& aug, const GpHyper& hyper);

struct GpPrediction {
    Eigen::VectorXd mean_dbm;
    Eigen::VectorXd variance;  // empty unless requested
};

GpPrediction gp_predict(const GpModel& model,
                        const Eigen::Matrix<double, Eigen::Dynamic, 2>& points,
                        bool with_variance = false);

double log_marginal_likelihood(const AugmentedSet& aug, const GpHyper& hyper);

struct TuneResult {
    GpHyper best;
    double best_lml = 0.0;
    std::vector<GpHyper> skipped;  // candidates whose fit failed
};

// Argmax of the log marginal likelihood over the candidates; ties break to the
// smaller lengthscale.
TuneResult tune_hyper(const AugmentedSet& aug, std::span<const GpHyper> candidates);

enum class DenseSource { Real, BoundaryPseudo, GpFill };

// One value per grid element: real mean where populated (non-outlier), the
// boundary floor at pseudo-sample sites, GP posterior mean everywhere else.
struct DenseTrainingSet {
    GridSpec spec;
    Eigen::VectorXd values;   // size rows*cols
    Eigen::VectorXd weights;
    std::vector<DenseSource> source;
};

struct ExtrapolationParams {
    ClassifyParams classify;
    AugmentParams augment;
    std::optional<GpHyper> hyper;  // default_hyper(spec) if unset
    int max_train_points = 4000;
};

DenseTrainingSet extrapolate_cell(const SparseField& field, const GridSpec& spec,
                                  const ExtrapolationParams& params = {});

}  // namespace arcade
