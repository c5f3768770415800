#include "arcade/extrapolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arcade/errors.hpp"
#include "arcade/labeling.hpp"
#include "arcade/rng.hpp"

namespace arcade {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + mid);
        return (lo + hi) / 2.0;
    }
    return hi;
}

Eigen::MatrixXd kernel_matrix(const Eigen::Matrix<double, Eigen::Dynamic, 2>& a,
                              const Eigen::Matrix<double, Eigen::Dynamic, 2>& b,
                              const GpHyper& hyper) {
    const double inv2l2 = 1.0 / (2.0 * hyper.lengthscale_m * hyper.lengthscale_m);
    const double s2 = hyper.signal_std_db * hyper.signal_std_db;
    Eigen::MatrixXd k(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            const double dx = a(i, 0) - b(j, 0);
            const double dy = a(i, 1) - b(j, 1);
            k(i, j) = s2 * std::exp(-(dx * dx + dy * dy) * inv2l2);
        }
    }
    return k;
}

}  // namespace

std::map<int, RegionLabel> classify_regions(const SparseField& field, const GridSpec& spec,
                                            const ClassifyParams& params) {
    if (field.empty()) throw ConfigError("classify_regions: empty field");

    std::vector<char> mask(static_cast<std::size_t>(spec.n_elements()), 0);
    std::vector<double> all_values;
    int strongest_idx = -1;
    double strongest = -std::numeric_limits<double>::infinity();
    for (const auto& [idx, value] : field) {
        all_values.push_back(value);
        if (value >= params.t_class_dbm) mask[static_cast<std::size_t>(idx)] = 1;
        if (value > strongest) {
            strongest = value;
            strongest_idx = idx;
        }
    }
    const double global_median = median_of(all_values);
    std::vector<double> dev;
    dev.reserve(all_values.size());
    for (double v : all_values) dev.push_back(std::abs(v - global_median));
    const double mad = median_of(dev);

    const Components comps = connected_components8(mask, spec.rows, spec.cols);

    // Largest component wins; ties go to the one holding the strongest element.
    int principal = -1;
    std::size_t principal_size = 0;
    for (std::size_t i = 0; i < comps.members.size(); ++i) {
        const std::size_t sz = comps.members[i].size();
        if (sz > principal_size ||
            (sz == principal_size && strongest_idx >= 0 &&
             comps.label[static_cast<std::size_t>(strongest_idx)] == static_cast<int>(i))) {
            principal = static_cast<int>(i);
            principal_size = sz;
        }
    }

    std::map<int, RegionLabel> labels;
    for (const auto& [idx, value] : field) {
        const int comp = comps.label[static_cast<std::size_t>(idx)];
        if (comp == -1 || comp == principal) {
            labels[idx] = RegionLabel::Normal;  // below threshold or principal blob
            continue;
        }
        if (comps.members[static_cast<std::size_t>(comp)].size() >=
            static_cast<std::size_t>(params.m_abn)) {
            labels[idx] = RegionLabel::Abnormal;
            continue;
        }
        // Small detached component: outlier if its median deviates from the
        // per-cell median by more than 3x MAD, otherwise folded into Normal.
        std::vector<double> comp_values;
        for (int e : comps.members[static_cast<std::size_t>(comp)]) {
            auto it = field.find(e);
            if (it != field.end()) comp_values.push_back(it->second);
        }
        const bool outlier = std::abs(median_of(comp_values) - global_median) > 3.0 * mad;
        labels[idx] = outlier ? RegionLabel::Outlier : RegionLabel::Normal;
    }
    return labels;
}

AugmentedSet augment(const SparseField& field, const std::map<int, RegionLabel>& labels,
                     const GridSpec& spec, const AugmentParams& params) {
    std::vector<int> elements;
    std::vector<double> values, weights;
    std::vector<Provenance> provenance;

    std::vector<GridCoord> real_coords;
    for (const auto& [idx, value] : field) {
        const auto it = labels.find(idx);
        const RegionLabel label = it == labels.end() ? RegionLabel::Normal : it->second;
        real_coords.push_back(spec.coord_of(idx));
        if (label == RegionLabel::Outlier) continue;
        elements.push_back(idx);
        values.push_back(value);
        weights.push_back(label == RegionLabel::Abnormal ? params.w_emph : 1.0);
        provenance.push_back(Provenance::Real);
    }

    auto add_pseudo = [&](int idx) {
        elements.push_back(idx);
        values.push_back(params.floor_dbm);
        weights.push_back(1.0);
        provenance.push_back(Provenance::BoundaryPseudo);
    };

    std::vector<char> pseudo_done(static_cast<std::size_t>(spec.n_elements()), 0);
    // Border elements of the grid unpopulated for this cell.
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            if (r != 0 && r != spec.rows - 1 && c != 0 && c != spec.cols - 1) continue;
            const int idx = r * spec.cols + c;
            if (field.count(idx)) continue;
            add_pseudo(idx);
            pseudo_done[static_cast<std::size_t>(idx)] = 1;
        }
    }
    // Coarse lattice over unpopulated interior far from every real sample.
    const double r_bc2 = static_cast<double>(params.r_bc) * params.r_bc;
    for (int r = 0; r < spec.rows; r += params.s_bc) {
        for (int c = 0; c < spec.cols; c += params.s_bc) {
            const int idx = r * spec.cols + c;
            if (field.count(idx) || pseudo_done[static_cast<std::size_t>(idx)]) continue;
            bool far = true;
            for (const GridCoord& rc : real_coords) {
                const double dr = rc.row - r, dc = rc.col - c;
                if (dr * dr + dc * dc <= r_bc2) {
                    far = false;
                    break;
                }
            }
            if (far) {
                add_pseudo(idx);
                pseudo_done[static_cast<std::size_t>(idx)] = 1;
            }
        }
    }

    AugmentedSet out;
    const Eigen::Index n = static_cast<Eigen::Index>(values.size());
    out.positions.resize(n, 2);
    out.values.resize(n);
    out.weights.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const EastNorth p = spec.center_local(spec.coord_of(elements[i]));
        out.positions(i, 0) = p.east_m;
        out.positions(i, 1) = p.north_m;
        out.values(i) = values[i];
        out.weights(i) = weights[i];
    }
    out.provenance = std::move(provenance);
    out.element = std::move(elements);
    return out;
}

GpModel fit_gp(const AugmentedSet& aug, const GpHyper& hyper) {
    if (aug.size() < 2) throw ConfigError("fit_gp: need at least 2 samples");
    if (!(hyper.lengthscale_m > 0.0) || !(hyper.signal_std_db > 0.0) ||
        !(hyper.noise_std_db > 0.0) || !(hyper.jitter > 0.0))
        throw ConfigError("fit_gp: hyperparameters must be positive");

    GpModel model;
    model.hyper = hyper;
    model.train_points = aug.positions;
    model.weights = aug.weights;
    model.mean_offset_db = aug.values.dot(aug.weights) / aug.weights.sum();
    model.train_values = (aug.values.array() - model.mean_offset_db).matrix();

    Eigen::MatrixXd k = kernel_matrix(aug.positions, aug.positions, hyper);
    const double noise_var = hyper.noise_std_db * hyper.noise_std_db;
    for (Eigen::Index i = 0; i < aug.size(); ++i)
        k(i, i) += noise_var / aug.weights(i);

    double jitter = hyper.jitter;
    for (int attempt = 0; attempt <= 3; ++attempt) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) {
            model.chol_lower = llt.matrixL();
            model.alpha = llt.solve(model.train_values);
            model.jitter_used = jitter;
            return model;
        }
        jitter *= 10.0;
    }
    throw NumericalError(
        "fit_gp: factorization failed after jitter escalation (n=" +
        std::to_string(aug.size()) + ", lengthscale=" + std::to_string(hyper.lengthscale_m) +
        ", final jitter=" + std::to_string(jitter) +
        ", diag range=[" + std::to_string(k.diagonal().minCoeff()) + "," +
        std::to_string(k.diagonal().maxCoeff()) + "])");
}

GpPrediction gp_predict(const GpModel& model,
                        const Eigen::Matrix<double, Eigen::Dynamic, 2>& points,
                        bool with_variance) {
    GpPrediction out;
    const Eigen::MatrixXd kstar = kernel_matrix(points, model.train_points, model.hyper);
    out.mean_dbm = ((kstar * model.alpha).array() + model.mean_offset_db).matrix();
    if (with_variance) {
        const double s2 = model.hyper.signal_std_db * model.hyper.signal_std_db;
        // v = L^-1 k*; var = s^2 - v.v, clamped against numerical dust.
        const Eigen::MatrixXd v = model.chol_lower.triangularView<Eigen::Lower>().solve(
            kstar.transpose());
        out.variance =
            (s2 - v.colwise().squaredNorm().transpose().array()).max(0.0).matrix();
    }
    return out;
}

double log_marginal_likelihood(const AugmentedSet& aug, const GpHyper& hyper) {
    const GpModel model = fit_gp(aug, hyper);
    const double n = static_cast<double>(aug.size());
    double log_det_half = 0.0;
    for (Eigen::Index i = 0; i < model.chol_lower.rows(); ++i)
        log_det_half += std::log(model.chol_lower(i, i));
    return -0.5 * model.train_values.dot(model.alpha) - log_det_half -
           0.5 * n * std::log(2.0 * M_PI);
}

TuneResult tune_hyper(const AugmentedSet& aug, std::span<const GpHyper> candidates) {
    if (candidates.empty()) throw ConfigError("tune_hyper: empty candidate grid");
    TuneResult out;
    bool have_best = false;
    for (const GpHyper& h : candidates) {
        double lml;
        try {
            lml = log_marginal_likelihood(aug, h);
        } catch (const NumericalError&) {
            out.skipped.push_back(h);
            continue;
        }
        if (!have_best || lml > out.best_lml ||
            (lml == out.best_lml && h.lengthscale_m < out.best.lengthscale_m)) {
            out.best = h;
            out.best_lml = lml;
            have_best = true;
        }
    }
    if (!have_best) throw NumericalError("tune_hyper: every candidate failed to fit");
    return out;
}

DenseTrainingSet extrapolate_cell(const SparseField& field, const GridSpec& spec,
                                  const ExtrapolationParams& params) {
    if (field.empty()) throw ConfigError("extrapolate_cell: empty field");
    const auto labels = classify_regions(field, spec, params.classify);
    AugmentedSet aug = augment(field, labels, spec, params.augment);

    // Desk-scale exact GP: thin deterministically past the cap.
    if (aug.size() > params.max_train_points) {
        std::vector<Eigen::Index> keep(static_cast<std::size_t>(aug.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = static_cast<Eigen::Index>(i);
        Rng rng(0xA5C0DEull);
        rng.shuffle(keep);
        keep.resize(static_cast<std::size_t>(params.max_train_points));
        std::sort(keep.begin(), keep.end());
        AugmentedSet thinned;
        thinned.positions.resize(params.max_train_points, 2);
        thinned.values.resize(params.max_train_points);
        thinned.weights.resize(params.max_train_points);
        for (Eigen::Index i = 0; i < params.max_train_points; ++i) {
            thinned.positions.row(i) = aug.positions.row(keep[static_cast<std::size_t>(i)]);
            thinned.values(i) = aug.values(keep[static_cast<std::size_t>(i)]);
            thinned.weights(i) = aug.weights(keep[static_cast<std::size_t>(i)]);
            thinned.provenance.push_back(aug.provenance[static_cast<std::size_t>(keep[i])]);
            thinned.element.push_back(aug.element[static_cast<std::size_t>(keep[i])]);
        }
        aug = std::move(thinned);
    }

    const GpHyper hyper = params.hyper.value_or(default_hyper(spec));
    const GpModel model = fit_gp(aug, hyper);

    DenseTrainingSet out;
    out.spec = spec;
    const int n = spec.n_elements();
    out.values.resize(n);
    out.weights = Eigen::VectorXd::Ones(n);
    out.source.assign(static_cast<std::size_t>(n), DenseSource::GpFill);

    for (Eigen::Index i = 0; i < aug.size(); ++i) {
        const int e = aug.element[static_cast<std::size_t>(i)];
        out.values(e) = aug.values(i);
        out.weights(e) = aug.weights(i);
        out.source[static_cast<std::size_t>(e)] =
            aug.provenance[static_cast<std::size_t>(i)] == Provenance::Real
                ? DenseSource::Real
                : DenseSource::BoundaryPseudo;
    }

    std::vector<int> fill;
    for (int e = 0; e < n; ++e)
        if (out.source[static_cast<std::size_t>(e)] == DenseSource::GpFill) fill.push_back(e);
    if (!fill.empty()) {
        Eigen::Matrix<double, Eigen::Dynamic, 2> pts(static_cast<Eigen::Index>(fill.size()), 2);
        for (std::size_t i = 0; i < fill.size(); ++i) {
            const EastNorth p = spec.center_local(spec.coord_of(fill[i]));
            pts(static_cast<Eigen::Index>(i), 0) = p.east_m;
            pts(static_cast<Eigen::Index>(i), 1) = p.north_m;
        }
        const GpPrediction pred = gp_predict(model, pts, false);
        for (std::size_t i = 0; i < fill.size(); ++i)
            out.values(fill[i]) = pred.mean_dbm(static_cast<Eigen::Index>(i));
    }
    return out;
}

}  // namespace arcade
