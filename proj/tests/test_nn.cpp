#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "arcade/errors.hpp"
#include "arcade/nn.hpp"
#include "arcade/rng.hpp"
#include "arcade/simulator.hpp"

using namespace arcade;

namespace {

bool mlp_equal(const Mlp& a, const Mlp& b) {
    if (a.weights.size() != b.weights.size()) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        if (!(a.weights[l].array() == b.weights[l].array()).all()) return false;
        if (!(a.biases[l].array() == b.biases[l].array()).all()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("init is deterministic per seed, biases zero, weights fan-bounded") {
    const MlpSpec spec{{3, 8, 5, 2}, Activation::Tanh};
    const Mlp a = mlp_init(spec, 42);
    const Mlp b = mlp_init(spec, 42);
    const Mlp c = mlp_init(spec, 43);
    CHECK(mlp_equal(a, b));
    CHECK_FALSE(mlp_equal(a, c));
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        CHECK(a.biases[l].isZero(0.0));
        const double fan_limit =
            std::sqrt(6.0 / (a.weights[l].cols() + a.weights[l].rows()));
        CHECK(a.weights[l].cwiseAbs().maxCoeff() <= fan_limit);
        CHECK(a.weights[l].cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("zero-weight Tanh network outputs the output-layer bias") {
    const MlpSpec spec{{2, 4, 3}, Activation::Tanh};
    Mlp mlp = mlp_init(spec, 1);
    for (auto& w : mlp.weights) w.setZero();
    mlp.biases.back() << 0.3, -0.7, 2.0;
    Eigen::MatrixXd x(2, 5);
    x.setRandom();
    const Eigen::MatrixXd y = mlp_forward(mlp, x);
    for (Eigen::Index j = 0; j < 5; ++j) {
        CHECK(y(0, j) == doctest::Approx(0.3));
        CHECK(y(1, j) == doctest::Approx(-0.7));
        CHECK(y(2, j) == doctest::Approx(2.0));
    }
}

TEST_CASE("gradient matches central finite differences on a (3,8,5,2) spec") {
    for (const Activation act : {Activation::Tanh, Activation::ReLU}) {
        const MlpSpec spec{{3, 8, 5, 2}, act};
        Mlp mlp = mlp_init(spec, 7);
        Rng rng(13);
        Eigen::MatrixXd x(3, 6), t(2, 6);
        for (Eigen::Index i = 0; i < x.size(); ++i)
            x.data()[i] = rng.uniform(-1.0, 1.0);
        for (Eigen::Index i = 0; i < t.size(); ++i)
            t.data()[i] = rng.uniform(-1.0, 1.0);
        Eigen::VectorXd w(6);
        for (Eigen::Index i = 0; i < 6; ++i) w(i) = rng.uniform(0.5, 3.0);

        const Gradients g = mlp_grad(mlp, x, t, w);
        const double eps = 1e-4;
        int checked = 0;
        double max_rel = 0.0;
        // Walk 100 randomly chosen parameters across all layers.
        while (checked < 100) {
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
            ++checked;
        }
        CHECK(max_rel < 1e-4);
    }
}

TEST_CASE("duplicating a sample equals doubling its weight") {
    const MlpSpec spec{{2, 6, 1}, Activation::Tanh};
    const Mlp mlp = mlp_init(spec, 3);
    Eigen::MatrixXd x(2, 3), t(1, 3);
    x << 0.1, 0.5, 0.9, 0.2, 0.6, 0.4;
    t << 1.0, -1.0, 0.5;
    Eigen::VectorXd w(3);
    w << 1.0, 2.0, 1.0;

    Eigen::MatrixXd x_dup(2, 4), t_dup(1, 4);
    x_dup << x(0, 0), x(0, 1), x(0, 1), x(0, 2), x(1, 0), x(1, 1), x(1, 1), x(1, 2);
    t_dup << t(0, 0), t(0, 1), t(0, 1), t(0, 2);
    Eigen::VectorXd w_dup = Eigen::VectorXd::Ones(4);

    const Gradients a = mlp_grad(mlp, x, t, w);
    const Gradients b = mlp_grad(mlp, x_dup, t_dup, w_dup);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
    for (std::size_t l = 0; l < a.d_weights.size(); ++l)
        CHECK((a.d_weights[l] - b.d_weights[l]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalization round-trips within 1e-9 relative") {
    const Normalization norm = Normalization::affine_range(3, -140.0, -20.0);
    Eigen::MatrixXd x(3, 4);
    x << -135.0, -80.0, -21.0, -60.0, -100.0, -139.9, -55.0, -70.0, -20.0, -140.0, -90.0,
        -110.0;
    const Eigen::MatrixXd back = norm.invert(norm.apply(x));
    CHECK(((back - x).cwiseAbs().array() <= 1e-9 * x.cwiseAbs().array()).all());
    const Eigen::MatrixXd normed = norm.apply(x);
    CHECK(normed.minCoeff() >= 0.0);
    CHECK(normed.maxCoeff() <= 1.0);
}

TEST_CASE("training on a constant target converges quickly") {
    const MlpSpec spec{{2, 8, 1}, Activation::Tanh};
    Mlp mlp = mlp_init(spec, 1);
    mlp.input_norm = Normalization::identity(2);
    mlp.output_norm = Normalization::affine_range(1, -140.0, -20.0);
    Rng rng(2);
    Eigen::MatrixXd x(2, 64), t(1, 64);
    for (Eigen::Index i = 0; i < 64; ++i) {
        x(0, i) = rng.uniform();
        x(1, i) = rng.uniform();
        t(0, i) = -95.0;
    }
    TrainConfig cfg;
    cfg.epochs = 3000;
    cfg.learning_rate = 1e-2;
    cfg.seed = 5;
    mlp_train(mlp, x, t, Eigen::VectorXd::Ones(64), cfg);
    const Eigen::MatrixXd y = mlp_predict(mlp, x);
    const double rmse = std::sqrt((y.array() + 95.0).square().mean());
    CHECK(rmse < 0.5);
}

TEST_CASE("loss trace trends downward and training is bit-deterministic") {
    const MlpSpec spec{{2, 16, 1}, Activation::Tanh};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Mlp a = mlp_init(spec, seed);
        a.input_norm = Normalization::identity(2);
        a.output_norm = Normalization::identity(1);
        Mlp b = a;
        Rng rng(100 + seed);
        Eigen::MatrixXd x(2, 128), t(1, 128);
        for (Eigen::Index i = 0; i < 128; ++i) {
            x(0, i) = rng.uniform();
            x(1, i) = rng.uniform();
            t(0, i) = std::sin(3.0 * x(0, i)) * std::cos(2.0 * x(1, i));
        }
        TrainConfig cfg;
        cfg.epochs = 60;
        cfg.seed = seed;
        const TrainResult ra = mlp_train(a, x, t, Eigen::VectorXd::Ones(128), cfg);
        mlp_train(b, x, t, Eigen::VectorXd::Ones(128), cfg);
        CHECK(mlp_equal(a, b));

        double head = 0.0, tail = 0.0;
        for (int i = 0; i < 10; ++i) {
            head += ra.loss_trace[i];
            tail += ra.loss_trace[ra.loss_trace.size() - 1 - i];
        }
        CHECK(tail <= head);
    }
}

TEST_CASE("coverage model covers every grid element and learns the field") {
    EnvironmentConfig env;
    env.spec.origin = {45.0, 9.0};
    env.spec.cell_size_m = 50.0;
    env.spec.rows = 25;
    env.spec.cols = 25;
    env.noise_floor_dbm = -140.0;
    env.measurement_sigma_db = 0.0;
    CellConfig cell;
    cell.pci = 1;
    cell.site = env.spec.center_of({12, 12});
    cell.beamwidth_deg = 360.0;
    env.cells.push_back(cell);
    const DenseField truth = ground_truth_field(env, 1);

    DenseTrainingSet dense;
    dense.spec = env.spec;
    const int n = env.spec.n_elements();
    dense.values.resize(n);
    dense.weights = Eigen::VectorXd::Ones(n);
    dense.source.assign(n, DenseSource::Real);
    for (int e = 0; e < n; ++e) dense.values(e) = truth[e];

    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.batch_size = 128;
    cfg.learning_rate = 3e-3;
    cfg.seed = 1;
    const CoverageModel model = train_coverage_model(dense, cfg);
    const DenseField pred = evaluate_coverage(model);
    REQUIRE(static_cast<int>(pred.size()) == n);
    double se = 0.0;
    for (int e = 0; e < n; ++e) {
        CHECK(pred[e] >= -140.0);
        CHECK(pred[e] <= -20.0);
        se += (pred[e] - truth[e]) * (pred[e] - truth[e]);
    }
    CHECK(std::sqrt(se / n) < 6.0);
}

TEST_CASE("fingerprints encode missing PCIs as the floor") {
    const std::vector<int> pcis{3, 7, 12};
    const auto fp = make_fingerprint({{7, -90.0}, {99, -50.0}}, pcis, -140.0);
    REQUIRE(fp.size() == 3);
    CHECK(fp[0] == -140.0);
    CHECK(fp[1] == -90.0);
    CHECK(fp[2] == -140.0);  // PCI 99 outside the order is ignored
}

TEST_CASE("locator geolocates a dominant-PCI training point near its site") {
    EnvironmentConfig env;
    env.spec.origin = {45.0, 9.0};
    env.spec.cell_size_m = 50.0;
    env.spec.rows = 30;
    env.spec.cols = 30;
    env.noise_floor_dbm = -140.0;
    env.measurement_sigma_db = 0.0;
    for (int k = 0; k < 4; ++k) {
        CellConfig cell;
        cell.pci = k + 1;
        cell.site = env.spec.center_of({k < 2 ? 5 : 24, k % 2 == 0 ? 5 : 24});
        cell.beamwidth_deg = 360.0;
        cell.pl_exponent = 4.0;
        env.cells.push_back(cell);
    }
    const auto mdt = sample_mdt(env, 400, 3);
    const std::vector<int> pcis{1, 2, 3, 4};
    TrainConfig cfg;
    cfg.epochs = 500;
    cfg.batch_size = 64;
    cfg.learning_rate = 3e-3;
    cfg.seed = 2;
    const Locator loc = train_locator(mdt, pcis, env.spec, cfg);

    // Query with the training fingerprint observed at cell 1's site element;
    // the locator should place it close to where it was measured.
    const FingerprintSet fps = build_fingerprints(mdt, pcis, env.spec);
    const EastNorth site = env.spec.to_local(env.cells[0].site);
    Eigen::Index qi = 0;
    double best = 1e300;
    for (Eigen::Index i = 0; i < fps.inputs.cols(); ++i) {
        const double d = std::hypot(fps.targets_m(0, i) - site.east_m,
                                    fps.targets_m(1, i) - site.north_m);
        if (d < best) {
            best = d;
            qi = i;
        }
    }
    REQUIRE(best <= 2.0 * env.spec.cell_size_m);
    const Eigen::VectorXd col = fps.inputs.col(qi);
    const GeoPoint p = geolocate(loc, std::vector<double>(col.data(), col.data() + col.size()));
    const EastNorth got = env.spec.to_local(p);
    const double err = std::hypot(got.east_m - fps.targets_m(0, qi),
                                  got.north_m - fps.targets_m(1, qi));
    CHECK(err <= 3.0 * env.spec.cell_size_m);

    // All-floor fingerprint still lands inside the grid (clamp contract).
    const GeoPoint q = geolocate(loc, std::vector<double>(4, -140.0));
    const EastNorth qe = env.spec.to_local(q);
    CHECK(qe.east_m >= 0.0);
    CHECK(qe.east_m <= env.spec.width_m());
    CHECK(qe.north_m >= 0.0);
    CHECK(qe.north_m <= env.spec.height_m());
}

TEST_CASE("model files round-trip exactly") {
    const MlpSpec spec{{3, 8, 2}, Activation::ReLU};
    Locator loc;
    loc.mlp = mlp_init(spec, 21);
    loc.mlp.input_norm = Normalization::affine_range(3, -140.0, -20.0);
    loc.mlp.output_norm = Normalization::affine_range(2, 0.0, 1500.0);
    loc.pcis = {2, 5, 9};
    loc.spec.origin = {45.0, 9.0};
    loc.spec.rows = 30;
    loc.spec.cols = 30;
    const std::string path = "test_locator_roundtrip.json";
    save_locator_file(path, loc);
    const Locator back = load_locator_file(path);
    std::remove(path.c_str());
    CHECK(back.pcis == loc.pcis);
    CHECK(back.spec.rows == 30);
    CHECK(mlp_equal(back.mlp, loc.mlp));
    CHECK((back.mlp.input_norm.offset.array() == loc.mlp.input_norm.offset.array()).all());

    CoverageModel cm;
    cm.mlp = mlp_init(MlpSpec{{2, 4, 1}, Activation::Tanh}, 5);
    cm.mlp.input_norm = Normalization::identity(2);
    cm.mlp.output_norm = Normalization::affine_range(1, -140.0, -20.0);
    cm.spec = loc.spec;
    const std::string cpath = "test_coverage_roundtrip.json";
    save_coverage_model_file(cpath, cm);
    const CoverageModel cback = load_coverage_model_file(cpath);
    std::remove(cpath.c_str());
    CHECK(mlp_equal(cback.mlp, cm.mlp));
}

TEST_CASE("non-finite loss raises a training error with the epoch") {
    // ReLU passes the exploded activations through unbounded, so an absurd
    // learning rate overflows the loss within a couple of epochs.
    const MlpSpec spec{{1, 4, 1}, Activation::ReLU};
    Mlp mlp = mlp_init(spec, 1);
    mlp.input_norm = Normalization::identity(1);
    mlp.output_norm = Normalization::identity(1);
    Eigen::MatrixXd x(1, 4), t(1, 4);
    x << 0.0, 1.0, 2.0, 3.0;
    t << 0.0, 1.0, 0.0, 1.0;
    TrainConfig cfg;
    cfg.learning_rate = 1e200;  // guaranteed blow-up
    cfg.epochs = 50;
    CHECK_THROWS_AS(mlp_train(mlp, x, t, Eigen::VectorXd::Ones(4), cfg), TrainError);
}
