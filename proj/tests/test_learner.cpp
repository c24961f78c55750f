#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "patchnet/errors.hpp"
#include "patchnet/learner.hpp"

using namespace patchnet;
using namespace patchnet::nn;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

constexpr double pi = std::numbers::pi;

Network random_network(std::size_t inputs, std::size_t hidden, Rng& rng) {
    Network n = init_network(inputs, hidden, rng);
    n.zip([&](auto& t) {
        for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.uniform(-1.0, 1.0);
    });
    return n;
}

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    MatrixXd m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-2.0, 2.0);
    return m;
}

double loss_of(const Network& n, const MatrixXd& z, const RowVectorXd& t) {
    const RowVectorXd y = forward(n, z);
    return (y - t).squaredNorm() / static_cast<double>(t.size());
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("patchnet_test_" + name);
}

// 1D Dirichlet dataset on nx points with dU/dt = a * (3-point second difference).
data::SnapshotDataset operator_dataset(std::size_t trajectories, std::size_t snapshots, std::uint64_t seed,
                                       double a = std::sqrt(0.21)) {
    const std::size_t nx = 21;
    const double dx = 1.0 / static_cast<double>(nx - 1);
    Rng rng(seed);
    data::SnapshotDataset ds;
    ds.geometry.dim = 1;
    ds.geometry.nx = nx;
    ds.geometry.dirichlet_ends = true;
    for (std::size_t i = 0; i < nx; ++i) ds.geometry.x.push_back(static_cast<double>(i) * dx);
    for (std::size_t t = 0; t < trajectories; ++t) {
        data::Trajectory tr;
        tr.index = t;
        for (std::size_t s = 0; s < snapshots; ++s) {
            data::Record r;
            r.t = static_cast<double>(s);
            r.u.assign(nx, 0.0);
            for (int term = 0; term < 4; ++term) {
                const double amp = rng.uniform(-1, 1), l = rng.uniform(0, 4), ph = rng.uniform(0, 2 * pi);
                for (std::size_t i = 0; i < nx; ++i) r.u[i] += amp * std::sin(l * pi * ds.geometry.x[i] + ph);
            }
            r.dudt.assign(nx, 0.0);
            for (std::size_t i = 1; i + 1 < nx; ++i) r.dudt[i] = a * (r.u[i - 1] - 2 * r.u[i] + r.u[i + 1]) / (dx * dx);
            tr.records.push_back(std::move(r));
        }
        ds.trajectories.push_back(std::move(tr));
    }
    return ds;
}

// sum |p - t|^2 / sum |t - mean t|^2 over interior nodes.
double relative_mse(const Model& m, const data::SnapshotDataset& ds) {
    double num = 0.0, mean = 0.0, den = 0.0;
    std::size_t count = 0;
    std::vector<double> all;
    for (const auto& tr : ds.trajectories)
        for (const auto& r : tr.records) {
            std::vector<double> pred;
            if (const auto* p = std::get_if<MlpParams>(&m.params)) {
                auto spec = p->features;
                const VectorXd y = mlp_forward(*p, features::compute(r.u, r.u.size(), 1, spec));
                pred.assign(y.data(), y.data() + y.size());
            } else {
                pred = stencil_forward(std::get<StencilNetParams>(m.params), r.u, r.u.size());
            }
            for (std::size_t i = 1; i + 1 < r.u.size(); ++i) {
                num += (pred[i] - r.dudt[i]) * (pred[i] - r.dudt[i]);
                all.push_back(r.dudt[i]);
                mean += r.dudt[i];
                ++count;
            }
        }
    mean /= static_cast<double>(count);
    for (double v : all) den += (v - mean) * (v - mean);
    return num / den;
}

}  // namespace

// --- initialisation ------------------------------------------------------

TEST(Init, GlorotBoundsZeroBiasesAndDeterminism) {
    Rng a(42), b(42);
    const Network n = init_network(3, 32, a);
    EXPECT_EQ(n, init_network(3, 32, b));
    EXPECT_EQ(n.parameter_count(), 32u * 3 + 32 + 32 * 32 + 32 + 32 + 1);
    const double bound = std::sqrt(6.0 / 35.0);
    EXPECT_NEAR(bound, 0.4140, 5e-5);
    EXPECT_LE(n.A1.cwiseAbs().maxCoeff(), bound);
    EXPECT_GT(n.A1.cwiseAbs().maxCoeff(), 0.5 * bound);
    EXPECT_LE(n.A2.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 64.0));
    EXPECT_LE(n.A3.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 33.0));
    EXPECT_TRUE(n.b1.isZero(0.0) && n.b2.isZero(0.0) && n.b3.isZero(0.0));
}

TEST(Init, StencilShapes) {
    Rng rng(1);
    const auto p1 = init_stencil(1, 3, Padding::replicate, 0.1, 32, rng);
    EXPECT_EQ(p1.net.inputs(), 3u);
    EXPECT_EQ(p1.net.hidden(), 32u);
    EXPECT_EQ(p1.net.A2.rows(), 32);
    EXPECT_EQ(p1.net.A3.rows(), 1);
    const auto p2 = init_stencil(2, 3, Padding::periodic, 0.1, 32, rng);
    EXPECT_EQ(p2.net.inputs(), 9u);
    EXPECT_THROW(init_stencil(3, 3, Padding::periodic, 0.1, 32, rng), ConfigError);
    EXPECT_THROW(init_stencil(1, 4, Padding::periodic, 0.1, 32, rng), ConfigError);
    const auto m = init_mlp(features::FeatureSpec::default_2d(), 32, rng);
    EXPECT_EQ(m.net.inputs(), 6u);
    EXPECT_EQ(m.input.scale.size(), 6);
}

// --- forward -------------------------------------------------------------

TEST(Forward, ZeroNetworkReturnsFinalBias) {
    Network n = Network::zeros(3, 32);
    n.b3(0) = 0.25;
    Rng rng(2);
    const RowVectorXd y = forward(n, random_matrix(3, 10, rng));
    for (Eigen::Index k = 0; k < y.size(); ++k) EXPECT_EQ(y(k), 0.25);
}

TEST(Forward, HandEvaluatedSingleNode) {
    Network n = Network::zeros(1, 1);
    n.A1(0, 0) = 1;
    n.b1(0) = -1;
    n.A2(0, 0) = 2;
    n.A3(0, 0) = 1;
    MatrixXd z(1, 2);
    z << 3, 0.5;
    const RowVectorXd y = forward(n, z);
    EXPECT_EQ(y(0), 4.0);
    EXPECT_EQ(y(1), 0.0);

    MlpParams p;
    p.net = n;
    p.features = {{features::Derivative::value}, features::Method::finite_difference, 3, 1.0};
    p.input = Normalization::identity(1);
    MatrixXd f(1, 1);
    f << 3;
    EXPECT_EQ(mlp_forward(p, f)(0), 4.0);
}

TEST(Forward, MlpIsPointwise) {
    Rng rng(3);
    MlpParams p = init_mlp(features::FeatureSpec::default_1d(0.1), 16, rng);
    p.net = random_network(3, 16, rng);
    const MatrixXd f = random_matrix(12, 3, rng);
    const VectorXd y = mlp_forward(p, f);
    // Permuting rows permutes outputs.
    MatrixXd g = f;
    g.row(2).swap(g.row(9));
    const VectorXd yg = mlp_forward(p, g);
    EXPECT_DOUBLE_EQ(yg(2), y(9));
    EXPECT_DOUBLE_EQ(yg(9), y(2));
    // Perturbing one row changes only that output.
    MatrixXd h = f;
    h(5, 1) += 0.3;
    const VectorXd yh = mlp_forward(p, h);
    for (Eigen::Index k = 0; k < y.size(); ++k)
        if (k != 5) {
            EXPECT_EQ(yh(k), y(k));
        }
    EXPECT_NE(yh(5), y(5));
    EXPECT_THROW(mlp_forward(p, random_matrix(4, 2, rng)), InputError);
}

TEST(Im2col, PaddingModes) {
    const std::vector<double> u{1, 2, 3, 4};
    const MatrixXd r = im2col(u, 4, 1, 1, 3, Padding::replicate);
    EXPECT_EQ(r.col(0), (VectorXd(3) << 1, 1, 2).finished());
    EXPECT_EQ(r.col(3), (VectorXd(3) << 3, 4, 4).finished());
    const MatrixXd p = im2col(u, 4, 1, 1, 3, Padding::periodic);
    EXPECT_EQ(p.col(0), (VectorXd(3) << 4, 1, 2).finished());
    EXPECT_EQ(p.col(3), (VectorXd(3) << 3, 4, 1).finished());

    // 2D: tap (p, q) at row (p + 1) * 3 + (q + 1); field index i * ny + j.
    std::vector<double> v(12);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(k);
    const MatrixXd c = im2col(v, 4, 3, 2, 3, Padding::periodic);
    ASSERT_EQ(c.rows(), 9);
    ASSERT_EQ(c.cols(), 12);
    // Point (0, 0): tap (-1, -1) wraps to (3, 2) = 11; tap (1, 0) is (1, 0) = 3.
    EXPECT_EQ(c(0, 0), 11.0);
    EXPECT_EQ(c(7, 0), 3.0);
    EXPECT_EQ(c(4, 5), 5.0);
    EXPECT_THROW(im2col(u, 4, 1, 1, 5, Padding::replicate), InputError);
    EXPECT_THROW(im2col(u, 3, 1, 1, 3, Padding::replicate), InputError);
}

TEST(StencilForward, ConstructedLaplacian) {
    // First kernel [1, -2, 1] / dx^2 into one channel; a large pre-bias keeps
    // every ReLU in its linear regime and the final bias removes it.
    const double B = 1e3, dx = 0.5;
    StencilNetParams p;
    p.net = Network::zeros(3, 1);
    p.net.A1 << 1 / (dx * dx), -2 / (dx * dx), 1 / (dx * dx);
    p.net.b1(0) = B;
    p.net.A2(0, 0) = 1;
    p.net.A3(0, 0) = 1;
    p.net.b3(0) = -B;
    p.input = Normalization::identity(1);
    p.spacing = dx;
    const std::vector<double> u{0, 1, 4, 9, 16};
    const auto y = stencil_forward(p, u, 5);
    EXPECT_NEAR(y[0], (0 - 0 + 1) / (dx * dx), 1e-10);
    for (int i = 1; i < 4; ++i) EXPECT_NEAR(y[i], 2 / (dx * dx), 1e-10);
    EXPECT_NEAR(y[4], (9 - 32 + 16) / (dx * dx), 1e-10);
}

TEST(StencilForward, ZeroWeightsGiveFinalBias) {
    Rng rng(4);
    auto p = init_stencil(1, 3, Padding::replicate, 0.1, 8, rng);
    p.net = Network::zeros(3, 8);
    p.net.b3(0) = -0.5;
    for (double v : stencil_forward(p, std::vector<double>{1, 5, 2, 7}, 4)) EXPECT_EQ(v, -0.5);
}

TEST(StencilForward, PeriodicTranslationEquivariance) {
    Rng rng(5);
    auto p = init_stencil(2, 3, Padding::periodic, 0.1, 8, rng);
    p.net = random_network(9, 8, rng);
    const std::size_t nx = 8, ny = 6, sx = 3, sy = 2;
    std::vector<double> u(nx * ny), s(nx * ny);
    for (double& v : u) v = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) s[((i + sx) % nx) * ny + (j + sy) % ny] = u[i * ny + j];
    const auto yu = stencil_forward(p, u, nx, ny), ys = stencil_forward(p, s, nx, ny);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j)
            EXPECT_NEAR(ys[((i + sx) % nx) * ny + (j + sy) % ny], yu[i * ny + j], 1e-14);
    EXPECT_THROW(stencil_forward(p, std::vector<double>(7), nx, ny), InputError);
}

// --- loss and gradients --------------------------------------------------

TEST(Loss, Examples) {
    const std::vector<double> p{0, 0}, t{1, 3};
    EXPECT_EQ(loss_mse(p, t), 5.0);
    EXPECT_EQ(loss_mse(t, t), 0.0);
    const std::vector<double> p3{0, 0}, t3{3, 9};
    EXPECT_NEAR(loss_mse(p3, t3), 9 * loss_mse(p, t), 1e-12);
    EXPECT_THROW(loss_mse(std::vector<double>{}, std::vector<double>{}), InputError);
    EXPECT_THROW(loss_mse(p, std::vector<double>{1.0}), InputError);
}

TEST(Backward, FinalBiasGradientByHand) {
    Network n = Network::zeros(2, 4);
    n.b3(0) = 1.0;
    Rng rng(6);
    const auto g = backward(n, random_matrix(2, 5, rng), RowVectorXd::Zero(5));
    EXPECT_DOUBLE_EQ(g.grad.b3(0), 2.0);
    EXPECT_DOUBLE_EQ(g.loss, 1.0);
}

TEST(Backward, DeadReluLayerHasZeroFirstLayerGradient) {
    Rng rng(7);
    Network n = random_network(3, 6, rng);
    n.b1.setConstant(-100.0);
    const auto g = backward(n, random_matrix(3, 9, rng), random_matrix(1, 9, rng));
    EXPECT_TRUE(g.grad.A1.isZero(0.0));
    EXPECT_TRUE(g.grad.b1.isZero(0.0));
    EXPECT_TRUE(g.grad.A2.isZero(0.0));
}

TEST(Backward, MatchesCentralDifferences) {
    Rng rng(8);
    for (std::size_t inputs : {3u, 6u, 9u}) {
        for (int draw = 0; draw < 10; ++draw) {
            Network n = random_network(inputs, 7, rng);
            const MatrixXd z = random_matrix(static_cast<Eigen::Index>(inputs), 11, rng);
            const RowVectorXd t = random_matrix(1, 11, rng);
            const auto g = backward(n, z, t);
            EXPECT_NEAR(g.loss, loss_of(n, z, t), 1e-12 * g.loss);

            Network probe = n;
            double num = 0.0, den = 0.0;
            probe.zip(
                [&](auto& p, auto& a) {
                    for (Eigen::Index k = 0; k < p.size(); ++k) {
                        const double keep = p.data()[k], step = 1e-6;
                        p.data()[k] = keep + step;
                        const double up = loss_of(probe, z, t);
                        p.data()[k] = keep - step;
                        const double down = loss_of(probe, z, t);
                        p.data()[k] = keep;
                        const double fd = (up - down) / (2 * step);
                        num += (a.data()[k] - fd) * (a.data()[k] - fd);
                        den += fd * fd;
                    }
                },
                const_cast<Network&>(g.grad));
            EXPECT_LT(std::sqrt(num / den), 1e-6) << "inputs " << inputs << " draw " << draw;
        }
    }
}

// --- Adam ----------------------------------------------------------------

TEST(Adam, FirstStepExamples) {
    Network theta = Network::zeros(1, 1), g = Network::zeros(1, 1);
    auto st = AdamState::for_network(theta);
    adam_update(theta, g, st);
    EXPECT_EQ(st.t, 1u);
    EXPECT_TRUE(theta.b3.isZero(0.0) && theta.A1.isZero(0.0));

    theta = Network::zeros(1, 1);
    st = AdamState::for_network(theta);
    g.b3(0) = 1.0;
    adam_update(theta, g, st);
    EXPECT_NEAR(theta.b3(0), -1e-3 / (1 + 1e-8), 1e-18);
    EXPECT_NEAR(theta.b3(0), -9.99999990e-4, 1e-12);

    for (double c : {1e-3, 7.0, 1e4}) {
        Network t2 = Network::zeros(1, 1), g2 = Network::zeros(1, 1);
        auto s2 = AdamState::for_network(t2);
        g2.b3(0) = -c;
        adam_update(t2, g2, s2);
        EXPECT_NEAR(t2.b3(0), 1e-3, 1e-3 * 1e-5);
    }
}

TEST(Adam, SecondStepFollowsRecursion) {
    Network theta = Network::zeros(1, 1), g = Network::zeros(1, 1);
    auto st = AdamState::for_network(theta, 0.01);
    g.b3(0) = 2.0;
    adam_update(theta, g, st);
    g.b3(0) = -1.0;
    adam_update(theta, g, st);
    const double m = 0.9 * (0.1 * 2.0) + 0.1 * -1.0, v = 0.999 * (0.001 * 4.0) + 0.001 * 1.0;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    EXPECT_NEAR(theta.b3(0), -0.01 * 2.0 / (2.0 + 1e-8) - 0.01 * mh / (std::sqrt(vh) + 1e-8), 1e-15);
    EXPECT_NEAR(st.m.b3(0), m, 1e-15);
    EXPECT_NEAR(st.v.b3(0), v, 1e-15);
}

// --- training ------------------------------------------------------------

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.validation_fraction = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c.validation_fraction = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.learning_rate = -1;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, ConstantTargetIsLearned) {
    // Same feature row everywhere, then random rows; the bias alone fits both.
    Rng rng(9);
    for (Eigen::Index rows : {2000, 8000}) {
        MatrixXd f = rows == 2000 ? MatrixXd(RowVectorXd::LinSpaced(3, -1.0, 2.0).replicate(rows, 1))
                                  : random_matrix(rows, 3, rng);
        MlpData d{f, VectorXd::Constant(rows, 0.7)};
        TrainConfig c;
        c.max_epochs = 500;
        c.patience = 500;
        c.seed = 1;
        const auto p = train_mlp(d, features::FeatureSpec::default_1d(0.1), c);
        const VectorXd y = mlp_forward(p, d.features);
        EXPECT_LT((y.array() - 0.7).square().mean(), 1e-8) << rows;
        EXPECT_NEAR(p.target_scale, 0.7, 1e-12);
    }
}

TEST(Train, DeterministicAndBestSoFarMonotone) {
    const auto ds = operator_dataset(3, 10, 21);
    TrainConfig c;
    c.max_epochs = 15;
    c.seed = 5;
    DatasetOptions o;
    o.features = features::FeatureSpec::default_1d(1.0);
    for (Architecture a : {Architecture::mlp, Architecture::stencil}) {
        TrainHistory h1, h2;
        const Model m1 = train(a, ds, c, o, &h1), m2 = train(a, ds, c, o, &h2);
        EXPECT_EQ(h1.train_loss, h2.train_loss);
        EXPECT_EQ(h1.validation_loss, h2.validation_loss);
        ASSERT_EQ(h1.best_so_far.size(), h1.validation_loss.size());
        for (std::size_t e = 1; e < h1.best_so_far.size(); ++e) EXPECT_LE(h1.best_so_far[e], h1.best_so_far[e - 1]);
        EXPECT_DOUBLE_EQ(h1.best_so_far.back(), h1.validation_loss[h1.best_epoch]);
        if (a == Architecture::mlp)
            EXPECT_EQ(std::get<MlpParams>(m1.params).net, std::get<MlpParams>(m2.params).net);
        else
            EXPECT_EQ(std::get<StencilNetParams>(m1.params).net, std::get<StencilNetParams>(m2.params).net);
        EXPECT_EQ(m1.provenance.at("architecture"), to_string(a));
    }
}

TEST(Train, LearnsHomogenizedOperatorFromSyntheticData) {
    const auto train_set = operator_dataset(12, 20, 31), test_set = operator_dataset(4, 10, 77);
    TrainConfig c;
    c.max_epochs = 150;
    c.patience = 150;
    c.seed = 3;
    DatasetOptions o;
    o.features = features::FeatureSpec::default_1d(1.0);
    for (Architecture a : {Architecture::mlp, Architecture::stencil}) {
        const Model m = train(a, train_set, c, o);
        EXPECT_LT(relative_mse(m, test_set), 0.02) << to_string(a);
    }
}

TEST(Train, RejectsNonFiniteData) {
    Rng rng(10);
    MlpData d{random_matrix(20, 3, rng), VectorXd::Zero(20)};
    d.targets(4) = std::nan("");
    EXPECT_THROW(train_mlp(d, features::FeatureSpec::default_1d(0.1), TrainConfig{}), InputError);
}

TEST(DatasetRows, BoundaryNodesExcludedByDefault) {
    const auto ds = operator_dataset(2, 3, 1);
    const auto spec = features::FeatureSpec::default_1d(1.0);
    EXPECT_EQ(mlp_data(ds, spec, false).features.rows(), 6 * 19);
    EXPECT_EQ(mlp_data(ds, spec, true).features.rows(), 6 * 21);
    const auto sd = stencil_data(ds, false);
    EXPECT_EQ(sd.fields.size(), 6u);
    EXPECT_EQ(sd.mask.front(), 0);
    EXPECT_EQ(sd.mask[1], 1);
    EXPECT_EQ(sd.padding, Padding::replicate);
    // Features use the dataset's spacing, not the spec's placeholder.
    const auto rows = mlp_data(ds, spec, false);
    EXPECT_NEAR(rows.features(0, 2) * std::sqrt(0.21), rows.targets(0), 1e-9);
}

TEST(GridSpacing, UniformGridsOnly) {
    data::Geometry g;
    g.nx = 3;
    g.x = {0.0, 0.5, 1.0};
    EXPECT_DOUBLE_EQ(grid_spacing(g), 0.5);
    g.x = {0.0, 0.4, 1.0};
    EXPECT_THROW(grid_spacing(g), InputError);
}

// --- persistence ---------------------------------------------------------

TEST(ModelFile, RoundTripBothArchitectures) {
    const auto ds = operator_dataset(2, 6, 13);
    TrainConfig c;
    c.max_epochs = 3;
    DatasetOptions o;
    o.features = features::FeatureSpec::default_1d(1.0);
    for (Architecture a : {Architecture::mlp, Architecture::stencil}) {
        const Model m = train(a, ds, c, o);
        const auto path = temp_path(to_string(a) + ".json");
        save_model(m, path);
        const Model r = load_model(path);
        EXPECT_EQ(r.architecture(), a);
        EXPECT_EQ(r.provenance, m.provenance);
        if (a == Architecture::mlp) {
            const auto& x = std::get<MlpParams>(m.params);
            const auto& y = std::get<MlpParams>(r.params);
            EXPECT_EQ(x.net, y.net);
            EXPECT_EQ(x.input, y.input);
            EXPECT_EQ(x.target_scale, y.target_scale);
            EXPECT_EQ(x.features.derivatives, y.features.derivatives);
            EXPECT_EQ(x.features.spacing, y.features.spacing);
        } else {
            const auto& x = std::get<StencilNetParams>(m.params);
            const auto& y = std::get<StencilNetParams>(r.params);
            EXPECT_EQ(x.net, y.net);
            EXPECT_EQ(x.input, y.input);
            EXPECT_EQ(x.spacing, y.spacing);
            EXPECT_EQ(x.kernel, y.kernel);
            EXPECT_EQ(x.padding, y.padding);
        }
        std::filesystem::remove(path);
    }
}

TEST(ModelFile, MalformedFilesAreInputErrors) {
    const auto path = temp_path("bad_model.json");
    {
        std::ofstream out(path);
        out << "{\"format\": \"patchnet-model\", \"architecture\": \"mlp\"}";
    }
    EXPECT_THROW(load_model(path), InputError);
    {
        std::ofstream out(path);
        out << "not json";
    }
    EXPECT_THROW(load_model(path), InputError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_model(path), InputError);
    EXPECT_THROW(architecture_from_string("cnn"), ConfigError);
}
