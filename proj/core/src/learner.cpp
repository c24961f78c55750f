#include "patchnet/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "patchnet/errors.hpp"

namespace patchnet::nn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

Network Network::zeros(std::size_t inputs, std::size_t hidden) {
    const auto in = static_cast<Index>(inputs), h = static_cast<Index>(hidden);
    return {MatrixXd::Zero(h, in), MatrixXd::Zero(h, h), MatrixXd::Zero(1, h),
            VectorXd::Zero(h),     VectorXd::Zero(h),    VectorXd::Zero(1)};
}

std::size_t Network::parameter_count() const {
    return static_cast<std::size_t>(A1.size() + A2.size() + A3.size() + b1.size() + b2.size() + b3.size());
}

void Network::check_shapes() const {
    const Index h = A1.rows();
    if (h == 0 || A1.cols() == 0 || b1.size() != h || A2.rows() != h || A2.cols() != h || b2.size() != h ||
        A3.rows() != 1 || A3.cols() != h || b3.size() != 1)
        throw InputError("network: layer shapes do not chain");
}

Network init_network(std::size_t inputs, std::size_t hidden, Rng& rng) {
    Network net = Network::zeros(inputs, hidden);
    auto fill = [&rng](MatrixXd& A) {
        const double bound = std::sqrt(6.0 / static_cast<double>(A.rows() + A.cols()));
        for (Index i = 0; i < A.rows(); ++i)
            for (Index j = 0; j < A.cols(); ++j) A(i, j) = rng.uniform(-bound, bound);
    };
    fill(net.A1);
    fill(net.A2);
    fill(net.A3);
    return net;
}

Normalization Normalization::identity(std::size_t n) {
    return {VectorXd::Zero(static_cast<Index>(n)), VectorXd::Ones(static_cast<Index>(n))};
}

MatrixXd Normalization::apply(const MatrixXd& columns) const {
    if (columns.rows() != shift.size()) throw InputError("normalization: channel count mismatch");
    return (columns.colwise() - shift).array().colwise() / scale.array();
}

std::string to_string(Architecture a) { return a == Architecture::mlp ? "mlp" : "stencil"; }

Architecture architecture_from_string(const std::string& s) {
    if (s == "mlp") return Architecture::mlp;
    if (s == "stencil") return Architecture::stencil;
    throw ConfigError("unknown architecture '" + s + "'");
}

Architecture Model::architecture() const {
    return std::holds_alternative<MlpParams>(params) ? Architecture::mlp : Architecture::stencil;
}

MlpParams init_mlp(const features::FeatureSpec& spec, std::size_t hidden, Rng& rng) {
    spec.validate();
    return {init_network(spec.width(), hidden, rng), Normalization::identity(spec.width()), 1.0, spec};
}

StencilNetParams init_stencil(std::size_t dim, std::size_t kernel, Padding padding, double spacing, std::size_t hidden,
                              Rng& rng) {
    if ((dim != 1 && dim != 2) || kernel < 1 || kernel % 2 == 0) throw ConfigError("stencil net: bad dimension or kernel");
    const std::size_t taps = dim == 1 ? kernel : kernel * kernel;
    return {init_network(taps, hidden, rng), dim, kernel, padding, Normalization::identity(1), 1.0, spacing};
}

namespace {

struct Activations {
    MatrixXd z1, h1, z2, h2;
    RowVectorXd y;
};

Activations run(const Network& net, const MatrixXd& z) {
    if (z.rows() != net.A1.cols()) throw InputError("network: input width mismatch");
    Activations a;
    a.z1 = (net.A1 * z).colwise() + net.b1;
    a.h1 = a.z1.cwiseMax(0.0);
    a.z2 = (net.A2 * a.h1).colwise() + net.b2;
    a.h2 = a.z2.cwiseMax(0.0);
    a.y = (net.A3 * a.h2).array() + net.b3(0);
    return a;
}

}  // namespace

RowVectorXd forward(const Network& net, const MatrixXd& z) {
    net.check_shapes();
    return run(net, z).y;
}

VectorXd mlp_forward(const MlpParams& p, const MatrixXd& features) {
    if (static_cast<std::size_t>(features.cols()) != p.net.inputs())
        throw InputError("mlp_forward: feature width does not match the model");
    const MatrixXd z = p.input.apply(features.transpose());
    return forward(p.net, z).transpose() * p.target_scale;
}

MatrixXd im2col(std::span<const double> u, std::size_t nx, std::size_t ny, std::size_t dim, std::size_t kernel,
                Padding padding) {
    if (u.size() != nx * ny) throw InputError("im2col: field size does not match its shape");
    if (nx < kernel || (dim == 2 && ny < kernel)) throw InputError("im2col: field smaller than the kernel");
    const long half = static_cast<long>(kernel / 2);
    auto index = [padding](long i, long n) {
        if (padding == Padding::periodic) return ((i % n) + n) % n;
        return std::clamp(i, 0L, n - 1);
    };
    const long NX = static_cast<long>(nx), NY = static_cast<long>(ny);
    if (dim == 1) {
        MatrixXd cols(static_cast<Index>(kernel), NX);
        for (long i = 0; i < NX; ++i)
            for (long p = -half; p <= half; ++p) cols(p + half, i) = u[static_cast<std::size_t>(index(i + p, NX))];
        return cols;
    }
    const long k = static_cast<long>(kernel);
    MatrixXd cols(k * k, NX * NY);
    for (long i = 0; i < NX; ++i)
        for (long j = 0; j < NY; ++j)
            for (long p = -half; p <= half; ++p)
                for (long q = -half; q <= half; ++q)
                    cols((p + half) * k + (q + half), i * NY + j) =
                        u[static_cast<std::size_t>(index(i + p, NX) * NY + index(j + q, NY))];
    return cols;
}

std::vector<double> stencil_forward(const StencilNetParams& p, std::span<const double> u, std::size_t nx,
                                    std::size_t ny) {
    if (p.dim == 1 && ny != 1) throw InputError("stencil_forward: 1D model applied to a 2D field");
    const MatrixXd cols = im2col(u, nx, ny, p.dim, p.kernel, p.padding);
    const MatrixXd z = (cols.array() - p.input.shift(0)) / p.input.scale(0);
    const RowVectorXd y = forward(p.net, z) * p.target_scale;
    return {y.data(), y.data() + y.size()};
}

double loss_mse(std::span<const double> pred, std::span<const double> target) {
    if (pred.empty()) throw InputError("loss_mse: empty input");
    if (pred.size() != target.size()) throw InputError("loss_mse: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

Gradient backward(const Network& net, const MatrixXd& z, const RowVectorXd& target) {
    net.check_shapes();
    if (z.cols() != target.size() || z.cols() == 0) throw InputError("backward: batch/target size mismatch");
    const Activations a = run(net, z);
    const double n = static_cast<double>(z.cols());
    const RowVectorXd r = a.y - target;
    Gradient g;
    g.loss = r.squaredNorm() / n;
    const RowVectorXd dy = 2.0 * r / n;
    g.grad.A3 = dy * a.h2.transpose();
    g.grad.b3 = VectorXd::Constant(1, dy.sum());
    const MatrixXd dz2 = ((net.A3.transpose() * dy).array() * (a.z2.array() > 0.0).cast<double>()).matrix();
    g.grad.A2 = dz2 * a.h1.transpose();
    g.grad.b2 = dz2.rowwise().sum();
    const MatrixXd dz1 = ((net.A2.transpose() * dz2).array() * (a.z1.array() > 0.0).cast<double>()).matrix();
    g.grad.A1 = dz1 * z.transpose();
    g.grad.b1 = dz1.rowwise().sum();
    return g;
}

AdamState AdamState::for_network(const Network& net, double lr) {
    AdamState s;
    s.m = Network::zeros(net.inputs(), net.hidden());
    s.v = Network::zeros(net.inputs(), net.hidden());
    s.lr = lr;
    return s;
}

void adam_update(Network& params, const Network& grads, AdamState& state) {
    ++state.t;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    Network g = grads;
    params.zip(
        [&](auto& p, auto& gr, auto& m, auto& v) {
            if (p.size() != gr.size() || p.size() != m.size()) throw InputError("adam_update: shape mismatch");
            m = state.beta1 * m + (1.0 - state.beta1) * gr;
            v = state.beta2 * v + (1.0 - state.beta2) * gr.cwiseProduct(gr);
            p.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
        },
        g, state.m, state.v);
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train: batch size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("train: validation fraction must lie in (0, 1)");
    if (max_epochs == 0 || hidden == 0) throw ConfigError("train: need max_epochs > 0 and hidden > 0");
}

namespace {

// Builds the normalized (inputs, targets) pair for a list of sample ids.
using BatchBuilder = std::function<void(std::span<const std::size_t>, MatrixXd&, RowVectorXd&)>;

double evaluate(const Network& net, std::span<const std::size_t> ids, const BatchBuilder& build, std::size_t chunk) {
    double sum = 0.0;
    std::size_t count = 0;
    MatrixXd z;
    RowVectorXd t;
    for (std::size_t b = 0; b < ids.size(); b += chunk) {
        build(ids.subspan(b, std::min(chunk, ids.size() - b)), z, t);
        if (z.cols() == 0) continue;
        sum += (run(net, z).y - t).squaredNorm();
        count += static_cast<std::size_t>(z.cols());
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

// Seeded split, Adam over shuffled mini-batches, early stopping on the
// validation loss; returns the best-validation network.
Network fit(Network net, std::span<const std::size_t> train_ids, std::span<const std::size_t> val_ids,
            const BatchBuilder& build, const TrainConfig& config, Rng& rng, std::size_t eval_chunk,
            TrainHistory* history) {
    AdamState adam = AdamState::for_network(net, config.learning_rate);
    std::vector<std::size_t> order(train_ids.begin(), train_ids.end());
    Network best = net;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    TrainHistory local;
    TrainHistory& h = history ? *history : local;
    h = TrainHistory{};
    MatrixXd z;
    RowVectorXd t;
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        // Fisher-Yates with the library RNG, for cross-platform determinism.
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            if (config.max_batches_per_epoch && batches == config.max_batches_per_epoch) break;
            build(std::span<const std::size_t>(order).subspan(b, std::min(config.batch_size, order.size() - b)), z, t);
            if (z.cols() == 0) continue;
            const Gradient g = backward(net, z, t);
            if (!std::isfinite(g.loss))
                throw NumericalError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
            adam_update(net, g.grad, adam);
            epoch_loss += g.loss;
            ++batches;
        }
        const double val = evaluate(net, val_ids, build, eval_chunk);
        if (!std::isfinite(val)) throw NumericalError("training diverged: non-finite validation loss in epoch " + std::to_string(epoch));
        h.train_loss.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
        h.validation_loss.push_back(val);
        if (val < best_loss) {
            best_loss = val;
            best = net;
            best_epoch = epoch;
        }
        h.best_so_far.push_back(best_loss);
        if (epoch - best_epoch >= config.patience) break;
    }
    h.best_epoch = best_epoch;
    return best;
}

void split(std::size_t n, double fraction, Rng& rng, std::vector<std::size_t>& train, std::vector<std::size_t>& val) {
    if (n < 2) throw InputError("train: need at least two samples");
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::size_t i = n; i > 1; --i)
        std::swap(ids[i - 1], ids[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
    const std::size_t nv = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
    val.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(nv));
    train.assign(ids.begin() + static_cast<std::ptrdiff_t>(nv), ids.end());
    std::sort(val.begin(), val.end());
}

double rms(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

double usable_scale(double s) { return s > 1e-300 && std::isfinite(s) ? s : 1.0; }

}  // namespace

MlpParams train_mlp(const MlpData& data, const features::FeatureSpec& spec, const TrainConfig& config,
                    TrainHistory* history) {
    config.validate();
    spec.validate();
    const std::size_t n = static_cast<std::size_t>(data.features.rows());
    if (n == 0 || data.targets.size() != data.features.rows()) throw InputError("train_mlp: empty or inconsistent data");
    if (static_cast<std::size_t>(data.features.cols()) != spec.width()) throw InputError("train_mlp: feature width mismatch");
    if (!data.features.allFinite() || !data.targets.allFinite()) throw InputError("train_mlp: non-finite data");

    Rng rng = Rng::stream(config.seed, 0, 1);
    std::vector<std::size_t> train_ids, val_ids;
    split(n, config.validation_fraction, rng, train_ids, val_ids);

    MlpParams p = init_mlp(spec, config.hidden, rng);
    const auto d = static_cast<Index>(spec.width());
    if (config.normalize) {
        VectorXd mean = VectorXd::Zero(d), sq = VectorXd::Zero(d);
        std::vector<double> t;
        t.reserve(train_ids.size());
        for (std::size_t i : train_ids) {
            mean += data.features.row(static_cast<Index>(i)).transpose();
            t.push_back(data.targets(static_cast<Index>(i)));
        }
        mean /= static_cast<double>(train_ids.size());
        for (std::size_t i : train_ids) sq += (data.features.row(static_cast<Index>(i)).transpose() - mean).cwiseAbs2();
        p.input.shift = mean;
        p.input.scale = (sq / static_cast<double>(train_ids.size())).cwiseSqrt().unaryExpr(&usable_scale);
        p.target_scale = usable_scale(rms(t));
    }
    const MatrixXd z_all = p.input.apply(data.features.transpose());
    const RowVectorXd t_all = data.targets.transpose() / p.target_scale;
    const BatchBuilder build = [&](std::span<const std::size_t> ids, MatrixXd& z, RowVectorXd& t) {
        z.resize(d, static_cast<Index>(ids.size()));
        t.resize(static_cast<Index>(ids.size()));
        for (std::size_t k = 0; k < ids.size(); ++k) {
            z.col(static_cast<Index>(k)) = z_all.col(static_cast<Index>(ids[k]));
            t(static_cast<Index>(k)) = t_all(static_cast<Index>(ids[k]));
        }
    };
    p.net = fit(p.net, train_ids, val_ids, build, config, rng, 8192, history);
    return p;
}

StencilNetParams train_stencil(const StencilData& data, double spacing, const TrainConfig& config,
                               TrainHistory* history) {
    config.validate();
    const std::size_t n = data.fields.size();
    const std::size_t points = data.nx * data.ny;
    if (n == 0 || data.targets.size() != n || data.mask.size() != points) throw InputError("train_stencil: inconsistent data");
    for (std::size_t s = 0; s < n; ++s)
        if (data.fields[s].size() != points || data.targets[s].size() != points)
            throw InputError("train_stencil: snapshot shape mismatch");

    Rng rng = Rng::stream(config.seed, 0, 2);
    std::vector<std::size_t> train_ids, val_ids;
    split(n, config.validation_fraction, rng, train_ids, val_ids);

    StencilNetParams p = init_stencil(data.dim, 3, data.padding, spacing, config.hidden, rng);
    std::vector<Index> active;
    for (std::size_t i = 0; i < points; ++i)
        if (data.mask[i]) active.push_back(static_cast<Index>(i));
    if (active.empty()) throw InputError("train_stencil: mask selects no points");
    if (config.normalize) {
        double sum = 0.0, sq = 0.0;
        std::vector<double> t;
        for (std::size_t s : train_ids) {
            for (double v : data.fields[s]) sum += v;
            for (Index i : active) t.push_back(data.targets[s][static_cast<std::size_t>(i)]);
        }
        const double count = static_cast<double>(train_ids.size() * points);
        const double mean = sum / count;
        for (std::size_t s : train_ids)
            for (double v : data.fields[s]) sq += (v - mean) * (v - mean);
        p.input.shift(0) = mean;
        p.input.scale(0) = usable_scale(std::sqrt(sq / count));
        p.target_scale = usable_scale(rms(t));
    }
    const Index taps = static_cast<Index>(p.net.inputs());
    const Index per = static_cast<Index>(active.size());
    const BatchBuilder build = [&](std::span<const std::size_t> ids, MatrixXd& z, RowVectorXd& t) {
        z.resize(taps, per * static_cast<Index>(ids.size()));
        t.resize(per * static_cast<Index>(ids.size()));
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const MatrixXd cols = im2col(data.fields[ids[k]], data.nx, data.ny, data.dim, p.kernel, p.padding);
            for (Index a = 0; a < per; ++a) {
                const Index c = static_cast<Index>(k) * per + a;
                z.col(c) = (cols.col(active[static_cast<std::size_t>(a)]).array() - p.input.shift(0)) / p.input.scale(0);
                t(c) = data.targets[ids[k]][static_cast<std::size_t>(active[static_cast<std::size_t>(a)])] / p.target_scale;
            }
        }
    };
    p.net = fit(p.net, train_ids, val_ids, build, config, rng, 64, history);
    return p;
}

double grid_spacing(const data::Geometry& g) {
    auto uniform = [](const std::vector<double>& x) {
        if (x.size() < 2) throw InputError("grid spacing: need at least two points");
        const double d = x[1] - x[0];
        for (std::size_t i = 2; i < x.size(); ++i)
            if (std::abs((x[i] - x[i - 1]) - d) > 1e-9 * std::abs(d)) throw InputError("grid spacing: grid is not uniform");
        return d;
    };
    const double dx = uniform(g.x);
    if (g.dim == 2 && std::abs(uniform(g.y) - dx) > 1e-9 * dx) throw InputError("grid spacing: anisotropic 2D grid");
    return dx;
}

MlpData mlp_data(const data::SnapshotDataset& ds, const features::FeatureSpec& spec, bool include_boundary_nodes) {
    ds.validate();
    const auto& g = ds.geometry;
    features::FeatureSpec s = spec;
    if (s.method == features::Method::finite_difference) s.spacing = grid_spacing(g);
    const bool skip = g.dirichlet_ends && !include_boundary_nodes;
    const std::size_t lo = skip ? 1 : 0, hi = skip ? g.points() - 1 : g.points();
    const std::size_t rows = ds.record_count() * (hi - lo);
    MlpData out{MatrixXd(static_cast<Index>(rows), static_cast<Index>(s.width())), VectorXd(static_cast<Index>(rows))};
    Index row = 0;
    for (const auto& tr : ds.trajectories) {
        for (const auto& r : tr.records) {
            const MatrixXd f = features::compute(r.u, g.nx, g.ny, s);
            for (std::size_t i = lo; i < hi; ++i, ++row) {
                out.features.row(row) = f.row(static_cast<Index>(i));
                out.targets(row) = r.dudt[i];
            }
        }
    }
    return out;
}

StencilData stencil_data(const data::SnapshotDataset& ds, bool include_boundary_nodes) {
    ds.validate();
    const auto& g = ds.geometry;
    StencilData out;
    out.nx = g.nx;
    out.ny = g.ny;
    out.dim = g.dim;
    out.padding = g.periodic ? Padding::periodic : Padding::replicate;
    out.mask.assign(g.points(), 1);
    if (g.dirichlet_ends && !include_boundary_nodes) {
        out.mask.front() = 0;
        out.mask.back() = 0;
    }
    for (const auto& tr : ds.trajectories) {
        for (const auto& r : tr.records) {
            out.fields.push_back(r.u);
            out.targets.push_back(r.dudt);
        }
    }
    return out;
}

Model train(Architecture arch, const data::SnapshotDataset& ds, const TrainConfig& config, const DatasetOptions& options,
            TrainHistory* history) {
    Model model;
    if (arch == Architecture::mlp) {
        features::FeatureSpec spec = options.features;
        if (spec.method == features::Method::finite_difference) spec.spacing = grid_spacing(ds.geometry);
        model.params = train_mlp(mlp_data(ds, spec, options.include_boundary_nodes), spec, config, history);
    } else {
        model.params = train_stencil(stencil_data(ds, options.include_boundary_nodes), grid_spacing(ds.geometry), config,
                                     history);
    }
    model.provenance["architecture"] = to_string(arch);
    model.provenance["dataset_scheme"] = ds.provenance.scheme;
    model.provenance["dataset_config_hash"] = ds.provenance.config_hash;
    model.provenance["train_seed"] = std::to_string(config.seed);
    return model;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json matrix_json(const MatrixXd& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

MatrixXd matrix_from(const json& j) {
    const auto rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
    const auto flat = j.at("data").get<std::vector<double>>();
    if (static_cast<Index>(flat.size()) != rows * cols) throw InputError("model file: matrix size mismatch");
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index c = 0; c < cols; ++c) m(i, c) = flat[static_cast<std::size_t>(i * cols + c)];
    return m;
}

json network_json(const Network& n) {
    return {{"A1", matrix_json(n.A1)}, {"b1", matrix_json(n.b1)}, {"A2", matrix_json(n.A2)},
            {"b2", matrix_json(n.b2)}, {"A3", matrix_json(n.A3)}, {"b3", matrix_json(n.b3)}};
}

Network network_from(const json& j) {
    Network n{matrix_from(j.at("A1")), matrix_from(j.at("A2")), matrix_from(j.at("A3")),
              matrix_from(j.at("b1")), matrix_from(j.at("b2")), matrix_from(j.at("b3"))};
    n.check_shapes();
    return n;
}

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd from_vec(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
    json j;
    j["format"] = "patchnet-model";
    j["version"] = 1;
    j["provenance"] = model.provenance;
    if (const auto* p = std::get_if<MlpParams>(&model.params)) {
        j["architecture"] = "mlp";
        j["network"] = network_json(p->net);
        j["normalization"] = {{"shift", to_vec(p->input.shift)}, {"scale", to_vec(p->input.scale)}};
        j["target_scale"] = p->target_scale;
        std::vector<std::string> names;
        for (auto d : p->features.derivatives) names.push_back(features::to_string(d));
        j["features"] = {{"derivatives", names},
                         {"method", p->features.method == features::Method::spectral ? "spectral" : "finite-difference"},
                         {"stencil", p->features.stencil}};
        j["grid_spacing"] = p->features.spacing;
    } else {
        const auto& s = std::get<StencilNetParams>(model.params);
        j["architecture"] = "stencil";
        j["network"] = network_json(s.net);
        j["dim"] = s.dim;
        j["kernel"] = s.kernel;
        j["padding"] = s.padding == Padding::periodic ? "periodic" : "replicate";
        j["normalization"] = {{"shift", to_vec(s.input.shift)}, {"scale", to_vec(s.input.scale)}};
        j["target_scale"] = s.target_scale;
        j["grid_spacing"] = s.spacing;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    Model model;
    try {
        const json j = json::parse(in);
        model.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
        const Architecture arch = architecture_from_string(j.at("architecture").get<std::string>());
        const Normalization norm{from_vec(j.at("normalization").at("shift").get<std::vector<double>>()),
                                 from_vec(j.at("normalization").at("scale").get<std::vector<double>>())};
        if (arch == Architecture::mlp) {
            MlpParams p;
            p.net = network_from(j.at("network"));
            p.input = norm;
            p.target_scale = j.at("target_scale").get<double>();
            for (const auto& name : j.at("features").at("derivatives"))
                p.features.derivatives.push_back(features::derivative_from_string(name.get<std::string>()));
            p.features.method = j.at("features").at("method").get<std::string>() == "spectral"
                                    ? features::Method::spectral
                                    : features::Method::finite_difference;
            p.features.stencil = j.at("features").at("stencil").get<std::size_t>();
            p.features.spacing = j.at("grid_spacing").get<double>();
            if (p.input.shift.size() != static_cast<Index>(p.net.inputs()))
                throw InputError("model file: normalization width mismatch");
            model.params = std::move(p);
        } else {
            StencilNetParams s;
            s.net = network_from(j.at("network"));
            s.dim = j.at("dim").get<std::size_t>();
            s.kernel = j.at("kernel").get<std::size_t>();
            s.padding = j.at("padding").get<std::string>() == "periodic" ? Padding::periodic : Padding::replicate;
            s.input = norm;
            s.target_scale = j.at("target_scale").get<double>();
            s.spacing = j.at("grid_spacing").get<double>();
            model.params = std::move(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("model file: ") + e.what());
    }
    return model;
}

}  // namespace patchnet::nn
