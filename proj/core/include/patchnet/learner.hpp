#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "patchnet/dataset.hpp"
#include "patchnet/features.hpp"
#include "patchnet/random.hpp"

namespace patchnet::nn {

// y = A3 relu(A2 relu(A1 z + b1) + b2) + b3, applied to each column of a batch.
// The derivative MLP feeds feature rows; the stencil net feeds im2col
// patches, which makes its 1x1 convolutions exactly these dense layers.
struct Network {
    Eigen::MatrixXd A1, A2, A3;
    Eigen::VectorXd b1, b2, b3;

    static Network zeros(std::size_t inputs, std::size_t hidden);
    std::size_t inputs() const { return static_cast<std::size_t>(A1.cols()); }
    std::size_t hidden() const { return static_cast<std::size_t>(A1.rows()); }
    std::size_t parameter_count() const;
    void check_shapes() const;

    // Visits matching tensors of this network and `others` in a fixed order.
    template <class F, class... N>
    void zip(F&& f, N&... others) {
        f(A1, others.A1...);
        f(b1, others.b1...);
        f(A2, others.A2...);
        f(b2, others.b2...);
        f(A3, others.A3...);
        f(b3, others.b3...);
    }
    bool operator==(const Network&) const = default;
};

// Glorot-uniform weights, zero biases.
Network init_network(std::size_t inputs, std::size_t hidden, Rng& rng);

// Affine input map z = (x - shift) / scale, per input channel.
struct Normalization {
    Eigen::VectorXd shift;
    Eigen::VectorXd scale;

    static Normalization identity(std::size_t n);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& columns) const;
    bool operator==(const Normalization&) const = default;
};

enum class Architecture { mlp, stencil };
enum class Padding { replicate, periodic };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

struct MlpParams {
    Network net;
    Normalization input;       // one entry per feature
    double target_scale = 1.0; // network output is multiplied by this
    features::FeatureSpec features;
};

struct StencilNetParams {
    Network net;               // A1 holds the first kernel, taps flattened (x-offset major)
    std::size_t dim = 1;
    std::size_t kernel = 3;
    Padding padding = Padding::replicate;
    Normalization input;       // single channel
    double target_scale = 1.0;
    double spacing = 1.0;      // grid spacing the kernel was trained on
};

using ModelParams = std::variant<MlpParams, StencilNetParams>;

struct Model {
    ModelParams params;
    std::map<std::string, std::string> provenance;

    Architecture architecture() const;
};

MlpParams init_mlp(const features::FeatureSpec& spec, std::size_t hidden, Rng& rng);
StencilNetParams init_stencil(std::size_t dim, std::size_t kernel, Padding padding, double spacing, std::size_t hidden,
                              Rng& rng);

// Forward pass on a batch of columns.
Eigen::RowVectorXd forward(const Network& net, const Eigen::MatrixXd& z);

// features: points x d; returns one prediction per row.
Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& features);

// Kernel patches of a field: (kernel^dim) x points, padded per `padding`.
Eigen::MatrixXd im2col(std::span<const double> u, std::size_t nx, std::size_t ny, std::size_t dim, std::size_t kernel,
                       Padding padding);

std::vector<double> stencil_forward(const StencilNetParams& p, std::span<const double> u, std::size_t nx,
                                    std::size_t ny = 1);

double loss_mse(std::span<const double> pred, std::span<const double> target);

struct Gradient {
    double loss = 0.0;
    Network grad;
};

// MSE over all columns and its exact gradient; ReLU'(0) = 0.
Gradient backward(const Network& net, const Eigen::MatrixXd& z, const Eigen::RowVectorXd& target);

struct AdamState {
    Network m, v;
    std::uint64_t t = 0;
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState for_network(const Network& net, double lr = 1e-3);
};

void adam_update(Network& params, const Network& grads, AdamState& state);

struct TrainConfig {
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::size_t max_epochs = 500;
    double validation_fraction = 0.1;
    std::size_t patience = 50;
    std::uint64_t seed = 0;
    std::size_t hidden = 32;
    bool normalize = true;
    // Upper bound on optimizer steps per epoch (0 = full pass).
    std::size_t max_batches_per_epoch = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    std::vector<double> best_so_far;
    std::size_t best_epoch = 0;
};

// Rows of derivative features and matching targets.
struct MlpData {
    Eigen::MatrixXd features;   // rows x d
    Eigen::VectorXd targets;
};

// Whole snapshots; `mask` selects the points that enter the loss.
struct StencilData {
    std::size_t nx = 0, ny = 1, dim = 1;
    Padding padding = Padding::replicate;
    std::vector<std::vector<double>> fields;
    std::vector<std::vector<double>> targets;
    std::vector<char> mask;
};

MlpParams train_mlp(const MlpData& data, const features::FeatureSpec& spec, const TrainConfig& config,
                    TrainHistory* history = nullptr);
StencilNetParams train_stencil(const StencilData& data, double spacing, const TrainConfig& config,
                               TrainHistory* history = nullptr);

struct DatasetOptions {
    // 1D Dirichlet datasets: include the fixed boundary nodes as training rows.
    bool include_boundary_nodes = false;
    features::FeatureSpec features;   // MLP inputs; spacing is taken from the geometry for 1D
};

MlpData mlp_data(const data::SnapshotDataset& ds, const features::FeatureSpec& spec, bool include_boundary_nodes);
StencilData stencil_data(const data::SnapshotDataset& ds, bool include_boundary_nodes);

// Builds the training set for `arch` from a dataset and trains it.
Model train(Architecture arch, const data::SnapshotDataset& ds, const TrainConfig& config, const DatasetOptions& options,
            TrainHistory* history = nullptr);

// Grid spacing of a dataset (uniform grids only).
double grid_spacing(const data::Geometry& g);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace patchnet::nn
