#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "patchnet/equation_free.hpp"
#include "patchnet/learner.hpp"

namespace patchnet::config {

enum class Problem { hetero_1d, lattice_2d };
enum class DataMode { gap_tooth, patch_dynamics };

std::string to_string(Problem p);
std::string to_string(DataMode m);
DataMode data_mode_from_string(const std::string& s);

// a(y) = mean + amplitude * sin(2 pi y), evaluated at x / epsilon.
struct Medium1D {
    double mean = 1.1;
    double amplitude = 1.0;
    double epsilon = 1e-3;
    double x_lo = 0.0;
    double x_hi = 1.0;

    micro::DetailedProblem1D problem() const;
};

struct Evaluation {
    double rollout_dt = 0.0;   // 0: the stability bound for a_estimate
    double a_estimate = 0.0;   // 0: a* (1D) or max(a_xx, a_yy) (2D)
    double reference_dx = 5e-3;
    std::size_t fourier_modes = 6;
};

struct ExperimentConfig {
    std::string name = "experiment";
    Problem problem = Problem::hetero_1d;
    DataMode mode = DataMode::patch_dynamics;
    std::uint64_t seed = 1;
    std::size_t train_trajectories = 8;
    std::size_t test_trajectories = 2;
    double horizon = 1.0;
    double sampling_interval = 1e-3;
    std::vector<nn::Architecture> architectures{nn::Architecture::mlp, nn::Architecture::stencil};
    bool include_boundary_nodes = false;

    Medium1D medium;
    eqfree::PatchConfig1D patch;
    eqfree::PatchGrid2D patch2d;
    nn::TrainConfig train;
    Evaluation evaluation;

    // Throws ConfigError.
    void validate() const;
    std::size_t samples() const;   // snapshots per trajectory, t = 0 included
    // Canonical JSON of every field. The config hash is the SHA-256 of the
    // canonical JSON without the architecture list, so training a subset of
    // architectures reuses the same output directory.
    std::string canonical_json(bool with_architectures = true) const;
    std::string hash() const;

    static ExperimentConfig defaults(Problem problem);
};

// Keys mirror the field names above, grouped in tables [experiment],
// [medium], [patch], [patch2d], [train] and [evaluation]. Unknown keys are
// rejected.
ExperimentConfig parse_config(const std::string& toml_text, const std::string& source = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Fine-scale 1D medium and patch parameters: epsilon 1e-5, tooth 1e-4,
// buffer 8e-3, dx 1e-7, micro dt 1e-6.
void apply_paper_scale(ExperimentConfig& config);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace patchnet::config
