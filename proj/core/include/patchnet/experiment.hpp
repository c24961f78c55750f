#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "patchnet/config.hpp"
#include "patchnet/random.hpp"

namespace patchnet::experiment {

// u0(x) = sum_j a_j sin(2 pi l_j x + phi_j)
struct InitialCondition1D {
    std::vector<double> a, l, phi;
    double operator()(double x) const;
};

// u0(x, y) = sum_j a_j sin(lx_j x + phix_j) sin(ly_j y + phiy_j)
struct InitialCondition2D {
    std::vector<double> a;
    std::vector<long> lx, ly;
    std::vector<double> phix, phiy;
    double operator()(double x, double y) const;
};

// Per term, in this order: a ~ U[-1, 1], l ~ U[0, 4], phi ~ U[0, 2 pi].
InitialCondition1D random_ic_1d(Rng& rng, std::size_t terms = 20);
// Per term: a ~ U[-1, 1], lx, ly uniform on {1..5}, phix, phiy ~ U[0, 2 pi].
InitialCondition2D random_ic_2d(Rng& rng, std::size_t terms = 10);

// Seed of trajectory `index`: first draw of Rng::stream(master, index, 1).
// Training trajectories use indices [0, n_train), test [n_train, n_train + n_test).
std::uint64_t trajectory_seed(std::uint64_t master, std::size_t index);
// Seed handed to the optimizer for architecture `arch`.
std::uint64_t training_seed(std::uint64_t master, nn::Architecture arch);

struct Artifact {
    std::string path;   // relative to the output directory
    std::string kind;   // dataset | model | metrics | config
    std::string sha256;
    std::uintmax_t bytes = 0;
    std::vector<std::string> figures;
};

// manifest.json in the output directory. Holds no timestamps, so identical
// runs write identical manifests.
struct Manifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string status = "incomplete";   // incomplete | complete | failed
    std::string failed_stage;
    std::string error;
    std::vector<std::string> stages;
    std::vector<Artifact> artifacts;

    // Adds or replaces the entry for `relative`, hashing the file on disk.
    void record(const std::filesystem::path& out, const std::string& relative, const std::string& kind,
                std::vector<std::string> figures = {});
    const Artifact* find(const std::string& relative) const;
    void save(const std::filesystem::path& out) const;
    static Manifest load(const std::filesystem::path& out);
    // Missing manifest: a fresh one bound to `config`.
    static Manifest open(const std::filesystem::path& out, const config::ExperimentConfig& config);
};

using Logger = std::function<void(const std::string&)>;

enum class Stage { generate, train, evaluate, rollout, report };
std::string to_string(Stage s);

struct Context {
    config::ExperimentConfig config;
    std::filesystem::path out;
    Logger log = [](const std::string&) {};
};

// Each stage reads its inputs from and writes its outputs to ctx.out and
// updates the manifest there. On failure the manifest is saved with the
// failing stage before the exception propagates.
void run_stage(Stage stage, const Context& ctx);
// Every stage in order.
Manifest run_experiment(const Context& ctx);

// Effective diffusivity used for 1D references.
double reference_a_star(const config::ExperimentConfig& config);

}  // namespace patchnet::experiment
