#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "patchnet/config.hpp"
#include "patchnet/errors.hpp"
#include "patchnet/experiment.hpp"
#include "patchnet/homogenization.hpp"

namespace fs = std::filesystem;
using namespace patchnet;

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, numerical_failure = 3 };

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    bool paper_scale = false;
    std::string arch;
    std::string mode;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "Experiment config (TOML); built-in 1D defaults if omitted")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Master seed, overrides the config");
    cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
    cmd->add_flag("--paper-scale", f.paper_scale, "1D fine-scale medium and patches (slow)");
    cmd->add_option("--arch", f.arch, "Architectures to train/evaluate")->check(CLI::IsMember({"mlp", "stencil", "both"}));
    cmd->add_option("--mode", f.mode, "Data generation mode")
        ->check(CLI::IsMember({"gap-tooth", "patch-dynamics"}));
    cmd->add_flag("-q,--quiet", f.quiet, "Only print errors");
}

config::ExperimentConfig resolve(const Flags& f) {
    auto c = f.config.empty() ? config::ExperimentConfig::defaults(config::Problem::hetero_1d)
                              : config::load_config(f.config);
    if (f.seed) c.seed = *f.seed;
    if (!f.mode.empty()) c.mode = config::data_mode_from_string(f.mode);
    if (f.arch == "mlp") c.architectures = {nn::Architecture::mlp};
    if (f.arch == "stencil") c.architectures = {nn::Architecture::stencil};
    if (f.arch == "both") c.architectures = {nn::Architecture::mlp, nn::Architecture::stencil};
    if (f.paper_scale) config::apply_paper_scale(c);
    c.validate();
    return c;
}

int oracle(const Flags& f, std::size_t cells, bool brute_force) {
    const auto c = resolve(f);
    const auto a = c.medium.problem().a;
    const auto samples = a.samples(cells);
    auto cell = homog::solve_cell_problem(samples);
    const double a_star = homog::effective_diffusivity(cell, samples);
    nlohmann::ordered_json j;
    j["cells"] = cells;
    j["a_star"] = a_star;
    j["harmonic_mean"] = homog::harmonic_mean(samples);
    j["arithmetic_mean"] = homog::arithmetic_mean(samples);
    j["cell_residual"] = homog::cell_residual(cell, samples);
    const auto ref = homog::HomogenizedModel2D::reference();
    j["lattice_a_xx"] = ref.a_xx;
    j["lattice_a_yy"] = ref.a_yy;
    if (brute_force) {
        const auto lattice = micro::LatticeProblem2D::reference_medium(480);
        const auto fx = homog::lattice_mode_decay(lattice, homog::Axis::x, 0.005, 0.03);
        const auto fy = homog::lattice_mode_decay(lattice, homog::Axis::y, 0.005, 0.03);
        j["brute_force_a_xx"] = fx.coefficient;
        j["brute_force_a_yy"] = fy.coefficient;
    }
    std::cout << j.dump(2) << '\n';
    if (f.out != "-") {
        fs::create_directories(f.out);
        std::ofstream(fs::path(f.out) / "oracle.json") << j.dump(2) << '\n';
    }
    return ok;
}

int stage(const Flags& f, std::optional<experiment::Stage> which) {
    experiment::Context ctx;
    ctx.config = resolve(f);
    ctx.out = f.out;
    if (!f.quiet) ctx.log = [](const std::string& s) { std::cerr << s << '\n'; };
    if (which)
        experiment::run_stage(*which, ctx);
    else
        experiment::run_experiment(ctx);
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Equation-free patch simulation and learned macro-scale PDEs"};
    app.require_subcommand(1);
    Flags flags;
    std::size_t cells = 4096;
    bool brute_force = false;

    auto* oracle_cmd = app.add_subcommand("oracle", "Cell problem and reference coefficients");
    add_common(oracle_cmd, flags);
    oracle_cmd->add_option("--cells", cells, "Cell-problem resolution")->capture_default_str();
    oracle_cmd->add_flag("--brute-force", brute_force, "Also fit 2D coefficients from a full-lattice run (~1 min)");

    struct Sub {
        const char* name;
        const char* help;
        std::optional<experiment::Stage> stage;
    };
    const Sub subs[] = {{"generate", "Simulate train/test datasets", experiment::Stage::generate},
                        {"train", "Train the selected architectures", experiment::Stage::train},
                        {"evaluate", "Held-out right-hand-side prediction metrics", experiment::Stage::evaluate},
                        {"rollout", "Integrate learned models from test initial conditions", experiment::Stage::rollout},
                        {"report", "Write summary.json and close the manifest", experiment::Stage::report},
                        {"run", "All stages in order", std::nullopt}};
    std::vector<std::pair<CLI::App*, std::optional<experiment::Stage>>> stage_cmds;
    for (const auto& s : subs) {
        auto* cmd = app.add_subcommand(s.name, s.help);
        add_common(cmd, flags);
        stage_cmds.emplace_back(cmd, s.stage);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (oracle_cmd->parsed()) return oracle(flags, cells, brute_force);
        for (const auto& [cmd, which] : stage_cmds)
            if (cmd->parsed()) return stage(flags, which);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
    return failure;
}
