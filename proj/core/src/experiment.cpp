#include "patchnet/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "patchnet/dataset.hpp"
#include "patchnet/errors.hpp"
#include "patchnet/homogenization.hpp"
#include "patchnet/rollout.hpp"

namespace patchnet::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using config::ExperimentConfig;
using config::Problem;

double InitialCondition1D::operator()(double x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) v += a[j] * std::sin(2.0 * std::numbers::pi * l[j] * x + phi[j]);
    return v;
}

double InitialCondition2D::operator()(double x, double y) const {
    double v = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        v += a[j] * std::sin(static_cast<double>(lx[j]) * x + phix[j]) * std::sin(static_cast<double>(ly[j]) * y + phiy[j]);
    return v;
}

InitialCondition1D random_ic_1d(Rng& rng, std::size_t terms) {
    InitialCondition1D ic;
    for (std::size_t j = 0; j < terms; ++j) {
        ic.a.push_back(rng.uniform(-1.0, 1.0));
        ic.l.push_back(rng.uniform(0.0, 4.0));
        ic.phi.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    }
    return ic;
}

InitialCondition2D random_ic_2d(Rng& rng, std::size_t terms) {
    InitialCondition2D ic;
    for (std::size_t j = 0; j < terms; ++j) {
        ic.a.push_back(rng.uniform(-1.0, 1.0));
        ic.lx.push_back(static_cast<long>(rng.integer(1, 5)));
        ic.ly.push_back(static_cast<long>(rng.integer(1, 5)));
        ic.phix.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
        ic.phiy.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    }
    return ic;
}

std::uint64_t trajectory_seed(std::uint64_t master, std::size_t index) {
    return Rng::stream(master, index, 1).next();
}

std::uint64_t training_seed(std::uint64_t master, nn::Architecture arch) {
    return Rng::stream(master, arch == nn::Architecture::mlp ? 0 : 1, 2).next();
}

// ---------------------------------------------------------------------------

void Manifest::record(const fs::path& out, const std::string& relative, const std::string& kind,
                      std::vector<std::string> figures) {
    Artifact a{relative, kind, config::sha256_file(out / relative), fs::file_size(out / relative), std::move(figures)};
    auto it = std::find_if(artifacts.begin(), artifacts.end(), [&](const Artifact& x) { return x.path == relative; });
    if (it == artifacts.end())
        artifacts.push_back(std::move(a));
    else
        *it = std::move(a);
    std::sort(artifacts.begin(), artifacts.end(), [](const Artifact& x, const Artifact& y) { return x.path < y.path; });
}

const Artifact* Manifest::find(const std::string& relative) const {
    for (const auto& a : artifacts)
        if (a.path == relative) return &a;
    return nullptr;
}

void Manifest::save(const fs::path& out) const {
    ordered_json j;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["status"] = status;
    if (!failed_stage.empty()) {
        j["failed_stage"] = failed_stage;
        j["error"] = error;
    }
    j["stages"] = stages;
    j["artifacts"] = json::array();
    for (const auto& a : artifacts) {
        j["artifacts"].push_back(ordered_json{
            {"path", a.path}, {"kind", a.kind}, {"sha256", a.sha256}, {"bytes", a.bytes}, {"figures", a.figures}});
    }
    std::ofstream f(out / "manifest.json", std::ios::binary);
    if (!f) throw InputError("cannot write " + (out / "manifest.json").string());
    f << j.dump(2) << '\n';
}

Manifest Manifest::load(const fs::path& out) {
    std::ifstream f(out / "manifest.json");
    if (!f) throw InputError("no manifest in " + out.string());
    Manifest m;
    try {
        const json j = json::parse(f);
        m.config_hash = j.at("config_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.status = j.at("status").get<std::string>();
        m.failed_stage = j.value("failed_stage", "");
        m.error = j.value("error", "");
        m.stages = j.at("stages").get<std::vector<std::string>>();
        for (const auto& a : j.at("artifacts")) {
            m.artifacts.push_back({a.at("path").get<std::string>(), a.at("kind").get<std::string>(),
                                   a.at("sha256").get<std::string>(), a.at("bytes").get<std::uintmax_t>(),
                                   a.at("figures").get<std::vector<std::string>>()});
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("manifest: ") + e.what());
    }
    return m;
}

Manifest Manifest::open(const fs::path& out, const ExperimentConfig& config) {
    if (!fs::exists(out / "manifest.json")) {
        Manifest m;
        m.config_hash = config.hash();
        m.seed = config.seed;
        return m;
    }
    Manifest m = load(out);
    if (m.config_hash != config.hash())
        throw ConfigError("output directory " + out.string() + " holds artifacts of a different configuration");
    return m;
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::generate: return "generate";
        case Stage::train: return "train";
        case Stage::evaluate: return "evaluate";
        case Stage::rollout: return "rollout";
        case Stage::report: return "report";
    }
    return "unknown";
}

double reference_a_star(const ExperimentConfig& config) {
    return homog::effective_coefficient(config.medium.problem().a, 4096);
}

namespace {

const char* kTrainCsv = "datasets/train.csv";
const char* kTrainMeta = "datasets/train.json";
const char* kTestCsv = "datasets/test.csv";
const char* kTestMeta = "datasets/test.json";

bool is_1d(const ExperimentConfig& c) { return c.problem == Problem::hetero_1d; }

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    f << text;
}

json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw InputError("missing artifact " + path.string());
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::string model_path(nn::Architecture a) { return "models/" + nn::to_string(a) + ".json"; }

// Generation ----------------------------------------------------------------

data::Trajectory simulate(const ExperimentConfig& c, std::size_t index) {
    const std::uint64_t seed = trajectory_seed(c.seed, index);
    Rng rng(seed);
    data::SnapshotDataset ds;
    if (is_1d(c)) {
        const auto ic = random_ic_1d(rng);
        eqfree::PatchConfig1D pc = c.patch;
        pc.grid.u_lo = ic(c.medium.x_lo);
        pc.grid.u_hi = ic(c.medium.x_hi);
        const auto problem = c.medium.problem();
        ds = c.mode == config::DataMode::patch_dynamics
                 ? eqfree::simulate_patch_dynamics_1d(pc, problem, std::cref(ic), c.horizon, c.sampling_interval)
                 : eqfree::simulate_gap_tooth_1d(pc, problem, std::cref(ic), c.horizon, c.sampling_interval);
    } else {
        const auto ic = random_ic_2d(rng);
        ds = eqfree::simulate_gap_tooth_2d(c.patch2d, std::cref(ic), c.horizon, c.sampling_interval);
    }
    data::Trajectory t = std::move(ds.trajectories.front());
    t.index = index;
    t.seed = seed;
    return t;
}

data::SnapshotDataset empty_dataset(const ExperimentConfig& c) {
    data::SnapshotDataset ds;
    ds.geometry = is_1d(c) ? eqfree::geometry_1d(c.patch.grid) : eqfree::geometry_2d(c.patch2d);
    ds.provenance = {config::to_string(c.mode), c.hash(), c.seed};
    return ds;
}

void generate(const Context& ctx, Manifest& m) {
    const auto& c = ctx.config;
    data::SnapshotDataset train = empty_dataset(c), test = empty_dataset(c);
    const std::size_t total = c.train_trajectories + c.test_trajectories;
    for (std::size_t i = 0; i < total; ++i) {
        (i < c.train_trajectories ? train : test).trajectories.push_back(simulate(c, i));
        ctx.log("generate: trajectory " + std::to_string(i + 1) + "/" + std::to_string(total));
    }
    fs::create_directories(ctx.out / "datasets");
    data::write_dataset(train, ctx.out / kTrainCsv, ctx.out / kTrainMeta);
    data::write_dataset(test, ctx.out / kTestCsv, ctx.out / kTestMeta);
    m.record(ctx.out, kTrainCsv, "dataset");
    m.record(ctx.out, kTrainMeta, "dataset");
    m.record(ctx.out, kTestCsv, "dataset", {"fig2"});
    m.record(ctx.out, kTestMeta, "dataset", {"fig2"});
}

// Training ------------------------------------------------------------------

void train(const Context& ctx, Manifest& m) {
    const auto& c = ctx.config;
    const auto ds = data::read_dataset(ctx.out / kTrainCsv, ctx.out / kTrainMeta);
    for (auto arch : c.architectures) {
        nn::TrainConfig tc = c.train;
        tc.seed = training_seed(c.seed, arch);
        nn::DatasetOptions opts;
        opts.include_boundary_nodes = c.include_boundary_nodes;
        opts.features = is_1d(c) ? features::FeatureSpec::default_1d(nn::grid_spacing(ds.geometry))
                                 : features::FeatureSpec::default_2d();
        nn::TrainHistory history;
        ctx.log("train: " + nn::to_string(arch));
        nn::Model model = nn::train(arch, ds, tc, opts, &history);
        model.provenance["config_hash"] = c.hash();
        model.provenance["best_epoch"] = std::to_string(history.best_epoch);

        const std::string mp = model_path(arch);
        fs::create_directories(ctx.out / "models");
        nn::save_model(model, ctx.out / mp);
        m.record(ctx.out, mp, "model");

        std::string csv = "epoch,train_loss,validation_loss\n";
        for (std::size_t e = 0; e < history.train_loss.size(); ++e)
            csv += std::to_string(e) + "," + data::format_double(history.train_loss[e]) + "," +
                   data::format_double(history.validation_loss[e]) + "\n";
        const std::string hp = "metrics/train_" + nn::to_string(arch) + ".csv";
        write_text(ctx.out / hp, csv);
        m.record(ctx.out, hp, "metrics");
        ctx.log("train: " + nn::to_string(arch) + " stopped after " + std::to_string(history.train_loss.size()) +
                " epochs, best validation loss " + data::format_double(history.best_so_far.back()));
    }
}

// References ----------------------------------------------------------------

std::vector<double> times_of(const data::Trajectory& t) {
    std::vector<double> out;
    for (const auto& r : t.records) out.push_back(r.t);
    return out;
}

// Homogenized solution from the trajectory's initial condition, sampled on
// the macro grid at the trajectory's time stamps.
rollout::Trajectory reference(const ExperimentConfig& c, const data::Geometry& g, const data::Trajectory& traj) {
    rollout::Trajectory out;
    out.nx = g.nx;
    out.ny = g.ny;
    out.times = times_of(traj);
    out.source = rollout::Source::homogenized;
    Rng rng(traj.seed);
    if (is_1d(c)) {
        const auto ic = random_ic_1d(rng);
        const homog::HomogenizedModel1D hm{reference_a_star(c), c.medium.x_lo, c.medium.x_hi,
                                           c.evaluation.reference_dx};
        std::vector<double> u0(hm.nodes());
        for (std::size_t j = 0; j < u0.size(); ++j) u0[j] = ic(hm.x(j));
        const auto sol = homog::solve_homogenized_1d(hm, u0, out.times);
        for (std::size_t k = 0; k < out.times.size(); ++k) {
            std::vector<double> s;
            for (double x : g.x) s.push_back(sol.at(k, x));
            out.states.push_back(std::move(s));
        }
    } else {
        const auto ic = random_ic_2d(rng);
        Field2D u0(g.nx, g.ny);
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny; ++j) u0(i, j) = ic(g.x[i], g.y[j]);
        for (auto& f : homog::solve_homogenized_2d(homog::HomogenizedModel2D::reference(), u0, out.times))
            out.states.push_back(std::move(f.data));
    }
    return out;
}

// Homogenized operator on the macro grid: a* times the three-point second
// difference in 1D (the operator the quadratic coupling realises), the
// spectral operator in 2D.
std::vector<double> reference_rhs(const ExperimentConfig& c, const data::Geometry& g, std::span<const double> u) {
    std::vector<double> out(u.size(), 0.0);
    if (is_1d(c)) {
        const double dx = nn::grid_spacing(g);
        const double a = reference_a_star(c);
        for (std::size_t i = 1; i + 1 < u.size(); ++i) out[i] = a * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
        return out;
    }
    return homog::homogenized_rhs_2d(homog::HomogenizedModel2D::reference(),
                                     Field2D(g.nx, g.ny, std::vector<double>(u.begin(), u.end())))
        .data;
}

// Points that enter the metrics: interior nodes of a Dirichlet line, all
// points of a periodic grid.
std::vector<std::size_t> scored_points(const data::Geometry& g) {
    std::vector<std::size_t> idx;
    const bool skip = g.dirichlet_ends;
    for (std::size_t p = skip ? 1 : 0; p < (skip ? g.points() - 1 : g.points()); ++p) idx.push_back(p);
    return idx;
}

rollout::Trajectory restrict_points(const rollout::Trajectory& t, const std::vector<std::size_t>& idx) {
    rollout::Trajectory out;
    out.times = t.times;
    out.source = t.source;
    out.nx = idx.size();
    out.ny = 1;
    for (const auto& s : t.states) {
        std::vector<double> v;
        for (std::size_t p : idx) v.push_back(s[p]);
        out.states.push_back(std::move(v));
    }
    return out;
}

std::string coords_header(const data::Geometry& g) { return g.dim == 1 ? "trajectory,t,i,x" : "trajectory,t,i,j,x,y"; }

std::string coords(const data::Geometry& g, std::size_t traj, double t, std::size_t p) {
    std::string s = std::to_string(traj) + "," + data::format_double(t) + ",";
    if (g.dim == 1) return s + std::to_string(p) + "," + data::format_double(g.x[p]);
    const std::size_t i = p / g.ny, j = p % g.ny;
    return s + std::to_string(i) + "," + std::to_string(j) + "," + data::format_double(g.x[i]) + "," +
           data::format_double(g.y[j]);
}

double max_of(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, std::isnan(x) ? std::numeric_limits<double>::infinity() : x);
    return m;
}

// Evaluation ----------------------------------------------------------------

void evaluate(const Context& ctx, Manifest& m) {
    const auto& c = ctx.config;
    const auto test = data::read_dataset(ctx.out / kTestCsv, ctx.out / kTestMeta);
    const auto& g = test.geometry;
    const auto idx = scored_points(g);
    std::vector<rollout::Trajectory> refs;
    for (const auto& t : test.trajectories) refs.push_back(reference(c, g, t));

    ordered_json summary;
    for (auto arch : c.architectures) {
        const nn::Model model = nn::load_model(ctx.out / model_path(arch));
        std::vector<rollout::Trajectory> preds, truths;
        std::string csv = coords_header(g) + ",U,dUdt_true,dUdt_pred,dUdt_data\n";
        for (std::size_t n = 0; n < refs.size(); ++n) {
            rollout::Trajectory p, t;
            p.times = t.times = refs[n].times;
            p.nx = t.nx = g.nx;
            p.ny = t.ny = g.ny;
            for (std::size_t k = 0; k < refs[n].size(); ++k) {
                const auto& u = refs[n].states[k];
                p.states.push_back(rollout::rhs_from_model(model, u, g));
                t.states.push_back(reference_rhs(c, g, u));
                const auto& data_rhs = test.trajectories[n].records[k].dudt;
                for (std::size_t q : idx)
                    csv += coords(g, test.trajectories[n].index, refs[n].times[k], q) + "," +
                           data::format_double(u[q]) + "," + data::format_double(t.states.back()[q]) + "," +
                           data::format_double(p.states.back()[q]) + "," + data::format_double(data_rhs[q]) + "\n";
            }
            preds.push_back(restrict_points(p, idx));
            truths.push_back(restrict_points(t, idx));
        }
        const auto rep = rollout::error_report(preds, truths);
        const std::string name = nn::to_string(arch);
        write_text(ctx.out / ("metrics/rhs_" + name + ".csv"), csv);
        m.record(ctx.out, "metrics/rhs_" + name + ".csv", "metrics", {g.dim == 1 ? "fig4" : "fig6"});

        std::string amp = "amplitude,relative_error\n";
        for (std::size_t k = 0; k < rep.amplitude.size(); ++k)
            amp += data::format_double(rep.amplitude[k]) + "," + data::format_double(rep.relative_error[k]) + "\n";
        write_text(ctx.out / ("metrics/rhs_amplitude_" + name + ".csv"), amp);
        m.record(ctx.out, "metrics/rhs_amplitude_" + name + ".csv", "metrics",
                 g.dim == 2 ? std::vector<std::string>{"fig6"} : std::vector<std::string>{});

        summary[name] = {{"rhs_rmse", rep.rmse},
                         {"rhs_rmse_max", max_of(rep.rmse)},
                         {"rhs_relative_mse", rep.relative_mse},
                         {"rhs_mean_mse", rep.mean_mse},
                         {"amplitude_error_spearman", rep.spearman}};
        ctx.log("evaluate: " + name + " rhs rMSE (max over test) " + data::format_double(max_of(rep.rmse)) +
                ", relative MSE " + data::format_double(rep.relative_mse));
    }
    write_text(ctx.out / "metrics/evaluation.json", summary.dump(2) + "\n");
    m.record(ctx.out, "metrics/evaluation.json", "metrics");
}

// Rollouts ------------------------------------------------------------------

void rollouts(const Context& ctx, Manifest& m) {
    const auto& c = ctx.config;
    const auto test = data::read_dataset(ctx.out / kTestCsv, ctx.out / kTestMeta);
    const auto& g = test.geometry;
    const auto idx = scored_points(g);

    rollout::RolloutOptions opts;
    opts.a_estimate = c.evaluation.a_estimate > 0.0 ? c.evaluation.a_estimate
                      : is_1d(c)                    ? reference_a_star(c)
                                                    : std::max(homog::HomogenizedModel2D::reference().a_xx,
                                                               homog::HomogenizedModel2D::reference().a_yy);
    const double dx = nn::grid_spacing(g);
    opts.dt = c.evaluation.rollout_dt > 0.0 ? c.evaluation.rollout_dt : 0.4 * dx * dx / (2.0 * opts.a_estimate);

    std::vector<nn::Model> models;
    for (auto arch : c.architectures) models.push_back(nn::load_model(ctx.out / model_path(arch)));

    std::vector<std::string> sources{"equation_free"};
    for (auto arch : c.architectures) sources.push_back(nn::to_string(arch));

    std::string field_csv = coords_header(g) + ",U_reference";
    for (const auto& s : sources) field_csv += ",U_" + s;
    field_csv += "\n";
    std::string err_csv = "trajectory,t";
    for (const auto& s : sources) err_csv += ",mse_" + s;
    err_csv += "\n";
    std::string fourier_csv = "trajectory,t,source,rank,kx,ky,amplitude\n";
    std::map<std::string, std::vector<double>> scores;

    for (const auto& traj : test.trajectories) {
        const auto ref = reference(c, g, traj);
        std::vector<rollout::Trajectory> runs;
        rollout::Trajectory eqf;
        eqf.nx = g.nx;
        eqf.ny = g.ny;
        eqf.times = ref.times;
        eqf.source = is_1d(c) && c.mode == config::DataMode::patch_dynamics ? rollout::Source::patch_dynamics
                                                                           : rollout::Source::gap_tooth;
        for (const auto& r : traj.records) eqf.states.push_back(r.u);
        runs.push_back(std::move(eqf));
        for (const auto& model : models) runs.push_back(rollout::integrate_learned(model, g, ref.states.front(), ref.times, opts));

        const auto ref_scored = restrict_points(ref, idx);
        for (std::size_t s = 0; s < runs.size(); ++s)
            scores[sources[s]].push_back(rollout::rmse(restrict_points(runs[s], idx), ref_scored));

        for (std::size_t k = 0; k < ref.size(); ++k) {
            for (std::size_t q = 0; q < g.points(); ++q) {
                field_csv += coords(g, traj.index, ref.times[k], q) + "," + data::format_double(ref.states[k][q]);
                for (const auto& r : runs) field_csv += "," + data::format_double(r.states[k][q]);
                field_csv += "\n";
            }
            err_csv += std::to_string(traj.index) + "," + data::format_double(ref.times[k]);
            for (const auto& r : runs) {
                double e = 0.0;
                for (std::size_t q : idx) e += std::pow(r.states[k][q] - ref.states[k][q], 2);
                err_csv += "," + data::format_double(e / static_cast<double>(idx.size()));
            }
            err_csv += "\n";
        }

        if (!is_1d(c)) {
            // Modes ranked on the reference at t = 0 and tracked for every source.
            const auto proj = rollout::fourier_projection(ref, c.evaluation.fourier_modes);
            auto emit = [&](const std::string& name, const rollout::Trajectory& t) {
                for (std::size_t k = 0; k < t.size(); ++k) {
                    const auto all = rollout::mode_amplitudes(t.states[k], t.nx, t.ny);
                    for (std::size_t r = 0; r < proj.modes.size(); ++r) {
                        const auto& mode = proj.modes[r];
                        const auto it = std::find_if(all.begin(), all.end(),
                                                     [&](const rollout::ModeAmplitude& a) { return a.mode == mode; });
                        fourier_csv += std::to_string(traj.index) + "," + data::format_double(t.times[k]) + "," + name +
                                       "," + std::to_string(r) + "," + std::to_string(mode.kx) + "," +
                                       std::to_string(mode.ky) + "," + data::format_double(it->amplitude) + "\n";
                    }
                }
            };
            emit("reference", ref);
            for (std::size_t s = 0; s < runs.size(); ++s) emit(sources[s], runs[s]);
        }
    }

    write_text(ctx.out / "metrics/rollout.csv", field_csv);
    m.record(ctx.out, "metrics/rollout.csv", "metrics", {is_1d(c) ? "fig5" : "fig7b"});
    write_text(ctx.out / "metrics/rollout_error.csv", err_csv);
    m.record(ctx.out, "metrics/rollout_error.csv", "metrics", {"fig7a"});
    if (!is_1d(c)) {
        write_text(ctx.out / "metrics/fourier.csv", fourier_csv);
        m.record(ctx.out, "metrics/fourier.csv", "metrics", {"fig7b"});
    }
    ordered_json summary;
    summary["rollout_dt"] = opts.dt;
    for (const auto& s : sources) {
        summary[s] = {{"rollout_rmse", scores[s]}, {"rollout_rmse_max", max_of(scores[s])}};
        ctx.log("rollout: " + s + " rMSE (max over test) " + data::format_double(max_of(scores[s])));
    }
    write_text(ctx.out / "metrics/rollout.json", summary.dump(2) + "\n");
    m.record(ctx.out, "metrics/rollout.json", "metrics");
}

// Report --------------------------------------------------------------------

void report(const Context& ctx, Manifest& m) {
    const auto& c = ctx.config;
    ordered_json s;
    s["name"] = c.name;
    s["problem"] = config::to_string(c.problem);
    s["config_hash"] = c.hash();
    s["seed"] = c.seed;
    if (is_1d(c)) s["a_star"] = reference_a_star(c);
    s["evaluation"] = read_json(ctx.out / "metrics/evaluation.json");
    s["rollout"] = read_json(ctx.out / "metrics/rollout.json");
    write_text(ctx.out / "summary.json", s.dump(2) + "\n");
    m.record(ctx.out, "summary.json", "metrics");
    ctx.log("report: " + (ctx.out / "summary.json").string());
}

}  // namespace

void run_stage(Stage stage, const Context& ctx) {
    ctx.config.validate();
    fs::create_directories(ctx.out);
    Manifest m = Manifest::open(ctx.out, ctx.config);
    if (!m.find("config.json")) {
        write_text(ctx.out / "config.json", ctx.config.canonical_json() + "\n");
        m.record(ctx.out, "config.json", "config");
    }
    const std::string name = to_string(stage);
    m.status = "incomplete";
    m.failed_stage.clear();
    m.error.clear();
    try {
        switch (stage) {
            case Stage::generate: generate(ctx, m); break;
            case Stage::train: train(ctx, m); break;
            case Stage::evaluate: evaluate(ctx, m); break;
            case Stage::rollout: rollouts(ctx, m); break;
            case Stage::report: report(ctx, m); break;
        }
    } catch (const std::exception& e) {
        m.status = "failed";
        m.failed_stage = name;
        m.error = e.what();
        m.save(ctx.out);
        throw;
    }
    if (std::find(m.stages.begin(), m.stages.end(), name) == m.stages.end()) m.stages.push_back(name);
    if (stage == Stage::report) m.status = "complete";
    m.save(ctx.out);
}

Manifest run_experiment(const Context& ctx) {
    for (Stage s : {Stage::generate, Stage::train, Stage::evaluate, Stage::rollout, Stage::report}) run_stage(s, ctx);
    return Manifest::load(ctx.out);
}

}  // namespace patchnet::experiment
