#include "patchnet/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>

#include "patchnet/errors.hpp"
#include "patchnet/fft.hpp"
#include "patchnet/ode.hpp"

namespace patchnet::rollout {

std::string to_string(Source s) {
    switch (s) {
        case Source::homogenized: return "homogenized";
        case Source::patch_dynamics: return "patch-dynamics";
        case Source::gap_tooth: return "gap-tooth";
        case Source::learned_mlp: return "learned-MLP";
        case Source::learned_stencil: return "learned-stencil";
    }
    return "unknown";
}

void Trajectory::validate() const {
    if (times.empty() || times.size() != states.size()) throw InputError("trajectory: times and states differ in length");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1])) throw InputError("trajectory: times must be strictly increasing");
    for (const auto& s : states)
        if (s.size() != nx * ny) throw InputError("trajectory: state shape mismatch");
}

std::vector<double> rhs_from_model(const nn::Model& model, std::span<const double> u, const data::Geometry& geometry) {
    if (u.size() != geometry.points()) throw InputError("rhs_from_model: field does not match the geometry");
    if (const auto* p = std::get_if<nn::MlpParams>(&model.params)) {
        features::FeatureSpec spec = p->features;
        if (spec.method == features::Method::finite_difference) spec.spacing = nn::grid_spacing(geometry);
        const Eigen::VectorXd y = nn::mlp_forward(*p, features::compute(u, geometry.nx, geometry.ny, spec));
        return {y.data(), y.data() + y.size()};
    }
    const auto& s = std::get<nn::StencilNetParams>(model.params);
    if (s.dim != geometry.dim) throw ConfigError("rhs_from_model: stencil model dimension differs from the grid");
    const double spacing = nn::grid_spacing(geometry);
    if (std::abs(spacing - s.spacing) > 1e-9 * s.spacing)
        throw ConfigError("rhs_from_model: stencil model trained on spacing " + data::format_double(s.spacing) +
                          " cannot be applied to spacing " + data::format_double(spacing) + "; retrain it");
    return nn::stencil_forward(s, u, geometry.nx, geometry.ny);
}

Trajectory integrate(const MacroRhs& rhs, const data::Geometry& geometry, std::span<const double> u0,
                     std::span<const double> t_grid, const RolloutOptions& options, Source source) {
    if (u0.size() != geometry.points()) throw InputError("integrate: initial field does not match the geometry");
    if (!(options.a_estimate > 0.0)) throw ConfigError("integrate: effective diffusivity estimate must be positive");
    const double dx = nn::grid_spacing(geometry);
    const double bound = 0.4 * dx * dx / (2.0 * options.a_estimate);
    if (!(options.dt > 0.0) || options.dt > bound * (1.0 + 1e-12))
        throw ConfigError("integrate: dt " + data::format_double(options.dt) + " exceeds the stability bound " +
                          data::format_double(bound));
    const bool hold = geometry.dirichlet_ends;
    const ode::Rhs f = [&](const ode::State& u, ode::State& du) {
        rhs(u, du);
        if (hold) {
            du.front() = 0.0;
            du.back() = 0.0;
        }
    };
    Trajectory out;
    out.nx = geometry.nx;
    out.ny = geometry.ny;
    out.source = source;
    out.times.assign(t_grid.begin(), t_grid.end());
    out.states = ode::rk4(f, ode::State(u0.begin(), u0.end()), t_grid, options.dt, options.blowup);
    return out;
}

Trajectory integrate_learned(const nn::Model& model, const data::Geometry& geometry, std::span<const double> u0,
                             std::span<const double> t_grid, const RolloutOptions& options) {
    const MacroRhs rhs = [&](std::span<const double> u, std::span<double> du) {
        const auto v = rhs_from_model(model, u, geometry);
        std::copy(v.begin(), v.end(), du.begin());
    };
    const Source source =
        model.architecture() == nn::Architecture::mlp ? Source::learned_mlp : Source::learned_stencil;
    return integrate(rhs, geometry, u0, t_grid, options, source);
}

namespace {

void check_aligned(const Trajectory& a, const Trajectory& b) {
    a.validate();
    b.validate();
    if (a.nx != b.nx || a.ny != b.ny || a.size() != b.size()) throw InputError("trajectories are not aligned");
    for (std::size_t k = 0; k < a.size(); ++k)
        if (std::abs(a.times[k] - b.times[k]) > 1e-12 * std::max(1.0, std::abs(b.times[k])))
            throw InputError("trajectories have different time stamps");
}

}  // namespace

double rmse(const Trajectory& pred, const Trajectory& ref, MeanMode mode) {
    check_aligned(pred, ref);
    double grand = 0.0;
    if (mode == MeanMode::grand) {
        for (const auto& s : ref.states) grand += std::accumulate(s.begin(), s.end(), 0.0);
        grand /= static_cast<double>(ref.size() * ref.nx * ref.ny);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        const auto& r = ref.states[k];
        const auto& p = pred.states[k];
        const double mean = mode == MeanMode::grand
                                ? grand
                                : std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) {
            num += (p[i] - r[i]) * (p[i] - r[i]);
            den += (r[i] - mean) * (r[i] - mean);
        }
    }
    if (!(den > 0.0)) throw NumericalError("rmse: reference is constant, the metric is undefined");
    return num / den;
}

std::vector<ModeAmplitude> mode_amplitudes(std::span<const double> u, std::size_t nx, std::size_t ny) {
    if (u.size() != nx * ny || nx == 0 || ny == 0) throw InputError("mode_amplitudes: field shape mismatch");
    Fft2D fft(nx, ny);
    const auto c = fft.forward(Field2D(nx, ny, std::vector<double>(u.begin(), u.end())));
    const double norm = 1.0 / static_cast<double>(nx * ny);
    std::vector<ModeAmplitude> out;
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
            // Keep the representative of each pair {k, -k}.
            const std::size_t ci = (nx - i) % nx, cj = (ny - j) % ny;
            if (ci * ny + cj < i * ny + j) continue;
            const bool self = ci == i && cj == j;
            const double a = std::abs(c[i * ny + j]) * norm * (self ? 1.0 : 2.0);
            out.push_back({{Fft2D::wavenumber(i, nx), Fft2D::wavenumber(j, ny)}, a});
        }
    }
    return out;
}

FourierProjection fourier_projection(const Trajectory& traj, std::size_t m) {
    traj.validate();
    auto first = mode_amplitudes(traj.states.front(), traj.nx, traj.ny);
    if (m == 0 || m > first.size()) throw InputError("fourier_projection: requested more modes than the grid holds");
    // Largest first; ties by |kx| + |ky|, then kx, then ky.
    std::stable_sort(first.begin(), first.end(), [](const ModeAmplitude& a, const ModeAmplitude& b) {
        if (a.amplitude != b.amplitude) return a.amplitude > b.amplitude;
        const long la = std::abs(a.mode.kx) + std::abs(a.mode.ky), lb = std::abs(b.mode.kx) + std::abs(b.mode.ky);
        if (la != lb) return la < lb;
        if (a.mode.kx != b.mode.kx) return a.mode.kx < b.mode.kx;
        return a.mode.ky < b.mode.ky;
    });
    FourierProjection out;
    for (std::size_t k = 0; k < m; ++k) out.modes.push_back(first[k].mode);
    for (const auto& s : traj.states) {
        const auto all = mode_amplitudes(s, traj.nx, traj.ny);
        std::vector<double> row;
        for (const auto& mode : out.modes) {
            const auto it = std::find_if(all.begin(), all.end(), [&](const ModeAmplitude& a) { return a.mode == mode; });
            row.push_back(it->amplitude);
        }
        out.amplitude.push_back(std::move(row));
    }
    return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InputError("spearman: need two equal-length samples of size >= 2");
    auto ranks = [](std::span<const double> v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

ErrorReport error_report(std::span<const Trajectory> predictions, std::span<const Trajectory> references) {
    if (predictions.size() != references.size()) throw InputError("error_report: prediction/reference count mismatch");
    ErrorReport rep;
    double err_total = 0.0, ref_total = 0.0, mse_sum = 0.0;
    std::size_t mse_count = 0;
    for (std::size_t t = 0; t < predictions.size(); ++t) {
        const auto& p = predictions[t];
        const auto& r = references[t];
        check_aligned(p, r);
        if (t == 0) rep.times = r.times;
        std::vector<double> mse;
        for (std::size_t k = 0; k < r.size(); ++k) {
            double e = 0.0, n = 0.0;
            for (std::size_t i = 0; i < r.states[k].size(); ++i) {
                const double d = p.states[k][i] - r.states[k][i];
                e += d * d;
                n += r.states[k][i] * r.states[k][i];
            }
            const double points = static_cast<double>(r.states[k].size());
            mse.push_back(e / points);
            mse_sum += e / points;
            ++mse_count;
            err_total += e;
            ref_total += n;
            if (n > 0.0) {
                rep.amplitude.push_back(std::sqrt(n / points));
                rep.relative_error.push_back(std::sqrt(e / n));
            }
        }
        rep.mse.push_back(std::move(mse));
        double value = 0.0;
        try {
            value = rmse(p, r);
        } catch (const NumericalError&) {
            value = std::numeric_limits<double>::quiet_NaN();
        }
        rep.rmse.push_back(value);
    }
    rep.mean_mse = mse_count ? mse_sum / static_cast<double>(mse_count) : 0.0;
    rep.relative_mse = ref_total > 0.0 ? err_total / ref_total : 0.0;
    rep.spearman = rep.amplitude.size() >= 2 ? spearman(rep.amplitude, rep.relative_error) : 0.0;
    return rep;
}

}  // namespace patchnet::rollout
