#include "patchnet/config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "patchnet/errors.hpp"
#include "toml.hpp"

namespace patchnet::config {

std::string to_string(Problem p) { return p == Problem::hetero_1d ? "1d-hetero" : "2d-lattice"; }
std::string to_string(DataMode m) { return m == DataMode::gap_tooth ? "gap-tooth" : "patch-dynamics"; }

DataMode data_mode_from_string(const std::string& s) {
    if (s == "gap-tooth") return DataMode::gap_tooth;
    if (s == "patch-dynamics") return DataMode::patch_dynamics;
    throw ConfigError("unknown mode '" + s + "' (expected gap-tooth or patch-dynamics)");
}

namespace {

Problem problem_from_string(const std::string& s) {
    if (s == "1d-hetero") return Problem::hetero_1d;
    if (s == "2d-lattice") return Problem::lattice_2d;
    throw ConfigError("unknown problem '" + s + "' (expected 1d-hetero or 2d-lattice)");
}

eqfree::Coupling2D coupling_from_string(const std::string& s) {
    if (s == "period-shift") return eqfree::Coupling2D::period_shift;
    if (s == "interpolated") return eqfree::Coupling2D::interpolated;
    throw ConfigError("unknown coupling '" + s + "'");
}

std::string to_string(eqfree::Coupling2D c) {
    return c == eqfree::Coupling2D::period_shift ? "period-shift" : "interpolated";
}

micro::TimeScheme scheme_from_string(const std::string& s) {
    if (s == "rk4") return micro::TimeScheme::rk4;
    if (s == "backward-euler") return micro::TimeScheme::backward_euler;
    throw ConfigError("unknown micro scheme '" + s + "'");
}

std::string to_string(micro::TimeScheme s) { return s == micro::TimeScheme::rk4 ? "rk4" : "backward-euler"; }

eqfree::ProjectiveScheme projective_from_string(const std::string& s) {
    if (s == "euler") return eqfree::ProjectiveScheme::euler;
    if (s == "rk2") return eqfree::ProjectiveScheme::rk2;
    throw ConfigError("unknown projective scheme '" + s + "'");
}

std::string to_string(eqfree::ProjectiveScheme s) { return s == eqfree::ProjectiveScheme::euler ? "euler" : "rk2"; }

// Reads typed keys from one table and remembers which were used.
class Section {
public:
    Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

    template <class T>
    void get(const char* key, T& out) {
        used_.insert(key);
        if (!table_) return;
        const toml::node* node = table_->get(key);
        if (!node) return;
        if constexpr (std::is_same_v<T, bool>) {
            if (auto v = node->value_exact<bool>()) return void(out = *v);
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = node->value_exact<std::string>()) return void(out = *v);
        } else if constexpr (std::is_floating_point_v<T>) {
            if (auto v = node->value<double>()) return void(out = *v);
        } else {
            if (auto v = node->value_exact<std::int64_t>(); v && *v >= 0) return void(out = static_cast<T>(*v));
        }
        fail(key, "has the wrong type");
    }

    template <class T, class Parse>
    void get_enum(const char* key, T& out, Parse parse) {
        std::string s;
        bool present = table_ && table_->get(key);
        get(key, s);
        if (present) out = parse(s);
    }

    std::vector<std::string> strings(const char* key) {
        used_.insert(key);
        std::vector<std::string> out;
        if (!table_ || !table_->get(key)) return out;
        const toml::array* arr = table_->get(key)->as_array();
        if (!arr) fail(key, "must be an array of strings");
        for (const auto& item : *arr) {
            auto v = item.value<std::string>();
            if (!v) fail(key, "must be an array of strings");
            out.push_back(*v);
        }
        return out;
    }

    bool has(const char* key) const { return table_ && table_->get(key); }

    void finish() const {
        if (!table_) return;
        for (const auto& [k, v] : *table_)
            if (!used_.count(std::string(k.str()))) fail(std::string(k.str()).c_str(), "is not a recognised key");
    }

private:
    [[noreturn]] void fail(const char* key, const char* what) const {
        std::string where;
        if (table_ && table_->get(key)) where = " (line " + std::to_string(table_->get(key)->source().begin.line) + ")";
        throw ConfigError("[" + name_ + "] " + key + " " + what + where);
    }
    const toml::table* table_;
    std::string name_;
    std::set<std::string> used_;
};

}  // namespace

micro::DetailedProblem1D Medium1D::problem() const {
    micro::DetailedProblem1D p;
    p.a = micro::Diffusivity::sinusoidal(mean, amplitude);
    p.epsilon = epsilon;
    p.x_lo = x_lo;
    p.x_hi = x_hi;
    return p;
}

std::size_t ExperimentConfig::samples() const {
    return static_cast<std::size_t>(std::llround(horizon / sampling_interval)) + 1;
}

void ExperimentConfig::validate() const {
    if (train_trajectories == 0 || test_trajectories == 0) throw ConfigError("trajectory counts must be positive");
    if (!(horizon > 0.0) || !(sampling_interval > 0.0)) throw ConfigError("horizon and sampling interval must be positive");
    const double ratio = horizon / sampling_interval;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) throw ConfigError("sampling interval must divide the horizon");
    if (architectures.empty()) throw ConfigError("at least one architecture is required");
    train.validate();
    if (evaluation.rollout_dt < 0.0 || evaluation.a_estimate < 0.0 || !(evaluation.reference_dx > 0.0))
        throw ConfigError("evaluation settings must be non-negative");
    if (evaluation.fourier_modes == 0) throw ConfigError("fourier_modes must be positive");
    if (problem == Problem::hetero_1d) {
        const auto p = medium.problem();
        p.validate();
        patch.validate(p);
        const double cells = (medium.x_hi - medium.x_lo) / evaluation.reference_dx;
        if (std::abs(cells - std::round(cells)) > 1e-9 * cells)
            throw ConfigError("reference_dx must divide the domain");
    } else {
        patch2d.validate();
        if (mode == DataMode::patch_dynamics)
            throw ConfigError("2d-lattice data are generated in gap-tooth mode only");
    }
}

std::string ExperimentConfig::canonical_json(bool with_architectures) const {
    nlohmann::ordered_json j;
    std::vector<std::string> archs;
    for (auto a : architectures) archs.push_back(nn::to_string(a));
    j["experiment"] = {{"name", name},
                       {"problem", to_string(problem)},
                       {"mode", to_string(mode)},
                       {"seed", seed},
                       {"train_trajectories", train_trajectories},
                       {"test_trajectories", test_trajectories},
                       {"horizon", horizon},
                       {"sampling_interval", sampling_interval},
                       {"include_boundary_nodes", include_boundary_nodes}};
    if (with_architectures) j["experiment"]["architectures"] = archs;
    if (problem == Problem::hetero_1d) {
        j["medium"] = {{"mean", medium.mean},
                       {"amplitude", medium.amplitude},
                       {"epsilon", medium.epsilon},
                       {"x_lo", medium.x_lo},
                       {"x_hi", medium.x_hi}};
        j["patch"] = {{"teeth", patch.grid.teeth},
                      {"tooth_width", patch.grid.h},
                      {"buffer_width", patch.grid.buffer},
                      {"coupling_degree", patch.grid.coupling_degree},
                      {"lifting_degree", patch.grid.lifting_degree},
                      {"dx", patch.dx},
                      {"dt_micro", patch.dt_micro},
                      {"dt_macro", patch.dt_macro},
                      {"n_burst", patch.n_burst},
                      {"n_heal", patch.n_heal},
                      {"theta", patch.theta},
                      {"projective", to_string(patch.scheme)}};
    } else {
        j["patch2d"] = {{"lattice", patch2d.lattice.nx},
                        {"patches", patch2d.patches},
                        {"interior", patch2d.interior},
                        {"core", patch2d.core},
                        {"phase", patch2d.phase},
                        {"shift", patch2d.shift},
                        {"coupling", to_string(patch2d.coupling)},
                        {"scheme", to_string(patch2d.scheme)},
                        {"dt", patch2d.dt}};
    }
    j["train"] = {{"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"max_epochs", train.max_epochs},
                  {"validation_fraction", train.validation_fraction},
                  {"patience", train.patience},
                  {"hidden", train.hidden},
                  {"normalize", train.normalize},
                  {"max_batches_per_epoch", train.max_batches_per_epoch}};
    j["evaluation"] = {{"rollout_dt", evaluation.rollout_dt},
                       {"a_estimate", evaluation.a_estimate},
                       {"reference_dx", evaluation.reference_dx},
                       {"fourier_modes", evaluation.fourier_modes}};
    return j.dump(2);
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical_json(false)); }

ExperimentConfig ExperimentConfig::defaults(Problem problem) {
    ExperimentConfig c;
    c.problem = problem;
    if (problem == Problem::hetero_1d) {
        c.name = "default_1d";
        c.patch.grid.x_lo = c.medium.x_lo;
        c.patch.grid.x_hi = c.medium.x_hi;
    } else {
        c.name = "default_2d";
        c.mode = DataMode::gap_tooth;
        c.train_trajectories = 85;
        c.test_trajectories = 15;
        c.sampling_interval = 0.01;
        c.patch2d.scheme = micro::TimeScheme::backward_euler;
        c.patch2d.dt = 2e-4;
        c.train.max_epochs = 40;
        c.train.patience = 10;
    }
    return c;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.source().begin.line) + ": " + std::string(e.description()));
    }
    for (const auto& [k, v] : root) {
        static const std::set<std::string> tables{"experiment", "medium", "patch", "patch2d", "train", "evaluation"};
        if (!tables.count(std::string(k.str())) || !v.is_table())
            throw ConfigError(source + ": unknown top-level entry '" + std::string(k.str()) + "'");
    }
    Section ex(root["experiment"].as_table(), "experiment");
    std::string problem = "1d-hetero";
    ex.get("problem", problem);
    ExperimentConfig c = ExperimentConfig::defaults(problem_from_string(problem));
    ex.get("name", c.name);
    ex.get_enum("mode", c.mode, data_mode_from_string);
    ex.get("seed", c.seed);
    ex.get("train_trajectories", c.train_trajectories);
    ex.get("test_trajectories", c.test_trajectories);
    ex.get("horizon", c.horizon);
    ex.get("sampling_interval", c.sampling_interval);
    ex.get("include_boundary_nodes", c.include_boundary_nodes);
    if (ex.has("architectures")) {
        c.architectures.clear();
        for (const auto& s : ex.strings("architectures")) c.architectures.push_back(nn::architecture_from_string(s));
    } else {
        ex.strings("architectures");
    }
    ex.finish();

    Section md(root["medium"].as_table(), "medium");
    md.get("mean", c.medium.mean);
    md.get("amplitude", c.medium.amplitude);
    md.get("epsilon", c.medium.epsilon);
    md.get("x_lo", c.medium.x_lo);
    md.get("x_hi", c.medium.x_hi);
    md.finish();
    c.patch.grid.x_lo = c.medium.x_lo;
    c.patch.grid.x_hi = c.medium.x_hi;

    Section pa(root["patch"].as_table(), "patch");
    pa.get("teeth", c.patch.grid.teeth);
    pa.get("tooth_width", c.patch.grid.h);
    pa.get("buffer_width", c.patch.grid.buffer);
    pa.get("coupling_degree", c.patch.grid.coupling_degree);
    pa.get("lifting_degree", c.patch.grid.lifting_degree);
    pa.get("dx", c.patch.dx);
    pa.get("dt_micro", c.patch.dt_micro);
    pa.get("dt_macro", c.patch.dt_macro);
    pa.get("n_burst", c.patch.n_burst);
    pa.get("n_heal", c.patch.n_heal);
    pa.get("theta", c.patch.theta);
    pa.get_enum("projective", c.patch.scheme, projective_from_string);
    pa.finish();

    Section p2(root["patch2d"].as_table(), "patch2d");
    std::size_t lattice = c.patch2d.lattice.nx;
    p2.get("lattice", lattice);
    if (lattice != c.patch2d.lattice.nx) c.patch2d.lattice = micro::LatticeProblem2D::reference_medium(lattice);
    p2.get("patches", c.patch2d.patches);
    p2.get("interior", c.patch2d.interior);
    p2.get("core", c.patch2d.core);
    p2.get("phase", c.patch2d.phase);
    p2.get("shift", c.patch2d.shift);
    p2.get_enum("coupling", c.patch2d.coupling, coupling_from_string);
    p2.get_enum("scheme", c.patch2d.scheme, scheme_from_string);
    p2.get("dt", c.patch2d.dt);
    p2.finish();

    Section tr(root["train"].as_table(), "train");
    tr.get("batch_size", c.train.batch_size);
    tr.get("learning_rate", c.train.learning_rate);
    tr.get("max_epochs", c.train.max_epochs);
    tr.get("validation_fraction", c.train.validation_fraction);
    tr.get("patience", c.train.patience);
    tr.get("hidden", c.train.hidden);
    tr.get("normalize", c.train.normalize);
    tr.get("max_batches_per_epoch", c.train.max_batches_per_epoch);
    tr.finish();

    Section ev(root["evaluation"].as_table(), "evaluation");
    ev.get("rollout_dt", c.evaluation.rollout_dt);
    ev.get("a_estimate", c.evaluation.a_estimate);
    ev.get("reference_dx", c.evaluation.reference_dx);
    ev.get("fourier_modes", c.evaluation.fourier_modes);
    ev.finish();

    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

void apply_paper_scale(ExperimentConfig& c) {
    if (c.problem != Problem::hetero_1d) throw ConfigError("--paper-scale applies to the 1D experiment only");
    c.medium.epsilon = 1e-5;
    c.patch.grid.h = 1e-4;
    c.patch.grid.buffer = 8e-3;
    c.patch.dx = 1e-7;
    c.patch.dt_micro = 1e-6;
    c.patch.dt_macro = 1e-3;
    c.validate();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

}  // namespace patchnet::config
