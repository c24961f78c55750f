#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "patchnet/config.hpp"
#include "patchnet/dataset.hpp"
#include "patchnet/errors.hpp"
#include "patchnet/experiment.hpp"

namespace fs = std::filesystem;
using namespace patchnet;
using namespace patchnet::experiment;

namespace {

constexpr double pi = std::numbers::pi;

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("patchnet_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

data::SnapshotDataset small_dataset(std::size_t dim) {
    data::SnapshotDataset ds;
    auto& g = ds.geometry;
    g.dim = dim;
    g.nx = 3;
    g.x = {0.0, 0.1, 1.0 / 3.0};
    if (dim == 2) {
        g.ny = 2;
        g.y = {0.0, pi};
        g.periodic = true;
    } else {
        g.dirichlet_ends = true;
    }
    ds.provenance = {"patch-dynamics", "abc123", 99};
    Rng rng(5);
    for (std::size_t k = 0; k < 2; ++k) {
        data::Trajectory tr;
        tr.index = 4 + k;
        tr.seed = 1000 + k;
        for (std::size_t s = 0; s < 3; ++s) {
            data::Record r;
            r.t = 0.1 * static_cast<double>(s);
            for (std::size_t p = 0; p < g.points(); ++p) {
                r.u.push_back(rng.uniform(-1, 1) * std::pow(10.0, rng.integer(-12, 12)));
                r.dudt.push_back(rng.uniform(-1, 1) / 3.0);
            }
            tr.records.push_back(std::move(r));
        }
        ds.trajectories.push_back(std::move(tr));
    }
    return ds;
}

}  // namespace

// --- initial conditions --------------------------------------------------

TEST(InitialCondition, SingleTermExamples) {
    const InitialCondition1D ic1{{1.0}, {1.0}, {0.0}};
    EXPECT_NEAR(ic1(0.25), 1.0, 1e-15);
    EXPECT_NEAR(ic1(0.0), 0.0, 1e-15);
    const InitialCondition2D ic2{{1.0}, {1}, {1}, {0.0}, {0.0}};
    EXPECT_NEAR(ic2(pi / 2, pi / 2), 1.0, 1e-15);
}

TEST(InitialCondition, DrawsStayInsideSupports) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto ic = random_ic_1d(rng);
        ASSERT_EQ(ic.a.size(), 20u);
        double bound = 0.0;
        for (std::size_t j = 0; j < 20; ++j) {
            EXPECT_GE(ic.a[j], -1.0);
            EXPECT_LT(ic.a[j], 1.0);
            EXPECT_GE(ic.l[j], 0.0);
            EXPECT_LT(ic.l[j], 4.0);
            EXPECT_GE(ic.phi[j], 0.0);
            EXPECT_LT(ic.phi[j], 2 * pi);
            bound += std::abs(ic.a[j]);
        }
        for (double x = 0.0; x <= 1.0; x += 0.01) EXPECT_LE(std::abs(ic(x)), bound + 1e-12);

        const auto ic2 = random_ic_2d(rng);
        ASSERT_EQ(ic2.a.size(), 10u);
        for (std::size_t j = 0; j < 10; ++j) {
            EXPECT_GE(ic2.lx[j], 1);
            EXPECT_LE(ic2.lx[j], 5);
            EXPECT_GE(ic2.ly[j], 1);
            EXPECT_LE(ic2.ly[j], 5);
        }
        // Integer wavenumbers keep the field 2 pi periodic in both directions.
        EXPECT_NEAR(ic2(0.3, 1.1), ic2(0.3 + 2 * pi, 1.1 - 2 * pi), 1e-12);
    }
}

TEST(InitialCondition, SeedsAreDeterministicAndDisjoint) {
    Rng a(42), b(42);
    const auto x = random_ic_1d(a), y = random_ic_1d(b);
    EXPECT_EQ(x.a, y.a);
    EXPECT_EQ(x.l, y.l);
    EXPECT_EQ(x.phi, y.phi);

    EXPECT_EQ(trajectory_seed(7, 3), trajectory_seed(7, 3));
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < 100; ++i) seen.insert(trajectory_seed(7, i));
    EXPECT_EQ(seen.size(), 100u);
    EXPECT_NE(trajectory_seed(7, 0), trajectory_seed(8, 0));
    EXPECT_NE(training_seed(7, nn::Architecture::mlp), training_seed(7, nn::Architecture::stencil));
    // Trajectory seeds do not depend on the order in which they are requested.
    const auto late = trajectory_seed(7, 99);
    for (std::size_t i = 0; i < 10; ++i) trajectory_seed(7, i);
    EXPECT_EQ(trajectory_seed(7, 99), late);
}

// --- dataset IO ----------------------------------------------------------

TEST(DatasetIo, RoundTripIsBitExact) {
    const auto dir = fresh_dir("io");
    for (std::size_t dim : {1u, 2u}) {
        const auto ds = small_dataset(dim);
        data::write_dataset(ds, dir / "d.csv", dir / "d.json");
        const auto back = data::read_dataset(dir / "d.csv", dir / "d.json");
        EXPECT_EQ(back, ds);
        // Writing again gives the same bytes.
        const auto first = slurp(dir / "d.csv");
        data::write_dataset(back, dir / "d.csv", dir / "d.json");
        EXPECT_EQ(slurp(dir / "d.csv"), first);
    }
    fs::remove_all(dir);
}

TEST(DatasetIo, EmptyDatasetIsHeaderOnly) {
    const auto dir = fresh_dir("empty");
    auto ds = small_dataset(1);
    ds.trajectories.clear();
    data::write_dataset(ds, dir / "d.csv", dir / "d.json");
    EXPECT_EQ(slurp(dir / "d.csv"), "trajectory,t,i,x,U,dUdt\n");
    const auto meta = nlohmann::json::parse(slurp(dir / "d.json"));
    EXPECT_TRUE(meta.at("trajectories").empty());
    EXPECT_EQ(data::read_dataset(dir / "d.csv", dir / "d.json"), ds);
    fs::remove_all(dir);
}

TEST(DatasetIo, HandWrittenFixture) {
    const auto dir = fresh_dir("hand");
    spit(dir / "d.json", R"({"geometry": {"dim": 1, "nx": 2, "ny": 1, "x": [0.25, 0.75], "y": [],
        "periodic": false, "dirichlet_ends": false},
        "provenance": {"scheme": "gap-tooth", "config_hash": "h", "seed": 3},
        "trajectories": [{"index": 0, "seed": 11, "records": 1}, {"index": 1, "seed": 12, "records": 1}]})");
    spit(dir / "d.csv",
         "trajectory,t,i,x,U,dUdt\n"
         "0,0,0,0.25,1.5,-2\n"
         "0,0,1,0.75,2.5,1e-3\n"
         "1,0.5,0,0.25,-0.125,0\n"
         "1,0.5,1,0.75,3,4.75\n");
    const auto ds = data::read_dataset(dir / "d.csv", dir / "d.json");
    ASSERT_EQ(ds.trajectories.size(), 2u);
    EXPECT_EQ(ds.trajectories[0].records[0].u, (std::vector<double>{1.5, 2.5}));
    EXPECT_EQ(ds.trajectories[0].records[0].dudt, (std::vector<double>{-2.0, 1e-3}));
    EXPECT_EQ(ds.trajectories[1].records[0].t, 0.5);
    EXPECT_EQ(ds.trajectories[1].records[0].u, (std::vector<double>{-0.125, 3.0}));
    EXPECT_EQ(ds.trajectories[1].seed, 12u);
    EXPECT_EQ(ds.provenance.scheme, "gap-tooth");
    fs::remove_all(dir);
}

TEST(DatasetIo, MalformedRowsReportLineNumbers) {
    const auto dir = fresh_dir("bad");
    const auto ds = small_dataset(1);
    data::write_dataset(ds, dir / "d.csv", dir / "d.json");
    auto text = slurp(dir / "d.csv");
    // Corrupt the U value on line 4.
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) pos = text.find('\n', pos) + 1;
    const auto end = text.find('\n', pos);
    auto line = text.substr(pos, end - pos);
    line = line.substr(0, line.rfind(',', line.rfind(',') - 1)) + ",oops,0";
    spit(dir / "bad.csv", text.substr(0, pos) + line + text.substr(end));
    try {
        data::read_dataset(dir / "bad.csv", dir / "d.json");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
    }
    spit(dir / "short.csv", text.substr(0, text.size() / 2));
    EXPECT_THROW(data::read_dataset(dir / "short.csv", dir / "d.json"), ParseError);
    spit(dir / "head.csv", "t,U\n");
    EXPECT_THROW(data::read_dataset(dir / "head.csv", dir / "d.json"), ParseError);
    EXPECT_THROW(data::read_dataset(dir / "missing.csv", dir / "d.json"), InputError);
    fs::remove_all(dir);
}

// --- configuration -------------------------------------------------------

TEST(Config, DefaultsValidateAndShippedFilesParse) {
    EXPECT_NO_THROW(config::ExperimentConfig::defaults(config::Problem::hetero_1d).validate());
    EXPECT_NO_THROW(config::ExperimentConfig::defaults(config::Problem::lattice_2d).validate());
    for (const char* name : {"default_1d", "default_2d", "smoke_1d", "paper_1d"}) {
        const auto c = config::load_config(fs::path(PATCHNET_CONFIG_DIR) / (std::string(name) + ".toml"));
        EXPECT_EQ(c.name, name);
    }
    const auto c2 = config::load_config(fs::path(PATCHNET_CONFIG_DIR) / "default_2d.toml");
    EXPECT_EQ(c2.train_trajectories, 85u);
    EXPECT_EQ(c2.test_trajectories, 15u);
    EXPECT_EQ(c2.samples(), 101u);
    const auto c1 = config::load_config(fs::path(PATCHNET_CONFIG_DIR) / "default_1d.toml");
    EXPECT_EQ(c1.train_trajectories, 8u);
    EXPECT_EQ(c1.test_trajectories, 2u);
    EXPECT_EQ(c1.samples(), 1001u);
}

TEST(Config, ErrorsNameKeyAndLine) {
    try {
        config::parse_config("[train]\nbatch_size = 8\nlearning_rat = 0.1\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("learning_rat"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    try {
        config::parse_config("[patch]\nteeth = \"nine\"\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    EXPECT_THROW(config::parse_config("[experiment\n"), ConfigError);
    EXPECT_THROW(config::parse_config("[nonsense]\n"), ConfigError);
    EXPECT_THROW(config::parse_config("[experiment]\nproblem = \"3d\"\n"), ConfigError);
    EXPECT_THROW(config::parse_config("[experiment]\nsampling_interval = 0.3\n"), ConfigError);
    EXPECT_THROW(config::parse_config("[experiment]\ntrain_trajectories = 0\n"), ConfigError);
    EXPECT_THROW(config::parse_config("[experiment]\nproblem = \"2d-lattice\"\nmode = \"patch-dynamics\"\n"),
                 ConfigError);
}

TEST(Config, HashTracksNumericsButNotArchitectures) {
    auto a = config::ExperimentConfig::defaults(config::Problem::hetero_1d);
    auto b = a;
    b.architectures = {nn::Architecture::mlp};
    EXPECT_EQ(a.hash(), b.hash());
    b.patch.dt_macro = 5e-4;
    EXPECT_NE(a.hash(), b.hash());
    EXPECT_EQ(a.hash().size(), 64u);
    // SHA-256 of the empty string.
    EXPECT_EQ(config::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Config, FineScaleOverrides) {
    auto c = config::ExperimentConfig::defaults(config::Problem::hetero_1d);
    config::apply_paper_scale(c);
    EXPECT_EQ(c.medium.epsilon, 1e-5);
    EXPECT_EQ(c.patch.dx, 1e-7);
    auto d = config::ExperimentConfig::defaults(config::Problem::lattice_2d);
    EXPECT_THROW(config::apply_paper_scale(d), ConfigError);
}

// --- manifest ------------------------------------------------------------

TEST(Manifest, RecordSaveLoad) {
    const auto dir = fresh_dir("manifest");
    const auto c = config::ExperimentConfig::defaults(config::Problem::hetero_1d);
    auto m = Manifest::open(dir, c);
    fs::create_directories(dir / "metrics");
    spit(dir / "metrics/a.csv", "x\n1\n");
    m.record(dir, "metrics/a.csv", "metrics", {"fig4"});
    m.record(dir, "metrics/a.csv", "metrics", {"fig4"});
    ASSERT_EQ(m.artifacts.size(), 1u);
    EXPECT_EQ(m.find("metrics/a.csv")->sha256, config::sha256_hex("x\n1\n"));
    EXPECT_EQ(m.find("metrics/a.csv")->bytes, 4u);
    m.save(dir);
    const auto back = Manifest::load(dir);
    EXPECT_EQ(back.config_hash, c.hash());
    EXPECT_EQ(back.artifacts.size(), 1u);
    EXPECT_EQ(back.artifacts[0].figures, std::vector<std::string>{"fig4"});

    auto other = c;
    other.medium.epsilon = 2e-3;
    EXPECT_THROW(Manifest::open(dir, other), ConfigError);
    EXPECT_NO_THROW(Manifest::open(dir, c));
    fs::remove_all(dir);
}

// --- end to end through the CLI ----------------------------------------------

#ifdef PATCHNET_CLI
namespace {

int cli(const std::string& args) {
    const std::string cmd = std::string(PATCHNET_CLI) + " " + args + " -q 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kTiny = R"([experiment]
name = "tiny"
seed = 7
train_trajectories = 2
test_trajectories = 1
horizon = 0.05
sampling_interval = 0.01

[train]
max_epochs = 3
patience = 3
)";

}  // namespace

TEST(Cli, RunIsByteIdenticalPerSeedAndManifestCoversEveryFile) {
    const auto dir = fresh_dir("cli");
    spit(dir / "tiny.toml", kTiny);
    const std::string cfg = "--config " + (dir / "tiny.toml").string();
    ASSERT_EQ(cli("run " + cfg + " --out " + (dir / "a").string()), 0);
    ASSERT_EQ(cli("run " + cfg + " --out " + (dir / "b").string()), 0);
    ASSERT_EQ(cli("run " + cfg + " --seed 8 --out " + (dir / "c").string()), 0);

    const auto manifest = Manifest::load(dir / "a");
    EXPECT_EQ(manifest.status, "complete");
    std::set<std::string> listed;
    for (const auto& a : manifest.artifacts) {
        EXPECT_TRUE(listed.insert(a.path).second) << a.path;
        EXPECT_EQ(config::sha256_file(dir / "a" / a.path), a.sha256) << a.path;
    }
    for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir / "a").generic_string();
        if (rel == "manifest.json") continue;
        EXPECT_TRUE(listed.count(rel)) << rel << " is not in the manifest";
        EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
    }
    for (const char* f : {"datasets/train.csv", "metrics/rhs_mlp.csv", "metrics/rollout.csv", "models/stencil.json"})
        EXPECT_TRUE(listed.count(f)) << f;
    EXPECT_EQ(slurp(dir / "a/manifest.json"), slurp(dir / "b/manifest.json"));
    EXPECT_NE(slurp(dir / "a/datasets/train.csv"), slurp(dir / "c/datasets/train.csv"));

    // Train and test seeds come from disjoint index ranges.
    const auto train = data::read_dataset(dir / "a/datasets/train.csv", dir / "a/datasets/train.json");
    const auto test = data::read_dataset(dir / "a/datasets/test.csv", dir / "a/datasets/test.json");
    ASSERT_EQ(train.trajectories.size(), 2u);
    ASSERT_EQ(test.trajectories.size(), 1u);
    EXPECT_EQ(test.trajectories[0].index, 2u);
    EXPECT_EQ(test.trajectories[0].seed, trajectory_seed(7, 2));
    EXPECT_EQ(train.trajectories[1].seed, trajectory_seed(7, 1));
    EXPECT_EQ(train.trajectories[0].records.size(), 6u);
    fs::remove_all(dir);
}

TEST(Cli, StagesResumeAndExitCodes) {
    const auto dir = fresh_dir("cli_stages");
    spit(dir / "tiny.toml", kTiny);
    const std::string cfg = "--config " + (dir / "tiny.toml").string() + " --out " + (dir / "s").string();
    EXPECT_EQ(cli("generate " + cfg), 0);
    EXPECT_EQ(cli("train " + cfg + " --arch mlp"), 0);
    EXPECT_TRUE(fs::exists(dir / "s/models/mlp.json"));
    EXPECT_FALSE(fs::exists(dir / "s/models/stencil.json"));
    EXPECT_EQ(Manifest::load(dir / "s").status, "incomplete");
    // Evaluating before the stencil model exists is an input failure.
    EXPECT_EQ(cli("evaluate " + cfg + " --arch both"), 1);
    EXPECT_EQ(cli("evaluate " + cfg + " --arch mlp"), 0);

    spit(dir / "bad.toml", "[experiment]\nbogus = 1\n");
    EXPECT_EQ(cli("generate --config " + (dir / "bad.toml").string() + " --out " + (dir / "x").string()), 2);
    EXPECT_EQ(cli("generate --no-such-flag"), 2);
    EXPECT_EQ(cli("run --config " + (dir / "tiny.toml").string() + " --seed 9 --out " + (dir / "s").string()), 2);

    spit(dir / "blow.toml",
         "[experiment]\ntrain_trajectories = 1\ntest_trajectories = 1\nsampling_interval = 0.05\n"
         "[patch]\ndt_macro = 0.05\n");
    EXPECT_EQ(cli("generate --config " + (dir / "blow.toml").string() + " --out " + (dir / "blow").string()), 3);
    const auto failed = Manifest::load(dir / "blow");
    EXPECT_EQ(failed.status, "failed");
    EXPECT_EQ(failed.failed_stage, "generate");
    fs::remove_all(dir);
}
#endif
