#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = FSCBF_CLI_PATH;
const fs::path kSource = FSCBF_SOURCE_DIR;

int run(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + kCli.string() + "' " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("fscbf_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kShortScene = R"(model: unicycle
initial_state: [0.0, 0.0, 0.5, 0.0]
goal: [4.0, 0.3]
obstacles:
  - {center: [2.0, 0.1], radius: 0.4}
humans:
  - {position: [4.0, -0.6], velocity: [-1.0, 0.0], goal: [-4.0, -0.6]}
input_bounds: {lower: [-4, -2], upper: [4, 2]}
horizon: 1.0
controller: fs_cbf_qp
fs: {volume_method: ellipsoid}
shadow_cbf_qp: true
snapshot_stride: 20
)";

} // namespace

TEST(Cli, UsageErrorsExitWithTwo)
{
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("teleport"), 2);
    EXPECT_EQ(run("simulate --out /tmp/x"), 2);
    EXPECT_EQ(run("sweep --spec a.yaml --out b --jobs many"), 2);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, ConfigErrorsExitWithTwo)
{
    const fs::path dir = scratch("config_errors");
    EXPECT_EQ(run("simulate --config '" + (dir / "missing.yaml").string() + "' --out '" + dir.string() + "'"), 2);
    write(dir / "typo.yaml", std::string(kShortScene) + "horizn: 3\n");
    EXPECT_EQ(run("simulate --config '" + (dir / "typo.yaml").string() + "' --out '" + dir.string() + "'"), 2);
    write(dir / "broken.json", "{\"model\": ");
    EXPECT_EQ(run("simulate --config '" + (dir / "broken.json").string() + "' --out '" + dir.string() + "'"), 2);
    write(dir / "grid.yaml", "cells: [1, 60]\n");
    EXPECT_EQ(run("gridsweep --spec '" + (dir / "grid.yaml").string() + "' --out '" + dir.string() + "'"), 2);
}

TEST(Cli, SimulateWritesOutputs)
{
    const fs::path dir = scratch("simulate");
    write(dir / "scene.yaml", kShortScene);
    ASSERT_EQ(run("simulate --config '" + (dir / "scene.yaml").string() + "' --out '" + (dir / "out").string() +
                  "' --seed 4"),
              0);
    for (const char* f : {"trace.csv", "summary.json", "snapshots.json"}) EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
    const std::string trace = slurp(dir / "out" / "trace.csv");
    EXPECT_EQ(trace.rfind("step,t,", 0), 0u);
    EXPECT_NE(slurp(dir / "out" / "summary.json").find("\"seed\": 4"), std::string::npos);
}

TEST(Cli, SafetyViolationExitsWithOne)
{
    // Starting inside the keep-out disk while driving away: every step is
    // solvable but h < 0 is recorded.
    const fs::path dir = scratch("violation");
    write(dir / "inside.yaml", R"(model: unicycle
initial_state: [0.0, 0.0, 1.0, 0.0]
goal: [5.0, 0.0]
obstacles:
  - {center: [-0.2, 0.0], radius: 0.5}
input_bounds: {lower: [-8, -2], upper: [8, 2]}
horizon: 0.05
controller: cbf_qp
)");
    EXPECT_EQ(run("simulate --config '" + (dir / "inside.yaml").string() + "' --out '" + dir.string() + "'"), 1);
}

TEST(Cli, VolcheckPassesShippedFixturesAndFlagsWrongOnes)
{
    EXPECT_EQ(run("volcheck --fixtures '" + (kSource / "fixtures" / "volume").string() + "'"), 0);
    const fs::path dir = scratch("volcheck");
    write(dir / "wrong.json", R"({"name": "wrong", "A": [[1, 0], [-1, 0], [0, 1], [0, -1]], "b": [1, 1, 1, 1],
                                  "box": {"lower": [-1.5, -1.5], "upper": [1.5, 1.5]},
                                  "expected": {"volume": 3.0}})");
    EXPECT_EQ(run("volcheck --fixtures '" + dir.string() + "'"), 1);
    EXPECT_EQ(run("volcheck --fixtures '" + (dir / "nowhere").string() + "'"), 2);
}

TEST(Cli, SweepReportsAreByteIdentical)
{
    const fs::path dir = scratch("sweep");
    write(dir / "scene.yaml", kShortScene);
    write(dir / "sweep.yaml", R"(scenario_file: scene.yaml
samples: 4
seed: 11
ranges: {p_x: [-0.2, 0.2], p_y: [-0.2, 0.2], v: [0.3, 0.6], k_x: [0.8, 1.2], k_v: [1.5, 1.6]}
alpha_V: [0.8, 1.0]
)");
    const std::string spec = "--spec '" + (dir / "sweep.yaml").string() + "'";
    ASSERT_EQ(run("sweep " + spec + " --out '" + (dir / "a").string() + "' --jobs 1"), 0);
    ASSERT_EQ(run("sweep " + spec + " --out '" + (dir / "b").string() + "' --jobs 3"), 0);
    ASSERT_EQ(run("sweep " + spec + " --out '" + (dir / "c").string() + "'", "FSCBF_JOBS=2"), 0);
    ASSERT_EQ(run("sweep " + spec + " --out '" + (dir / "d").string() + "' --seed 12"), 0);
    const std::string a = slurp(dir / "a" / "report.json");
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(dir / "b" / "report.json"));
    EXPECT_EQ(a, slurp(dir / "c" / "report.json"));
    EXPECT_EQ(slurp(dir / "a" / "runs.csv"), slurp(dir / "b" / "runs.csv"));
    EXPECT_NE(a, slurp(dir / "d" / "report.json"));
}

TEST(Cli, GridsweepWritesHeatmaps)
{
    const fs::path dir = scratch("grid");
    write(dir / "grid.yaml", R"(cells: [6, 5]
obstacles:
  - {center: [3.0, 3.0], radius: 1.0}
methods: [mc, chebyshev, ellipsoid]
seed: 2
)");
    ASSERT_EQ(run("gridsweep --spec '" + (dir / "grid.yaml").string() + "' --out '" + dir.string() + "'"), 0);
    for (const char* f : {"base_mc.csv", "x2_ellipsoid.csv", "base_compatible.csv", "check.json"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
}
