#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path scratch_root = fs::temp_directory_path() / ("ablatron_cli_" + std::to_string(::getpid()));

int run(const std::string& args) {
    const std::string cmd = std::string(ABLATRON_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string scenario(const std::string& name) { return std::string(SCENARIO_DIR) + "/" + name; }

fs::path write(const std::string& name, const std::string& body) {
    fs::create_directories(scratch_root);
    const auto p = scratch_root / name;
    std::ofstream(p) << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
protected:
    static void TearDownTestSuite() { fs::remove_all(scratch_root); }
};

}  // namespace

TEST_F(Cli, SimulateWritesRunDirectory) {
    const auto cfg = write("short.conf", "[run]\nname = short\nduration = 1 s\n[ablation]\nyield_scale = 4e14\n");
    const auto out = scratch_root / "short";
    ASSERT_EQ(run("simulate " + cfg.string() + " --out " + out.string() + " --seed 3"), 0);
    for (const char* f : {"manifest.txt", "events.csv", "fluorescence.csv", "pressure.csv", "ion_count.csv",
                          "plots/plots.spec"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_NE(slurp(out / "manifest.txt").find("seed = 3"), std::string::npos);
    EXPECT_EQ(run("report " + out.string()), 0);
}

TEST_F(Cli, SimulateIsByteDeterministic) {
    const auto cfg = write("det.conf", "[run]\nname = det\nduration = 1 s\n[ablation]\nyield_scale = 4e14\n");
    const auto a = scratch_root / "det_a", b = scratch_root / "det_b";
    ASSERT_EQ(run("simulate " + cfg.string() + " --out " + a.string()), 0);
    ASSERT_EQ(run("simulate " + cfg.string() + " --out " + b.string()), 0);
    for (const char* f : {"manifest.txt", "events.csv", "captures.csv", "fluorescence.csv", "pressure.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST_F(Cli, ShippedDepthScanScenarioRuns) {
    const auto out = scratch_root / "depth";
    ASSERT_EQ(run("simulate " + scenario("depth_scan.conf") + " --out " + out.string()), 0);
    ASSERT_TRUE(fs::exists(out / "depth_scan.csv"));
    EXPECT_EQ(run("fit threshold " + (out / "depth_scan.csv").string()), 0);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
    EXPECT_EQ(run("simulate " + write("bad_key.conf", "[trap]\nrf_amplitud = 3\n").string()), 2);
    EXPECT_EQ(run("simulate " + write("bad_doc.conf", "[trap\n").string()), 2);
    EXPECT_EQ(run("simulate " + write("bad_inv.conf", "[ablation_laser]\nwaist = 0\n").string()), 2);
    EXPECT_EQ(run("simulate /nonexistent/ablatron.conf"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("sweep " + scenario("depth_scan.conf") + " --vary nonsense"), 2);
    EXPECT_EQ(run("fit threshold " + write("bad.csv", "fluence_mJ_cm2,depth_um\n1,x\n").string()), 2);
}

TEST_F(Cli, PhysicsErrorsExitThree) {
    EXPECT_EQ(run("simulate " + write("unstable.conf", "[trap]\nrf_amplitude = 2000 V\n").string()), 3);
    EXPECT_EQ(run("calibrate --target-rate 1e15 --fluence 240 --rep-rate 25e3"), 3);
    EXPECT_EQ(run("calibrate --target-rate 10 --fluence 900 --rep-rate 25e3"), 2);
    EXPECT_EQ(run("fit saturation " + write("flat.csv", "power_mW,rate_ions_s\n1,0\n2,0\n3,0\n").string()), 3);
}

TEST_F(Cli, CalibrateSucceeds) {
    EXPECT_EQ(run("calibrate --target-rate 5 --fluence 240 --rep-rate 25kHz"), 0);
}

TEST_F(Cli, SweepWritesOrderedRuns) {
    const auto cfg = write("sweep.conf", "[run]\nname = sw\nduration = 0.5 s\n[ablation]\nyield_scale = 4e14\n");
    const auto out = scratch_root / "sweep";
    ASSERT_EQ(run("sweep " + cfg.string() + " --vary ablation.fluence=200mJ/cm2:300mJ/cm2:3 --jobs 2 --out " +
                  out.string()),
              0);
    for (const char* d : {"sw-000", "sw-001", "sw-002"}) EXPECT_TRUE(fs::exists(out / d / "manifest.txt")) << d;
    const auto table = slurp(out / "sweep.csv");
    EXPECT_LT(table.find("sw-000"), table.find("sw-001"));
    EXPECT_LT(table.find("sw-001"), table.find("sw-002"));
}

TEST_F(Cli, FitSaturationFromCsv) {
    std::string body = "power_mW,rate_ions_s\n";
    for (double p : {0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0})
        body += std::to_string(p) + "," + std::to_string(200 * p / (p + 5)) + "\n";
    EXPECT_EQ(run("fit saturation " + write("sat.csv", body).string()), 0);
    EXPECT_EQ(run("fit parabola " + write("sat2.csv", body).string()), 2);
}
