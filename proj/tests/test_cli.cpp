// End-to-end exercises of the command-line tool. argv[1] is the binary path.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doser/io.hpp"
#include "doser/toyworld.hpp"

namespace fs = std::filesystem;
using namespace doser;

namespace {

std::string g_binary;
fs::path g_tmp;

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + g_binary + " " + args +
                            " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string tmp(const std::string& name) { return (g_tmp / name).string(); }

}  // namespace

TEST_CASE("gen-data: deterministic files, correct row count, noise ordering") {
    REQUIRE(run("gen-data --kind medium --n 3000 --seed 7 --out " + tmp("m1.ds")) == 0);
    REQUIRE(run("gen-data --kind medium --n 3000 --seed 7 --out " + tmp("m2.ds")) == 0);
    CHECK(slurp(tmp("m1.ds")) == slurp(tmp("m2.ds")));

    const Dataset d = load_dataset(tmp("m1.ds"));
    CHECK(d.rows() == 3000);
    CHECK(d.source_tag == "medium");

    REQUIRE(run("gen-data --kind expert --n 3000 --seed 7 --out " + tmp("e1.ds")) == 0);
    const Dataset e = load_dataset(tmp("e1.ds"));
    NavEnv env;
    double dev_m = 0.0, dev_e = 0.0;
    for (size_t i = 0; i < 3000; ++i) {
        dev_m += std::abs(d.a[i] - optimal_action(env, d.s[i]));
        dev_e += std::abs(e.a[i] - optimal_action(env, e.s[i]));
    }
    CHECK(dev_m > dev_e);
}

TEST_CASE("pretrain: behavior model learns and reloads to identical outputs") {
    REQUIRE(run("pretrain --what behavior --data " + tmp("m1.ds") +
                " --steps 600 --seed 3 --out " + tmp("behavior.ckpt")) == 0);
    const CsvTable trace = read_csv(tmp("behavior.ckpt.loss.csv"));
    REQUIRE(trace.rows.size() == 600);
    CHECK(std::stod(trace.rows.back()[1]) < std::stod(trace.rows.front()[1]));

    const DenoiserModel m1 = load_denoiser(tmp("behavior.ckpt"));
    const DenoiserModel m2 = load_denoiser(tmp("behavior.ckpt"));
    const double a = 0.2, s = 1.0;
    CHECK(denoise(m1, {&a, 1}, 0.5, {&s, 1}) == denoise(m2, {&a, 1}, 0.5, {&s, 1}));

    // load -> save -> load is byte-stable
    save_denoiser(m1, tmp("behavior2.ckpt"));
    CHECK(slurp(tmp("behavior.ckpt")) == slurp(tmp("behavior2.ckpt")));
}

TEST_CASE("pretrain: remaining model kinds write artifacts") {
    REQUIRE(run("pretrain --what state --data " + tmp("m1.ds") + " --steps 400 --out " +
                tmp("state.ckpt")) == 0);
    REQUIRE(run("pretrain --what dynamics --data " + tmp("m1.ds") + " --steps 400 --out " +
                tmp("dynamics.ckpt")) == 0);
    REQUIRE(run("pretrain --what cvae --data " + tmp("m1.ds") + " --steps 400 --out " +
                tmp("cvae")) == 0);
    REQUIRE(run("pretrain --what ensemble --data " + tmp("m1.ds") + " --steps 300 --out " +
                tmp("ens")) == 0);
    CHECK(fs::exists(tmp("state.ckpt")));
    CHECK(fs::exists(tmp("dynamics.ckpt")));
    CHECK(fs::exists(tmp("cvae") + "/encoder.ckpt"));
    CHECK(fs::exists(tmp("ens") + "/member4.ckpt"));
    const EnsembleDetector det = load_ensemble(tmp("ens"));
    CHECK(det.members.size() == 5);
    CHECK(det.calibrated());
}

TEST_CASE("calibrate writes thresholds and histograms") {
    REQUIRE(run("calibrate --behavior " + tmp("behavior.ckpt") + " --state " + tmp("state.ckpt") +
                " --data " + tmp("m1.ds") + " --pa 99 --ps 99 --out " + tmp("thr.json")) == 0);
    const OodThresholds t = load_thresholds(tmp("thr.json"));
    CHECK(t.calibrated());
    CHECK(t.tau_a > 0.0);
    CHECK(t.calibration_errors_a.size() == 3000);
    const CsvTable hist = read_csv(tmp("thr.json.hist_a.csv"));
    CHECK(hist.rows.size() == 64);
    size_t total = 0;
    for (const auto& row : hist.rows) total += std::stoull(row[2]);
    CHECK(total == 3000);
}

TEST_CASE("train: repeated runs emit byte-identical summaries and metrics") {
    const std::string cfg_path = tmp("tiny.cfg");
    {
        std::ofstream f(cfg_path);
        f << "[run]\nseed = 5\n[env]\nkind = medium\nsize = 4000\n"
          << "[diffusion]\nsteps = 1200\nsampler_steps = 4\nm_draws = 4\n"
          << "[dynamics]\nsteps = 800\n"
          << "[agent]\ntotal_steps = 40\nbatch = 64\nhidden = 32\nn_candidates = 4\n"
          << "log_interval = 20\neval_interval = 0\neval_episodes = 10\n";
    }
    REQUIRE(run("train --config " + cfg_path, "DOSER_ARTIFACTS=" + tmp("runA")) == 0);
    REQUIRE(run("train --config " + cfg_path, "DOSER_ARTIFACTS=" + tmp("runB")) == 0);
    CHECK(slurp(tmp("runA") + "/summary.json") == slurp(tmp("runB") + "/summary.json"));
    CHECK(slurp(tmp("runA") + "/metrics.csv") == slurp(tmp("runB") + "/metrics.csv"));
    CHECK(slurp(tmp("runA") + "/class_proportions.csv") ==
          slurp(tmp("runB") + "/class_proportions.csv"));
    CHECK(fs::exists(tmp("runA") + "/agent/actor.ckpt"));
    CHECK(fs::exists(tmp("runA") + "/thresholds.json"));

    const CsvTable metrics = read_csv(tmp("runA") + "/metrics.csv");
    REQUIRE(metrics.header.size() == 11);
    CHECK(metrics.rows.size() == 2);  // 40 steps at log_interval 20
    // Class proportions sum to one on every logged row.
    for (const auto& row : metrics.rows) {
        const double total = std::stod(row[7]) + std::stod(row[8]) + std::stod(row[9]);
        CHECK(total == doctest::Approx(1.0));
    }
}

TEST_CASE("train with zero steps emits a summary and leaves metrics empty") {
    const std::string cfg_path = tmp("zero.cfg");
    {
        std::ofstream f(cfg_path);
        f << "[run]\nseed = 5\n[env]\nkind = medium\nsize = 2000\n"
          << "[diffusion]\nsteps = 400\nsampler_steps = 4\nm_draws = 4\n"
          << "[dynamics]\nsteps = 300\n"
          << "[agent]\ntotal_steps = 0\nbatch = 64\nhidden = 32\n";
    }
    REQUIRE(run("train --config " + cfg_path, "DOSER_ARTIFACTS=" + tmp("runZ")) == 0);
    CHECK(fs::exists(tmp("runZ") + "/summary.json"));
    const CsvTable metrics = read_csv(tmp("runZ") + "/metrics.csv");
    CHECK(metrics.rows.empty());
}

TEST_CASE("eval: reproducible summaries from a saved agent") {
    REQUIRE(run("eval --agent " + tmp("runA") + "/agent --episodes 10 --seed 3 --out " +
                tmp("ev1.json")) == 0);
    REQUIRE(run("eval --agent " + tmp("runA") + "/agent --episodes 10 --seed 3 --out " +
                tmp("ev2.json")) == 0);
    CHECK(slurp(tmp("ev1.json")) == slurp(tmp("ev2.json")));
}

TEST_CASE("ood-bench: reports with the declared schema, reproducible") {
    const std::string args = "ood-bench --detector diffusion --data " + tmp("m1.ds") +
                             " --noise-scales 0.5,5.0 --n 300 --steps 1500 --seed 9 --out ";
    REQUIRE(run(args + tmp("benchA")) == 0);
    REQUIRE(run(args + tmp("benchB")) == 0);
    CHECK(slurp(tmp("benchA") + "/reports.csv") == slurp(tmp("benchB") + "/reports.csv"));

    const CsvTable rep = read_csv(tmp("benchA") + "/reports.csv");
    REQUIRE(rep.header.size() == 11);
    REQUIRE(rep.rows.size() == 2);
    for (const auto& row : rep.rows) {
        const double auroc_v = std::stod(row[9]);
        CHECK(auroc_v >= 0.0);
        CHECK(auroc_v <= 1.0);
        const size_t counts = std::stoull(row[1]) + std::stoull(row[2]) + std::stoull(row[3]) +
                              std::stoull(row[4]);
        CHECK(counts == 600);
    }
    const CsvTable roc = read_csv(tmp("benchA") + "/roc_scale_0.5.csv");
    CHECK(roc.rows.size() == 600);
}

TEST_CASE("tabular-verify certifies contraction and the deviation trend") {
    REQUIRE(run("tabular-verify --sizes 20x8,10x4 --trials 60 --seed 2 --out " +
                tmp("tab")) == 0);
    const std::string report = slurp(tmp("tab") + "/report.json");
    // Parse the two headline numbers out of the JSON text.
    CHECK(report.find("max_contraction_ratio") != std::string::npos);
    const CsvTable cert = read_csv(tmp("tab") + "/contraction.csv");
    REQUIRE(cert.rows.size() == 2);
    for (const auto& row : cert.rows) CHECK(std::stod(row[3]) <= 0.99 + 1e-9);
    const CsvTable dev = read_csv(tmp("tab") + "/deviation.csv");
    CHECK(dev.rows.size() == 4);
    CHECK(std::stod(dev.rows[0][2]) == 0.0);  // zero perturbation, zero deviation
}

TEST_CASE("gmm-correlate emits the scatter contract") {
    REQUIRE(run("gmm-correlate --n 400 --steps 1500 --seed 3 --out " + tmp("gmm")) == 0);
    const CsvTable scatter = read_csv(tmp("gmm") + "/scatter.csv");
    REQUIRE(scatter.header.size() == 2);
    CHECK(scatter.header[0] == "error");
    CHECK(scatter.header[1] == "nll");
    CHECK(scatter.rows.size() == 400);
}

TEST_CASE("exit codes encode the error category") {
    CHECK(run("ood-bench --detector nosuch --data " + tmp("m1.ds") + " --out " + tmp("x")) == 2);
    CHECK(run("pretrain --what behavior --data /nonexistent.ds --out " + tmp("x.ckpt")) == 3);
    CHECK(run("gen-data --kind bogus --n 10 --out " + tmp("x.ds")) == 2);
    CHECK(run("definitely-not-a-command") == 2);
    // Unknown config key is a usage error.
    {
        std::ofstream f(tmp("bad.cfg"));
        f << "[agent]\nnot_a_key = 1\n";
    }
    CHECK(run("train --config " + tmp("bad.cfg")) == 2);
}

int main(int argc, char** argv) {
    if (argc > 1) g_binary = argv[1];
    if (g_binary.empty()) {
        std::fprintf(stderr, "usage: test_cli <path-to-doser-binary>\n");
        return 1;
    }
    g_tmp = fs::temp_directory_path() / "doser_cli_test";
    fs::remove_all(g_tmp);
    fs::create_directories(g_tmp);

    doctest::Context ctx;
    const int res = ctx.run();
    fs::remove_all(g_tmp);
    return res;
}
