#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(DNQS_CLI_PATH) + " " + args + " 2>&1";
  std::FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult res;
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), pipe)) res.output += buf;
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "dnqs_cli_tests";
  fs::create_directories(dir);
  const fs::path path = dir / name;
  std::ofstream f(path);
  f << body;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string extract_run_dir(const std::string& output) {
  const auto at = output.find("run_dir: ");
  REQUIRE(at != std::string::npos);
  const auto end = output.find('\n', at);
  return output.substr(at + 9, end - at - 9);
}

// metrics CSV with the wall-time column stripped; everything else must be
// byte-identical across reruns
std::string strip_seconds(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    out += line.substr(0, comma) + "\n";
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("missing config file exits 2 and names the path") {
  const auto res = run_cli("train --config /no/such/file.cfg");
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("/no/such/file.cfg") != std::string::npos);
}

TEST_CASE("config parse errors exit 2 with a line number") {
  const auto cfg = write_config("broken.cfg", "benchmark = tfim\nwhat is this\n");
  const auto res = run_cli("train --config " + cfg.string());
  CHECK(res.exit_code == 2);
  CHECK(res.output.find(":2") != std::string::npos);
}

TEST_CASE("dry run prints the resolved configuration and exits 0") {
  const auto cfg = write_config("dry.cfg", "benchmark = cluster\nn_sites = 64\n");
  const auto res = run_cli("train --config " + cfg.string() + " --dry-run");
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("hidden = 256") != std::string::npos);
  CHECK(res.output.find("learning_rate = 0.001") != std::string::npos);
  CHECK(res.output.find("n_sites = 64") != std::string::npos);
}

TEST_CASE("exact subcommand closed values and resource guard") {
  const auto cluster8 = write_config("ex8.cfg", "hamiltonian = cluster_es\nn_sites = 8\n");
  const auto res = run_cli("exact --config " + cluster8.string());
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("ground_energy = -8") != std::string::npos);

  const auto tfim3 = write_config("ex3.cfg", "hamiltonian = tfim_pbc\nn_sites = 3\ng = 0\n");
  const auto res3 = run_cli("exact --config " + tfim3.string());
  CHECK(res3.exit_code == 0);
  CHECK(res3.output.find("ground_energy = -3") != std::string::npos);

  const auto big = write_config("ex20.cfg", "hamiltonian = tfim_pbc\nn_sites = 20\n");
  CHECK(run_cli("exact --config " + big.string()).exit_code == 4);
}

TEST_CASE("theory subcommand validates stability and writes artifacts") {
  const auto bad = write_config("th_bad.cfg", "mode = vanilla\nlambda = 1.5\ncoupling = 0.1\n");
  const auto res_bad = run_cli("theory --config " + bad.string());
  CHECK(res_bad.exit_code == 2);
  CHECK(res_bad.output.find("stability") != std::string::npos);

  const auto out = fs::temp_directory_path() / "dnqs_cli_tests" / "theory_out";
  fs::remove_all(out);
  const auto good = write_config(
      "th.cfg", "mode = vanilla\nlambda = 0.5\ncoupling = 0.1\nbias = 0\nn_max = 256\n");
  const auto res = run_cli("theory --config " + good.string() + " --out " + out.string());
  CHECK(res.exit_code == 0);
  const fs::path dir = extract_run_dir(res.output);
  CHECK(fs::exists(dir / "kernel.csv"));
  CHECK(fs::exists(dir / "capp.csv"));
  const std::string report = slurp(dir / "report.json");
  CHECK(report.find("\"z_star\"") != std::string::npos);
  CHECK(report.find("1.666666") != std::string::npos);  // z* = 1/0.6
  CHECK(report.find("\"unit_disk_safe\": true") != std::string::npos);
}

TEST_CASE("zero-coupling spec reports a degenerate singularity") {
  const auto out = fs::temp_directory_path() / "dnqs_cli_tests" / "theory_degenerate";
  fs::remove_all(out);
  const auto cfg = write_config(
      "th0.cfg", "mode = vanilla\nlambda = 0.5\ncoupling = 0\nbias = 0\nn_max = 128\n");
  const auto res = run_cli("theory --config " + cfg.string() + " --out " + out.string());
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("no dominant positive singularity") != std::string::npos);
  const fs::path dir = extract_run_dir(res.output);
  CHECK(slurp(dir / "report.json").find("\"z_star\": null") != std::string::npos);
}

TEST_CASE("train/measure round trip with deterministic outputs") {
  const auto parent = fs::temp_directory_path() / "dnqs_cli_tests" / "train_out";
  fs::remove_all(parent);
  const auto cfg = write_config("train.cfg",
                                "benchmark = tfim\n"
                                "n_sites = 6\n"
                                "n_layers = 2\n"
                                "hidden = 4\n"
                                "n_samples = 40\n"
                                "n_samples_eval = 400\n"
                                "n_samples_correl = 2000\n"
                                "learning_rate = 1e-2\n"
                                "n_iterations = 30\n"
                                "checkpoint_interval = 10\n"
                                "seed = 5\n");

  const auto r1 = run_cli("train --config " + cfg.string() + " --out " + parent.string() +
                          " --threads 1");
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.output.find("energy = ") != std::string::npos);
  const fs::path dir1 = extract_run_dir(r1.output);
  CHECK(fs::exists(dir1 / "metrics.csv"));
  CHECK(fs::exists(dir1 / "final.dnqs"));
  CHECK(fs::exists(dir1 / "ckpt_000010.dnqs"));
  CHECK(fs::exists(dir1 / "result.json"));
  CHECK(fs::exists(dir1 / "config_resolved.txt"));

  const auto r2 = run_cli("train --config " + cfg.string() + " --out " + parent.string() +
                          " --threads 2");
  REQUIRE(r2.exit_code == 0);
  const fs::path dir2 = extract_run_dir(r2.output);

  CHECK(strip_seconds(slurp(dir1 / "metrics.csv")) ==
        strip_seconds(slurp(dir2 / "metrics.csv")));
  CHECK(slurp(dir1 / "final.dnqs") == slurp(dir2 / "final.dnqs"));
  CHECK(slurp(dir1 / "result.json") == slurp(dir2 / "result.json"));

  // measure on the final checkpoint; re-running reproduces the CSV bytes
  const auto rm = run_cli("measure --config " + cfg.string() + " --checkpoint " +
                          (dir1 / "final.dnqs").string() + " --out " + parent.string());
  REQUIRE(rm.exit_code == 0);
  const fs::path mdir = extract_run_dir(rm.output);
  const std::string csv = slurp(mdir / "correlations.csv");
  CHECK(csv.find("r,chord_length,C,stderr") == 0);
  CHECK(slurp(mdir / "fit.json").find("\"seed\": 5") != std::string::npos);
  CHECK(slurp(mdir / "fit.json").find("\"excluded_points\"") != std::string::npos);

  const auto rm2 = run_cli("measure --config " + cfg.string() + " --checkpoint " +
                           (dir1 / "final.dnqs").string() + " --out " + parent.string());
  REQUIRE(rm2.exit_code == 0);
  CHECK(slurp(fs::path(extract_run_dir(rm2.output)) / "correlations.csv") == csv);

  // seed override is recorded in the JSON outputs
  const auto rs = run_cli("measure --config " + cfg.string() + " --checkpoint " +
                          (dir1 / "final.dnqs").string() + " --out " + parent.string() +
                          " --seed 77");
  REQUIRE(rs.exit_code == 0);
  CHECK(slurp(fs::path(extract_run_dir(rs.output)) / "fit.json").find("\"seed\": 77") !=
        std::string::npos);
}

TEST_CASE("checkpoint version mismatch exits 3") {
  const auto dir = fs::temp_directory_path() / "dnqs_cli_tests";
  fs::create_directories(dir);
  const fs::path fake = dir / "fake.dnqs";
  {
    std::ofstream f(fake, std::ios::binary);
    const char magic[4] = {'D', 'N', 'Q', 'S'};
    const std::uint32_t version = 999;
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(&version), 4);
  }
  const auto cfg = write_config("m.cfg", "benchmark = tfim\nn_sites = 6\nn_layers = 2\n");
  const auto res = run_cli("measure --config " + cfg.string() + " --checkpoint " + fake.string());
  CHECK(res.exit_code == 3);
}

TEST_SUITE_END();
