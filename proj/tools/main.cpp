#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "dnqs/config.hpp"
#include "dnqs/observables.hpp"
#include "dnqs/theory.hpp"
#include "dnqs/vmc.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dnqs;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_parent = "runs";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "key = value configuration file");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed, "override the config seed")
      ->each([&opts](const std::string&) { opts.seed_given = true; });
  cmd->add_option("--threads", opts.threads, "cap the worker pool (results independent of it)");
  cmd->add_option("--out", opts.out_parent, "parent directory for run outputs");
  cmd->add_flag("--dry-run", opts.dry_run, "print the resolved configuration and exit");
}

void apply_threads(const CommonOpts& opts) {
  if (opts.threads > 0) omp_set_num_threads(opts.threads);
}

// runs/<benchmark>-<seed>-<timestamp>; the timestamp stays out of file bodies
fs::path make_run_dir(const std::string& parent, const std::string& label,
                      std::uint64_t seed) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%S", std::localtime(&t));
  fs::path base = fs::path(parent) / (label + "-" + std::to_string(seed) + "-" + stamp);
  fs::path dir = base;
  for (int n = 2; fs::exists(dir); ++n) dir = base.string() + "-" + std::to_string(n);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_train(const CommonOpts& opts, const std::string& resume) {
  config::RunConfig run = config::RunConfig::from_file(opts.config_path);
  if (opts.seed_given) run.vmc.seed = opts.seed;
  if (opts.dry_run) {
    std::cout << run.summary();
    return 0;
  }
  apply_threads(opts);

  const std::string label = run.benchmark == "custom" ? run.vmc.hamiltonian.name()
                                                      : run.benchmark;
  const fs::path dir = make_run_dir(opts.out_parent, label, run.vmc.seed);
  std::cout << "run_dir: " << dir.string() << "\n";
  run.vmc.out_dir = dir.string();
  write_text(dir / "config_resolved.txt", run.summary());

  vmc::TrainResult result = vmc::train(run.vmc, resume);

  const auto energy =
      vmc::estimate_energy(result.params, run.vmc.hamiltonian, run.vmc.n_samples_eval,
                           run.vmc.seed, vmc::kEvalStreamBase);
  std::cout << "energy = " << fmt(energy.mean.real()) << " +- " << fmt(energy.stderr)
            << "\n";

  json j;
  j["benchmark"] = label;
  j["seed"] = run.vmc.seed;
  j["iterations"] = run.vmc.n_iterations;
  j["n_samples_eval"] = run.vmc.n_samples_eval;
  j["energy_re"] = energy.mean.real();
  j["energy_im"] = energy.mean.imag();
  j["energy_stderr"] = energy.stderr;
  write_text(dir / "result.json", j.dump(2) + "\n");
  return 0;
}

int cmd_measure(const CommonOpts& opts, const std::string& checkpoint) {
  config::RunConfig run = config::RunConfig::from_file(opts.config_path);
  if (opts.seed_given) run.vmc.seed = opts.seed;

  vmc::Checkpoint ckpt = vmc::load_checkpoint(checkpoint);
  rnn::ModelParams params = rnn::ModelParams::from_flat(ckpt.shape, ckpt.theta);

  if (opts.dry_run) {
    std::cout << run.summary();
    return 0;
  }
  apply_threads(opts);

  const fs::path dir = make_run_dir(opts.out_parent, "measure", run.vmc.seed);
  std::cout << "run_dir: " << dir.string() << "\n";

  const auto series = observables::measure_correlations(
      params, ckpt.n_sites, run.n_samples_correl, run.vmc.seed, vmc::kMeasureStreamBase);

  std::string csv = "r,chord_length,C,stderr\n";
  for (const auto& pt : series.points)
    csv += std::to_string(pt.r) + "," + fmt(pt.chord) + "," + fmt(pt.value) + "," +
           fmt(pt.stderr) + "\n";
  write_text(dir / "correlations.csv", csv);

  json j;
  j["seed"] = run.vmc.seed;
  j["n_samples"] = run.n_samples_correl;
  j["window"] =
      run.fit_window == observables::FitWindow::SiteIndices ? "sites" : "lags";
  try {
    const auto fit = observables::fit_power_law(series, run.fit_window);
    j["eta"] = fit.eta;
    j["eta_stderr"] = fit.eta_stderr;
    j["R2"] = fit.r2;
    j["excluded_points"] = fit.excluded_points;
    std::cout << "eta = " << fmt(fit.eta) << " +- " << fmt(fit.eta_stderr)
              << "  R2 = " << fmt(fit.r2) << "\n";
  } catch (const FitError& err) {
    j["fit_error"] = err.what();
    j["excluded_points"] = err.excluded_points;
    std::cout << "power-law fit failed: " << err.what() << "\n";
  }
  write_text(dir / "fit.json", j.dump(2) + "\n");
  return 0;
}

void write_series_csv(const fs::path& path, const theory::TheorySeries& series) {
  std::string csv = "index,value\n";
  for (int n = 1; n <= series.max_index(); ++n)
    csv += std::to_string(n) + "," + fmt(series.at(n)) + "\n";
  write_text(path, csv);
}

int cmd_theory(const CommonOpts& opts) {
  config::TheoryConfig cfg = config::TheoryConfig::from_file(opts.config_path);
  if (opts.dry_run) {
    std::cout << cfg.summary();
    return 0;
  }
  apply_threads(opts);

  const fs::path dir = make_run_dir(opts.out_parent, "theory", opts.seed);
  std::cout << "run_dir: " << dir.string() << "\n";

  const auto& spec = cfg.spec;
  const theory::TheorySeries k = theory::kernel(spec, cfg.n_max);
  const theory::TheorySeries capp = theory::capp_from_kernel(spec.beta(), k, cfg.n_max);
  write_series_csv(dir / "kernel.csv", k);
  write_series_csv(dir / "capp.csv", capp);

  json j;
  j["seed"] = opts.seed;
  j["mode"] = spec.mode == theory::Mode::Vanilla ? "vanilla" : "dilated";
  j["beta"] = spec.beta();
  j["weak_coupling_epsilon"] = spec.weak_coupling_bound();
  j["weak_coupling_flagged"] = spec.weak_coupling_flagged();

  j["z_star"] = nullptr;
  j["q"] = nullptr;
  j["rho"] = nullptr;
  j["alpha"] = nullptr;
  j["unit_disk_safe"] = nullptr;
  if (spec.mode == theory::Mode::Vanilla) {
    const auto report = theory::singularity_report(spec);
    j["unit_disk_safe"] = report.unit_disk_safe;
    j["boundary_max"] = report.boundary_max;
    if (report.found) {
      j["z_star"] = report.z_star;
      j["q"] = report.multiplicity;
      j["rho"] = report.rate;
    } else {
      std::cout << "no dominant positive singularity\n";
    }
  } else {
    bool nonneg = true;
    for (Eigen::Index i = 0; i < spec.couplings.size(); ++i)
      if (spec.couplings(i) < 0.0) nonneg = false;
    j["couplings_nonnegative"] = nonneg;
    bool lemma_ok = true;
    for (std::uint64_t m = 1; m <= 512; ++m)
      if (theory::lmin_bfs_oracle(m, spec.base) != theory::digit_sum(m, spec.base))
        lemma_ok = false;
    j["lemma_check_ok"] = lemma_ok;
    if (nonneg) {
      j["alpha"] = theory::power_law_exponent(spec);
      // coefficientwise bound C_n >= C_1 beta k_{n-1}
      bool coeff_bound = true;
      const double c1beta = spec.beta() * spec.beta();
      for (int n = 2; n <= cfg.n_max; ++n)
        if (capp.at(n) < c1beta * k.at(n - 1) - 1e-15) coeff_bound = false;
      j["coeff_bound_holds"] = coeff_bound;
    }
  }

  const auto cls = theory::decay_classifier(capp, cfg.tail_lo, cfg.tail_hi);
  j["classifier"] = cls.kind == theory::DecayKind::Exponential ? "EXPONENTIAL"
                    : cls.kind == theory::DecayKind::PowerLaw  ? "POWER_LAW"
                                                               : "UNDETERMINED";
  j["fit_r2_exp"] = cls.r2_exp;
  j["fit_r2_pow"] = cls.r2_pow;
  j["classifier_rate"] = cls.rate;
  j["classifier_exponent"] = cls.exponent;

  if (cfg.exact_n > 0) {
    const auto exact = theory::exact_correlator(spec, cfg.exact_n);
    write_series_csv(dir / "exact.csv", exact);
    double dev = 0.0;
    for (int n = 1; n <= cfg.exact_n; ++n)
      dev = std::max(dev, std::abs(exact.at(n) - capp.at(n)));
    j["exact_max_deviation"] = dev;
  }

  write_text(dir / "report.json", j.dump(2) + "\n");
  std::cout << "classifier: " << j["classifier"].get<std::string>() << "\n";
  return 0;
}

int cmd_exact(const CommonOpts& opts) {
  config::ConfigFile file = config::ConfigFile::parse_file(opts.config_path);
  hamiltonians::HamiltonianSpec spec;
  const std::string ham = file.get_string("hamiltonian", "tfim_pbc");
  if (ham == "tfim_pbc")
    spec.kind = hamiltonians::Kind::TfimPbc;
  else if (ham == "cluster_es")
    spec.kind = hamiltonians::Kind::ClusterEs;
  else
    throw ConfigError(opts.config_path + ": unknown hamiltonian '" + ham + "'");
  spec.n_sites = static_cast<int>(file.get_int("n_sites", 0));
  spec.field = file.get_double("g", 1.0);
  file.get_string("benchmark", "");  // tolerated so train configs can be reused
  spec.validate();

  if (opts.dry_run) {
    std::cout << "hamiltonian = " << spec.name() << "\nn_sites = " << spec.n_sites << "\n";
    if (spec.kind == hamiltonians::Kind::TfimPbc) std::cout << "g = " << fmt(spec.field) << "\n";
    return 0;
  }
  apply_threads(opts);

  const auto result = hamiltonians::exact_diag(spec);
  std::cout << "ground_energy = " << fmt(result.energy) << "\n";
  std::cout << "per_site = " << fmt(result.energy / spec.n_sites) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dilated RNN wave functions: VMC training, correlation measurement, "
               "linear-model correlation theory, exact diagonalization"};
  app.require_subcommand(1);

  CommonOpts train_opts, measure_opts, theory_opts, exact_opts;
  std::string resume, checkpoint;

  auto* train = app.add_subcommand("train", "optimize a wave function");
  add_common(train, train_opts);
  train->add_option("--resume", resume, "continue from a checkpoint file");

  auto* measure = app.add_subcommand("measure", "two-point correlations + power-law fit");
  add_common(measure, measure_opts);
  measure->add_option("--checkpoint", checkpoint, "trained model checkpoint")->required();

  auto* theory_cmd = app.add_subcommand("theory", "linearized-model correlation analysis");
  add_common(theory_cmd, theory_opts);

  auto* exact = app.add_subcommand("exact", "exact ground energy for small chains");
  add_common(exact, exact_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_opts, resume);
    if (measure->parsed()) return cmd_measure(measure_opts, checkpoint);
    if (theory_cmd->parsed()) return cmd_theory(theory_opts);
    if (exact->parsed()) return cmd_exact(exact_opts);
  } catch (const vmc::CheckpointVersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
