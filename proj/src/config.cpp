#include "dnqs/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dnqs::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_string(buf.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& name) {
  ConfigFile cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty())
      throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.entries_.count(key))
      throw ConfigError(name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.entries_[key] = {value, lineno};
  }
  return cfg;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.used = true;
  return &it->second;
}

void ConfigFile::fail(const std::string& key, const Entry& e, const std::string& what) const {
  throw ConfigError(name_ + ":" + std::to_string(e.line) + ": key '" + key + "': " + what +
                    " (got '" + e.value + "')");
}

bool ConfigFile::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) {
  const Entry* e = find(key);
  return e ? e->value : fallback;
}

long long ConfigFile::get_int(const std::string& key, long long fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  try {
    size_t used = 0;
    const long long v = std::stoll(e->value, &used);
    if (used != e->value.size()) fail(key, *e, "expected an integer");
    return v;
  } catch (const std::logic_error&) {
    fail(key, *e, "expected an integer");
  }
}

double ConfigFile::get_double(const std::string& key, double fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  try {
    size_t used = 0;
    const double v = std::stod(e->value, &used);
    if (used != e->value.size()) fail(key, *e, "expected a real number");
    return v;
  } catch (const std::logic_error&) {
    fail(key, *e, "expected a real number");
  }
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  fail(key, *e, "expected true/false");
}

numerics::Vector ConfigFile::get_list(const std::string& key) {
  const Entry* e = find(key);
  if (!e) return numerics::Vector();
  std::vector<double> vals;
  std::istringstream in(e->value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) fail(key, *e, "empty list element");
    try {
      size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) fail(key, *e, "expected a comma-separated list of reals");
    } catch (const std::logic_error&) {
      fail(key, *e, "expected a comma-separated list of reals");
    }
  }
  return Eigen::Map<const numerics::Vector>(vals.data(), vals.size());
}

void ConfigFile::reject_unknown() const {
  for (const auto& [key, e] : entries_)
    if (!e.used)
      throw ConfigError(name_ + ":" + std::to_string(e.line) + ": unknown key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
  ConfigFile file = ConfigFile::parse_file(path);
  return from_config(file);
}

RunConfig RunConfig::from_config(ConfigFile& file) {
  RunConfig run;
  run.benchmark = file.get_string("benchmark", "custom");

  // benchmark presets carry the published hyperparameter table; explicit keys
  // override them below
  auto& v = run.vmc;
  if (run.benchmark == "tfim") {
    run.vmc.hamiltonian.kind = hamiltonians::Kind::TfimPbc;
    v.hamiltonian.field = 1.0;
    v.model.complex_phase = false;
    v.model.hidden = 32;
    v.n_samples = 100;
    v.n_samples_eval = 100000;
    v.learning_rate = 1e-4;
    v.n_iterations = 100000;
    run.n_samples_correl = 100000;
  } else if (run.benchmark == "cluster") {
    v.hamiltonian.kind = hamiltonians::Kind::ClusterEs;
    v.model.complex_phase = true;
    v.model.hidden = 256;
    v.n_samples = 100;
    v.n_samples_eval = 50000;
    v.learning_rate = 1e-3;
    v.n_iterations = 100000;
  } else if (run.benchmark != "custom") {
    throw ConfigError(file.name() + ": unknown benchmark '" + run.benchmark +
                      "' (expected tfim, cluster or custom)");
  }

  const std::string ham = file.get_string("hamiltonian", v.hamiltonian.name());
  if (ham == "tfim_pbc")
    v.hamiltonian.kind = hamiltonians::Kind::TfimPbc;
  else if (ham == "cluster_es")
    v.hamiltonian.kind = hamiltonians::Kind::ClusterEs;
  else
    throw ConfigError(file.name() + ": unknown hamiltonian '" + ham + "'");

  v.hamiltonian.n_sites = static_cast<int>(file.get_int("n_sites", v.hamiltonian.n_sites));
  v.hamiltonian.field = file.get_double("g", v.hamiltonian.field);
  v.model.hidden = static_cast<int>(file.get_int("hidden", v.model.hidden));
  v.model.n_layers = static_cast<int>(file.get_int(
      "n_layers", rnn::ModelShape::max_layers(std::max(2, v.hamiltonian.n_sites))));
  v.model.complex_phase = file.get_bool("complex", v.model.complex_phase);
  v.n_samples = static_cast<int>(file.get_int("n_samples", v.n_samples));
  v.n_samples_eval = static_cast<int>(file.get_int("n_samples_eval", v.n_samples_eval));
  v.learning_rate = file.get_double("learning_rate", v.learning_rate);
  v.n_iterations = static_cast<int>(file.get_int("n_iterations", v.n_iterations));
  v.seed = static_cast<std::uint64_t>(file.get_int("seed", 1));
  v.checkpoint_interval =
      static_cast<int>(file.get_int("checkpoint_interval", v.checkpoint_interval));
  run.n_samples_correl =
      static_cast<int>(file.get_int("n_samples_correl", run.n_samples_correl));

  const std::string window = file.get_string("fit_window", "sites");
  if (window == "sites")
    run.fit_window = observables::FitWindow::SiteIndices;
  else if (window == "lags")
    run.fit_window = observables::FitWindow::Lags;
  else
    throw ConfigError(file.name() + ": fit_window must be 'sites' or 'lags'");

  file.reject_unknown();
  if (v.hamiltonian.n_sites <= 0)
    throw ConfigError(file.name() + ": n_sites is required");
  v.validate();
  return run;
}

std::string RunConfig::summary() const {
  std::ostringstream out;
  out << "benchmark = " << benchmark << "\n"
      << "hamiltonian = " << vmc.hamiltonian.name() << "\n"
      << "n_sites = " << vmc.hamiltonian.n_sites << "\n";
  if (vmc.hamiltonian.kind == hamiltonians::Kind::TfimPbc)
    out << "g = " << fmt_double(vmc.hamiltonian.field) << "\n";
  out << "n_layers = " << vmc.model.n_layers << "\n"
      << "hidden = " << vmc.model.hidden << "\n"
      << "complex = " << (vmc.model.complex_phase ? "true" : "false") << "\n"
      << "n_samples = " << vmc.n_samples << "\n"
      << "n_samples_eval = " << vmc.n_samples_eval << "\n"
      << "n_samples_correl = " << n_samples_correl << "\n"
      << "learning_rate = " << fmt_double(vmc.learning_rate) << "\n"
      << "n_iterations = " << vmc.n_iterations << "\n"
      << "seed = " << vmc.seed << "\n"
      << "checkpoint_interval = " << vmc.checkpoint_interval << "\n"
      << "fit_window = "
      << (fit_window == observables::FitWindow::SiteIndices ? "sites" : "lags") << "\n";
  return out.str();
}

TheoryConfig TheoryConfig::from_file(const std::string& path) {
  ConfigFile file = ConfigFile::parse_file(path);
  return from_config(file);
}

TheoryConfig TheoryConfig::from_config(ConfigFile& file) {
  TheoryConfig cfg;
  const std::string mode = file.get_string("mode", "vanilla");
  if (mode == "vanilla")
    cfg.spec.mode = theory::Mode::Vanilla;
  else if (mode == "dilated")
    cfg.spec.mode = theory::Mode::Dilated;
  else
    throw ConfigError(file.name() + ": mode must be 'vanilla' or 'dilated'");

  cfg.spec.lambdas = file.get_list("lambda");
  cfg.spec.couplings = file.get_list("coupling");
  cfg.spec.output_bias = file.get_double("bias", 0.0);
  cfg.spec.base = static_cast<int>(file.get_int("base", 2));
  cfg.n_max = static_cast<int>(file.get_int("n_max", cfg.n_max));
  cfg.spec.depth = static_cast<int>(file.get_int(
      "depth", cfg.spec.mode == theory::Mode::Dilated
                   ? rnn::ModelShape::max_layers(cfg.n_max, cfg.spec.base)
                   : 1));
  cfg.exact_n = static_cast<int>(file.get_int("exact_n", 0));
  cfg.tail_lo = static_cast<int>(file.get_int("tail_lo", std::max(64, cfg.n_max / 8)));
  cfg.tail_hi = static_cast<int>(file.get_int("tail_hi", cfg.n_max));

  file.reject_unknown();
  if (cfg.spec.lambdas.size() == 0)
    throw ConfigError(file.name() + ": 'lambda' is required");
  if (cfg.n_max < 2) throw ConfigError(file.name() + ": n_max must be >= 2");
  cfg.spec.validate();
  return cfg;
}

std::string TheoryConfig::summary() const {
  std::ostringstream out;
  out << "mode = " << (spec.mode == theory::Mode::Vanilla ? "vanilla" : "dilated") << "\n";
  out << "lambda = ";
  for (Eigen::Index j = 0; j < spec.lambdas.size(); ++j)
    out << (j ? "," : "") << fmt_double(spec.lambdas(j));
  out << "\ncoupling = ";
  for (Eigen::Index j = 0; j < spec.couplings.size(); ++j)
    out << (j ? "," : "") << fmt_double(spec.couplings(j));
  out << "\nbias = " << fmt_double(spec.output_bias) << "\n"
      << "base = " << spec.base << "\n"
      << "depth = " << spec.depth << "\n"
      << "n_max = " << n_max << "\n"
      << "exact_n = " << exact_n << "\n"
      << "tail_lo = " << tail_lo << "\n"
      << "tail_hi = " << tail_hi << "\n";
  return out.str();
}

}  // namespace dnqs::config
