#pragma once

#include <map>
#include <string>

#include "dnqs/observables.hpp"
#include "dnqs/theory.hpp"
#include "dnqs/vmc.hpp"

namespace dnqs::config {

// Flat key = value file: one assignment per line, '#' comments, optional
// double quotes around strings. Keys mirror the run hyperparameter names.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text, const std::string& name);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback);
  long long get_int(const std::string& key, long long fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  // comma-separated list of reals
  numerics::Vector get_list(const std::string& key);

  // rejects keys that were never read (typo protection), citing their lines
  void reject_unknown() const;

  const std::string& name() const { return name_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  std::string name_;
  std::map<std::string, Entry> entries_;

  const Entry* find(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const Entry& e, const std::string& what) const;
};

// A fully resolved training/measurement run: benchmark preset defaults with
// per-key overrides applied on top.
struct RunConfig {
  std::string benchmark;  // "tfim" | "cluster" | "custom"
  vmc::VmcConfig vmc;
  observables::FitWindow fit_window = observables::FitWindow::SiteIndices;
  int n_samples_correl = 100000;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_config(ConfigFile& file);
  // deterministic key=value echo of every resolved setting
  std::string summary() const;
};

struct TheoryConfig {
  theory::LinearModelSpec spec;
  int n_max = 2048;
  int exact_n = 0;  // 0: skip the enumeration oracle
  int tail_lo = 256;
  int tail_hi = 2048;

  static TheoryConfig from_file(const std::string& path);
  static TheoryConfig from_config(ConfigFile& file);
  std::string summary() const;
};

}  // namespace dnqs::config
