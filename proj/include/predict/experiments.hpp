#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "predict/lattice.hpp"

namespace predict::experiments {

// Linear-chain study: kernels at N evenly spaced centers, width given as a
// fraction of the center spacing.
struct LinearSettings {
  double m0 = 1.0;
  int N = 5;
  double sigma_frac = 1.0; // kernel width / center spacing
  int K = 512;             // minimum Fourier truncation; raised automatically
  double t_end = 6.0;
  double dt = 1e-3;
  int record_every = 25;
  int n_eval = 256; // evaluation grid for interpolants
};

struct LatticeSettings {
  int n = 16;
  int N = 2;
  double sigma = 0.25;
};

struct Config {
  std::string experiment;
  std::string output_dir = ".";
  std::uint64_t seed = 14;
  long long state_burn_in = 20000; // sweeps used to draw the published initial values
  LinearSettings linear;
  LatticeSettings lattice;
  lattice::ChainParams chain;
  lattice::EnsembleParams ensemble;
};

const std::vector<std::string>& experiment_names();

// Strict parser: unknown keys, wrong types and non-positive parameters are
// config errors. An empty JSON object yields the defaults above.
Config config_from_json(const std::string& text);
std::string config_to_json(const Config& config);
void validate(const Config& config);

// Runs one experiment, writing CSV outputs plus manifest.json into
// config.output_dir (created if missing).
void run_experiment(const Config& config);

} // namespace predict::experiments
