#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace predict {

// Single source of truth for the numerical tolerances used by the conditioning
// machinery. Values are the project defaults; callers may override per object.
struct NumericalPolicy {
  double spd_slack = 1e-10;                  // eigenvalue slack, scaled by the largest diagonal entry
  double condition_limit = 1e12;             // constraint covariances beyond this are rejected
  double constraint_reproduction_tol = 1e-10;
  double rank_tol = 1e-10;                   // relative rank tolerance for constraint rows
};

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic sub-seed derivation: every random stream gets its own seed from
// (master, stream tag, index), so thread count never affects results.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index = 0);

// Stream tags used across the project (recorded in experiment manifests).
namespace seed_stream {
inline constexpr std::uint64_t linear_values = 1;    // V for the linear experiments
inline constexpr std::uint64_t covariance_chain = 2; // lattice covariance chain replicas
inline constexpr std::uint64_t canonical_state = 3;  // canonical state used to build V
inline constexpr std::uint64_t ensemble_chain = 4;   // constrained ensemble seeding replicas
inline constexpr std::uint64_t probe_points = 5;     // probe points for coefficient fitting
} // namespace seed_stream

// PREDICT_THREADS (0 or unset = auto). Invalid values fall back to auto.
unsigned env_thread_request();
unsigned thread_budget(unsigned requested);

// Static-chunked parallel loop. Work item i is independent and writes only its
// own slot, so the schedule cannot change results. Exceptions are rethrown.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

struct BatchStats {
  double mean = 0.0;
  double se = 0.0; // standard error of the mean from batch means
  int batches = 0;
};

// Batch-means error estimate for a (possibly autocorrelated) series.
BatchStats batch_means(const std::vector<double>& series, int batches = 100);

} // namespace predict
