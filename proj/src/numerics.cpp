#include "predict/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "predict/errors.hpp"

namespace predict {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t x = splitmix64(master ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  return splitmix64(x ^ (0xBF58476D1CE4E5B9ULL * (index + 1)));
}

unsigned env_thread_request() {
  const char* s = std::getenv("PREDICT_THREADS");
  if (!s || !*s) return 0;
  char* end = nullptr;
  long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || v < 0) return 0;
  return static_cast<unsigned>(v);
}

unsigned thread_budget(unsigned requested) {
  unsigned n = requested;
  if (n == 0) n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  return n;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  unsigned n = std::min<std::size_t>(thread_budget(threads), count);
  if (n <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t) {
    // static contiguous chunks; slot i belongs to exactly one worker
    std::size_t lo = count * t / n;
    std::size_t hi = count * (t + 1) / n;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

BatchStats batch_means(const std::vector<double>& series, int batches) {
  BatchStats out;
  const std::size_t len = series.size();
  require(len >= 4, ErrorCode::invalid_input, "batch_means: series too short");
  int b = std::max(2, std::min<int>(batches, static_cast<int>(len / 2)));
  std::size_t size = len / b; // drop the tail remainder
  std::vector<double> means(b, 0.0);
  for (int i = 0; i < b; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < size; ++j) acc += series[i * size + j];
    means[i] = acc / static_cast<double>(size);
  }
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= b;
  double var = 0.0;
  for (double m : means) var += (m - grand) * (m - grand);
  var /= (b - 1);
  out.mean = grand;
  out.se = std::sqrt(var / b);
  out.batches = b;
  return out;
}

} // namespace predict
