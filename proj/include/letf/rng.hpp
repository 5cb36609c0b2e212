#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace letf {

using Rng = std::mt19937_64;

// Stream tags keep independent consumers of one seed apart.
enum class Stream : std::uint64_t {
  index_paths = 1,
  payoff_scatter = 2,
  bootstrap = 3,
  nn_init = 4,
  nn_batch = 5,
  synthetic = 6,
  moment_check = 7,
  fuzz = 8,
};

// Generator for item `index` of `stream`; depends only on its arguments.
Rng substream(std::uint64_t seed, Stream stream, std::uint64_t index);

void set_thread_count(unsigned n);
unsigned thread_count();

// Calls fn(i) for i in [0, n) using contiguous chunks per worker.
// fn must only write to per-index state.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(thread_count(), n == 0 ? 1 : n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace letf
