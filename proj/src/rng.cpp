#include "letf/rng.hpp"

#include <atomic>

namespace letf {

namespace {
std::atomic<unsigned> g_threads{0};
}

namespace {
// splitmix64 finalizer, used only to spread (seed, stream, index) into a seed.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

Rng substream(std::uint64_t seed, Stream stream, std::uint64_t index) {
  const auto tag = static_cast<std::uint64_t>(stream);
  return Rng(mix(mix(mix(seed) ^ tag) ^ index));
}

void set_thread_count(unsigned n) { g_threads.store(n); }

unsigned thread_count() {
  unsigned n = g_threads.load();
  if (n == 0) {
    n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
  }
  return n;
}

}  // namespace letf
