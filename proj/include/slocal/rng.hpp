#pragma once
// rng.hpp -- deterministic random streams keyed by (master seed, run, phase).
//
// Every run of a batch draws from generators seeded by a splitmix64-style
// hash of the tuple (master_seed, run_id, phase). Streams are therefore
// independent of execution order, so multithreaded batches reproduce the
// single-threaded results bit for bit.

#include <cstdint>
#include <random>

#include "slocal/common.hpp"

namespace slocal {

/// Phase labels separating the noise sources inside one run.
enum class rng_phase : std::uint64_t {
  observation = 1,  // Y^0 draw, outer-init updates, SDE innovations
  chain = 2,        // posterior MALA chain (proposals and accept tests)
  algorithm = 3,    // algorithm-level extras (resampling, anneal chains)
  metrics = 4,      // random projections and other evaluation draws
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t run_id,
                                 rng_phase phase) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (0x9e3779b97f4a7c15ULL + run_id));
  h = splitmix64(h ^ static_cast<std::uint64_t>(phase));
  return h;
}

/// Thin wrapper over mt19937_64 with the draw helpers used across modules.
class rng_stream {
 public:
  explicit rng_stream(std::uint64_t seed) : gen_(seed) {}
  rng_stream(std::uint64_t master, std::uint64_t run_id, rng_phase phase)
      : gen_(derive_seed(master, run_id, phase)) {}

  double normal() { return normal_(gen_); }
  double uniform() { return unif_(gen_); }

  vec normal_vec(std::size_t d) {
    vec z(d);
    for (auto& v : z) v = normal_(gen_);
    return z;
  }

  std::mt19937_64& generator() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace slocal
