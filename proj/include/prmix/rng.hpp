#pragma once

#include <cstdint>

namespace prmix {

// Seeded random stream: xoshiro256++ core, state derived from (seed, stream_id)
// via SplitMix64. Distinct stream ids give statistically independent sequences;
// the exact bit stream is fixed by this implementation and is platform-stable,
// so seeded runs reproduce byte-identically everywhere.
//
// Distribution recipes are hand-rolled on top of the raw stream (Box-Muller
// normals, Marsaglia-Tsang gammas) so that draws do not depend on any
// implementation-defined standard-library algorithm.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  // Uniform on the open interval (0, 1); never returns an exact endpoint.
  double uniform_open();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal();

  // Gamma(shape, rate) via Marsaglia-Tsang, with the power boost for shape < 1.
  double gamma(double shape, double rate = 1.0);

  double beta(double a, double b);
  double chi_squared(double df);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
  std::uint64_t stream_id_;
};

// Deterministic sub-seed for a consumer identified by (a, b); used to hand
// independent streams to replicates, ladder cells, and nested runs without
// coordinating stream ids globally.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace prmix
