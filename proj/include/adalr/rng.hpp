#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "adalr/vec.hpp"

namespace adalr {

// Seeded random stream, generator version 1:
//   engine    std::mt19937_64 (sequence fixed by the C++ standard), seeded
//             from a splitmix64 hash of (seed, stream_id)
//   uniforms  top 53 engine bits mapped to the open interval (0,1) as
//             (bits + 0.5) * 2^-53
//   gaussians inverse normal CDF: Acklam's rational approximation refined by
//             two Halley steps against std::erfc
// Equal (seed, stream_id) give equal sequences; the engine and uniform stages
// are bit-exact on every platform, the gaussian stage additionally depends on
// the platform's log/exp/erfc rounding.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(uint64_t seed, uint64_t stream_id);

  // Independent stream under the same seed. Samplers, noise sources and
  // clients each get their own substream so their sequences never couple.
  RngStream derive(uint64_t substream_id) const;

  double next_uniform();            // open (0,1)
  double next_gaussian();           // standard normal, one engine draw each
  uint64_t next_below(uint64_t n);  // uniform in [0,n), rejection sampled

  uint64_t draws() const { return draws_; }  // engine outputs consumed
  uint64_t seed() const { return seed_; }
  uint64_t stream_id() const { return stream_id_; }

 private:
  uint64_t raw();

  uint64_t seed_;
  uint64_t stream_id_;
  uint64_t draws_ = 0;
  std::mt19937_64 engine_;
};

// i.i.d. N(0, std^2) entries; std == 0 returns zeros without consuming draws.
ParamVector gaussian_vector(size_t dim, double std, RngStream& rng);

// Inverse standard normal CDF on (0,1).
double inv_norm_cdf(double p);

// In-place Fisher-Yates shuffle driven by the stream.
template <typename T>
void shuffle(std::vector<T>& v, RngStream& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace adalr
