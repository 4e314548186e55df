#include "adalr/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace adalr {

namespace {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t mix_seed(uint64_t seed, uint64_t stream_id) {
  uint64_t s = seed;
  uint64_t a = splitmix64(s);
  s = a ^ (stream_id * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL);
  uint64_t b = splitmix64(s);
  return b;
}

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(mix_seed(seed, stream_id)) {}

RngStream RngStream::derive(uint64_t substream_id) const {
  return RngStream(seed_, stream_id_ ^ (0x9E3779B97F4A7C15ULL + substream_id * 0xBF58476D1CE4E5B9ULL));
}

uint64_t RngStream::raw() {
  ++draws_;
  return engine_();
}

double RngStream::next_uniform() {
  // 53 significant bits, shifted off the integers so 0 and 1 are unreachable.
  return (static_cast<double>(raw() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::next_gaussian() { return inv_norm_cdf(next_uniform()); }

uint64_t RngStream::next_below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("next_below: n must be positive");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = raw();
  } while (x >= limit);
  return x % n;
}

ParamVector gaussian_vector(size_t dim, double std, RngStream& rng) {
  if (std < 0) throw std::invalid_argument("gaussian_vector: std must be nonnegative");
  if (std == 0) return ParamVector(dim, 0.0);
  ParamVector v(dim);
  for (size_t i = 0; i < dim; ++i) v[i] = std * rng.next_gaussian();
  return v;
}

double inv_norm_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inv_norm_cdf: p outside (0,1)");

  // Acklam's rational approximation, |relative error| < 1.15e-9.
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  double x;
  if (p < p_low) {
    double t = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  } else if (p <= 1.0 - p_low) {
    double t = p - 0.5;
    double r = t * t;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * t /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double t = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  }

  // Two Halley refinements push the result to full double precision.
  static const double sqrt_2pi = 2.5066282746310005024;
  for (int iter = 0; iter < 2; ++iter) {
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * sqrt_2pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace adalr
