#include "adalr/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <stdexcept>

namespace adalr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// 16-point Gauss-Legendre nodes/weights on [-1, 1], built once by Newton
// iteration on the Legendre recurrence.
struct GaussRule {
  std::vector<double> x, w;
};

const GaussRule& gl16() {
  static const GaussRule rule = [] {
    constexpr int n = 16;
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
      double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        pp = n * (z * p0 - p1) / (z * z - 1.0);
        double z_old = z;
        z = z_old - p0 / pp;
        if (std::abs(z - z_old) < 1e-15) break;
      }
      r.x[static_cast<size_t>(i)] = -z;
      r.x[static_cast<size_t>(n - 1 - i)] = z;
      r.w[static_cast<size_t>(i)] = 2.0 / ((1.0 - z * z) * pp * pp);
      r.w[static_cast<size_t>(n - 1 - i)] = r.w[static_cast<size_t>(i)];
    }
    return r;
  }();
  return rule;
}

void warn_small_sigma() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    std::cerr << "accountant: sigma < 1 is outside the regime covered by the "
                 "composition bound; the reported moments are computed anyway\n";
  });
}

struct LogIntegrands {
  // log of the two privacy-loss moment integrands at z.
  double g_mu0_side;  // log mu0(z) - lambda log r(z)
  double g_mu_side;   // log mu(z)  + lambda log r(z)
};

LogIntegrands eval_log_integrands(double z, double q, double sigma, int lambda) {
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double log_norm = -std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
  const double log_1mq = q < 1.0 ? std::log1p(-q) : kNegInf;
  const double log_q = q > 0.0 ? std::log(q) : kNegInf;

  double log_mu0 = log_norm - z * z * inv2s2;
  double log_mu1 = log_norm - (z - 1.0) * (z - 1.0) * inv2s2;
  // r(z) = mu(z) / mu0(z) = (1-q) + q exp((2z-1)/(2 sigma^2))
  double log_r = log_add_exp(log_1mq, log_q + (2.0 * z - 1.0) * inv2s2);
  double log_mu = log_add_exp(log_1mq + log_mu0, log_q + log_mu1);

  return {log_mu0 - lambda * log_r, log_mu + lambda * log_r};
}

}  // namespace

std::pair<double, double> log_moment_orderings(double q, double sigma, int lambda) {
  if (lambda <= 0) throw std::invalid_argument("log_moment: lambda must be positive");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("log_moment: q outside [0,1]");
  if (q == 0.0) return {0.0, 0.0};
  if (sigma <= 0.0) throw std::invalid_argument("log_moment: sigma must be positive");
  if (sigma < 1.0) warn_small_sigma();

  // Both integrands are mixtures of Gaussians of width sigma whose outermost
  // component is centered at |z| <= lambda + 1; 9.5 sigma of margin leaves
  // under 1e-15 of relative tail mass outside the window.
  const double radius = static_cast<double>(lambda) + 2.0 + 9.5 * sigma;
  const double panel = 0.5 * sigma;
  const long n_panels = std::max(4L, static_cast<long>(std::ceil(2.0 * radius / panel)));
  const GaussRule& rule = gl16();

  // Weighted log-sum-exp accumulated in two passes: max first, then the sum,
  // so arbitrarily large moments never overflow.
  double max1 = kNegInf, max2 = kNegInf;
  const double width = 2.0 * radius / static_cast<double>(n_panels);
  auto node_at = [&](long p, size_t k) {
    double a = -radius + static_cast<double>(p) * width;
    return a + 0.5 * width * (rule.x[k] + 1.0);
  };
  for (long p = 0; p < n_panels; ++p) {
    for (size_t k = 0; k < rule.x.size(); ++k) {
      auto g = eval_log_integrands(node_at(p, k), q, sigma, lambda);
      max1 = std::max(max1, g.g_mu0_side);
      max2 = std::max(max2, g.g_mu_side);
    }
  }
  double sum1 = 0.0, sum2 = 0.0;
  for (long p = 0; p < n_panels; ++p) {
    for (size_t k = 0; k < rule.x.size(); ++k) {
      double lw = std::log(0.5 * width * rule.w[k]);
      auto g = eval_log_integrands(node_at(p, k), q, sigma, lambda);
      sum1 += std::exp(lw + g.g_mu0_side - max1);
      sum2 += std::exp(lw + g.g_mu_side - max2);
    }
  }
  return {max1 + std::log(sum1), max2 + std::log(sum2)};
}

double log_moment_subsampled_gaussian(double q, double sigma, int lambda) {
  auto [first, second] = log_moment_orderings(q, sigma, lambda);
  return std::max(0.0, std::max(first, second));
}

double epsilon_for_delta(const std::vector<int>& grid,
                         const std::vector<double>& alpha, double delta,
                         int* argmin_lambda) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("epsilon_for_delta: delta outside (0,1)");
  if (grid.empty() || grid.size() != alpha.size())
    throw std::invalid_argument("epsilon_for_delta: bad grid");
  const double log_inv_delta = std::log(1.0 / delta);
  double best = std::numeric_limits<double>::infinity();
  int best_lambda = grid.front();
  for (size_t i = 0; i < grid.size(); ++i) {
    double eps = (alpha[i] + log_inv_delta) / static_cast<double>(grid[i]);
    if (eps < best) {
      best = eps;
      best_lambda = grid[i];
    }
  }
  if (argmin_lambda) *argmin_lambda = best_lambda;
  return best;
}

double delta_for_epsilon(const std::vector<int>& grid,
                         const std::vector<double>& alpha, double epsilon) {
  if (grid.empty() || grid.size() != alpha.size())
    throw std::invalid_argument("delta_for_epsilon: bad grid");
  double best_exponent = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < grid.size(); ++i)
    best_exponent = std::min(best_exponent, alpha[i] - grid[i] * epsilon);
  return std::min(1.0, std::exp(best_exponent));
}

MomentLedger::MomentLedger(int lambda_max) {
  if (lambda_max < 1) throw std::invalid_argument("MomentLedger: lambda_max < 1");
  grid_.resize(static_cast<size_t>(lambda_max));
  for (int i = 0; i < lambda_max; ++i) grid_[static_cast<size_t>(i)] = i + 1;
}

void MomentLedger::accumulate(double q, double sigma, long steps,
                              int per_step_invocations) {
  if (steps < 0) throw std::invalid_argument("accumulate: negative step count");
  if (per_step_invocations < 0)
    throw std::invalid_argument("accumulate: negative invocation count");
  if (steps == 0 || per_step_invocations == 0) return;
  // Validate the pair eagerly so a bad (q, sigma) fails here, not on read.
  (void)moments_for(q, sigma);
  counts_[{q, sigma}] += static_cast<long long>(steps) * per_step_invocations;
}

const std::vector<double>& MomentLedger::moments_for(double q, double sigma) const {
  auto it = cache_.find({q, sigma});
  if (it != cache_.end()) return it->second;
  std::vector<double> row(grid_.size());
  for (size_t i = 0; i < grid_.size(); ++i)
    row[i] = log_moment_subsampled_gaussian(q, sigma, grid_[i]);
  return cache_.emplace(std::make_pair(q, sigma), std::move(row)).first->second;
}

std::vector<double> MomentLedger::alpha_total() const {
  std::vector<double> total(grid_.size(), 0.0);
  for (const auto& [key, count] : counts_) {
    const auto& row = moments_for(key.first, key.second);
    for (size_t i = 0; i < total.size(); ++i)
      total[i] += static_cast<double>(count) * row[i];
  }
  return total;
}

long long MomentLedger::invocation_count() const {
  long long n = 0;
  for (const auto& [key, count] : counts_) n += count;
  return n;
}

double MomentLedger::epsilon_for_delta(double delta) const {
  return adalr::epsilon_for_delta(grid_, alpha_total(), delta);
}

double MomentLedger::delta_for_epsilon(double epsilon) const {
  return adalr::delta_for_epsilon(grid_, alpha_total(), epsilon);
}

int MomentLedger::minimizing_lambda_for_delta(double delta) const {
  int argmin = 0;
  adalr::epsilon_for_delta(grid_, alpha_total(), delta, &argmin);
  return argmin;
}

bool MomentLedger::saturated_for_delta(double delta) const {
  return minimizing_lambda_for_delta(delta) == grid_.back();
}

}  // namespace adalr
