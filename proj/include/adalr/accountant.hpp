#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace adalr {

// Log moments of the subsampled Gaussian mechanism with sampling ratio q and
// noise multiplier sigma: the lambda-th privacy-loss moment between
// mu0 = N(0, sigma^2) and the mixture mu = (1-q) mu0 + q N(1, sigma^2),
// taken in both orderings. Evaluated by composite 16-point Gauss-Legendre
// quadrature in log space on [-R, R], R = lambda + 2 + 9.5 sigma (truncated
// tail mass below 1e-15), panel width sigma/2; the quadrature error sits well
// under 1e-12 on this family of integrands.
//
// first  = log E_{z~mu0} [(mu0/mu)^lambda]
// second = log E_{z~mu}  [(mu/mu0)^lambda]
std::pair<double, double> log_moment_orderings(double q, double sigma, int lambda);

// max of the two orderings, clamped at 0 (the moments are >= 1 by Jensen).
// Throws std::invalid_argument for lambda <= 0, q outside [0,1] or
// sigma <= 0 when q > 0; sigma in (0,1) is accepted with a one-time warning
// since the composition theorem assumes sigma >= 1.
double log_moment_subsampled_gaussian(double q, double sigma, int lambda);

// epsilon = min over the grid of (alpha + log(1/delta)) / lambda.
// argmin_lambda, when given, receives the minimizing grid entry.
double epsilon_for_delta(const std::vector<int>& grid,
                         const std::vector<double>& alpha, double delta,
                         int* argmin_lambda = nullptr);

// min(1, min over the grid of exp(alpha - lambda * epsilon)).
double delta_for_epsilon(const std::vector<int>& grid,
                         const std::vector<double>& alpha, double epsilon);

// Accumulated log moments on a fixed integer lambda grid (1..lambda_max).
//
// The ledger keys one invocation counter per distinct (q, sigma) pair and
// multiplies counts into the per-step moments on read. Composition is
// therefore exactly linear: k accumulations of one step, one accumulation of
// k steps, and T two-invocation steps against 2T single-invocation steps all
// produce bitwise-identical totals.
class MomentLedger {
 public:
  explicit MomentLedger(int lambda_max = 64);

  // steps * per_step_invocations uses of the mechanism at (q, sigma).
  // A two-batch adaptive step prices per_step_invocations = 2, plain
  // DP-SGD prices 1.
  void accumulate(double q, double sigma, long steps, int per_step_invocations);

  const std::vector<int>& lambda_grid() const { return grid_; }
  std::vector<double> alpha_total() const;
  long long invocation_count() const;

  double epsilon_for_delta(double delta) const;
  double delta_for_epsilon(double epsilon) const;
  int minimizing_lambda_for_delta(double delta) const;
  // True when the minimizing lambda sits on the grid edge; the reported
  // epsilon is then only an upper bound and a larger grid would tighten it.
  bool saturated_for_delta(double delta) const;

 private:
  const std::vector<double>& moments_for(double q, double sigma) const;

  std::vector<int> grid_;
  std::map<std::pair<double, double>, long long> counts_;
  mutable std::map<std::pair<double, double>, std::vector<double>> cache_;
};

}  // namespace adalr
