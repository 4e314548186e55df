#include "adalr/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adalr {

void validate(const ControllerState& s) {
  if (!(s.eta > 0)) throw std::invalid_argument("controller: eta must be positive");
  if (!(s.tol > 0)) throw std::invalid_argument("controller: tol must be positive");
  if (!(s.alpha_min > 0 && s.alpha_min < 1))
    throw std::invalid_argument("controller: alpha_min must lie in (0,1)");
  if (!(s.alpha_max > 1))
    throw std::invalid_argument("controller: alpha_max must exceed 1");
}

double relative_error(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("relative_error: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double e = std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i]));
    s += e * e;
  }
  return std::sqrt(s);
}

double absolute_error(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("absolute_error: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double e = b[i] - a[i];
    s += e * e;
  }
  return std::sqrt(s);
}

double eta_update_factor(const ControllerState& s, double err) {
  if (err < 0) throw std::invalid_argument("eta_update_factor: negative error");
  if (err == 0) return s.alpha_max;  // exact agreement grows eta at full rate
  return std::min(std::max(s.tol / err, s.alpha_min), s.alpha_max);
}

ControllerState update_eta(ControllerState s, double err) {
  s.eta *= eta_update_factor(s, err);
  s.last_err = err;
  return s;
}

const ParamVector& accept_or_discard(const ParamVector& theta_old,
                                     const ParamVector& theta_new, double err,
                                     const ControllerState& s) {
  if (s.discard_enabled && err > s.tol) return theta_old;
  return theta_new;
}

ExtrapolatedPair extrapolated_pair(const GradFn& grad, const ParamVector& theta0,
                                   double eta) {
  if (!(eta > 0)) throw std::invalid_argument("extrapolated_pair: eta must be positive");
  ParamVector g0 = grad(theta0);
  if (g0.size() != theta0.size())
    throw std::invalid_argument("extrapolated_pair: gradient dimension mismatch");

  ParamVector full = theta0;
  axpy(-eta, g0, full);

  ParamVector half = theta0;
  axpy(-0.5 * eta, g0, half);
  ParamVector g_half = grad(half);
  axpy(-0.5 * eta, g_half, half);

  return {std::move(full), std::move(half)};
}

double suggest_tol(long dim, long steps) {
  if (dim <= 0 || steps <= 0)
    throw std::invalid_argument("suggest_tol: dim and steps must be positive");
  return std::sqrt(static_cast<double>(dim) / (2.0 * static_cast<double>(steps)));
}

}  // namespace adalr
