#pragma once

#include <functional>
#include <optional>

#include "adalr/vec.hpp"

namespace adalr {

// Multiplicative step-size controller. A step of size eta is compared against
// two steps of size eta/2; the mismatch between the two endpoints estimates
// the local error and eta is rescaled toward the target level tol, with the
// per-step factor clamped to [alpha_min, alpha_max].
struct ControllerState {
  double eta = 0.1;
  double tol = 1.0;
  double alpha_min = 0.9;
  double alpha_max = 1.1;
  std::optional<double> last_err;
  bool discard_enabled = false;  // reject iterates whose error exceeds tol
};

// Throws std::invalid_argument unless eta > 0, tol > 0 and
// 0 < alpha_min < 1 < alpha_max.
void validate(const ControllerState& s);

// || |a_i - b_i| / max(1, |a_i|) ||_2. Mixed relative/absolute error; not
// symmetric in its arguments once some |a_i| exceeds 1.
double relative_error(const ParamVector& a, const ParamVector& b);

// Plain ||b - a||_2.
double absolute_error(const ParamVector& a, const ParamVector& b);

// clamp(tol / err, alpha_min, alpha_max); err == 0 maps to alpha_max.
double eta_update_factor(const ControllerState& s, double err);

// State with eta scaled by the clamped factor and last_err recorded. Applied
// on every step, discarded or not.
ControllerState update_eta(ControllerState s, double err);

// theta_old when the discard rule is on and err > tol, otherwise theta_new.
const ParamVector& accept_or_discard(const ParamVector& theta_old,
                                     const ParamVector& theta_new, double err,
                                     const ControllerState& s);

struct ExtrapolatedPair {
  ParamVector full_step;       // theta0 - eta * grad(theta0)
  ParamVector two_half_steps;  // endpoint of two successive eta/2 steps
};

using GradFn = std::function<ParamVector(const ParamVector&)>;

// Evaluates grad twice: at theta0 and at the eta/2 midpoint.
ExtrapolatedPair extrapolated_pair(const GradFn& grad, const ParamVector& theta0,
                                   double eta);

// Tolerance that keeps the per-coordinate noise accumulated over `steps`
// steps at unit scale: sqrt(dim / (2 * steps)). The published experiments
// round this to 1.0 in the private setting.
double suggest_tol(long dim, long steps);

}  // namespace adalr
