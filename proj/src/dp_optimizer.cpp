#include "adalr/dp_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

namespace adalr {

namespace {

constexpr int kBatchChunks = 4;
constexpr size_t kParallelThreshold = 16;

// Clipped gradient sum over batch[lo..hi); per-example gradients are formed
// in `scratch`, clipped, then folded into `acc`.
void clipped_sum_range(const ModelSpec& spec, const ParamVector& theta,
                       const Dataset& ds, Batch batch, double clip_norm,
                       size_t lo, size_t hi, ParamVector& acc, ParamVector& scratch) {
  for (size_t k = lo; k < hi; ++k) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    example_loss_grad(spec, theta, ds, batch[k], scratch);
    double norm = l2_norm(scratch);
    double factor = norm > clip_norm ? clip_norm / norm : 1.0;
    axpy(factor, scratch, acc);
  }
}

}  // namespace

PrivacySpec PrivacySpec::make(int batch_size, int64_t dataset_size, double sigma,
                              double clip_norm) {
  PrivacySpec p;
  p.batch_size = batch_size;
  p.dataset_size = dataset_size;
  p.sigma = sigma;
  p.clip_norm = clip_norm;
  p.q = dataset_size > 0
            ? static_cast<double>(batch_size) / static_cast<double>(dataset_size)
            : 0.0;
  validate(p);
  return p;
}

PrivacySpec PrivacySpec::non_private() {
  PrivacySpec p;
  p.sigma = 0.0;
  p.clip_norm = std::numeric_limits<double>::infinity();
  return p;
}

void validate(const PrivacySpec& p) {
  if (p.sigma < 0) throw std::invalid_argument("privacy: sigma must be nonnegative");
  if (!(p.clip_norm > 0)) throw std::invalid_argument("privacy: clip norm must be positive");
  if (p.sigma > 0 && std::isinf(p.clip_norm))
    throw std::invalid_argument("privacy: noisy runs need a finite clip norm");
  if (p.dataset_size > 0) {
    if (p.batch_size <= 0 || p.batch_size > p.dataset_size)
      throw std::invalid_argument("privacy: batch size outside [1, N]");
    double q = static_cast<double>(p.batch_size) / static_cast<double>(p.dataset_size);
    if (q != p.q) throw std::invalid_argument("privacy: q must equal batch_size / N");
  }
}

OptimizerState make_optimizer(ParamVector theta, ControllerState ctrl, OptMode mode,
                              Carry carry) {
  validate(ctrl);
  OptimizerState s;
  s.theta = std::move(theta);
  s.ctrl = ctrl;
  s.mode = mode;
  s.carry = carry;
  if (mode == OptMode::adam) {
    s.adam_m.assign(s.theta.size(), 0.0);
    s.adam_v.assign(s.theta.size(), 0.0);
  }
  return s;
}

ParamVector clip(ParamVector g, double c) {
  if (!(c > 0)) throw std::invalid_argument("clip: bound must be positive");
  double norm = l2_norm(g);
  if (norm > c) scale(g, c / norm);
  return g;
}

ParamVector noisy_gradient(const ModelSpec& spec, const ParamVector& theta,
                           const Dataset& ds, Batch batch, const PrivacySpec& priv,
                           RngStream& noise_rng) {
  validate(priv);
  ParamVector sum(theta.size(), 0.0);

  if (batch.size() < kParallelThreshold) {
    ParamVector scratch(theta.size(), 0.0);
    clipped_sum_range(spec, theta, ds, batch, priv.clip_norm, 0, batch.size(), sum,
                      scratch);
  } else {
    std::vector<std::future<ParamVector>> parts;
    for (int c = 0; c < kBatchChunks; ++c) {
      size_t lo = batch.size() * c / kBatchChunks;
      size_t hi = batch.size() * (c + 1) / kBatchChunks;
      parts.push_back(std::async(std::launch::async, [&, lo, hi]() {
        ParamVector acc(theta.size(), 0.0);
        ParamVector scratch(theta.size(), 0.0);
        clipped_sum_range(spec, theta, ds, batch, priv.clip_norm, lo, hi, acc,
                          scratch);
        return acc;
      }));
    }
    for (auto& f : parts) axpy(1.0, f.get(), sum);  // fixed chunk order
  }

  if (priv.sigma > 0) {
    ParamVector noise =
        gaussian_vector(sum.size(), priv.clip_norm * priv.sigma, noise_rng);
    axpy(1.0, noise, sum);
  }
  return sum;
}

void adaptive_step(OptimizerState& state, const ModelSpec& spec, const Dataset& ds,
                   Batch batch1, Batch batch2, const PrivacySpec& priv,
                   RngStream& noise_rng) {
  const double eta = state.ctrl.eta;
  ParamVector g1 = noisy_gradient(spec, state.theta, ds, batch1, priv, noise_rng);

  ParamVector full = state.theta;
  axpy(-eta, g1, full);

  ParamVector mid = state.theta;
  axpy(-0.5 * eta, g1, mid);
  ParamVector g2 = noisy_gradient(spec, mid, ds, batch2, priv, noise_rng);
  ParamVector& two_half = mid;
  axpy(-0.5 * eta, g2, two_half);

  double err = relative_error(full, two_half);
  const ParamVector& candidate = state.carry == Carry::full_step ? full : two_half;
  const ParamVector& next = accept_or_discard(state.theta, candidate, err, state.ctrl);
  if (&next == &state.theta) {
    ++state.discard_count;
  } else {
    state.theta = next;
  }
  state.ctrl = update_eta(state.ctrl, err);  // applied on discarded steps too
  ++state.step_count;
}

void sgd_step(OptimizerState& state, const ModelSpec& spec, const Dataset& ds,
              Batch batch, const PrivacySpec& priv, RngStream& noise_rng, double eta) {
  ParamVector g = noisy_gradient(spec, state.theta, ds, batch, priv, noise_rng);
  axpy(-eta, g, state.theta);
  ++state.step_count;
}

void adam_step(OptimizerState& state, const ModelSpec& spec, const Dataset& ds,
               Batch batch, const PrivacySpec& priv, RngStream& noise_rng, double eta,
               const AdamParams& ap) {
  if (state.adam_m.size() != state.theta.size())
    state.adam_m.assign(state.theta.size(), 0.0);
  if (state.adam_v.size() != state.theta.size())
    state.adam_v.assign(state.theta.size(), 0.0);

  ParamVector g = noisy_gradient(spec, state.theta, ds, batch, priv, noise_rng);
  ++state.adam_t;
  const double bc1 = 1.0 - std::pow(ap.beta1, static_cast<double>(state.adam_t));
  const double bc2 = 1.0 - std::pow(ap.beta2, static_cast<double>(state.adam_t));
  for (size_t i = 0; i < g.size(); ++i) {
    state.adam_m[i] = ap.beta1 * state.adam_m[i] + (1.0 - ap.beta1) * g[i];
    state.adam_v[i] = ap.beta2 * state.adam_v[i] + (1.0 - ap.beta2) * g[i] * g[i];
    double m_hat = state.adam_m[i] / bc1;
    double v_hat = state.adam_v[i] / bc2;
    state.theta[i] -= eta * m_hat / (std::sqrt(v_hat) + ap.eps);
  }
  ++state.step_count;
}

double decay_after_switch(double eta50, int k) {
  if (k < 50) throw std::invalid_argument("decay_after_switch: epoch before the switch");
  return eta50 / (1.0 + 0.1 * (k - 50));
}

long epoch_iteration_count(int64_t n, int batch_size, OptMode mode) {
  if (n <= 0 || batch_size <= 0)
    throw std::invalid_argument("epoch_iteration_count: sizes must be positive");
  int64_t per_batch = static_cast<int64_t>(batch_size);
  if (mode == OptMode::adaptive) return static_cast<long>(n / (2 * per_batch));
  return static_cast<long>(n / per_batch);
}

MinibatchSampler::MinibatchSampler(std::vector<int32_t> indices, int batch_size,
                                   RngStream rng, Mode mode)
    : pool_(std::move(indices)), batch_size_(batch_size), rng_(rng), mode_(mode) {
  if (pool_.empty()) throw std::invalid_argument("sampler: empty index pool");
  if (batch_size_ <= 0 || static_cast<size_t>(batch_size_) > pool_.size())
    throw std::invalid_argument("sampler: batch size outside [1, pool]");
}

std::vector<int32_t> MinibatchSampler::next() {
  std::vector<int32_t> batch;
  if (mode_ == Mode::poisson) {
    double q = static_cast<double>(batch_size_) / static_cast<double>(pool_.size());
    for (int32_t idx : pool_)
      if (rng_.next_uniform() < q) batch.push_back(idx);
  } else {
    if (!shuffled_ || cursor_ + static_cast<size_t>(batch_size_) > pool_.size()) {
      shuffle(pool_, rng_);
      shuffled_ = true;
      cursor_ = 0;
    }
    batch.assign(pool_.begin() + static_cast<long>(cursor_),
                 pool_.begin() + static_cast<long>(cursor_) + batch_size_);
    cursor_ += static_cast<size_t>(batch_size_);
  }
  ++batches_drawn_;
  examples_drawn_ += static_cast<int64_t>(batch.size());
  return batch;
}

}  // namespace adalr
