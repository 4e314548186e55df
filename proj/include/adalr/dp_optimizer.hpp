#pragma once

#include <cstdint>
#include <vector>

#include "adalr/controller.hpp"
#include "adalr/models.hpp"
#include "adalr/rng.hpp"
#include "adalr/vec.hpp"

namespace adalr {

// Subsampled Gaussian mechanism parameters. The per-coordinate noise standard
// deviation is clip_norm * sigma; sigma == 0 runs the same code paths without
// privacy (and without touching the noise stream).
struct PrivacySpec {
  double q = 0.0;        // sampling ratio batch_size / dataset_size
  double sigma = 0.0;    // noise multiplier
  double clip_norm = 1;  // per-example gradient 2-norm bound; +inf disables clipping
  int batch_size = 0;
  int64_t dataset_size = 0;

  static PrivacySpec make(int batch_size, int64_t dataset_size, double sigma,
                          double clip_norm);
  // sigma 0, no clipping; the adaptive step then reduces to plain
  // extrapolation on stochastic gradients.
  static PrivacySpec non_private();

  bool is_private() const { return sigma > 0; }
};

// Throws std::invalid_argument on inconsistent fields; a positive sigma
// together with an infinite clip norm is rejected (the noise scale would be
// unbounded).
void validate(const PrivacySpec& p);

enum class OptMode { adaptive, sgd, adam };

// Which iterate the adaptive step carries forward: the full eta step named by
// the update rule, or the extrapolated two-half-step endpoint.
enum class Carry { full_step, extrapolated };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  ParamVector theta;
  ControllerState ctrl;
  OptMode mode = OptMode::adaptive;
  Carry carry = Carry::full_step;
  long step_count = 0;
  long discard_count = 0;
  // Adam accumulators, used by adam_step only.
  ParamVector adam_m, adam_v;
  long adam_t = 0;
};

OptimizerState make_optimizer(ParamVector theta, ControllerState ctrl,
                              OptMode mode, Carry carry = Carry::full_step);

// g scaled by min(1, c / ||g||): 2-norm at most c, direction preserved.
ParamVector clip(ParamVector g, double c);

// Sum of clipped per-example gradients over the batch plus
// N(0, (clip_norm * sigma)^2 I). An empty batch yields pure noise.
ParamVector noisy_gradient(const ModelSpec& spec, const ParamVector& theta,
                           const Dataset& ds, Batch batch, const PrivacySpec& priv,
                           RngStream& noise_rng);

// One adaptive iteration: a full eta step from batch1's noisy gradient is
// compared against two eta/2 steps (the second gradient drawn from batch2 at
// the midpoint); eta is rescaled from the mismatch and the iterate is kept or
// discarded per the controller. Consumes exactly two batches and, when
// sigma > 0, exactly two noise draws.
void adaptive_step(OptimizerState& state, const ModelSpec& spec, const Dataset& ds,
                   Batch batch1, Batch batch2, const PrivacySpec& priv,
                   RngStream& noise_rng);

// theta <- theta - eta * noisy_gradient(batch)
void sgd_step(OptimizerState& state, const ModelSpec& spec, const Dataset& ds,
              Batch batch, const PrivacySpec& priv, RngStream& noise_rng, double eta);

// Adam with bias correction on the noisy clipped gradient.
void adam_step(OptimizerState& state, const ModelSpec& spec, const Dataset& ds,
               Batch batch, const PrivacySpec& priv, RngStream& noise_rng, double eta,
               const AdamParams& ap = {});

// eta_k = eta50 / (1 + 0.1 (k - 50)); the fixed-rate decay used after the
// adaptive phase is switched off at epoch 50. Throws for k < 50.
double decay_after_switch(double eta50, int k);

// Optimizer iterations per epoch: the adaptive step consumes two minibatches,
// so it runs floor(N / (2|B|)) iterations where SGD/Adam run floor(N / |B|);
// per-example gradient work per epoch is then identical across modes.
long epoch_iteration_count(int64_t n, int batch_size, OptMode mode);

// Minibatch index source over a fixed index pool.
//   permute_partition  reshuffle the pool each epoch, deal fixed-size batches
//                      (a trailing remainder smaller than one batch is skipped)
//   poisson            include each index independently with probability
//                      batch_size / pool_size; batch size varies
class MinibatchSampler {
 public:
  enum class Mode { permute_partition, poisson };

  MinibatchSampler(std::vector<int32_t> indices, int batch_size, RngStream rng,
                   Mode mode = Mode::permute_partition);

  std::vector<int32_t> next();
  long batches_drawn() const { return batches_drawn_; }
  int64_t examples_drawn() const { return examples_drawn_; }
  int batch_size() const { return batch_size_; }
  int64_t pool_size() const { return static_cast<int64_t>(pool_.size()); }

 private:
  std::vector<int32_t> pool_;
  int batch_size_;
  RngStream rng_;
  Mode mode_;
  size_t cursor_ = 0;
  bool shuffled_ = false;
  long batches_drawn_ = 0;
  int64_t examples_drawn_ = 0;
};

}  // namespace adalr
