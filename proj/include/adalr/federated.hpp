#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "adalr/controller.hpp"
#include "adalr/dp_optimizer.hpp"
#include "adalr/models.hpp"

namespace adalr {

// One client's slice of the shared training set.
struct ClientShard {
  int client_id = 0;
  std::vector<int32_t> indices;
};

enum class ClientOpt { adaptive, sgd, adam };

struct FederatedConfig {
  int n_clients = 5;
  int batch_size = 10;
  // Local sub-steps per round; 0 derives one local epoch (shard / batch).
  // Adaptive clients run sub_steps/2 two-batch iterations, so every mode
  // touches batch_size * sub_steps examples per round.
  int sub_steps = 0;
  int rounds = 200;
  double random_fraction = 0.0;  // 0 = pathological class split, 1 = uniform
  ClientOpt opt = ClientOpt::adaptive;
  double eta = 0.01;  // fixed rate for sgd/adam clients
  double eta0 = 0.1;  // initial rate for adaptive clients
  double tol = 0.1;
  double alpha_min = 0.9;
  double alpha_max = 1.1;
  bool reset_controller_each_round = false;
  bool weighted_average = false;  // weight client models by shard size
  uint64_t seed = 1;
};

// Substream ids used by run_federated; fixed so a run can be reproduced
// piecewise (client c's sampler lives on substream kClientStreamBase + c).
inline constexpr uint64_t kFedInitStream = 11;
inline constexpr uint64_t kFedPartitionStream = 12;
inline constexpr uint64_t kFedClientStreamBase = 100;

// Disjoint equal-size shards covering the dataset (sizes differ by at most
// one when n_clients does not divide N). Client c's designated classes are
// { y : y mod n_clients == c }; with 2k classes over k clients that is a
// class pair per client. A 1 - random_fraction share of each shard is drawn
// from the designated classes, the rest is dealt uniformly from the remaining
// pool. Throws when a designated pool runs dry (dataset too small or too
// skewed for the requested split).
std::vector<ClientShard> partition(const Dataset& ds, int n_clients,
                                   double random_fraction, RngStream& rng);

// Per-client state that outlives a round: the learning-rate controller
// persists across aggregations (a reset option exists for ablation), the
// sampler keeps its stream, and discards accumulate.
struct ClientRuntime {
  ClientShard shard;
  ControllerState ctrl;
  MinibatchSampler sampler;
  long discards = 0;
  long steps = 0;
};

// Local training from global_theta: sub_steps/2 adaptive iterations with the
// discard rule, or sub_steps plain SGD/Adam steps. Returns the local model;
// controller state and discard counts persist in `client`.
ParamVector client_update(const ParamVector& global_theta, const ModelSpec& spec,
                          const Dataset& ds, const FederatedConfig& cfg,
                          ClientRuntime& client);

// One aggregation: every client starts from global_theta, the results are
// averaged (unweighted when shards are equal-sized, else optionally weighted).
// The average is accumulated in client-id order, so the result is independent
// of how client work is scheduled. client_models, when given, receives each
// client's local result.
ParamVector federated_round(const ParamVector& global_theta, const ModelSpec& spec,
                            const Dataset& ds, const FederatedConfig& cfg,
                            std::vector<ClientRuntime>& clients,
                            std::vector<ParamVector>* client_models = nullptr);

// client_id -1 marks the aggregated model's row.
struct RoundMetricsRow {
  int round = 0;
  int client_id = -1;
  double accuracy = 0.0;
  std::optional<double> eta;
  std::optional<long> discards;
};

// Full simulation: partition, rounds of local training plus averaging,
// per-round evaluation. Row 0 reports the initial model.
std::vector<RoundMetricsRow> run_federated(const FederatedConfig& cfg,
                                           const ModelSpec& spec,
                                           const Dataset& train,
                                           const Dataset& eval_set);

}  // namespace adalr
