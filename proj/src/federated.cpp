#include "adalr/federated.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adalr {

std::vector<ClientShard> partition(const Dataset& ds, int n_clients,
                                   double random_fraction, RngStream& rng) {
  if (n_clients <= 0) throw std::invalid_argument("partition: n_clients must be positive");
  if (random_fraction < 0.0 || random_fraction > 1.0)
    throw std::invalid_argument("partition: random_fraction outside [0,1]");
  if (ds.n < n_clients)
    throw std::invalid_argument("partition: dataset too small for requested shard sizes");

  // Shard sizes differ by at most one so the union is exactly the dataset.
  std::vector<int64_t> sizes(static_cast<size_t>(n_clients), ds.n / n_clients);
  for (int64_t r = 0; r < ds.n % n_clients; ++r) ++sizes[static_cast<size_t>(r)];

  // Class pools, shuffled once; drawing pops from the back.
  std::vector<std::vector<int32_t>> pools(static_cast<size_t>(ds.n_classes));
  for (int64_t i = 0; i < ds.n; ++i)
    pools[static_cast<size_t>(ds.label(i))].push_back(static_cast<int32_t>(i));
  for (auto& pool : pools) shuffle(pool, rng);

  std::vector<ClientShard> shards(static_cast<size_t>(n_clients));
  for (int c = 0; c < n_clients; ++c) shards[static_cast<size_t>(c)].client_id = c;

  // Designated share first: client c draws round-robin from the classes
  // congruent to c mod n_clients.
  for (int c = 0; c < n_clients; ++c) {
    auto& shard = shards[static_cast<size_t>(c)];
    int64_t n_path = sizes[static_cast<size_t>(c)] -
                     std::llround(random_fraction *
                                  static_cast<double>(sizes[static_cast<size_t>(c)]));
    std::vector<int> own_classes;
    for (int y = c; y < ds.n_classes; y += n_clients) own_classes.push_back(y);
    if (own_classes.empty())
      throw std::invalid_argument("partition: more clients than classes");
    size_t turn = 0;
    while (static_cast<int64_t>(shard.indices.size()) < n_path) {
      bool drew = false;
      for (size_t t = 0; t < own_classes.size() && !drew; ++t) {
        auto& pool = pools[static_cast<size_t>(own_classes[(turn + t) % own_classes.size()])];
        if (!pool.empty()) {
          shard.indices.push_back(pool.back());
          pool.pop_back();
          drew = true;
          turn = (turn + t + 1) % own_classes.size();
        }
      }
      if (!drew)
        throw std::invalid_argument(
            "partition: dataset too small for requested shard sizes");
    }
  }

  // Remaining examples are dealt uniformly.
  std::vector<int32_t> rest;
  for (auto& pool : pools) rest.insert(rest.end(), pool.begin(), pool.end());
  shuffle(rest, rng);
  size_t cursor = 0;
  for (int c = 0; c < n_clients; ++c) {
    auto& shard = shards[static_cast<size_t>(c)];
    while (static_cast<int64_t>(shard.indices.size()) < sizes[static_cast<size_t>(c)]) {
      if (cursor >= rest.size())
        throw std::invalid_argument(
            "partition: dataset too small for requested shard sizes");
      shard.indices.push_back(rest[cursor++]);
    }
  }
  return shards;
}

ParamVector client_update(const ParamVector& global_theta, const ModelSpec& spec,
                          const Dataset& ds, const FederatedConfig& cfg,
                          ClientRuntime& client) {
  int sub_steps = cfg.sub_steps;
  if (sub_steps == 0)
    sub_steps = static_cast<int>(client.sampler.pool_size() / cfg.batch_size);
  if (sub_steps < 0) throw std::invalid_argument("client_update: negative sub_steps");

  // Local training is noise-free and unclipped; the adaptive path is the same
  // two-batch step the private optimizer runs.
  PrivacySpec priv = PrivacySpec::non_private();
  RngStream unused_noise;  // sigma == 0 never touches it

  OptimizerState state = make_optimizer(
      global_theta, client.ctrl,
      cfg.opt == ClientOpt::adaptive ? OptMode::adaptive
      : cfg.opt == ClientOpt::sgd    ? OptMode::sgd
                                     : OptMode::adam);
  long discards_before = state.discard_count;

  if (cfg.opt == ClientOpt::adaptive) {
    for (int s = 0; s < sub_steps / 2; ++s) {
      auto b1 = client.sampler.next();
      auto b2 = client.sampler.next();
      adaptive_step(state, spec, ds, b1, b2, priv, unused_noise);
    }
  } else if (cfg.opt == ClientOpt::sgd) {
    for (int s = 0; s < sub_steps; ++s) {
      auto b = client.sampler.next();
      sgd_step(state, spec, ds, b, priv, unused_noise, cfg.eta);
    }
  } else {
    for (int s = 0; s < sub_steps; ++s) {
      auto b = client.sampler.next();
      adam_step(state, spec, ds, b, priv, unused_noise, cfg.eta);
    }
  }

  client.ctrl = state.ctrl;
  client.discards += state.discard_count - discards_before;
  client.steps += state.step_count;
  return std::move(state.theta);
}

ParamVector federated_round(const ParamVector& global_theta, const ModelSpec& spec,
                            const Dataset& ds, const FederatedConfig& cfg,
                            std::vector<ClientRuntime>& clients,
                            std::vector<ParamVector>* client_models) {
  if (clients.empty()) throw std::invalid_argument("federated_round: no clients");

  ParamVector mean(global_theta.size(), 0.0);
  double total_weight = 0.0;
  if (client_models) client_models->clear();

  for (auto& client : clients) {
    ParamVector local = client_update(global_theta, spec, ds, cfg, client);
    double w = cfg.weighted_average
                   ? static_cast<double>(client.shard.indices.size())
                   : 1.0;
    axpy(w, local, mean);
    total_weight += w;
    if (client_models) client_models->push_back(std::move(local));
  }
  scale(mean, 1.0 / total_weight);
  return mean;
}

std::vector<RoundMetricsRow> run_federated(const FederatedConfig& cfg,
                                           const ModelSpec& spec,
                                           const Dataset& train,
                                           const Dataset& eval_set) {
  RngStream root(cfg.seed, 0);
  RngStream init_rng = root.derive(kFedInitStream);
  RngStream part_rng = root.derive(kFedPartitionStream);

  auto shards = partition(train, cfg.n_clients, cfg.random_fraction, part_rng);

  ControllerState ctrl0;
  ctrl0.eta = cfg.eta0;
  ctrl0.tol = cfg.tol;
  ctrl0.alpha_min = cfg.alpha_min;
  ctrl0.alpha_max = cfg.alpha_max;
  ctrl0.discard_enabled = true;  // the non-private variant keeps the rule
  validate(ctrl0);

  std::vector<ClientRuntime> clients;
  clients.reserve(shards.size());
  for (auto& shard : shards) {
    int c = shard.client_id;
    MinibatchSampler sampler(shard.indices, cfg.batch_size,
                             root.derive(kFedClientStreamBase + static_cast<uint64_t>(c)));
    clients.push_back(ClientRuntime{std::move(shard), ctrl0, std::move(sampler)});
  }

  ParamVector global = init_params(spec, init_rng);

  std::vector<RoundMetricsRow> rows;
  rows.push_back({0, -1, accuracy(spec, global, eval_set), std::nullopt, std::nullopt});

  std::vector<ParamVector> client_models;
  for (int round = 1; round <= cfg.rounds; ++round) {
    if (cfg.reset_controller_each_round)
      for (auto& client : clients) client.ctrl = ctrl0;

    global = federated_round(global, spec, train, cfg, clients, &client_models);

    rows.push_back(
        {round, -1, accuracy(spec, global, eval_set), std::nullopt, std::nullopt});
    for (size_t c = 0; c < clients.size(); ++c) {
      rows.push_back({round, clients[c].shard.client_id,
                      accuracy(spec, client_models[c], eval_set),
                      clients[c].ctrl.eta, clients[c].discards});
    }
  }
  return rows;
}

}  // namespace adalr
