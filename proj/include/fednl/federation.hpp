// Copyright 2026 The fednl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// In-process federated rounds: client selection with a fixed attacker set,
// benign and poisoned local training, uniform parameter averaging.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fednl/backdoor.hpp"
#include "fednl/common.hpp"
#include "fednl/neuro_data.hpp"
#include "fednl/round_log.hpp"
#include "fednl/snn_engine.hpp"

namespace fednl::fed {

using snn::ParamVector;
using snn::SnnModel;

struct TrainParams {
  double lr = 1e-3;
  int epochs = 2;
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct Benign {};
struct Malicious {
  backdoor::TriggerSpec spec;
  double poison_rate = 0.3;
};

struct ClientConfig {
  std::variant<Benign, Malicious> role = Benign{};
  TrainParams train;
  std::uint64_t seed = 0;

  bool malicious() const { return std::holds_alternative<Malicious>(role); }
};

struct RoundSchedule {
  int total_rounds = 60;
  int pool_size = 50;
  int clients_per_round = 10;
  int warmup_rounds = 0;
  std::vector<int> attacker_ids;
  std::uint64_t selection_seed = 0;

  void validate() const {
    if (total_rounds < 1) throw std::invalid_argument("schedule: total_rounds must be >= 1");
    if (warmup_rounds < 0 || warmup_rounds >= total_rounds)
      throw std::invalid_argument("schedule: warmup_rounds must be in [0, total_rounds)");
    if (clients_per_round < 1) throw std::invalid_argument("schedule: clients_per_round < 1");
    if (static_cast<int>(attacker_ids.size()) > clients_per_round)
      throw std::invalid_argument("schedule: more attackers than clients per round");
    for (int id : attacker_ids)
      if (id < 0 || id >= pool_size) throw std::invalid_argument("schedule: attacker id out of pool");
  }
};

/// Post-warmup rounds include every attacker plus (n - K) benign clients;
/// warm-up rounds draw n benign clients. Benign draws are without
/// replacement, seeded by (selection_seed, round). Result is ascending.
inline std::vector<int> select_clients(const RoundSchedule& schedule, int round) {
  schedule.validate();
  if (round < 0 || round >= schedule.total_rounds)
    throw std::invalid_argument("select_clients: round out of range");
  const bool attack = round >= schedule.warmup_rounds;
  std::vector<int> benign;
  for (int id = 0; id < schedule.pool_size; ++id)
    if (std::find(schedule.attacker_ids.begin(), schedule.attacker_ids.end(), id) ==
        schedule.attacker_ids.end())
      benign.push_back(id);
  const int k = attack ? static_cast<int>(schedule.attacker_ids.size()) : 0;
  const int need = schedule.clients_per_round - k;
  if (static_cast<int>(benign.size()) < need)
    throw std::invalid_argument("select_clients: benign pool smaller than required draw");
  std::mt19937_64 rng(derive_seed(schedule.selection_seed, {static_cast<std::uint64_t>(round)}));
  std::vector<int> out;
  std::sample(benign.begin(), benign.end(), std::back_inserter(out), need, rng);
  if (attack) out.insert(out.end(), schedule.attacker_ids.begin(), schedule.attacker_ids.end());
  std::sort(out.begin(), out.end());
  return out;
}

struct LocalUpdate {
  ParamVector params;
  double mean_loss = 0.0;  // mean batch loss over all local steps
};

namespace detail {

// Shared loop; `poison` is null for benign training.
inline LocalUpdate train_loop(const SnnModel& global, std::span<const data::Sample> shard,
                              const TrainParams& p, std::uint64_t seed,
                              const Malicious* poison) {
  if (shard.empty()) throw std::invalid_argument("local_train: empty shard");
  if (p.epochs < 1 || p.batch_size < 1)
    throw std::invalid_argument("local_train: epochs and batch_size must be >= 1");
  const auto& shape = shard.front().frames;
  if (shape.frames() != global.timesteps() || shape.shape().frame_cells() != global.input_width())
    throw DimensionError("local_train: shard does not match the model input");
  if (poison) backdoor::check_trigger_fits(poison->spec, shape.frames(), shape.height(), shape.width());

  SnnModel model = global;
  snn::AdamState state;
  const snn::AdamParams adam{p.lr, p.beta1, p.beta2, p.epsilon};
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double loss_sum = 0.0;
  int steps = 0;
  std::vector<data::Sample> batch;
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0, b = 0; start < order.size();
         start += static_cast<std::size_t>(p.batch_size), ++b) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(p.batch_size));
      batch.clear();
      for (std::size_t k = start; k < stop; ++k) batch.push_back(shard[order[k]]);
      if (poison)
        batch = backdoor::poison_batch(
            batch, poison->poison_rate, poison->spec,
            derive_seed(seed, {0xbadULL, static_cast<std::uint64_t>(epoch), b}));
      auto lg = snn::batch_gradients(model, batch);
      snn::adam_step(model, lg.grads, adam, state);
      loss_sum += lg.loss;
      ++steps;
    }
  }
  return {snn::params_to_vector(model), loss_sum / steps};
}

}  // namespace detail

/// E epochs of seeded mini-batch Adam on the rate-MSE loss, starting from
/// `global`. Fresh optimizer state each call.
inline LocalUpdate local_train_benign(const SnnModel& global, std::span<const data::Sample> shard,
                                      const ClientConfig& cfg, std::uint64_t round_seed) {
  return detail::train_loop(global, shard, cfg.train, round_seed, nullptr);
}

/// Same loop as benign training, with a fraction `poison_rate` of every
/// batch stamped with the client's trigger and relabelled.
inline LocalUpdate local_train_malicious(const SnnModel& global,
                                         std::span<const data::Sample> shard,
                                         const ClientConfig& cfg, std::uint64_t round_seed) {
  const auto* m = std::get_if<Malicious>(&cfg.role);
  if (!m) throw std::invalid_argument("local_train_malicious: client is not malicious");
  if (!(m->poison_rate >= 0.0 && m->poison_rate <= 1.0))
    throw std::invalid_argument("local_train_malicious: poison rate must be in [0, 1]");
  return detail::train_loop(global, shard, cfg.train, round_seed, m);
}

/// Elementwise arithmetic mean, summed in input order.
inline ParamVector aggregate(std::span<const ParamVector> updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  ParamVector mean(updates.front().size(), 0.0);
  for (const auto& u : updates) {
    if (u.size() != mean.size()) throw DimensionError("aggregate: update length mismatch");
    for (std::size_t k = 0; k < u.size(); ++k) mean[k] += u[k];
  }
  const double inv = 1.0 / static_cast<double>(updates.size());
  for (auto& x : mean) x *= inv;
  return mean;
}

struct ServerState {
  SnnModel global_model;
  int round = 0;
  std::vector<RoundLog> history;
};

/// Fills the metric fields of a round log for the freshly aggregated model.
using Evaluator = std::function<void(const SnnModel&, RoundLog&)>;

struct RoundOptions {
  bool parallel = false;
  bool record_wall_time = false;
};

/// One federated round: select, train every selected client from the
/// current global model, average in ascending client-id order, evaluate.
/// Clients with empty shards return the global model unchanged.
inline void run_round(ServerState& server, const RoundSchedule& schedule,
                      std::span<const ClientConfig> clients,
                      std::span<const std::vector<data::Sample>> shards,
                      const Evaluator& evaluate, RoundOptions options = {}) {
  if (clients.size() != static_cast<std::size_t>(schedule.pool_size) ||
      shards.size() != clients.size())
    throw std::invalid_argument("run_round: need one client config and shard per pool member");
  const auto started = std::chrono::steady_clock::now();
  const int t = server.round;
  const auto selected = select_clients(schedule, t);
  const SnnModel& global = server.global_model;

  auto train_one = [&](int id) -> LocalUpdate {
    const auto& cfg = clients[static_cast<std::size_t>(id)];
    const auto& shard = shards[static_cast<std::size_t>(id)];
    if (shard.empty()) return {snn::params_to_vector(global), -1.0};
    const auto seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(t)});
    return cfg.malicious() ? local_train_malicious(global, shard, cfg, seed)
                           : local_train_benign(global, shard, cfg, seed);
  };

  std::vector<LocalUpdate> results(selected.size());
  if (options.parallel) {
    std::vector<std::future<LocalUpdate>> futures;
    for (int id : selected) futures.push_back(std::async(std::launch::async, train_one, id));
    for (std::size_t k = 0; k < futures.size(); ++k) results[k] = futures[k].get();
  } else {
    for (std::size_t k = 0; k < selected.size(); ++k) results[k] = train_one(selected[k]);
  }

  std::vector<ParamVector> updates;
  double loss_sum = 0.0;
  int trained = 0;
  for (auto& r : results) {
    if (r.mean_loss >= 0.0) loss_sum += r.mean_loss, ++trained;
    updates.push_back(std::move(r.params));
  }
  server.global_model = snn::vector_to_params(aggregate(updates), global);

  RoundLog log;
  log.round = t;
  log.selected = selected;
  log.mean_train_loss = trained > 0 ? loss_sum / trained : 0.0;
  if (evaluate) evaluate(server.global_model, log);
  if (options.record_wall_time)
    log.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - started)
                           .count();
  server.history.push_back(std::move(log));
  ++server.round;
}

}  // namespace fednl::fed
