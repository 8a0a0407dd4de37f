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

// Small time-division backdoor run on synthetic data, built from the config
// structs directly. Prints one line per round.

#include <cstdio>

#include "fednl/experiment.hpp"

int main() {
  using namespace fednl;
  exp::ExperimentConfig c;
  c.dataset.samples_per_class = 100;
  c.model.hidden = {64};
  c.model.init_gain = 2.0;
  c.federation.pool_size = 20;
  c.federation.clients_per_round = 6;
  c.federation.rounds = 30;
  c.federation.warmup_rounds = 5;
  c.federation.malicious.lr = 1e-3;
  c.federation.malicious.epochs = 10;
  c.federation.benign.batch_size = c.federation.malicious.batch_size = 8;
  c.attack.mode = exp::AttackMode::Spikewhisper;
  c.trigger.target_label = 1;

  const auto r = exp::run_experiment(c);
  std::printf("pixel budget %zu, attackers", r.pixel_budget);
  for (int id : r.attacker_ids) std::printf(" %d", id);
  std::printf("\nround   mta  asr_global  asr_local\n");
  for (const auto& log : r.history()) {
    std::printf("%5d %5.3f %11.3f ", log.round, log.mta, log.asr_global);
    for (double a : log.asr_local) std::printf(" %.3f", a);
    std::printf("\n");
  }
}
