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

#pragma once

#include <vector>

namespace fednl {

/// Metrics recorded after each federated round.
struct RoundLog {
  int round = 0;
  double mta = 0.0;
  double asr_global = 0.0;
  std::vector<double> asr_local;  // one per local trigger
  double mean_train_loss = 0.0;
  double wall_time_ms = 0.0;
  std::vector<int> selected;  // client ids of the round, ascending

  friend bool operator==(const RoundLog&, const RoundLog&) = default;
};

}  // namespace fednl
