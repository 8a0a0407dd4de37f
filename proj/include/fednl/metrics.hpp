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

#include <span>
#include <stdexcept>

#include "fednl/backdoor.hpp"
#include "fednl/neuro_data.hpp"
#include "fednl/snn_engine.hpp"

namespace fednl::metrics {

/// Main-task accuracy: fraction of clean samples whose argmax class (lowest
/// index on ties) equals the label.
inline double compute_mta(const snn::SnnModel& model, std::span<const data::Sample> test) {
  if (test.empty()) throw std::invalid_argument("compute_mta: empty test set");
  std::size_t hits = 0;
  for (const auto& s : test)
    if (snn::predict(model, s.frames) == s.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

/// Attack success rate: samples whose true label is not the target are
/// stamped with `poison` and counted when classified as `target`.
template <typename Poison>
double compute_asr(const snn::SnnModel& model, std::span<const data::Sample> test, int target,
                   Poison&& poison) {
  std::size_t eligible = 0, hits = 0;
  for (const auto& s : test) {
    if (s.label == target) continue;
    ++eligible;
    if (snn::predict(model, poison(s).frames) == target) ++hits;
  }
  if (eligible == 0) throw std::invalid_argument("compute_asr: no samples outside the target class");
  return static_cast<double>(hits) / static_cast<double>(eligible);
}

inline double compute_asr(const snn::SnnModel& model, std::span<const data::Sample> test,
                          const backdoor::TriggerSpec& trigger) {
  if (!test.empty())
    backdoor::check_trigger_fits(trigger, test.front().frames.frames(),
                                 test.front().frames.height(), test.front().frames.width());
  return compute_asr(model, test, trigger.target_label,
                     [&](const data::Sample& s) { return backdoor::apply_trigger(s, trigger); });
}

inline double compute_asr(const snn::SnnModel& model, std::span<const data::Sample> test,
                          const backdoor::GlobalTrigger& trigger) {
  return compute_asr(model, test, trigger.target_label(),
                     [&](const data::Sample& s) { return backdoor::apply_global(s, trigger); });
}

}  // namespace fednl::metrics
