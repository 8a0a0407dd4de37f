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

// Time-division backdoor triggers: timeslice allocation, per-slice local
// triggers, their composition into a global trigger, and the temporally
// centralized baseline that stamps the whole global trigger on every frame.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fednl/common.hpp"
#include "fednl/neuro_data.hpp"

namespace fednl::backdoor {

/// Half-open frame interval [begin, end).
struct FrameRange {
  int begin = 0;
  int end = 0;
  int length() const { return std::max(0, end - begin); }
  bool contains(int t) const { return t >= begin && t < end; }
  bool within(const FrameRange& outer) const {
    return length() == 0 || (begin >= outer.begin && end <= outer.end);
  }
  friend bool operator==(const FrameRange&, const FrameRange&) = default;
};

struct TimesliceAllocation {
  std::vector<FrameRange> slices;
  int total_frames = 0;

  int attackers() const { return static_cast<int>(slices.size()); }
  int allocated_frames() const {
    int n = 0;
    for (const auto& s : slices) n += s.length();
    return n;
  }

  void validate() const {
    int prev_end = 0;
    for (std::size_t i = 0; i < slices.size(); ++i) {
      const auto& s = slices[i];
      if (s.begin < prev_end || s.end < s.begin || s.end > total_frames)
        throw std::invalid_argument("timeslices: slice " + std::to_string(i) +
                                    " overlaps, is unordered or leaves [0, T)");
      prev_end = s.end;
    }
  }
};

/// K contiguous slices covering [0, T); the first T mod K slices get one
/// extra frame.
inline TimesliceAllocation allocate_equal(int frames, int attackers) {
  if (attackers < 1) throw std::invalid_argument("allocate_equal: K must be >= 1");
  if (attackers > frames) throw std::invalid_argument("allocate_equal: K exceeds T");
  TimesliceAllocation alloc{{}, frames};
  const int base = frames / attackers;
  const int extra = frames % attackers;
  int start = 0;
  for (int i = 0; i < attackers; ++i) {
    const int len = base + (i < extra ? 1 : 0);
    alloc.slices.push_back({start, start + len});
    start += len;
  }
  return alloc;
}

// ---------------------------------------------------------------------------
// Polarity codes

enum class PolarityCode : std::uint8_t { P0 = 0, P1 = 1, P2 = 2, P3 = 3 };

struct ChannelBits {
  bool on = false;
  bool off = false;
  friend bool operator==(const ChannelBits&, const ChannelBits&) = default;
};

/// p0 -> none, p1 -> ON only, p2 -> OFF only, p3 -> both.
inline constexpr ChannelBits polarity_channels(PolarityCode code) {
  const auto v = static_cast<std::uint8_t>(code);
  return {(v & 1) != 0, (v & 2) != 0};
}

inline PolarityCode parse_polarity(const std::string& text) {
  if (text.size() == 2 && (text[0] == 'p' || text[0] == 'P') && text[1] >= '0' && text[1] <= '3')
    return static_cast<PolarityCode>(text[1] - '0');
  throw std::invalid_argument("unknown polarity code '" + text + "'");
}

inline std::string to_string(PolarityCode code) {
  return "p" + std::to_string(static_cast<int>(code));
}

// ---------------------------------------------------------------------------
// Trigger specs

struct StaticMotion {
  int row = 0;
  int col = 0;
  friend bool operator==(const StaticMotion&, const StaticMotion&) = default;
};

/// Fixed row; column at absolute frame t is start_col + step * t.
struct MovingMotion {
  int row = 0;
  int start_col = 0;
  int step = 1;
  friend bool operator==(const MovingMotion&, const MovingMotion&) = default;
};

using Motion = std::variant<StaticMotion, MovingMotion>;

struct Position {
  int row = 0;
  int col = 0;
};

inline Position position_at(const Motion& motion, int t) {
  if (const auto* s = std::get_if<StaticMotion>(&motion)) return {s->row, s->col};
  const auto& m = std::get<MovingMotion>(motion);
  return {m.row, m.start_col + m.step * t};
}

struct TriggerSpec {
  int timeslice_index = 0;
  FrameRange active;                  // frames that carry the trigger
  std::vector<PolarityCode> polarity; // one code per active frame
  Motion motion = StaticMotion{};
  int height = 1;
  int width = 1;
  int target_label = 0;

  PolarityCode polarity_at(int t) const {
    return polarity[static_cast<std::size_t>(t - active.begin)];
  }
  friend bool operator==(const TriggerSpec&, const TriggerSpec&) = default;
};

/// Local trigger with a single polarity over `active`.
inline TriggerSpec make_local_trigger(int timeslice_index, FrameRange active, PolarityCode code,
                                      Motion motion, int height, int width, int target) {
  return {timeslice_index,
          active,
          std::vector<PolarityCode>(static_cast<std::size_t>(active.length()), code),
          motion,
          height,
          width,
          target};
}

/// Throws unless the footprint lies inside height x width on every active
/// frame and the polarity schedule matches the active range.
inline void check_trigger_fits(const TriggerSpec& spec, int frames, int height, int width) {
  if (spec.height < 1 || spec.width < 1)
    throw std::invalid_argument("trigger: size must be positive");
  if (spec.polarity.size() != static_cast<std::size_t>(spec.active.length()))
    throw std::invalid_argument("trigger: need one polarity code per active frame");
  if (spec.active.length() > 0 && (spec.active.begin < 0 || spec.active.end > frames))
    throw std::invalid_argument("trigger: active frames outside [0, T)");
  for (int t = spec.active.begin; t < spec.active.end; ++t) {
    const Position p = position_at(spec.motion, t);
    if (p.row < 0 || p.col < 0 || p.row + spec.height > height || p.col + spec.width > width)
      throw std::invalid_argument("trigger: footprint leaves the frame at t=" + std::to_string(t));
  }
}

/// Overwrites the footprint's ON/OFF bits with the frame's polarity code on
/// every active frame and relabels to the target.
inline data::Sample apply_trigger(const data::Sample& sample, const TriggerSpec& spec) {
  const auto& x = sample.frames;
  check_trigger_fits(spec, x.frames(), x.height(), x.width());
  data::Sample out{x, spec.target_label};
  for (int t = spec.active.begin; t < spec.active.end; ++t) {
    const Position p = position_at(spec.motion, t);
    const ChannelBits bits = polarity_channels(spec.polarity_at(t));
    for (int y = p.row; y < p.row + spec.height; ++y)
      for (int c = p.col; c < p.col + spec.width; ++c) {
        out.frames.set(t, data::kOnChannel, y, c, bits.on);
        out.frames.set(t, data::kOffChannel, y, c, bits.off);
      }
  }
  return out;
}

/// Number of pixel-frames written: active frames x footprint area.
inline std::size_t pixel_budget(const TriggerSpec& spec) {
  return static_cast<std::size_t>(spec.active.length()) * static_cast<std::size_t>(spec.height) *
         static_cast<std::size_t>(spec.width);
}

// ---------------------------------------------------------------------------
// Utilization, global trigger, TCA baseline

/// Total active trigger frames over total allocated frames.
inline double temporal_utilization(const TimesliceAllocation& alloc,
                                   std::span<const TriggerSpec> locals) {
  const int allocated = alloc.allocated_frames();
  if (allocated == 0) return 0.0;
  int active = 0;
  for (const auto& l : locals) active += l.active.length();
  return static_cast<double>(active) / static_cast<double>(allocated);
}

struct GlobalTrigger {
  std::vector<TriggerSpec> locals;
  int target_label() const { return locals.empty() ? 0 : locals.front().target_label; }
};

inline std::size_t pixel_budget(const GlobalTrigger& g) {
  std::size_t n = 0;
  for (const auto& l : g.locals) n += pixel_budget(l);
  return n;
}

inline GlobalTrigger compose_global(const TimesliceAllocation& alloc,
                                    std::vector<TriggerSpec> locals) {
  alloc.validate();
  if (locals.empty()) throw std::invalid_argument("compose_global: no local triggers");
  std::vector<bool> used(alloc.slices.size(), false);
  for (const auto& l : locals) {
    if (l.timeslice_index < 0 || l.timeslice_index >= alloc.attackers())
      throw std::invalid_argument("compose_global: timeslice index out of range");
    auto slot = used[static_cast<std::size_t>(l.timeslice_index)];
    if (slot) throw std::invalid_argument("compose_global: duplicate timeslice index");
    used[static_cast<std::size_t>(l.timeslice_index)] = true;
    if (l.target_label != locals.front().target_label)
      throw std::invalid_argument("compose_global: local triggers disagree on the target");
    if (!l.active.within(alloc.slices[static_cast<std::size_t>(l.timeslice_index)]))
      throw std::invalid_argument("compose_global: local trigger leaves its timeslice");
  }
  return {std::move(locals)};
}

/// Applies every local in turn. Locals occupy disjoint frames, so the order
/// does not matter and re-application is a no-op.
inline data::Sample apply_global(const data::Sample& sample, const GlobalTrigger& g) {
  data::Sample out = sample;
  for (const auto& l : g.locals) out = apply_trigger(out, l);
  if (!g.locals.empty()) out.label = g.target_label();
  return out;
}

/// Single spec over all T frames carrying the global trigger's pattern. Each
/// frame takes the polarity of the local whose timeslice owns it; geometry
/// comes from the first local.
inline TriggerSpec make_tca_trigger(const GlobalTrigger& g, const TimesliceAllocation& alloc) {
  if (g.locals.empty()) throw std::invalid_argument("make_tca_trigger: empty global trigger");
  const TriggerSpec& first = g.locals.front();
  TriggerSpec tca{0, {0, alloc.total_frames}, {}, first.motion, first.height, first.width,
                  first.target_label};
  tca.polarity.assign(static_cast<std::size_t>(alloc.total_frames), first.polarity.empty()
                                                                         ? PolarityCode::P0
                                                                         : first.polarity.front());
  for (const auto& l : g.locals) {
    const FrameRange slice = alloc.slices[static_cast<std::size_t>(l.timeslice_index)];
    const PolarityCode code = l.polarity.empty() ? PolarityCode::P0 : l.polarity.front();
    for (int t = slice.begin; t < slice.end; ++t) {
      tca.polarity[static_cast<std::size_t>(t)] = l.active.contains(t) ? l.polarity_at(t) : code;
    }
  }
  return tca;
}

/// Poisons floor(rate * |batch|) samples chosen by a seeded permutation; the
/// batch order is preserved.
inline std::vector<data::Sample> poison_batch(std::span<const data::Sample> batch, double rate,
                                              const TriggerSpec& spec, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw std::invalid_argument("poison_batch: rate must be in [0, 1]");
  std::vector<data::Sample> out(batch.begin(), batch.end());
  const auto n_poison =
      static_cast<std::size_t>(std::floor(rate * static_cast<double>(batch.size()) + 1e-9));
  if (n_poison == 0) return out;
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < n_poison; ++k) out[order[k]] = apply_trigger(out[order[k]], spec);
  return out;
}

// ---------------------------------------------------------------------------
// Building triggers from a geometry description

enum class Anchor { BottomRight, Middle, TopLeft, Explicit };
enum class TriggerType { Static, Moving };

struct TriggerGeometry {
  int height = 3;
  int width = 3;
  Anchor anchor = Anchor::BottomRight;
  int row = 0;  // Explicit anchor only
  int col = 0;
  TriggerType type = TriggerType::Static;
  int move_step = 1;
};

/// Motion for a trigger of this geometry over T frames of an H x W sensor.
/// Moving triggers are placed so the whole trajectory stays in frame: a
/// bottom-right trajectory ends at the right edge, top-left starts at column
/// 0, middle is centred.
inline Motion resolve_motion(const TriggerGeometry& g, int frames, int height, int width) {
  int row = 0, col = 0;
  switch (g.anchor) {
    case Anchor::BottomRight: row = height - g.height, col = width - g.width; break;
    case Anchor::Middle: row = (height - g.height) / 2, col = (width - g.width) / 2; break;
    case Anchor::TopLeft: row = 0, col = 0; break;
    case Anchor::Explicit: row = g.row, col = g.col; break;
  }
  if (g.type == TriggerType::Static) return StaticMotion{row, col};
  const int travel = g.move_step * (frames - 1);
  int start = col;
  const int lo = std::min(0, travel);  // leftmost offset reached
  const int hi = std::max(0, travel);
  switch (g.anchor) {
    case Anchor::BottomRight: start = (width - g.width) - hi; break;
    case Anchor::TopLeft: start = -lo; break;
    case Anchor::Middle: start = (width - g.width - (hi - lo)) / 2 - lo; break;
    case Anchor::Explicit: break;
  }
  return MovingMotion{row, start, g.move_step};
}

/// Number of leading frames of a slice of length `slice_len` that carry the
/// trigger at utilization `u`, rounded to nearest.
inline int active_frames_for(double u, int slice_len) {
  return std::clamp(static_cast<int>(std::floor(u * slice_len + 0.5)), 0, slice_len);
}

/// One local trigger per slice, each active on the leading frames of its
/// slice, all sharing the geometry; polarity i goes to slice i.
inline std::vector<TriggerSpec> make_time_division_locals(const TimesliceAllocation& alloc,
                                                          const TriggerGeometry& geometry,
                                                          std::span<const PolarityCode> polarities,
                                                          double utilization, int height,
                                                          int width, int target) {
  if (polarities.size() != alloc.slices.size())
    throw std::invalid_argument("trigger: need one polarity per timeslice");
  const Motion motion = resolve_motion(geometry, alloc.total_frames, height, width);
  std::vector<TriggerSpec> locals;
  for (std::size_t i = 0; i < alloc.slices.size(); ++i) {
    const FrameRange slice = alloc.slices[i];
    const FrameRange active{slice.begin,
                            slice.begin + active_frames_for(utilization, slice.length())};
    auto spec = make_local_trigger(static_cast<int>(i), active, polarities[i], motion,
                                   geometry.height, geometry.width, target);
    check_trigger_fits(spec, alloc.total_frames, height, width);
    locals.push_back(std::move(spec));
  }
  return locals;
}

}  // namespace fednl::backdoor
