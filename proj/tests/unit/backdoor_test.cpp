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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fednl/backdoor.hpp"
#include "fuzz.hpp"
#include "oracles.hpp"

namespace {

using namespace fednl::backdoor;
using fednl::data::FrameTensor;
using fednl::data::kOffChannel;
using fednl::data::kOnChannel;
using fednl::data::Sample;

TEST(Allocate, Examples) {
  const auto a = allocate_equal(18, 3);
  EXPECT_EQ(a.slices, (std::vector<FrameRange>{{0, 6}, {6, 12}, {12, 18}}));
  EXPECT_EQ(allocate_equal(18, 1).slices, (std::vector<FrameRange>{{0, 18}}));
  const auto b = allocate_equal(7, 3);
  EXPECT_EQ(b.slices, (std::vector<FrameRange>{{0, 3}, {3, 5}, {5, 7}}));
  EXPECT_THROW(allocate_equal(2, 3), std::invalid_argument);
  EXPECT_THROW(allocate_equal(5, 0), std::invalid_argument);
}

TEST(Allocate, CoversAllFramesInOrder) {
  for (int T = 1; T <= 30; ++T)
    for (int K = 1; K <= T; ++K) {
      const auto a = allocate_equal(T, K);
      a.validate();
      ASSERT_EQ(a.allocated_frames(), T);
      ASSERT_EQ(a.slices.front().begin, 0);
      ASSERT_EQ(a.slices.back().end, T);
      int lo = T, hi = 0;
      for (const auto& s : a.slices) lo = std::min(lo, s.length()), hi = std::max(hi, s.length());
      ASSERT_LE(hi - lo, 1);
    }
}

std::vector<TriggerSpec> locals_with(const TimesliceAllocation& a, std::vector<int> active) {
  std::vector<TriggerSpec> out;
  for (std::size_t i = 0; i < a.slices.size(); ++i)
    out.push_back(make_local_trigger(static_cast<int>(i),
                                     {a.slices[i].begin, a.slices[i].begin + active[i]},
                                     PolarityCode::P1, StaticMotion{0, 0}, 1, 1, 0));
  return out;
}

TEST(Utilization, Examples) {
  const auto a = allocate_equal(18, 3);
  EXPECT_DOUBLE_EQ(temporal_utilization(a, locals_with(a, {2, 2, 2})), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(temporal_utilization(a, locals_with(a, {4, 4, 4})), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(temporal_utilization(a, locals_with(a, {6, 6, 6})), 1.0);
  EXPECT_EQ(temporal_utilization(a, {}), 0.0);
}

TEST(Utilization, MonotoneAndOneOnlyWhenFull) {
  const auto a = allocate_equal(7, 3);
  std::vector<int> best{3, 2, 2};
  for (int x = 0; x <= 3; ++x)
    for (int y = 0; y <= 2; ++y)
      for (int z = 0; z <= 2; ++z) {
        const double u = temporal_utilization(a, locals_with(a, {x, y, z}));
        if (x < 3) {
          ASSERT_LE(u, temporal_utilization(a, locals_with(a, {x + 1, y, z})));
        }
        if (y < 2) {
          ASSERT_LE(u, temporal_utilization(a, locals_with(a, {x, y + 1, z})));
        }
        ASSERT_EQ(u == 1.0, x == 3 && y == 2 && z == 2);
      }
}

TEST(Utilization, LevelsRoundToNearestFrame) {
  EXPECT_EQ(active_frames_for(1.0 / 3.0, 6), 2);
  EXPECT_EQ(active_frames_for(2.0 / 3.0, 6), 4);
  EXPECT_EQ(active_frames_for(1.0, 6), 6);
  EXPECT_EQ(active_frames_for(0.0, 6), 0);
  EXPECT_EQ(active_frames_for(1.0 / 3.0, 4), 1);
}

TEST(Polarity, CodeMapping) {
  EXPECT_EQ(polarity_channels(PolarityCode::P0), (ChannelBits{false, false}));
  EXPECT_EQ(polarity_channels(PolarityCode::P1), (ChannelBits{true, false}));
  EXPECT_EQ(polarity_channels(PolarityCode::P2), (ChannelBits{false, true}));
  EXPECT_EQ(polarity_channels(PolarityCode::P3), (ChannelBits{true, true}));
  EXPECT_EQ(parse_polarity("p2"), PolarityCode::P2);
  EXPECT_EQ(to_string(PolarityCode::P3), "p3");
  EXPECT_THROW(parse_polarity("p4"), std::invalid_argument);
}

TEST(ApplyTrigger, ZeroActiveFramesOnlyRelabels) {
  std::mt19937_64 rng(1);
  const Sample s{oracle::random_tensor(4, 5, 5, 0.3, rng), 2};
  const auto spec = make_local_trigger(0, {1, 1}, PolarityCode::P3, StaticMotion{0, 0}, 2, 2, 0);
  const auto out = apply_trigger(s, spec);
  EXPECT_EQ(out.frames, s.frames);
  EXPECT_EQ(out.label, 0);
}

TEST(ApplyTrigger, BottomRightStaticCount) {
  const Sample s{FrameTensor(18, 34, 34), 4};
  const auto spec = make_local_trigger(0, {0, 6}, PolarityCode::P3, StaticMotion{31, 31}, 3, 3, 1);
  const auto out = apply_trigger(s, spec);
  EXPECT_EQ(out.frames.count_ones(), 108u);
  for (int t = 0; t < 18; ++t)
    for (int p = 0; p < 2; ++p)
      for (int y = 0; y < 34; ++y)
        for (int x = 0; x < 34; ++x)
          ASSERT_EQ(out.frames.at(t, p, y, x), t < 6 && y >= 31 && x >= 31);
  EXPECT_EQ(out.label, 1);
}

TEST(ApplyTrigger, MovingTrajectory) {
  const Sample s{FrameTensor(3, 4, 4), 0};
  const auto spec = make_local_trigger(0, {0, 3}, PolarityCode::P1, MovingMotion{0, 0, 1}, 1, 1, 2);
  const auto out = apply_trigger(s, spec);
  EXPECT_EQ(out.frames.count_ones(), 3u);
  for (int t = 0; t < 3; ++t) EXPECT_TRUE(out.frames.at(t, kOnChannel, 0, t));
  for (int t = 0; t < 3; ++t)
    for (int x = 0; x < 4; ++x) EXPECT_FALSE(out.frames.at(t, kOffChannel, 0, x));
}

TEST(ApplyTrigger, OverwritesExistingBits) {
  FrameTensor x(1, 2, 2);
  for (auto& c : x.cells()) c = 1;
  const auto spec = make_local_trigger(0, {0, 1}, PolarityCode::P0, StaticMotion{0, 0}, 1, 1, 0);
  const auto out = apply_trigger({x, 1}, spec);
  EXPECT_FALSE(out.frames.at(0, kOnChannel, 0, 0));
  EXPECT_FALSE(out.frames.at(0, kOffChannel, 0, 0));
  EXPECT_EQ(out.frames.count_ones(), 6u);
}

TEST(ApplyTrigger, OutOfBoundsFootprintThrows) {
  const Sample s{FrameTensor(4, 5, 5), 0};
  EXPECT_THROW(apply_trigger(s, make_local_trigger(0, {0, 2}, PolarityCode::P1,
                                                   StaticMotion{3, 3}, 3, 3, 0)),
               std::invalid_argument);
  // moving trigger that walks off the right edge on frame 3
  EXPECT_THROW(apply_trigger(s, make_local_trigger(0, {0, 4}, PolarityCode::P1,
                                                   MovingMotion{0, 2, 1}, 1, 1, 0)),
               std::invalid_argument);
  EXPECT_THROW(apply_trigger(s, make_local_trigger(0, {2, 6}, PolarityCode::P1,
                                                   StaticMotion{0, 0}, 1, 1, 0)),
               std::invalid_argument);
}

TEST(ApplyTrigger, MatchesCellByCellOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = fuzz::random_case(rng);
    const auto out = apply_trigger(c.sample, c.spec);
    ASSERT_EQ(out.frames, oracle::stamp(c.sample.frames, c.spec));
  }
}

GlobalTrigger three_locals(const TimesliceAllocation& a) {
  return compose_global(a, {make_local_trigger(0, a.slices[0], PolarityCode::P1, StaticMotion{1, 1}, 3, 3, 2),
                            make_local_trigger(1, a.slices[1], PolarityCode::P2, StaticMotion{1, 1}, 3, 3, 2),
                            make_local_trigger(2, a.slices[2], PolarityCode::P3, StaticMotion{1, 1}, 3, 3, 2)});
}

TEST(Global, SingleLocalEqualsApplyTrigger) {
  const auto a = allocate_equal(5, 1);
  const auto l = make_local_trigger(0, {0, 5}, PolarityCode::P2, MovingMotion{2, 0, 1}, 2, 2, 3);
  const auto g = compose_global(a, {l});
  std::mt19937_64 rng(3);
  const Sample s{oracle::random_tensor(5, 8, 8, 0.3, rng), 0};
  EXPECT_EQ(apply_global(s, g), apply_trigger(s, l));
}

TEST(Global, AllPermutationsAgreeAndReapplicationIsNoop) {
  const auto a = allocate_equal(18, 3);
  const auto g = three_locals(a);
  std::mt19937_64 rng(4);
  const Sample s{oracle::random_tensor(18, 6, 6, 0.4, rng), 0};
  const auto ref = apply_global(s, g);
  std::vector<int> order{0, 1, 2};
  do {
    GlobalTrigger p;
    for (int i : order) p.locals.push_back(g.locals[static_cast<std::size_t>(i)]);
    ASSERT_EQ(apply_global(s, p), ref);
  } while (std::next_permutation(order.begin(), order.end()));
  EXPECT_EQ(apply_global(ref, g), ref);
}

TEST(Global, CompositionErrors) {
  const auto a = allocate_equal(6, 2);
  const auto l0 = make_local_trigger(0, {0, 3}, PolarityCode::P1, StaticMotion{}, 1, 1, 1);
  auto dup = l0;
  EXPECT_THROW(compose_global(a, {l0, dup}), std::invalid_argument);
  auto other = make_local_trigger(1, {3, 6}, PolarityCode::P1, StaticMotion{}, 1, 1, 0);
  EXPECT_THROW(compose_global(a, {l0, other}), std::invalid_argument);
  auto leaks = make_local_trigger(1, {2, 5}, PolarityCode::P1, StaticMotion{}, 1, 1, 1);
  EXPECT_THROW(compose_global(a, {l0, leaks}), std::invalid_argument);
}

TEST(Tca, FullDurationWithMatchedBudget) {
  const auto a = allocate_equal(18, 3);
  const auto g = three_locals(a);
  const auto tca = make_tca_trigger(g, a);
  EXPECT_EQ(tca.active, (FrameRange{0, 18}));
  EXPECT_EQ(tca.height, 3);
  EXPECT_EQ(tca.width, 3);
  EXPECT_EQ(pixel_budget(tca), pixel_budget(g));
  EXPECT_EQ(pixel_budget(tca), 18u * 9u);
  // each frame carries the polarity of the slice that owns it
  EXPECT_EQ(tca.polarity_at(0), PolarityCode::P1);
  EXPECT_EQ(tca.polarity_at(6), PolarityCode::P2);
  EXPECT_EQ(tca.polarity_at(17), PolarityCode::P3);
  std::mt19937_64 rng(5);
  const Sample s{oracle::random_tensor(18, 6, 6, 0.4, rng), 0};
  EXPECT_EQ(apply_trigger(s, tca), apply_global(s, g));
}

TEST(Tca, SingleFrameDegenerate) {
  const auto a = allocate_equal(1, 1);
  const auto l = make_local_trigger(0, {0, 1}, PolarityCode::P2, StaticMotion{0, 0}, 2, 2, 1);
  const auto tca = make_tca_trigger(compose_global(a, {l}), a);
  EXPECT_EQ(tca, l);
}

TEST(Tca, BudgetCountsCellWrites) {
  // one-third utilization over 18 frames: 3 x 2 active frames of 3x3
  const auto a = allocate_equal(18, 3);
  TriggerGeometry geom;
  const std::vector<PolarityCode> pol{PolarityCode::P1, PolarityCode::P2, PolarityCode::P3};
  const auto g = compose_global(a, make_time_division_locals(a, geom, pol, 1.0 / 3.0, 10, 10, 1));
  const auto tca6 = make_local_trigger(0, {0, 6}, PolarityCode::P3, StaticMotion{7, 7}, 3, 3, 1);
  EXPECT_EQ(pixel_budget(g), pixel_budget(tca6));
  // count footprint cells an empty tensor would receive on both channels
  const auto written = apply_global({FrameTensor(18, 10, 10), 0}, g);
  std::size_t cells = 0;
  for (int t = 0; t < 18; ++t)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x)
        cells += written.frames.at(t, 0, y, x) || written.frames.at(t, 1, y, x);
  EXPECT_EQ(cells, pixel_budget(g));
}

TEST(PoisonBatch, Examples) {
  std::mt19937_64 rng(6);
  std::vector<Sample> batch;
  for (int i = 0; i < 9; ++i) batch.push_back({oracle::random_tensor(3, 4, 4, 0.2, rng), i % 3});
  const auto spec = make_local_trigger(0, {0, 3}, PolarityCode::P3, StaticMotion{0, 0}, 2, 2, 2);
  EXPECT_EQ(poison_batch(batch, 0.0, spec, 1), batch);
  const auto all = poison_batch(batch, 1.0, spec, 1);
  for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(all[i], apply_trigger(batch[i], spec));
  const auto half = poison_batch(batch, 0.5, spec, 1);
  int poisoned = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (half[i] == batch[i]) continue;
    EXPECT_EQ(half[i], apply_trigger(batch[i], spec));
    ++poisoned;
  }
  EXPECT_EQ(poisoned, 4);
  EXPECT_EQ(poison_batch(batch, 0.5, spec, 1), half);
  EXPECT_THROW(poison_batch(batch, 1.5, spec, 1), std::invalid_argument);
}

TEST(PoisonBatch, FloorArithmetic) {
  std::vector<Sample> batch(10, Sample{FrameTensor(1, 2, 2), 0});
  const auto spec = make_local_trigger(0, {0, 1}, PolarityCode::P1, StaticMotion{0, 0}, 1, 1, 1);
  for (double r : {0.1, 0.3, 0.7, 0.99}) {
    const auto out = poison_batch(batch, r, spec, 5);
    const auto n = std::count_if(out.begin(), out.end(), [](const Sample& s) { return s.label == 1; });
    EXPECT_EQ(n, static_cast<long>(std::floor(r * 10 + 1e-9))) << r;
  }
}

TEST(Geometry, AnchorsAndMovingPlacement) {
  TriggerGeometry g;
  EXPECT_EQ(std::get<StaticMotion>(resolve_motion(g, 12, 16, 16)), (StaticMotion{13, 13}));
  g.anchor = Anchor::Middle;
  EXPECT_EQ(std::get<StaticMotion>(resolve_motion(g, 12, 16, 16)), (StaticMotion{6, 6}));
  g.anchor = Anchor::TopLeft;
  EXPECT_EQ(std::get<StaticMotion>(resolve_motion(g, 12, 16, 16)), (StaticMotion{0, 0}));
  g.type = TriggerType::Moving;
  EXPECT_EQ(std::get<MovingMotion>(resolve_motion(g, 12, 16, 16)), (MovingMotion{0, 0, 1}));
  g.anchor = Anchor::BottomRight;
  const auto m = std::get<MovingMotion>(resolve_motion(g, 12, 16, 16));
  EXPECT_EQ(m.start_col + 11 + 3, 16);  // trajectory ends flush with the right edge
  g.anchor = Anchor::Middle;
  const auto c = std::get<MovingMotion>(resolve_motion(g, 12, 16, 16));
  EXPECT_EQ(c.start_col, 1);
  g.move_step = -1;
  g.anchor = Anchor::TopLeft;
  EXPECT_EQ(std::get<MovingMotion>(resolve_motion(g, 12, 16, 16)).start_col, 11);
}

TEST(Geometry, TimeDivisionLocalsFitTheirSlices) {
  const auto a = allocate_equal(12, 3);
  TriggerGeometry g;
  g.type = TriggerType::Moving;
  const std::vector<PolarityCode> pol{PolarityCode::P1, PolarityCode::P2, PolarityCode::P3};
  const auto locals = make_time_division_locals(a, g, pol, 0.5, 16, 16, 1);
  ASSERT_EQ(locals.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(locals[i].active, (FrameRange{a.slices[i].begin, a.slices[i].begin + 2}));
    EXPECT_EQ(locals[i].polarity, std::vector<PolarityCode>(2, pol[i]));
  }
  EXPECT_NO_THROW(compose_global(a, locals));
  EXPECT_THROW(make_time_division_locals(a, g, std::vector<PolarityCode>{PolarityCode::P1}, 1.0, 16, 16, 1),
               std::invalid_argument);
}

TEST(Fuzz, PoisoningInvariants) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = fuzz::random_case(rng);
    const auto r = fuzz::check_invariants(c, rng);
    ASSERT_TRUE(r.ok()) << "trial " << trial << ": " << r.failure;
  }
}

}  // namespace
