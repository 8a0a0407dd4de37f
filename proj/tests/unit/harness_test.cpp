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

#include <filesystem>
#include <random>

#include "fednl/experiment.hpp"
#include "oracles.hpp"

namespace {

using namespace fednl;
using namespace fednl::exp;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fednl_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Sample with label c lights ON pixel x=c of a 1 x C frame; the model wires
// that pixel to class c.
TEST(Mta, HardwiredModelScoresOne) {
  const int C = 3;
  snn::Matrix w(2 * C, C, 0.0);
  for (int c = 0; c < C; ++c) w(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) = 2.0;
  const snn::SnnModel m({w}, snn::LifConfig{}, 2, C, 1);
  std::vector<data::Sample> test;
  for (int c = 0; c < C; ++c) {
    data::FrameTensor x(2, 1, C);
    x.set(0, data::kOnChannel, 0, c, true);
    x.set(1, data::kOnChannel, 0, c, true);
    test.push_back({x, c});
  }
  EXPECT_EQ(metrics::compute_mta(m, test), 1.0);
  EXPECT_THROW(metrics::compute_mta(m, {}), std::invalid_argument);
}

TEST(Asr, ConstantOutputModelScoresOne) {
  const int C = 3, target = 2;
  snn::Matrix w(2 * 4 * 4, C, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) w(i, target) = 2.0;
  const snn::SnnModel m({w}, snn::LifConfig{}, 3, C, 1);
  std::mt19937_64 rng(1);
  std::vector<data::Sample> test;
  for (int i = 0; i < 12; ++i) test.push_back({oracle::random_tensor(3, 4, 4, 0.2, rng), i % C});
  const auto spec = backdoor::make_local_trigger(0, {0, 3}, backdoor::PolarityCode::P3,
                                                 backdoor::StaticMotion{0, 0}, 1, 1, target);
  EXPECT_EQ(metrics::compute_asr(m, test, spec), 1.0);
  std::vector<data::Sample> only_target;
  for (const auto& s : test)
    if (s.label == target) only_target.push_back(s);
  EXPECT_THROW(metrics::compute_asr(m, only_target, spec), std::invalid_argument);
}

TEST(Asr, EligibleSetExcludesTargetClass) {
  // model always answers class 0; target 0 is never counted on class-0 data
  snn::Matrix w(2 * 2 * 2, 2, 0.0);
  const snn::SnnModel silent({w}, snn::LifConfig{}, 2, 2, 1);
  std::vector<data::Sample> test{{data::FrameTensor(2, 2, 2), 0}, {data::FrameTensor(2, 2, 2), 1}};
  const auto spec = backdoor::make_local_trigger(0, {0, 2}, backdoor::PolarityCode::P1,
                                                 backdoor::StaticMotion{0, 0}, 1, 1, 0);
  EXPECT_EQ(metrics::compute_asr(silent, test, spec), 1.0);
  const auto spec1 = backdoor::make_local_trigger(0, {0, 2}, backdoor::PolarityCode::P1,
                                                  backdoor::StaticMotion{0, 0}, 1, 1, 1);
  EXPECT_EQ(metrics::compute_asr(silent, test, spec1), 0.0);
}

TEST(Metrics, MatchBruteForceLoops) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    snn::ModelSpec ms{2 * 6 * 6, {12}, 3, 2, 4};
    ms.init_gain = 3.0;
    const auto m = snn::make_model(ms, rng());
    std::vector<data::Sample> test;
    for (int i = 0; i < 15; ++i) test.push_back({oracle::random_tensor(4, 6, 6, 0.3, rng), i % 3});
    ASSERT_EQ(metrics::compute_mta(m, test), oracle::mta(m, test));
    const auto a = backdoor::allocate_equal(4, 2);
    const auto g = backdoor::compose_global(
        a, {backdoor::make_local_trigger(0, {0, 2}, backdoor::PolarityCode::P1, backdoor::StaticMotion{3, 3}, 3, 3, 1),
            backdoor::make_local_trigger(1, {2, 4}, backdoor::PolarityCode::P3, backdoor::StaticMotion{3, 3}, 3, 3, 1)});
    ASSERT_EQ(metrics::compute_asr(m, test, g), oracle::asr(m, test, g.locals, 1));
  }
}

TEST(Mta, UntrainedModelsAverageChance) {
  data::SyntheticSpec spec{4, 25, 6, 8, 8, 0.02, 3};
  const auto ds = data::generate_synthetic_dataset(spec);
  double sum = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    snn::ModelSpec ms{2 * 8 * 8, {32}, 4, 4, 6};
    ms.init_gain = 2.0;
    sum += metrics::compute_mta(snn::make_model(ms, 1000 + s), ds.samples);
  }
  EXPECT_NEAR(sum / seeds, 0.25, 0.10);
}

const char* kTiny = R"(
[dataset]
classes = 4
samples_per_class = 40
height = 8
width = 8
[model]
timesteps = 6
hidden = [32]
neurons_per_class = 2
init_gain = 2.0
[federation]
pool_size = 10
clients_per_round = 5
rounds = 6
warmup_rounds = 2
seed = 3
batch_size = 8
malicious_lr = 1e-3
malicious_epochs = 4
[attack]
mode = spikewhisper
attackers = 2
[trigger]
shape = [2,2]
polarities = [p1,p3]
target_label = 1
)";

TEST(Config, ParsesAndRoundTrips) {
  const auto c = parse_config_string(kTiny);
  EXPECT_EQ(c.dataset.samples_per_class, 40);
  EXPECT_EQ(c.model.hidden, (std::vector<std::size_t>{32}));
  EXPECT_EQ(c.federation.malicious.epochs, 4);
  EXPECT_EQ(c.federation.benign.batch_size, 8);
  EXPECT_EQ(c.federation.malicious.batch_size, 8);
  EXPECT_EQ(c.attack.mode, AttackMode::Spikewhisper);
  EXPECT_EQ(c.trigger.geometry.height, 2);
  const auto again = parse_config_string(to_ini(c));
  EXPECT_EQ(to_ini(again), to_ini(c));
  EXPECT_EQ(config_hash(again), config_hash(c));
}

TEST(Config, UnknownKeysAndSectionsAreErrors) {
  try {
    parse_config_string("[model]\ntimesteps = 4\nleek = 0.4\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "model.leek");
  }
  try {
    parse_config_string("[modle]\ntimesteps = 4\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path().rfind("modle", 0), 0u);
  }
}

TEST(Config, ValueAndCrossFieldErrorsNameTheField) {
  auto expect_path = [](const std::string& text, const std::string& path) {
    try {
      validate(parse_config_string(text));
      ADD_FAILURE() << "expected ConfigError for " << path;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.path(), path);
    }
  };
  expect_path("[model]\ntimesteps = many\n", "model.timesteps");
  expect_path("[attack]\nmode = sneaky\n", "attack.mode");
  expect_path("[federation]\nclients_per_round = 2\n[attack]\nattackers = 3\n", "attack.attackers");
  expect_path("[trigger]\npolarities = [p1,p2]\n", "trigger.polarities");
  expect_path("[trigger]\nshape = [20,3]\n", "trigger.position");
  expect_path("[trigger]\nshape = [0,3]\n", "trigger.shape");
}

TEST(Config, HashIgnoresOutputButTracksSeed) {
  auto c = parse_config_string(kTiny);
  const auto h = config_hash(c);
  c.output.dir = "/tmp/elsewhere";
  c.output.name = "other";
  EXPECT_EQ(config_hash(c), h);
  c.federation.seed = 4;
  EXPECT_NE(config_hash(c), h);
}

RoundLog log_row(int t, std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RoundLog r;
  r.round = t;
  r.mta = u(rng);
  r.asr_global = u(rng);
  for (std::size_t i = 0; i < k; ++i) r.asr_local.push_back(u(rng));
  r.mean_train_loss = u(rng) / 3.0;
  r.wall_time_ms = 0.0;
  return r;
}

TEST(RoundCsv, HeaderIsExact) {
  EXPECT_EQ(round_csv_header(3),
            "round,mta,asr_global,asr_local_0,asr_local_1,asr_local_2,mean_train_loss,wall_time_ms");
  EXPECT_EQ(round_csv_header(0), "round,mta,asr_global,mean_train_loss,wall_time_ms");
}

TEST(RoundCsv, RoundTripIsExact) {
  std::mt19937_64 rng(4);
  std::vector<RoundLog> h;
  for (int t = 0; t < 15; ++t) h.push_back(log_row(t, 3, rng));
  const auto parsed = parse_round_csv(round_csv(h, 3, "config_hash=x"));
  ASSERT_EQ(parsed.size(), h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(parsed[i].round, h[i].round);
    EXPECT_EQ(parsed[i].mta, h[i].mta);
    EXPECT_EQ(parsed[i].asr_global, h[i].asr_global);
    EXPECT_EQ(parsed[i].asr_local, h[i].asr_local);
    EXPECT_EQ(parsed[i].mean_train_loss, h[i].mean_train_loss);
  }
  EXPECT_THROW(parse_round_csv("round,mta\n"), FormatError);
}

TEST(PlotData, EmptyHistoryWritesHeaderOnly) {
  const auto dir = scratch("plot_empty");
  const auto path = (dir / "plot.csv").string();
  export_plot_data({}, path, 2);
  EXPECT_EQ(detail::read_text(path), "run," + round_csv_header(2) + "\n");
  EXPECT_TRUE(read_plot_data(path).empty());
}

TEST(PlotData, OneRowPerRoundPerRunAndRoundTrip) {
  std::mt19937_64 rng(5);
  std::vector<NamedHistory> runs;
  for (const char* name : {"u000", "u033", "u100"}) {
    NamedHistory n{name, {}};
    for (int t = 0; t < 7; ++t) n.history.push_back(log_row(t, 3, rng));
    runs.push_back(n);
  }
  const auto dir = scratch("plot_rt");
  const auto path = (dir / "plot.csv").string();
  export_plot_data(runs, path);
  const auto text = detail::read_text(path);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 * 7);
  const auto back = read_plot_data(path);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(back[r].run, runs[r].run);
    ASSERT_EQ(back[r].history.size(), 7u);
    for (std::size_t t = 0; t < 7; ++t) {
      EXPECT_EQ(back[r].history[t].asr_local, runs[r].history[t].asr_local);
      EXPECT_EQ(back[r].history[t].mta, runs[r].history[t].mta);
    }
  }
  EXPECT_THROW(export_plot_data(runs, "/nonexistent/dir/plot.csv"), std::runtime_error);
}

TEST(Experiment, WiresAttackersTriggersAndBudget) {
  const auto c = parse_config_string(kTiny);
  const auto s = prepare_experiment(c);
  EXPECT_EQ(s.train.samples.size(), 128u);
  EXPECT_EQ(s.test.samples.size(), 32u);
  ASSERT_EQ(s.attacker_ids.size(), 2u);
  ASSERT_EQ(s.global_trigger.locals.size(), 2u);
  EXPECT_EQ(s.pixel_budget, 6u * 4u);
  EXPECT_EQ(backdoor::pixel_budget(s.tca_trigger), s.pixel_budget);
  EXPECT_EQ(planned_pixel_budget(c), s.pixel_budget);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& cl = s.clients[static_cast<std::size_t>(s.attacker_ids[k])];
    ASSERT_TRUE(cl.malicious());
    EXPECT_EQ(std::get<fed::Malicious>(cl.role).spec, s.global_trigger.locals[k]);
    EXPECT_EQ(cl.train.epochs, 4);
  }
  auto t = c;
  t.attack.mode = AttackMode::Tca;
  const auto st = prepare_experiment(t);
  for (int id : st.attacker_ids)
    EXPECT_EQ(std::get<fed::Malicious>(st.clients[static_cast<std::size_t>(id)].role).spec, st.tca_trigger);
}

TEST(Experiment, SameSeedGivesByteIdenticalCsv) {
  auto c = parse_config_string(kTiny);
  const auto dir = scratch("determinism");
  c.output.dir = dir.string();
  c.output.name = "a";
  const auto a = run_experiment(c);
  c.output.name = "b";
  c.federation.parallel = true;
  const auto b = run_experiment(c);
  EXPECT_EQ(detail::read_text(a.csv_path), detail::read_text(b.csv_path));
  EXPECT_EQ(a.server.history, b.server.history);
  EXPECT_EQ(a.server.global_model, b.server.global_model);
  EXPECT_NE(a.csv_text.find("config_hash=" + config_hash(c)), std::string::npos);
  EXPECT_EQ(read_round_csv(a.csv_path).size(), 6u);
  c.federation.seed = 4;
  EXPECT_NE(run_experiment(c).csv_text, a.csv_text);
}

TEST(Experiment, AttackersOnlyAfterWarmup) {
  const auto c = parse_config_string(kTiny);
  const auto r = run_experiment(c);
  for (const auto& log : r.history()) {
    int present = 0;
    for (int id : r.attacker_ids) present += std::count(log.selected.begin(), log.selected.end(), id);
    EXPECT_EQ(present, log.round < 2 ? 0 : 2) << log.round;
    EXPECT_EQ(log.asr_local.size(), 2u);
    for (double v : log.asr_local) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

// Before any poisoning, averaging over target labels removes the bias of
// whichever class an untrained model prefers, leaving ASR near 1/C.
TEST(Experiment, WarmupAsrAveragesChance) {
  double sum = 0.0;
  int n = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (int target = 0; target < 4; ++target) {
      auto c = parse_config_string(kTiny);
      c.federation.rounds = 2;
      c.federation.warmup_rounds = 1;
      c.federation.seed = seed;
      c.trigger.target_label = target;
      const auto r = run_experiment(c);
      sum += r.history().front().asr_global;
      ++n;
    }
  EXPECT_NEAR(sum / n, 0.25, 0.10);
}

TEST(Experiment, ConfigErrorsPropagateWithFieldPath) {
  auto c = parse_config_string(kTiny);
  c.trigger.target_label = 9;
  try {
    run_experiment(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "trigger.target_label");
  }
}

TEST(Experiment, UtilizationAblationWritesMergedCsv) {
  auto c = parse_config_string(kTiny);
  c.federation.rounds = 3;
  const auto dir = scratch("util");
  c.output.dir = dir.string();
  const std::vector<double> levels{0.0, 1.0 / 3.0, 1.0};
  const auto runs = ablate_utilization(c, levels);
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[0].realized, 0.0);
  EXPECT_DOUBLE_EQ(runs[1].realized, 1.0 / 3.0);
  EXPECT_EQ(runs[2].realized, 1.0);
  EXPECT_EQ(runs[0].result.pixel_budget, 0u);
  const auto merged = read_plot_data((dir / "run_utilization.csv").string());
  ASSERT_EQ(merged.size(), 3u);
  EXPECT_EQ(merged[1].run, "u033");
  for (const auto& m : merged) EXPECT_EQ(m.history.size(), 3u);
}

TEST(Experiment, GeometryAblationCoversGrid) {
  auto c = parse_config_string(kTiny);
  c.federation.rounds = 3;
  const auto dir = scratch("geom");
  c.output.dir = dir.string();
  const std::vector<int> sizes{1, 2};
  const std::vector<backdoor::Anchor> anchors{backdoor::Anchor::BottomRight, backdoor::Anchor::Middle};
  const std::vector<backdoor::TriggerType> types{backdoor::TriggerType::Static, backdoor::TriggerType::Moving};
  const auto rows = ablate_trigger_geometry(c, sizes, anchors, types);
  EXPECT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows.front().position, "bottom-right");
  const auto table = detail::read_text((dir / "run_geometry.csv").string());
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 9);
}

TEST(Experiment, PlotExportCollectsRunFiles) {
  auto c = parse_config_string(kTiny);
  c.federation.rounds = 3;
  const auto dir = scratch("collect");
  c.output.dir = dir.string();
  for (const char* name : {"x", "y"}) {
    c.output.name = name;
    run_experiment(c);
  }
  const auto runs = collect_round_csvs(dir.string());
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[0].run, "x");
  EXPECT_EQ(runs[1].history.size(), 3u);
}

}  // namespace
