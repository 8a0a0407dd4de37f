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

// End-to-end experiment driver, round CSV files, and the utilization and
// trigger-geometry ablations.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fednl/backdoor.hpp"
#include "fednl/config.hpp"
#include "fednl/federation.hpp"
#include "fednl/metrics.hpp"
#include "fednl/neuro_data.hpp"
#include "fednl/round_log.hpp"
#include "fednl/snn_engine.hpp"

namespace fednl::exp {

// Seed stream tags
inline constexpr std::uint64_t kDataStream = 1;
inline constexpr std::uint64_t kSplitStream = 2;
inline constexpr std::uint64_t kPartitionStream = 3;
inline constexpr std::uint64_t kModelStream = 4;
inline constexpr std::uint64_t kAttackerStream = 5;
inline constexpr std::uint64_t kSelectionStream = 6;
inline constexpr std::uint64_t kClientStream = 7;

// ---------------------------------------------------------------------------
// Round CSV

inline std::string round_csv_header(std::size_t k) {
  std::string h = "round,mta,asr_global";
  for (std::size_t i = 0; i < k; ++i) h += ",asr_local_" + std::to_string(i);
  return h + ",mean_train_loss,wall_time_ms";
}

inline std::string round_csv_row(const RoundLog& r) {
  std::string row = std::to_string(r.round) + "," + format_double(r.mta) + "," +
                    format_double(r.asr_global);
  for (double a : r.asr_local) row += "," + format_double(a);
  return row + "," + format_double(r.mean_train_loss) + "," + format_double(r.wall_time_ms);
}

/// Metadata goes on one leading '#' line; the column header follows.
inline std::string round_csv(std::span<const RoundLog> history, std::size_t k,
                             const std::string& metadata) {
  std::string out;
  if (!metadata.empty()) out += "# " + metadata + "\n";
  out += round_csv_header(k) + "\n";
  for (const auto& r : history) {
    if (r.asr_local.size() != k) throw std::invalid_argument("round csv: inconsistent local ASR count");
    out += round_csv_row(r) + "\n";
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::size_t local_count_from_header(const std::vector<std::string>& cols,
                                           std::size_t offset) {
  // offset = number of leading columns before "round"
  if (cols.size() < offset + 5 || cols[offset] != "round" || cols[offset + 1] != "mta" ||
      cols[offset + 2] != "asr_global" || cols[cols.size() - 2] != "mean_train_loss" ||
      cols.back() != "wall_time_ms")
    throw FormatError("round csv: unexpected header");
  const std::size_t k = cols.size() - offset - 5;
  for (std::size_t i = 0; i < k; ++i)
    if (cols[offset + 3 + i] != "asr_local_" + std::to_string(i))
      throw FormatError("round csv: unexpected header");
  return k;
}

inline RoundLog parse_row(const std::vector<std::string>& cells, std::size_t offset, std::size_t k) {
  if (cells.size() != offset + 5 + k) throw FormatError("round csv: wrong column count");
  using exp::detail::parse_number;
  try {
    RoundLog r;
    r.round = parse_number<int>(cells[offset]);
    r.mta = parse_number<double>(cells[offset + 1]);
    r.asr_global = parse_number<double>(cells[offset + 2]);
    for (std::size_t i = 0; i < k; ++i) r.asr_local.push_back(parse_number<double>(cells[offset + 3 + i]));
    r.mean_train_loss = parse_number<double>(cells[offset + 3 + k]);
    r.wall_time_ms = parse_number<double>(cells[offset + 4 + k]);
    return r;
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("round csv: ") + e.what());
  }
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Parses a single-run round CSV (metadata lines starting with '#' skipped).
inline std::vector<RoundLog> parse_round_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<RoundLog> out;
  std::size_t k = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split_csv(line);
    if (!header) {
      k = detail::local_count_from_header(cells, 0);
      header = true;
      continue;
    }
    out.push_back(detail::parse_row(cells, 0, k));
  }
  if (!header) throw FormatError("round csv: missing header");
  return out;
}

inline std::vector<RoundLog> read_round_csv(const std::string& path) {
  return parse_round_csv(detail::read_text(path));
}

/// A named run history, as merged into plot files.
struct NamedHistory {
  std::string run;
  std::vector<RoundLog> history;
  friend bool operator==(const NamedHistory&, const NamedHistory&) = default;
};

/// Combined plot data: a `run` column followed by the round schema; one row
/// per round per run. All runs must report the same number of local ASRs.
inline void export_plot_data(std::span<const NamedHistory> runs, const std::string& path,
                             std::size_t k_if_empty = 0) {
  std::size_t k = k_if_empty;
  bool first = true;
  for (const auto& r : runs)
    for (const auto& log : r.history) {
      if (first) k = log.asr_local.size(), first = false;
      if (log.asr_local.size() != k)
        throw std::invalid_argument("export_plot_data: runs disagree on local ASR count");
    }
  std::string text = "run," + round_csv_header(k) + "\n";
  for (const auto& r : runs) {
    if (r.run.find(',') != std::string::npos)
      throw std::invalid_argument("export_plot_data: run name contains a comma");
    for (const auto& log : r.history) text += r.run + "," + round_csv_row(log) + "\n";
  }
  write_text(path, text);
}

inline std::vector<NamedHistory> read_plot_data(const std::string& path) {
  std::istringstream in(detail::read_text(path));
  std::string line;
  std::vector<NamedHistory> out;
  std::size_t k = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split_csv(line);
    if (!header) {
      if (cells.empty() || cells.front() != "run") throw FormatError("plot csv: unexpected header");
      k = detail::local_count_from_header(cells, 1);
      header = true;
      continue;
    }
    if (cells.empty()) throw FormatError("plot csv: empty row");
    if (out.empty() || out.back().run != cells.front()) out.push_back({cells.front(), {}});
    out.back().history.push_back(detail::parse_row(cells, 1, k));
  }
  if (!header) throw FormatError("plot csv: missing header");
  return out;
}

/// Merges every round CSV in `dir` (sorted by file name; run = file stem).
inline std::vector<NamedHistory> collect_round_csvs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<NamedHistory> out;
  for (const auto& f : files) {
    const std::string text = detail::read_text(f.string());
    std::istringstream probe(text);
    std::string line;
    while (std::getline(probe, line) && (line.empty() || line.front() == '#')) {
    }
    if (line.rfind("round,", 0) != 0) continue;  // not a per-run file
    out.push_back({f.stem().string(), parse_round_csv(text)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment

/// Everything derived from a config before training starts.
struct ExperimentSetup {
  data::LabeledDataset train;
  data::LabeledDataset test;
  data::PartitionPlan plan;
  std::vector<std::vector<data::Sample>> shards;
  backdoor::TimesliceAllocation allocation;
  backdoor::GlobalTrigger global_trigger;  // empty when attackers == 0
  backdoor::TriggerSpec tca_trigger;
  std::vector<int> attacker_ids;           // empty when mode == none
  std::vector<fed::ClientConfig> clients;
  fed::RoundSchedule schedule;
  snn::SnnModel initial_model;
  std::size_t pixel_budget = 0;
};

struct ExperimentResult {
  fed::ServerState server;
  std::string config_hash;
  std::size_t pixel_budget = 0;
  std::vector<int> attacker_ids;
  std::vector<int> empty_clients;
  std::string csv_path;  // empty when no output dir
  std::string csv_text;
  const std::vector<RoundLog>& history() const { return server.history; }
};

inline data::LabeledDataset load_dataset(const ExperimentConfig& c) {
  if (!c.dataset.path.empty()) {
    auto ds = data::read_dataset(c.dataset.path);
    const auto shape = ds.shape();
    if (ds.samples.empty()) throw ConfigError("dataset.path", "dataset file has no samples");
    if (shape.frames != c.model.timesteps)
      throw ConfigError("model.timesteps", "dataset file has " + std::to_string(shape.frames) +
                                               " frames");
    return ds;
  }
  data::SyntheticSpec s;
  s.classes = c.dataset.classes;
  s.samples_per_class = c.dataset.samples_per_class;
  s.frames = c.model.timesteps;
  s.height = c.dataset.height;
  s.width = c.dataset.width;
  s.noise_rate = c.dataset.noise_rate;
  s.seed = c.dataset.seed.value_or(derive_seed(c.federation.seed, {kDataStream}));
  return data::generate_synthetic_dataset(s);
}

/// Pixel budget of the trigger the configured attack will stamp: the global
/// trigger for time-division attacks, the full-duration spec for TCA.
inline std::size_t planned_pixel_budget(const ExperimentConfig& c) {
  if (c.attack.mode == AttackMode::None || c.attack.attackers == 0) return 0;
  const auto alloc = backdoor::allocate_equal(c.model.timesteps, c.attack.attackers);
  const auto locals = backdoor::make_time_division_locals(
      alloc, c.trigger.geometry, c.trigger.polarities, c.trigger.utilization, c.dataset.height,
      c.dataset.width, c.trigger.target_label);
  const auto global = backdoor::compose_global(alloc, locals);
  return c.attack.mode == AttackMode::Tca
             ? backdoor::pixel_budget(backdoor::make_tca_trigger(global, alloc))
             : backdoor::pixel_budget(global);
}

inline ExperimentSetup prepare_experiment(const ExperimentConfig& c) {
  validate(c);
  const std::uint64_t master = c.federation.seed;
  ExperimentSetup s;
  auto full = load_dataset(c);
  const auto shape = full.shape();
  if (c.trigger.target_label >= full.num_classes)
    throw ConfigError("trigger.target_label", "must be a valid class");
  std::tie(s.train, s.test) =
      data::stratified_split(full, c.dataset.test_fraction, derive_seed(master, {kSplitStream}));
  if (s.test.samples.empty()) throw ConfigError("dataset.test_fraction", "test split is empty");

  const auto part_seed = derive_seed(master, {kPartitionStream});
  s.plan = c.partition.scheme == data::PartitionScheme::Iid
               ? data::partition_iid(s.train, c.federation.pool_size, part_seed)
               : data::partition_dirichlet(s.train, c.federation.pool_size, c.partition.alpha,
                                           part_seed);
  for (const auto& idx : s.plan.shards()) {
    std::vector<data::Sample> shard;
    shard.reserve(idx.size());
    for (auto i : idx) shard.push_back(s.train.samples[i]);
    s.shards.push_back(std::move(shard));
  }

  snn::ModelSpec ms;
  ms.input_width = shape.frame_cells();
  ms.hidden = c.model.hidden;
  ms.num_classes = full.num_classes;
  ms.neurons_per_class = c.model.neurons_per_class;
  ms.timesteps = c.model.timesteps;
  ms.lif = c.model.lif;
  ms.init_gain = c.model.init_gain;
  s.initial_model = snn::make_model(ms, derive_seed(master, {kModelStream}));

  const int K = c.attack.attackers;
  if (K > 0) {
    try {
      s.allocation = backdoor::allocate_equal(c.model.timesteps, K);
      auto locals = backdoor::make_time_division_locals(
          s.allocation, c.trigger.geometry, c.trigger.polarities, c.trigger.utilization,
          shape.height, shape.width, c.trigger.target_label);
      s.global_trigger = backdoor::compose_global(s.allocation, std::move(locals));
      s.tca_trigger = backdoor::make_tca_trigger(s.global_trigger, s.allocation);
      backdoor::check_trigger_fits(s.tca_trigger, shape.frames, shape.height, shape.width);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("trigger.position", e.what());
    }
  }

  if (c.attack.mode != AttackMode::None) {
    // attackers are drawn among clients that actually hold data
    std::vector<int> candidates;
    for (int id = 0; id < c.federation.pool_size; ++id)
      if (!s.shards[static_cast<std::size_t>(id)].empty()) candidates.push_back(id);
    if (static_cast<int>(candidates.size()) < K)
      throw ConfigError("attack.attackers", "fewer non-empty clients than attackers");
    std::mt19937_64 rng(derive_seed(master, {kAttackerStream}));
    std::shuffle(candidates.begin(), candidates.end(), rng);
    s.attacker_ids.assign(candidates.begin(), candidates.begin() + K);
    s.pixel_budget = c.attack.mode == AttackMode::Tca ? backdoor::pixel_budget(s.tca_trigger)
                                                      : backdoor::pixel_budget(s.global_trigger);
  }

  s.clients.resize(static_cast<std::size_t>(c.federation.pool_size));
  for (int id = 0; id < c.federation.pool_size; ++id) {
    auto& cl = s.clients[static_cast<std::size_t>(id)];
    cl.seed = derive_seed(master, {kClientStream, static_cast<std::uint64_t>(id)});
    cl.train = c.federation.benign;
  }
  // attacker k owns timeslice k in time-division mode
  for (std::size_t k = 0; k < s.attacker_ids.size(); ++k) {
    auto& cl = s.clients[static_cast<std::size_t>(s.attacker_ids[k])];
    cl.train = c.federation.malicious;
    const auto& spec = c.attack.mode == AttackMode::Tca ? s.tca_trigger : s.global_trigger.locals[k];
    cl.role = fed::Malicious{spec, c.attack.poison_rate};
  }
  std::vector<int> sorted_attackers = s.attacker_ids;
  std::sort(sorted_attackers.begin(), sorted_attackers.end());
  s.schedule = {c.federation.rounds,        c.federation.pool_size,
                c.federation.clients_per_round, c.federation.warmup_rounds,
                sorted_attackers,           derive_seed(master, {kSelectionStream})};
  return s;
}

/// Metric callback for run_round: MTA on the clean test split, ASR of the
/// global trigger and of each local trigger alone.
inline fed::Evaluator make_evaluator(const ExperimentSetup& s) {
  return [&s](const snn::SnnModel& model, RoundLog& log) {
    log.mta = metrics::compute_mta(model, s.test.samples);
    if (s.global_trigger.locals.empty()) return;
    log.asr_global = metrics::compute_asr(model, s.test.samples, s.global_trigger);
    for (const auto& l : s.global_trigger.locals)
      log.asr_local.push_back(metrics::compute_asr(model, s.test.samples, l));
  };
}

inline ExperimentResult run_prepared(const ExperimentConfig& c, const ExperimentSetup& s) {
  ExperimentResult r;
  r.config_hash = config_hash(c);
  r.pixel_budget = s.pixel_budget;
  r.attacker_ids = s.attacker_ids;
  r.empty_clients = s.plan.empty_clients();
  r.server.global_model = s.initial_model;
  const auto evaluate = make_evaluator(s);
  const fed::RoundOptions options{c.federation.parallel, c.output.wall_time};
  for (int t = 0; t < c.federation.rounds; ++t)
    fed::run_round(r.server, s.schedule, s.clients, s.shards, evaluate, options);

  const std::string meta = "config_hash=" + r.config_hash + " mode=" + to_string(c.attack.mode) +
                           " pixel_budget=" + std::to_string(r.pixel_budget);
  r.csv_text = round_csv(r.server.history, s.global_trigger.locals.size(), meta);
  if (!c.output.dir.empty()) {
    std::filesystem::create_directories(c.output.dir);
    r.csv_path = (std::filesystem::path(c.output.dir) / (c.output.name + ".csv")).string();
    write_text(r.csv_path, r.csv_text);
  }
  return r;
}

/// Build data, partition, clients and triggers from `c`, run every round,
/// and write <output.dir>/<output.name>.csv when an output dir is set.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  const ExperimentSetup setup = prepare_experiment(c);
  return run_prepared(c, setup);
}

/// First round whose global-trigger ASR reaches `threshold`, or -1.
inline int first_round_reaching(std::span<const RoundLog> history, double threshold) {
  for (const auto& r : history)
    if (r.asr_global >= threshold) return r.round;
  return -1;
}

// ---------------------------------------------------------------------------
// Ablations

struct UtilizationRun {
  double level = 0.0;
  double realized = 0.0;  // temporal_utilization of the generated locals
  ExperimentResult result;
};

/// One time-division run per utilization level with shared seeds. Level 0
/// keeps the attackers in the schedule but they train on clean data.
inline std::vector<UtilizationRun> ablate_utilization(const ExperimentConfig& base,
                                                      std::span<const double> levels) {
  std::vector<UtilizationRun> runs;
  std::vector<NamedHistory> merged;
  for (double u : levels) {
    if (!(u >= 0.0 && u <= 1.0)) throw ConfigError("trigger.utilization", "levels must be in [0, 1]");
    ExperimentConfig c = base;
    c.attack.mode = AttackMode::Spikewhisper;
    c.trigger.utilization = u > 0.0 ? u : 1.0;  // validated value; overridden below for 0
    char name[32];
    std::snprintf(name, sizeof(name), "u%03d", static_cast<int>(std::lround(u * 100)));
    c.output.name = base.output.name + "_" + name;
    ExperimentSetup s = prepare_experiment(c);
    if (u == 0.0) {
      auto locals = backdoor::make_time_division_locals(
          s.allocation, c.trigger.geometry, c.trigger.polarities, 0.0, s.test.shape().height,
          s.test.shape().width, c.trigger.target_label);
      s.global_trigger = backdoor::compose_global(s.allocation, std::move(locals));
      s.pixel_budget = 0;
      for (int id : s.attacker_ids) {
        auto& m = std::get<fed::Malicious>(s.clients[static_cast<std::size_t>(id)].role);
        m.poison_rate = 0.0;
      }
    }
    UtilizationRun run;
    run.level = u;
    run.realized = backdoor::temporal_utilization(s.allocation, s.global_trigger.locals);
    run.result = run_prepared(c, s);
    merged.push_back({name, run.result.history()});
    runs.push_back(std::move(run));
  }
  if (!base.output.dir.empty())
    export_plot_data(merged,
                     (std::filesystem::path(base.output.dir) / (base.output.name + "_utilization.csv"))
                         .string());
  return runs;
}

struct GeometryRow {
  int size = 0;
  std::string position;
  std::string type;
  double asr_global = 0.0;
  double mta = 0.0;
};

/// Grid over square trigger sizes, anchors and motion types; reports final
/// global ASR and MTA, analogous to a size/location table.
inline std::vector<GeometryRow> ablate_trigger_geometry(const ExperimentConfig& base,
                                                        std::span<const int> sizes,
                                                        std::span<const backdoor::Anchor> anchors,
                                                        std::span<const backdoor::TriggerType> types) {
  std::vector<GeometryRow> rows;
  for (int size : sizes)
    for (auto anchor : anchors)
      for (auto type : types) {
        ExperimentConfig c = base;
        c.attack.mode = base.attack.mode == AttackMode::None ? AttackMode::Spikewhisper
                                                             : base.attack.mode;
        c.trigger.geometry.height = c.trigger.geometry.width = size;
        c.trigger.geometry.anchor = anchor;
        c.trigger.geometry.type = type;
        GeometryRow row;
        row.size = size;
        row.position = detail::anchor_name(c.trigger.geometry);
        row.type = type == backdoor::TriggerType::Static ? "static" : "moving";
        c.output.name = base.output.name + "_" + std::to_string(size) + "x" + std::to_string(size) +
                        "_" + row.position + "_" + row.type;
        const auto r = run_experiment(c);
        row.asr_global = r.history().back().asr_global;
        row.mta = r.history().back().mta;
        rows.push_back(row);
      }
  if (!base.output.dir.empty()) {
    std::string text = "size,position,type,asr_global,mta\n";
    for (const auto& r : rows)
      text += std::to_string(r.size) + "x" + std::to_string(r.size) + "," + r.position + "," + r.type +
              "," + format_double(r.asr_global) + "," + format_double(r.mta) + "\n";
    write_text((std::filesystem::path(base.output.dir) / (base.output.name + "_geometry.csv")).string(),
               text);
  }
  return rows;
}

}  // namespace fednl::exp
