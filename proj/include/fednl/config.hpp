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

// Experiment configuration: INI sections [dataset] [model] [federation]
// [attack] [trigger] [partition] [output]. Unknown sections or keys are
// rejected; every error names the field as "section.key".

#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fednl/backdoor.hpp"
#include "fednl/common.hpp"
#include "fednl/federation.hpp"
#include "fednl/neuro_data.hpp"
#include "fednl/snn_engine.hpp"

namespace fednl::exp {

enum class AttackMode { None, Spikewhisper, Tca };

struct DatasetBlock {
  std::string path;  // empty: synthetic
  int classes = 4;
  int samples_per_class = 250;
  int height = 16;
  int width = 16;
  double noise_rate = 0.02;
  double test_fraction = 0.2;
  std::optional<std::uint64_t> seed;  // default: derived from the master seed
};

struct ModelBlock {
  int timesteps = 12;
  std::vector<std::size_t> hidden{128};
  int neurons_per_class = 4;
  snn::LifConfig lif;
  double init_gain = 1.0;
};

struct FederationBlock {
  int pool_size = 50;
  int clients_per_round = 10;
  int rounds = 70;
  int warmup_rounds = 10;
  std::uint64_t seed = 1;  // master seed
  fed::TrainParams benign{1e-3, 2, 32};
  fed::TrainParams malicious{2.5e-4, 5, 32};
  bool parallel = false;
};

struct AttackBlock {
  AttackMode mode = AttackMode::None;
  int attackers = 3;
  double poison_rate = 0.3;
};

struct TriggerBlock {
  backdoor::TriggerGeometry geometry;
  std::vector<backdoor::PolarityCode> polarities{backdoor::PolarityCode::P1,
                                                 backdoor::PolarityCode::P2,
                                                 backdoor::PolarityCode::P3};
  int target_label = 0;
  double utilization = 1.0;
};

struct PartitionBlock {
  data::PartitionScheme scheme = data::PartitionScheme::Iid;
  double alpha = 0.5;
};

struct OutputBlock {
  std::string dir;  // empty: no files written
  std::string name = "run";
  bool wall_time = false;  // off keeps CSVs byte-identical across runs
};

struct ExperimentConfig {
  DatasetBlock dataset;
  ModelBlock model;
  FederationBlock federation;
  AttackBlock attack;
  TriggerBlock trigger;
  PartitionBlock partition;
  OutputBlock output;
};

// ---------------------------------------------------------------------------
// text helpers

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

/// "[a, b, c]" or "a,b,c" -> {"a","b","c"}
inline std::vector<std::string> split_list(std::string s) {
  s = trim(s);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw std::invalid_argument("unterminated list");
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list element");
    out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last)
    throw std::invalid_argument("expected a number, got '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("expected true/false, got '" + text + "'");
}

// Reads one section and complains about keys nobody consumed.
class SectionReader {
 public:
  SectionReader(std::string name, const boost::property_tree::ptree* tree)
      : name_(std::move(name)), tree_(tree) {}

  template <typename Fn>
  void read(const std::string& key, Fn&& apply) {
    known_.insert(key);
    if (!tree_) return;
    const auto child = tree_->get_child_optional(key);
    if (!child) return;
    try {
      apply(trim(child->get_value<std::string>()));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(name_ + "." + key, e.what());
    }
  }

  void finish() const {
    if (!tree_) return;
    for (const auto& [key, value] : *tree_)
      if (!known_.count(key)) throw ConfigError(name_ + "." + key, "unknown key");
  }

 private:
  std::string name_;
  const boost::property_tree::ptree* tree_;
  std::set<std::string> known_;
};

inline std::string anchor_name(const backdoor::TriggerGeometry& g) {
  switch (g.anchor) {
    case backdoor::Anchor::BottomRight: return "bottom-right";
    case backdoor::Anchor::Middle: return "middle";
    case backdoor::Anchor::TopLeft: return "top-left";
    case backdoor::Anchor::Explicit:
      return "[" + std::to_string(g.row) + "," + std::to_string(g.col) + "]";
  }
  return {};
}

}  // namespace detail

inline std::string to_string(AttackMode m) {
  switch (m) {
    case AttackMode::None: return "none";
    case AttackMode::Spikewhisper: return "spikewhisper";
    case AttackMode::Tca: return "tca";
  }
  return {};
}

inline AttackMode parse_attack_mode(const std::string& s) {
  if (s == "none") return AttackMode::None;
  if (s == "spikewhisper") return AttackMode::Spikewhisper;
  if (s == "tca") return AttackMode::Tca;
  throw std::invalid_argument("attack mode must be none, spikewhisper or tca");
}

inline void parse_position(const std::string& s, backdoor::TriggerGeometry& g) {
  if (s == "bottom-right") g.anchor = backdoor::Anchor::BottomRight;
  else if (s == "middle") g.anchor = backdoor::Anchor::Middle;
  else if (s == "top-left") g.anchor = backdoor::Anchor::TopLeft;
  else {
    const auto rc = detail::split_list(s);
    if (rc.size() != 2) throw std::invalid_argument("position must be a named anchor or [row,col]");
    g.anchor = backdoor::Anchor::Explicit;
    g.row = detail::parse_number<int>(rc[0]);
    g.col = detail::parse_number<int>(rc[1]);
  }
}

// ---------------------------------------------------------------------------

/// Cross-field checks. Throws ConfigError naming the first offending field.
inline void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* path, const std::string& what) {
    if (!ok) throw ConfigError(path, what);
  };
  const auto& d = c.dataset;
  if (d.path.empty()) {
    require(d.classes >= 2 && d.classes <= data::kSyntheticPatterns, "dataset.classes",
            "must be in [2, " + std::to_string(data::kSyntheticPatterns) + "]");
    require(d.samples_per_class >= 1, "dataset.samples_per_class", "must be >= 1");
    require(d.height >= 8 && d.width >= 8, "dataset.height", "height and width must be >= 8");
    require(d.noise_rate >= 0.0 && d.noise_rate <= 1.0, "dataset.noise_rate", "must be in [0, 1]");
  }
  require(d.test_fraction > 0.0 && d.test_fraction < 1.0, "dataset.test_fraction",
          "must be in (0, 1)");
  const auto& m = c.model;
  require(m.timesteps >= 1, "model.timesteps", "must be >= 1");
  require(m.neurons_per_class >= 1, "model.neurons_per_class", "must be >= 1");
  for (auto h : m.hidden) require(h >= 1, "model.hidden", "layer widths must be >= 1");
  require(m.lif.leak > 0.0 && m.lif.leak <= 1.0, "model.leak", "must be in (0, 1]");
  require(m.lif.threshold > 0.0, "model.threshold", "must be > 0");
  require(m.lif.surrogate_width > 0.0, "model.surrogate_width", "must be > 0");
  require(m.init_gain > 0.0, "model.init_gain", "must be > 0");
  const auto& f = c.federation;
  require(f.pool_size >= 1, "federation.pool_size", "must be >= 1");
  require(f.clients_per_round >= 1 && f.clients_per_round <= f.pool_size,
          "federation.clients_per_round", "must be in [1, pool_size]");
  require(f.rounds >= 1, "federation.rounds", "must be >= 1");
  require(f.warmup_rounds >= 0 && f.warmup_rounds < f.rounds, "federation.warmup_rounds",
          "must be in [0, rounds)");
  for (const auto* p : {&f.benign, &f.malicious}) {
    const char* base = p == &f.benign ? "federation.benign_lr" : "federation.malicious_lr";
    require(p->lr > 0.0, base, "must be > 0");
    require(p->epochs >= 1, p == &f.benign ? "federation.benign_epochs" : "federation.malicious_epochs",
            "must be >= 1");
  }
  require(f.benign.batch_size >= 1, "federation.batch_size", "must be >= 1");
  const auto& a = c.attack;
  require(a.attackers >= 0, "attack.attackers", "must be >= 0");
  if (a.mode != AttackMode::None)
    require(a.attackers >= 1, "attack.attackers", "attack modes need at least one attacker");
  require(a.attackers <= f.clients_per_round, "attack.attackers",
          "must not exceed federation.clients_per_round");
  require(a.attackers <= m.timesteps, "attack.attackers", "must not exceed model.timesteps");
  require(f.pool_size - a.attackers >= f.clients_per_round - a.attackers, "federation.pool_size",
          "benign pool too small");
  require(a.poison_rate >= 0.0 && a.poison_rate <= 1.0, "attack.poison_rate", "must be in [0, 1]");
  const auto& t = c.trigger;
  require(t.geometry.height >= 1 && t.geometry.width >= 1, "trigger.shape", "must be positive");
  require(t.utilization > 0.0 && t.utilization <= 1.0, "trigger.utilization", "must be in (0, 1]");
  if (a.attackers > 0)
    require(static_cast<int>(t.polarities.size()) == a.attackers, "trigger.polarities",
            "need one polarity per attacker timeslice");
  if (d.path.empty()) {
    require(t.target_label >= 0 && t.target_label < d.classes, "trigger.target_label",
            "must be a valid class");
    if (a.attackers > 0) {
      try {
        const auto alloc = backdoor::allocate_equal(m.timesteps, a.attackers);
        backdoor::make_time_division_locals(alloc, t.geometry, t.polarities, t.utilization,
                                            d.height, d.width, t.target_label);
        const auto motion =
            backdoor::resolve_motion(t.geometry, m.timesteps, d.height, d.width);
        backdoor::TriggerSpec full = backdoor::make_local_trigger(
            0, {0, m.timesteps}, backdoor::PolarityCode::P3, motion, t.geometry.height,
            t.geometry.width, t.target_label);
        backdoor::check_trigger_fits(full, m.timesteps, d.height, d.width);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("trigger.position", e.what());
      }
    }
  }
  require(c.partition.alpha > 0.0, "partition.alpha", "must be > 0");
  require(!c.output.name.empty(), "output.name", "must not be empty");
}

inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()), e.message());
  }
  static const std::set<std::string> kSections{"dataset", "model", "federation", "attack",
                                               "trigger", "partition", "output"};
  for (const auto& [name, child] : tree) {
    if (!kSections.count(name)) throw ConfigError(name, "unknown section or top-level key");
    if (child.empty() && !child.data().empty())
      throw ConfigError(name, "keys must live inside a section");
  }
  auto section = [&](const char* name) {
    const auto child = tree.get_child_optional(name);
    return detail::SectionReader(name, child ? &*child : nullptr);
  };
  using detail::parse_bool;
  using detail::parse_number;
  ExperimentConfig c;

  auto ds = section("dataset");
  ds.read("path", [&](const std::string& v) { c.dataset.path = v; });
  ds.read("classes", [&](const std::string& v) { c.dataset.classes = parse_number<int>(v); });
  ds.read("samples_per_class",
          [&](const std::string& v) { c.dataset.samples_per_class = parse_number<int>(v); });
  ds.read("height", [&](const std::string& v) { c.dataset.height = parse_number<int>(v); });
  ds.read("width", [&](const std::string& v) { c.dataset.width = parse_number<int>(v); });
  ds.read("noise_rate", [&](const std::string& v) { c.dataset.noise_rate = parse_number<double>(v); });
  ds.read("test_fraction",
          [&](const std::string& v) { c.dataset.test_fraction = parse_number<double>(v); });
  ds.read("seed", [&](const std::string& v) { c.dataset.seed = parse_number<std::uint64_t>(v); });
  ds.finish();

  auto md = section("model");
  md.read("timesteps", [&](const std::string& v) { c.model.timesteps = parse_number<int>(v); });
  md.read("hidden", [&](const std::string& v) {
    c.model.hidden.clear();
    if (v == "[]" || v == "none") return;
    for (const auto& w : detail::split_list(v)) c.model.hidden.push_back(parse_number<std::size_t>(w));
  });
  md.read("neurons_per_class",
          [&](const std::string& v) { c.model.neurons_per_class = parse_number<int>(v); });
  md.read("leak", [&](const std::string& v) { c.model.lif.leak = parse_number<double>(v); });
  md.read("threshold", [&](const std::string& v) { c.model.lif.threshold = parse_number<double>(v); });
  md.read("reset", [&](const std::string& v) {
    if (v == "hard") c.model.lif.reset = snn::ResetMode::Hard;
    else if (v == "soft") c.model.lif.reset = snn::ResetMode::Soft;
    else throw std::invalid_argument("reset must be hard or soft");
  });
  md.read("u_rest", [&](const std::string& v) { c.model.lif.u_rest = parse_number<double>(v); });
  md.read("surrogate_width",
          [&](const std::string& v) { c.model.lif.surrogate_width = parse_number<double>(v); });
  md.read("init_gain", [&](const std::string& v) { c.model.init_gain = parse_number<double>(v); });
  md.finish();

  auto fd = section("federation");
  auto& f = c.federation;
  fd.read("pool_size", [&](const std::string& v) { f.pool_size = parse_number<int>(v); });
  fd.read("clients_per_round", [&](const std::string& v) { f.clients_per_round = parse_number<int>(v); });
  fd.read("rounds", [&](const std::string& v) { f.rounds = parse_number<int>(v); });
  fd.read("warmup_rounds", [&](const std::string& v) { f.warmup_rounds = parse_number<int>(v); });
  fd.read("seed", [&](const std::string& v) { f.seed = parse_number<std::uint64_t>(v); });
  fd.read("benign_lr", [&](const std::string& v) { f.benign.lr = parse_number<double>(v); });
  fd.read("benign_epochs", [&](const std::string& v) { f.benign.epochs = parse_number<int>(v); });
  fd.read("malicious_lr", [&](const std::string& v) { f.malicious.lr = parse_number<double>(v); });
  fd.read("malicious_epochs", [&](const std::string& v) { f.malicious.epochs = parse_number<int>(v); });
  fd.read("batch_size", [&](const std::string& v) {
    f.benign.batch_size = f.malicious.batch_size = parse_number<int>(v);
  });
  fd.read("parallel", [&](const std::string& v) { f.parallel = parse_bool(v); });
  fd.finish();

  auto at = section("attack");
  at.read("mode", [&](const std::string& v) { c.attack.mode = parse_attack_mode(v); });
  at.read("attackers", [&](const std::string& v) { c.attack.attackers = parse_number<int>(v); });
  at.read("poison_rate", [&](const std::string& v) { c.attack.poison_rate = parse_number<double>(v); });
  at.finish();

  auto tr = section("trigger");
  auto& t = c.trigger;
  tr.read("shape", [&](const std::string& v) {
    const auto hw = detail::split_list(v);
    if (hw.size() != 2) throw std::invalid_argument("shape must be [h,w]");
    t.geometry.height = parse_number<int>(hw[0]);
    t.geometry.width = parse_number<int>(hw[1]);
  });
  tr.read("position", [&](const std::string& v) { parse_position(v, t.geometry); });
  tr.read("type", [&](const std::string& v) {
    if (v == "static") t.geometry.type = backdoor::TriggerType::Static;
    else if (v == "moving") t.geometry.type = backdoor::TriggerType::Moving;
    else throw std::invalid_argument("type must be static or moving");
  });
  tr.read("move_step", [&](const std::string& v) { t.geometry.move_step = parse_number<int>(v); });
  tr.read("polarities", [&](const std::string& v) {
    t.polarities.clear();
    for (const auto& p : detail::split_list(v)) t.polarities.push_back(backdoor::parse_polarity(p));
  });
  tr.read("target_label", [&](const std::string& v) { t.target_label = parse_number<int>(v); });
  tr.read("utilization", [&](const std::string& v) { t.utilization = parse_number<double>(v); });
  tr.finish();

  auto pa = section("partition");
  pa.read("scheme", [&](const std::string& v) {
    if (v == "iid") c.partition.scheme = data::PartitionScheme::Iid;
    else if (v == "dirichlet") c.partition.scheme = data::PartitionScheme::Dirichlet;
    else throw std::invalid_argument("scheme must be iid or dirichlet");
  });
  pa.read("alpha", [&](const std::string& v) { c.partition.alpha = parse_number<double>(v); });
  pa.finish();

  auto out = section("output");
  out.read("dir", [&](const std::string& v) { c.output.dir = v; });
  out.read("name", [&](const std::string& v) { c.output.name = v; });
  out.read("wall_time", [&](const std::string& v) { c.output.wall_time = parse_bool(v); });
  out.finish();

  validate(c);
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("file", "cannot open " + path);
  return parse_config(in);
}

/// Canonical INI rendering; parse_config(to_ini(c)) reproduces c.
inline std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream o;
  const auto& d = c.dataset;
  o << "[dataset]\n";
  if (!d.path.empty()) o << "path = " << d.path << "\n";
  o << "classes = " << d.classes << "\nsamples_per_class = " << d.samples_per_class
    << "\nheight = " << d.height << "\nwidth = " << d.width
    << "\nnoise_rate = " << format_double(d.noise_rate)
    << "\ntest_fraction = " << format_double(d.test_fraction) << "\n";
  if (d.seed) o << "seed = " << *d.seed << "\n";
  const auto& m = c.model;
  o << "\n[model]\ntimesteps = " << m.timesteps << "\nhidden = [";
  for (std::size_t i = 0; i < m.hidden.size(); ++i) o << (i ? "," : "") << m.hidden[i];
  o << "]\nneurons_per_class = " << m.neurons_per_class
    << "\nleak = " << format_double(m.lif.leak) << "\nthreshold = " << format_double(m.lif.threshold)
    << "\nreset = " << (m.lif.reset == snn::ResetMode::Hard ? "hard" : "soft")
    << "\nu_rest = " << format_double(m.lif.u_rest)
    << "\nsurrogate_width = " << format_double(m.lif.surrogate_width)
    << "\ninit_gain = " << format_double(m.init_gain) << "\n";
  const auto& f = c.federation;
  o << "\n[federation]\npool_size = " << f.pool_size << "\nclients_per_round = " << f.clients_per_round
    << "\nrounds = " << f.rounds << "\nwarmup_rounds = " << f.warmup_rounds << "\nseed = " << f.seed
    << "\nbenign_lr = " << format_double(f.benign.lr) << "\nbenign_epochs = " << f.benign.epochs
    << "\nmalicious_lr = " << format_double(f.malicious.lr)
    << "\nmalicious_epochs = " << f.malicious.epochs << "\nbatch_size = " << f.benign.batch_size
    << "\nparallel = " << (f.parallel ? "true" : "false") << "\n";
  o << "\n[attack]\nmode = " << to_string(c.attack.mode) << "\nattackers = " << c.attack.attackers
    << "\npoison_rate = " << format_double(c.attack.poison_rate) << "\n";
  const auto& t = c.trigger;
  o << "\n[trigger]\nshape = [" << t.geometry.height << "," << t.geometry.width
    << "]\nposition = " << detail::anchor_name(t.geometry)
    << "\ntype = " << (t.geometry.type == backdoor::TriggerType::Static ? "static" : "moving")
    << "\nmove_step = " << t.geometry.move_step << "\npolarities = [";
  for (std::size_t i = 0; i < t.polarities.size(); ++i)
    o << (i ? "," : "") << backdoor::to_string(t.polarities[i]);
  o << "]\ntarget_label = " << t.target_label << "\nutilization = " << format_double(t.utilization)
    << "\n";
  o << "\n[partition]\nscheme = "
    << (c.partition.scheme == data::PartitionScheme::Iid ? "iid" : "dirichlet")
    << "\nalpha = " << format_double(c.partition.alpha) << "\n";
  o << "\n[output]\n";
  if (!c.output.dir.empty()) o << "dir = " << c.output.dir << "\n";
  o << "name = " << c.output.name << "\nwall_time = " << (c.output.wall_time ? "true" : "false")
    << "\n";
  return o.str();
}

/// FNV-1a over the canonical rendering, excluding the [output] block.
inline std::string config_hash(const ExperimentConfig& c) {
  ExperimentConfig copy = c;
  copy.output = OutputBlock{};
  copy.federation.parallel = false;  // execution detail; results do not depend on it
  const std::string text = to_ini(copy);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) h = (h ^ ch) * 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fednl::exp
