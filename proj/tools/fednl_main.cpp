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

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fednl/experiment.hpp"

namespace {

constexpr int kConfigErrorExit = 2;

using fednl::exp::ExperimentConfig;
using fednl::exp::ExperimentResult;

ExperimentConfig load(const std::string& path, std::optional<std::uint64_t> seed,
                      const std::string& out_dir) {
  auto c = fednl::exp::load_config(path);
  if (seed) c.federation.seed = *seed;
  if (!out_dir.empty()) c.output.dir = out_dir;
  return c;
}

void report(const ExperimentConfig& c, const ExperimentResult& r) {
  for (int id : r.empty_clients)
    std::cerr << "warning: client " << id << " received no samples\n";
  const auto& last = r.history().back();
  std::printf("mode=%s rounds=%zu pixel_budget=%zu config_hash=%s\n",
              fednl::exp::to_string(c.attack.mode).c_str(), r.history().size(), r.pixel_budget,
              r.config_hash.c_str());
  std::printf("final: mta=%.4f asr_global=%.4f", last.mta, last.asr_global);
  for (std::size_t i = 0; i < last.asr_local.size(); ++i)
    std::printf(" asr_local_%zu=%.4f", i, last.asr_local[i]);
  std::printf(" loss=%.5f\n", last.mean_train_loss);
  if (!r.csv_path.empty()) std::printf("wrote %s\n", r.csv_path.c_str());
}

fednl::backdoor::Anchor parse_anchor(const std::string& s) {
  if (s == "bottom-right") return fednl::backdoor::Anchor::BottomRight;
  if (s == "middle") return fednl::backdoor::Anchor::Middle;
  if (s == "top-left") return fednl::backdoor::Anchor::TopLeft;
  throw fednl::ConfigError("--positions", "unknown position '" + s + "'");
}

// "path,label" per line
fednl::data::LabeledDataset import_events(const std::string& list_path, int frames, int classes) {
  std::ifstream in(list_path);
  if (!in) throw fednl::FormatError("cannot open " + list_path);
  const auto base = std::filesystem::path(list_path).parent_path();
  fednl::data::LabeledDataset ds{{}, classes};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw fednl::FormatError("list: expected 'path,label'");
    std::filesystem::path file = line.substr(0, comma);
    if (file.is_relative()) file = base / file;
    const int label = std::stoi(line.substr(comma + 1));
    const auto stream = fednl::data::read_event_stream(file.string());
    ds.samples.push_back({fednl::data::integrate_events(stream, frames), label});
  }
  ds.validate();
  return ds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated neuromorphic learning simulator with time-division backdoor attacks"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (INI)")->required();
    cmd->add_option("--seed", seed, "override federation.seed");
    cmd->add_option("--out", out_dir, "override output.dir");
  };

  auto* train = app.add_subcommand("train", "clean federated training (attack disabled)");
  add_common(train);
  auto* attack = app.add_subcommand("attack", "federated training with the configured attack");
  add_common(attack);

  auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
  ablate->require_subcommand(1);
  auto* abl_util = ablate->add_subcommand("utilization", "sweep temporal utilization");
  add_common(abl_util);
  std::vector<double> levels{0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  abl_util->add_option("--levels", levels, "utilization levels in [0,1]");
  auto* abl_geom = ablate->add_subcommand("geometry", "sweep trigger size, position and motion");
  add_common(abl_geom);
  std::vector<int> sizes{1, 2, 3};
  std::vector<std::string> positions{"bottom-right", "middle", "top-left"};
  std::vector<std::string> types{"static", "moving"};
  abl_geom->add_option("--sizes", sizes, "square trigger sizes");
  abl_geom->add_option("--positions", positions, "bottom-right|middle|top-left");
  abl_geom->add_option("--types", types, "static|moving");

  auto* exporter = app.add_subcommand("export-plots", "merge per-run round CSVs into one file");
  std::string in_dir, out_file;
  exporter->add_option("--in", in_dir, "directory of round CSVs")->required();
  exporter->add_option("--out", out_file, "combined CSV path")->required();

  auto* importer = app.add_subcommand("import-events", "integrate event text files into an FNLD dataset");
  std::string list_path, dataset_out;
  int frames = 12, classes = 10;
  importer->add_option("--list", list_path, "file with 'events_path,label' lines")->required();
  importer->add_option("--frames", frames, "frames per sample");
  importer->add_option("--classes", classes, "class count");
  importer->add_option("--out", dataset_out, "output .fnld path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed() || attack->parsed()) {
      auto c = load(config_path, seed, out_dir);
      if (train->parsed()) c.attack.mode = fednl::exp::AttackMode::None;
      else if (c.attack.mode == fednl::exp::AttackMode::None)
        throw fednl::ConfigError("attack.mode", "attack needs mode spikewhisper or tca");
      const auto r = fednl::exp::run_experiment(c);
      report(c, r);
      if (!c.output.dir.empty()) {
        const auto model_path = std::filesystem::path(c.output.dir) / (c.output.name + ".fnlm");
        fednl::snn::write_model(r.server.global_model, model_path.string());
      }
    } else if (abl_util->parsed()) {
      const auto c = load(config_path, seed, out_dir);
      const auto runs = fednl::exp::ablate_utilization(c, levels);
      std::printf("level,realized_u,final_asr_global,final_mta,first_round_asr90\n");
      for (const auto& r : runs)
        std::printf("%.4f,%.4f,%.4f,%.4f,%d\n", r.level, r.realized,
                    r.result.history().back().asr_global, r.result.history().back().mta,
                    fednl::exp::first_round_reaching(r.result.history(), 0.9));
    } else if (abl_geom->parsed()) {
      const auto c = load(config_path, seed, out_dir);
      std::vector<fednl::backdoor::Anchor> anchors;
      for (const auto& p : positions) anchors.push_back(parse_anchor(p));
      std::vector<fednl::backdoor::TriggerType> kinds;
      for (const auto& t : types) {
        if (t == "static") kinds.push_back(fednl::backdoor::TriggerType::Static);
        else if (t == "moving") kinds.push_back(fednl::backdoor::TriggerType::Moving);
        else throw fednl::ConfigError("--types", "unknown type '" + t + "'");
      }
      const auto rows = fednl::exp::ablate_trigger_geometry(c, sizes, anchors, kinds);
      std::printf("size,position,type,asr_global,mta\n");
      for (const auto& r : rows)
        std::printf("%dx%d,%s,%s,%.4f,%.4f\n", r.size, r.size, r.position.c_str(), r.type.c_str(),
                    r.asr_global, r.mta);
    } else if (exporter->parsed()) {
      const auto runs = fednl::exp::collect_round_csvs(in_dir);
      fednl::exp::export_plot_data(runs, out_file);
      std::printf("merged %zu runs into %s\n", runs.size(), out_file.c_str());
    } else if (importer->parsed()) {
      const auto ds = import_events(list_path, frames, classes);
      fednl::data::write_dataset(ds, dataset_out);
      std::printf("wrote %zu samples to %s\n", ds.samples.size(), dataset_out.c_str());
    }
  } catch (const fednl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigErrorExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
