// Copyright 2026 The privmel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <iostream>

#include "privmel/experiment.hpp"

using namespace privmel;

int main(int argc, char** argv) {
  CLI::App app{
      "privmel - adversarial removal and resynthesis of a sensitive attribute in spoken-digit audio.\n"
      "Pipeline: prepare -> train-vocoder / train-classifiers -> train -> transform / evaluate -> report.\n"
      "Environment: PRIVMEL_OUT_DIR overrides output_dir, OMP_NUM_THREADS selects compute threads."};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "experiment config (JSON)")->required();

  bool force = false;

  auto* prepare = app.add_subcommand("prepare", "ingest raw WAVs, resample/pad, split speakers, write caches");
  prepare->add_flag("--force", force, "rebuild even if the cache is up to date");

  auto* train_vocoder = app.add_subcommand("train-vocoder", "adversarially train the mel-inversion vocoder");
  train_vocoder->add_flag("--force", force, "retrain from scratch");

  auto* train_classifiers =
      app.add_subcommand("train-classifiers", "train and freeze the digit/gender evaluation classifiers");
  train_classifiers->add_flag("--force", force, "retrain from scratch");

  auto* train = app.add_subcommand("train", "train privacy models over the epsilon x seed x mode grid");
  std::string mode;
  double epsilon = -1.0;
  int64_t seed = -1;
  train->add_option("--mode", mode, "single mode (full|baseline) instead of the grid");
  train->add_option("--epsilon", epsilon, "single distortion budget instead of the grid");
  train->add_option("--seed", seed, "single seed instead of the grid");
  train->add_flag("--force", force, "redo completed grid cells");

  auto* transform = app.add_subcommand("transform", "censor input WAVs with a trained checkpoint");
  std::vector<std::string> wavs;
  std::string checkpoint, s_syn = "random", out_dir = "transformed";
  uint64_t rng_seed = 0;
  bool dump_spectrograms = false;
  transform->add_option("wavs", wavs, "input WAV files")->required();
  transform->add_option("--checkpoint", checkpoint, "trained privacy bundle")->required();
  transform->add_option("--s-syn", s_syn, "synthetic attribute: 0, 1 or random (default)");
  transform->add_option("--rng-seed", rng_seed, "seed for noise and random attribute draws");
  transform->add_option("--out-dir", out_dir, "where transformed WAVs go");
  transform->add_flag("--dump-spectrograms", dump_spectrograms, "also write original/m'/m'' images");

  auto* evaluate = app.add_subcommand("evaluate", "evaluate completed runs in both domains");
  std::string runs_filter;
  evaluate->add_option("--runs", runs_filter, "substring filter on run directory names");

  auto* report = app.add_subcommand("report", "aggregate metrics.csv into the trade-off report");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = cli::ExperimentConfig::load(config_path);
    if (prepare->parsed()) return cli::cmd_prepare(cfg, force);
    if (train_vocoder->parsed()) return cli::cmd_train_vocoder(cfg, force);
    if (train_classifiers->parsed()) return cli::cmd_train_classifiers(cfg, force);
    if (train->parsed()) {
      return cli::cmd_train(cfg, mode.empty() ? std::nullopt : std::optional<std::string>(mode),
                            epsilon < 0 ? std::nullopt : std::optional<double>(epsilon),
                            seed < 0 ? std::nullopt : std::optional<uint64_t>(static_cast<uint64_t>(seed)), force);
    }
    if (transform->parsed()) {
      return cli::cmd_transform(cfg, wavs, checkpoint, s_syn, rng_seed, out_dir, dump_spectrograms);
    }
    if (evaluate->parsed()) return cli::cmd_evaluate(cfg, runs_filter);
    if (report->parsed()) return cli::cmd_report(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CompatibilityError& e) {
    std::cerr << "compatibility error: " << e.what() << "\n";
    return kExitCompatibility;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
