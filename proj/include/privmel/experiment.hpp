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

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "privmel/evaluation.hpp"
#include "privmel/privacy_training.hpp"
#include "privmel/vocoder.hpp"

namespace privmel::cli {

// Declarative experiment description, loaded from a JSON document whose
// sections mirror the typed configs. The grid spans epsilon x seed x mode.
struct ExperimentConfig {
  std::string dataset_root;
  std::string metadata_path;
  std::string out_dir;
  uint64_t split_seed = 0;
  dataset::SplitSpec split;

  spectral::SpectralConfig spectral;
  training::TrainConfig train;  // epsilon/seed/mode come from the grid
  vocoder::VocoderConfig vocoder_cfg;
  evaluation::ClassifierTrainConfig classifiers;

  std::vector<double> grid_epsilons = {0.005, 0.01, 0.05, 0.1};
  std::vector<uint64_t> grid_seeds = {0, 1, 2, 3, 4};
  std::vector<std::string> grid_modes = {"baseline", "full"};

  int eval_sample_cap = 400;              // clips per set for audio-domain metrics (0 = all)
  std::string eval_vocoder = "griffinlim";  // griffinlim | melgan

  void validate_grid() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);  // honors PRIVMEL_OUT_DIR
};

std::string run_dir_name(double epsilon, uint64_t seed, const std::string& mode);

// prepare: load raw WAVs, resample/pad, split speakers, write the clip
// caches and normalization stats. Re-running on unchanged inputs is a
// no-op keyed on a content hash.
int cmd_prepare(const ExperimentConfig& cfg, bool force);

int cmd_train_vocoder(const ExperimentConfig& cfg, bool force);
int cmd_train_classifiers(const ExperimentConfig& cfg, bool force);

// train: run every grid cell, or the single cell selected by the
// optional overrides. Completed cells are skipped unless forced;
// interrupted cells resume from their latest checkpoint.
int cmd_train(const ExperimentConfig& cfg, std::optional<std::string> mode, std::optional<double> epsilon,
              std::optional<uint64_t> seed, bool force);

int cmd_transform(const ExperimentConfig& cfg, const std::vector<std::string>& wav_paths,
                  const std::string& checkpoint, const std::string& s_syn_choice, uint64_t rng_seed,
                  const std::string& out_dir, bool dump_spectrograms);

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& runs_filter);
int cmd_report(const ExperimentConfig& cfg);

// Shared by evaluate and the acceptance suite: metrics for one trained
// bundle on a prepared test set.
struct RunEvaluation {
  evaluation::MetricsRecord spectrogram;
  evaluation::MetricsRecord audio;
};
RunEvaluation evaluate_bundle(networks::PrivacyModelBundle& bundle, const std::vector<dataset::AudioClip>& test,
                              evaluation::FixedClassifiers& fc, const spectral::SpectralConfig& scfg,
                              const training::VocoderFn& vocoder_fn, double epsilon, uint64_t seed,
                              int sample_cap);

// Grayscale PGM rendering of a normalized spectrogram, low frequencies at
// the bottom row.
void write_spectrogram_pgm(const std::string& path, const Eigen::MatrixXd& values);

}  // namespace privmel::cli
