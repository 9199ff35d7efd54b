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

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "privmel/dataset.hpp"
#include "privmel/networks.hpp"
#include "privmel/privacy_training.hpp"

namespace privmel::evaluation {

struct MetricsRecord {
  double epsilon = 0.0;
  uint64_t seed = 0;
  std::string mode;    // baseline | full
  std::string domain;  // spectrogram | audio
  double privacy_acc = 0.0;  // percent; fixed gender classifier on transformed data
  double utility_acc = 0.0;  // percent; fixed digit classifier on transformed data
  double fid = -1.0;         // audio domain only; -1 marks not-applicable
  double mean_distortion = 0.0;
};

struct EmbeddingStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  int64_t count = 0;
};

struct ClassifierTrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double lr = 1e-3;
  uint64_t seed = 0;
  int spec_base_channels = 12;
  int spec_hidden = 96;
  networks::AudioNetConfig audio_net;  // num_classes overridden per task
  double min_clean_accuracy = 90.0;    // percent, demanded of every fixed classifier
};

// The four frozen evaluation classifiers (digit/gender x spectrogram/audio)
// plus their clean-test accuracies, recorded at training time.
struct FixedClassifiers {
  networks::SpectrogramNet spec_gender;
  networks::SpectrogramNet spec_digit;
  networks::AudioNet audio_gender;
  networks::AudioNet audio_digit;
  double clean_spec_gender = 0.0;
  double clean_spec_digit = 0.0;
  double clean_audio_gender = 0.0;
  double clean_audio_digit = 0.0;
  ClassifierTrainConfig cfg;
  spectral::NormStats stats;  // spectrogram normalization used at training

  uint64_t params_fingerprint();
};

// Trains all four classifiers on the clean training split and validates
// them on the clean test split. Every classifier must beat the
// majority-class rate, and the gender/digit spectrogram classifiers must
// reach cfg.min_clean_accuracy.
FixedClassifiers train_fixed_classifiers(const dataset::DatasetSplit& split, const spectral::SpectralConfig& scfg,
                                         const ClassifierTrainConfig& cfg);

void save_fixed_classifiers(const std::string& path, FixedClassifiers& fc);
FixedClassifiers load_fixed_classifiers(const std::string& path);

// Top-1 accuracy in percent. Empty inputs are an evaluation error.
double accuracy_spectrogram(networks::SpectrogramNet& net, const std::vector<Eigen::MatrixXf>& mels,
                            const std::vector<int>& labels, int batch_size = 64);
double accuracy_audio(networks::AudioNet& net, const std::vector<std::vector<double>>& waves,
                      const std::vector<int>& labels, int batch_size = 32);

// Last-convolution embeddings, one row per clip.
Eigen::MatrixXd embed_audio(networks::AudioNet& net, const std::vector<std::vector<double>>& waves,
                            int batch_size = 32);

// Gaussian fit of embedding rows. With fewer rows than dimensions the
// covariance gets diagonal loading of 1e-6 (and a warning via warn_out).
EmbeddingStats fit_embedding_stats(const Eigen::MatrixXd& rows, std::string* warn_out = nullptr);

// |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}), the matrix square root
// taken of the PSD-symmetrized product sqrt(Sa) Sb sqrt(Sa). Eigenvalues
// above -1e-6 are clamped to zero; anything lower is a numeric error.
double frechet_distance(const EmbeddingStats& a, const EmbeddingStats& b);

// Embeds both sets with the frozen audio digit classifier and returns the
// Frechet distance between the Gaussian fits.
double fid_audio(const std::vector<std::vector<double>>& real_waves,
                 const std::vector<std::vector<double>>& transformed_waves, networks::AudioNet& embedder);

// Aggregated mean/std CSV plus one privacy-vs-utility SVG scatter per
// domain. Returns the paths written.
std::vector<std::string> tradeoff_report(const std::vector<MetricsRecord>& records, const std::string& out_dir);

void append_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

}  // namespace privmel::evaluation
