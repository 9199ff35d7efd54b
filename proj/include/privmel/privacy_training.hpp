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

#include <functional>
#include <string>
#include <vector>

#include "privmel/dataset.hpp"
#include "privmel/networks.hpp"
#include "privmel/spectral.hpp"

namespace privmel::training {

struct TrainConfig {
  double lr_filter = 4e-4;
  double lr_generator = 4e-4;
  double lr_disc_filter = 4e-4;
  double lr_disc_gen = 4e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  double lambda_penalty = 100.0;
  double epsilon = 0.01;  // distortion budget, swept over {0.005, 0.01, 0.05, 0.1}
  int epochs = 1000;
  int batch_size = 64;
  std::string mode = "full";  // full | baseline (generator and its critic excluded)
  // The published pseudo-code, its minimax objective and its prose name
  // three different generator CE targets; the synthetic attribute is the
  // one that matches the stated goal, the others stay selectable.
  std::string gen_label_mode = "synthetic";  // synthetic | original | fake
  uint64_t seed = 0;
  int checkpoint_interval_epochs = 10;

  networks::UNetConfig filter_net{4, 64, 2, 1};
  networks::UNetConfig generator_net{4, 64, 3, 1};
  int disc_base_channels = 32;
  int disc_hidden = 128;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct StepLog {
  int64_t step = 0;
  double loss_filter = 0.0;
  double loss_generator = 0.0;
  double loss_disc_filter = 0.0;
  double loss_disc_gen = 0.0;
  double mean_distortion_filter = 0.0;
  double mean_distortion_generator = 0.0;
};

// lambda * max(mean_d - epsilon, 0)^2; the quadratic relaxation of the
// distortion constraint. Exactly zero on and below the budget.
double distortion_penalty(double mean_d, double epsilon, double lambda);

template <typename S>
struct LossValue {
  double loss = 0.0;
  double mean_distortion = 0.0;
  double cross_entropy = 0.0;
};

// L_F = -CE(D_F(F(m,z1)), s) + lambda*max(mean_d(m',m) - eps, 0)^2.
// Gradients reach only the filter parameters; the critic is frozen.
// Returns the censored spectrograms through m_prime_out when non-null.
template <typename S>
LossValue<S> filter_loss(networks::UNetT<S>& filter, networks::SpectrogramNetT<S>& disc_filter,
                         const nn::TensorT<S>& m, const nn::TensorT<S>& z1, const std::vector<int>& s,
                         double epsilon, double lambda, bool do_backward, nn::TensorT<S>* m_prime_out = nullptr) {
  nn::GraphT<S> g;
  auto* m_in = g.input(m);
  auto* m_prime = filter.forward(g, g.concat_channels(m_in, g.input(z1)), do_backward);
  auto* logits = disc_filter.forward_logits(g, m_prime, false);
  auto* ce = g.cross_entropy_logits(logits, s);
  auto* dist = g.mean_abs_diff(m_prime, m_in);
  auto* loss = g.add(g.scale(ce, S(-1)), g.scale(g.squared_hinge_above(dist, static_cast<S>(epsilon)),
                                                 static_cast<S>(lambda)));
  if (do_backward) g.backward(loss);
  if (m_prime_out) *m_prime_out = m_prime->value;
  return {static_cast<double>(loss->value[0]), static_cast<double>(dist->value[0]),
          static_cast<double>(ce->value[0])};
}

// L_G = CE(D_G(G(m', s_syn, z2)), target) + lambda*max(mean_d(m'', m) - eps, 0)^2
// with the distortion measured against the *original* spectrogram. m' is a
// constant here: filter gradients never flow through the generator loss.
template <typename S>
LossValue<S> generator_loss(networks::UNetT<S>& generator, networks::SpectrogramNetT<S>& disc_gen,
                            const nn::TensorT<S>& m, const nn::TensorT<S>& m_prime, const std::vector<int>& s,
                            const std::vector<int>& s_syn, const nn::TensorT<S>& z2, double epsilon, double lambda,
                            const std::string& label_mode, bool do_backward,
                            nn::TensorT<S>* m_dprime_out = nullptr) {
  std::vector<int> target;
  if (label_mode == "synthetic") {
    target = s_syn;
  } else if (label_mode == "original") {
    target = s;
  } else if (label_mode == "fake") {
    target.assign(s_syn.size(), 2);
  } else {
    throw ConfigError("gen_label_mode must be synthetic|original|fake, got '" + label_mode + "'");
  }
  nn::GraphT<S> g;
  auto* m_in = g.input(m);
  auto* mp = g.input(m_prime);
  nn::TensorT<S> plane_t({m.shape[0], 1, m.shape[2], m.shape[3]});
  int64_t hw = m.shape[2] * m.shape[3];
  for (int64_t i = 0; i < m.shape[0]; ++i) {
    S v = s_syn[static_cast<size_t>(i)] == 1 ? S(1) : S(-1);
    for (int64_t j = 0; j < hw; ++j) plane_t[i * hw + j] = v;
  }
  auto* stacked = g.concat_channels(g.concat_channels(mp, g.input(plane_t)), g.input(z2));
  auto* m_dprime = generator.forward(g, stacked, do_backward);
  auto* logits = disc_gen.forward_logits(g, m_dprime, false);
  auto* ce = g.cross_entropy_logits(logits, target);
  auto* dist = g.mean_abs_diff(m_dprime, m_in);
  auto* loss = g.add(ce, g.scale(g.squared_hinge_above(dist, static_cast<S>(epsilon)), static_cast<S>(lambda)));
  if (do_backward) g.backward(loss);
  if (m_dprime_out) *m_dprime_out = m_dprime->value;
  return {static_cast<double>(loss->value[0]), static_cast<double>(dist->value[0]),
          static_cast<double>(ce->value[0])};
}

// L_DF = CE(D_F(m'), s); the censored batch enters as a constant.
template <typename S>
LossValue<S> disc_filter_loss(networks::SpectrogramNetT<S>& disc_filter, const nn::TensorT<S>& m_prime,
                              const std::vector<int>& s, bool do_backward) {
  nn::GraphT<S> g;
  auto* logits = disc_filter.forward_logits(g, g.input(m_prime), do_backward);
  auto* loss = g.cross_entropy_logits(logits, s);
  if (do_backward) g.backward(loss);
  return {static_cast<double>(loss->value[0]), 0.0, static_cast<double>(loss->value[0])};
}

// L_DG = CE(D_G(m''), fake) + CE(D_G(m), s) with the fake class at index 2.
template <typename S>
LossValue<S> disc_generator_loss(networks::SpectrogramNetT<S>& disc_gen, const nn::TensorT<S>& m,
                                 const nn::TensorT<S>& m_dprime, const std::vector<int>& s, bool do_backward) {
  std::vector<int> fake(s.size(), 2);
  nn::GraphT<S> g;
  auto* fake_logits = disc_gen.forward_logits(g, g.input(m_dprime), do_backward);
  auto* real_logits = disc_gen.forward_logits(g, g.input(m), do_backward);
  auto* loss = g.add(g.cross_entropy_logits(fake_logits, fake), g.cross_entropy_logits(real_logits, s));
  if (do_backward) g.backward(loss);
  return {static_cast<double>(loss->value[0]), 0.0, static_cast<double>(loss->value[0])};
}

// Precomputed training tensors: normalized mel spectrograms and labels.
struct SpectrogramDataset {
  std::vector<Eigen::MatrixXf> mels;  // normalized, n_mels x T
  std::vector<int> gender;
  std::vector<int> digit;
  spectral::NormStats stats;
};

SpectrogramDataset build_spectrogram_dataset(const std::vector<dataset::AudioClip>& clips,
                                             const spectral::SpectralConfig& scfg,
                                             const spectral::NormStats* stats = nullptr);

struct TrainResult {
  networks::PrivacyModelBundle bundle;
  std::vector<StepLog> logs;
};

// Supplementary-algorithm training loop: per step, draw a uniform batch,
// draw z1, z2 ~ N(0,1) and s' ~ U{0,1}, step F and G with Adam, then both
// critics. Writes checkpoints and a metrics CSV into run_dir when given,
// and resumes from the latest checkpoint there if one exists.
TrainResult train(const dataset::DatasetSplit& split, const TrainConfig& cfg, const spectral::SpectralConfig& scfg,
                  const std::string& run_dir = "",
                  const std::function<void(const StepLog&)>& progress = {});

// Same loop over a prebuilt spectrogram dataset (what train() calls after
// the mel pass; exposed for tests and cached pipelines).
TrainResult train_on_spectrograms(const SpectrogramDataset& data, const TrainConfig& cfg,
                                  const spectral::SpectralConfig& scfg, const std::string& run_dir = "",
                                  const std::function<void(const StepLog&)>& progress = {});

using VocoderFn = std::function<std::vector<double>(const spectral::MelSpectrogram&)>;

struct TransformResult {
  spectral::MelSpectrogram m_prime;
  spectral::MelSpectrogram m_dprime;  // equals m_prime for baseline bundles
  std::vector<double> waveform;
  int s_syn = -1;
};

// Full pipeline: STFT -> F -> (G) -> vocoder. s_syn in {0,1}, or -1 to
// draw it from rng. The clip must already be prepared (8 kHz / 8192).
TransformResult transform(const dataset::AudioClip& clip, networks::PrivacyModelBundle& bundle,
                          const spectral::SpectralConfig& scfg, int s_syn, Rng& rng, const VocoderFn& vocoder);

// Batched censoring of normalized spectrograms, forward-only; returns
// (m', m'') tensors of shape (N,1,80,T). For baseline bundles m'' == m'.
std::pair<nn::Tensor, nn::Tensor> transform_spectrograms(networks::PrivacyModelBundle& bundle,
                                                         const std::vector<Eigen::MatrixXf>& mels,
                                                         const std::vector<int>& s_syn, Rng& rng,
                                                         int batch_size = 64);

}  // namespace privmel::training
