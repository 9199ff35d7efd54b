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
#include <optional>
#include <string>
#include <vector>

#include "privmel/dataset.hpp"
#include "privmel/networks.hpp"
#include "privmel/spectral.hpp"

namespace privmel::vocoder {

struct VocoderConfig {
  std::vector<int> upsample_factors = {8, 8, 2, 2};  // product must equal the hop
  int base_channels = 64;                            // width before the first upsample, halved per stage
  int residual_blocks = 3;                           // dilations 1, 3, 9
  int num_discriminators = 3;
  int disc_downsample_factor = 2;  // average-pool factor between scales
  int disc_base_channels = 16;
  double feature_match_weight = 10.0;  // gamma
  double lr_generator = 1e-4;
  double lr_discriminator = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  int batch_size = 16;
  int total_steps = 2000;
  int checkpoint_interval_steps = 500;
  uint64_t seed = 0;

  void validate(const spectral::SpectralConfig& scfg) const;
  nlohmann::json to_json() const;
  static VocoderConfig from_json(const nlohmann::json& j);
};

// Feed-forward mel-to-waveform generator: an input convolution, one
// transposed convolution per upsampling factor with dilated residual
// blocks after each, and a tanh-bounded output convolution. All
// convolutions are weight-norm reparameterized. Audio runs through the 2-d
// machinery as (N, C, 1, L).
class MelGenerator {
 public:
  MelGenerator() = default;
  MelGenerator(const std::string& name, const VocoderConfig& cfg, int n_mels, Rng& rng);

  // (N, 1, n_mels, T) -> (N, 1, 1, T * hop)
  nn::Graph::Node* forward(nn::Graph& g, nn::Graph::Node* mel, bool train);

  std::vector<nn::ParamT<float>*> params();

 private:
  struct ResBlock {
    nn::Conv2dT<float> dilated, pointwise;
  };
  nn::Conv2dT<float> conv_in_;
  std::vector<nn::ConvTranspose2dT<float>> ups_;
  std::vector<std::vector<ResBlock>> res_;
  nn::Conv2dT<float> conv_out_;
};

// One discriminator scale: strided convolution stack producing a score
// map; every intermediate activation is exposed for feature matching.
class AudioDiscriminator {
 public:
  AudioDiscriminator() = default;
  AudioDiscriminator(const std::string& name, int base_channels, Rng& rng);

  struct Output {
    nn::Graph::Node* score = nullptr;               // (N, 1, 1, L')
    std::vector<nn::Graph::Node*> features;         // intermediate maps
  };
  Output forward(nn::Graph& g, nn::Graph::Node* x, bool train);

  std::vector<nn::ParamT<float>*> params();

 private:
  std::vector<nn::Conv2dT<float>> convs_;
  nn::Conv2dT<float> head_;
};

struct VocoderBundle {
  VocoderConfig cfg;
  spectral::SpectralConfig spectral_cfg;
  uint64_t norm_fingerprint = 0;  // SpectralConfig + normalization stats
  double norm_mean = 0.0;
  double norm_scale = 1.0;
  int64_t step = 0;
  std::string rng_state;

  std::optional<MelGenerator> generator;
  std::vector<AudioDiscriminator> discriminators;

  std::vector<nn::ParamT<float>*> all_params();
  nlohmann::json meta() const;
};

VocoderBundle make_vocoder_bundle(const VocoderConfig& cfg, const spectral::SpectralConfig& scfg,
                                  const spectral::NormStats& stats, uint64_t init_seed);

void save_vocoder_bundle(const std::string& path, VocoderBundle& bundle, const nlohmann::json& extra = {});
VocoderBundle load_pretrained(const std::string& path);

// Deterministic inversion of a normalized mel spectrogram. Refuses input
// whose normalization fingerprint differs from the training-time one.
// Output: exactly target_len samples in [-1, 1].
std::vector<double> vocode(const spectral::MelSpectrogram& mspec, VocoderBundle& bundle,
                           int64_t target_len = dataset::kTargetLen);

// Average-pool the waveform k-1 times by the configured factor: the view
// discriminator k sees.
nn::Tensor pooled_view(const nn::Tensor& audio, int k, int factor);

// Standard hinge pieces: mean(max(0, 1-d)) over real scores and
// mean(max(0, 1+d)) over fake scores.
double hinge_real_value(const nn::Tensor& scores);
double hinge_fake_value(const nn::Tensor& scores);

// Scale-k discriminator hinge loss on raw waveforms (forward only).
double disc_hinge_loss(VocoderBundle& bundle, int k, const nn::Tensor& real, const nn::Tensor& fake);

// Feature-matching distance summed over layers and discriminator scales:
// sum_k sum_i (1/N_i) * ||D_k^i(x) - D_k^i(x_hat)||_1 (forward only).
double feature_matching_loss(VocoderBundle& bundle, const nn::Tensor& real, const nn::Tensor& fake);

struct VocoderStepLog {
  int64_t step = 0;
  double loss_disc = 0.0;
  double loss_gen_adv = 0.0;
  double loss_feature_match = 0.0;
  double probe_spectral_distance = -1.0;  // filled on probe steps
};

struct VocoderTrainResult {
  VocoderBundle bundle;
  std::vector<VocoderStepLog> logs;
};

// Adversarial training: per step the generator minimizes
// sum_k -mean(D_k(G(m))) + gamma * L_FM, then each discriminator scale
// minimizes its hinge loss on (x, G(m)) with the fake batch held constant.
// Probes log the spectral distance between vocode(mel(x)) and x.
VocoderTrainResult train_vocoder(const std::vector<dataset::AudioClip>& clips, const VocoderConfig& cfg,
                                 const spectral::SpectralConfig& scfg, const std::string& run_dir = "",
                                 int probe_interval = 50,
                                 const std::function<void(const VocoderStepLog&)>& progress = {});

}  // namespace privmel::vocoder
