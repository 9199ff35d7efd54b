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

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "privmel/optim.hpp"
#include "privmel/serialize.hpp"

namespace privmel::networks {

using nn::ConvGeom;

struct UNetConfig {
  int depth = 4;          // down/up stages
  int base_channels = 64;
  int in_channels = 2;    // spectrogram + noise plane (+ attribute plane for G)
  int out_channels = 1;

  nlohmann::json to_json() const {
    return {{"depth", depth}, {"base_channels", base_channels}, {"in_channels", in_channels},
            {"out_channels", out_channels}};
  }
  static UNetConfig from_json(const nlohmann::json& j) {
    UNetConfig c;
    c.depth = j.at("depth").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.in_channels = j.at("in_channels").get<int>();
    c.out_channels = j.at("out_channels").get<int>();
    return c;
  }
};

struct DiscriminatorConfig {
  int base_channels = 32;  // AlexNet stage widths scale from this
  int hidden = 128;
  int num_classes = 2;  // 2 for the filter critic, 3 (female, male, fake) for the generator critic
  int in_h = 80;
  int in_w = 33;

  nlohmann::json to_json() const {
    return {{"base_channels", base_channels}, {"hidden", hidden}, {"num_classes", num_classes},
            {"in_h", in_h},                   {"in_w", in_w}};
  }
  static DiscriminatorConfig from_json(const nlohmann::json& j) {
    DiscriminatorConfig c;
    c.base_channels = j.at("base_channels").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.in_h = j.at("in_h").get<int>();
    c.in_w = j.at("in_w").get<int>();
    return c;
  }
};

struct AudioNetConfig {
  std::vector<int> channels = {16, 32, 48, 64, 64};
  int pool = 4;  // max-pool factor after every conv stage
  int hidden = 128;
  int num_classes = 10;
  int input_len = 8192;

  nlohmann::json to_json() const {
    return {{"channels", channels}, {"pool", pool}, {"hidden", hidden}, {"num_classes", num_classes},
            {"input_len", input_len}};
  }
  static AudioNetConfig from_json(const nlohmann::json& j) {
    AudioNetConfig c;
    c.channels = j.at("channels").get<std::vector<int>>();
    c.pool = j.at("pool").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.input_len = j.at("input_len").get<int>();
    return c;
  }
};

// U-Net over (N, C, 80, T): two 3x3 conv blocks per stage with instance
// norm and leaky ReLU, max-pool downsampling, transposed-conv upsampling
// with skip concatenation, tanh-bounded 1x1 output head. Time frames are
// zero-padded up to a multiple of 2^depth and cropped back afterwards.
template <typename S>
class UNetT {
 public:
  UNetT() = default;
  UNetT(const std::string& name, UNetConfig cfg, Rng& rng) : cfg_(cfg) {
    ConvGeom k3{3, 3, 1, 1, 1, 1, 1, 1};
    int cin = cfg.in_channels;
    for (int d = 0; d < cfg.depth; ++d) {
      int ch = cfg.base_channels << d;
      enc_a_.emplace_back(name + ".enc" + std::to_string(d) + "a", cin, ch, k3, rng, false, false);
      enc_a_norm_.emplace_back(name + ".enc" + std::to_string(d) + "a.norm", ch);
      enc_b_.emplace_back(name + ".enc" + std::to_string(d) + "b", ch, ch, k3, rng, false, false);
      enc_b_norm_.emplace_back(name + ".enc" + std::to_string(d) + "b.norm", ch);
      cin = ch;
    }
    int mid = cfg.base_channels << cfg.depth;
    mid_a_ = nn::Conv2dT<S>(name + ".mid.a", cin, mid, k3, rng, false, false);
    mid_a_norm_ = nn::InstanceNormT<S>(name + ".mid.a.norm", mid);
    mid_b_ = nn::Conv2dT<S>(name + ".mid.b", mid, mid, k3, rng, false, false);
    mid_b_norm_ = nn::InstanceNormT<S>(name + ".mid.b.norm", mid);
    int up_in = mid;
    for (int d = cfg.depth - 1; d >= 0; --d) {
      int ch = cfg.base_channels << d;
      ConvGeom up{2, 2, 2, 2, 0, 0, 1, 1};
      dec_up_.emplace_back(name + ".dec" + std::to_string(d) + ".up", up_in, ch, up, rng);
      dec_a_.emplace_back(name + ".dec" + std::to_string(d) + "a", 2 * ch, ch, k3, rng, false, false);
      dec_a_norm_.emplace_back(name + ".dec" + std::to_string(d) + "a.norm", ch);
      dec_b_.emplace_back(name + ".dec" + std::to_string(d) + "b", ch, ch, k3, rng, false, false);
      dec_b_norm_.emplace_back(name + ".dec" + std::to_string(d) + "b.norm", ch);
      up_in = ch;
    }
    head_ = nn::Conv2dT<S>(name + ".head", up_in, cfg.out_channels, ConvGeom{1, 1, 1, 1, 0, 0, 1, 1}, rng);
  }

  // inputs: already-concatenated (N, in_channels, H, T)
  typename nn::GraphT<S>::Node* forward(nn::GraphT<S>& g, typename nn::GraphT<S>::Node* x, bool train) {
    const auto& shape = x->value.shape;
    if (shape.size() != 4 || shape[1] != cfg_.in_channels) {
      throw DimensionError("U-Net expects (N," + std::to_string(cfg_.in_channels) + ",H,T), got " +
                           x->value.shape_str());
    }
    int64_t H = shape[2], T = shape[3];
    int64_t m = int64_t(1) << cfg_.depth;
    int64_t ph = (m - H % m) % m;
    int64_t pw = (m - T % m) % m;
    auto* h = (ph || pw) ? g.pad_hw(x, static_cast<int>(ph), static_cast<int>(pw)) : x;

    std::vector<typename nn::GraphT<S>::Node*> skips;
    for (int d = 0; d < cfg_.depth; ++d) {
      h = g.leaky_relu(enc_a_norm_[d].forward(g, enc_a_[d].forward(g, h, train), train), S(0.2));
      h = g.leaky_relu(enc_b_norm_[d].forward(g, enc_b_[d].forward(g, h, train), train), S(0.2));
      skips.push_back(h);
      h = g.max_pool2d(h, 2, 2);
    }
    h = g.leaky_relu(mid_a_norm_.forward(g, mid_a_.forward(g, h, train), train), S(0.2));
    h = g.leaky_relu(mid_b_norm_.forward(g, mid_b_.forward(g, h, train), train), S(0.2));
    for (int i = 0; i < cfg_.depth; ++i) {
      int d = cfg_.depth - 1 - i;
      h = dec_up_[static_cast<size_t>(i)].forward(g, h, train);
      h = g.concat_channels(skips[static_cast<size_t>(d)], h);
      h = g.leaky_relu(dec_a_norm_[static_cast<size_t>(i)].forward(g, dec_a_[static_cast<size_t>(i)].forward(g, h, train), train), S(0.2));
      h = g.leaky_relu(dec_b_norm_[static_cast<size_t>(i)].forward(g, dec_b_[static_cast<size_t>(i)].forward(g, h, train), train), S(0.2));
    }
    h = g.tanh_(head_.forward(g, h, train));
    if (ph || pw) h = g.crop_hw(h, H, T);
    return h;
  }

  std::vector<nn::ParamT<S>*> params() {
    std::vector<nn::ParamT<S>*> ps;
    for (size_t d = 0; d < enc_a_.size(); ++d) {
      nn::append_params(ps, enc_a_[d].params());
      nn::append_params(ps, enc_a_norm_[d].params());
      nn::append_params(ps, enc_b_[d].params());
      nn::append_params(ps, enc_b_norm_[d].params());
    }
    nn::append_params(ps, mid_a_.params());
    nn::append_params(ps, mid_a_norm_.params());
    nn::append_params(ps, mid_b_.params());
    nn::append_params(ps, mid_b_norm_.params());
    for (size_t i = 0; i < dec_up_.size(); ++i) {
      nn::append_params(ps, dec_up_[i].params());
      nn::append_params(ps, dec_a_[i].params());
      nn::append_params(ps, dec_a_norm_[i].params());
      nn::append_params(ps, dec_b_[i].params());
      nn::append_params(ps, dec_b_norm_[i].params());
    }
    nn::append_params(ps, head_.params());
    return ps;
  }

  const UNetConfig& config() const { return cfg_; }

 private:
  UNetConfig cfg_;
  std::vector<nn::Conv2dT<S>> enc_a_, enc_b_;
  std::vector<nn::InstanceNormT<S>> enc_a_norm_, enc_b_norm_;
  nn::Conv2dT<S> mid_a_, mid_b_;
  nn::InstanceNormT<S> mid_a_norm_, mid_b_norm_;
  std::vector<nn::ConvTranspose2dT<S>> dec_up_;
  std::vector<nn::Conv2dT<S>> dec_a_, dec_b_;
  std::vector<nn::InstanceNormT<S>> dec_a_norm_, dec_b_norm_;
  nn::Conv2dT<S> head_;
};

// AlexNet-style spectrogram classifier/critic: five convolution stages
// (max-pool after the first, second and fifth) and two dense layers.
template <typename S>
class SpectrogramNetT {
 public:
  SpectrogramNetT() = default;
  SpectrogramNetT(const std::string& name, DiscriminatorConfig cfg, Rng& rng) : cfg_(cfg) {
    int c = cfg.base_channels;
    ConvGeom k5{5, 5, 1, 1, 2, 2, 1, 1};
    ConvGeom k3{3, 3, 1, 1, 1, 1, 1, 1};
    conv_.emplace_back(name + ".conv1", 1, c, k5, rng, false, false);
    conv_.emplace_back(name + ".conv2", c, 2 * c, k3, rng, false, false);
    conv_.emplace_back(name + ".conv3", 2 * c, 3 * c, k3, rng, false, false);
    conv_.emplace_back(name + ".conv4", 3 * c, 3 * c, k3, rng, false, false);
    conv_.emplace_back(name + ".conv5", 3 * c, 2 * c, k3, rng, false, false);
    for (int i = 0; i < 5; ++i) {
      int ch = (i == 0 ? c : i == 1 ? 2 * c : i == 4 ? 2 * c : 3 * c);
      norm_.emplace_back(name + ".norm" + std::to_string(i + 1), ch);
    }
    int64_t h = cfg.in_h / 8, w = cfg.in_w / 8;  // three 2x2 max-pools, floor division
    flat_dim_ = 2 * c * h * w;
    fc1_ = nn::LinearT<S>(name + ".fc1", flat_dim_, cfg.hidden, rng);
    fc2_ = nn::LinearT<S>(name + ".fc2", cfg.hidden, cfg.num_classes, rng);
  }

  typename nn::GraphT<S>::Node* forward_logits(nn::GraphT<S>& g, typename nn::GraphT<S>::Node* x, bool train) {
    const auto& s = x->value.shape;
    if (s.size() != 4 || s[1] != 1 || s[2] != cfg_.in_h || s[3] != cfg_.in_w) {
      throw DimensionError("spectrogram net expects (N,1," + std::to_string(cfg_.in_h) + "," +
                           std::to_string(cfg_.in_w) + "), got " + x->value.shape_str());
    }
    auto* h = x;
    for (int i = 0; i < 5; ++i) {
      h = g.leaky_relu(norm_[static_cast<size_t>(i)].forward(g, conv_[static_cast<size_t>(i)].forward(g, h, train), train), S(0.2));
      if (i == 0 || i == 1 || i == 4) h = g.max_pool2d(h, 2, 2);
    }
    h = g.reshape(h, {s[0], flat_dim_});
    h = g.leaky_relu(fc1_.forward(g, h, train), S(0.2));
    return fc2_.forward(g, h, train);
  }

  typename nn::GraphT<S>::Node* forward_probs(nn::GraphT<S>& g, typename nn::GraphT<S>::Node* x, bool train) {
    return g.softmax(forward_logits(g, x, train));
  }

  std::vector<nn::ParamT<S>*> params() {
    std::vector<nn::ParamT<S>*> ps;
    for (size_t i = 0; i < conv_.size(); ++i) {
      nn::append_params(ps, conv_[i].params());
      nn::append_params(ps, norm_[i].params());
    }
    nn::append_params(ps, fc1_.params());
    nn::append_params(ps, fc2_.params());
    return ps;
  }

  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  std::vector<nn::Conv2dT<S>> conv_;
  std::vector<nn::InstanceNormT<S>> norm_;
  nn::LinearT<S> fc1_, fc2_;
  int64_t flat_dim_ = 0;
};

// Raw-waveform classifier in the AudioNet mold: stacked 1-d convolutions
// with max-pooling, a dense head, and access to the last convolution map
// as a fixed-size embedding for the Frechet realism score.
template <typename S>
class AudioNetT {
 public:
  AudioNetT() = default;
  AudioNetT(const std::string& name, AudioNetConfig cfg, Rng& rng) : cfg_(cfg) {
    int cin = 1;
    int64_t len = cfg.input_len;
    for (size_t i = 0; i < cfg.channels.size(); ++i) {
      ConvGeom k{1, 9, 1, 1, 0, 4, 1, 1};
      conv_.emplace_back(name + ".conv" + std::to_string(i), cin, cfg.channels[i], k, rng, false, false);
      norm_.emplace_back(name + ".norm" + std::to_string(i), cfg.channels[i]);
      cin = cfg.channels[i];
      len /= cfg.pool;
    }
    embed_dim_ = cin * len;
    fc1_ = nn::LinearT<S>(name + ".fc1", embed_dim_, cfg.hidden, rng);
    fc2_ = nn::LinearT<S>(name + ".fc2", cfg.hidden, cfg.num_classes, rng);
  }

  // x: (N, 1, 1, input_len)
  typename nn::GraphT<S>::Node* last_conv_map(nn::GraphT<S>& g, typename nn::GraphT<S>::Node* x, bool train) {
    const auto& s = x->value.shape;
    if (s.size() != 4 || s[1] != 1 || s[2] != 1 || s[3] != cfg_.input_len) {
      throw DimensionError("audio net expects (N,1,1," + std::to_string(cfg_.input_len) + "), got " +
                           x->value.shape_str());
    }
    auto* h = x;
    for (size_t i = 0; i < conv_.size(); ++i) {
      h = g.leaky_relu(norm_[i].forward(g, conv_[i].forward(g, h, train), train), S(0.2));
      h = g.max_pool2d(h, 1, cfg_.pool);
    }
    return h;
  }

  typename nn::GraphT<S>::Node* forward_logits(nn::GraphT<S>& g, typename nn::GraphT<S>::Node* x, bool train) {
    auto* h = last_conv_map(g, x, train);
    h = g.reshape(h, {x->value.shape[0], embed_dim_});
    h = g.leaky_relu(fc1_.forward(g, h, train), S(0.2));
    return fc2_.forward(g, h, train);
  }

  typename nn::GraphT<S>::Node* forward_probs(nn::GraphT<S>& g, typename nn::GraphT<S>::Node* x, bool train) {
    return g.softmax(forward_logits(g, x, train));
  }

  // Flattened last-convolution features; dimension is constant for the
  // configured input length.
  typename nn::GraphT<S>::Node* embed(nn::GraphT<S>& g, typename nn::GraphT<S>::Node* x) {
    auto* h = last_conv_map(g, x, false);
    return g.reshape(h, {x->value.shape[0], embed_dim_});
  }

  int64_t embed_dim() const { return embed_dim_; }

  std::vector<nn::ParamT<S>*> params() {
    std::vector<nn::ParamT<S>*> ps;
    for (size_t i = 0; i < conv_.size(); ++i) {
      nn::append_params(ps, conv_[i].params());
      nn::append_params(ps, norm_[i].params());
    }
    nn::append_params(ps, fc1_.params());
    nn::append_params(ps, fc2_.params());
    return ps;
  }

  const AudioNetConfig& config() const { return cfg_; }

 private:
  AudioNetConfig cfg_;
  std::vector<nn::Conv2dT<S>> conv_;
  std::vector<nn::InstanceNormT<S>> norm_;
  nn::LinearT<S> fc1_, fc2_;
  int64_t embed_dim_ = 0;
};

using UNet = UNetT<float>;
using SpectrogramNet = SpectrogramNetT<float>;
using AudioNet = AudioNetT<float>;

// Everything the privacy transform needs: filter, optional generator,
// both critics, configuration snapshot and normalization fingerprint.
struct PrivacyModelBundle {
  std::string mode = "full";  // full | baseline
  UNetConfig filter_cfg;
  UNetConfig generator_cfg;
  DiscriminatorConfig disc_filter_cfg;
  DiscriminatorConfig disc_gen_cfg;
  uint64_t spectral_fingerprint = 0;
  double norm_mean = 0.0;
  double norm_scale = 1.0;
  int64_t step = 0;
  int64_t epoch = 0;
  std::string rng_state;  // training RNG serialized for exact resume

  std::optional<UNet> filter;
  std::optional<UNet> generator;
  std::optional<SpectrogramNet> disc_filter;
  std::optional<SpectrogramNet> disc_gen;

  bool has_generator() const { return mode == "full"; }
  std::vector<nn::ParamT<float>*> all_params();
  nlohmann::json meta() const;
};

PrivacyModelBundle make_privacy_bundle(const std::string& mode, const UNetConfig& filter_cfg,
                                       const UNetConfig& gen_cfg, const DiscriminatorConfig& df_cfg,
                                       const DiscriminatorConfig& dg_cfg, uint64_t spectral_fingerprint,
                                       double norm_mean, double norm_scale, uint64_t init_seed);

void save_privacy_bundle(const std::string& path, PrivacyModelBundle& bundle,
                         const nlohmann::json& extra_meta = {});
PrivacyModelBundle load_privacy_bundle(const std::string& path);

// Forward helpers shared by training and transform. Noise enters as a
// full-resolution channel; the synthetic attribute as a constant plane at
// -1 (female) or +1 (male).
nn::Tensor spectrogram_batch(const std::vector<Eigen::MatrixXf>& mels);  // (N,1,80,T)
nn::Tensor noise_like(const nn::Tensor& x, Rng& rng);
nn::Tensor attribute_plane(const nn::Tensor& like, const std::vector<int>& s_syn);

nn::Graph::Node* filter_forward(nn::Graph& g, UNet& filter, nn::Graph::Node* m, nn::Graph::Node* z1, bool train);
nn::Graph::Node* generator_forward(nn::Graph& g, UNet& gen, nn::Graph::Node* m_prime, nn::Graph::Node* s_plane,
                                   nn::Graph::Node* z2, bool train);

}  // namespace privmel::networks
