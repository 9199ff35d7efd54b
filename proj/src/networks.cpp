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

#include "privmel/networks.hpp"

namespace privmel::networks {

std::vector<nn::ParamT<float>*> PrivacyModelBundle::all_params() {
  std::vector<nn::ParamT<float>*> ps;
  nn::append_params(ps, filter->params());
  if (has_generator()) nn::append_params(ps, generator->params());
  nn::append_params(ps, disc_filter->params());
  if (has_generator()) nn::append_params(ps, disc_gen->params());
  return ps;
}

nlohmann::json PrivacyModelBundle::meta() const {
  return {
      {"type", "privacy_bundle"},
      {"version", 1},
      {"mode", mode},
      {"filter", filter_cfg.to_json()},
      {"generator", generator_cfg.to_json()},
      {"disc_filter", disc_filter_cfg.to_json()},
      {"disc_gen", disc_gen_cfg.to_json()},
      {"spectral_fingerprint", spectral_fingerprint},
      {"norm_mean", norm_mean},
      {"norm_scale", norm_scale},
      {"step", step},
      {"epoch", epoch},
      {"rng_state", rng_state},
  };
}

PrivacyModelBundle make_privacy_bundle(const std::string& mode, const UNetConfig& filter_cfg,
                                       const UNetConfig& gen_cfg, const DiscriminatorConfig& df_cfg,
                                       const DiscriminatorConfig& dg_cfg, uint64_t spectral_fingerprint,
                                       double norm_mean, double norm_scale, uint64_t init_seed) {
  if (mode != "full" && mode != "baseline") throw ConfigError("privacy bundle mode must be full|baseline");
  if (dg_cfg.num_classes != 3) throw ConfigError("generator critic needs 3 classes (female, male, fake)");
  if (df_cfg.num_classes != 2) throw ConfigError("filter critic needs 2 classes");
  PrivacyModelBundle b;
  b.mode = mode;
  b.filter_cfg = filter_cfg;
  b.generator_cfg = gen_cfg;
  b.disc_filter_cfg = df_cfg;
  b.disc_gen_cfg = dg_cfg;
  b.spectral_fingerprint = spectral_fingerprint;
  b.norm_mean = norm_mean;
  b.norm_scale = norm_scale;
  Rng rng(init_seed);
  b.filter.emplace("F", filter_cfg, rng);
  if (b.has_generator()) b.generator.emplace("G", gen_cfg, rng);
  b.disc_filter.emplace("DF", df_cfg, rng);
  if (b.has_generator()) b.disc_gen.emplace("DG", dg_cfg, rng);
  return b;
}

void save_privacy_bundle(const std::string& path, PrivacyModelBundle& bundle, const nlohmann::json& extra_meta) {
  nlohmann::json meta = bundle.meta();
  for (auto& [k, v] : extra_meta.items()) meta[k] = v;
  auto params = bundle.all_params();
  std::vector<const nn::ParamT<float>*> cps(params.begin(), params.end());
  nn::save_checkpoint<float>(path, meta, cps);
}

PrivacyModelBundle load_privacy_bundle(const std::string& path) {
  nlohmann::json meta = nn::load_checkpoint_meta(path);
  if (meta.value("type", "") != "privacy_bundle") {
    throw CompatibilityError("checkpoint is not a privacy bundle: " + path);
  }
  PrivacyModelBundle b = make_privacy_bundle(
      meta.at("mode").get<std::string>(), UNetConfig::from_json(meta.at("filter")),
      UNetConfig::from_json(meta.at("generator")), DiscriminatorConfig::from_json(meta.at("disc_filter")),
      DiscriminatorConfig::from_json(meta.at("disc_gen")), meta.at("spectral_fingerprint").get<uint64_t>(),
      meta.at("norm_mean").get<double>(), meta.at("norm_scale").get<double>(), 0);
  auto params = b.all_params();
  nn::load_checkpoint<float>(path, params, "privacy_bundle");
  b.step = meta.value("step", int64_t(0));
  b.epoch = meta.value("epoch", int64_t(0));
  b.rng_state = meta.value("rng_state", std::string());
  return b;
}

nn::Tensor spectrogram_batch(const std::vector<Eigen::MatrixXf>& mels) {
  if (mels.empty()) throw DataError("empty spectrogram batch");
  int64_t n = static_cast<int64_t>(mels.size());
  int64_t h = mels.front().rows(), w = mels.front().cols();
  nn::Tensor t({n, 1, h, w});
  for (int64_t i = 0; i < n; ++i) {
    if (mels[static_cast<size_t>(i)].rows() != h || mels[static_cast<size_t>(i)].cols() != w) {
      throw DimensionError("spectrogram batch requires uniform shapes");
    }
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) t[i * h * w + r * w + c] = mels[static_cast<size_t>(i)](r, c);
  }
  return t;
}

nn::Tensor noise_like(const nn::Tensor& x, Rng& rng) {
  nn::Tensor z(x.shape);
  for (auto& v : z.data) v = static_cast<float>(privmel::randn(rng));
  return z;
}

nn::Tensor attribute_plane(const nn::Tensor& like, const std::vector<int>& s_syn) {
  const auto& s = like.shape;
  if (s.size() != 4 || static_cast<int64_t>(s_syn.size()) != s[0]) {
    throw DimensionError("attribute plane batch size mismatch");
  }
  nn::Tensor plane({s[0], 1, s[2], s[3]});
  int64_t hw = s[2] * s[3];
  for (int64_t i = 0; i < s[0]; ++i) {
    int v = s_syn[static_cast<size_t>(i)];
    if (v != 0 && v != 1) throw DataError("synthetic attribute must be 0 or 1");
    float plane_val = v == 1 ? 1.0f : -1.0f;
    for (int64_t j = 0; j < hw; ++j) plane[i * hw + j] = plane_val;
  }
  return plane;
}

nn::Graph::Node* filter_forward(nn::Graph& g, UNet& filter, nn::Graph::Node* m, nn::Graph::Node* z1, bool train) {
  return filter.forward(g, g.concat_channels(m, z1), train);
}

nn::Graph::Node* generator_forward(nn::Graph& g, UNet& gen, nn::Graph::Node* m_prime, nn::Graph::Node* s_plane,
                                   nn::Graph::Node* z2, bool train) {
  return gen.forward(g, g.concat_channels(g.concat_channels(m_prime, s_plane), z2), train);
}

}  // namespace privmel::networks
