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

#include "privmel/vocoder.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "privmel/optim.hpp"

namespace privmel::vocoder {

namespace fs = std::filesystem;
using nn::ConvGeom;

void VocoderConfig::validate(const spectral::SpectralConfig& scfg) const {
  int prod = 1;
  for (int f : upsample_factors) {
    if (f < 2 || f % 2 != 0) throw ConfigError("upsample factors must be even and at least 2");
    prod *= f;
  }
  if (prod != scfg.hop) {
    throw ConfigError("upsample factors multiply to " + std::to_string(prod) + ", need hop " +
                      std::to_string(scfg.hop));
  }
  if (num_discriminators < 1) throw ConfigError("need at least one discriminator");
  if (feature_match_weight < 0) throw ConfigError("feature_match_weight must be non-negative");
  if (base_channels < 4) throw ConfigError("base_channels too small");
}

nlohmann::json VocoderConfig::to_json() const {
  return {{"upsample_factors", upsample_factors},
          {"base_channels", base_channels},
          {"residual_blocks", residual_blocks},
          {"num_discriminators", num_discriminators},
          {"disc_downsample_factor", disc_downsample_factor},
          {"disc_base_channels", disc_base_channels},
          {"feature_match_weight", feature_match_weight},
          {"lr_generator", lr_generator},
          {"lr_discriminator", lr_discriminator},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"batch_size", batch_size},
          {"total_steps", total_steps},
          {"checkpoint_interval_steps", checkpoint_interval_steps},
          {"seed", seed}};
}

VocoderConfig VocoderConfig::from_json(const nlohmann::json& j) {
  VocoderConfig c;
  c.upsample_factors = j.value("upsample_factors", c.upsample_factors);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
  c.num_discriminators = j.value("num_discriminators", c.num_discriminators);
  c.disc_downsample_factor = j.value("disc_downsample_factor", c.disc_downsample_factor);
  c.disc_base_channels = j.value("disc_base_channels", c.disc_base_channels);
  c.feature_match_weight = j.value("feature_match_weight", c.feature_match_weight);
  c.lr_generator = j.value("lr_generator", c.lr_generator);
  c.lr_discriminator = j.value("lr_discriminator", c.lr_discriminator);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.checkpoint_interval_steps = j.value("checkpoint_interval_steps", c.checkpoint_interval_steps);
  c.seed = j.value("seed", c.seed);
  return c;
}

MelGenerator::MelGenerator(const std::string& name, const VocoderConfig& cfg, int n_mels, Rng& rng) {
  int ch = cfg.base_channels;
  conv_in_ = nn::Conv2dT<float>(name + ".in", n_mels, ch, ConvGeom{1, 7, 1, 1, 0, 3, 1, 1}, rng, true);
  for (size_t i = 0; i < cfg.upsample_factors.size(); ++i) {
    int r = cfg.upsample_factors[i];
    int next = std::max(ch / 2, 4);
    ups_.emplace_back(name + ".up" + std::to_string(i), ch, next, ConvGeom{1, 2 * r, 1, r, 0, r / 2, 1, 1}, rng,
                      true);
    std::vector<ResBlock> blocks;
    int dil = 1;
    for (int b = 0; b < cfg.residual_blocks; ++b) {
      ResBlock rb;
      rb.dilated = nn::Conv2dT<float>(name + ".res" + std::to_string(i) + "_" + std::to_string(b) + "d", next,
                                      next, ConvGeom{1, 3, 1, 1, 0, dil, 1, dil}, rng, true);
      rb.pointwise = nn::Conv2dT<float>(name + ".res" + std::to_string(i) + "_" + std::to_string(b) + "p", next,
                                        next, ConvGeom{1, 1, 1, 1, 0, 0, 1, 1}, rng, true);
      blocks.push_back(std::move(rb));
      dil *= 3;
    }
    res_.push_back(std::move(blocks));
    ch = next;
  }
  conv_out_ = nn::Conv2dT<float>(name + ".out", ch, 1, ConvGeom{1, 7, 1, 1, 0, 3, 1, 1}, rng, true);
}

nn::Graph::Node* MelGenerator::forward(nn::Graph& g, nn::Graph::Node* mel, bool train) {
  const auto& s = mel->value.shape;
  if (s.size() != 4 || s[1] != 1) throw DimensionError("vocoder expects (N,1,n_mels,T), got " + mel->value.shape_str());
  // mel rows become channels of a 1-d sequence
  auto* h = g.reshape(mel, {s[0], s[2], 1, s[3]});
  h = conv_in_.forward(g, h, train);
  for (size_t i = 0; i < ups_.size(); ++i) {
    h = g.leaky_relu(h, 0.2f);
    h = ups_[i].forward(g, h, train);
    for (auto& rb : res_[i]) {
      auto* inner = g.leaky_relu(h, 0.2f);
      inner = rb.dilated.forward(g, inner, train);
      inner = g.leaky_relu(inner, 0.2f);
      inner = rb.pointwise.forward(g, inner, train);
      h = g.add(h, inner);
    }
  }
  h = g.leaky_relu(h, 0.2f);
  return g.tanh_(conv_out_.forward(g, h, train));
}

std::vector<nn::ParamT<float>*> MelGenerator::params() {
  std::vector<nn::ParamT<float>*> ps;
  nn::append_params(ps, conv_in_.params());
  for (size_t i = 0; i < ups_.size(); ++i) {
    nn::append_params(ps, ups_[i].params());
    for (auto& rb : res_[i]) {
      nn::append_params(ps, rb.dilated.params());
      nn::append_params(ps, rb.pointwise.params());
    }
  }
  nn::append_params(ps, conv_out_.params());
  return ps;
}

AudioDiscriminator::AudioDiscriminator(const std::string& name, int c, Rng& rng) {
  convs_.emplace_back(name + ".c0", 1, c, ConvGeom{1, 15, 1, 1, 0, 7, 1, 1}, rng, true);
  convs_.emplace_back(name + ".c1", c, 2 * c, ConvGeom{1, 21, 1, 4, 0, 10, 1, 1}, rng, true);
  convs_.emplace_back(name + ".c2", 2 * c, 4 * c, ConvGeom{1, 21, 1, 4, 0, 10, 1, 1}, rng, true);
  convs_.emplace_back(name + ".c3", 4 * c, 4 * c, ConvGeom{1, 21, 1, 4, 0, 10, 1, 1}, rng, true);
  convs_.emplace_back(name + ".c4", 4 * c, 4 * c, ConvGeom{1, 5, 1, 1, 0, 2, 1, 1}, rng, true);
  head_ = nn::Conv2dT<float>(name + ".head", 4 * c, 1, ConvGeom{1, 3, 1, 1, 0, 1, 1, 1}, rng, true);
}

AudioDiscriminator::Output AudioDiscriminator::forward(nn::Graph& g, nn::Graph::Node* x, bool train) {
  Output out;
  auto* h = x;
  for (auto& conv : convs_) {
    h = g.leaky_relu(conv.forward(g, h, train), 0.2f);
    out.features.push_back(h);
  }
  out.score = head_.forward(g, h, train);
  return out;
}

std::vector<nn::ParamT<float>*> AudioDiscriminator::params() {
  std::vector<nn::ParamT<float>*> ps;
  for (auto& c : convs_) nn::append_params(ps, c.params());
  nn::append_params(ps, head_.params());
  return ps;
}

std::vector<nn::ParamT<float>*> VocoderBundle::all_params() {
  std::vector<nn::ParamT<float>*> ps = generator->params();
  for (auto& d : discriminators) nn::append_params(ps, d.params());
  return ps;
}

nlohmann::json VocoderBundle::meta() const {
  return {{"type", "vocoder_bundle"},
          {"version", 1},
          {"config", cfg.to_json()},
          {"spectral", {{"window_size", spectral_cfg.window_size},
                        {"hop", spectral_cfg.hop},
                        {"n_mels", spectral_cfg.n_mels},
                        {"fmin", spectral_cfg.fmin},
                        {"fmax", spectral_cfg.fmax},
                        {"log_floor", spectral_cfg.log_floor},
                        {"griffin_lim_iters", spectral_cfg.griffin_lim_iters},
                        {"sample_rate", spectral_cfg.sample_rate}}},
          {"norm_fingerprint", norm_fingerprint},
          {"norm_mean", norm_mean},
          {"norm_scale", norm_scale},
          {"step", step},
          {"rng_state", rng_state}};
}

VocoderBundle make_vocoder_bundle(const VocoderConfig& cfg, const spectral::SpectralConfig& scfg,
                                  const spectral::NormStats& stats, uint64_t init_seed) {
  cfg.validate(scfg);
  VocoderBundle b;
  b.cfg = cfg;
  b.spectral_cfg = scfg;
  b.norm_mean = stats.mean;
  b.norm_scale = stats.scale;
  spectral::MelSpectrogram probe;
  probe.norm_mean = stats.mean;
  probe.norm_scale = stats.scale;
  b.norm_fingerprint = probe.stats_fingerprint(scfg);
  Rng rng(init_seed);
  b.generator.emplace("V", cfg, scfg.n_mels, rng);
  for (int k = 0; k < cfg.num_discriminators; ++k) {
    b.discriminators.emplace_back("VD" + std::to_string(k), cfg.disc_base_channels, rng);
  }
  return b;
}

void save_vocoder_bundle(const std::string& path, VocoderBundle& bundle, const nlohmann::json& extra) {
  nlohmann::json meta = bundle.meta();
  for (auto& [k, v] : extra.items()) meta[k] = v;
  auto params = bundle.all_params();
  std::vector<const nn::ParamT<float>*> cps(params.begin(), params.end());
  nn::save_checkpoint<float>(path, meta, cps);
}

VocoderBundle load_pretrained(const std::string& path) {
  nlohmann::json meta = nn::load_checkpoint_meta(path);
  if (meta.value("type", "") != "vocoder_bundle") {
    throw CompatibilityError("checkpoint is not a vocoder bundle (type '" + meta.value("type", "?") + "'): " +
                             path);
  }
  VocoderConfig cfg = VocoderConfig::from_json(meta.at("config"));
  spectral::SpectralConfig scfg;
  const auto& sj = meta.at("spectral");
  scfg.window_size = sj.at("window_size").get<int>();
  scfg.hop = sj.at("hop").get<int>();
  scfg.n_mels = sj.at("n_mels").get<int>();
  scfg.fmin = sj.at("fmin").get<double>();
  scfg.fmax = sj.at("fmax").get<double>();
  scfg.log_floor = sj.at("log_floor").get<double>();
  scfg.griffin_lim_iters = sj.at("griffin_lim_iters").get<int>();
  scfg.sample_rate = sj.at("sample_rate").get<int>();
  spectral::NormStats stats{meta.at("norm_mean").get<double>(), meta.at("norm_scale").get<double>()};
  VocoderBundle b = make_vocoder_bundle(cfg, scfg, stats, 0);
  auto params = b.all_params();
  nn::load_checkpoint<float>(path, params, "vocoder_bundle");
  b.step = meta.value("step", int64_t(0));
  b.rng_state = meta.value("rng_state", std::string());
  return b;
}

namespace {

nn::Tensor mel_to_tensor(const Eigen::MatrixXf& m) {
  nn::Tensor t({1, 1, m.rows(), m.cols()});
  for (int64_t r = 0; r < m.rows(); ++r)
    for (int64_t c = 0; c < m.cols(); ++c) t[r * m.cols() + c] = m(r, c);
  return t;
}

}  // namespace

std::vector<double> vocode(const spectral::MelSpectrogram& mspec, VocoderBundle& bundle, int64_t target_len) {
  uint64_t fp = mspec.stats_fingerprint(bundle.spectral_cfg);
  if (fp != bundle.norm_fingerprint) {
    std::ostringstream os;
    os << "mel spectrogram normalization does not match the vocoder (spectrogram fingerprint " << std::hex << fp
       << ", vocoder fingerprint " << bundle.norm_fingerprint << ")";
    throw CompatibilityError(os.str());
  }
  nn::Tensor mel = mel_to_tensor(mspec.values.cast<float>());
  nn::Graph g;
  auto* wave = bundle.generator->forward(g, g.input(mel), false);
  int64_t produced = wave->value.shape[3];
  std::vector<double> out(static_cast<size_t>(target_len), 0.0);
  int64_t n = std::min(target_len, produced);
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = wave->value[i];
  return out;
}

nn::Tensor pooled_view(const nn::Tensor& audio, int k, int factor) {
  if (k <= 1) return audio;
  nn::Graph g;
  auto* node = g.input(audio);
  for (int i = 1; i < k; ++i) node = g.avg_pool_w(node, 2 * factor, factor, factor / 2);
  return node->value;
}

double hinge_real_value(const nn::Tensor& scores) {
  double acc = 0.0;
  for (float v : scores.data) acc += std::max(0.0, 1.0 - static_cast<double>(v));
  return acc / static_cast<double>(scores.numel());
}

double hinge_fake_value(const nn::Tensor& scores) {
  double acc = 0.0;
  for (float v : scores.data) acc += std::max(0.0, 1.0 + static_cast<double>(v));
  return acc / static_cast<double>(scores.numel());
}

double disc_hinge_loss(VocoderBundle& bundle, int k, const nn::Tensor& real, const nn::Tensor& fake) {
  if (k < 1 || k > static_cast<int>(bundle.discriminators.size())) throw ConfigError("discriminator index out of range");
  if (real.shape != fake.shape) throw DimensionError("disc_hinge_loss length mismatch");
  nn::Graph g;
  auto rview = pooled_view(real, k, bundle.cfg.disc_downsample_factor);
  auto fview = pooled_view(fake, k, bundle.cfg.disc_downsample_factor);
  auto ro = bundle.discriminators[static_cast<size_t>(k - 1)].forward(g, g.input(rview), false);
  auto fo = bundle.discriminators[static_cast<size_t>(k - 1)].forward(g, g.input(fview), false);
  return hinge_real_value(ro.score->value) + hinge_fake_value(fo.score->value);
}

double feature_matching_loss(VocoderBundle& bundle, const nn::Tensor& real, const nn::Tensor& fake) {
  if (real.shape != fake.shape) throw DimensionError("feature_matching_loss length mismatch");
  double total = 0.0;
  for (int k = 1; k <= static_cast<int>(bundle.discriminators.size()); ++k) {
    nn::Graph g;
    auto rview = pooled_view(real, k, bundle.cfg.disc_downsample_factor);
    auto fview = pooled_view(fake, k, bundle.cfg.disc_downsample_factor);
    auto ro = bundle.discriminators[static_cast<size_t>(k - 1)].forward(g, g.input(rview), false);
    auto fo = bundle.discriminators[static_cast<size_t>(k - 1)].forward(g, g.input(fview), false);
    for (size_t i = 0; i < ro.features.size(); ++i) {
      auto* d = g.mean_abs_diff(ro.features[i], fo.features[i]);
      total += d->value[0];
    }
  }
  return total;
}

VocoderTrainResult train_vocoder(const std::vector<dataset::AudioClip>& clips, const VocoderConfig& cfg,
                                 const spectral::SpectralConfig& scfg, const std::string& run_dir,
                                 int probe_interval,
                                 const std::function<void(const VocoderStepLog&)>& progress) {
  cfg.validate(scfg);
  if (clips.empty()) throw DataError("train_vocoder: no clips");
  for (const auto& c : clips) {
    if (c.sample_rate != scfg.sample_rate || static_cast<int>(c.samples.size()) != dataset::kTargetLen) {
      throw DataError("train_vocoder expects prepared clips: " + c.path);
    }
  }

  int64_t n = static_cast<int64_t>(clips.size());
  std::vector<Eigen::MatrixXd> linear(clips.size());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    linear[static_cast<size_t>(i)] = spectral::mel_of_samples(clips[static_cast<size_t>(i)].samples, scfg);
  }
  auto stats = spectral::compute_corpus_stats(linear, scfg);
  std::vector<Eigen::MatrixXf> mels(clips.size());
  for (size_t i = 0; i < clips.size(); ++i) {
    mels[i] = spectral::normalize(linear[i], stats, scfg).values.cast<float>();
  }

  VocoderBundle bundle = make_vocoder_bundle(cfg, scfg, stats, cfg.seed);
  nn::AdamT<float> opt_g(cfg.lr_generator, cfg.adam_beta1, cfg.adam_beta2);
  nn::AdamT<float> opt_d(cfg.lr_discriminator, cfg.adam_beta1, cfg.adam_beta2);
  Rng rng(cfg.seed + 0x51ed2701d3a5u);

  fs::path ckdir;
  if (!run_dir.empty()) {
    ckdir = fs::path(run_dir) / "checkpoints";
    fs::create_directories(ckdir);
    fs::path latest = ckdir / "latest.bin";
    if (fs::exists(latest)) {
      VocoderBundle restored = load_pretrained(latest.string());
      nlohmann::json meta = nn::load_checkpoint_meta(latest.string());
      // the step budget may grow on resume; everything else must match
      nlohmann::json saved = VocoderConfig::from_json(meta.at("config")).to_json();
      nlohmann::json current = cfg.to_json();
      saved.erase("total_steps");
      current.erase("total_steps");
      if (saved != current) {
        throw CompatibilityError("vocoder run directory holds a different config: " + latest.string());
      }
      bundle = std::move(restored);
      opt_g.t = meta.at("adam_t_gen").get<int64_t>();
      opt_d.t = meta.at("adam_t_disc").get<int64_t>();
      std::istringstream is(bundle.rng_state);
      is >> rng;
      if (!is) throw DataError("corrupt RNG state in vocoder checkpoint");
    }
  }

  auto save = [&]() {
    if (run_dir.empty()) return;
    std::ostringstream os;
    os << rng;
    bundle.rng_state = os.str();
    nlohmann::json extra{{"adam_t_gen", opt_g.t}, {"adam_t_disc", opt_d.t}};
    char name[64];
    std::snprintf(name, sizeof(name), "vocoder_step%06lld.bin", static_cast<long long>(bundle.step));
    fs::path named = ckdir / name;
    save_vocoder_bundle(named.string(), bundle, extra);
    fs::copy_file(named, ckdir / "latest.bin.tmp", fs::copy_options::overwrite_existing);
    fs::rename(ckdir / "latest.bin.tmp", ckdir / "latest.bin");
  };

  auto gen_params = bundle.generator->params();
  std::vector<nn::ParamT<float>*> disc_params;
  for (auto& d : bundle.discriminators) nn::append_params(disc_params, d.params());

  const int64_t probe_count = std::min<int64_t>(6, n);
  int diverged_streak = 0;
  std::vector<VocoderStepLog> logs;

  while (bundle.step < cfg.total_steps) {
    std::vector<int64_t> idx(static_cast<size_t>(std::min<int64_t>(cfg.batch_size, n)));
    for (auto& i : idx) i = static_cast<int64_t>(rng() % static_cast<uint64_t>(n));
    int64_t nb = static_cast<int64_t>(idx.size());

    nn::Tensor m({nb, 1, scfg.n_mels, mels.front().cols()});
    nn::Tensor x({nb, 1, 1, dataset::kTargetLen});
    for (int64_t i = 0; i < nb; ++i) {
      const auto& mm = mels[static_cast<size_t>(idx[static_cast<size_t>(i)])];
      for (int64_t r = 0; r < mm.rows(); ++r)
        for (int64_t c = 0; c < mm.cols(); ++c) m[i * mm.size() + r * mm.cols() + c] = mm(r, c);
      const auto& ss = clips[static_cast<size_t>(idx[static_cast<size_t>(i)])].samples;
      for (int64_t j = 0; j < dataset::kTargetLen; ++j)
        x[i * dataset::kTargetLen + j] = static_cast<float>(ss[static_cast<size_t>(j)]);
    }

    VocoderStepLog log;
    log.step = bundle.step;

    // generator step: adversarial term plus feature matching, critics frozen
    nn::Tensor fake_value;
    {
      nn::zero_grads(gen_params);
      nn::Graph g;
      auto* fake = bundle.generator->forward(g, g.input(m), true);
      fake = g.crop_hw(fake, 1, dataset::kTargetLen);
      auto* real = g.input(x);
      nn::Graph::Node* loss = nullptr;
      for (int k = 1; k <= cfg.num_discriminators; ++k) {
        auto* rv = real;
        auto* fv = fake;
        for (int i = 1; i < k; ++i) {
          rv = g.avg_pool_w(rv, 2 * cfg.disc_downsample_factor, cfg.disc_downsample_factor,
                            cfg.disc_downsample_factor / 2);
          fv = g.avg_pool_w(fv, 2 * cfg.disc_downsample_factor, cfg.disc_downsample_factor,
                            cfg.disc_downsample_factor / 2);
        }
        auto fo = bundle.discriminators[static_cast<size_t>(k - 1)].forward(g, fv, false);
        auto ro = bundle.discriminators[static_cast<size_t>(k - 1)].forward(g, rv, false);
        auto* adv = g.scale(g.mean_all(fo.score), -1.0f);
        loss = loss ? g.add(loss, adv) : adv;
        log.loss_gen_adv += adv->value[0];
        for (size_t i = 0; i < fo.features.size(); ++i) {
          auto* fm = g.mean_abs_diff(ro.features[i], fo.features[i]);
          log.loss_feature_match += fm->value[0];
          loss = g.add(loss, g.scale(fm, static_cast<float>(cfg.feature_match_weight)));
        }
      }
      g.backward(loss);
      opt_g.step(gen_params);
      fake_value = fake->value;
    }

    // discriminator step on the pre-update fake batch
    {
      nn::zero_grads(disc_params);
      nn::Graph g;
      auto* real = g.input(x);
      auto* fake = g.input(fake_value);
      nn::Graph::Node* loss = nullptr;
      for (int k = 1; k <= cfg.num_discriminators; ++k) {
        auto* rv = real;
        auto* fv = fake;
        for (int i = 1; i < k; ++i) {
          rv = g.avg_pool_w(rv, 2 * cfg.disc_downsample_factor, cfg.disc_downsample_factor,
                            cfg.disc_downsample_factor / 2);
          fv = g.avg_pool_w(fv, 2 * cfg.disc_downsample_factor, cfg.disc_downsample_factor,
                            cfg.disc_downsample_factor / 2);
        }
        auto ro = bundle.discriminators[static_cast<size_t>(k - 1)].forward(g, rv, true);
        auto fo = bundle.discriminators[static_cast<size_t>(k - 1)].forward(g, fv, true);
        // standard hinge: mean(max(0, 1-D(x))) + mean(max(0, 1+D(x_hat)))
        auto* lr = g.mean_all(g.relu(g.add_const(g.scale(ro.score, -1.0f), 1.0f)));
        auto* lf = g.mean_all(g.relu(g.add_const(fo.score, 1.0f)));
        auto* lk = g.add(lr, lf);
        loss = loss ? g.add(loss, lk) : lk;
      }
      log.loss_disc = loss->value[0];
      g.backward(loss);
      opt_d.step(disc_params);
    }

    if (!std::isfinite(log.loss_disc) || !std::isfinite(log.loss_gen_adv) ||
        !std::isfinite(log.loss_feature_match)) {
      throw NumericError("vocoder training fault at step " + std::to_string(bundle.step));
    }
    diverged_streak = (log.loss_disc > 1e3) ? diverged_streak + 1 : 0;
    if (diverged_streak > 50) {
      throw NumericError("vocoder training diverged: discriminator loss above 1e3 for 50 consecutive steps at step " +
                         std::to_string(bundle.step));
    }

    ++bundle.step;

    if (probe_interval > 0 && (bundle.step % probe_interval == 0 || bundle.step == cfg.total_steps)) {
      double acc = 0.0;
      for (int64_t i = 0; i < probe_count; ++i) {
        spectral::MelSpectrogram ms;
        ms.values = mels[static_cast<size_t>(i)].cast<double>();
        ms.norm_mean = stats.mean;
        ms.norm_scale = stats.scale;
        ms.source_rate = scfg.sample_rate;
        auto wave = vocode(ms, bundle);
        acc += spectral::spectral_distance(wave, clips[static_cast<size_t>(i)].samples, scfg);
      }
      log.probe_spectral_distance = acc / static_cast<double>(probe_count);
    }

    if (progress) progress(log);
    logs.push_back(log);

    if (!run_dir.empty() &&
        (bundle.step % cfg.checkpoint_interval_steps == 0 || bundle.step == cfg.total_steps)) {
      save();
    }
  }
  return {std::move(bundle), std::move(logs)};
}

}  // namespace privmel::vocoder
