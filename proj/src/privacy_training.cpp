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

#include "privmel/privacy_training.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace privmel::training {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epsilon <= 0) throw ConfigError("epsilon must be positive");
  if (lambda_penalty <= 0) throw ConfigError("lambda_penalty must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (mode != "full" && mode != "baseline") throw ConfigError("mode must be full|baseline");
  if (gen_label_mode != "synthetic" && gen_label_mode != "original" && gen_label_mode != "fake") {
    throw ConfigError("gen_label_mode must be synthetic|original|fake");
  }
  if (filter_net.in_channels != 2) throw ConfigError("filter takes 2 input channels (spectrogram, noise)");
  if (generator_net.in_channels != 3) {
    throw ConfigError("generator takes 3 input channels (spectrogram, attribute, noise)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr_filter", lr_filter},
          {"lr_generator", lr_generator},
          {"lr_disc_filter", lr_disc_filter},
          {"lr_disc_gen", lr_disc_gen},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"lambda_penalty", lambda_penalty},
          {"epsilon", epsilon},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"mode", mode},
          {"gen_label_mode", gen_label_mode},
          {"seed", seed},
          {"checkpoint_interval_epochs", checkpoint_interval_epochs},
          {"filter_net", filter_net.to_json()},
          {"generator_net", generator_net.to_json()},
          {"disc_base_channels", disc_base_channels},
          {"disc_hidden", disc_hidden}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr_filter = j.value("lr_filter", c.lr_filter);
  c.lr_generator = j.value("lr_generator", c.lr_generator);
  c.lr_disc_filter = j.value("lr_disc_filter", c.lr_disc_filter);
  c.lr_disc_gen = j.value("lr_disc_gen", c.lr_disc_gen);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.lambda_penalty = j.value("lambda_penalty", c.lambda_penalty);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.mode = j.value("mode", c.mode);
  c.gen_label_mode = j.value("gen_label_mode", c.gen_label_mode);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_interval_epochs = j.value("checkpoint_interval_epochs", c.checkpoint_interval_epochs);
  if (j.contains("filter_net")) c.filter_net = networks::UNetConfig::from_json(j["filter_net"]);
  if (j.contains("generator_net")) c.generator_net = networks::UNetConfig::from_json(j["generator_net"]);
  c.disc_base_channels = j.value("disc_base_channels", c.disc_base_channels);
  c.disc_hidden = j.value("disc_hidden", c.disc_hidden);
  return c;
}

double distortion_penalty(double mean_d, double epsilon, double lambda) {
  if (mean_d < 0) throw NumericError("distortion must be non-negative");
  double excess = std::max(mean_d - epsilon, 0.0);
  return lambda * excess * excess;
}

SpectrogramDataset build_spectrogram_dataset(const std::vector<dataset::AudioClip>& clips,
                                             const spectral::SpectralConfig& scfg,
                                             const spectral::NormStats* stats) {
  if (clips.empty()) throw DataError("cannot build a spectrogram dataset from zero clips");
  std::vector<Eigen::MatrixXd> linear(clips.size());
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < static_cast<int64_t>(clips.size()); ++i) {
    linear[static_cast<size_t>(i)] = spectral::mel_of_samples(clips[static_cast<size_t>(i)].samples, scfg);
  }
  SpectrogramDataset out;
  out.stats = stats ? *stats : spectral::compute_corpus_stats(linear, scfg);
  out.mels.resize(clips.size());
  out.gender.resize(clips.size());
  out.digit.resize(clips.size());
  for (size_t i = 0; i < clips.size(); ++i) {
    out.mels[i] = spectral::normalize(linear[i], out.stats, scfg).values.cast<float>();
    out.gender[i] = clips[i].gender;
    out.digit[i] = clips[i].digit;
  }
  return out;
}

namespace {

std::string checkpoint_name(const TrainConfig& cfg, int64_t epoch) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "ckpt_eps%g_seed%llu_%s_epoch%05lld.bin", cfg.epsilon,
                static_cast<unsigned long long>(cfg.seed), cfg.mode.c_str(), static_cast<long long>(epoch));
  return buf;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_from_string(Rng& rng, const std::string& s) {
  std::istringstream is(s);
  is >> rng;
  if (!is) throw DataError("corrupt RNG state in checkpoint");
}

nn::Tensor gather_batch(const std::vector<Eigen::MatrixXf>& mels, const std::vector<int64_t>& idx) {
  int64_t h = mels.front().rows(), w = mels.front().cols();
  nn::Tensor t({static_cast<int64_t>(idx.size()), 1, h, w});
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& m = mels[static_cast<size_t>(idx[i])];
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) t[static_cast<int64_t>(i) * h * w + r * w + c] = m(r, c);
  }
  return t;
}

}  // namespace

TrainResult train(const dataset::DatasetSplit& split, const TrainConfig& cfg, const spectral::SpectralConfig& scfg,
                  const std::string& run_dir, const std::function<void(const StepLog&)>& progress) {
  auto data = build_spectrogram_dataset(split.train, scfg);
  return train_on_spectrograms(data, cfg, scfg, run_dir, progress);
}

TrainResult train_on_spectrograms(const SpectrogramDataset& data, const TrainConfig& cfg,
                                  const spectral::SpectralConfig& scfg, const std::string& run_dir,
                                  const std::function<void(const StepLog&)>& progress) {
  cfg.validate();
  scfg.validate();
  if (data.mels.empty()) throw DataError("empty training set");
  int64_t n = static_cast<int64_t>(data.mels.size());
  int64_t t_frames = data.mels.front().cols();

  networks::DiscriminatorConfig df_cfg;
  df_cfg.base_channels = cfg.disc_base_channels;
  df_cfg.hidden = cfg.disc_hidden;
  df_cfg.num_classes = 2;
  df_cfg.in_h = scfg.n_mels;
  df_cfg.in_w = static_cast<int>(t_frames);
  networks::DiscriminatorConfig dg_cfg = df_cfg;
  dg_cfg.num_classes = 3;

  networks::PrivacyModelBundle bundle =
      networks::make_privacy_bundle(cfg.mode, cfg.filter_net, cfg.generator_net, df_cfg, dg_cfg,
                                    scfg.fingerprint(), data.stats.mean, data.stats.scale, cfg.seed);

  nn::AdamT<float> opt_f(cfg.lr_filter, cfg.adam_beta1, cfg.adam_beta2);
  nn::AdamT<float> opt_g(cfg.lr_generator, cfg.adam_beta1, cfg.adam_beta2);
  nn::AdamT<float> opt_df(cfg.lr_disc_filter, cfg.adam_beta1, cfg.adam_beta2);
  nn::AdamT<float> opt_dg(cfg.lr_disc_gen, cfg.adam_beta1, cfg.adam_beta2);

  Rng rng(cfg.seed + 0x9e3779b97f4a7c15ull);
  int64_t start_epoch = 0;

  fs::path ckdir;
  fs::path metrics_path;
  if (!run_dir.empty()) {
    ckdir = fs::path(run_dir) / "checkpoints";
    fs::create_directories(ckdir);
    metrics_path = fs::path(run_dir) / "metrics.csv";
    fs::path latest = ckdir / "latest.bin";
    if (fs::exists(latest)) {
      networks::PrivacyModelBundle restored = networks::load_privacy_bundle(latest.string());
      nlohmann::json meta = nn::load_checkpoint_meta(latest.string());
      // everything but the stopping point must match; a longer epoch
      // budget is how an interrupted or extended run resumes
      nlohmann::json saved = TrainConfig::from_json(meta.at("train_config")).to_json();
      nlohmann::json current = cfg.to_json();
      saved.erase("epochs");
      current.erase("epochs");
      if (saved != current) {
        throw CompatibilityError("run directory holds a checkpoint trained with a different config: " +
                                 latest.string());
      }
      bundle = std::move(restored);
      opt_f.t = meta.at("adam_t_filter").get<int64_t>();
      opt_g.t = meta.at("adam_t_generator").get<int64_t>();
      opt_df.t = meta.at("adam_t_disc_filter").get<int64_t>();
      opt_dg.t = meta.at("adam_t_disc_gen").get<int64_t>();
      rng_from_string(rng, bundle.rng_state);
      start_epoch = bundle.epoch;
    }
  }

  auto save = [&](int64_t epoch) {
    if (run_dir.empty()) return;
    bundle.epoch = epoch;
    bundle.rng_state = rng_to_string(rng);
    nlohmann::json extra{{"train_config", cfg.to_json()},
                         {"adam_t_filter", opt_f.t},
                         {"adam_t_generator", opt_g.t},
                         {"adam_t_disc_filter", opt_df.t},
                         {"adam_t_disc_gen", opt_dg.t}};
    fs::path named = ckdir / checkpoint_name(cfg, epoch);
    networks::save_privacy_bundle(named.string(), bundle, extra);
    fs::copy_file(named, ckdir / "latest.bin.tmp", fs::copy_options::overwrite_existing);
    fs::rename(ckdir / "latest.bin.tmp", ckdir / "latest.bin");
  };

  std::ofstream metrics;
  if (!run_dir.empty()) {
    bool fresh = !fs::exists(metrics_path) || start_epoch == 0;
    metrics.open(metrics_path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) metrics << "step,loss_F,loss_G,loss_DF,loss_DG,dist_F,dist_G\n";
  }

  const bool full = bundle.has_generator();
  int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<StepLog> logs;

  auto f_params = bundle.filter->params();
  auto df_params = bundle.disc_filter->params();
  std::vector<nn::ParamT<float>*> g_params, dg_params;
  if (full) {
    g_params = bundle.generator->params();
    dg_params = bundle.disc_gen->params();
  }

  for (int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    for (int64_t s = 0; s < steps_per_epoch; ++s) {
      // Draw the batch uniformly at random, then the noise planes and the
      // synthetic attribute.
      std::vector<int64_t> idx(static_cast<size_t>(cfg.batch_size));
      for (auto& i : idx) i = static_cast<int64_t>(rng() % static_cast<uint64_t>(n));
      nn::Tensor m = gather_batch(data.mels, idx);
      std::vector<int> labels(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) labels[i] = data.gender[static_cast<size_t>(idx[i])];
      nn::Tensor z1 = networks::noise_like(m, rng);
      nn::Tensor z2;
      std::vector<int> s_syn(idx.size(), 0);
      if (full) {
        z2 = networks::noise_like(m, rng);
        for (auto& v : s_syn) v = rand_uniform(rng) < 0.5 ? 0 : 1;
      }

      StepLog log;
      log.step = bundle.step;

      nn::Tensor m_prime, m_dprime;
      try {
        nn::zero_grads(f_params);
        auto lf = filter_loss<float>(*bundle.filter, *bundle.disc_filter, m, z1, labels, cfg.epsilon,
                                     cfg.lambda_penalty, true, &m_prime);
        opt_f.step(f_params);
        log.loss_filter = lf.loss;
        log.mean_distortion_filter = lf.mean_distortion;

        if (full) {
          nn::zero_grads(g_params);
          auto lg = generator_loss<float>(*bundle.generator, *bundle.disc_gen, m, m_prime, labels, s_syn, z2,
                                          cfg.epsilon, cfg.lambda_penalty, cfg.gen_label_mode, true, &m_dprime);
          opt_g.step(g_params);
          log.loss_generator = lg.loss;
          log.mean_distortion_generator = lg.mean_distortion;
        }

        nn::zero_grads(df_params);
        auto ldf = disc_filter_loss<float>(*bundle.disc_filter, m_prime, labels, true);
        opt_df.step(df_params);
        log.loss_disc_filter = ldf.loss;

        if (full) {
          nn::zero_grads(dg_params);
          auto ldg = disc_generator_loss<float>(*bundle.disc_gen, m, m_dprime, labels, true);
          opt_dg.step(dg_params);
          log.loss_disc_gen = ldg.loss;
        }
      } catch (const NumericError& e) {
        throw NumericError("training fault at step " + std::to_string(bundle.step) + " (epoch " +
                           std::to_string(epoch) + "): " + e.what());
      }

      ++bundle.step;
      if (metrics.is_open()) {
        metrics << log.step << "," << log.loss_filter << "," << log.loss_generator << "," << log.loss_disc_filter
                << "," << log.loss_disc_gen << "," << log.mean_distortion_filter << ","
                << log.mean_distortion_generator << "\n";
      }
      if (progress) progress(log);
      logs.push_back(log);
    }
    if (!run_dir.empty() && ((epoch + 1) % cfg.checkpoint_interval_epochs == 0 || epoch + 1 == cfg.epochs)) {
      save(epoch + 1);
    }
  }
  bundle.epoch = cfg.epochs;
  bundle.rng_state = rng_to_string(rng);
  return {std::move(bundle), std::move(logs)};
}

std::pair<nn::Tensor, nn::Tensor> transform_spectrograms(networks::PrivacyModelBundle& bundle,
                                                         const std::vector<Eigen::MatrixXf>& mels,
                                                         const std::vector<int>& s_syn, Rng& rng, int batch_size) {
  if (mels.empty()) throw DataError("transform_spectrograms: empty input");
  if (s_syn.size() != mels.size()) throw DimensionError("transform_spectrograms: attribute count mismatch");
  int64_t total = static_cast<int64_t>(mels.size());
  int64_t h = mels.front().rows(), w = mels.front().cols();
  nn::Tensor out_prime({total, 1, h, w});
  nn::Tensor out_dprime({total, 1, h, w});

  for (int64_t at = 0; at < total; at += batch_size) {
    int64_t nb = std::min<int64_t>(batch_size, total - at);
    std::vector<Eigen::MatrixXf> chunk(mels.begin() + at, mels.begin() + at + nb);
    nn::Tensor m = networks::spectrogram_batch(chunk);
    nn::Tensor z1 = networks::noise_like(m, rng);

    nn::Graph g;
    auto* mp = networks::filter_forward(g, *bundle.filter, g.input(m), g.input(z1), false);
    std::copy_n(mp->value.ptr(), nb * h * w, out_prime.ptr() + at * h * w);

    if (bundle.has_generator()) {
      std::vector<int> s_chunk(s_syn.begin() + at, s_syn.begin() + at + nb);
      nn::Tensor z2 = networks::noise_like(m, rng);
      nn::Tensor plane = networks::attribute_plane(m, s_chunk);
      nn::Graph g2;
      auto* mpp = networks::generator_forward(g2, *bundle.generator, g2.input(mp->value), g2.input(plane),
                                              g2.input(z2), false);
      std::copy_n(mpp->value.ptr(), nb * h * w, out_dprime.ptr() + at * h * w);
    } else {
      std::copy_n(mp->value.ptr(), nb * h * w, out_dprime.ptr() + at * h * w);
    }
  }
  return {std::move(out_prime), std::move(out_dprime)};
}

TransformResult transform(const dataset::AudioClip& clip, networks::PrivacyModelBundle& bundle,
                          const spectral::SpectralConfig& scfg, int s_syn, Rng& rng, const VocoderFn& vocoder) {
  if (clip.sample_rate != scfg.sample_rate || static_cast<int>(clip.samples.size()) != dataset::kTargetLen) {
    throw DataError("transform expects a prepared clip (" + std::to_string(scfg.sample_rate) + " Hz, " +
                    std::to_string(dataset::kTargetLen) + " samples); got " + std::to_string(clip.sample_rate) +
                    " Hz, " + std::to_string(clip.samples.size()) + " samples");
  }
  if (bundle.spectral_fingerprint != scfg.fingerprint()) {
    throw CompatibilityError("bundle was trained under a different spectral configuration");
  }
  if (s_syn < -1 || s_syn > 1) throw ConfigError("s_syn must be 0, 1 or -1 (random)");

  spectral::NormStats stats{bundle.norm_mean, bundle.norm_scale};
  auto mel = spectral::normalize(spectral::mel_of_samples(clip.samples, scfg), stats, scfg);

  int chosen = s_syn;
  if (chosen == -1) chosen = rand_uniform(rng) < 0.5 ? 0 : 1;

  std::vector<Eigen::MatrixXf> one{mel.values.cast<float>()};
  auto [mp, mpp] = transform_spectrograms(bundle, one, {chosen}, rng);

  TransformResult res;
  res.s_syn = chosen;
  int64_t h = mel.values.rows(), w = mel.values.cols();
  res.m_prime.values.resize(h, w);
  res.m_dprime.values.resize(h, w);
  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      res.m_prime.values(r, c) = mp[r * w + c];
      res.m_dprime.values(r, c) = mpp[r * w + c];
    }
  }
  res.m_prime.norm_mean = res.m_dprime.norm_mean = bundle.norm_mean;
  res.m_prime.norm_scale = res.m_dprime.norm_scale = bundle.norm_scale;
  res.m_prime.source_rate = res.m_dprime.source_rate = scfg.sample_rate;
  res.waveform = vocoder(res.m_dprime);
  return res;
}

}  // namespace privmel::training
