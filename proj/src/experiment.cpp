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

#include "privmel/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

namespace privmel::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json spectral_to_json(const spectral::SpectralConfig& s) {
  return {{"window_size", s.window_size}, {"hop", s.hop},
          {"n_mels", s.n_mels},           {"fmin", s.fmin},
          {"fmax", s.fmax},               {"log_floor", s.log_floor},
          {"griffin_lim_iters", s.griffin_lim_iters},
          {"sample_rate", s.sample_rate}};
}

spectral::SpectralConfig spectral_from_json(const nlohmann::json& j) {
  spectral::SpectralConfig s;
  s.window_size = j.value("window_size", s.window_size);
  s.hop = j.value("hop", s.hop);
  s.n_mels = j.value("n_mels", s.n_mels);
  s.fmin = j.value("fmin", s.fmin);
  s.fmax = j.value("fmax", s.fmax);
  s.log_floor = j.value("log_floor", s.log_floor);
  s.griffin_lim_iters = j.value("griffin_lim_iters", s.griffin_lim_iters);
  s.sample_rate = j.value("sample_rate", s.sample_rate);
  return s;
}

nlohmann::json classifiers_to_json(const evaluation::ClassifierTrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"seed", c.seed},
          {"spec_base_channels", c.spec_base_channels},
          {"spec_hidden", c.spec_hidden},
          {"audio_net", c.audio_net.to_json()},
          {"min_clean_accuracy", c.min_clean_accuracy}};
}

evaluation::ClassifierTrainConfig classifiers_from_json(const nlohmann::json& j) {
  evaluation::ClassifierTrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.seed = j.value("seed", c.seed);
  c.spec_base_channels = j.value("spec_base_channels", c.spec_base_channels);
  c.spec_hidden = j.value("spec_hidden", c.spec_hidden);
  if (j.contains("audio_net")) c.audio_net = networks::AudioNetConfig::from_json(j["audio_net"]);
  c.min_clean_accuracy = j.value("min_clean_accuracy", c.min_clean_accuracy);
  return c;
}

fs::path prepared_dir(const ExperimentConfig& cfg) { return fs::path(cfg.out_dir) / "prepared"; }
fs::path runs_dir(const ExperimentConfig& cfg) { return fs::path(cfg.out_dir) / "runs"; }

struct PreparedData {
  dataset::DatasetSplit split;
  spectral::NormStats stats;
};

PreparedData load_prepared(const ExperimentConfig& cfg) {
  fs::path dir = prepared_dir(cfg);
  if (!fs::exists(dir / "train.bin")) {
    throw DataError("no prepared dataset under " + dir.string() + "; run `privmel prepare` first");
  }
  PreparedData d;
  d.split.train = dataset::load_clip_cache((dir / "train.bin").string(), (dir / "train.csv").string());
  d.split.test = dataset::load_clip_cache((dir / "test.bin").string(), (dir / "test.csv").string());
  for (const auto& c : d.split.train) d.split.train_speakers.insert(c.speaker_id);
  for (const auto& c : d.split.test) d.split.test_speakers.insert(c.speaker_id);
  d.stats = spectral::load_stats_sidecar((dir / "stats.json").string());
  return d;
}

training::VocoderFn make_vocoder_fn(const ExperimentConfig& cfg, std::shared_ptr<vocoder::VocoderBundle>& holder) {
  if (cfg.eval_vocoder == "griffinlim") {
    spectral::SpectralConfig scfg = cfg.spectral;
    return [scfg](const spectral::MelSpectrogram& m) { return spectral::griffin_lim_invert(m, scfg); };
  }
  if (cfg.eval_vocoder == "melgan") {
    fs::path ck = fs::path(cfg.out_dir) / "vocoder" / "checkpoints" / "latest.bin";
    if (!fs::exists(ck)) {
      throw DataError("no trained vocoder at " + ck.string() + "; run `privmel train-vocoder` first");
    }
    holder = std::make_shared<vocoder::VocoderBundle>(vocoder::load_pretrained(ck.string()));
    auto h = holder;
    return [h](const spectral::MelSpectrogram& m) { return vocoder::vocode(m, *h); };
  }
  throw ConfigError("evaluation.vocoder must be griffinlim|melgan, got '" + cfg.eval_vocoder + "'");
}

}  // namespace

void ExperimentConfig::validate_grid() const {
  if (grid_epsilons.empty() || grid_seeds.empty() || grid_modes.empty()) {
    throw ConfigError("experiment grid must not be empty");
  }
  for (double e : grid_epsilons) {
    if (e <= 0) throw ConfigError("grid epsilon values must be positive");
  }
  for (const auto& m : grid_modes) {
    if (m != "full" && m != "baseline") throw ConfigError("grid modes must be full|baseline");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"dataset",
           {{"root", dataset_root},
            {"metadata", metadata_path},
            {"split_seed", split_seed},
            {"train_speakers_per_gender", split.train_per_gender},
            {"test_speakers_per_gender", split.test_per_gender}}},
          {"output_dir", out_dir},
          {"spectral", spectral_to_json(spectral)},
          {"train", train.to_json()},
          {"vocoder", vocoder_cfg.to_json()},
          {"classifiers", classifiers_to_json(classifiers)},
          {"grid", {{"epsilons", grid_epsilons}, {"seeds", grid_seeds}, {"modes", grid_modes}}},
          {"evaluation", {{"sample_cap", eval_sample_cap}, {"vocoder", eval_vocoder}}}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    c.dataset_root = d.value("root", "");
    c.metadata_path = d.value("metadata", "");
    c.split_seed = d.value("split_seed", c.split_seed);
    c.split.train_per_gender = d.value("train_speakers_per_gender", c.split.train_per_gender);
    c.split.test_per_gender = d.value("test_speakers_per_gender", c.split.test_per_gender);
  }
  c.out_dir = j.value("output_dir", "");
  if (j.contains("spectral")) c.spectral = spectral_from_json(j["spectral"]);
  if (j.contains("train")) c.train = training::TrainConfig::from_json(j["train"]);
  if (j.contains("vocoder")) c.vocoder_cfg = vocoder::VocoderConfig::from_json(j["vocoder"]);
  if (j.contains("classifiers")) c.classifiers = classifiers_from_json(j["classifiers"]);
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    c.grid_epsilons = g.value("epsilons", c.grid_epsilons);
    c.grid_seeds = g.value("seeds", c.grid_seeds);
    c.grid_modes = g.value("modes", c.grid_modes);
  }
  if (j.contains("evaluation")) {
    c.eval_sample_cap = j["evaluation"].value("sample_cap", c.eval_sample_cap);
    c.eval_vocoder = j["evaluation"].value("vocoder", c.eval_vocoder);
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open experiment config: " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError("experiment config is not valid JSON: " + path);
  ExperimentConfig c = from_json(j);
  if (const char* env = std::getenv("PRIVMEL_OUT_DIR"); env && *env) c.out_dir = env;
  if (c.out_dir.empty()) throw ConfigError("experiment config needs an output_dir");
  c.validate_grid();
  c.spectral.validate();
  return c;
}

std::string run_dir_name(double epsilon, uint64_t seed, const std::string& mode) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "eps%g_seed%llu_%s", epsilon, static_cast<unsigned long long>(seed),
                mode.c_str());
  return buf;
}

int cmd_prepare(const ExperimentConfig& cfg, bool force) {
  if (!fs::is_directory(cfg.dataset_root)) {
    throw DataError("dataset root '" + cfg.dataset_root +
                    "' does not exist; point dataset.root at an AudioMNIST-style tree "
                    "(per-speaker folders of <digit>_<speaker>_<rep>.wav plus a gender metadata JSON)");
  }
  fs::path dir = prepared_dir(cfg);
  fs::create_directories(dir);

  // content hash over the raw listing and the preparation-relevant config
  uint64_t h = cfg.split_seed;
  h = fnv1a(&cfg.split.train_per_gender, sizeof(int), h);
  h = fnv1a(&cfg.split.test_per_gender, sizeof(int), h);
  h = cfg.spectral.fingerprint() ^ h;
  std::vector<std::string> listing;
  for (const auto& e : fs::recursive_directory_iterator(cfg.dataset_root)) {
    if (e.is_regular_file()) {
      listing.push_back(e.path().string() + ":" + std::to_string(fs::file_size(e.path())));
    }
  }
  std::sort(listing.begin(), listing.end());
  for (const auto& s : listing) h = fnv1a_str(s, h);

  fs::path hash_path = dir / "prepare_hash.json";
  if (!force && fs::exists(hash_path) && fs::exists(dir / "train.bin")) {
    std::ifstream is(hash_path);
    nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
    if (!j.is_discarded() && j.value("hash", uint64_t(0)) == h) {
      std::cout << "prepare: cache is up to date (" << dir.string() << ")\n";
      return kExitOk;
    }
  }

  std::cout << "prepare: loading " << cfg.dataset_root << "\n";
  auto clips = dataset::load_dataset(cfg.dataset_root, cfg.metadata_path);
  if (clips.empty()) throw DataError("dataset root holds no WAV files: " + cfg.dataset_root);
  std::cout << "prepare: " << clips.size() << " clips; resampling to " << dataset::kTargetRate << " Hz\n";
  std::vector<dataset::AudioClip> prepared(clips.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(clips.size()); ++i) {
    prepared[static_cast<size_t>(i)] = dataset::prepare_clip(clips[static_cast<size_t>(i)]);
  }
  auto split = dataset::split_speakers(prepared, cfg.split_seed, cfg.split);
  dataset::save_clip_cache((dir / "train.bin").string(), (dir / "train.csv").string(), split.train);
  dataset::save_clip_cache((dir / "test.bin").string(), (dir / "test.csv").string(), split.test);

  std::vector<Eigen::MatrixXd> mels(split.train.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < static_cast<int64_t>(split.train.size()); ++i) {
    mels[static_cast<size_t>(i)] = spectral::mel_of_samples(split.train[static_cast<size_t>(i)].samples, cfg.spectral);
  }
  auto stats = spectral::compute_corpus_stats(mels, cfg.spectral);
  spectral::save_stats_sidecar((dir / "stats.json").string(), stats);

  std::ofstream(hash_path) << nlohmann::json{{"hash", h}}.dump(2) << "\n";
  std::cout << "prepare: wrote " << split.train.size() << " train / " << split.test.size() << " test clips, "
            << "stats mean " << stats.mean << " scale " << stats.scale << "\n";
  return kExitOk;
}

int cmd_train_vocoder(const ExperimentConfig& cfg, bool force) {
  auto data = load_prepared(cfg);
  fs::path vdir = fs::path(cfg.out_dir) / "vocoder";
  fs::path done = vdir / "done";
  if (fs::exists(done) && !force) {
    std::cout << "train-vocoder: already complete (" << vdir.string() << "); use --force to retrain\n";
    return kExitOk;
  }
  if (force) fs::remove_all(vdir);
  fs::create_directories(vdir);
  std::ofstream(vdir / "config.json") << cfg.vocoder_cfg.to_json().dump(2) << "\n";
  auto result = vocoder::train_vocoder(data.split.train, cfg.vocoder_cfg, cfg.spectral, vdir.string(), 50,
                                       [](const vocoder::VocoderStepLog& log) {
                                         if (log.probe_spectral_distance >= 0) {
                                           std::cout << "  vocoder step " << log.step << " disc " << log.loss_disc
                                                     << " spectral-dist " << log.probe_spectral_distance << "\n";
                                         }
                                       });
  std::ofstream(done) << result.bundle.step << "\n";
  std::cout << "train-vocoder: finished at step " << result.bundle.step << "\n";
  return kExitOk;
}

int cmd_train_classifiers(const ExperimentConfig& cfg, bool force) {
  auto data = load_prepared(cfg);
  fs::path path = fs::path(cfg.out_dir) / "classifiers.bin";
  if (fs::exists(path) && !force) {
    std::cout << "train-classifiers: already trained (" << path.string() << "); use --force to retrain\n";
    return kExitOk;
  }
  auto fc = evaluation::train_fixed_classifiers(data.split, cfg.spectral, cfg.classifiers);
  evaluation::save_fixed_classifiers(path.string(), fc);
  std::cout << "train-classifiers: clean accuracies: spec gender " << fc.clean_spec_gender << "%, spec digit "
            << fc.clean_spec_digit << "%, audio gender " << fc.clean_audio_gender << "%, audio digit "
            << fc.clean_audio_digit << "%\n";
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, std::optional<std::string> mode, std::optional<double> epsilon,
              std::optional<uint64_t> seed, bool force) {
  auto data = load_prepared(cfg);
  auto train_data = training::build_spectrogram_dataset(data.split.train, cfg.spectral, &data.stats);

  std::vector<double> epsilons = epsilon ? std::vector<double>{*epsilon} : cfg.grid_epsilons;
  std::vector<uint64_t> seeds = seed ? std::vector<uint64_t>{*seed} : cfg.grid_seeds;
  std::vector<std::string> modes = mode ? std::vector<std::string>{*mode} : cfg.grid_modes;

  for (const auto& m : modes) {
    for (double eps : epsilons) {
      for (uint64_t sd : seeds) {
        fs::path rdir = runs_dir(cfg) / run_dir_name(eps, sd, m);
        fs::path done = rdir / "done";
        if (fs::exists(done) && !force) {
          std::cout << "train: " << rdir.filename().string() << " already complete, skipping (--force to redo)\n";
          continue;
        }
        if (force) fs::remove_all(rdir);
        fs::create_directories(rdir);
        training::TrainConfig cell = cfg.train;
        cell.mode = m;
        cell.epsilon = eps;
        cell.seed = sd;
        std::ofstream(rdir / "config.json") << cell.to_json().dump(2) << "\n";
        std::cout << "train: " << rdir.filename().string() << " (" << cell.epochs << " epochs)\n";
        auto result = training::train_on_spectrograms(train_data, cell, cfg.spectral, rdir.string());
        std::ofstream(done) << result.bundle.step << "\n";
        std::cout << "train: " << rdir.filename().string() << " done; final distortion F "
                  << (result.logs.empty() ? 0.0 : result.logs.back().mean_distortion_filter) << "\n";
      }
    }
  }
  return kExitOk;
}

int cmd_transform(const ExperimentConfig& cfg, const std::vector<std::string>& wav_paths,
                  const std::string& checkpoint, const std::string& s_syn_choice, uint64_t rng_seed,
                  const std::string& out_dir, bool dump_spectrograms) {
  if (wav_paths.empty()) throw ConfigError("transform needs at least one input WAV");
  int s_syn;
  if (s_syn_choice == "0") {
    s_syn = 0;
  } else if (s_syn_choice == "1") {
    s_syn = 1;
  } else if (s_syn_choice == "random") {
    s_syn = -1;
  } else {
    throw ConfigError("--s-syn must be 0, 1 or random");
  }
  auto bundle = networks::load_privacy_bundle(checkpoint);
  std::shared_ptr<vocoder::VocoderBundle> vholder;
  auto vfn = make_vocoder_fn(cfg, vholder);
  Rng rng(rng_seed);
  fs::create_directories(out_dir);

  for (const auto& path : wav_paths) {
    dataset::AudioClip clip;
    clip.samples = dataset::read_wav(path, &clip.sample_rate);
    clip.path = path;
    clip = dataset::prepare_clip(clip);
    auto original_mel = spectral::normalize(spectral::mel_of_samples(clip.samples, cfg.spectral),
                                            {bundle.norm_mean, bundle.norm_scale}, cfg.spectral);
    auto res = training::transform(clip, bundle, cfg.spectral, s_syn, rng, vfn);
    fs::path stem = fs::path(path).stem();
    fs::path out_wav = fs::path(out_dir) / (stem.string() + "_private_s" + std::to_string(res.s_syn) + ".wav");
    dataset::write_wav(out_wav.string(), res.waveform, cfg.spectral.sample_rate);
    std::cout << "transform: " << path << " -> " << out_wav.string() << " (s_syn=" << res.s_syn << ")\n";
    if (dump_spectrograms) {
      write_spectrogram_pgm((fs::path(out_dir) / (stem.string() + "_original.pgm")).string(), original_mel.values);
      write_spectrogram_pgm((fs::path(out_dir) / (stem.string() + "_mprime.pgm")).string(), res.m_prime.values);
      write_spectrogram_pgm((fs::path(out_dir) / (stem.string() + "_mdprime.pgm")).string(), res.m_dprime.values);
    }
  }
  return kExitOk;
}

RunEvaluation evaluate_bundle(networks::PrivacyModelBundle& bundle, const std::vector<dataset::AudioClip>& test,
                              evaluation::FixedClassifiers& fc, const spectral::SpectralConfig& scfg,
                              const training::VocoderFn& vocoder_fn, double epsilon, uint64_t seed,
                              int sample_cap) {
  if (test.empty()) throw DataError("evaluation needs a non-empty test set");
  spectral::NormStats stats{bundle.norm_mean, bundle.norm_scale};
  auto data = training::build_spectrogram_dataset(test, scfg, &stats);

  Rng rng(seed ^ 0xe5a1a4710ull);
  std::vector<int> s_syn(test.size());
  for (auto& v : s_syn) v = rand_uniform(rng) < 0.5 ? 0 : 1;

  auto [m_prime, m_dprime] = training::transform_spectrograms(bundle, data.mels, s_syn, rng);

  // mean L1 distortion of the published output (m'' in full mode, m' in baseline)
  double dist = 0.0;
  int64_t hw = static_cast<int64_t>(scfg.n_mels) * data.mels.front().cols();
  for (size_t i = 0; i < test.size(); ++i) {
    const auto& m = data.mels[i];
    for (int64_t r = 0; r < m.rows(); ++r)
      for (int64_t c = 0; c < m.cols(); ++c) {
        dist += std::abs(static_cast<double>(m_dprime[static_cast<int64_t>(i) * hw + r * m.cols() + c]) - m(r, c));
      }
  }
  dist /= static_cast<double>(test.size() * hw);

  std::vector<Eigen::MatrixXf> out_mels(test.size());
  for (size_t i = 0; i < test.size(); ++i) {
    Eigen::MatrixXf m(scfg.n_mels, data.mels.front().cols());
    for (int64_t r = 0; r < m.rows(); ++r)
      for (int64_t c = 0; c < m.cols(); ++c) m(r, c) = m_dprime[static_cast<int64_t>(i) * hw + r * m.cols() + c];
    out_mels[i] = m;
  }

  RunEvaluation ev;
  ev.spectrogram.epsilon = ev.audio.epsilon = epsilon;
  ev.spectrogram.seed = ev.audio.seed = seed;
  ev.spectrogram.mode = ev.audio.mode = bundle.mode;
  ev.spectrogram.domain = "spectrogram";
  ev.audio.domain = "audio";
  ev.spectrogram.mean_distortion = ev.audio.mean_distortion = dist;

  ev.spectrogram.privacy_acc = evaluation::accuracy_spectrogram(fc.spec_gender, out_mels, data.gender);
  ev.spectrogram.utility_acc = evaluation::accuracy_spectrogram(fc.spec_digit, out_mels, data.digit);
  ev.spectrogram.fid = -1.0;

  // audio domain on a (possibly capped) subset
  int64_t cap = sample_cap > 0 ? std::min<int64_t>(sample_cap, static_cast<int64_t>(test.size()))
                               : static_cast<int64_t>(test.size());
  std::vector<std::vector<double>> real_waves(static_cast<size_t>(cap)), priv_waves(static_cast<size_t>(cap));
  std::vector<int> cap_gender(static_cast<size_t>(cap)), cap_digit(static_cast<size_t>(cap));
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < cap; ++i) {
    spectral::MelSpectrogram ms;
    ms.values = out_mels[static_cast<size_t>(i)].cast<double>();
    ms.norm_mean = bundle.norm_mean;
    ms.norm_scale = bundle.norm_scale;
    ms.source_rate = scfg.sample_rate;
    priv_waves[static_cast<size_t>(i)] = vocoder_fn(ms);
  }
  for (int64_t i = 0; i < cap; ++i) {
    real_waves[static_cast<size_t>(i)] = test[static_cast<size_t>(i)].samples;
    cap_gender[static_cast<size_t>(i)] = data.gender[static_cast<size_t>(i)];
    cap_digit[static_cast<size_t>(i)] = data.digit[static_cast<size_t>(i)];
  }
  ev.audio.privacy_acc = evaluation::accuracy_audio(fc.audio_gender, priv_waves, cap_gender);
  ev.audio.utility_acc = evaluation::accuracy_audio(fc.audio_digit, priv_waves, cap_digit);
  ev.audio.fid = evaluation::fid_audio(real_waves, priv_waves, fc.audio_digit);
  return ev;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& runs_filter) {
  auto data = load_prepared(cfg);
  fs::path cls_path = fs::path(cfg.out_dir) / "classifiers.bin";
  if (!fs::exists(cls_path)) {
    throw DataError("no fixed classifiers at " + cls_path.string() + "; run `privmel train-classifiers` first");
  }
  auto fc = evaluation::load_fixed_classifiers(cls_path.string());

  std::shared_ptr<vocoder::VocoderBundle> vholder;
  auto vfn = make_vocoder_fn(cfg, vholder);

  fs::path rdir = runs_dir(cfg);
  if (!fs::is_directory(rdir)) throw DataError("no runs directory under " + cfg.out_dir);
  std::vector<fs::path> run_paths;
  for (const auto& e : fs::directory_iterator(rdir)) {
    if (!e.is_directory()) continue;
    std::string name = e.path().filename().string();
    if (!runs_filter.empty() && name.find(runs_filter) == std::string::npos) continue;
    if (!fs::exists(e.path() / "done")) {
      std::cout << "evaluate: skipping incomplete run " << name << "\n";
      continue;
    }
    run_paths.push_back(e.path());
  }
  std::sort(run_paths.begin(), run_paths.end());
  if (run_paths.empty()) throw DataError("no completed runs match filter '" + runs_filter + "'");

  std::vector<evaluation::MetricsRecord> records;
  uint64_t fc_hash_before = fc.params_fingerprint();
  for (const auto& rp : run_paths) {
    // the stored snapshot governs the evaluation, never the live config
    std::ifstream cis(rp / "config.json");
    nlohmann::json cj = nlohmann::json::parse(cis, nullptr, false);
    if (cj.is_discarded()) throw DataError("corrupt config snapshot in " + rp.string());
    auto cell = training::TrainConfig::from_json(cj);
    auto bundle = networks::load_privacy_bundle((rp / "checkpoints" / "latest.bin").string());
    std::cout << "evaluate: " << rp.filename().string() << "\n";
    auto ev = evaluate_bundle(bundle, data.split.test, fc, cfg.spectral, vfn, cell.epsilon, cell.seed,
                              cfg.eval_sample_cap);
    records.push_back(ev.spectrogram);
    records.push_back(ev.audio);
  }
  if (fc.params_fingerprint() != fc_hash_before) {
    throw NumericError("evaluation mutated the fixed classifiers; aborting");
  }
  evaluation::append_metrics_csv((fs::path(cfg.out_dir) / "metrics.csv").string(), records);
  std::cout << "evaluate: " << records.size() << " records appended to metrics.csv\n";
  return kExitOk;
}

int cmd_report(const ExperimentConfig& cfg) {
  fs::path csv = fs::path(cfg.out_dir) / "metrics.csv";
  if (!fs::exists(csv)) throw DataError("no metrics.csv under " + cfg.out_dir + "; run `privmel evaluate` first");
  auto records = evaluation::read_metrics_csv(csv.string());
  auto written = evaluation::tradeoff_report(records, (fs::path(cfg.out_dir) / "report").string());
  for (const auto& w : written) std::cout << "report: wrote " << w << "\n";
  return kExitOk;
}

void write_spectrogram_pgm(const std::string& path, const Eigen::MatrixXd& values) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write spectrogram image: " + path);
  int64_t h = values.rows(), w = values.cols();
  os << "P5\n" << w << " " << h << "\n255\n";
  for (int64_t r = h - 1; r >= 0; --r) {  // low frequencies at the bottom
    for (int64_t c = 0; c < w; ++c) {
      double v = (values(r, c) + 1.0) / 2.0;
      os.put(static_cast<char>(std::clamp(v, 0.0, 1.0) * 255.0));
    }
  }
}

}  // namespace privmel::cli
