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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "privmel/dataset.hpp"
#include "privmel/spectral.hpp"
#include "support/oracles.hpp"
#include "support/synth_corpus.hpp"

using namespace privmel;
using spectral::SpectralConfig;

namespace {

std::vector<double> sine(double freq, int rate, size_t n, double amp = 0.5) {
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate);
  return x;
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

TEST_CASE("stft shape law and zero input") {
  SpectralConfig cfg;
  auto mag = spectral::stft_magnitude(std::vector<double>(8192, 0.0), cfg);
  CHECK(mag.rows() == 513);
  CHECK(mag.cols() == 33);
  CHECK(mag.cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(spectral::stft_magnitude(std::vector<double>(512, 0.0), cfg), DimensionError);
}

TEST_CASE("stft matches a naive DFT of the windowed frame") {
  SpectralConfig cfg;
  Rng rng(11);
  std::vector<double> x(8192);
  for (auto& v : x) v = 0.4 * randn(rng);
  auto mag = spectral::stft_magnitude(x, cfg);

  // reproduce frame 10 by hand: reflect padding puts frame t at offset
  // t*hop of the padded signal, which is x[t*hop - 512 ...] for interior t
  int t = 10;
  std::vector<double> frame(1024);
  for (int i = 0; i < 1024; ++i) {
    int64_t src = static_cast<int64_t>(t) * cfg.hop - 512 + i;
    double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / 1024));
    frame[static_cast<size_t>(i)] = x[static_cast<size_t>(src)] * w;
  }
  auto ref = testing::naive_dft(frame);
  for (int b = 0; b < 513; ++b) CHECK(mag(b, t) == doctest::Approx(std::abs(ref[static_cast<size_t>(b)])).epsilon(1e-8));
}

TEST_CASE("pure 1 kHz tone peaks at bin 128 and satisfies Parseval per frame") {
  SpectralConfig cfg;
  auto x = sine(1000.0, 8000, 8192);
  auto mag = spectral::stft_magnitude(x, cfg);
  for (int t = 2; t < 31; ++t) {
    int argmax = 0;
    for (int b = 1; b < 513; ++b)
      if (mag(b, t) > mag(argmax, t)) argmax = b;
    CHECK(argmax == 128);  // round(1000 * 1024 / 8000)
  }

  // Parseval for the rfft: sum x^2 = (|X0|^2 + 2*sum|Xk|^2 + |XN/2|^2)/N
  int t = 16;
  double spec_energy = mag(0, t) * mag(0, t) + mag(512, t) * mag(512, t);
  for (int b = 1; b < 512; ++b) spec_energy += 2.0 * mag(b, t) * mag(b, t);
  spec_energy /= 1024.0;
  double sig_energy = 0.0;
  for (int i = 0; i < 1024; ++i) {
    int64_t src = static_cast<int64_t>(t) * cfg.hop - 512 + i;
    double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / 1024));
    double v = x[static_cast<size_t>(src)] * w;
    sig_energy += v * v;
  }
  CHECK(spec_energy == doctest::Approx(sig_energy).epsilon(0.01));
}

TEST_CASE("mel filterbank rows are non-negative, unimodal, peak-normalized") {
  SpectralConfig cfg;
  auto fb = spectral::mel_filterbank(cfg);
  REQUIRE(fb.rows() == 80);
  REQUIRE(fb.cols() == 513);
  for (int m = 0; m < 80; ++m) {
    CHECK(fb.row(m).minCoeff() >= 0.0);
    CHECK(fb.row(m).maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fb.row(m).sum() > 0.0);
    // unimodal: one sign change in the discrete difference around the peak
    int peak = 0;
    for (int b = 1; b < 513; ++b)
      if (fb(m, b) > fb(m, peak)) peak = b;
    for (int b = 1; b <= peak; ++b) CHECK(fb(m, b) >= fb(m, b - 1) - 1e-12);
    for (int b = peak + 1; b < 513; ++b) CHECK(fb(m, b) <= fb(m, b - 1) + 1e-12);
  }
}

TEST_CASE("mel projection: zeros, filter sums on all-ones, domain error, tone locality") {
  SpectralConfig cfg;
  Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(513, 5);
  CHECK(spectral::mel_project(zeros, cfg).cwiseAbs().maxCoeff() == 0.0);

  // ones column returns each filter's coefficient sum, strictly positive
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(513, 1);
  auto sums = spectral::mel_project(ones, cfg);
  auto fb = spectral::mel_filterbank(cfg);
  for (int m = 0; m < 80; ++m) {
    CHECK(sums(m, 0) > 0.0);
    CHECK(sums(m, 0) == doctest::Approx(fb.row(m).sum()).epsilon(1e-12));
  }

  Eigen::MatrixXd neg = Eigen::MatrixXd::Constant(513, 1, -0.1);
  CHECK_THROWS_AS(spectral::mel_project(neg, cfg), NumericError);

  // a 1 kHz tone concentrates within +/-2 mel bins of the nearest center
  auto x = sine(1000.0, 8000, 8192);
  auto mel = spectral::mel_of_samples(x, cfg);
  // oracle: centers are the interior mel-spaced grid points
  double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax);
  int nearest = 0;
  double best = 1e18;
  for (int m = 0; m < 80; ++m) {
    double center = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / 81.0);
    if (std::abs(center - 1000.0) < best) {
      best = std::abs(center - 1000.0);
      nearest = m;
    }
  }
  for (int t = 5; t < 28; ++t) {
    int argmax = 0;
    for (int m = 1; m < 80; ++m)
      if (mel(m, t) > mel(argmax, t)) argmax = m;
    CHECK(std::abs(argmax - nearest) <= 2);
  }
}

TEST_CASE("normalize/denormalize semantics and round trip") {
  SpectralConfig cfg;
  spectral::NormStats stats{-5.0, 2.0};

  Eigen::MatrixXd mel(1, 3);
  mel(0, 0) = std::exp(-5.0);              // exactly the mean -> 0
  mel(0, 1) = std::exp(-5.0 + 3.0 * 2.0);  // mean + 3 sigma -> +1
  mel(0, 2) = std::exp(-5.0 + 10.0 * 2.0); // clipped -> +1
  auto ms = spectral::normalize(mel, stats, cfg);
  CHECK(ms.values(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ms.values(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ms.values(0, 2) == 1.0);

  // round trip on the non-clipped region
  Rng rng(3);
  Eigen::MatrixXd random(80, 33);
  for (int64_t i = 0; i < random.size(); ++i) {
    double logv = -5.0 + 2.9 * 2.0 * (2.0 * rand_uniform(rng) - 1.0);  // within +/- 2.9 sigma
    random(i) = std::exp(logv);
  }
  auto norm = spectral::normalize(random, stats, cfg);
  CHECK(norm.values.cwiseAbs().maxCoeff() <= 1.0);
  auto back = spectral::denormalize(norm, cfg);
  for (int64_t i = 0; i < random.size(); ++i) CHECK(back(i) == doctest::Approx(random(i)).epsilon(1e-6));

  // all-zero normalized matrix -> exp(mean) everywhere
  spectral::MelSpectrogram zero;
  zero.values = Eigen::MatrixXd::Zero(80, 3);
  zero.norm_mean = -5.0;
  zero.norm_scale = 2.0;
  auto lifted = spectral::denormalize(zero, cfg);
  for (int64_t i = 0; i < lifted.size(); ++i) CHECK(lifted(i) == doctest::Approx(std::exp(-5.0)).epsilon(1e-12));

  CHECK_THROWS_AS(spectral::normalize(mel, spectral::NormStats{0.0, 0.0}, cfg), NumericError);
}

TEST_CASE("corpus statistics are global over all bins and frames") {
  SpectralConfig cfg;
  std::vector<Eigen::MatrixXd> mels;
  mels.push_back(Eigen::MatrixXd::Constant(80, 10, std::exp(-3.0)));
  mels.push_back(Eigen::MatrixXd::Constant(80, 10, std::exp(-7.0)));
  auto stats = spectral::compute_corpus_stats(mels, cfg);
  CHECK(stats.mean == doctest::Approx(-5.0).epsilon(1e-9));
  CHECK(stats.scale == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("pipeline shape law: 8192 samples produce 80x33 in [-1,1]") {
  SpectralConfig cfg;
  testing::CorpusSpec spec;
  spec.n_female = 1;
  spec.n_male = 1;
  spec.reps_per_digit = 1;
  auto clips = testing::generate_clips(spec);
  std::vector<Eigen::MatrixXd> mels;
  for (const auto& c : clips) mels.push_back(spectral::mel_of_samples(dataset::prepare_clip(c).samples, cfg));
  auto stats = spectral::compute_corpus_stats(mels, cfg);
  for (const auto& m : mels) {
    auto ms = spectral::normalize(m, stats, cfg);
    CHECK(ms.values.rows() == 80);
    CHECK(ms.values.cols() == 33);
    CHECK(ms.values.maxCoeff() <= 1.0);
    CHECK(ms.values.minCoeff() >= -1.0);
  }

  // determinism: bit-identical on repeated computation
  auto again = spectral::mel_of_samples(dataset::prepare_clip(clips[0]).samples, cfg);
  CHECK((again - mels[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("griffin-lim: silence, convergence on speech, tone round trip") {
  SpectralConfig cfg;
  spectral::NormStats stats{-6.0, 2.0};

  // spectrogram at the log floor -> near-silent waveform
  spectral::MelSpectrogram silent;
  silent.values = Eigen::MatrixXd::Constant(80, 33, -1.0);
  silent.norm_mean = std::log(cfg.log_floor);  // floor sits at the mean
  silent.norm_scale = 0.5;
  auto quiet = spectral::griffin_lim_invert(silent, cfg);
  REQUIRE(quiet.size() == 8192);
  double peak = 0.0;
  for (double v : quiet) peak = std::max(peak, std::abs(v));
  CHECK(peak < 1e-3);

  // synthetic speech: convergence error decreases and ends below 0.25
  testing::CorpusSpec spec;
  spec.n_female = 1;
  spec.n_male = 1;
  spec.reps_per_digit = 1;
  auto clips = testing::generate_clips(spec);
  std::vector<Eigen::MatrixXd> mels;
  for (size_t i = 0; i < 4; ++i) mels.push_back(spectral::mel_of_samples(dataset::prepare_clip(clips[i]).samples, cfg));
  auto corpus_stats = spectral::compute_corpus_stats(mels, cfg);
  for (size_t i = 0; i < 4; ++i) {
    auto ms = spectral::normalize(mels[i], corpus_stats, cfg);
    std::vector<double> trace;
    auto wave = spectral::griffin_lim_invert(ms, cfg, 8192, &trace);
    REQUIRE(wave.size() == 8192);
    REQUIRE(trace.size() == static_cast<size_t>(cfg.griffin_lim_iters));
    CHECK(trace.back() < 0.25);
    CHECK(trace.back() <= trace.front());
  }

  // pure tone: inverted waveform keeps its spectral peak at the tone bin
  auto x = sine(1000.0, 8000, 8192);
  auto mel = spectral::mel_of_samples(x, cfg);
  std::vector<Eigen::MatrixXd> one{mel};
  auto tstats = spectral::compute_corpus_stats(one, cfg);
  tstats.scale = std::max(tstats.scale, 1.0);
  auto ms = spectral::normalize(mel, tstats, cfg);
  auto wave = spectral::griffin_lim_invert(ms, cfg);
  auto mag = spectral::stft_magnitude(wave, cfg);
  int exact = 0, frames = 0;
  for (int t = 8; t < 25; ++t, ++frames) {
    int argmax = 0;
    for (int b = 1; b < 513; ++b)
      if (mag(b, t) > mag(argmax, t)) argmax = b;
    // the 80-bin mel bottleneck quantizes frequency, so allow the width
    // of one mel filter around the tone bin
    CHECK(std::abs(argmax - 128) <= 4);
    if (std::abs(argmax - 128) <= 1) ++exact;
  }
  CHECK(exact >= (7 * frames) / 10);
}

TEST_CASE("spectrogram cache and stats sidecar round-trip") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "privmel_speccache";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Rng rng(5);
  std::vector<Eigen::MatrixXf> specs;
  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXf m(80, 33);
    for (int64_t j = 0; j < m.size(); ++j) m(j) = static_cast<float>(randn(rng));
    specs.push_back(m);
  }
  auto path = (dir / "spec.bin").string();
  spectral::save_spectrogram_cache(path, specs);
  auto loaded = spectral::load_spectrogram_cache(path);
  REQUIRE(loaded.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK((loaded[static_cast<size_t>(i)] - specs[static_cast<size_t>(i)]).cwiseAbs().maxCoeff() == 0.0f);

  spectral::NormStats stats{-4.25, 1.5};
  auto spath = (dir / "stats.json").string();
  spectral::save_stats_sidecar(spath, stats);
  auto back = spectral::load_stats_sidecar(spath);
  CHECK(back.mean == stats.mean);
  CHECK(back.scale == stats.scale);
}

TEST_CASE("spectral pipeline runtime stays under 1 s per 100 clips") {
  SpectralConfig cfg;
  std::vector<double> x(8192);
  for (size_t i = 0; i < x.size(); ++i) x[i] = 0.3 * std::sin(0.01 * static_cast<double>(i));
  spectral::NormStats stats{-6.0, 2.0};
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 100; ++i) {
    auto ms = spectral::normalize(spectral::mel_of_samples(x, cfg), stats, cfg);
    CHECK(ms.values.cols() == 33);
  }
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(dt < 1.0);
}
