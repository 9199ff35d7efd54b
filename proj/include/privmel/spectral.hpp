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
#include <string>
#include <vector>

#include "privmel/common.hpp"

namespace privmel::spectral {

struct SpectralConfig {
  int window_size = 1024;
  int hop = 256;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 4000.0;      // Nyquist of the 8 kHz pipeline
  double log_floor = 1e-5;   // applied before the logarithm
  int griffin_lim_iters = 60;
  int sample_rate = 8000;

  void validate() const;
  int n_freq_bins() const { return window_size / 2 + 1; }
  uint64_t fingerprint() const;  // geometry hash, extended with stats by users
};

struct NormStats {
  double mean = 0.0;
  double scale = 1.0;  // standard deviation of the log-mel corpus
};

// Normalized log-mel spectrogram (entries in [-1,1]) with the statistics
// needed to invert the normalization.
struct MelSpectrogram {
  Eigen::MatrixXd values;  // n_mels x T
  double norm_mean = 0.0;
  double norm_scale = 1.0;
  int source_rate = 8000;

  int64_t frames() const { return values.cols(); }
  uint64_t stats_fingerprint(const SpectralConfig& cfg) const;
};

// Magnitude STFT with centered frames (reflect padding of window_size/2 on
// each side) and a periodic Hann window. Output is n_freq_bins x T with
// T = 1 + floor(n / hop).
Eigen::MatrixXd stft_magnitude(const std::vector<double>& samples, const SpectralConfig& cfg);

// Complex STFT / inverse, shared by Griffin-Lim. istft returns exactly
// `length` samples.
Eigen::MatrixXcd stft_complex(const std::vector<double>& samples, const SpectralConfig& cfg);
std::vector<double> istft(const Eigen::MatrixXcd& spec, const SpectralConfig& cfg, int64_t length);

// Triangular mel filterbank, n_mels x n_freq_bins, each row peak-normalized
// to 1, centers mel-spaced between fmin and fmax.
Eigen::MatrixXd mel_filterbank(const SpectralConfig& cfg);

// Projects a non-negative magnitude spectrogram onto the mel filterbank.
Eigen::MatrixXd mel_project(const Eigen::MatrixXd& magnitude, const SpectralConfig& cfg);

// Convenience: waveform -> linear mel magnitude (n_mels x T).
Eigen::MatrixXd mel_of_samples(const std::vector<double>& samples, const SpectralConfig& cfg);

// Global statistics of log(max(mel, log_floor)) over a corpus of linear mel
// spectrograms: one mean and one standard deviation across all bins/frames.
NormStats compute_corpus_stats(const std::vector<Eigen::MatrixXd>& linear_mels, const SpectralConfig& cfg);

// normalize: clip((log(max(mel, floor)) - mean) / (3*scale), -1, 1).
MelSpectrogram normalize(const Eigen::MatrixXd& linear_mel, const NormStats& stats, const SpectralConfig& cfg);

// Exact algebraic inverse of normalize on the non-clipped region; returns
// linear mel magnitudes.
Eigen::MatrixXd denormalize(const MelSpectrogram& mspec, const SpectralConfig& cfg);

// Deterministic mel inversion: pseudo-inverse filterbank lift followed by
// Griffin-Lim phase re-estimation (zero initial phase). Returns a waveform
// of exactly target_len samples. If convergence_trace is non-null it
// receives the spectral convergence error after every iteration.
std::vector<double> griffin_lim_invert(const MelSpectrogram& mspec, const SpectralConfig& cfg,
                                       int64_t target_len = 8192, std::vector<double>* convergence_trace = nullptr);

// Spectral distance used by vocoder evaluation: relative Frobenius error
// between the magnitude STFTs of two waveforms.
double spectral_distance(const std::vector<double>& a, const std::vector<double>& b, const SpectralConfig& cfg);

// Spectrogram cache: header (magic, version, n_mels, T, count) then
// row-major float32 frames; stats in a JSON sidecar {mean, scale}.
void save_spectrogram_cache(const std::string& path, const std::vector<Eigen::MatrixXf>& spectrograms);
std::vector<Eigen::MatrixXf> load_spectrogram_cache(const std::string& path);
void save_stats_sidecar(const std::string& path, const NormStats& stats);
NormStats load_stats_sidecar(const std::string& path);

}  // namespace privmel::spectral
