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

#include "privmel/spectral.hpp"

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <fstream>
#include <mutex>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace privmel::spectral {

namespace {

// FFTW plan creation is not thread-safe; execution on private buffers is.
// Plans are cached per transform size and reused with new-array execution
// (created with FFTW_UNALIGNED so any buffer works).
class FftPlans {
 public:
  static FftPlans& instance() {
    static FftPlans p;
    return p;
  }

  void forward(int n, const double* in, std::complex<double>* out) {
    fftw_plan plan = plan_r2c(n);
    std::vector<double> tmp(in, in + n);
    fftw_execute_dft_r2c(plan, tmp.data(), reinterpret_cast<fftw_complex*>(out));
  }

  // Inverse c2r; FFTW's unnormalized output is divided by n here.
  void inverse(int n, const std::complex<double>* in, double* out) {
    fftw_plan plan = plan_c2r(n);
    std::vector<std::complex<double>> tmp(in, in + n / 2 + 1);  // c2r destroys its input
    fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(tmp.data()), out);
    for (int i = 0; i < n; ++i) out[i] /= n;
  }

 private:
  fftw_plan plan_r2c(int n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = r2c_.find(n);
    if (it != r2c_.end()) return it->second;
    std::vector<double> in(static_cast<size_t>(n));
    std::vector<std::complex<double>> out(static_cast<size_t>(n / 2 + 1));
    fftw_plan p = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    r2c_[n] = p;
    return p;
  }

  fftw_plan plan_c2r(int n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = c2r_.find(n);
    if (it != c2r_.end()) return it->second;
    std::vector<std::complex<double>> in(static_cast<size_t>(n / 2 + 1));
    std::vector<double> out(static_cast<size_t>(n));
    fftw_plan p = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(in.data()), out.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    c2r_[n] = p;
    return p;
  }

  std::mutex mu_;
  std::unordered_map<int, fftw_plan> r2c_;
  std::unordered_map<int, fftw_plan> c2r_;
};

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
  return w;
}

// Reflect-pad by window_size/2 on each side (no edge duplication).
std::vector<double> reflect_pad(const std::vector<double>& x, int pad) {
  int64_t n = static_cast<int64_t>(x.size());
  std::vector<double> y(static_cast<size_t>(n + 2 * pad));
  for (int64_t i = 0; i < n + 2 * pad; ++i) {
    int64_t src = i - pad;
    if (src < 0) src = -src;
    if (src >= n) src = 2 * (n - 1) - src;
    y[static_cast<size_t>(i)] = x[static_cast<size_t>(src)];
  }
  return y;
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

void SpectralConfig::validate() const {
  if (window_size <= 0 || hop <= 0 || window_size <= hop) {
    throw ConfigError("spectral config requires window_size > hop > 0");
  }
  if (fmax > sample_rate / 2.0 + 1e-9) throw ConfigError("spectral fmax exceeds Nyquist");
  if (n_mels <= 0 || n_mels > n_freq_bins()) throw ConfigError("spectral n_mels out of range");
  if (fmin < 0 || fmin >= fmax) throw ConfigError("spectral fmin out of range");
  if (log_floor <= 0) throw ConfigError("spectral log_floor must be positive");
}

uint64_t SpectralConfig::fingerprint() const {
  uint64_t h = fnv1a(&window_size, sizeof(window_size));
  h = fnv1a(&hop, sizeof(hop), h);
  h = fnv1a(&n_mels, sizeof(n_mels), h);
  h = fnv1a(&fmin, sizeof(fmin), h);
  h = fnv1a(&fmax, sizeof(fmax), h);
  h = fnv1a(&log_floor, sizeof(log_floor), h);
  h = fnv1a(&sample_rate, sizeof(sample_rate), h);
  return h;
}

uint64_t MelSpectrogram::stats_fingerprint(const SpectralConfig& cfg) const {
  uint64_t h = cfg.fingerprint();
  h = fnv1a(&norm_mean, sizeof(norm_mean), h);
  h = fnv1a(&norm_scale, sizeof(norm_scale), h);
  return h;
}

Eigen::MatrixXcd stft_complex(const std::vector<double>& samples, const SpectralConfig& cfg) {
  cfg.validate();
  int win = cfg.window_size;
  if (static_cast<int>(samples.size()) < win) {
    throw DimensionError("stft input shorter than one window (" + std::to_string(samples.size()) + " < " +
                         std::to_string(win) + ")");
  }
  int pad = win / 2;
  auto padded = reflect_pad(samples, pad);
  auto window = hann_window(win);
  int64_t frames = 1 + static_cast<int64_t>(samples.size()) / cfg.hop;
  int bins = cfg.n_freq_bins();

  Eigen::MatrixXcd out(bins, frames);
  std::vector<double> frame(static_cast<size_t>(win));
  std::vector<std::complex<double>> spec(static_cast<size_t>(bins));
  for (int64_t t = 0; t < frames; ++t) {
    const double* src = padded.data() + t * cfg.hop;
    for (int i = 0; i < win; ++i) frame[static_cast<size_t>(i)] = src[i] * window[static_cast<size_t>(i)];
    FftPlans::instance().forward(win, frame.data(), spec.data());
    for (int b = 0; b < bins; ++b) out(b, t) = spec[static_cast<size_t>(b)];
  }
  return out;
}

Eigen::MatrixXd stft_magnitude(const std::vector<double>& samples, const SpectralConfig& cfg) {
  return stft_complex(samples, cfg).cwiseAbs();
}

std::vector<double> istft(const Eigen::MatrixXcd& spec, const SpectralConfig& cfg, int64_t length) {
  cfg.validate();
  int win = cfg.window_size;
  int bins = cfg.n_freq_bins();
  if (spec.rows() != bins) throw DimensionError("istft expects " + std::to_string(bins) + " frequency bins");
  int64_t frames = spec.cols();
  int pad = win / 2;
  int64_t total = (frames - 1) * cfg.hop + win;

  auto window = hann_window(win);
  std::vector<double> acc(static_cast<size_t>(total), 0.0);
  std::vector<double> wsum(static_cast<size_t>(total), 0.0);
  std::vector<std::complex<double>> col(static_cast<size_t>(bins));
  std::vector<double> frame(static_cast<size_t>(win));
  for (int64_t t = 0; t < frames; ++t) {
    for (int b = 0; b < bins; ++b) col[static_cast<size_t>(b)] = spec(b, t);
    FftPlans::instance().inverse(win, col.data(), frame.data());
    double* dst = acc.data() + t * cfg.hop;
    double* wdst = wsum.data() + t * cfg.hop;
    for (int i = 0; i < win; ++i) {
      dst[i] += frame[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
      wdst[i] += window[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
    }
  }
  std::vector<double> out(static_cast<size_t>(length), 0.0);
  for (int64_t i = 0; i < length; ++i) {
    int64_t src = i + pad;
    if (src < total && wsum[static_cast<size_t>(src)] > 1e-9) {
      out[static_cast<size_t>(i)] = acc[static_cast<size_t>(src)] / wsum[static_cast<size_t>(src)];
    }
  }
  return out;
}

Eigen::MatrixXd mel_filterbank(const SpectralConfig& cfg) {
  cfg.validate();
  int bins = cfg.n_freq_bins();
  double mel_lo = hz_to_mel(cfg.fmin);
  double mel_hi = hz_to_mel(cfg.fmax);
  // n_mels + 2 mel-spaced corner points define the triangles
  std::vector<double> corners(static_cast<size_t>(cfg.n_mels + 2));
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    corners[static_cast<size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, bins);
  double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.window_size;
  for (int m = 0; m < cfg.n_mels; ++m) {
    double left = corners[static_cast<size_t>(m)];
    double center = corners[static_cast<size_t>(m + 1)];
    double right = corners[static_cast<size_t>(m + 2)];
    for (int b = 0; b < bins; ++b) {
      double f = b * bin_hz;
      double w = 0.0;
      if (f > left && f < right) {
        w = (f <= center) ? (f - left) / (center - left) : (right - f) / (right - center);
      }
      fb(m, b) = w;
    }
    double peak = fb.row(m).maxCoeff();
    if (peak <= 0.0) {
      // triangle narrower than one bin: fall back to the nearest bin
      int nearest = static_cast<int>(std::lround(center / bin_hz));
      nearest = std::clamp(nearest, 0, bins - 1);
      fb(m, nearest) = 1.0;
    } else {
      fb.row(m) /= peak;
    }
  }
  return fb;
}

Eigen::MatrixXd mel_project(const Eigen::MatrixXd& magnitude, const SpectralConfig& cfg) {
  cfg.validate();
  if (magnitude.rows() != cfg.n_freq_bins()) {
    throw DimensionError("mel_project expects " + std::to_string(cfg.n_freq_bins()) + " rows, got " +
                         std::to_string(magnitude.rows()));
  }
  if ((magnitude.array() < 0.0).any()) throw NumericError("mel_project input has negative magnitudes");
  static std::mutex mu;
  static std::unordered_map<uint64_t, Eigen::MatrixXd> cache;
  uint64_t key = cfg.fingerprint();
  Eigen::MatrixXd fb;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, mel_filterbank(cfg)).first;
    fb = it->second;
  }
  return fb * magnitude;
}

Eigen::MatrixXd mel_of_samples(const std::vector<double>& samples, const SpectralConfig& cfg) {
  return mel_project(stft_magnitude(samples, cfg), cfg);
}

NormStats compute_corpus_stats(const std::vector<Eigen::MatrixXd>& linear_mels, const SpectralConfig& cfg) {
  cfg.validate();
  if (linear_mels.empty()) throw DataError("cannot compute spectrogram statistics of an empty corpus");
  double sum = 0.0, sum2 = 0.0;
  int64_t n = 0;
  for (const auto& m : linear_mels) {
    for (int64_t i = 0; i < m.size(); ++i) {
      double v = std::log(std::max(m(i), cfg.log_floor));
      sum += v;
      sum2 += v * v;
      ++n;
    }
  }
  double mean = sum / n;
  double var = std::max(sum2 / n - mean * mean, 0.0);
  NormStats stats{mean, std::sqrt(var)};
  if (stats.scale <= 0.0) throw NumericError("degenerate spectrogram statistics (zero variance corpus)");
  return stats;
}

MelSpectrogram normalize(const Eigen::MatrixXd& linear_mel, const NormStats& stats, const SpectralConfig& cfg) {
  cfg.validate();
  if (stats.scale <= 0.0) throw NumericError("degenerate normalization statistics (scale <= 0)");
  MelSpectrogram out;
  out.values.resize(linear_mel.rows(), linear_mel.cols());
  for (int64_t i = 0; i < linear_mel.size(); ++i) {
    double v = std::log(std::max(linear_mel(i), cfg.log_floor));
    out.values(i) = std::clamp((v - stats.mean) / (3.0 * stats.scale), -1.0, 1.0);
  }
  out.norm_mean = stats.mean;
  out.norm_scale = stats.scale;
  out.source_rate = cfg.sample_rate;
  return out;
}

Eigen::MatrixXd denormalize(const MelSpectrogram& mspec, const SpectralConfig& cfg) {
  cfg.validate();
  if (mspec.norm_scale <= 0.0) throw NumericError("mel spectrogram carries degenerate statistics");
  Eigen::MatrixXd out(mspec.values.rows(), mspec.values.cols());
  for (int64_t i = 0; i < out.size(); ++i) {
    out(i) = std::exp(mspec.values(i) * 3.0 * mspec.norm_scale + mspec.norm_mean);
  }
  return out;
}

std::vector<double> griffin_lim_invert(const MelSpectrogram& mspec, const SpectralConfig& cfg, int64_t target_len,
                                       std::vector<double>* convergence_trace) {
  cfg.validate();
  if (mspec.values.rows() != cfg.n_mels) throw DimensionError("griffin_lim_invert mel row mismatch");

  // Lift 80 -> 513 magnitudes with the filterbank pseudo-inverse,
  // clamping the (slightly indefinite) result to non-negative values.
  Eigen::MatrixXd fb = mel_filterbank(cfg);
  Eigen::MatrixXd gram = fb * fb.transpose();
  Eigen::MatrixXd lift = fb.transpose() * gram.ldlt().solve(Eigen::MatrixXd::Identity(cfg.n_mels, cfg.n_mels));
  Eigen::MatrixXd target = (lift * denormalize(mspec, cfg)).cwiseMax(0.0);

  int64_t frames = target.cols();
  int64_t length = (frames - 1) * cfg.hop;  // centered framing: T = 1 + len/hop
  if (length < cfg.window_size) length = cfg.window_size;

  // zero initial phase keeps the inversion deterministic
  Eigen::MatrixXcd spec = target.cast<std::complex<double>>();
  std::vector<double> wave;
  for (int it = 0; it < cfg.griffin_lim_iters; ++it) {
    wave = istft(spec, cfg, length);
    Eigen::MatrixXcd est = stft_complex(wave, cfg);
    if (convergence_trace) {
      double err = (est.cwiseAbs() - target).norm() / std::max(target.norm(), 1e-12);
      convergence_trace->push_back(err);
    }
    for (int64_t i = 0; i < est.size(); ++i) {
      double mag = std::abs(est(i));
      spec(i) = (mag > 1e-12) ? target(i) * est(i) / mag : std::complex<double>(target(i), 0.0);
    }
  }
  wave = istft(spec, cfg, length);
  wave.resize(static_cast<size_t>(target_len), 0.0);
  return wave;
}

double spectral_distance(const std::vector<double>& a, const std::vector<double>& b, const SpectralConfig& cfg) {
  Eigen::MatrixXd ma = stft_magnitude(a, cfg);
  Eigen::MatrixXd mb = stft_magnitude(b, cfg);
  if (ma.cols() != mb.cols()) throw DimensionError("spectral_distance length mismatch");
  return (ma - mb).norm() / std::max(mb.norm(), 1e-12);
}

void save_spectrogram_cache(const std::string& path, const std::vector<Eigen::MatrixXf>& spectrograms) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write spectrogram cache: " + path);
  int64_t t = spectrograms.empty() ? 0 : spectrograms.front().cols();
  int64_t n_mels = spectrograms.empty() ? 0 : spectrograms.front().rows();
  for (const auto& m : spectrograms) {
    if (m.rows() != n_mels || m.cols() != t) throw DimensionError("spectrogram cache requires uniform shapes");
  }
  os.write("PMELSPC1", 8);
  uint32_t version = 1, mels = static_cast<uint32_t>(n_mels), frames = static_cast<uint32_t>(t),
           count = static_cast<uint32_t>(spectrograms.size());
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(&mels), 4);
  os.write(reinterpret_cast<const char*>(&frames), 4);
  os.write(reinterpret_cast<const char*>(&count), 4);
  std::vector<float> row(static_cast<size_t>(t));
  for (const auto& m : spectrograms) {
    for (int64_t r = 0; r < n_mels; ++r) {  // row-major on disk
      for (int64_t c = 0; c < t; ++c) row[static_cast<size_t>(c)] = m(r, c);
      os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(t * sizeof(float)));
    }
  }
  if (!os) throw DataError("failed writing spectrogram cache: " + path);
}

std::vector<Eigen::MatrixXf> load_spectrogram_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open spectrogram cache: " + path);
  char magic[9] = {0};
  is.read(magic, 8);
  if (!is || std::strncmp(magic, "PMELSPC1", 8) != 0) throw DataError("not a spectrogram cache: " + path);
  uint32_t version = 0, mels = 0, frames = 0, count = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&mels), 4);
  is.read(reinterpret_cast<char*>(&frames), 4);
  is.read(reinterpret_cast<char*>(&count), 4);
  if (!is) throw DataError("truncated spectrogram cache: " + path);
  if (version != 1) throw CompatibilityError("unsupported spectrogram cache version");
  std::vector<Eigen::MatrixXf> out(count);
  std::vector<float> row(frames);
  for (auto& m : out) {
    m.resize(mels, frames);
    for (uint32_t r = 0; r < mels; ++r) {
      is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(frames * sizeof(float)));
      if (!is) throw DataError("truncated spectrogram cache: " + path);
      for (uint32_t c = 0; c < frames; ++c) m(r, c) = row[c];
    }
  }
  return out;
}

void save_stats_sidecar(const std::string& path, const NormStats& stats) {
  nlohmann::json j{{"mean", stats.mean}, {"scale", stats.scale}};
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write stats sidecar: " + path);
  os << j.dump(2) << "\n";
}

NormStats load_stats_sidecar(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open stats sidecar: " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded() || !j.contains("mean") || !j.contains("scale")) {
    throw DataError("malformed stats sidecar: " + path);
  }
  return NormStats{j["mean"].get<double>(), j["scale"].get<double>()};
}

}  // namespace privmel::spectral
