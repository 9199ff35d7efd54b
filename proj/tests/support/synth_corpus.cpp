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

#include "support/synth_corpus.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

namespace privmel::testing {

namespace {

struct DigitProfile {
  double f1, f2;                  // formant centers, Hz
  std::vector<double> bumps;      // syllable centers as fractions of the clip
};

const DigitProfile kDigits[10] = {
    {700, 1100, {0.5}},          // zero
    {320, 2400, {0.35, 0.70}},   // one
    {620, 1700, {0.5}},          // two
    {820, 2500, {0.30, 0.72}},   // three
    {460, 950, {0.40, 0.75}},    // four
    {950, 1450, {0.5}},          // five
    {380, 2900, {0.30, 0.68}},   // six
    {560, 3200, {0.35, 0.75}},   // seven
    {880, 2050, {0.5}},          // eight
    {420, 1350, {0.32, 0.70}},   // nine
};

struct Speaker {
  double f0;            // base fundamental
  double formant_scale; // small per-speaker vocal tract variation
  double tilt;          // spectral tilt exponent
};

Speaker make_speaker(int gender, Rng& rng) {
  Speaker s;
  s.f0 = (gender == dataset::kGenderMale) ? 105.0 + 25.0 * rand_uniform(rng) : 205.0 + 30.0 * rand_uniform(rng);
  s.formant_scale = 1.0 + 0.04 * (rand_uniform(rng) - 0.5);
  s.tilt = 0.75 + 0.15 * rand_uniform(rng);
  return s;
}

std::vector<double> synth_clip(const Speaker& spk, int digit, int sample_rate, Rng& rng) {
  const DigitProfile& prof = kDigits[digit];
  double dur = 0.55 + 0.25 * rand_uniform(rng);
  int64_t n = static_cast<int64_t>(dur * sample_rate);
  double f0 = spk.f0 * (1.0 + 0.03 * (rand_uniform(rng) - 0.5));
  double f1 = prof.f1 * spk.formant_scale, f2 = prof.f2 * spk.formant_scale;

  // formant gains evaluated at harmonic frequencies
  auto formant_gain = [&](double f) {
    double g = 0.25;  // glottal base
    g += 1.0 * std::exp(-0.5 * (f - f1) * (f - f1) / (110.0 * 110.0));
    g += 0.8 * std::exp(-0.5 * (f - f2) * (f - f2) / (160.0 * 160.0));
    return g;
  };

  double fmax = 0.45 * sample_rate;
  if (fmax > 3700.0) fmax = 3700.0;
  int n_harm = static_cast<int>(fmax / f0);
  std::vector<double> amp(static_cast<size_t>(n_harm) + 1, 0.0);
  std::vector<double> phase(static_cast<size_t>(n_harm) + 1, 0.0);
  for (int k = 1; k <= n_harm; ++k) {
    amp[static_cast<size_t>(k)] = formant_gain(k * f0) / std::pow(k, spk.tilt);
    phase[static_cast<size_t>(k)] = 2.0 * M_PI * rand_uniform(rng);
  }

  // digit-specific syllable envelope over a 25 ms attack/decay floor
  auto envelope = [&](double t) {
    double frac = t / dur;
    double e = 0.0;
    for (double c : prof.bumps) {
      double w = prof.bumps.size() > 1 ? 0.14 : 0.24;
      e += std::exp(-0.5 * (frac - c) * (frac - c) / (w * w));
    }
    double edge = std::min({1.0, t / 0.025, (dur - t) / 0.04});
    return std::max(edge, 0.0) * (0.12 + e);
  };

  std::vector<double> x(static_cast<size_t>(n), 0.0);
  double vib_rate = 5.0 + rand_uniform(rng);
  for (int64_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / sample_rate;
    // slight declination plus vibrato keeps the pitch track natural
    double inst_f0 = f0 * (1.0 - 0.04 * t / dur) * (1.0 + 0.004 * std::sin(2.0 * M_PI * vib_rate * t));
    double v = 0.0;
    for (int k = 1; k <= n_harm; ++k) {
      v += amp[static_cast<size_t>(k)] * std::sin(2.0 * M_PI * k * inst_f0 * t + phase[static_cast<size_t>(k)]);
    }
    x[static_cast<size_t>(i)] = envelope(t) * v + 0.002 * randn(rng);
  }
  double peak = 1e-9;
  for (double v : x) peak = std::max(peak, std::abs(v));
  double target = 0.4 + 0.15 * rand_uniform(rng);
  for (double& v : x) v *= target / peak;
  return x;
}

}  // namespace

std::vector<dataset::AudioClip> generate_clips(const CorpusSpec& spec) {
  Rng rng(spec.seed);
  std::vector<dataset::AudioClip> clips;
  int speaker_index = 1;
  for (int g : {dataset::kGenderFemale, dataset::kGenderMale}) {
    int count = (g == dataset::kGenderFemale) ? spec.n_female : spec.n_male;
    for (int s = 0; s < count; ++s, ++speaker_index) {
      Speaker spk = make_speaker(g, rng);
      char id[8];
      std::snprintf(id, sizeof(id), "%02d", speaker_index);
      for (int digit = 0; digit < 10; ++digit) {
        for (int rep = 0; rep < spec.reps_per_digit; ++rep) {
          dataset::AudioClip c;
          c.samples = synth_clip(spk, digit, spec.sample_rate, rng);
          c.sample_rate = spec.sample_rate;
          c.digit = digit;
          c.gender = g;
          c.speaker_id = id;
          c.repetition = rep;
          clips.push_back(std::move(c));
        }
      }
    }
  }
  return clips;
}

std::string generate_corpus(const std::string& dir, const CorpusSpec& spec) {
  namespace fs = std::filesystem;
  auto clips = generate_clips(spec);
  std::string meta = "{\n";
  std::string last_speaker;
  bool first = true;
  for (const auto& c : clips) {
    fs::path p = fs::path(dir) / c.speaker_id /
                 (std::to_string(c.digit) + "_" + c.speaker_id + "_" + std::to_string(c.repetition) + ".wav");
    dataset::write_wav(p.string(), c.samples, c.sample_rate);
    if (c.speaker_id != last_speaker) {
      if (!first) meta += ",\n";
      meta += "  \"" + c.speaker_id + "\": {\"gender\": \"" +
              (c.gender == dataset::kGenderFemale ? "female" : "male") + "\", \"accent\": \"synthetic\"}";
      last_speaker = c.speaker_id;
      first = false;
    }
  }
  meta += "\n}\n";
  fs::create_directories(dir);
  std::string meta_path = (fs::path(dir) / "meta.json").string();
  std::ofstream os(meta_path);
  os << meta;
  return meta_path;
}

}  // namespace privmel::testing
