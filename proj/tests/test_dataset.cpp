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
#include <fstream>

#include "privmel/dataset.hpp"
#include "support/oracles.hpp"
#include "support/synth_corpus.hpp"

using namespace privmel;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("WAV write/read round-trips within 16-bit quantization") {
  auto dir = fresh_dir("privmel_wav");
  std::vector<double> x(5000);
  Rng rng(1);
  for (auto& v : x) v = 0.8 * std::sin(0.01 * (&v - x.data())) + 0.05 * randn(rng);
  for (auto& v : x) v = std::clamp(v, -1.0, 1.0);
  auto path = (dir / "t.wav").string();
  dataset::write_wav(path, x, 8000);
  int rate = 0;
  auto y = dataset::read_wav(path, &rate);
  CHECK(rate == 8000);
  REQUIRE(y.size() == x.size());
  for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) <= 1.0 / 32768.0 + 1e-12);
}

TEST_CASE("load_dataset parses labels from filenames and metadata") {
  auto dir = fresh_dir("privmel_load");
  testing::CorpusSpec spec;
  spec.n_female = 1;
  spec.n_male = 1;
  spec.reps_per_digit = 2;
  spec.sample_rate = 48000;
  auto meta = testing::generate_corpus(dir.string(), spec);

  auto clips = dataset::load_dataset(dir.string(), meta);
  CHECK(clips.size() == 40);  // 2 speakers x 10 digits x 2 reps
  // females are numbered first by the generator
  const auto& first = clips.front();
  CHECK(first.digit == 0);
  CHECK(first.speaker_id == "01");
  CHECK(first.repetition == 0);
  CHECK(first.gender == dataset::kGenderFemale);
  CHECK(first.sample_rate == 48000);
  for (const auto& c : clips) {
    CHECK(c.digit >= 0);
    CHECK(c.digit <= 9);
    CHECK((c.gender == 0 || c.gender == 1));
  }
  // deterministic order
  auto again = dataset::load_dataset(dir.string(), meta);
  REQUIRE(again.size() == clips.size());
  for (size_t i = 0; i < clips.size(); ++i) CHECK(again[i].path == clips[i].path);
}

TEST_CASE("load_dataset edge cases: empty dir, raw pass-through, missing metadata, bad wav") {
  auto dir = fresh_dir("privmel_edge");
  std::ofstream(dir / "meta.json") << "{}";
  auto clips = dataset::load_dataset(dir.string(), (dir / "meta.json").string());
  CHECK(clips.empty());

  // one 48 kHz 30000-sample file passes through unprepared
  auto dir2 = fresh_dir("privmel_edge2");
  std::ofstream(dir2 / "meta.json") << R"({"07": {"gender": "male"}})";
  std::vector<double> x(30000, 0.25);
  dataset::write_wav((dir2 / "07" / "3_07_1.wav").string(), x, 48000);
  auto one = dataset::load_dataset(dir2.string(), (dir2 / "meta.json").string());
  REQUIRE(one.size() == 1);
  CHECK(one[0].sample_rate == 48000);
  CHECK(one[0].samples.size() == 30000);
  CHECK(one[0].digit == 3);
  CHECK(one[0].gender == dataset::kGenderMale);

  // speaker missing from metadata
  std::ofstream(dir2 / "meta.json", std::ios::trunc) << R"({"99": {"gender": "male"}})";
  CHECK_THROWS_AS(dataset::load_dataset(dir2.string(), (dir2 / "meta.json").string()), DataError);

  // malformed wav names the file
  auto dir3 = fresh_dir("privmel_edge3");
  std::ofstream(dir3 / "meta.json") << R"({"01": {"gender": "female"}})";
  std::ofstream(dir3 / "01" / "0_01_0.wav", std::ios::binary);  // fails: parent missing
  fs::create_directories(dir3 / "01");
  std::ofstream((dir3 / "01" / "0_01_0.wav").string(), std::ios::binary) << "not a wav";
  try {
    dataset::load_dataset(dir3.string(), (dir3 / "meta.json").string());
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("0_01_0.wav") != std::string::npos);
  }
}

TEST_CASE("resample agrees with the direct-evaluation oracle bit-for-bit in the interior") {
  Rng rng(3);
  std::vector<double> x(4000);
  for (auto& v : x) v = randn(rng) * 0.3;
  auto fast = dataset::resample(x, 48000, 8000);
  auto slow = testing::naive_sinc_resample(x, 48000, 8000);
  REQUIRE(fast.size() == slow.size());
  for (size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));

  // non-integer ratio too
  auto fast2 = dataset::resample(x, 44100, 8000);
  auto slow2 = testing::naive_sinc_resample(x, 44100, 8000);
  REQUIRE(fast2.size() == slow2.size());
  CHECK(fast2.size() == static_cast<size_t>(std::llround(4000.0 * 8000 / 44100)));
  for (size_t i = 0; i < fast2.size(); ++i) CHECK(fast2[i] == doctest::Approx(slow2[i]).epsilon(1e-12));
}

TEST_CASE("resampling a band-limited tone reproduces the analytic result") {
  // 1 kHz tone is far below both Nyquists, so the resampled signal must be
  // the same tone sampled at the new rate
  int src = 48000, dst = 8000;
  double f = 1000.0;
  std::vector<double> x(9600);
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * M_PI * f * static_cast<double>(i) / src);
  auto y = dataset::resample(x, src, dst);
  REQUIRE(y.size() == 1600);
  double worst = 0.0;
  for (size_t i = 200; i + 200 < y.size(); ++i) {  // skip filter edge transients
    double expect = std::sin(2.0 * M_PI * f * static_cast<double>(i) / dst);
    worst = std::max(worst, std::abs(y[i] - expect));
  }
  CHECK(worst < 5e-3);
}

TEST_CASE("prepare_clip pads, truncates, preserves labels, and is idempotent") {
  dataset::AudioClip clip;
  clip.sample_rate = 48000;
  clip.samples.assign(48000, 0.0);
  for (size_t i = 0; i < clip.samples.size(); ++i) clip.samples[i] = 0.5 * std::sin(0.001 * static_cast<double>(i));
  clip.digit = 7;
  clip.gender = 1;
  clip.speaker_id = "42";
  clip.repetition = 3;

  auto prepared = dataset::prepare_clip(clip);
  CHECK(prepared.samples.size() == 8192);
  CHECK(prepared.sample_rate == 8000);
  // 48000 samples -> 8000, then 192 zeros of padding
  for (size_t i = 8000; i < 8192; ++i) CHECK(prepared.samples[i] == 0.0);
  CHECK(prepared.digit == 7);
  CHECK(prepared.gender == 1);
  CHECK(prepared.speaker_id == "42");
  CHECK(prepared.repetition == 3);

  // already prepared -> bit identical
  auto twice = dataset::prepare_clip(prepared);
  CHECK(twice.samples == prepared.samples);

  // all-zero input of any length -> all-zero 8192
  dataset::AudioClip zero;
  zero.sample_rate = 8000;
  zero.samples.assign(3000, 0.0);
  auto zp = dataset::prepare_clip(zero);
  CHECK(zp.samples.size() == 8192);
  for (double v : zp.samples) CHECK(v == 0.0);

  // over-long clip keeps the onset
  dataset::AudioClip long_clip;
  long_clip.sample_rate = 8000;
  long_clip.samples.assign(10000, 0.0);
  long_clip.samples[0] = 0.9;
  auto trunc = dataset::prepare_clip(long_clip);
  CHECK(trunc.samples.size() == 8192);
  CHECK(trunc.samples[0] == 0.9);

  // upsampling is refused
  dataset::AudioClip low;
  low.sample_rate = 4000;
  low.samples.assign(4000, 0.0);
  CHECK_THROWS_AS(dataset::prepare_clip(low), DataError);
}

TEST_CASE("split_speakers is deterministic, disjoint and gender balanced") {
  // metadata-only clips covering the AudioMNIST geometry: 12 female and 48
  // male speakers, 500 clips each
  std::vector<dataset::AudioClip> clips;
  for (int s = 1; s <= 60; ++s) {
    for (int k = 0; k < 500; ++k) {
      dataset::AudioClip c;
      char id[8];
      std::snprintf(id, sizeof(id), "%02d", s);
      c.speaker_id = id;
      c.gender = (s <= 12) ? dataset::kGenderFemale : dataset::kGenderMale;
      c.digit = k % 10;
      c.repetition = k / 10;
      clips.push_back(c);
    }
  }
  auto split = dataset::split_speakers(clips, 0);
  CHECK(split.train.size() == 10000);
  CHECK(split.test.size() == 2000);
  CHECK(split.train_speakers.size() == 20);
  CHECK(split.test_speakers.size() == 4);
  for (const auto& s : split.test_speakers) CHECK(split.train_speakers.count(s) == 0);

  int train_f = 0, test_f = 0;
  for (const auto& c : split.train)
    if (c.gender == dataset::kGenderFemale) ++train_f;
  for (const auto& c : split.test)
    if (c.gender == dataset::kGenderFemale) ++test_f;
  CHECK(train_f == 5000);
  CHECK(test_f == 1000);

  auto split2 = dataset::split_speakers(clips, 0);
  CHECK(split2.train_speakers == split.train_speakers);
  CHECK(split2.test_speakers == split.test_speakers);
  auto split3 = dataset::split_speakers(clips, 1);
  CHECK(split3.train_speakers != split.train_speakers);

  // labels survive splitting
  for (const auto& c : split.train) CHECK((c.digit >= 0 && c.digit <= 9));
}

TEST_CASE("split_speakers handles the minimal 12F/12M corpus and rejects smaller ones") {
  std::vector<dataset::AudioClip> clips;
  for (int s = 1; s <= 24; ++s) {
    dataset::AudioClip c;
    c.speaker_id = std::to_string(s);
    c.gender = (s <= 12) ? 0 : 1;
    clips.push_back(c);
  }
  auto split = dataset::split_speakers(clips, 5);
  CHECK(split.train_speakers.size() == 20);
  CHECK(split.test_speakers.size() == 4);
  for (const auto& s : split.test_speakers) CHECK(split.train_speakers.count(s) == 0);

  clips.resize(23);  // 11 male
  try {
    dataset::split_speakers(clips, 5);
    CHECK(false);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("11 male") != std::string::npos);
  }
}

TEST_CASE("prepared clip cache round-trips samples and labels") {
  auto dir = fresh_dir("privmel_cache");
  testing::CorpusSpec spec;
  spec.n_female = 1;
  spec.n_male = 1;
  spec.reps_per_digit = 1;
  auto clips = testing::generate_clips(spec);
  std::vector<dataset::AudioClip> prepared;
  for (const auto& c : clips) prepared.push_back(dataset::prepare_clip(c));

  auto tpath = (dir / "clips.bin").string();
  auto mpath = (dir / "manifest.csv").string();
  dataset::save_clip_cache(tpath, mpath, prepared);
  auto loaded = dataset::load_clip_cache(tpath, mpath);
  REQUIRE(loaded.size() == prepared.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].digit == prepared[i].digit);
    CHECK(loaded[i].gender == prepared[i].gender);
    CHECK(loaded[i].speaker_id == prepared[i].speaker_id);
    CHECK(loaded[i].repetition == prepared[i].repetition);
    double worst = 0.0;
    for (size_t j = 0; j < 8192; ++j) worst = std::max(worst, std::abs(loaded[i].samples[j] - prepared[i].samples[j]));
    CHECK(worst < 1e-6);  // float32 cache
  }
  // manifest row count equals clip count
  std::ifstream ms(mpath);
  std::string line;
  int rows = -1;  // header
  while (std::getline(ms, line)) ++rows;
  CHECK(rows == static_cast<int>(prepared.size()));
}
