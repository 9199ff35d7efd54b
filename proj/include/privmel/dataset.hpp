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

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "privmel/common.hpp"

namespace privmel::dataset {

constexpr int kTargetRate = 8000;
constexpr int kTargetLen = 8192;
constexpr int kGenderFemale = 0;
constexpr int kGenderMale = 1;

struct AudioClip {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate = 0;
  int digit = -1;    // 0..9
  int gender = -1;   // 0 female, 1 male
  std::string speaker_id;
  int repetition = -1;
  std::string path;  // source file, kept for diagnostics and manifests
};

struct DatasetSplit {
  std::vector<AudioClip> train;
  std::vector<AudioClip> test;
  std::set<std::string> train_speakers;
  std::set<std::string> test_speakers;
};

// RIFF/WAVE PCM 16-bit mono. Amplitudes map to [-1,1] by dividing by 32768.
std::vector<double> read_wav(const std::string& path, int* sample_rate);
void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate);

// JSON document mapping speaker_id -> {"gender": "female"|"male", ...};
// extra keys are ignored. Returns speaker -> 0/1.
std::map<std::string, int> load_gender_metadata(const std::string& metadata_path);

// Walks per-speaker subdirectories of `<digit>_<speaker>_<repetition>.wav`
// files. Deterministic: clips come back sorted by path.
std::vector<AudioClip> load_dataset(const std::string& root_path, const std::string& metadata_path);

// Rational-ratio polyphase resampler (Blackman-windowed sinc, cutoff at the
// lower Nyquist). Output length is round(n * dst_rate / src_rate).
std::vector<double> resample(const std::vector<double>& x, int src_rate, int dst_rate);

// Downsample to target_rate, then zero-pad at the end (or truncate, keeping
// the onset) to exactly target_len samples. Labels are preserved.
AudioClip prepare_clip(const AudioClip& clip, int target_rate = kTargetRate, int target_len = kTargetLen);

struct SplitSpec {
  int train_per_gender = 10;
  int test_per_gender = 2;
};

// Deterministic speaker-disjoint, gender-balanced split.
DatasetSplit split_speakers(const std::vector<AudioClip>& clips, uint64_t seed, SplitSpec spec = {});

// Prepared-clip cache: flat binary tensor file plus a CSV manifest with
// columns path,digit,gender,speaker_id,repetition.
void save_clip_cache(const std::string& tensor_path, const std::string& manifest_path,
                     const std::vector<AudioClip>& clips);
std::vector<AudioClip> load_clip_cache(const std::string& tensor_path, const std::string& manifest_path);

}  // namespace privmel::dataset
