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
//
// Synthetic spoken-digit corpus with the AudioMNIST directory layout.
// Voices are harmonic stacks: the speaker's gender sets the fundamental
// frequency range (male ~105-130 Hz, female ~205-235 Hz), the digit sets
// a formant pair and a syllable envelope. Both labels are therefore
// recoverable from the audio by a classifier, which is what the privacy
// pipeline tests require.

#pragma once

#include <string>
#include <vector>

#include "privmel/dataset.hpp"

namespace privmel::testing {

struct CorpusSpec {
  int n_female = 2;
  int n_male = 2;
  int reps_per_digit = 5;  // clips per digit per speaker
  int sample_rate = 8000;
  uint64_t seed = 0;
};

// In-memory clips (unprepared: native rate, variable length).
std::vector<dataset::AudioClip> generate_clips(const CorpusSpec& spec);

// Writes <dir>/<speaker>/<digit>_<speaker>_<rep>.wav plus <dir>/meta.json;
// returns the metadata path.
std::string generate_corpus(const std::string& dir, const CorpusSpec& spec);

}  // namespace privmel::testing
