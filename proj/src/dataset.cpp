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

#include "privmel/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace privmel::dataset {

namespace fs = std::filesystem;

namespace {

template <typename T>
T read_le(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("malformed WAV (unexpected end of file): " + path);
  return v;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

std::vector<double> read_wav(const std::string& path, int* sample_rate) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open WAV file: " + path);

  char tag[5] = {0};
  is.read(tag, 4);
  if (!is || std::strncmp(tag, "RIFF", 4) != 0) throw DataError("malformed WAV (missing RIFF): " + path);
  read_le<uint32_t>(is, path);  // overall size, unused
  is.read(tag, 4);
  if (!is || std::strncmp(tag, "WAVE", 4) != 0) throw DataError("malformed WAV (missing WAVE): " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<double> samples;

  while (is.read(tag, 4)) {
    uint32_t chunk = read_le<uint32_t>(is, path);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      if (chunk < 16) throw DataError("malformed WAV (short fmt chunk): " + path);
      format = read_le<uint16_t>(is, path);
      channels = read_le<uint16_t>(is, path);
      rate = read_le<uint32_t>(is, path);
      read_le<uint32_t>(is, path);  // byte rate
      read_le<uint16_t>(is, path);  // block align
      bits = read_le<uint16_t>(is, path);
      is.ignore(chunk - 16);
      have_fmt = true;
    } else if (std::strncmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw DataError("malformed WAV (data before fmt): " + path);
      if (format != 1 || bits != 16) throw DataError("unsupported WAV encoding (need PCM16): " + path);
      if (channels != 1) throw DataError("unsupported WAV channel count (need mono): " + path);
      size_t n = chunk / 2;
      samples.resize(n);
      std::vector<int16_t> raw(n);
      is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 2));
      if (!is) throw DataError("malformed WAV (truncated data chunk): " + path);
      for (size_t i = 0; i < n; ++i) samples[i] = raw[i] / 32768.0;
      if (sample_rate) *sample_rate = static_cast<int>(rate);
      return samples;
    } else {
      // skip unknown chunk, padded to even size
      is.ignore(chunk + (chunk & 1));
    }
  }
  throw DataError("malformed WAV (no data chunk): " + path);
}

void write_wav(const std::string& path, const std::vector<double>& samples, int sample_rate) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open WAV file for writing: " + path);
  uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  write_le<uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_le<uint32_t>(os, 16);
  write_le<uint16_t>(os, 1);  // PCM
  write_le<uint16_t>(os, 1);  // mono
  write_le<uint32_t>(os, static_cast<uint32_t>(sample_rate));
  write_le<uint32_t>(os, static_cast<uint32_t>(sample_rate * 2));
  write_le<uint16_t>(os, 2);
  write_le<uint16_t>(os, 16);
  os.write("data", 4);
  write_le<uint32_t>(os, data_bytes);
  for (double s : samples) {
    // mirror of the read mapping (divide by 32768), saturated at int16 max
    long v = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
    v = std::clamp(v, -32768l, 32767l);
    write_le<int16_t>(os, static_cast<int16_t>(v));
  }
  if (!os) throw DataError("failed writing WAV file: " + path);
}

std::map<std::string, int> load_gender_metadata(const std::string& metadata_path) {
  std::ifstream is(metadata_path);
  if (!is) throw DataError("cannot open metadata file: " + metadata_path);
  nlohmann::json doc = nlohmann::json::parse(is, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw DataError("metadata is not a JSON object: " + metadata_path);
  std::map<std::string, int> out;
  for (auto& [speaker, entry] : doc.items()) {
    if (!entry.is_object() || !entry.contains("gender")) {
      throw DataError("metadata entry for speaker '" + speaker + "' has no gender field");
    }
    std::string g = entry["gender"].get<std::string>();
    if (g == "female") {
      out[speaker] = kGenderFemale;
    } else if (g == "male") {
      out[speaker] = kGenderMale;
    } else {
      throw DataError("metadata gender for speaker '" + speaker + "' must be female|male, got '" + g + "'");
    }
  }
  return out;
}

std::vector<AudioClip> load_dataset(const std::string& root_path, const std::string& metadata_path) {
  if (!fs::is_directory(root_path)) throw DataError("dataset root is not a directory: " + root_path);
  auto genders = load_gender_metadata(metadata_path);

  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root_path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<AudioClip> clips;
  clips.reserve(files.size());
  for (const auto& f : files) {
    // <digit>_<speaker>_<repetition>.wav
    std::string stem = f.stem().string();
    size_t u1 = stem.find('_');
    size_t u2 = stem.rfind('_');
    if (u1 == std::string::npos || u2 == u1) {
      throw DataError("clip filename does not match <digit>_<speaker>_<repetition>.wav: " + f.string());
    }
    AudioClip c;
    try {
      c.digit = std::stoi(stem.substr(0, u1));
      c.repetition = std::stoi(stem.substr(u2 + 1));
    } catch (const std::exception&) {
      throw DataError("clip filename does not match <digit>_<speaker>_<repetition>.wav: " + f.string());
    }
    c.speaker_id = stem.substr(u1 + 1, u2 - u1 - 1);
    if (c.digit < 0 || c.digit > 9) throw DataError("digit out of range in filename: " + f.string());
    auto it = genders.find(c.speaker_id);
    if (it == genders.end()) {
      throw DataError("no metadata gender for speaker '" + c.speaker_id + "' (file " + f.string() + ")");
    }
    c.gender = it->second;
    c.samples = read_wav(f.string(), &c.sample_rate);
    c.path = f.string();
    clips.push_back(std::move(c));
  }
  return clips;
}

std::vector<double> resample(const std::vector<double>& x, int src_rate, int dst_rate) {
  if (src_rate <= 0 || dst_rate <= 0) throw DataError("invalid sample rates for resampling");
  if (src_rate == dst_rate) return x;
  int g = std::gcd(src_rate, dst_rate);
  int up = dst_rate / g;    // L
  int down = src_rate / g;  // M

  // Blackman-windowed sinc on the upsampled grid, cutoff at the lower
  // Nyquist, 16 sinc lobes per side. Gain `up` compensates the zero
  // insertion of the polyphase expansion.
  const int lobes = 16;
  int m = std::max(up, down);
  int half = lobes * m;
  auto kernel = [&](int64_t j) -> double {
    if (j == 0) return 1.0 / m;
    double u = static_cast<double>(j) / m;  // in lower-rate sample units
    double s = std::sin(M_PI * u) / (M_PI * u) / m;
    double w = 0.42 + 0.5 * std::cos(M_PI * j / half) + 0.08 * std::cos(2.0 * M_PI * j / half);
    return s * w;
  };

  // Per-phase tap tables: output n sits at upsampled index n*down, phase
  // p = (n*down) mod up, source anchor floor(n*down/up).
  std::vector<std::vector<double>> phase_taps(static_cast<size_t>(up));
  int taps_per_phase = 2 * half / up + 2;
  for (int p = 0; p < up; ++p) {
    auto& taps = phase_taps[static_cast<size_t>(p)];
    taps.resize(static_cast<size_t>(taps_per_phase));
    for (int k = 0; k < taps_per_phase; ++k) {
      // source sample (anchor - k + offset) sits at upsampled offset p + (k - offset)*up
      int64_t j = static_cast<int64_t>(p) + (static_cast<int64_t>(k) - taps_per_phase / 2) * up;
      taps[static_cast<size_t>(k)] = (std::llabs(j) <= half) ? up * kernel(j) : 0.0;
    }
  }

  int64_t n_in = static_cast<int64_t>(x.size());
  int64_t n_out = static_cast<int64_t>(std::llround(static_cast<double>(n_in) * dst_rate / src_rate));
  std::vector<double> y(static_cast<size_t>(n_out), 0.0);
  for (int64_t n = 0; n < n_out; ++n) {
    int64_t u = n * down;
    int64_t anchor = u / up;
    int p = static_cast<int>(u % up);
    const auto& taps = phase_taps[static_cast<size_t>(p)];
    double acc = 0.0;
    for (int k = 0; k < taps_per_phase; ++k) {
      int64_t src = anchor + taps_per_phase / 2 - k;
      if (src >= 0 && src < n_in) acc += taps[static_cast<size_t>(k)] * x[static_cast<size_t>(src)];
    }
    y[static_cast<size_t>(n)] = acc;
  }
  return y;
}

AudioClip prepare_clip(const AudioClip& clip, int target_rate, int target_len) {
  if (clip.sample_rate < target_rate) {
    throw DataError("cannot upsample clip from " + std::to_string(clip.sample_rate) + " Hz to " +
                    std::to_string(target_rate) + " Hz: " + clip.path);
  }
  AudioClip out = clip;
  if (clip.sample_rate != target_rate) {
    out.samples = resample(clip.samples, clip.sample_rate, target_rate);
    out.sample_rate = target_rate;
    // the windowed-sinc filter can overshoot slightly; keep the amplitude invariant
    for (double& v : out.samples) v = std::clamp(v, -1.0, 1.0);
  }
  if (static_cast<int>(out.samples.size()) > target_len) {
    out.samples.resize(static_cast<size_t>(target_len));  // keep the onset
  } else {
    out.samples.resize(static_cast<size_t>(target_len), 0.0);
  }
  return out;
}

DatasetSplit split_speakers(const std::vector<AudioClip>& clips, uint64_t seed, SplitSpec spec) {
  std::map<std::string, int> speaker_gender;
  for (const auto& c : clips) {
    auto [it, inserted] = speaker_gender.emplace(c.speaker_id, c.gender);
    if (!inserted && it->second != c.gender) {
      throw DataError("inconsistent gender labels for speaker '" + c.speaker_id + "'");
    }
  }
  std::vector<std::string> female, male;
  for (const auto& [spk, g] : speaker_gender) (g == kGenderFemale ? female : male).push_back(spk);

  int need = spec.train_per_gender + spec.test_per_gender;
  if (static_cast<int>(female.size()) < need || static_cast<int>(male.size()) < need) {
    throw DataError("not enough speakers to split: need " + std::to_string(need) + " per gender, have " +
                    std::to_string(female.size()) + " female and " + std::to_string(male.size()) + " male");
  }

  Rng rng(seed);
  std::shuffle(female.begin(), female.end(), rng);
  std::shuffle(male.begin(), male.end(), rng);

  DatasetSplit split;
  for (const auto* pool : {&female, &male}) {
    for (int i = 0; i < spec.train_per_gender; ++i) split.train_speakers.insert((*pool)[static_cast<size_t>(i)]);
    for (int i = 0; i < spec.test_per_gender; ++i) {
      split.test_speakers.insert((*pool)[static_cast<size_t>(spec.train_per_gender + i)]);
    }
  }
  for (const auto& c : clips) {
    if (split.train_speakers.count(c.speaker_id)) {
      split.train.push_back(c);
    } else if (split.test_speakers.count(c.speaker_id)) {
      split.test.push_back(c);
    }
  }
  return split;
}

void save_clip_cache(const std::string& tensor_path, const std::string& manifest_path,
                     const std::vector<AudioClip>& clips) {
  for (const auto& c : clips) {
    if (static_cast<int>(c.samples.size()) != kTargetLen || c.sample_rate != kTargetRate) {
      throw DataError("clip cache expects prepared clips (8 kHz / 8192 samples): " + c.path);
    }
  }
  {
    std::ofstream os(tensor_path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write clip cache: " + tensor_path);
    os.write("PMELWAV1", 8);
    write_le<uint32_t>(os, 1);  // version
    write_le<uint32_t>(os, static_cast<uint32_t>(clips.size()));
    write_le<uint32_t>(os, kTargetLen);
    write_le<uint32_t>(os, kTargetRate);
    std::vector<float> buf(kTargetLen);
    for (const auto& c : clips) {
      for (int i = 0; i < kTargetLen; ++i) buf[static_cast<size_t>(i)] = static_cast<float>(c.samples[static_cast<size_t>(i)]);
      os.write(reinterpret_cast<const char*>(buf.data()), kTargetLen * sizeof(float));
    }
    if (!os) throw DataError("failed writing clip cache: " + tensor_path);
  }
  std::ofstream ms(manifest_path, std::ios::trunc);
  if (!ms) throw DataError("cannot write manifest: " + manifest_path);
  ms << "path,digit,gender,speaker_id,repetition\n";
  for (const auto& c : clips) {
    ms << c.path << "," << c.digit << "," << c.gender << "," << c.speaker_id << "," << c.repetition << "\n";
  }
}

std::vector<AudioClip> load_clip_cache(const std::string& tensor_path, const std::string& manifest_path) {
  std::ifstream is(tensor_path, std::ios::binary);
  if (!is) throw DataError("cannot open clip cache: " + tensor_path);
  char magic[9] = {0};
  is.read(magic, 8);
  if (!is || std::strncmp(magic, "PMELWAV1", 8) != 0) throw DataError("not a clip cache file: " + tensor_path);
  auto version = read_le<uint32_t>(is, tensor_path);
  if (version != 1) throw CompatibilityError("unsupported clip cache version " + std::to_string(version));
  auto count = read_le<uint32_t>(is, tensor_path);
  auto len = read_le<uint32_t>(is, tensor_path);
  auto rate = read_le<uint32_t>(is, tensor_path);
  if (len != kTargetLen || rate != kTargetRate) {
    throw CompatibilityError("clip cache geometry mismatch in " + tensor_path);
  }

  std::ifstream ms(manifest_path);
  if (!ms) throw DataError("cannot open manifest: " + manifest_path);
  std::string line;
  std::getline(ms, line);  // header
  std::vector<AudioClip> clips;
  clips.reserve(count);
  std::vector<float> buf(len);
  for (uint32_t i = 0; i < count; ++i) {
    if (!std::getline(ms, line)) throw DataError("manifest has fewer rows than cache entries: " + manifest_path);
    std::stringstream ss(line);
    AudioClip c;
    std::string field;
    std::getline(ss, c.path, ',');
    std::getline(ss, field, ',');
    c.digit = std::stoi(field);
    std::getline(ss, field, ',');
    c.gender = std::stoi(field);
    std::getline(ss, c.speaker_id, ',');
    std::getline(ss, field, ',');
    c.repetition = std::stoi(field);
    c.sample_rate = static_cast<int>(rate);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(len * sizeof(float)));
    if (!is) throw DataError("truncated clip cache: " + tensor_path);
    c.samples.assign(buf.begin(), buf.end());
    clips.push_back(std::move(c));
  }
  return clips;
}

}  // namespace privmel::dataset
