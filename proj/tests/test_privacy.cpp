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

#include "privmel/privacy_training.hpp"
#include "support/oracles.hpp"
#include "support/synth_corpus.hpp"

using namespace privmel;
using nn::TensorD;

namespace {

// tiny double-precision models for gradient and analytic-value tests
struct MiniModels {
  networks::UNetT<double> filter;
  networks::UNetT<double> generator;
  networks::SpectrogramNetT<double> disc_f;
  networks::SpectrogramNetT<double> disc_g;

  explicit MiniModels(Rng& rng)
      : filter("F", filter_cfg(), rng),
        generator("G", gen_cfg(), rng),
        disc_f("DF", disc_cfg(2), rng),
        disc_g("DG", disc_cfg(3), rng) {}

  static networks::UNetConfig filter_cfg() { return {1, 2, 2, 1}; }
  static networks::UNetConfig gen_cfg() { return {1, 2, 3, 1}; }
  static networks::DiscriminatorConfig disc_cfg(int classes) {
    networks::DiscriminatorConfig c;
    c.base_channels = 2;
    c.hidden = 8;
    c.num_classes = classes;
    c.in_h = 16;
    c.in_w = 12;
    return c;
  }
};

template <typename Net>
void zero_head(Net& net) {
  for (auto* p : net.params()) {
    if (p->name.find(".fc2.") != std::string::npos) p->value.fill(0.0);
  }
}

template <typename Net>
void set_head_bias(Net& net, const std::vector<double>& bias) {
  for (auto* p : net.params()) {
    if (p->name.find(".fc2.w") != std::string::npos) p->value.fill(0.0);
    if (p->name.find(".fc2.b") != std::string::npos) {
      for (size_t i = 0; i < bias.size(); ++i) p->value[static_cast<int64_t>(i)] = bias[i];
    }
  }
}

}  // namespace

TEST_CASE("distortion penalty semantics over a grid including the boundary") {
  CHECK(training::distortion_penalty(0.005, 0.01, 100.0) == 0.0);
  CHECK(training::distortion_penalty(0.02, 0.01, 100.0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(training::distortion_penalty(0.01, 0.01, 100.0) == 0.0);
  CHECK(training::distortion_penalty(0.0, 0.05, 100.0) == 0.0);
  for (double d = 0.0; d <= 0.2001; d += 0.005) {
    double expect = d <= 0.05 ? 0.0 : 100.0 * (d - 0.05) * (d - 0.05);
    CHECK(training::distortion_penalty(d, 0.05, 100.0) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK_THROWS_AS(training::distortion_penalty(-0.1, 0.01, 100.0), NumericError);
}

TEST_CASE("filter loss: uniform critic gives -ln 2 plus penalty; budgeted batch gives exactly -CE") {
  Rng rng(31);
  MiniModels mm(rng);
  zero_head(mm.disc_f);

  TensorD m = TensorD::randn({4, 1, 16, 12}, rng, 0.4);
  TensorD z = TensorD::randn({4, 1, 16, 12}, rng);
  std::vector<int> s{0, 1, 1, 0};

  auto lf = training::filter_loss<double>(mm.filter, mm.disc_f, m, z, s, 0.01, 100.0, false);
  CHECK(lf.cross_entropy == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(lf.loss == doctest::Approx(-std::log(2.0) +
                                   training::distortion_penalty(lf.mean_distortion, 0.01, 100.0))
                       .epsilon(1e-9));

  // huge budget: the penalty vanishes exactly and the loss is -CE
  auto lf2 = training::filter_loss<double>(mm.filter, mm.disc_f, m, z, s, 10.0, 100.0, false);
  CHECK(lf2.loss == -lf2.cross_entropy);
}

TEST_CASE("generator and critic losses reproduce the analytic uniform/perfect values") {
  Rng rng(32);
  MiniModels mm(rng);

  TensorD m = TensorD::randn({4, 1, 16, 12}, rng, 0.4);
  TensorD mp = TensorD::randn({4, 1, 16, 12}, rng, 0.4);
  TensorD mpp = TensorD::randn({4, 1, 16, 12}, rng, 0.4);
  TensorD z2 = TensorD::randn({4, 1, 16, 12}, rng);
  std::vector<int> s{0, 1, 0, 1};
  std::vector<int> s_syn{1, 1, 1, 1};

  // uniform 3-class critic: CE(fake) + CE(s) = ln 3 + ln 3
  zero_head(mm.disc_g);
  auto ldg = training::disc_generator_loss<double>(mm.disc_g, m, mpp, s, false);
  CHECK(ldg.loss == doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-12));

  // critic that puts all mass on class 1: generator CE term vanishes when
  // every synthetic attribute is 1, leaving exactly the penalty
  set_head_bias(mm.disc_g, {-40.0, 40.0, -40.0});
  auto lg = training::generator_loss<double>(mm.generator, mm.disc_g, m, mp, s, s_syn, z2, 0.01, 100.0,
                                             "synthetic", false);
  CHECK(lg.cross_entropy == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(lg.loss == doctest::Approx(training::distortion_penalty(lg.mean_distortion, 0.01, 100.0)).epsilon(1e-9));

  // perfect binary critic on constant-label batches
  set_head_bias(mm.disc_f, {40.0, -40.0});
  auto ldf = training::disc_filter_loss<double>(mm.disc_f, mp, {0, 0, 0, 0}, false);
  CHECK(ldf.loss == doctest::Approx(0.0).epsilon(1e-9));
  zero_head(mm.disc_f);
  auto ldf_u = training::disc_filter_loss<double>(mm.disc_f, mp, s, false);
  CHECK(ldf_u.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // the three generator label modes target different classes
  Rng rng2(33);
  MiniModels mm2(rng2);
  auto l_syn = training::generator_loss<double>(mm2.generator, mm2.disc_g, m, mp, s, s_syn, z2, 10.0, 100.0,
                                                "synthetic", false);
  auto l_orig = training::generator_loss<double>(mm2.generator, mm2.disc_g, m, mp, s, s_syn, z2, 10.0, 100.0,
                                                 "original", false);
  auto l_fake = training::generator_loss<double>(mm2.generator, mm2.disc_g, m, mp, s, s_syn, z2, 10.0, 100.0,
                                                 "fake", false);
  CHECK(l_syn.loss != l_orig.loss);
  CHECK(l_syn.loss != l_fake.loss);
  CHECK_THROWS_AS(training::generator_loss<double>(mm2.generator, mm2.disc_g, m, mp, s, s_syn, z2, 10.0, 100.0,
                                                   "nonsense", false),
                  ConfigError);
}

TEST_CASE("all four losses pass central finite-difference gradient checks") {
  Rng rng(34);
  MiniModels mm(rng);
  TensorD m = TensorD::randn({3, 1, 16, 12}, rng, 0.4);
  TensorD z1 = TensorD::randn({3, 1, 16, 12}, rng);
  TensorD z2 = TensorD::randn({3, 1, 16, 12}, rng);
  std::vector<int> s{0, 1, 1};
  std::vector<int> s_syn{1, 0, 1};
  const double eps = 0.02, lambda = 100.0;  // small budget keeps the penalty active

  SUBCASE("filter loss -> filter parameters") {
    auto params = mm.filter.params();
    nn::zero_grads(params);
    training::filter_loss<double>(mm.filter, mm.disc_f, m, z1, s, eps, lambda, true);
    auto analytic = testing::grads_of(params);
    auto rep = testing::fd_check(
        params, analytic,
        [&] { return training::filter_loss<double>(mm.filter, mm.disc_f, m, z1, s, eps, lambda, false).loss; },
        1e-4, 6, 3);
    CHECK(rep.frac_within >= 0.95);
  }

  SUBCASE("generator loss -> generator parameters") {
    TensorD mp;
    training::filter_loss<double>(mm.filter, mm.disc_f, m, z1, s, eps, lambda, false, &mp);
    auto params = mm.generator.params();
    nn::zero_grads(params);
    training::generator_loss<double>(mm.generator, mm.disc_g, m, mp, s, s_syn, z2, eps, lambda, "synthetic", true);
    auto analytic = testing::grads_of(params);
    auto rep = testing::fd_check(
        params, analytic,
        [&] {
          return training::generator_loss<double>(mm.generator, mm.disc_g, m, mp, s, s_syn, z2, eps, lambda,
                                                  "synthetic", false)
              .loss;
        },
        1e-4, 6, 3);
    CHECK(rep.frac_within >= 0.95);
  }

  SUBCASE("critic losses -> critic parameters") {
    TensorD mp = TensorD::randn({3, 1, 16, 12}, rng, 0.5);
    TensorD mpp = TensorD::randn({3, 1, 16, 12}, rng, 0.5);
    auto params = mm.disc_f.params();
    nn::zero_grads(params);
    training::disc_filter_loss<double>(mm.disc_f, mp, s, true);
    auto analytic = testing::grads_of(params);
    auto rep = testing::fd_check(
        params, analytic,
        [&] { return training::disc_filter_loss<double>(mm.disc_f, mp, s, false).loss; }, 1e-4, 6, 3);
    CHECK(rep.frac_within >= 0.95);

    auto gparams = mm.disc_g.params();
    nn::zero_grads(gparams);
    training::disc_generator_loss<double>(mm.disc_g, m, mpp, s, true);
    auto ganalytic = testing::grads_of(gparams);
    auto grep = testing::fd_check(
        gparams, ganalytic,
        [&] { return training::disc_generator_loss<double>(mm.disc_g, m, mpp, s, false).loss; }, 1e-4, 6, 3);
    CHECK(grep.frac_within >= 0.95);
  }
}

TEST_CASE("gradient isolation: stepping one player leaves the others' parameters untouched") {
  Rng rng(35);
  MiniModels mm(rng);
  TensorD m = TensorD::randn({3, 1, 16, 12}, rng, 0.4);
  TensorD z1 = TensorD::randn({3, 1, 16, 12}, rng);
  std::vector<int> s{0, 1, 1};

  auto fp = mm.filter.params();
  auto dfp = mm.disc_f.params();
  uint64_t f_before = nn::params_hash(fp);
  uint64_t df_before = nn::params_hash(dfp);

  nn::zero_grads(fp);
  TensorD mp;
  training::filter_loss<double>(mm.filter, mm.disc_f, m, z1, s, 0.01, 100.0, true, &mp);
  nn::AdamT<double> opt(4e-4, 0.5, 0.9);
  opt.step(fp);
  CHECK(nn::params_hash(fp) != f_before);
  CHECK(nn::params_hash(dfp) == df_before);  // critic untouched by the filter step

  uint64_t f_mid = nn::params_hash(fp);
  nn::zero_grads(dfp);
  training::disc_filter_loss<double>(mm.disc_f, mp, s, true);
  nn::AdamT<double> opt_d(4e-4, 0.5, 0.9);
  opt_d.step(dfp);
  CHECK(nn::params_hash(dfp) != df_before);
  CHECK(nn::params_hash(fp) == f_mid);  // filter untouched by the critic step
}

TEST_CASE("critic converges on a linearly separable toy batch and spares real data the fake label") {
  Rng rng(36);
  MiniModels mm(rng);

  // separable censored batch: gender encoded as the sign of the top rows
  int64_t n = 16;
  TensorD mp({n, 1, 16, 12});
  std::vector<int> s(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    s[static_cast<size_t>(i)] = static_cast<int>(i % 2);
    double v = (i % 2 == 0) ? -0.5 : 0.5;
    for (int64_t j = 0; j < 16 * 12; ++j) mp[i * 16 * 12 + j] = v + 0.05 * randn(rng);
  }
  auto dfp = mm.disc_f.params();
  nn::AdamT<double> opt(1e-3, 0.5, 0.9);
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 120; ++step) {
    nn::zero_grads(dfp);
    auto l = training::disc_filter_loss<double>(mm.disc_f, mp, s, true);
    opt.step(dfp);
    if (step == 0) first = l.loss;
    last = l.loss;
  }
  CHECK(last < first);
  CHECK(last < 0.2);

  // 3-class critic: after toy convergence real samples are never "fake"
  TensorD real({n, 1, 16, 12});
  TensorD fake({n, 1, 16, 12});
  for (int64_t i = 0; i < n; ++i) {
    double v = (i % 2 == 0) ? -0.5 : 0.5;
    for (int64_t j = 0; j < 16 * 12; ++j) {
      real[i * 16 * 12 + j] = v + 0.05 * randn(rng);
      fake[i * 16 * 12 + j] = 2.0 * randn(rng);  // obviously off-manifold
    }
  }
  auto dgp = mm.disc_g.params();
  nn::AdamT<double> opt_g(1e-3, 0.5, 0.9);
  for (int step = 0; step < 150; ++step) {
    nn::zero_grads(dgp);
    training::disc_generator_loss<double>(mm.disc_g, real, fake, s, true);
    opt_g.step(dgp);
  }
  nn::GraphT<double> g;
  auto* probs = mm.disc_g.forward_probs(g, g.input(real), false);
  for (int64_t i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (probs->value[i * 3 + k] > probs->value[i * 3 + best]) best = k;
    CHECK(best != 2);
  }
}

TEST_CASE("synthetic attribute draws are independent of the true labels") {
  Rng rng(37);
  int n = 10000;
  std::vector<double> s(static_cast<size_t>(n)), s_syn(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    s[static_cast<size_t>(i)] = (i % 2) ? 1.0 : 0.0;  // alternating true labels
    s_syn[static_cast<size_t>(i)] = rand_uniform(rng) < 0.5 ? 0.0 : 1.0;
  }
  double ms = 0, msy = 0;
  for (int i = 0; i < n; ++i) {
    ms += s[static_cast<size_t>(i)];
    msy += s_syn[static_cast<size_t>(i)];
  }
  ms /= n;
  msy /= n;
  double num = 0, da = 0, db = 0;
  for (int i = 0; i < n; ++i) {
    num += (s[static_cast<size_t>(i)] - ms) * (s_syn[static_cast<size_t>(i)] - msy);
    da += std::pow(s[static_cast<size_t>(i)] - ms, 2);
    db += std::pow(s_syn[static_cast<size_t>(i)] - msy, 2);
  }
  CHECK(std::abs(num / std::sqrt(da * db)) < 0.05);
}

namespace {

training::TrainConfig tiny_train_config(const std::string& mode, uint64_t seed) {
  training::TrainConfig cfg;
  cfg.mode = mode;
  cfg.seed = seed;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.epsilon = 0.05;
  cfg.checkpoint_interval_epochs = 1;
  cfg.filter_net = {1, 2, 2, 1};
  cfg.generator_net = {1, 2, 3, 1};
  cfg.disc_base_channels = 2;
  cfg.disc_hidden = 8;
  return cfg;
}

training::SpectrogramDataset tiny_dataset() {
  testing::CorpusSpec spec;
  spec.n_female = 1;
  spec.n_male = 1;
  spec.reps_per_digit = 2;
  auto clips = testing::generate_clips(spec);
  std::vector<dataset::AudioClip> prepared;
  for (const auto& c : clips) prepared.push_back(dataset::prepare_clip(c));
  spectral::SpectralConfig scfg;
  return training::build_spectrogram_dataset(prepared, scfg);
}

}  // namespace

TEST_CASE("training is deterministic, finite, and resumable from checkpoints") {
  auto data = tiny_dataset();
  spectral::SpectralConfig scfg;

  auto r1 = training::train_on_spectrograms(data, tiny_train_config("full", 7), scfg);
  auto r2 = training::train_on_spectrograms(data, tiny_train_config("full", 7), scfg);
  REQUIRE(r1.logs.size() == r2.logs.size());
  REQUIRE(!r1.logs.empty());
  for (size_t i = 0; i < r1.logs.size(); ++i) {
    CHECK(std::abs(r1.logs[i].loss_filter - r2.logs[i].loss_filter) <= 1e-6);
    CHECK(std::abs(r1.logs[i].loss_generator - r2.logs[i].loss_generator) <= 1e-6);
    CHECK(std::abs(r1.logs[i].loss_disc_filter - r2.logs[i].loss_disc_filter) <= 1e-6);
    CHECK(std::abs(r1.logs[i].loss_disc_gen - r2.logs[i].loss_disc_gen) <= 1e-6);
    CHECK(std::isfinite(r1.logs[i].loss_filter));
    CHECK(r1.logs[i].mean_distortion_filter >= 0.0);
  }
  // a different seed takes a different trajectory
  auto r3 = training::train_on_spectrograms(data, tiny_train_config("full", 8), scfg);
  CHECK(r3.logs.back().loss_filter != r1.logs.back().loss_filter);

  // straight-through vs checkpoint-resume
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "privmel_resume";
  fs::remove_all(dir);
  auto cfg4 = tiny_train_config("full", 7);
  cfg4.epochs = 4;
  auto straight = training::train_on_spectrograms(data, cfg4, scfg);

  auto cfg2 = cfg4;
  cfg2.epochs = 2;
  training::train_on_spectrograms(data, cfg2, scfg, dir.string());
  auto resumed = training::train_on_spectrograms(data, cfg4, scfg, dir.string());
  // the resumed result holds logs for epochs 3..4 only
  REQUIRE(straight.logs.size() == resumed.logs.size() * 2);
  size_t off = resumed.logs.size();
  for (size_t i = 0; i < resumed.logs.size(); ++i) {
    CHECK(std::abs(straight.logs[off + i].loss_filter - resumed.logs[i].loss_filter) <= 1e-5);
    CHECK(std::abs(straight.logs[off + i].loss_disc_gen - resumed.logs[i].loss_disc_gen) <= 1e-5);
  }
  // resumed bundle parameters equal straight-through parameters
  auto h1 = nn::params_hash(straight.bundle.all_params());
  auto h2 = nn::params_hash(resumed.bundle.all_params());
  CHECK(h1 == h2);
  fs::remove_all(dir);
}

TEST_CASE("baseline training excludes the generator and its critic") {
  auto data = tiny_dataset();
  spectral::SpectralConfig scfg;
  auto res = training::train_on_spectrograms(data, tiny_train_config("baseline", 3), scfg);
  CHECK(!res.bundle.has_generator());
  CHECK(!res.bundle.generator.has_value());
  CHECK(!res.bundle.disc_gen.has_value());
  for (const auto& log : res.logs) {
    CHECK(log.loss_generator == 0.0);
    CHECK(log.loss_disc_gen == 0.0);
  }
}

TEST_CASE("transform: shape contract, determinism, baseline parity, and preparation error") {
  auto data = tiny_dataset();
  spectral::SpectralConfig scfg;

  testing::CorpusSpec spec;
  spec.n_female = 1;
  spec.n_male = 1;
  spec.reps_per_digit = 1;
  auto clip = dataset::prepare_clip(testing::generate_clips(spec).front());

  auto vocoder_fn = [&](const spectral::MelSpectrogram& m) { return spectral::griffin_lim_invert(m, scfg); };

  SUBCASE("baseline bundles publish m' as m'' bit-exactly") {
    auto res = training::train_on_spectrograms(data, tiny_train_config("baseline", 3), scfg);
    Rng rng(5);
    auto out = training::transform(clip, res.bundle, scfg, 1, rng, vocoder_fn);
    CHECK(out.waveform.size() == 8192);
    CHECK((out.m_prime.values - out.m_dprime.values).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("full bundles respond to the synthetic attribute and are deterministic") {
    auto res = training::train_on_spectrograms(data, tiny_train_config("full", 3), scfg);
    Rng rng_a(5), rng_b(5), rng_c(5);
    auto out0 = training::transform(clip, res.bundle, scfg, 0, rng_a, vocoder_fn);
    auto out0_again = training::transform(clip, res.bundle, scfg, 0, rng_b, vocoder_fn);
    auto out1 = training::transform(clip, res.bundle, scfg, 1, rng_c, vocoder_fn);
    CHECK(out0.waveform == out0_again.waveform);
    CHECK((out0.m_prime.values - out1.m_prime.values).cwiseAbs().maxCoeff() == 0.0);  // same rng, same filter pass
    double gap = (out0.m_dprime.values - out1.m_dprime.values).cwiseAbs().mean();
    CHECK(gap > 0.0);

    // -1 draws the attribute from the rng, reproducibly
    Rng rng_d(11), rng_e(11);
    auto rnd1 = training::transform(clip, res.bundle, scfg, -1, rng_d, vocoder_fn);
    auto rnd2 = training::transform(clip, res.bundle, scfg, -1, rng_e, vocoder_fn);
    CHECK(rnd1.s_syn == rnd2.s_syn);

    // unprepared clips are refused
    dataset::AudioClip bad = clip;
    bad.samples.resize(5000);
    CHECK_THROWS_AS(training::transform(bad, res.bundle, scfg, 0, rng_a, vocoder_fn), DataError);

    // bundle round-trips through its checkpoint with identical outputs
    namespace fs = std::filesystem;
    auto path = fs::temp_directory_path() / "privmel_bundle.bin";
    networks::save_privacy_bundle(path.string(), res.bundle);
    auto loaded = networks::load_privacy_bundle(path.string());
    Rng rng_f(5);
    auto out_loaded = training::transform(clip, loaded, scfg, 0, rng_f, vocoder_fn);
    CHECK(out_loaded.m_dprime.values == out0.m_dprime.values);
    fs::remove(path);
  }
}
