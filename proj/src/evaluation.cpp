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

#include "privmel/evaluation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "privmel/optim.hpp"

namespace privmel::evaluation {

namespace fs = std::filesystem;

uint64_t FixedClassifiers::params_fingerprint() {
  std::vector<nn::ParamT<float>*> ps;
  nn::append_params(ps, spec_gender.params());
  nn::append_params(ps, spec_digit.params());
  nn::append_params(ps, audio_gender.params());
  nn::append_params(ps, audio_digit.params());
  return nn::params_hash(ps);
}

namespace {

nn::Tensor wave_batch(const std::vector<std::vector<double>>& waves, const std::vector<int64_t>& idx) {
  int64_t len = static_cast<int64_t>(waves.front().size());
  nn::Tensor t({static_cast<int64_t>(idx.size()), 1, 1, len});
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& w = waves[static_cast<size_t>(idx[i])];
    for (int64_t j = 0; j < len; ++j) t[static_cast<int64_t>(i) * len + j] = static_cast<float>(w[static_cast<size_t>(j)]);
  }
  return t;
}

nn::Tensor mel_batch(const std::vector<Eigen::MatrixXf>& mels, const std::vector<int64_t>& idx) {
  int64_t h = mels.front().rows(), w = mels.front().cols();
  nn::Tensor t({static_cast<int64_t>(idx.size()), 1, h, w});
  for (size_t i = 0; i < idx.size(); ++i) {
    const auto& m = mels[static_cast<size_t>(idx[i])];
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) t[static_cast<int64_t>(i) * h * w + r * w + c] = m(r, c);
  }
  return t;
}

double majority_rate(const std::vector<int>& labels) {
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  int best = 0;
  for (const auto& [l, c] : counts) best = std::max(best, c);
  return 100.0 * best / static_cast<double>(labels.size());
}

// generic minibatch cross-entropy training over an already-tensorized set
template <typename Net, typename BatchFn>
void train_classifier(Net& net, int64_t n, const std::vector<int>& labels, const ClassifierTrainConfig& cfg,
                      BatchFn make_batch, Rng& rng) {
  auto params = net.params();
  nn::AdamT<float> opt(cfg.lr, 0.9, 0.999);
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int64_t at = 0; at < n; at += cfg.batch_size) {
      int64_t nb = std::min<int64_t>(cfg.batch_size, n - at);
      std::vector<int64_t> idx(order.begin() + at, order.begin() + at + nb);
      std::vector<int> y(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) y[i] = labels[static_cast<size_t>(idx[i])];
      nn::Graph g;
      auto* logits = net.forward_logits(g, g.input(make_batch(idx)), true);
      auto* loss = g.cross_entropy_logits(logits, y);
      nn::zero_grads(params);
      g.backward(loss);
      opt.step(params);
    }
  }
}

template <typename Net, typename BatchFn>
double accuracy_generic(Net& net, int64_t n, const std::vector<int>& labels, int batch_size, BatchFn make_batch) {
  if (n == 0) throw DataError("cannot evaluate accuracy on an empty set");
  if (static_cast<int64_t>(labels.size()) != n) throw DimensionError("accuracy label count mismatch");
  int64_t hits = 0;
  for (int64_t at = 0; at < n; at += batch_size) {
    int64_t nb = std::min<int64_t>(batch_size, n - at);
    std::vector<int64_t> idx(static_cast<size_t>(nb));
    for (int64_t i = 0; i < nb; ++i) idx[static_cast<size_t>(i)] = at + i;
    nn::Graph g;
    auto* logits = net.forward_logits(g, g.input(make_batch(idx)), false);
    int64_t k = logits->value.shape[1];
    for (int64_t i = 0; i < nb; ++i) {
      int64_t best = 0;
      for (int64_t c = 1; c < k; ++c) {
        if (logits->value[i * k + c] > logits->value[i * k + best]) best = c;
      }
      if (best == labels[static_cast<size_t>(at + i)]) ++hits;
    }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

FixedClassifiers train_fixed_classifiers(const dataset::DatasetSplit& split, const spectral::SpectralConfig& scfg,
                                         const ClassifierTrainConfig& cfg) {
  if (split.train.empty() || split.test.empty()) throw DataError("fixed classifiers need train and test clips");

  auto train_data = training::build_spectrogram_dataset(split.train, scfg);
  auto test_data = training::build_spectrogram_dataset(split.test, scfg, &train_data.stats);

  std::vector<std::vector<double>> train_waves, test_waves;
  for (const auto& c : split.train) train_waves.push_back(c.samples);
  for (const auto& c : split.test) test_waves.push_back(c.samples);
  std::vector<int> train_gender = train_data.gender, train_digit = train_data.digit;
  std::vector<int> test_gender = test_data.gender, test_digit = test_data.digit;

  networks::DiscriminatorConfig spec_cfg;
  spec_cfg.base_channels = cfg.spec_base_channels;
  spec_cfg.hidden = cfg.spec_hidden;
  spec_cfg.in_h = scfg.n_mels;
  spec_cfg.in_w = static_cast<int>(train_data.mels.front().cols());

  networks::AudioNetConfig audio_cfg = cfg.audio_net;

  Rng rng(cfg.seed * 2654435761u + 17);
  FixedClassifiers fc;
  fc.cfg = cfg;
  fc.stats = train_data.stats;
  spec_cfg.num_classes = 2;
  fc.spec_gender = networks::SpectrogramNet("CSG", spec_cfg, rng);
  spec_cfg.num_classes = 10;
  fc.spec_digit = networks::SpectrogramNet("CSD", spec_cfg, rng);
  audio_cfg.num_classes = 2;
  fc.audio_gender = networks::AudioNet("CAG", audio_cfg, rng);
  audio_cfg.num_classes = 10;
  fc.audio_digit = networks::AudioNet("CAD", audio_cfg, rng);

  int64_t n = static_cast<int64_t>(split.train.size());
  auto spec_batch = [&](const std::vector<int64_t>& idx) { return mel_batch(train_data.mels, idx); };
  auto audio_batch = [&](const std::vector<int64_t>& idx) { return wave_batch(train_waves, idx); };

  train_classifier(fc.spec_gender, n, train_gender, cfg, spec_batch, rng);
  train_classifier(fc.spec_digit, n, train_digit, cfg, spec_batch, rng);
  train_classifier(fc.audio_gender, n, train_gender, cfg, audio_batch, rng);
  train_classifier(fc.audio_digit, n, train_digit, cfg, audio_batch, rng);

  fc.clean_spec_gender = accuracy_spectrogram(fc.spec_gender, test_data.mels, test_gender);
  fc.clean_spec_digit = accuracy_spectrogram(fc.spec_digit, test_data.mels, test_digit);
  fc.clean_audio_gender = accuracy_audio(fc.audio_gender, test_waves, test_gender);
  fc.clean_audio_digit = accuracy_audio(fc.audio_digit, test_waves, test_digit);

  auto check = [&](const char* name, double acc, const std::vector<int>& labels) {
    double floor_rate = majority_rate(labels);
    if (acc <= floor_rate) {
      throw DataError(std::string("fixed classifier '") + name + "' failed validity: clean accuracy " +
                      std::to_string(acc) + "% does not beat the majority class (" + std::to_string(floor_rate) +
                      "%)");
    }
    if (acc < cfg.min_clean_accuracy) {
      throw DataError(std::string("fixed classifier '") + name + "' reached only " + std::to_string(acc) +
                      "% clean accuracy; the evaluation requires at least " +
                      std::to_string(cfg.min_clean_accuracy) + "%");
    }
  };
  check("spec_gender", fc.clean_spec_gender, test_gender);
  check("spec_digit", fc.clean_spec_digit, test_digit);
  check("audio_gender", fc.clean_audio_gender, test_gender);
  check("audio_digit", fc.clean_audio_digit, test_digit);
  return fc;
}

void save_fixed_classifiers(const std::string& path, FixedClassifiers& fc) {
  nlohmann::json meta{{"type", "classifier_set"},
                      {"version", 1},
                      {"spec_gender_cfg", fc.spec_gender.config().to_json()},
                      {"spec_digit_cfg", fc.spec_digit.config().to_json()},
                      {"audio_gender_cfg", fc.audio_gender.config().to_json()},
                      {"audio_digit_cfg", fc.audio_digit.config().to_json()},
                      {"clean_spec_gender", fc.clean_spec_gender},
                      {"clean_spec_digit", fc.clean_spec_digit},
                      {"clean_audio_gender", fc.clean_audio_gender},
                      {"clean_audio_digit", fc.clean_audio_digit},
                      {"norm_mean", fc.stats.mean},
                      {"norm_scale", fc.stats.scale}};
  std::vector<nn::ParamT<float>*> ps;
  nn::append_params(ps, fc.spec_gender.params());
  nn::append_params(ps, fc.spec_digit.params());
  nn::append_params(ps, fc.audio_gender.params());
  nn::append_params(ps, fc.audio_digit.params());
  std::vector<const nn::ParamT<float>*> cps(ps.begin(), ps.end());
  nn::save_checkpoint<float>(path, meta, cps);
}

FixedClassifiers load_fixed_classifiers(const std::string& path) {
  nlohmann::json meta = nn::load_checkpoint_meta(path);
  if (meta.value("type", "") != "classifier_set") {
    throw CompatibilityError("checkpoint is not a classifier set: " + path);
  }
  FixedClassifiers fc;
  Rng rng(0);
  fc.spec_gender = networks::SpectrogramNet("CSG", networks::DiscriminatorConfig::from_json(meta["spec_gender_cfg"]), rng);
  fc.spec_digit = networks::SpectrogramNet("CSD", networks::DiscriminatorConfig::from_json(meta["spec_digit_cfg"]), rng);
  fc.audio_gender = networks::AudioNet("CAG", networks::AudioNetConfig::from_json(meta["audio_gender_cfg"]), rng);
  fc.audio_digit = networks::AudioNet("CAD", networks::AudioNetConfig::from_json(meta["audio_digit_cfg"]), rng);
  std::vector<nn::ParamT<float>*> ps;
  nn::append_params(ps, fc.spec_gender.params());
  nn::append_params(ps, fc.spec_digit.params());
  nn::append_params(ps, fc.audio_gender.params());
  nn::append_params(ps, fc.audio_digit.params());
  nn::load_checkpoint<float>(path, ps, "classifier_set");
  fc.clean_spec_gender = meta.value("clean_spec_gender", 0.0);
  fc.clean_spec_digit = meta.value("clean_spec_digit", 0.0);
  fc.clean_audio_gender = meta.value("clean_audio_gender", 0.0);
  fc.clean_audio_digit = meta.value("clean_audio_digit", 0.0);
  fc.stats.mean = meta.value("norm_mean", 0.0);
  fc.stats.scale = meta.value("norm_scale", 1.0);
  return fc;
}

double accuracy_spectrogram(networks::SpectrogramNet& net, const std::vector<Eigen::MatrixXf>& mels,
                            const std::vector<int>& labels, int batch_size) {
  return accuracy_generic(net, static_cast<int64_t>(mels.size()), labels, batch_size,
                          [&](const std::vector<int64_t>& idx) { return mel_batch(mels, idx); });
}

double accuracy_audio(networks::AudioNet& net, const std::vector<std::vector<double>>& waves,
                      const std::vector<int>& labels, int batch_size) {
  return accuracy_generic(net, static_cast<int64_t>(waves.size()), labels, batch_size,
                          [&](const std::vector<int64_t>& idx) { return wave_batch(waves, idx); });
}

Eigen::MatrixXd embed_audio(networks::AudioNet& net, const std::vector<std::vector<double>>& waves,
                            int batch_size) {
  if (waves.empty()) throw DataError("cannot embed an empty set");
  int64_t n = static_cast<int64_t>(waves.size());
  Eigen::MatrixXd rows(n, net.embed_dim());
  for (int64_t at = 0; at < n; at += batch_size) {
    int64_t nb = std::min<int64_t>(batch_size, n - at);
    std::vector<int64_t> idx(static_cast<size_t>(nb));
    for (int64_t i = 0; i < nb; ++i) idx[static_cast<size_t>(i)] = at + i;
    nn::Graph g;
    auto* emb = net.embed(g, g.input(wave_batch(waves, idx)));
    for (int64_t i = 0; i < nb; ++i)
      for (int64_t d = 0; d < net.embed_dim(); ++d) rows(at + i, d) = emb->value[i * net.embed_dim() + d];
  }
  return rows;
}

EmbeddingStats fit_embedding_stats(const Eigen::MatrixXd& rows, std::string* warn_out) {
  if (rows.rows() < 2) throw DataError("need at least 2 embeddings to fit statistics");
  EmbeddingStats st;
  st.count = rows.rows();
  st.mean = rows.colwise().mean();
  Eigen::MatrixXd centered = rows.rowwise() - st.mean.transpose();
  st.covariance = centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
  if (rows.rows() < rows.cols()) {
    if (warn_out) {
      *warn_out = "embedding count " + std::to_string(rows.rows()) + " below dimension " +
                  std::to_string(rows.cols()) + "; applying diagonal covariance loading 1e-6";
    }
    st.covariance += 1e-6 * Eigen::MatrixXd::Identity(rows.cols(), rows.cols());
  }
  return st;
}

double frechet_distance(const EmbeddingStats& a, const EmbeddingStats& b) {
  if (a.mean.size() != b.mean.size()) throw DimensionError("embedding dimensions differ");
  if (a.covariance.rows() != a.covariance.cols() || b.covariance.rows() != b.covariance.cols()) {
    throw DimensionError("covariances must be square");
  }
  if ((a.covariance - a.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-8 ||
      (b.covariance - b.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw NumericError("covariance matrices are not symmetric within 1e-8");
  }

  const double clamp_tol = -1e-6;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a.covariance);
  double min_ev = ea.eigenvalues().minCoeff();
  if (min_ev < clamp_tol) {
    throw NumericError("covariance not PSD: min eigenvalue " + std::to_string(min_ev));
  }
  Eigen::VectorXd sqrt_ev = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd root_a = ea.eigenvectors() * sqrt_ev.asDiagonal() * ea.eigenvectors().transpose();

  Eigen::MatrixXd prod = root_a * b.covariance * root_a;
  prod = 0.5 * (prod + prod.transpose());  // exact symmetry for the solver
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(prod);
  double min_pv = ep.eigenvalues().minCoeff();
  double scale = std::max(1.0, std::abs(ep.eigenvalues().maxCoeff()));
  if (min_pv < clamp_tol * scale) {
    throw NumericError("symmetrized product not PSD: min eigenvalue " + std::to_string(min_pv));
  }
  double tr_sqrt = ep.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  double d2 = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() - 2.0 * tr_sqrt;
  return std::max(d2, 0.0);
}

double fid_audio(const std::vector<std::vector<double>>& real_waves,
                 const std::vector<std::vector<double>>& transformed_waves, networks::AudioNet& embedder) {
  if (real_waves.empty() || transformed_waves.empty()) throw DataError("fid_audio needs non-empty sets");
  std::string warn;
  auto sa = fit_embedding_stats(embed_audio(embedder, real_waves), &warn);
  if (!warn.empty()) std::cerr << "[fid] " << warn << "\n";
  warn.clear();
  auto sb = fit_embedding_stats(embed_audio(embedder, transformed_waves), &warn);
  if (!warn.empty()) std::cerr << "[fid] " << warn << "\n";
  return frechet_distance(sa, sb);
}

void append_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
  bool fresh = !fs::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw DataError("cannot write metrics CSV: " + path);
  if (fresh) os << "epsilon,seed,mode,domain,privacy_acc,utility_acc,fid,mean_distortion\n";
  for (const auto& r : records) {
    os << r.epsilon << "," << r.seed << "," << r.mode << "," << r.domain << "," << r.privacy_acc << ","
       << r.utility_acc << "," << r.fid << "," << r.mean_distortion << "\n";
  }
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open metrics CSV: " + path);
  std::string line;
  std::getline(is, line);
  std::vector<MetricsRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    MetricsRecord r;
    std::string f;
    std::getline(ss, f, ',');
    r.epsilon = std::stod(f);
    std::getline(ss, f, ',');
    r.seed = std::stoull(f);
    std::getline(ss, r.mode, ',');
    std::getline(ss, r.domain, ',');
    std::getline(ss, f, ',');
    r.privacy_acc = std::stod(f);
    std::getline(ss, f, ',');
    r.utility_acc = std::stod(f);
    std::getline(ss, f, ',');
    r.fid = std::stod(f);
    std::getline(ss, f, ',');
    r.mean_distortion = std::stod(f);
    out.push_back(r);
  }
  return out;
}

namespace {

struct Aggregate {
  double eps;
  std::string mode;
  int n = 0;
  double p_mean = 0, p_std = 0, u_mean = 0, u_std = 0, f_mean = 0, f_std = 0, d_mean = 0, d_std = 0;
};

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s2 = 0;
  for (double x : v) s2 += (x - m) * (x - m);
  return {m, std::sqrt(s2 / static_cast<double>(v.size() - 1))};
}

void write_scatter_svg(const std::string& path, const std::string& domain, const std::vector<Aggregate>& rows) {
  const int W = 560, H = 440, L = 70, B = 60, T = 30, R = 30;
  auto px = [&](double acc) { return L + acc / 100.0 * (W - L - R); };
  auto py = [&](double acc) { return H - B - acc / 100.0 * (H - B - T); };
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write plot: " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n"
     << "<rect width='100%' height='100%' fill='white'/>\n";
  for (int tick = 0; tick <= 100; tick += 25) {
    os << "<line x1='" << px(tick) << "' y1='" << H - B << "' x2='" << px(tick) << "' y2='" << T
       << "' stroke='#dddddd'/>\n"
       << "<line x1='" << L << "' y1='" << py(tick) << "' x2='" << W - R << "' y2='" << py(tick)
       << "' stroke='#dddddd'/>\n"
       << "<text x='" << px(tick) << "' y='" << H - B + 18 << "' font-size='11' text-anchor='middle'>" << tick
       << "</text>\n"
       << "<text x='" << L - 8 << "' y='" << py(tick) + 4 << "' font-size='11' text-anchor='end'>" << tick
       << "</text>\n";
  }
  os << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
     << "' stroke='black'/>\n"
     << "<line x1='" << L << "' y1='" << H - B << "' x2='" << L << "' y2='" << T << "' stroke='black'/>\n"
     << "<text x='" << (L + W - R) / 2 << "' y='" << H - 16
     << "' font-size='13' text-anchor='middle'>gender accuracy on transformed test set (%)</text>\n"
     << "<text x='18' y='" << (T + H - B) / 2
     << "' font-size='13' text-anchor='middle' transform='rotate(-90 18 " << (T + H - B) / 2
     << ")'>digit accuracy on transformed test set (%)</text>\n"
     << "<text x='" << (L + W - R) / 2 << "' y='18' font-size='14' text-anchor='middle'>privacy vs utility ("
     << domain << " domain)</text>\n";
  for (const auto& a : rows) {
    std::string color = a.mode == "baseline" ? "#1f77b4" : "#ff7f0e";
    double x = px(a.p_mean), y = py(a.u_mean);
    os << "<line x1='" << px(std::max(0.0, a.p_mean - a.p_std)) << "' y1='" << y << "' x2='"
       << px(std::min(100.0, a.p_mean + a.p_std)) << "' y2='" << y << "' stroke='" << color << "'/>\n"
       << "<line x1='" << x << "' y1='" << py(std::max(0.0, a.u_mean - a.u_std)) << "' x2='" << x << "' y2='"
       << py(std::min(100.0, a.u_mean + a.u_std)) << "' stroke='" << color << "'/>\n";
    if (a.mode == "baseline") {
      os << "<circle cx='" << x << "' cy='" << y << "' r='5' fill='" << color << "'/>\n";
    } else {
      os << "<rect x='" << x - 4.5 << "' y='" << y - 4.5 << "' width='9' height='9' fill='" << color << "'/>\n";
    }
    os << "<text x='" << x + 8 << "' y='" << y - 6 << "' font-size='10'>eps=" << a.eps << " " << a.mode
       << "</text>\n";
  }
  os << "<circle cx='" << W - 150 << "' cy='" << T + 12 << "' r='5' fill='#1f77b4'/>"
     << "<text x='" << W - 140 << "' y='" << T + 16 << "' font-size='11'>baseline</text>\n"
     << "<rect x='" << W - 154.5 << "' y='" << T + 25.5 << "' width='9' height='9' fill='#ff7f0e'/>"
     << "<text x='" << W - 140 << "' y='" << T + 34 << "' font-size='11'>full</text>\n";
  os << "</svg>\n";
}

}  // namespace

std::vector<std::string> tradeoff_report(const std::vector<MetricsRecord>& records, const std::string& out_dir) {
  if (records.empty()) throw ConfigError("tradeoff_report needs at least one record");
  for (const auto& r : records) {
    if (r.domain != "spectrogram" && r.domain != "audio") {
      throw ConfigError("unknown record domain '" + r.domain + "'");
    }
  }
  fs::create_directories(out_dir);

  // group by (domain, epsilon, mode)
  std::map<std::string, std::map<std::pair<double, std::string>, std::vector<MetricsRecord>>> by_domain;
  for (const auto& r : records) by_domain[r.domain][{r.epsilon, r.mode}].push_back(r);

  std::vector<std::string> written;
  fs::path csv_path = fs::path(out_dir) / "aggregate.csv";
  std::ofstream csv(csv_path, std::ios::trunc);
  csv << "domain,epsilon,mode,n_seeds,privacy_mean,privacy_std,utility_mean,utility_std,fid_mean,fid_std,"
         "distortion_mean,distortion_std\n";
  for (auto& [domain, groups] : by_domain) {
    std::vector<Aggregate> rows;
    for (auto& [key, rs] : groups) {
      std::vector<double> p, u, f, d;
      for (const auto& r : rs) {
        p.push_back(r.privacy_acc);
        u.push_back(r.utility_acc);
        f.push_back(r.fid);
        d.push_back(r.mean_distortion);
      }
      Aggregate a;
      a.eps = key.first;
      a.mode = key.second;
      a.n = static_cast<int>(rs.size());
      std::tie(a.p_mean, a.p_std) = mean_std(p);
      std::tie(a.u_mean, a.u_std) = mean_std(u);
      std::tie(a.f_mean, a.f_std) = mean_std(f);
      std::tie(a.d_mean, a.d_std) = mean_std(d);
      rows.push_back(a);
      csv << domain << "," << a.eps << "," << a.mode << "," << a.n << "," << a.p_mean << "," << a.p_std << ","
          << a.u_mean << "," << a.u_std << "," << a.f_mean << "," << a.f_std << "," << a.d_mean << "," << a.d_std
          << "\n";
    }
    fs::path svg_path = fs::path(out_dir) / ("tradeoff_" + domain + ".svg");
    write_scatter_svg(svg_path.string(), domain, rows);
    written.push_back(svg_path.string());
  }
  written.push_back(csv_path.string());
  return written;
}

}  // namespace privmel::evaluation
