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

#include "support/oracles.hpp"

#include <numeric>

namespace privmel::testing {

using nn::TensorD;

TensorD naive_conv2d(const TensorD& x, const TensorD& w, const std::vector<double>& bias, nn::ConvGeom g) {
  int64_t N = x.shape[0], Cin = x.shape[1], H = x.shape[2], W = x.shape[3];
  int64_t Cout = w.shape[0];
  int64_t OH = (H + 2 * g.ph - g.dh * (g.kh - 1) - 1) / g.sh + 1;
  int64_t OW = (W + 2 * g.pw - g.dw * (g.kw - 1) - 1) / g.sw + 1;
  TensorD y({N, Cout, OH, OW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          double acc = bias.empty() ? 0.0 : bias[static_cast<size_t>(co)];
          for (int64_t ci = 0; ci < Cin; ++ci)
            for (int i = 0; i < g.kh; ++i)
              for (int j = 0; j < g.kw; ++j) {
                int64_t ih = oh * g.sh - g.ph + i * g.dh;
                int64_t iw = ow * g.sw - g.pw + j * g.dw;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += x[((n * Cin + ci) * H + ih) * W + iw] *
                       w[((co * Cin + ci) * g.kh + i) * g.kw + j];
              }
          y[((n * Cout + co) * OH + oh) * OW + ow] = acc;
        }
  return y;
}

TensorD naive_conv2d_transpose(const TensorD& x, const TensorD& w, const std::vector<double>& bias,
                               nn::ConvGeom g) {
  int64_t N = x.shape[0], Cin = x.shape[1], H = x.shape[2], W = x.shape[3];
  int64_t Cout = w.shape[1];
  int64_t OH = (H - 1) * g.sh - 2 * g.ph + g.dh * (g.kh - 1) + 1;
  int64_t OW = (W - 1) * g.sw - 2 * g.pw + g.dw * (g.kw - 1) + 1;
  TensorD y({N, Cout, OH, OW});
  if (!bias.empty()) {
    for (int64_t n = 0; n < N; ++n)
      for (int64_t co = 0; co < Cout; ++co)
        for (int64_t i = 0; i < OH * OW; ++i) y[(n * Cout + co) * OH * OW + i] = bias[static_cast<size_t>(co)];
  }
  for (int64_t n = 0; n < N; ++n)
    for (int64_t ci = 0; ci < Cin; ++ci)
      for (int64_t h = 0; h < H; ++h)
        for (int64_t ww = 0; ww < W; ++ww) {
          double v = x[((n * Cin + ci) * H + h) * W + ww];
          for (int64_t co = 0; co < Cout; ++co)
            for (int i = 0; i < g.kh; ++i)
              for (int j = 0; j < g.kw; ++j) {
                int64_t oh = h * g.sh - g.ph + i * g.dh;
                int64_t ow = ww * g.sw - g.pw + j * g.dw;
                if (oh < 0 || oh >= OH || ow < 0 || ow >= OW) continue;
                y[((n * Cout + co) * OH + oh) * OW + ow] +=
                    v * w[((ci * Cout + co) * g.kh + i) * g.kw + j];
              }
        }
  return y;
}

std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t t = 0; t < n; ++t) {
      double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(t) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<double> naive_sinc_resample(const std::vector<double>& x, int src_rate, int dst_rate) {
  int g = std::gcd(src_rate, dst_rate);
  int up = dst_rate / g, down = src_rate / g;
  const int lobes = 16;
  int m = std::max(up, down);
  int64_t half = static_cast<int64_t>(lobes) * m;
  auto kernel = [&](int64_t j) -> double {
    if (std::llabs(j) > half) return 0.0;
    if (j == 0) return 1.0 / m;
    double u = static_cast<double>(j) / m;
    double s = std::sin(M_PI * u) / (M_PI * u) / m;
    double w = 0.42 + 0.5 * std::cos(M_PI * j / static_cast<double>(half)) +
               0.08 * std::cos(2.0 * M_PI * j / static_cast<double>(half));
    return s * w;
  };
  int64_t n_in = static_cast<int64_t>(x.size());
  int64_t n_out = static_cast<int64_t>(std::llround(static_cast<double>(n_in) * dst_rate / src_rate));
  std::vector<double> y(static_cast<size_t>(n_out), 0.0);
  // direct evaluation: for every output, loop over all contributing inputs
  for (int64_t n = 0; n < n_out; ++n) {
    int64_t u = n * down;  // position on the up-sampled grid
    double acc = 0.0;
    for (int64_t src = 0; src < n_in; ++src) {
      int64_t j = u - src * up;
      if (std::llabs(j) > half) continue;
      acc += x[static_cast<size_t>(src)] * up * kernel(j);
    }
    y[static_cast<size_t>(n)] = acc;
  }
  return y;
}

double naive_frechet(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mu_b,
                     const Eigen::MatrixXd& cov_b) {
  Eigen::MatrixXd prod = cov_a * cov_b;
  Eigen::EigenSolver<Eigen::MatrixXd> es(prod);
  double tr_sqrt = 0.0;
  for (int i = 0; i < prod.rows(); ++i) {
    double ev = es.eigenvalues()[i].real();  // imaginary parts vanish for PSD factors
    tr_sqrt += std::sqrt(std::max(ev, 0.0));
  }
  return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
}

Eigen::MatrixXd random_spd(int dim, Rng& rng, double jitter) {
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = privmel::randn(rng);
  return a * a.transpose() / dim + jitter * Eigen::MatrixXd::Identity(dim, dim);
}

}  // namespace privmel::testing
