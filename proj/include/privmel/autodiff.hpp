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
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "privmel/tensor.hpp"

namespace privmel::nn {

// Named parameter with gradient and Adam state. Adam moments live next to
// the value so a checkpoint restores the optimizer mid-run exactly.
template <typename S>
struct ParamT {
  std::string name;
  TensorT<S> value;
  TensorT<S> grad;
  TensorT<S> adam_m;
  TensorT<S> adam_v;

  ParamT() = default;
  ParamT(std::string n, TensorT<S> v) : name(std::move(n)), value(std::move(v)) {
    grad = TensorT<S>::zeros(value.shape);
    adam_m = TensorT<S>::zeros(value.shape);
    adam_v = TensorT<S>::zeros(value.shape);
  }

  void zero_grad() { grad.fill(S(0)); }
};

struct ConvGeom {
  int kh = 1, kw = 1;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
  int dh = 1, dw = 1;
};

// Reverse-mode tape. Nodes are created in forward order and owned by the
// graph; backward() walks them in reverse. Parameter leaves push their
// gradient into the bound ParamT, everything else stays on the tape.
template <typename S>
class GraphT {
 public:
  struct Node {
    TensorT<S> value;
    TensorT<S> grad;  // allocated on demand during backward
    bool needs_grad = false;
    std::function<void(GraphT&, Node&)> backprop;
  };

  using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapRM = Eigen::Map<MatRM>;
  using CMapRM = Eigen::Map<const MatRM>;
  using MatCM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
  using MapCM = Eigen::Map<MatCM>;
  using CMapCM = Eigen::Map<const MatCM>;

  Node* input(TensorT<S> v) {
    Node& n = alloc();
    n.value = std::move(v);
    return &n;
  }

  Node* param(ParamT<S>& p) {
    Node& n = alloc();
    n.value = p.value;
    n.needs_grad = true;
    ParamT<S>* bound = &p;
    n.backprop = [bound](GraphT&, Node& self) { bound->grad.add_(self.grad); };
    return &n;
  }

  Node* frozen(const ParamT<S>& p) { return input(p.value); }

  // ---- elementwise ----

  Node* relu(Node* x) {
    Node& n = alloc();
    n.value = x->value;
    for (auto& v : n.value.data) v = v > S(0) ? v : S(0);
    link(n, {x});
    n.backprop = [x](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t i = 0; i < self.value.numel(); ++i) {
        if (x->value[i] > S(0)) x->grad[i] += self.grad[i];
      }
    };
    return &n;
  }

  Node* leaky_relu(Node* x, S slope) {
    Node& n = alloc();
    n.value = x->value;
    for (auto& v : n.value.data) v = v > S(0) ? v : slope * v;
    link(n, {x});
    n.backprop = [x, slope](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t i = 0; i < self.value.numel(); ++i) {
        x->grad[i] += (x->value[i] > S(0) ? self.grad[i] : slope * self.grad[i]);
      }
    };
    return &n;
  }

  Node* tanh_(Node* x) {
    Node& n = alloc();
    n.value = x->value;
    for (auto& v : n.value.data) v = std::tanh(v);
    link(n, {x});
    Node* out = &n;
    n.backprop = [x, out](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t i = 0; i < self.value.numel(); ++i) {
        S y = out->value[i];
        x->grad[i] += self.grad[i] * (S(1) - y * y);
      }
    };
    return &n;
  }

  Node* add(Node* a, Node* b) {
    check_same_shape(a, b, "add");
    Node& n = alloc();
    n.value = a->value;
    n.value.add_(b->value);
    link(n, {a, b});
    n.backprop = [a, b](GraphT& g, Node& self) {
      for (Node* p : {a, b}) {
        if (!p->needs_grad) continue;
        g.ensure_grad(*p);
        p->grad.add_(self.grad);
      }
    };
    return &n;
  }

  Node* sub(Node* a, Node* b) {
    check_same_shape(a, b, "sub");
    Node& n = alloc();
    n.value = a->value;
    for (int64_t i = 0; i < n.value.numel(); ++i) n.value[i] -= b->value[i];
    link(n, {a, b});
    n.backprop = [a, b](GraphT& g, Node& self) {
      if (a->needs_grad) {
        g.ensure_grad(*a);
        a->grad.add_(self.grad);
      }
      if (b->needs_grad) {
        g.ensure_grad(*b);
        for (int64_t i = 0; i < self.grad.numel(); ++i) b->grad[i] -= self.grad[i];
      }
    };
    return &n;
  }

  Node* mul(Node* a, Node* b) {
    check_same_shape(a, b, "mul");
    Node& n = alloc();
    n.value = a->value;
    for (int64_t i = 0; i < n.value.numel(); ++i) n.value[i] *= b->value[i];
    link(n, {a, b});
    n.backprop = [a, b](GraphT& g, Node& self) {
      if (a->needs_grad) {
        g.ensure_grad(*a);
        for (int64_t i = 0; i < self.grad.numel(); ++i) a->grad[i] += self.grad[i] * b->value[i];
      }
      if (b->needs_grad) {
        g.ensure_grad(*b);
        for (int64_t i = 0; i < self.grad.numel(); ++i) b->grad[i] += self.grad[i] * a->value[i];
      }
    };
    return &n;
  }

  Node* scale(Node* x, S c) {
    Node& n = alloc();
    n.value = x->value;
    for (auto& v : n.value.data) v *= c;
    link(n, {x});
    n.backprop = [x, c](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t i = 0; i < self.grad.numel(); ++i) x->grad[i] += c * self.grad[i];
    };
    return &n;
  }

  Node* add_const(Node* x, S c) {
    Node& n = alloc();
    n.value = x->value;
    for (auto& v : n.value.data) v += c;
    link(n, {x});
    n.backprop = [x](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      x->grad.add_(self.grad);
    };
    return &n;
  }

  // ---- reshapes and layout ----

  Node* reshape(Node* x, std::vector<int64_t> shp) {
    if (TensorT<S>::numel_of(shp) != x->value.numel()) throw DimensionError("reshape numel mismatch");
    Node& n = alloc();
    n.value = TensorT<S>(std::move(shp), x->value.data);
    link(n, {x});
    n.backprop = [x](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t i = 0; i < self.grad.numel(); ++i) x->grad[i] += self.grad[i];
    };
    return &n;
  }

  // Concatenate along the channel axis of (N,C,H,W) tensors.
  Node* concat_channels(Node* a, Node* b) {
    const auto& sa = a->value.shape;
    const auto& sb = b->value.shape;
    if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
      throw DimensionError("concat_channels shape mismatch: " + a->value.shape_str() + " vs " + b->value.shape_str());
    }
    int64_t N = sa[0], Ca = sa[1], Cb = sb[1], HW = sa[2] * sa[3];
    Node& n = alloc();
    n.value = TensorT<S>({N, Ca + Cb, sa[2], sa[3]});
    for (int64_t i = 0; i < N; ++i) {
      std::copy_n(a->value.ptr() + i * Ca * HW, Ca * HW, n.value.ptr() + i * (Ca + Cb) * HW);
      std::copy_n(b->value.ptr() + i * Cb * HW, Cb * HW, n.value.ptr() + i * (Ca + Cb) * HW + Ca * HW);
    }
    link(n, {a, b});
    n.backprop = [a, b, N, Ca, Cb, HW](GraphT& g, Node& self) {
      if (a->needs_grad) {
        g.ensure_grad(*a);
        for (int64_t i = 0; i < N; ++i)
          for (int64_t j = 0; j < Ca * HW; ++j) a->grad[i * Ca * HW + j] += self.grad[i * (Ca + Cb) * HW + j];
      }
      if (b->needs_grad) {
        g.ensure_grad(*b);
        for (int64_t i = 0; i < N; ++i)
          for (int64_t j = 0; j < Cb * HW; ++j) b->grad[i * Cb * HW + j] += self.grad[i * (Ca + Cb) * HW + Ca * HW + j];
      }
    };
    return &n;
  }

  // Zero-pad the right/bottom edges of (N,C,H,W).
  Node* pad_hw(Node* x, int pad_h, int pad_w) {
    const auto& s = x->value.shape;
    if (s.size() != 4) throw DimensionError("pad_hw expects NCHW");
    int64_t N = s[0], C = s[1], H = s[2], W = s[3];
    int64_t H2 = H + pad_h, W2 = W + pad_w;
    Node& n = alloc();
    n.value = TensorT<S>({N, C, H2, W2});
    for (int64_t nc = 0; nc < N * C; ++nc)
      for (int64_t i = 0; i < H; ++i)
        std::copy_n(x->value.ptr() + (nc * H + i) * W, W, n.value.ptr() + (nc * H2 + i) * W2);
    link(n, {x});
    n.backprop = [x, N, C, H, W, H2, W2](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t nc = 0; nc < N * C; ++nc)
        for (int64_t i = 0; i < H; ++i)
          for (int64_t j = 0; j < W; ++j) x->grad[(nc * H + i) * W + j] += self.grad[(nc * H2 + i) * W2 + j];
    };
    return &n;
  }

  // Keep rows [0,h) and columns [0,w) of (N,C,H,W).
  Node* crop_hw(Node* x, int64_t h, int64_t w) {
    const auto& s = x->value.shape;
    if (s.size() != 4 || h > s[2] || w > s[3]) throw DimensionError("crop_hw out of range");
    int64_t N = s[0], C = s[1], H = s[2], W = s[3];
    Node& n = alloc();
    n.value = TensorT<S>({N, C, h, w});
    for (int64_t nc = 0; nc < N * C; ++nc)
      for (int64_t i = 0; i < h; ++i)
        std::copy_n(x->value.ptr() + (nc * H + i) * W, w, n.value.ptr() + (nc * h + i) * w);
    link(n, {x});
    n.backprop = [x, N, C, H, W, h, w](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t nc = 0; nc < N * C; ++nc)
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < w; ++j) x->grad[(nc * H + i) * W + j] += self.grad[(nc * h + i) * w + j];
    };
    return &n;
  }

  // ---- reductions and losses ----

  Node* mean_all(Node* x) {
    Node& n = alloc();
    n.value = TensorT<S>({1});
    S acc = 0;
    for (S v : x->value.data) acc += v;
    int64_t m = x->value.numel();
    n.value[0] = acc / static_cast<S>(m);
    link(n, {x});
    n.backprop = [x, m](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      S d = self.grad[0] / static_cast<S>(m);
      for (auto& v : x->grad.data) v += d;
    };
    return &n;
  }

  // Mean absolute difference over every entry; the L1 distortion measure.
  Node* mean_abs_diff(Node* a, Node* b) {
    check_same_shape(a, b, "mean_abs_diff");
    Node& n = alloc();
    n.value = TensorT<S>({1});
    S acc = 0;
    for (int64_t i = 0; i < a->value.numel(); ++i) acc += std::abs(a->value[i] - b->value[i]);
    int64_t m = a->value.numel();
    n.value[0] = acc / static_cast<S>(m);
    link(n, {a, b});
    n.backprop = [a, b, m](GraphT& g, Node& self) {
      S d = self.grad[0] / static_cast<S>(m);
      if (a->needs_grad) g.ensure_grad(*a);
      if (b->needs_grad) g.ensure_grad(*b);
      for (int64_t i = 0; i < m; ++i) {
        S diff = a->value[i] - b->value[i];
        S sgn = diff > S(0) ? S(1) : (diff < S(0) ? S(-1) : S(0));
        if (a->needs_grad) a->grad[i] += d * sgn;
        if (b->needs_grad) b->grad[i] -= d * sgn;
      }
    };
    return &n;
  }

  // max(v - c, 0)^2 applied to a scalar node; the quadratic penalty hinge.
  Node* squared_hinge_above(Node* x, S c) {
    if (x->value.numel() != 1) throw DimensionError("squared_hinge_above expects a scalar");
    Node& n = alloc();
    n.value = TensorT<S>({1});
    S excess = std::max(x->value[0] - c, S(0));
    n.value[0] = excess * excess;
    link(n, {x});
    n.backprop = [x, c](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      S excess = std::max(x->value[0] - c, S(0));
      x->grad[0] += self.grad[0] * S(2) * excess;
    };
    return &n;
  }

  // Weight-norm reparameterization: rows of v (leading axis, rest
  // flattened) are rescaled to length gsc[row]. w = gsc * v / |v|.
  Node* row_weight_norm(Node* v, Node* gsc) {
    const auto& s = v->value.shape;
    if (s.empty()) throw DimensionError("row_weight_norm expects rank >= 1");
    int64_t rows = s[0], cols = v->value.numel() / s[0];
    if (gsc->value.numel() != rows) throw DimensionError("row_weight_norm scale size mismatch");
    Node& n = alloc();
    n.value = TensorT<S>(s);
    auto inv_norm = std::make_shared<std::vector<S>>(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
      const S* vp = v->value.ptr() + r * cols;
      S nrm = 0;
      for (int64_t i = 0; i < cols; ++i) nrm += vp[i] * vp[i];
      nrm = std::sqrt(nrm) + S(1e-12);
      (*inv_norm)[static_cast<size_t>(r)] = S(1) / nrm;
      S c = gsc->value[r] / nrm;
      S* wp = n.value.ptr() + r * cols;
      for (int64_t i = 0; i < cols; ++i) wp[i] = c * vp[i];
    }
    link(n, {v, gsc});
    n.backprop = [v, gsc, inv_norm, rows, cols](GraphT& g, Node& self) {
      if (v->needs_grad) g.ensure_grad(*v);
      if (gsc->needs_grad) g.ensure_grad(*gsc);
      for (int64_t r = 0; r < rows; ++r) {
        const S* vp = v->value.ptr() + r * cols;
        const S* dwp = self.grad.ptr() + r * cols;
        S in = (*inv_norm)[static_cast<size_t>(r)];
        S dot = 0;  // dw . vhat
        for (int64_t i = 0; i < cols; ++i) dot += dwp[i] * vp[i] * in;
        if (gsc->needs_grad) gsc->grad[r] += dot;
        if (v->needs_grad) {
          S c = gsc->value[r] * in;
          S* dvp = v->grad.ptr() + r * cols;
          for (int64_t i = 0; i < cols; ++i) dvp[i] += c * (dwp[i] - dot * vp[i] * in);
        }
      }
    };
    return &n;
  }

  // Row-wise softmax of (N,K) logits.
  Node* softmax(Node* x) {
    const auto& s = x->value.shape;
    if (s.size() != 2) throw DimensionError("softmax expects (N,K)");
    int64_t N = s[0], K = s[1];
    Node& n = alloc();
    n.value = TensorT<S>({N, K});
    for (int64_t i = 0; i < N; ++i) {
      const S* xi = x->value.ptr() + i * K;
      S mx = xi[0];
      for (int64_t k = 1; k < K; ++k) mx = std::max(mx, xi[k]);
      S z = 0;
      for (int64_t k = 0; k < K; ++k) z += std::exp(xi[k] - mx);
      for (int64_t k = 0; k < K; ++k) n.value[i * K + k] = std::exp(xi[k] - mx) / z;
    }
    link(n, {x});
    Node* out = &n;
    n.backprop = [x, out, N, K](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t i = 0; i < N; ++i) {
        S dot = 0;
        for (int64_t k = 0; k < K; ++k) dot += self.grad[i * K + k] * out->value[i * K + k];
        for (int64_t k = 0; k < K; ++k)
          x->grad[i * K + k] += out->value[i * K + k] * (self.grad[i * K + k] - dot);
      }
    };
    return &n;
  }

  // Mean categorical cross entropy from logits against integer labels.
  Node* cross_entropy_logits(Node* logits, const std::vector<int>& labels) {
    const auto& s = logits->value.shape;
    if (s.size() != 2) throw DimensionError("cross_entropy expects (N,K) logits");
    int64_t N = s[0], K = s[1];
    if (static_cast<int64_t>(labels.size()) != N) throw DimensionError("cross_entropy label count mismatch");
    for (int lab : labels)
      if (lab < 0 || lab >= K) throw DimensionError("cross_entropy label out of range");
    Node& n = alloc();
    n.value = TensorT<S>({1});
    // log-sum-exp per row, stored for the backward softmax
    std::vector<S> lse(static_cast<size_t>(N));
    S total = 0;
    for (int64_t i = 0; i < N; ++i) {
      const S* xi = logits->value.ptr() + i * K;
      S mx = xi[0];
      for (int64_t k = 1; k < K; ++k) mx = std::max(mx, xi[k]);
      S z = 0;
      for (int64_t k = 0; k < K; ++k) z += std::exp(xi[k] - mx);
      lse[static_cast<size_t>(i)] = mx + std::log(z);
      total += lse[static_cast<size_t>(i)] - xi[labels[static_cast<size_t>(i)]];
    }
    n.value[0] = total / static_cast<S>(N);
    link(n, {logits});
    n.backprop = [logits, labels, lse, N, K](GraphT& g, Node& self) {
      if (!logits->needs_grad) return;
      g.ensure_grad(*logits);
      S d = self.grad[0] / static_cast<S>(N);
      for (int64_t i = 0; i < N; ++i) {
        const S* xi = logits->value.ptr() + i * K;
        for (int64_t k = 0; k < K; ++k) {
          S p = std::exp(xi[k] - lse[static_cast<size_t>(i)]);
          S y = (k == labels[static_cast<size_t>(i)]) ? S(1) : S(0);
          logits->grad[i * K + k] += d * (p - y);
        }
      }
    };
    return &n;
  }

  // ---- dense and convolution ----

  Node* linear(Node* x, Node* w, Node* b) {
    const auto& sx = x->value.shape;
    const auto& sw = w->value.shape;
    if (sx.size() != 2 || sw.size() != 2 || sx[1] != sw[1]) {
      throw DimensionError("linear shape mismatch: x " + x->value.shape_str() + " w " + w->value.shape_str());
    }
    int64_t N = sx[0], D = sx[1], Dout = sw[0];
    Node& n = alloc();
    n.value = TensorT<S>({N, Dout});
    {
      CMapRM X(x->value.ptr(), N, D), W(w->value.ptr(), Dout, D);
      MapRM Y(n.value.ptr(), N, Dout);
      Y.noalias() = X * W.transpose();
      if (b) {
        for (int64_t i = 0; i < N; ++i)
          for (int64_t k = 0; k < Dout; ++k) n.value[i * Dout + k] += b->value[k];
      }
    }
    link(n, b ? std::vector<Node*>{x, w, b} : std::vector<Node*>{x, w});
    n.backprop = [x, w, b, N, D, Dout](GraphT& g, Node& self) {
      CMapRM dY(self.grad.ptr(), N, Dout);
      if (x->needs_grad) {
        g.ensure_grad(*x);
        CMapRM W(w->value.ptr(), Dout, D);
        MapRM dX(x->grad.ptr(), N, D);
        dX.noalias() += dY * W;
      }
      if (w->needs_grad) {
        g.ensure_grad(*w);
        CMapRM X(x->value.ptr(), N, D);
        MapRM dW(w->grad.ptr(), Dout, D);
        dW.noalias() += dY.transpose() * X;
      }
      if (b && b->needs_grad) {
        g.ensure_grad(*b);
        for (int64_t i = 0; i < N; ++i)
          for (int64_t k = 0; k < Dout; ++k) b->grad[k] += self.grad[i * Dout + k];
      }
    };
    return &n;
  }

  static int64_t conv_out_dim(int64_t in, int k, int s, int p, int d) {
    return (in + 2 * p - d * (k - 1) - 1) / s + 1;
  }

  // x: (N,Cin,H,W), w: (Cout,Cin,kh,kw), b: (Cout) or nullptr.
  Node* conv2d(Node* x, Node* w, Node* b, ConvGeom geo) {
    const auto& sx = x->value.shape;
    const auto& sw = w->value.shape;
    if (sx.size() != 4 || sw.size() != 4 || sx[1] != sw[1]) {
      throw DimensionError("conv2d shape mismatch: x " + x->value.shape_str() + " w " + w->value.shape_str());
    }
    int64_t N = sx[0], Cin = sx[1], H = sx[2], W = sx[3];
    int64_t Cout = sw[0];
    int64_t OH = conv_out_dim(H, geo.kh, geo.sh, geo.ph, geo.dh);
    int64_t OW = conv_out_dim(W, geo.kw, geo.sw, geo.pw, geo.dw);
    if (OH <= 0 || OW <= 0) throw DimensionError("conv2d output would be empty for input " + x->value.shape_str());
    int64_t R = Cin * geo.kh * geo.kw;

    Node& n = alloc();
    n.value = TensorT<S>({N, Cout, OH, OW});
    CMapRM Wm(w->value.ptr(), Cout, R);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < N; ++i) {
      std::vector<S> col(static_cast<size_t>(R * OH * OW));
      im2col(x->value.ptr() + i * Cin * H * W, Cin, H, W, geo, OH, OW, col.data());
      CMapCM C(col.data(), R, OH * OW);
      MapRM Y(n.value.ptr() + i * Cout * OH * OW, Cout, OH * OW);
      Y.noalias() = Wm * C;
      if (b) {
        for (int64_t c = 0; c < Cout; ++c) Y.row(c).array() += b->value[c];
      }
    }
    link(n, b ? std::vector<Node*>{x, w, b} : std::vector<Node*>{x, w});
    n.backprop = [x, w, b, geo, N, Cin, H, W, Cout, OH, OW, R](GraphT& g, Node& self) {
      if (x->needs_grad) g.ensure_grad(*x);
      if (w->needs_grad) g.ensure_grad(*w);
      if (b && b->needs_grad) g.ensure_grad(*b);
      CMapRM Wm(w->value.ptr(), Cout, R);
      std::vector<S> col(static_cast<size_t>(R * OH * OW));
      std::vector<S> dcol(static_cast<size_t>(R * OH * OW));
      // Serial over samples: weight gradients accumulate in a fixed order.
      for (int64_t i = 0; i < N; ++i) {
        CMapRM dY(self.grad.ptr() + i * Cout * OH * OW, Cout, OH * OW);
        if (w->needs_grad) {
          im2col(x->value.ptr() + i * Cin * H * W, Cin, H, W, geo, OH, OW, col.data());
          CMapCM C(col.data(), R, OH * OW);
          MapRM dWm(w->grad.ptr(), Cout, R);
          dWm.noalias() += dY * C.transpose();
        }
        if (x->needs_grad) {
          MapCM dC(dcol.data(), R, OH * OW);
          dC.noalias() = Wm.transpose() * dY;
          col2im_add(dcol.data(), Cin, H, W, geo, OH, OW, x->grad.ptr() + i * Cin * H * W);
        }
        if (b && b->needs_grad) {
          const S* dy = self.grad.ptr() + i * Cout * OH * OW;
          for (int64_t c = 0; c < Cout; ++c) {
            S acc = 0;
            for (int64_t j = 0; j < OH * OW; ++j) acc += dy[c * OH * OW + j];
            b->grad[c] += acc;
          }
        }
      }
    };
    return &n;
  }

  // Transposed convolution. x: (N,Cin,H,W), w: (Cin,Cout,kh,kw).
  // Output spatial size: (H-1)*sh - 2*ph + dh*(kh-1) + 1.
  Node* conv2d_transpose(Node* x, Node* w, Node* b, ConvGeom geo) {
    const auto& sx = x->value.shape;
    const auto& sw = w->value.shape;
    if (sx.size() != 4 || sw.size() != 4 || sx[1] != sw[0]) {
      throw DimensionError("conv2d_transpose shape mismatch: x " + x->value.shape_str() + " w " +
                           w->value.shape_str());
    }
    int64_t N = sx[0], Cin = sx[1], H = sx[2], W = sx[3];
    int64_t Cout = sw[1];
    int64_t OH = (H - 1) * geo.sh - 2 * geo.ph + geo.dh * (geo.kh - 1) + 1;
    int64_t OW = (W - 1) * geo.sw - 2 * geo.pw + geo.dw * (geo.kw - 1) + 1;
    if (OH <= 0 || OW <= 0) throw DimensionError("conv2d_transpose output would be empty");
    int64_t R = Cout * geo.kh * geo.kw;

    Node& n = alloc();
    n.value = TensorT<S>({N, Cout, OH, OW});
    CMapRM Wm(w->value.ptr(), Cin, R);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < N; ++i) {
      std::vector<S> col(static_cast<size_t>(R * H * W));
      CMapRM X(x->value.ptr() + i * Cin * H * W, Cin, H * W);
      MapCM C(col.data(), R, H * W);
      C.noalias() = Wm.transpose() * X;
      // col2im over the *output* image: x's grid plays the conv-output role
      col2im_add(col.data(), Cout, OH, OW, geo, H, W, n.value.ptr() + i * Cout * OH * OW);
      if (b) {
        MapRM Y(n.value.ptr() + i * Cout * OH * OW, Cout, OH * OW);
        for (int64_t c = 0; c < Cout; ++c) Y.row(c).array() += b->value[c];
      }
    }
    link(n, b ? std::vector<Node*>{x, w, b} : std::vector<Node*>{x, w});
    n.backprop = [x, w, b, geo, N, Cin, H, W, Cout, OH, OW, R](GraphT& g, Node& self) {
      if (x->needs_grad) g.ensure_grad(*x);
      if (w->needs_grad) g.ensure_grad(*w);
      if (b && b->needs_grad) g.ensure_grad(*b);
      CMapRM Wm(w->value.ptr(), Cin, R);
      std::vector<S> col(static_cast<size_t>(R * H * W));
      for (int64_t i = 0; i < N; ++i) {
        im2col(self.grad.ptr() + i * Cout * OH * OW, Cout, OH, OW, geo, H, W, col.data());
        CMapCM C(col.data(), R, H * W);
        if (x->needs_grad) {
          MapRM dX(x->grad.ptr() + i * Cin * H * W, Cin, H * W);
          dX.noalias() += Wm * C;
        }
        if (w->needs_grad) {
          CMapRM X(x->value.ptr() + i * Cin * H * W, Cin, H * W);
          MapRM dWm(w->grad.ptr(), Cin, R);
          dWm.noalias() += X * C.transpose();
        }
        if (b && b->needs_grad) {
          const S* dy = self.grad.ptr() + i * Cout * OH * OW;
          for (int64_t c = 0; c < Cout; ++c) {
            S acc = 0;
            for (int64_t j = 0; j < OH * OW; ++j) acc += dy[c * OH * OW + j];
            b->grad[c] += acc;
          }
        }
      }
    };
    return &n;
  }

  Node* max_pool2d(Node* x, int kh, int kw) {
    const auto& s = x->value.shape;
    if (s.size() != 4) throw DimensionError("max_pool2d expects NCHW");
    int64_t N = s[0], C = s[1], H = s[2], W = s[3];
    int64_t OH = H / kh, OW = W / kw;
    if (OH == 0 || OW == 0) throw DimensionError("max_pool2d input smaller than window");
    Node& n = alloc();
    n.value = TensorT<S>({N, C, OH, OW});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(N * C * OH * OW));
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const S* xp = x->value.ptr() + nc * H * W;
      for (int64_t oh = 0; oh < OH; ++oh) {
        for (int64_t ow = 0; ow < OW; ++ow) {
          int64_t best = (oh * kh) * W + ow * kw;
          S bv = xp[best];
          for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
              int64_t idx = (oh * kh + i) * W + ow * kw + j;
              if (xp[idx] > bv) {
                bv = xp[idx];
                best = idx;
              }
            }
          n.value[nc * OH * OW + oh * OW + ow] = bv;
          (*argmax)[static_cast<size_t>(nc * OH * OW + oh * OW + ow)] = nc * H * W + best;
        }
      }
    }
    link(n, {x});
    n.backprop = [x, argmax](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t i = 0; i < self.grad.numel(); ++i) x->grad[(*argmax)[static_cast<size_t>(i)]] += self.grad[i];
    };
    return &n;
  }

  // Average pooling along W with zero padding; divisor is the window size.
  Node* avg_pool_w(Node* x, int k, int stride, int pad) {
    const auto& s = x->value.shape;
    if (s.size() != 4) throw DimensionError("avg_pool_w expects NCHW");
    int64_t N = s[0], C = s[1], H = s[2], W = s[3];
    int64_t OW = (W + 2 * pad - k) / stride + 1;
    if (OW <= 0) throw DimensionError("avg_pool_w input too short");
    Node& n = alloc();
    n.value = TensorT<S>({N, C, H, OW});
    for (int64_t nch = 0; nch < N * C * H; ++nch) {
      const S* xp = x->value.ptr() + nch * W;
      for (int64_t o = 0; o < OW; ++o) {
        S acc = 0;
        for (int j = 0; j < k; ++j) {
          int64_t idx = o * stride - pad + j;
          if (idx >= 0 && idx < W) acc += xp[idx];
        }
        n.value[nch * OW + o] = acc / static_cast<S>(k);
      }
    }
    link(n, {x});
    n.backprop = [x, N, C, H, W, OW, k, stride, pad](GraphT& g, Node& self) {
      if (!x->needs_grad) return;
      g.ensure_grad(*x);
      for (int64_t nch = 0; nch < N * C * H; ++nch) {
        for (int64_t o = 0; o < OW; ++o) {
          S d = self.grad[nch * OW + o] / static_cast<S>(k);
          for (int j = 0; j < k; ++j) {
            int64_t idx = o * stride - pad + j;
            if (idx >= 0 && idx < W) x->grad[nch * W + idx] += d;
          }
        }
      }
    };
    return &n;
  }

  // Instance normalization over the spatial extent of each (n, c) slice
  // with per-channel affine parameters. Keeps batch rows independent.
  Node* instance_norm(Node* x, Node* gamma, Node* beta, S eps = S(1e-5)) {
    const auto& s = x->value.shape;
    if (s.size() != 4) throw DimensionError("instance_norm expects NCHW");
    int64_t N = s[0], C = s[1], M = s[2] * s[3];
    if (gamma->value.numel() != C || beta->value.numel() != C) throw DimensionError("instance_norm affine size");
    Node& n = alloc();
    n.value = TensorT<S>(s);
    auto mu = std::make_shared<std::vector<S>>(static_cast<size_t>(N * C));
    auto istd = std::make_shared<std::vector<S>>(static_cast<size_t>(N * C));
#pragma omp parallel for schedule(static)
    for (int64_t nc = 0; nc < N * C; ++nc) {
      const S* xp = x->value.ptr() + nc * M;
      S m = 0;
      for (int64_t i = 0; i < M; ++i) m += xp[i];
      m /= static_cast<S>(M);
      S v = 0;
      for (int64_t i = 0; i < M; ++i) v += (xp[i] - m) * (xp[i] - m);
      v /= static_cast<S>(M);
      S is = S(1) / std::sqrt(v + eps);
      (*mu)[static_cast<size_t>(nc)] = m;
      (*istd)[static_cast<size_t>(nc)] = is;
      S gc = gamma->value[nc % C], bc = beta->value[nc % C];
      S* yp = n.value.ptr() + nc * M;
      for (int64_t i = 0; i < M; ++i) yp[i] = gc * (xp[i] - m) * is + bc;
    }
    link(n, {x, gamma, beta});
    n.backprop = [x, gamma, beta, mu, istd, N, C, M](GraphT& g, Node& self) {
      if (x->needs_grad) g.ensure_grad(*x);
      if (gamma->needs_grad) g.ensure_grad(*gamma);
      if (beta->needs_grad) g.ensure_grad(*beta);
      for (int64_t nc = 0; nc < N * C; ++nc) {
        const S* xp = x->value.ptr() + nc * M;
        const S* dyp = self.grad.ptr() + nc * M;
        S m = (*mu)[static_cast<size_t>(nc)];
        S is = (*istd)[static_cast<size_t>(nc)];
        S gc = gamma->value[nc % C];
        S sum_dy = 0, sum_dy_xhat = 0;
        for (int64_t i = 0; i < M; ++i) {
          S xhat = (xp[i] - m) * is;
          sum_dy += dyp[i];
          sum_dy_xhat += dyp[i] * xhat;
        }
        if (gamma->needs_grad) gamma->grad[nc % C] += sum_dy_xhat;
        if (beta->needs_grad) beta->grad[nc % C] += sum_dy;
        if (x->needs_grad) {
          S* dxp = x->grad.ptr() + nc * M;
          S inv_m = S(1) / static_cast<S>(M);
          for (int64_t i = 0; i < M; ++i) {
            S xhat = (xp[i] - m) * is;
            dxp[i] += gc * is * (dyp[i] - inv_m * sum_dy - xhat * inv_m * sum_dy_xhat);
          }
        }
      }
    };
    return &n;
  }

  void backward(Node* loss) {
    if (loss->value.numel() != 1) throw DimensionError("backward expects a scalar loss");
    if (!std::isfinite(static_cast<double>(loss->value[0]))) {
      throw NumericError("non-finite loss in backward");
    }
    ensure_grad(*loss);
    loss->grad[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node& n = *it;
      if (n.needs_grad && n.backprop && n.grad.numel() > 0) n.backprop(*this, n);
    }
  }

  void ensure_grad(Node& n) {
    if (n.grad.numel() == 0) n.grad = TensorT<S>::zeros(n.value.shape);
  }

  size_t size() const { return nodes_.size(); }

 private:
  Node& alloc() {
    nodes_.emplace_back();
    return nodes_.back();
  }

  void link(Node& n, std::vector<Node*> parents) {
    for (Node* p : parents) n.needs_grad = n.needs_grad || p->needs_grad;
  }

  static void check_same_shape(Node* a, Node* b, const char* op) {
    if (!a->value.same_shape(b->value)) {
      throw DimensionError(std::string(op) + " shape mismatch: " + a->value.shape_str() + " vs " +
                           b->value.shape_str());
    }
  }

  // col layout: column-major (R x OH*OW), one column per output position.
  static void im2col(const S* x, int64_t C, int64_t H, int64_t W, ConvGeom g, int64_t OH, int64_t OW, S* col) {
    int64_t R = C * g.kh * g.kw;
    for (int64_t oh = 0; oh < OH; ++oh) {
      for (int64_t ow = 0; ow < OW; ++ow) {
        S* cp = col + (oh * OW + ow) * R;
        for (int64_t c = 0; c < C; ++c) {
          for (int i = 0; i < g.kh; ++i) {
            int64_t ih = oh * g.sh - g.ph + static_cast<int64_t>(i) * g.dh;
            for (int j = 0; j < g.kw; ++j) {
              int64_t iw = ow * g.sw - g.pw + static_cast<int64_t>(j) * g.dw;
              S v = 0;
              if (ih >= 0 && ih < H && iw >= 0 && iw < W) v = x[(c * H + ih) * W + iw];
              cp[c * g.kh * g.kw + static_cast<int64_t>(i) * g.kw + j] = v;
            }
          }
        }
      }
    }
  }

  static void col2im_add(const S* col, int64_t C, int64_t H, int64_t W, ConvGeom g, int64_t OH, int64_t OW, S* x) {
    int64_t R = C * g.kh * g.kw;
    for (int64_t oh = 0; oh < OH; ++oh) {
      for (int64_t ow = 0; ow < OW; ++ow) {
        const S* cp = col + (oh * OW + ow) * R;
        for (int64_t c = 0; c < C; ++c) {
          for (int i = 0; i < g.kh; ++i) {
            int64_t ih = oh * g.sh - g.ph + static_cast<int64_t>(i) * g.dh;
            if (ih < 0 || ih >= H) continue;
            for (int j = 0; j < g.kw; ++j) {
              int64_t iw = ow * g.sw - g.pw + static_cast<int64_t>(j) * g.dw;
              if (iw < 0 || iw >= W) continue;
              x[(c * H + ih) * W + iw] += cp[c * g.kh * g.kw + static_cast<int64_t>(i) * g.kw + j];
            }
          }
        }
      }
    }
  }

  std::deque<Node> nodes_;
};

using Graph = GraphT<float>;
using GraphD = GraphT<double>;

}  // namespace privmel::nn
