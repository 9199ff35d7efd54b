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

#include <memory>
#include <string>
#include <vector>

#include "privmel/autodiff.hpp"

namespace privmel::nn {

// Conv weights start from a centered normal with variance 1/fan_in,
// biases and norm offsets from zero, norm scales from one.
template <typename S>
TensorT<S> fan_in_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  return TensorT<S>::randn(std::move(shape), rng, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

template <typename S>
typename GraphT<S>::Node* bind(GraphT<S>& g, ParamT<S>& p, bool train) {
  return train ? g.param(p) : g.frozen(p);
}

template <typename S>
struct Conv2dT {
  ParamT<S> w, b, wn_scale;
  ConvGeom geo;
  bool weight_norm = false;

  bool has_bias = true;

  Conv2dT() = default;
  Conv2dT(const std::string& name, int cin, int cout, ConvGeom geometry, Rng& rng, bool use_weight_norm = false,
          bool use_bias = true)
      : geo(geometry), weight_norm(use_weight_norm), has_bias(use_bias) {
    int64_t fan_in = static_cast<int64_t>(cin) * geo.kh * geo.kw;
    w = ParamT<S>(name + ".w", fan_in_normal<S>({cout, cin, geo.kh, geo.kw}, fan_in, rng));
    if (has_bias) b = ParamT<S>(name + ".b", TensorT<S>::zeros({cout}));
    if (weight_norm) wn_scale = ParamT<S>(name + ".g", row_norms(w.value, cout));
  }

  typename GraphT<S>::Node* forward(GraphT<S>& g, typename GraphT<S>::Node* x, bool train) {
    auto* wn = bind(g, w, train);
    if (weight_norm) wn = g.row_weight_norm(wn, bind(g, wn_scale, train));
    return g.conv2d(x, wn, has_bias ? bind(g, b, train) : nullptr, geo);
  }

  std::vector<ParamT<S>*> params() {
    std::vector<ParamT<S>*> ps{&w};
    if (has_bias) ps.push_back(&b);
    if (weight_norm) ps.push_back(&wn_scale);
    return ps;
  }

  static TensorT<S> row_norms(const TensorT<S>& t, int64_t rows) {
    TensorT<S> out({rows});
    int64_t cols = t.numel() / rows;
    for (int64_t r = 0; r < rows; ++r) {
      S s = 0;
      for (int64_t i = 0; i < cols; ++i) s += t[r * cols + i] * t[r * cols + i];
      out[r] = std::sqrt(s);
    }
    return out;
  }
};

template <typename S>
struct ConvTranspose2dT {
  ParamT<S> w, b, wn_scale;
  ConvGeom geo;
  bool weight_norm = false;

  bool has_bias = true;

  ConvTranspose2dT() = default;
  ConvTranspose2dT(const std::string& name, int cin, int cout, ConvGeom geometry, Rng& rng,
                   bool use_weight_norm = false, bool use_bias = true)
      : geo(geometry), weight_norm(use_weight_norm), has_bias(use_bias) {
    int64_t fan_in = static_cast<int64_t>(cin) * geo.kh * geo.kw;
    w = ParamT<S>(name + ".w", fan_in_normal<S>({cin, cout, geo.kh, geo.kw}, fan_in, rng));
    if (has_bias) b = ParamT<S>(name + ".b", TensorT<S>::zeros({cout}));
    if (weight_norm) wn_scale = ParamT<S>(name + ".g", Conv2dT<S>::row_norms(w.value, cin));
  }

  typename GraphT<S>::Node* forward(GraphT<S>& g, typename GraphT<S>::Node* x, bool train) {
    auto* wn = bind(g, w, train);
    if (weight_norm) wn = g.row_weight_norm(wn, bind(g, wn_scale, train));
    return g.conv2d_transpose(x, wn, has_bias ? bind(g, b, train) : nullptr, geo);
  }

  std::vector<ParamT<S>*> params() {
    std::vector<ParamT<S>*> ps{&w};
    if (has_bias) ps.push_back(&b);
    if (weight_norm) ps.push_back(&wn_scale);
    return ps;
  }
};

template <typename S>
struct LinearT {
  ParamT<S> w, b;

  LinearT() = default;
  LinearT(const std::string& name, int64_t din, int64_t dout, Rng& rng) {
    w = ParamT<S>(name + ".w", fan_in_normal<S>({dout, din}, din, rng));
    b = ParamT<S>(name + ".b", TensorT<S>::zeros({dout}));
  }

  typename GraphT<S>::Node* forward(GraphT<S>& g, typename GraphT<S>::Node* x, bool train) {
    return g.linear(x, bind(g, w, train), bind(g, b, train));
  }

  std::vector<ParamT<S>*> params() { return {&w, &b}; }
};

template <typename S>
struct InstanceNormT {
  ParamT<S> gamma, beta;

  InstanceNormT() = default;
  InstanceNormT(const std::string& name, int64_t channels) {
    gamma = ParamT<S>(name + ".gamma", TensorT<S>::full({channels}, S(1)));
    beta = ParamT<S>(name + ".beta", TensorT<S>::zeros({channels}));
  }

  typename GraphT<S>::Node* forward(GraphT<S>& g, typename GraphT<S>::Node* x, bool train) {
    return g.instance_norm(x, bind(g, gamma, train), bind(g, beta, train));
  }

  std::vector<ParamT<S>*> params() { return {&gamma, &beta}; }
};

template <typename S>
void append_params(std::vector<ParamT<S>*>& dst, std::vector<ParamT<S>*> src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

template <typename S>
uint64_t params_hash(const std::vector<ParamT<S>*>& ps) {
  uint64_t h = 1469598103934665603ull;
  for (const auto* p : ps) {
    h = fnv1a_str(p->name, h);
    h = fnv1a(p->value.data.data(), p->value.data.size() * sizeof(S), h);
  }
  return h;
}

template <typename S>
void zero_grads(const std::vector<ParamT<S>*>& ps) {
  for (auto* p : ps) p->zero_grad();
}

template <typename S>
int64_t param_count(const std::vector<ParamT<S>*>& ps) {
  int64_t n = 0;
  for (const auto* p : ps) n += p->value.numel();
  return n;
}

}  // namespace privmel::nn
