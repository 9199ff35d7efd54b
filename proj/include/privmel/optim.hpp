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

#include <cmath>
#include <vector>

#include "privmel/layers.hpp"

namespace privmel::nn {

// Adam with bias correction. The step counter is part of the optimizer and
// is checkpointed; the moment buffers live inside each parameter.
template <typename S>
struct AdamT {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;

  AdamT() = default;
  AdamT(double lr_, double b1, double b2) : lr(lr_), beta1(b1), beta2(b2) {}

  void step(const std::vector<ParamT<S>*>& params) {
    ++t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (auto* p : params) {
      S* v = p->value.ptr();
      S* gr = p->grad.ptr();
      S* m = p->adam_m.ptr();
      S* vv = p->adam_v.ptr();
      int64_t n = p->value.numel();
      for (int64_t i = 0; i < n; ++i) {
        m[i] = static_cast<S>(beta1 * m[i] + (1.0 - beta1) * gr[i]);
        vv[i] = static_cast<S>(beta2 * vv[i] + (1.0 - beta2) * gr[i] * gr[i]);
        double mhat = m[i] / bc1;
        double vhat = vv[i] / bc2;
        v[i] = static_cast<S>(v[i] - lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }
};

using Adam = AdamT<float>;

}  // namespace privmel::nn
