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
#include <numeric>
#include <sstream>
#include <vector>

#include "privmel/common.hpp"

namespace privmel::nn {

// Dense row-major tensor. The scalar type is a template parameter so the
// same network code runs in float for training and in double for
// finite-difference verification.
template <typename S>
struct TensorT {
  std::vector<int64_t> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<int64_t> shp) : shape(std::move(shp)) {
    data.assign(static_cast<size_t>(numel_of(shape)), S(0));
  }
  TensorT(std::vector<int64_t> shp, std::vector<S> values) : shape(std::move(shp)), data(std::move(values)) {
    if (static_cast<int64_t>(data.size()) != numel_of(shape)) {
      throw DimensionError("tensor data size does not match shape");
    }
  }

  static int64_t numel_of(const std::vector<int64_t>& shp) {
    int64_t n = 1;
    for (int64_t d : shp) n *= d;
    return n;
  }

  static TensorT zeros(std::vector<int64_t> shp) { return TensorT(std::move(shp)); }

  static TensorT full(std::vector<int64_t> shp, S v) {
    TensorT t(std::move(shp));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  static TensorT randn(std::vector<int64_t> shp, Rng& rng, double stddev = 1.0) {
    TensorT t(std::move(shp));
    for (auto& x : t.data) x = static_cast<S>(privmel::randn(rng) * stddev);
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  S& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  S operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  void fill(S v) { std::fill(data.begin(), data.end(), v); }

  void add_(const TensorT& o) {
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  }

  template <typename T2>
  TensorT<T2> cast() const {
    TensorT<T2> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T2>(data[i]);
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) os << shape[i] << (i + 1 < shape.size() ? "," : "");
    os << ")";
    return os.str();
  }
};

template <typename S>
uint64_t tensor_hash(const TensorT<S>& t) {
  uint64_t h = fnv1a(t.shape.data(), t.shape.size() * sizeof(int64_t));
  return fnv1a(t.data.data(), t.data.size() * sizeof(S), h);
}

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace privmel::nn
