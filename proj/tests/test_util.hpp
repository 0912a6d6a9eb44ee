//*****************************************************************************
// Copyright 2026 The hegraph Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//*****************************************************************************

#pragma once

#include <string>
#include <vector>

#include "heg/common.hpp"
#include "heg/graph.hpp"
#include "heg/tensor.hpp"

namespace heg::testutil {

inline Node make_param(const std::string& id, std::vector<int64_t> shape) {
  Node n;
  n.id = id;
  n.op = OpKind::Parameter;
  n.attrs["shape"] = shape;
  return n;
}

inline Node make_const(const std::string& id, Tensor t) {
  Node n;
  n.id = id;
  n.op = OpKind::Constant;
  n.data = std::move(t);
  return n;
}

inline Node make_op(const std::string& id, OpKind op, std::vector<std::string> inputs, AttrMap attrs = {}) {
  Node n;
  n.id = id;
  n.op = op;
  n.inputs = std::move(inputs);
  n.attrs = std::move(attrs);
  return n;
}

//! Tensor of the given shape filled from `rng`, uniform in [lo, hi).
inline Tensor random_tensor(Rng& rng, TensorShape shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  for (double& v : values) v = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(values));
}

//! Largest |a-b| / max(1, |a|, |b|) over two equally-sized tensors.
inline double max_relative_error(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.values().size(); ++i) {
    double denom = std::max({1.0, std::abs(a.values()[i]), std::abs(b.values()[i])});
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]) / denom);
  }
  return worst;
}

}  // namespace heg::testutil
