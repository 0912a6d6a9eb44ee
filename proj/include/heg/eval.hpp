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

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "heg/graph.hpp"

namespace heg {

//-----------------------------------------------------------------------------
// Reference evaluator: executes a graph on plain doubles with direct loops.
// It is deliberately naive — no packing, no kernels shared with the HE
// executor — so it can serve as the independent oracle for everything else.
//-----------------------------------------------------------------------------

namespace detail {

//! Odometer-style iteration over all multi-indices of a shape.
template <typename Fn>
inline void for_each_index(const TensorShape& shape, Fn&& fn) {
  std::vector<int64_t> idx(shape.rank(), 0);
  int64_t total = shape.element_count();
  for (int64_t flat = 0; flat < total; ++flat) {
    fn(idx, flat);
    for (size_t a = shape.rank(); a-- > 0;) {
      if (++idx[a] < shape.dim(a)) break;
      idx[a] = 0;
    }
  }
}

inline Tensor eval_elementwise(const Tensor& a, const Tensor& b, OpKind op) {
  Tensor out(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  for (size_t i = 0; i < av.size(); ++i) {
    switch (op) {
      case OpKind::Add: out.values()[i] = av[i] + bv[i]; break;
      case OpKind::Subtract: out.values()[i] = av[i] - bv[i]; break;
      case OpKind::Multiply: out.values()[i] = av[i] * bv[i]; break;
      default: fail(errc::internal, "not an elementwise op");
    }
  }
  return out;
}

inline Tensor eval_dot(const Tensor& a, const Tensor& b, const TensorShape& out_shape) {
  Tensor out(out_shape);
  int64_t k = b.shape().dim(0);
  int64_t m = b.shape().dim(1);
  int64_t rows = a.shape().element_count() / k;  // batched rows, flattened
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int64_t i = 0; i < k; ++i) acc += a.at(r * k + i) * b.at(i * m + j);
      out.at(r * m + j) = acc;
    }
  }
  return out;
}

inline Tensor eval_convolution(const Tensor& x, const Tensor& w, int64_t stride, const TensorShape& out_shape) {
  Tensor out(out_shape);
  int64_t batch = x.shape().dim(0), channels = x.shape().dim(1), h = x.shape().dim(2), width = x.shape().dim(3);
  int64_t filters = w.shape().dim(0), kh = w.shape().dim(2), kw = w.shape().dim(3);
  int64_t oh = out_shape.dim(2), ow = out_shape.dim(3);
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t f = 0; f < filters; ++f)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t xo = 0; xo < ow; ++xo) {
          double acc = 0.0;
          for (int64_t c = 0; c < channels; ++c)
            for (int64_t dy = 0; dy < kh; ++dy)
              for (int64_t dx = 0; dx < kw; ++dx)
                acc += x.at(((n * channels + c) * h + y * stride + dy) * width + xo * stride + dx) *
                       w.at(((f * channels + c) * kh + dy) * kw + dx);
          out.at(((n * filters + f) * oh + y) * ow + xo) = acc;
        }
  return out;
}

//! Window sum; `scale` is 1/(w1*w2) for AvgPool and 1 for ScaledMeanPool.
inline Tensor eval_pool(const Tensor& x, int64_t wh, int64_t ww, int64_t stride, double scale,
                        const TensorShape& out_shape) {
  Tensor out(out_shape);
  int64_t batch = x.shape().dim(0), channels = x.shape().dim(1), h = x.shape().dim(2), width = x.shape().dim(3);
  int64_t oh = out_shape.dim(2), ow = out_shape.dim(3);
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t xo = 0; xo < ow; ++xo) {
          double acc = 0.0;
          for (int64_t dy = 0; dy < wh; ++dy)
            for (int64_t dx = 0; dx < ww; ++dx)
              acc += x.at(((n * channels + c) * h + y * stride + dy) * width + xo * stride + dx);
          out.at(((n * channels + c) * oh + y) * ow + xo) = acc * scale;
        }
  return out;
}

}  // namespace detail

/*! \brief Evaluate one node on plain doubles given its input tensors.
 *
 * `batch_extent` resolves Broadcast batch placeholders; pass 0 when the graph
 * context has none. Constant folding and the executor oracle both build on
 * this entry point.
 */
inline Tensor eval_node(const Node& node, const std::vector<const Tensor*>& in, int64_t batch_extent = 0) {
  std::vector<TensorShape> in_shapes;
  in_shapes.reserve(in.size());
  for (const Tensor* t : in) in_shapes.push_back(t->shape());
  TensorShape out_shape = infer_node_shape(node, in_shapes, batch_extent);

  switch (node.op) {
    case OpKind::Parameter:
      fail(errc::internal, "eval_node cannot evaluate a Parameter");
    case OpKind::Constant:
      return *node.data;
    case OpKind::Add:
    case OpKind::Subtract:
    case OpKind::Multiply:
      return detail::eval_elementwise(*in[0], *in[1], node.op);
    case OpKind::Negate: {
      Tensor out = *in[0];
      for (double& v : out.values()) v = -v;
      return out;
    }
    case OpKind::Dot:
      return detail::eval_dot(*in[0], *in[1], out_shape);
    case OpKind::Convolution:
      return detail::eval_convolution(*in[0], *in[1], attr_i64(node, "stride"), out_shape);
    case OpKind::AvgPool: {
      const auto& w = attr_ints(node, "window");
      double scale = 1.0 / static_cast<double>(w[0] * w[1]);
      return detail::eval_pool(*in[0], w[0], w[1], attr_i64(node, "stride"), scale, out_shape);
    }
    case OpKind::ScaledMeanPool: {
      const auto& w = attr_ints(node, "window");
      return detail::eval_pool(*in[0], w[0], w[1], attr_i64(node, "stride"), 1.0, out_shape);
    }
    case OpKind::BatchNormInference: {
      const Tensor& x = *in[0];
      const Tensor& gamma = *in[1];
      const Tensor& beta = *in[2];
      const Tensor& mean = *in[3];
      const Tensor& variance = *in[4];
      double eps = attr_f64(node, "epsilon");
      Tensor out(x.shape());
      int64_t channels = x.shape().dim(1);
      int64_t inner = 1;
      for (size_t a = 2; a < x.shape().rank(); ++a) inner *= x.shape().dim(a);
      int64_t batch = x.shape().dim(0);
      for (int64_t n = 0; n < batch; ++n)
        for (int64_t c = 0; c < channels; ++c) {
          double g = gamma.at(c) / std::sqrt(variance.at(c) + eps);
          double b = beta.at(c) - g * mean.at(c);
          for (int64_t i = 0; i < inner; ++i) {
            int64_t off = (n * channels + c) * inner + i;
            out.at(off) = g * x.at(off) + b;
          }
        }
      return out;
    }
    case OpKind::Broadcast: {
      std::set<int64_t> inserted;
      for (int64_t a : attr_ints(node, "axes")) inserted.insert(a);
      Tensor out(out_shape);
      detail::for_each_index(out_shape, [&](const std::vector<int64_t>& idx, int64_t flat) {
        std::vector<int64_t> src;
        for (size_t a = 0; a < idx.size(); ++a)
          if (!inserted.count(static_cast<int64_t>(a))) src.push_back(idx[a]);
        out.at(flat) = in[0]->at(flat_index(in[0]->shape(), src));
      });
      return out;
    }
    case OpKind::Concat: {
      int64_t axis = attr_i64(node, "axis");
      Tensor out(out_shape);
      int64_t offset = 0;
      for (const Tensor* part : in) {
        detail::for_each_index(part->shape(), [&](const std::vector<int64_t>& idx, int64_t flat) {
          std::vector<int64_t> dst = idx;
          dst[static_cast<size_t>(axis)] += offset;
          out.at(flat_index(out_shape, dst)) = part->at(flat);
        });
        offset += part->shape().dim(static_cast<size_t>(axis));
      }
      return out;
    }
    case OpKind::Pad: {
      const auto& below = attr_ints(node, "pad_below");
      double fill = node.attrs.count("value") ? attr_f64(node, "value") : 0.0;
      Tensor out(out_shape);
      for (double& v : out.values()) v = fill;
      detail::for_each_index(in[0]->shape(), [&](const std::vector<int64_t>& idx, int64_t flat) {
        std::vector<int64_t> dst = idx;
        for (size_t a = 0; a < dst.size(); ++a) dst[a] += below[a];
        out.at(flat_index(out_shape, dst)) = in[0]->at(flat);
      });
      return out;
    }
    case OpKind::Reshape:
      return Tensor(out_shape, in[0]->values());
    case OpKind::Reverse: {
      std::set<int64_t> axes;
      for (int64_t a : attr_ints(node, "axes")) axes.insert(a);
      Tensor out(out_shape);
      detail::for_each_index(out_shape, [&](const std::vector<int64_t>& idx, int64_t flat) {
        std::vector<int64_t> src = idx;
        for (int64_t a : axes)
          src[static_cast<size_t>(a)] = in[0]->shape().dim(static_cast<size_t>(a)) - 1 - idx[static_cast<size_t>(a)];
        out.at(flat) = in[0]->at(flat_index(in[0]->shape(), src));
      });
      return out;
    }
    case OpKind::Slice: {
      const auto& begin = attr_ints(node, "begin");
      Tensor out(out_shape);
      detail::for_each_index(out_shape, [&](const std::vector<int64_t>& idx, int64_t flat) {
        std::vector<int64_t> src = idx;
        for (size_t a = 0; a < src.size(); ++a) src[a] += begin[a];
        out.at(flat) = in[0]->at(flat_index(in[0]->shape(), src));
      });
      return out;
    }
    case OpKind::Sum: {
      std::set<int64_t> axes;
      for (int64_t a : attr_ints(node, "axes")) axes.insert(a);
      Tensor out(out_shape);
      detail::for_each_index(in[0]->shape(), [&](const std::vector<int64_t>& idx, int64_t flat) {
        std::vector<int64_t> dst;
        for (size_t a = 0; a < idx.size(); ++a)
          if (!axes.count(static_cast<int64_t>(a))) dst.push_back(idx[a]);
        out.at(flat_index(out_shape, dst)) += in[0]->at(flat);
      });
      return out;
    }
    case OpKind::PolyAct: {
      double a = attr_f64(node, "a"), b = attr_f64(node, "b"), c = attr_f64(node, "c");
      Tensor out = *in[0];
      for (double& v : out.values()) v = a * v * v + b * v + c;
      return out;
    }
  }
  fail(errc::internal, "unhandled op kind in eval_node");
}

/*! \brief Evaluate every node of a graph on plain doubles.
 *
 * `inputs` binds Parameter node ids to tensors; their shapes must match the
 * declared parameter shapes up to the leading batch extent, which all bound
 * inputs must share. Returns the value of every node keyed by id.
 */
inline std::map<std::string, Tensor> evaluate_all(const Graph& graph, const std::map<std::string, Tensor>& inputs) {
  std::map<std::string, Tensor> values;
  int64_t batch_extent = 0;
  for (const auto& [name, bound] : inputs) {
    (void)name;
    if (bound.shape().rank() == 0) continue;
    if (batch_extent == 0)
      batch_extent = bound.shape().dim(0);
    else if (bound.shape().dim(0) != batch_extent)
      fail(errc::validation, "inputs disagree on the batch extent");
  }

  for (const auto& id : toposort(graph)) {
    const Node& node = graph.node(id);
    if (node.op == OpKind::Parameter) {
      auto it = inputs.find(id);
      if (it == inputs.end()) fail(errc::validation, "no input bound for parameter '" + id + "'");
      const Tensor& bound = it->second;
      std::vector<int64_t> declared = attr_ints(node, "shape");
      if (bound.shape().rank() != declared.size())
        fail(errc::validation, "input for '" + id + "' has rank " + std::to_string(bound.shape().rank()) +
                                   ", parameter declares " + std::to_string(declared.size()));
      for (size_t a = 1; a < declared.size(); ++a)
        if (bound.shape().dim(a) != declared[a])
          fail(errc::validation, "input for '" + id + "' shape " + bound.shape().to_string() +
                                     " mismatches the declared non-batch extents");
      values.emplace(id, bound);
      continue;
    }
    std::vector<const Tensor*> in;
    in.reserve(node.inputs.size());
    for (const auto& input : node.inputs) in.push_back(&values.at(input));
    values.emplace(id, eval_node(node, in, batch_extent));
  }
  return values;
}

//! Evaluate and return only the declared outputs, in declaration order.
inline std::vector<Tensor> evaluate(const Graph& graph, const std::map<std::string, Tensor>& inputs) {
  auto all = evaluate_all(graph, inputs);
  std::vector<Tensor> out;
  out.reserve(graph.outputs().size());
  for (const auto& id : graph.outputs()) out.push_back(all.at(id));
  return out;
}

}  // namespace heg
