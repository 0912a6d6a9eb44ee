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

/*! \file builders.hpp
 *  \brief Ready-made inference graphs with deterministic, seeded constants.
 *
 *  Every builder returns a self-contained Graph whose weights derive from the
 *  given seed, so two processes with the same seed construct bit-identical
 *  graphs. Weight magnitudes are chosen to keep every intermediate activation
 *  within a small range for inputs drawn from [-0.4, 0.4], which keeps the
 *  fixed-point encoding well inside its precision budget.
 */

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "heg/graph.hpp"
#include "heg/tensor.hpp"

namespace heg {

namespace detail {

inline void add_param(Graph& graph, const std::string& id, std::vector<std::int64_t> shape) {
  Node n;
  n.id = id;
  n.op = OpKind::Parameter;
  n.attrs["shape"] = std::move(shape);
  graph.add_node(std::move(n));
}

inline void add_const(Graph& graph, const std::string& id, Tensor t) {
  Node n;
  n.id = id;
  n.op = OpKind::Constant;
  n.data = std::move(t);
  graph.add_node(std::move(n));
}

inline void add_op(Graph& graph, const std::string& id, OpKind op, std::vector<std::string> inputs,
                   AttrMap attrs = {}) {
  Node n;
  n.id = id;
  n.op = op;
  n.inputs = std::move(inputs);
  n.attrs = std::move(attrs);
  graph.add_node(std::move(n));
}

//! Tensor with every element drawn uniformly from [lo, hi).
inline Tensor uniform_tensor(Rng rng, TensorShape shape, double lo, double hi) {
  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  for (double& v : values) v = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(values));
}

//! Tensor of +1/-1 entries, the sign drawn per element.
inline Tensor sign_tensor(Rng rng, TensorShape shape) {
  std::vector<double> values(static_cast<size_t>(shape.element_count()));
  for (double& v : values) v = (rng.next() & 1) ? 1.0 : -1.0;
  return Tensor(std::move(shape), std::move(values));
}

//! Bias constant plus the Broadcast that aligns it with `target` (batch dim
//! written as -1); returns the id of the broadcast node.
inline std::string add_channel_bias(Graph& graph, const std::string& base, Tensor bias,
                                    std::vector<std::int64_t> target, std::int64_t channel_axis) {
  std::vector<std::int64_t> axes;
  for (size_t a = 0; a < target.size(); ++a)
    if (static_cast<std::int64_t>(a) != channel_axis) axes.push_back(static_cast<std::int64_t>(a));
  target[0] = -1;
  add_const(graph, base, std::move(bias));
  add_op(graph, base + "_bcast", OpKind::Broadcast, {base},
         AttrMap{{"shape", target}, {"axes", axes}});
  return base + "_bcast";
}

}  // namespace detail

/*! \brief Single convolution followed by inference-time batch normalization.
 *
 * Multiplicative depth 2 as written; the batch-norm folding pass collapses
 * it to depth 1 by scaling the filter and adding a bias.
 */
inline Graph make_conv_bn(std::uint64_t seed = 1) {
  Graph g;
  Rng rng(seed);
  Rng wr = rng.fork("conv_bn");
  detail::add_param(g, "x", {1, 1, 4, 4});
  detail::add_const(g, "f", detail::uniform_tensor(wr.fork("f"), TensorShape({2, 1, 2, 2}), -0.5, 0.5));
  detail::add_op(g, "conv", OpKind::Convolution, {"x", "f"}, AttrMap{{"stride", std::int64_t{2}}});
  Rng sr = wr.fork("stats");
  detail::add_const(g, "gamma", detail::uniform_tensor(sr.fork("gamma"), TensorShape({2}), 0.5, 1.5));
  detail::add_const(g, "beta", detail::uniform_tensor(sr.fork("beta"), TensorShape({2}), -0.3, 0.3));
  detail::add_const(g, "mean", detail::uniform_tensor(sr.fork("mean"), TensorShape({2}), -0.2, 0.2));
  detail::add_const(g, "variance", detail::uniform_tensor(sr.fork("variance"), TensorShape({2}), 0.5, 1.5));
  detail::add_op(g, "bn", OpKind::BatchNormInference, {"conv", "gamma", "beta", "mean", "variance"},
                 AttrMap{{"epsilon", 1e-5}});
  g.set_outputs({"bn"});
  return g;
}

/*! \brief The classic five-level MNIST inference network.
 *
 * 28x28 input, padded to 29x29; a 5x5/stride-2 convolution to five maps
 * (13x13 each, 845 values); square activation; a 845x100 dense layer; square
 * activation; a 100x10 dense layer producing the logits. Multiplicative
 * depth 5: convolution, two squares, two dense layers; pads, reshapes and
 * bias adds are free.
 */
inline Graph make_cryptonets(std::uint64_t seed = 1) {
  Graph g;
  Rng wr = Rng(seed).fork("cryptonets");
  detail::add_param(g, "x", {1, 1, 28, 28});
  detail::add_op(g, "pad", OpKind::Pad, {"x"},
                 AttrMap{{"pad_below", std::vector<std::int64_t>{0, 0, 0, 0}},
                         {"pad_above", std::vector<std::int64_t>{0, 0, 1, 1}}});
  detail::add_const(g, "w1", detail::uniform_tensor(wr.fork("w1"), TensorShape({5, 1, 5, 5}), -0.375, 0.375));
  detail::add_op(g, "conv1", OpKind::Convolution, {"pad", "w1"}, AttrMap{{"stride", std::int64_t{2}}});
  std::string b1 = detail::add_channel_bias(g, "b1", detail::uniform_tensor(wr.fork("b1"), TensorShape({5}), -0.1, 0.1),
                                            {1, 5, 13, 13}, 1);
  detail::add_op(g, "conv1_bias", OpKind::Add, {"conv1", b1});
  detail::add_op(g, "act1", OpKind::PolyAct, {"conv1_bias"}, AttrMap{{"a", 1.0}, {"b", 0.0}, {"c", 0.0}});
  detail::add_op(g, "flatten", OpKind::Reshape, {"act1"},
                 AttrMap{{"shape", std::vector<std::int64_t>{-1, 845}}});
  detail::add_const(g, "w2", detail::uniform_tensor(wr.fork("w2"), TensorShape({845, 100}), -0.16, 0.16));
  detail::add_op(g, "fc1", OpKind::Dot, {"flatten", "w2"});
  std::string b2 = detail::add_channel_bias(g, "b2", detail::uniform_tensor(wr.fork("b2"), TensorShape({100}), -0.05, 0.05),
                                            {1, 100}, 1);
  detail::add_op(g, "fc1_bias", OpKind::Add, {"fc1", b2});
  detail::add_op(g, "act2", OpKind::PolyAct, {"fc1_bias"}, AttrMap{{"a", 1.0}, {"b", 0.0}, {"c", 0.0}});
  detail::add_const(g, "w3", detail::uniform_tensor(wr.fork("w3"), TensorShape({100, 10}), -0.57, 0.57));
  detail::add_op(g, "fc2", OpKind::Dot, {"act2", "w3"});
  std::string b3 = detail::add_channel_bias(g, "b3", detail::uniform_tensor(wr.fork("b3"), TensorShape({10}), -0.05, 0.05),
                                            {1, 10}, 1);
  detail::add_op(g, "logits", OpKind::Add, {"fc2", b3});
  g.set_outputs({"logits"});
  return g;
}

/*! \brief A network whose every weight is +1 or -1.
 *
 * Two sign-valued convolutions and a sign-valued dense layer, each followed
 * by batch normalization (general statistics), with square activations in
 * between: eight levels as written. Because every weighted layer multiplies
 * only by +1/-1, a depth analysis that accounts for multiplication shortcuts
 * discounts the three weighted layers and admits the graph at five levels.
 *
 * The sign-valued weight tensors feed Dot/Convolution directly (no broadcast
 * or arithmetic in between), which is what makes the discount visible to the
 * analysis. Statistics are chosen so activations stay within roughly
 * [-1, 1] for inputs in [-0.4, 0.4].
 */
inline Graph make_cryptonets_binarized(std::uint64_t seed = 1) {
  Graph g;
  Rng wr = Rng(seed).fork("binarized");
  auto add_bn = [&](const std::string& base, const std::string& input, std::int64_t channels,
                    double variance) {
    Rng sr = wr.fork(base);
    std::vector<double> ones(static_cast<size_t>(channels), 0.15);
    std::vector<double> zeros(static_cast<size_t>(channels), 0.0);
    std::vector<double> vars(static_cast<size_t>(channels), variance);
    detail::add_const(g, base + "_gamma", Tensor(TensorShape({channels}), ones));
    detail::add_const(g, base + "_beta",
                      detail::uniform_tensor(sr.fork("beta"), TensorShape({channels}), -0.05, 0.05));
    detail::add_const(g, base + "_mean", Tensor(TensorShape({channels}), zeros));
    detail::add_const(g, base + "_variance", Tensor(TensorShape({channels}), vars));
    detail::add_op(g, base, OpKind::BatchNormInference,
                   {input, base + "_gamma", base + "_beta", base + "_mean", base + "_variance"},
                   AttrMap{{"epsilon", 1e-5}});
  };
  detail::add_param(g, "x", {1, 1, 8, 8});
  detail::add_const(g, "w1", detail::sign_tensor(wr.fork("w1"), TensorShape({4, 1, 3, 3})));
  detail::add_op(g, "conv1", OpKind::Convolution, {"x", "w1"}, AttrMap{{"stride", std::int64_t{1}}});
  add_bn("bn1", "conv1", 4, 0.48);
  detail::add_op(g, "act1", OpKind::PolyAct, {"bn1"}, AttrMap{{"a", 1.0}, {"b", 0.0}, {"c", 0.0}});
  detail::add_const(g, "w2", detail::sign_tensor(wr.fork("w2"), TensorShape({4, 4, 3, 3})));
  detail::add_op(g, "conv2", OpKind::Convolution, {"act1", "w2"}, AttrMap{{"stride", std::int64_t{1}}});
  add_bn("bn2", "conv2", 4, 0.055);
  detail::add_op(g, "act2", OpKind::PolyAct, {"bn2"}, AttrMap{{"a", 1.0}, {"b", 0.0}, {"c", 0.0}});
  detail::add_op(g, "flatten", OpKind::Reshape, {"act2"},
                 AttrMap{{"shape", std::vector<std::int64_t>{-1, 64}}});
  detail::add_const(g, "w3", detail::sign_tensor(wr.fork("w3"), TensorShape({64, 10})));
  detail::add_op(g, "fc", OpKind::Dot, {"flatten", "w3"});
  add_bn("logits", "fc", 10, 0.096);
  g.set_outputs({"logits"});
  return g;
}

/*! \brief A deeper 32x32x3 network exercising the pooling and activation folds.
 *
 * conv - square - avgpool - conv - square - avgpool - dense - scaled square -
 * dense. As written the depth is 10 (the first average pool and the scaled
 * square each cost an extra level). The pooling fold absorbs the first
 * pool's divisor into the following convolution, and the activation fold
 * moves the square law's leading coefficient into the final dense layer,
 * bringing the depth to 8. The second pool feeds a reshape, so it keeps its
 * divisor.
 */
inline Graph make_cifar10(std::uint64_t seed = 1) {
  Graph g;
  Rng wr = Rng(seed).fork("cifar10");
  auto range = [](std::int64_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
  detail::add_param(g, "x", {1, 3, 32, 32});
  detail::add_const(g, "w1",
                    detail::uniform_tensor(wr.fork("w1"), TensorShape({20, 3, 5, 5}), -range(75), range(75)));
  detail::add_op(g, "conv1", OpKind::Convolution, {"x", "w1"}, AttrMap{{"stride", std::int64_t{1}}});
  std::string b1 = detail::add_channel_bias(g, "b1", detail::uniform_tensor(wr.fork("b1"), TensorShape({20}), -0.1, 0.1),
                                            {1, 20, 28, 28}, 1);
  detail::add_op(g, "conv1_bias", OpKind::Add, {"conv1", b1});
  detail::add_op(g, "act1", OpKind::PolyAct, {"conv1_bias"}, AttrMap{{"a", 1.0}, {"b", 0.0}, {"c", 0.0}});
  detail::add_op(g, "pool1", OpKind::AvgPool, {"act1"},
                 AttrMap{{"window", std::vector<std::int64_t>{2, 2}}, {"stride", std::int64_t{2}}});
  detail::add_const(g, "w2",
                    detail::uniform_tensor(wr.fork("w2"), TensorShape({50, 20, 5, 5}), -range(500), range(500)));
  detail::add_op(g, "conv2", OpKind::Convolution, {"pool1", "w2"}, AttrMap{{"stride", std::int64_t{1}}});
  std::string b2 = detail::add_channel_bias(g, "b2", detail::uniform_tensor(wr.fork("b2"), TensorShape({50}), -0.1, 0.1),
                                            {1, 50, 10, 10}, 1);
  detail::add_op(g, "conv2_bias", OpKind::Add, {"conv2", b2});
  detail::add_op(g, "act2", OpKind::PolyAct, {"conv2_bias"}, AttrMap{{"a", 1.0}, {"b", 0.0}, {"c", 0.0}});
  detail::add_op(g, "pool2", OpKind::AvgPool, {"act2"},
                 AttrMap{{"window", std::vector<std::int64_t>{2, 2}}, {"stride", std::int64_t{2}}});
  detail::add_op(g, "flatten", OpKind::Reshape, {"pool2"},
                 AttrMap{{"shape", std::vector<std::int64_t>{-1, 1250}}});
  detail::add_const(g, "w3",
                    detail::uniform_tensor(wr.fork("w3"), TensorShape({1250, 100}), -range(1250), range(1250)));
  detail::add_op(g, "fc1", OpKind::Dot, {"flatten", "w3"});
  std::string b3 = detail::add_channel_bias(g, "b3", detail::uniform_tensor(wr.fork("b3"), TensorShape({100}), -0.05, 0.05),
                                            {1, 100}, 1);
  detail::add_op(g, "fc1_bias", OpKind::Add, {"fc1", b3});
  detail::add_op(g, "act3", OpKind::PolyAct, {"fc1_bias"}, AttrMap{{"a", 0.5}, {"b", 0.5}, {"c", 0.0}});
  detail::add_const(g, "w4",
                    detail::uniform_tensor(wr.fork("w4"), TensorShape({100, 10}), -range(100), range(100)));
  detail::add_op(g, "fc2", OpKind::Dot, {"act3", "w4"});
  std::string b4 = detail::add_channel_bias(g, "b4", detail::uniform_tensor(wr.fork("b4"), TensorShape({10}), -0.05, 0.05),
                                            {1, 10}, 1);
  detail::add_op(g, "logits", OpKind::Add, {"fc2", b4});
  g.set_outputs({"logits"});
  return g;
}

/*! \brief n-by-n matrix product whose right operand mixes general weights
 *  with an exact-1.0 mask.
 *
 * The data parameter "a" has shape (1, n, n); the constant "b" is (n, n)
 * with each element set to exactly 1.0 with probability ones_frac (seeded)
 * and otherwise drawn from [0.2, 0.9), so no general element collides with
 * a shortcut value. Every 1.0 element of b participates in n output dot
 * products, each of which an optimizing executor skips.
 */
inline Graph make_gemm(std::int64_t n, double ones_frac, std::uint64_t seed) {
  check(n >= 1, errc::validation, "gemm size must be positive");
  check(ones_frac >= 0.0 && ones_frac <= 1.0, errc::validation, "ones fraction must lie in [0, 1]");
  Graph g;
  Rng rng = Rng(seed).fork("gemm");
  detail::add_param(g, "a", {1, n, n});
  std::vector<double> values(static_cast<size_t>(n * n));
  for (double& v : values) v = (rng.uniform() < ones_frac) ? 1.0 : rng.uniform(0.2, 0.9);
  detail::add_const(g, "b", Tensor(TensorShape({n, n}), std::move(values)));
  detail::add_op(g, "prod", OpKind::Dot, {"a", "b"});
  g.set_outputs({"prod"});
  return g;
}

//! Number of elements of a constant node holding exactly `value` (bit-wise).
inline std::int64_t exact_element_count(const Graph& graph, const std::string& node_id, double value) {
  const Node& node = graph.node(node_id);
  check(node.op == OpKind::Constant && node.data.has_value(), errc::validation,
        "node '" + node_id + "' is not a constant");
  std::int64_t count = 0;
  for (double v : node.data->values())
    if (v == value) ++count;
  return count;
}

/*! \brief Deterministic inputs for every parameter of a graph.
 *
 * Each parameter gets a tensor of its declared shape with the leading axis
 * widened to `batch` (rank-0 parameters are left as scalars), filled
 * uniformly from [-0.4, 0.4) using a per-parameter fork of `seed`.
 */
inline std::map<std::string, Tensor> synthesize_inputs(const Graph& graph, std::int64_t batch,
                                                       std::uint64_t seed) {
  check(batch >= 1, errc::validation, "batch extent must be positive");
  std::map<std::string, Tensor> inputs;
  Rng root = Rng(seed).fork("inputs");
  for (const auto& [id, node] : graph.nodes()) {
    if (node.op != OpKind::Parameter) continue;
    std::vector<std::int64_t> dims = attr_ints(node, "shape");
    if (!dims.empty()) dims[0] = batch;
    Rng rng = root.fork(id);
    inputs.emplace(id, detail::uniform_tensor(rng, TensorShape(dims), -0.4, 0.4));
  }
  return inputs;
}

}  // namespace heg
