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
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "heg/eval.hpp"
#include "heg/graph.hpp"

namespace heg {

//-----------------------------------------------------------------------------
// Graph rewrite passes. Every pass takes a graph by value and returns the
// rewritten graph; inputs are never mutated. All scans run in lexicographic
// node order, so rewrites are deterministic.
//-----------------------------------------------------------------------------

enum class PassId { ConstantFold, AvgPoolFold, ActivationFold, BatchNormFold, Depth };

inline std::optional<PassId> pass_from_name(const std::string& token) {
  if (token == "constant-fold") return PassId::ConstantFold;
  if (token == "avgpool-fold") return PassId::AvgPoolFold;
  if (token == "act-fold") return PassId::ActivationFold;
  if (token == "bn-fold") return PassId::BatchNormFold;
  if (token == "depth") return PassId::Depth;
  return std::nullopt;
}

//! Parse a comma-separated pass list; "all" expands to every rewrite pass in
//! canonical order (constant-fold, avgpool-fold, act-fold, bn-fold).
inline std::vector<PassId> parse_passes(const std::string& spec) {
  std::vector<PassId> out;
  std::string token;
  std::istringstream stream(spec);
  while (std::getline(stream, token, ',')) {
    if (token.empty()) continue;
    if (token == "all") {
      out.insert(out.end(), {PassId::ConstantFold, PassId::AvgPoolFold, PassId::ActivationFold,
                             PassId::BatchNormFold});
      continue;
    }
    auto id = pass_from_name(token);
    if (!id) fail(errc::validation, "unknown pass '" + token + "'");
    out.push_back(*id);
  }
  return out;
}

namespace detail {

//! Drop non-Parameter nodes that no output depends on.
inline void remove_dead_nodes(Graph& graph) {
  std::set<std::string> live(graph.outputs().begin(), graph.outputs().end());
  // Repeated sweeps are fine at compiler scale; the graph is a DAG.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [id, node] : graph.nodes()) {
      if (!live.count(id)) continue;
      for (const auto& in : node.inputs)
        if (live.insert(in).second) changed = true;
    }
  }
  std::vector<std::string> dead;
  for (const auto& [id, node] : graph.nodes())
    if (!live.count(id) && node.op != OpKind::Parameter) dead.push_back(id);
  for (const auto& id : dead) graph.remove_node(id);
}

//! Pick a fresh node id derived from `base`.
inline std::string fresh_id(const Graph& graph, const std::string& base) {
  if (!graph.has_node(base)) return base;
  for (int i = 2;; ++i) {
    std::string candidate = base + "_" + std::to_string(i);
    if (!graph.has_node(candidate)) return candidate;
  }
}

//! True when `id` has exactly one consumer and is not a graph output.
inline bool sole_consumer(const Graph& graph, const std::map<std::string, std::vector<std::string>>& users,
                          const std::string& id, const std::string& consumer) {
  for (const auto& out : graph.outputs())
    if (out == id) return false;
  auto it = users.find(id);
  if (it == users.end()) return false;
  return it->second.size() == 1 && it->second[0] == consumer;
}

inline bool is_constant(const Graph& graph, const std::string& id) {
  return graph.node(id).op == OpKind::Constant;
}

//! Rewire every consumer of `from` (and the output list) to `to`.
inline void replace_uses(Graph& graph, const std::string& from, const std::string& to) {
  std::vector<std::string> ids;
  for (const auto& [id, node] : graph.nodes()) {
    (void)node;
    ids.push_back(id);
  }
  for (const auto& id : ids)
    for (auto& in : graph.mutable_node(id).inputs)
      if (in == from) in = to;
  std::vector<std::string> outputs = graph.outputs();
  for (auto& out : outputs)
    if (out == from) out = to;
  graph.set_outputs(outputs);
}

}  // namespace detail

//-----------------------------------------------------------------------------
// constant_fold: evaluate maximal constant subgraphs ahead of time.
//-----------------------------------------------------------------------------

/*! \brief Replace every node whose inputs are all Constants with a Constant.
 *
 * Runs to a fixpoint in one topological sweep. Broadcast nodes with a batch
 * placeholder are left alone — their extent is only known at run time.
 */
inline Graph constant_fold(Graph graph) {
  for (const auto& id : toposort(graph)) {
    Node& node = graph.mutable_node(id);
    if (node.op == OpKind::Parameter || node.op == OpKind::Constant) continue;
    bool all_const = !node.inputs.empty();
    for (const auto& in : node.inputs)
      if (!detail::is_constant(graph, in)) all_const = false;
    if (!all_const) continue;
    if (node.op == OpKind::Broadcast) {
      const auto& target = attr_ints(node, "shape");
      if (std::find(target.begin(), target.end(), int64_t{-1}) != target.end()) continue;
    }
    std::vector<const Tensor*> in;
    in.reserve(node.inputs.size());
    for (const auto& input : node.inputs) in.push_back(&graph.node(input).data.value());
    Tensor folded = eval_node(node, in, 0);
    node.op = OpKind::Constant;
    node.inputs.clear();
    node.attrs.clear();
    node.data = std::move(folded);
  }
  detail::remove_dead_nodes(graph);
  return graph;
}

//-----------------------------------------------------------------------------
// avgpool_fold: AvgPool feeding a convolution becomes a ScaledMeanPool (a
// plain window sum, free of the scalar multiply) with the division folded
// into the convolution weights.
//-----------------------------------------------------------------------------

inline Graph avgpool_fold(Graph graph) {
  bool changed = true;
  while (changed) {
    changed = false;
    auto users = consumer_map(graph);
    for (const auto& [id, node] : graph.nodes()) {
      if (node.op != OpKind::AvgPool) continue;
      if (!detail::sole_consumer(graph, users, id, users.count(id) ? users.at(id)[0] : "")) continue;
      const std::string consumer_id = users.at(id)[0];
      const Node& consumer = graph.node(consumer_id);
      if (consumer.op != OpKind::Convolution) continue;
      if (consumer.inputs[0] != id) continue;  // pool must feed the data side
      if (!detail::is_constant(graph, consumer.inputs[1])) continue;

      const auto& window = attr_ints(node, "window");
      double divisor = static_cast<double>(window[0] * window[1]);

      Tensor scaled = graph.node(consumer.inputs[1]).data.value();
      for (double& w : scaled.values()) w /= divisor;
      std::string weights_id = detail::fresh_id(graph, consumer_id + "/pooled_weights");
      Node weights;
      weights.id = weights_id;
      weights.op = OpKind::Constant;
      weights.data = std::move(scaled);
      graph.add_node(std::move(weights));

      graph.mutable_node(consumer_id).inputs[1] = weights_id;
      graph.mutable_node(id).op = OpKind::ScaledMeanPool;
      changed = true;
      break;  // consumer map is stale; rescan
    }
  }
  detail::remove_dead_nodes(graph);
  return graph;
}

//-----------------------------------------------------------------------------
// activation_fold: the square-law coefficient of a polynomial activation
// moves into the next weighted layer. For any constant weights V,
//   V · (a·y² + b·y + c)  ==  (a·V) · (y² + (b/a)·y + (c/a)),
// so PolyAct(a,b,c) feeding a Conv/Dot becomes PolyAct(1, b/a, c/a) with
// the consumer's weights scaled by a — one fewer ciphertext scalar multiply
// and one less level on that path.
//-----------------------------------------------------------------------------

inline Graph activation_fold(Graph graph) {
  bool changed = true;
  while (changed) {
    changed = false;
    auto users = consumer_map(graph);
    for (const auto& [id, node] : graph.nodes()) {
      if (node.op != OpKind::PolyAct) continue;
      double a = attr_f64(node, "a");
      if (a == 0.0 || a == 1.0 || a == -1.0) continue;  // already multiply-free
      if (!users.count(id)) continue;
      if (!detail::sole_consumer(graph, users, id, users.at(id)[0])) continue;
      const std::string consumer_id = users.at(id)[0];
      const Node& consumer = graph.node(consumer_id);
      if (consumer.op != OpKind::Convolution && consumer.op != OpKind::Dot) continue;
      if (consumer.inputs[0] != id) continue;  // activation must feed the data side
      if (!detail::is_constant(graph, consumer.inputs[1])) continue;
      double b = attr_f64(node, "b");
      double c = attr_f64(node, "c");

      Tensor scaled = graph.node(consumer.inputs[1]).data.value();
      for (double& w : scaled.values()) w *= a;
      std::string weights_id = detail::fresh_id(graph, consumer_id + "/scaled_weights");
      Node weights;
      weights.id = weights_id;
      weights.op = OpKind::Constant;
      weights.data = std::move(scaled);
      graph.add_node(std::move(weights));
      graph.mutable_node(consumer_id).inputs[1] = weights_id;

      Node& act_node = graph.mutable_node(id);
      act_node.attrs["a"] = 1.0;
      act_node.attrs["b"] = b / a;
      act_node.attrs["c"] = c / a;
      changed = true;
      break;
    }
  }
  detail::remove_dead_nodes(graph);
  return graph;
}

//-----------------------------------------------------------------------------
// bn_fold: inference-time batch norm over a Conv/Dot with constant weights
// and constant statistics collapses into rescaled weights plus a bias add.
//-----------------------------------------------------------------------------

inline Graph bn_fold(Graph graph) {
  bool changed = true;
  while (changed) {
    changed = false;
    auto users = consumer_map(graph);
    for (const auto& [bn_id, bn] : graph.nodes()) {
      if (bn.op != OpKind::BatchNormInference) continue;
      bool stats_const = true;
      for (size_t i = 1; i < 5; ++i)
        if (!detail::is_constant(graph, bn.inputs[i])) stats_const = false;
      if (!stats_const) continue;
      const std::string producer_id = bn.inputs[0];
      const Node& producer = graph.node(producer_id);
      if (producer.op != OpKind::Convolution && producer.op != OpKind::Dot) continue;
      if (!detail::is_constant(graph, producer.inputs[1])) continue;
      if (!detail::sole_consumer(graph, users, producer_id, bn_id)) continue;

      const Tensor& gamma = graph.node(bn.inputs[1]).data.value();
      const Tensor& beta = graph.node(bn.inputs[2]).data.value();
      const Tensor& mean = graph.node(bn.inputs[3]).data.value();
      const Tensor& variance = graph.node(bn.inputs[4]).data.value();
      double eps = attr_f64(bn, "epsilon");
      int64_t channels = gamma.shape().dim(0);

      std::vector<double> gamma_hat(static_cast<size_t>(channels));
      std::vector<double> beta_hat(static_cast<size_t>(channels));
      for (int64_t c = 0; c < channels; ++c) {
        gamma_hat[c] = gamma.at(c) / std::sqrt(variance.at(c) + eps);
        beta_hat[c] = beta.at(c) - gamma_hat[c] * mean.at(c);
      }

      // Scale weights per output channel: filter axis for Convolution,
      // column axis for Dot.
      Tensor scaled = graph.node(producer.inputs[1]).data.value();
      if (producer.op == OpKind::Convolution) {
        int64_t per_filter = scaled.shape().element_count() / scaled.shape().dim(0);
        for (int64_t f = 0; f < scaled.shape().dim(0); ++f)
          for (int64_t i = 0; i < per_filter; ++i) scaled.at(f * per_filter + i) *= gamma_hat[f];
      } else {
        int64_t k = scaled.shape().dim(0), m = scaled.shape().dim(1);
        for (int64_t i = 0; i < k; ++i)
          for (int64_t j = 0; j < m; ++j) scaled.at(i * m + j) *= gamma_hat[j];
      }
      std::string weights_id = detail::fresh_id(graph, producer_id + "/bn_weights");
      Node weights;
      weights.id = weights_id;
      weights.op = OpKind::Constant;
      weights.data = std::move(scaled);
      graph.add_node(std::move(weights));
      graph.mutable_node(producer_id).inputs[1] = weights_id;

      // Bias constant, broadcast across batch (and spatial axes for conv).
      TensorShape out_shape = infer_shapes(graph).at(producer_id);
      std::string bias_id = detail::fresh_id(graph, producer_id + "/bn_bias");
      Node bias;
      bias.id = bias_id;
      bias.op = OpKind::Constant;
      bias.data = Tensor(TensorShape({channels}), beta_hat);
      graph.add_node(std::move(bias));

      std::vector<int64_t> target = out_shape.dims();
      target[0] = -1;
      std::vector<int64_t> axes;
      for (size_t axis = 0; axis < target.size(); ++axis)
        if (axis != 1) axes.push_back(static_cast<int64_t>(axis));
      std::string bcast_id = detail::fresh_id(graph, producer_id + "/bn_bias_bcast");
      Node bcast;
      bcast.id = bcast_id;
      bcast.op = OpKind::Broadcast;
      bcast.inputs = {bias_id};
      bcast.attrs["shape"] = target;
      bcast.attrs["axes"] = axes;
      graph.add_node(std::move(bcast));

      std::string add_id = detail::fresh_id(graph, producer_id + "/bn_add");
      Node add;
      add.id = add_id;
      add.op = OpKind::Add;
      add.inputs = {producer_id, bcast_id};
      graph.add_node(std::move(add));

      detail::replace_uses(graph, bn_id, add_id);
      graph.remove_node(bn_id);
      changed = true;
      break;
    }
  }
  detail::remove_dead_nodes(graph);
  return graph;
}

//-----------------------------------------------------------------------------
// Multiplicative-depth analysis.
//-----------------------------------------------------------------------------

//! Per-node level consumption plus the worst parameter-to-output path.
struct DepthReport {
  int64_t total = 0;
  bool bypass_aware = false;
  std::map<std::string, int64_t> per_node;
  std::vector<std::string> critical_path;  //!< parameter-to-output arg-max chain
};

namespace detail {

//! True when a Constant's entries all lie in {-1, 0, 1}.
inline bool plus_minus_one_constant(const Graph& graph, const std::string& id) {
  const Node& node = graph.node(id);
  if (node.op != OpKind::Constant) return false;
  for (double v : node.data->values())
    if (v != -1.0 && v != 0.0 && v != 1.0) return false;
  return true;
}

}  // namespace detail

/*! \brief Count ciphertext level consumption along every path.
 *
 * Each node is charged the number of rescales its execution performs on the
 * ciphertext path: 1 per ciphertext multiply or weighted reduction (Dot,
 * Convolution, AvgPool, BatchNormInference), 1 for a PolyAct square plus 1
 * more when |a| is not 0 or 1, and 0 for additive / rearrangement ops.
 * Subgraphs no Parameter feeds run on plain values and cost nothing. With
 * `bypass_aware`, multiplies whose constant operand is entirely in {-1,0,1}
 * cost nothing — the executor turns them into identities and negations.
 */
inline DepthReport depth_analysis(const Graph& graph, bool bypass_aware = false) {
  DepthReport report;
  report.bypass_aware = bypass_aware;

  std::vector<std::string> order = toposort(graph);

  // Nodes that can carry ciphertexts: descendants of Parameters.
  std::set<std::string> reachable;
  for (const auto& id : order) {
    const Node& node = graph.node(id);
    if (node.op == OpKind::Parameter) {
      reachable.insert(id);
      continue;
    }
    for (const auto& in : node.inputs)
      if (reachable.count(in)) reachable.insert(id);
  }

  auto cost = [&](const Node& node) -> int64_t {
    if (!reachable.count(node.id)) return 0;
    switch (node.op) {
      case OpKind::Multiply: {
        if (bypass_aware)
          for (const auto& in : node.inputs)
            if (detail::plus_minus_one_constant(graph, in)) return 0;
        return 1;
      }
      case OpKind::Dot:
      case OpKind::Convolution: {
        if (bypass_aware && detail::plus_minus_one_constant(graph, node.inputs[1])) return 0;
        return 1;
      }
      case OpKind::AvgPool:
      case OpKind::BatchNormInference:
        return 1;
      case OpKind::PolyAct: {
        double a = attr_f64(node, "a");
        return 1 + ((a != 0.0 && a != 1.0 && a != -1.0) ? 1 : 0);
      }
      default:
        return 0;
    }
  };

  std::map<std::string, int64_t> depth;
  std::map<std::string, std::string> argmax;
  for (const auto& id : order) {
    const Node& node = graph.node(id);
    int64_t c = cost(node);
    report.per_node[id] = c;
    int64_t best = 0;
    std::string best_in;
    for (const auto& in : node.inputs) {
      if (depth.at(in) > best || (depth.at(in) == best && best_in.empty())) {
        best = depth.at(in);
        best_in = in;
      }
    }
    depth[id] = best + c;
    if (!best_in.empty()) argmax[id] = best_in;
  }

  std::string worst;
  for (const auto& out : graph.outputs()) {
    if (!graph.has_node(out)) fail(errc::validation, "output '" + out + "' is not a node");
    if (worst.empty() || depth.at(out) > depth.at(worst)) worst = out;
  }
  if (!worst.empty()) {
    report.total = depth.at(worst);
    std::vector<std::string> path;
    for (std::string cur = worst;;) {
      path.push_back(cur);
      auto it = argmax.find(cur);
      if (it == argmax.end()) break;
      cur = it->second;
    }
    report.critical_path.assign(path.rbegin(), path.rend());
  }
  return report;
}

inline nlohmann::json depth_report_to_json(const DepthReport& report) {
  nlohmann::json per_node = nlohmann::json::object();
  for (const auto& [id, c] : report.per_node) per_node[id] = c;
  return nlohmann::json{
      {"total", report.total}, {"bypass_aware", report.bypass_aware}, {"per_node", std::move(per_node)}};
}

//-----------------------------------------------------------------------------
// Pipeline driver.
//-----------------------------------------------------------------------------

struct PipelineResult {
  Graph graph;
  std::optional<DepthReport> depth;
};

//! Apply the passes in order; a Depth entry analyzes the graph at that point.
inline PipelineResult run_pipeline(Graph graph, const std::vector<PassId>& passes, bool bypass_aware = false) {
  PipelineResult result{std::move(graph), std::nullopt};
  for (PassId pass : passes) {
    switch (pass) {
      case PassId::ConstantFold: result.graph = constant_fold(std::move(result.graph)); break;
      case PassId::AvgPoolFold: result.graph = avgpool_fold(std::move(result.graph)); break;
      case PassId::ActivationFold: result.graph = activation_fold(std::move(result.graph)); break;
      case PassId::BatchNormFold: result.graph = bn_fold(std::move(result.graph)); break;
      case PassId::Depth: result.depth = depth_analysis(result.graph, bypass_aware); break;
    }
  }
  return result;
}

}  // namespace heg
