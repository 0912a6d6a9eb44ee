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

#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "heg/tensor.hpp"

namespace heg {

//! The fixed operation vocabulary of the IR.
enum class OpKind {
  Parameter,
  Constant,
  Add,
  Subtract,
  Multiply,
  Negate,
  Dot,
  Convolution,
  AvgPool,
  ScaledMeanPool,
  BatchNormInference,
  Broadcast,
  Concat,
  Pad,
  Reshape,
  Reverse,
  Slice,
  Sum,
  PolyAct
};

inline const std::vector<std::pair<OpKind, const char*>>& op_names() {
  static const std::vector<std::pair<OpKind, const char*>> table = {
      {OpKind::Parameter, "Parameter"},
      {OpKind::Constant, "Constant"},
      {OpKind::Add, "Add"},
      {OpKind::Subtract, "Subtract"},
      {OpKind::Multiply, "Multiply"},
      {OpKind::Negate, "Negate"},
      {OpKind::Dot, "Dot"},
      {OpKind::Convolution, "Convolution"},
      {OpKind::AvgPool, "AvgPool"},
      {OpKind::ScaledMeanPool, "ScaledMeanPool"},
      {OpKind::BatchNormInference, "BatchNormInference"},
      {OpKind::Broadcast, "Broadcast"},
      {OpKind::Concat, "Concat"},
      {OpKind::Pad, "Pad"},
      {OpKind::Reshape, "Reshape"},
      {OpKind::Reverse, "Reverse"},
      {OpKind::Slice, "Slice"},
      {OpKind::Sum, "Sum"},
      {OpKind::PolyAct, "PolyAct"}};
  return table;
}

inline std::string op_name(OpKind op) {
  for (const auto& [k, n] : op_names())
    if (k == op) return n;
  fail(errc::internal, "unnamed op kind");
}

inline std::optional<OpKind> op_from_name(const std::string& name) {
  for (const auto& [k, n] : op_names())
    if (name == n) return k;
  return std::nullopt;
}

//! Typed attribute value.
using AttrValue = std::variant<int64_t, double, std::vector<int64_t>, std::vector<double>, std::string>;
using AttrMap = std::map<std::string, AttrValue>;

//! One graph node: an op applied to named inputs.
struct Node {
  std::string id;
  OpKind op = OpKind::Constant;
  std::vector<std::string> inputs;
  AttrMap attrs;
  std::optional<Tensor> data;  //!< present exactly for Constant nodes

  bool operator==(const Node& other) const {
    return id == other.id && op == other.op && inputs == other.inputs && attrs == other.attrs && data == other.data;
  }
};

//! Immutable-by-convention computation graph. Node ids are unique; iteration
//! over `nodes()` is in lexicographic id order, which keeps every traversal in
//! the library deterministic.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::string name) : m_name(std::move(name)) {}

  const std::string& name() const { return m_name; }
  void set_name(std::string name) { m_name = std::move(name); }

  void add_node(Node node) {
    if (node.id.empty()) fail(errc::validation, "node id must be non-empty");
    auto [it, inserted] = m_nodes.emplace(node.id, std::move(node));
    if (!inserted) fail(errc::validation, "duplicate node id: " + it->first);
  }

  bool has_node(const std::string& id) const { return m_nodes.count(id) != 0; }

  const Node& node(const std::string& id) const {
    auto it = m_nodes.find(id);
    if (it == m_nodes.end()) fail(errc::validation, "unknown node id: " + id);
    return it->second;
  }

  Node& mutable_node(const std::string& id) {
    auto it = m_nodes.find(id);
    if (it == m_nodes.end()) fail(errc::validation, "unknown node id: " + id);
    return it->second;
  }

  void remove_node(const std::string& id) { m_nodes.erase(id); }

  const std::map<std::string, Node>& nodes() const { return m_nodes; }

  const std::vector<std::string>& outputs() const { return m_outputs; }
  void set_outputs(std::vector<std::string> outputs) { m_outputs = std::move(outputs); }

  bool operator==(const Graph& other) const {
    return m_name == other.m_name && m_outputs == other.m_outputs && m_nodes == other.m_nodes;
  }

 private:
  std::string m_name;
  std::map<std::string, Node> m_nodes;
  std::vector<std::string> m_outputs;
};

//! One validation finding, anchored to a node where possible.
struct Diagnostic {
  std::string node_id;  //!< empty for graph-level findings
  std::string message;
};

//-----------------------------------------------------------------------------
// Attribute access helpers (throw errc::validation with the node id on miss).
//-----------------------------------------------------------------------------

namespace detail {

inline const AttrValue& require_attr(const Node& node, const std::string& key) {
  auto it = node.attrs.find(key);
  if (it == node.attrs.end())
    fail(errc::validation, "node '" + node.id + "' (" + op_name(node.op) + ") missing attr '" + key + "'");
  return it->second;
}

template <typename T>
inline const T& attr_as(const Node& node, const std::string& key) {
  const AttrValue& v = require_attr(node, key);
  const T* p = std::get_if<T>(&v);
  if (!p) fail(errc::validation, "node '" + node.id + "' attr '" + key + "' has the wrong type");
  return *p;
}

}  // namespace detail

inline int64_t attr_i64(const Node& node, const std::string& key) { return detail::attr_as<int64_t>(node, key); }
inline double attr_f64(const Node& node, const std::string& key) {
  // Accept integer-valued JSON for double attrs.
  const AttrValue& v = detail::require_attr(node, key);
  if (const double* d = std::get_if<double>(&v)) return *d;
  if (const int64_t* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
  fail(errc::validation, "node '" + node.id + "' attr '" + key + "' is not numeric");
}
inline const std::vector<int64_t>& attr_ints(const Node& node, const std::string& key) {
  return detail::attr_as<std::vector<int64_t>>(node, key);
}

//-----------------------------------------------------------------------------
// Topological order.
//-----------------------------------------------------------------------------

/*! \brief Kahn topological sort with lexicographic tie-breaking.
 *
 * Throws errc::validation naming an offending node when the graph has a cycle
 * or dangling input references.
 */
inline std::vector<std::string> toposort(const Graph& graph) {
  std::map<std::string, int> pending;  // remaining un-ordered inputs
  std::map<std::string, std::vector<std::string>> consumers;
  for (const auto& [id, node] : graph.nodes()) {
    pending[id] = static_cast<int>(node.inputs.size());
    for (const auto& in : node.inputs) {
      if (!graph.has_node(in))
        fail(errc::validation, "node '" + id + "' references unknown input '" + in + "'");
      consumers[in].push_back(id);
    }
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, count] : pending)
    if (count == 0) ready.push(id);

  std::vector<std::string> order;
  order.reserve(pending.size());
  while (!ready.empty()) {
    std::string id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& next : consumers[id])
      if (--pending[next] == 0) ready.push(next);
  }
  if (order.size() != graph.nodes().size()) {
    for (const auto& [id, count] : pending)
      if (count > 0) fail(errc::validation, "graph contains a cycle through node '" + id + "'");
    fail(errc::internal, "toposort lost nodes");
  }
  return order;
}

//! Map from node id to the ids of nodes consuming it (sorted, deduplicated).
inline std::map<std::string, std::vector<std::string>> consumer_map(const Graph& graph) {
  std::map<std::string, std::vector<std::string>> users;
  for (const auto& [id, node] : graph.nodes())
    for (const auto& in : node.inputs) users[in].push_back(id);
  return users;
}

//-----------------------------------------------------------------------------
// Shape inference.
//-----------------------------------------------------------------------------

namespace detail {

//! Allowed attribute keys per op; anything else is rejected.
inline const std::set<std::string>& allowed_attrs(OpKind op) {
  static const std::map<OpKind, std::set<std::string>> table = {
      {OpKind::Parameter, {"shape"}},
      {OpKind::Constant, {}},
      {OpKind::Add, {}},
      {OpKind::Subtract, {}},
      {OpKind::Multiply, {}},
      {OpKind::Negate, {}},
      {OpKind::Dot, {}},
      {OpKind::Convolution, {"stride"}},
      {OpKind::AvgPool, {"window", "stride"}},
      {OpKind::ScaledMeanPool, {"window", "stride"}},
      {OpKind::BatchNormInference, {"epsilon"}},
      {OpKind::Broadcast, {"shape", "axes"}},
      {OpKind::Concat, {"axis"}},
      {OpKind::Pad, {"pad_below", "pad_above", "value"}},
      {OpKind::Reshape, {"shape"}},
      {OpKind::Reverse, {"axes"}},
      {OpKind::Slice, {"begin", "end"}},
      {OpKind::Sum, {"axes"}},
      {OpKind::PolyAct, {"a", "b", "c"}}};
  return table.at(op);
}

inline void check_arity(const Node& node, size_t want) {
  if (node.inputs.size() != want)
    fail(errc::validation, "node '" + node.id + "' (" + op_name(node.op) + ") expects " + std::to_string(want) +
                               " inputs, has " + std::to_string(node.inputs.size()));
}

inline TensorShape pool_like_shape(const Node& node, const TensorShape& in, int64_t wh, int64_t ww, int64_t stride) {
  if (in.rank() != 4)
    fail(errc::validation, "node '" + node.id + "' expects a rank-4 (batch,channel,H,W) input, got " + in.to_string());
  if (stride < 1) fail(errc::validation, "node '" + node.id + "' stride must be >= 1");
  int64_t h = in.dim(2), w = in.dim(3);
  if (wh < 1 || ww < 1 || wh > h || ww > w)
    fail(errc::validation, "node '" + node.id + "' window " + std::to_string(wh) + "x" + std::to_string(ww) +
                               " does not fit input " + in.to_string());
  return TensorShape({in.dim(0), in.dim(1), (h - wh) / stride + 1, (w - ww) / stride + 1});
}

}  // namespace detail

/*! \brief Infer the output shape of one node from its input shapes.
 *
 * `batch_extent` is the runtime batch used to resolve the -1 placeholder in
 * Broadcast targets; pass 0 outside an executor context to keep nominal sizes.
 */
inline TensorShape infer_node_shape(const Node& node, const std::vector<TensorShape>& in,
                                    int64_t batch_extent = 0) {
  using detail::check_arity;
  for (const auto& [key, value] : node.attrs) {
    (void)value;
    if (!detail::allowed_attrs(node.op).count(key))
      fail(errc::validation, "node '" + node.id + "' has unknown attr '" + key + "'");
  }
  if (node.data.has_value() && node.op != OpKind::Constant)
    fail(errc::validation, "node '" + node.id + "' carries data but is not a Constant");

  switch (node.op) {
    case OpKind::Parameter: {
      check_arity(node, 0);
      return TensorShape(attr_ints(node, "shape"));
    }
    case OpKind::Constant: {
      check_arity(node, 0);
      if (!node.data) fail(errc::validation, "Constant node '" + node.id + "' has no data");
      return node.data->shape();
    }
    case OpKind::Add:
    case OpKind::Subtract:
    case OpKind::Multiply: {
      check_arity(node, 2);
      if (in[0] != in[1])
        fail(errc::validation, "node '" + node.id + "' operand shapes differ: " + in[0].to_string() + " vs " +
                                   in[1].to_string() + " (insert an explicit Broadcast)");
      return in[0];
    }
    case OpKind::Negate: {
      check_arity(node, 1);
      return in[0];
    }
    case OpKind::Dot: {
      check_arity(node, 2);
      const TensorShape& a = in[0];
      const TensorShape& b = in[1];
      if (b.rank() != 2)
        fail(errc::validation, "node '" + node.id + "' Dot right operand must be rank 2, got " + b.to_string());
      if (a.rank() == 2) {
        if (a.dim(1) != b.dim(0))
          fail(errc::validation, "node '" + node.id + "' Dot inner extents differ: " + a.to_string() + " vs " +
                                     b.to_string());
        return TensorShape({a.dim(0), b.dim(1)});
      }
      if (a.rank() == 3) {
        if (a.dim(2) != b.dim(0))
          fail(errc::validation, "node '" + node.id + "' Dot inner extents differ: " + a.to_string() + " vs " +
                                     b.to_string());
        return TensorShape({a.dim(0), a.dim(1), b.dim(1)});
      }
      fail(errc::validation, "node '" + node.id + "' Dot left operand must be rank 2 or 3, got " + a.to_string());
    }
    case OpKind::Convolution: {
      check_arity(node, 2);
      const TensorShape& x = in[0];
      const TensorShape& w = in[1];
      if (x.rank() != 4 || w.rank() != 4)
        fail(errc::validation, "node '" + node.id + "' Convolution expects rank-4 data and weights, got " +
                                   x.to_string() + " and " + w.to_string());
      if (x.dim(1) != w.dim(1))
        fail(errc::validation, "node '" + node.id + "' Convolution channel mismatch: " + x.to_string() + " vs " +
                                   w.to_string());
      int64_t stride = attr_i64(node, "stride");
      TensorShape spatial = detail::pool_like_shape(node, x, w.dim(2), w.dim(3), stride);
      return TensorShape({x.dim(0), w.dim(0), spatial.dim(2), spatial.dim(3)});
    }
    case OpKind::AvgPool:
    case OpKind::ScaledMeanPool: {
      check_arity(node, 1);
      const auto& window = attr_ints(node, "window");
      if (window.size() != 2) fail(errc::validation, "node '" + node.id + "' window must have 2 extents");
      return detail::pool_like_shape(node, in[0], window[0], window[1], attr_i64(node, "stride"));
    }
    case OpKind::BatchNormInference: {
      check_arity(node, 5);
      const TensorShape& x = in[0];
      if (x.rank() < 2)
        fail(errc::validation, "node '" + node.id + "' batch-norm input needs a channel axis, got " + x.to_string());
      attr_f64(node, "epsilon");
      int64_t channels = x.dim(1);
      for (size_t i = 1; i < 5; ++i) {
        if (in[i].rank() != 1 || in[i].dim(0) != channels)
          fail(errc::validation, "node '" + node.id + "' statistic input " + std::to_string(i) + " must have shape (" +
                                     std::to_string(channels) + "), got " + in[i].to_string());
      }
      return x;
    }
    case OpKind::Broadcast: {
      check_arity(node, 1);
      std::vector<int64_t> target = attr_ints(node, "shape");
      for (auto& d : target) {
        if (d == -1) {
          if (batch_extent <= 0)
            fail(errc::validation,
                 "node '" + node.id + "' broadcast target uses the batch placeholder outside a batched context");
          d = batch_extent;
        }
      }
      TensorShape out(target);
      const auto& axes = attr_ints(node, "axes");
      std::set<int64_t> inserted(axes.begin(), axes.end());
      if (inserted.size() != axes.size())
        fail(errc::validation, "node '" + node.id + "' broadcast axes repeat");
      std::vector<int64_t> kept;
      for (size_t axis = 0; axis < out.rank(); ++axis)
        if (!inserted.count(static_cast<int64_t>(axis))) kept.push_back(out.dim(axis));
      for (int64_t axis : axes)
        if (axis < 0 || axis >= static_cast<int64_t>(out.rank()))
          fail(errc::validation, "node '" + node.id + "' broadcast axis out of range");
      if (kept != in[0].dims())
        fail(errc::validation, "node '" + node.id + "' broadcast of " + in[0].to_string() + " to " + out.to_string() +
                                   " does not preserve the kept axes");
      return out;
    }
    case OpKind::Concat: {
      if (node.inputs.empty()) fail(errc::validation, "node '" + node.id + "' Concat needs at least one input");
      int64_t axis = attr_i64(node, "axis");
      const TensorShape& first = in[0];
      if (axis < 0 || axis >= static_cast<int64_t>(first.rank()))
        fail(errc::validation, "node '" + node.id + "' concat axis out of range");
      int64_t total = 0;
      for (const auto& s : in) {
        if (s.rank() != first.rank())
          fail(errc::validation, "node '" + node.id + "' concat rank mismatch");
        for (size_t a = 0; a < s.rank(); ++a)
          if (static_cast<int64_t>(a) != axis && s.dim(a) != first.dim(a))
            fail(errc::validation, "node '" + node.id + "' concat extent mismatch off the concat axis");
        total += s.dim(static_cast<size_t>(axis));
      }
      std::vector<int64_t> dims = first.dims();
      dims[static_cast<size_t>(axis)] = total;
      return TensorShape(dims);
    }
    case OpKind::Pad: {
      check_arity(node, 1);
      const auto& below = attr_ints(node, "pad_below");
      const auto& above = attr_ints(node, "pad_above");
      if (below.size() != in[0].rank() || above.size() != in[0].rank())
        fail(errc::validation, "node '" + node.id + "' pad vectors must have one entry per axis");
      std::vector<int64_t> dims = in[0].dims();
      for (size_t a = 0; a < dims.size(); ++a) {
        if (below[a] < 0 || above[a] < 0) fail(errc::validation, "node '" + node.id + "' negative padding");
        dims[a] += below[a] + above[a];
      }
      return TensorShape(dims);
    }
    case OpKind::Reshape: {
      check_arity(node, 1);
      std::vector<int64_t> target = attr_ints(node, "shape");
      int64_t known = 1;
      int wildcard = -1;
      for (size_t a = 0; a < target.size(); ++a) {
        if (target[a] == -1) {
          if (wildcard >= 0) fail(errc::validation, "node '" + node.id + "' reshape allows a single -1");
          wildcard = static_cast<int>(a);
        } else {
          if (target[a] < 1) fail(errc::validation, "node '" + node.id + "' reshape extent must be >= 1 or -1");
          known *= target[a];
        }
      }
      int64_t total = in[0].element_count();
      if (wildcard >= 0) {
        if (total % known != 0)
          fail(errc::validation, "node '" + node.id + "' reshape cannot infer the -1 extent");
        target[static_cast<size_t>(wildcard)] = total / known;
      } else if (known != total) {
        fail(errc::validation, "node '" + node.id + "' reshape element count mismatch: " + in[0].to_string() +
                                   " has " + std::to_string(total) + " elements");
      }
      return TensorShape(target);
    }
    case OpKind::Reverse: {
      check_arity(node, 1);
      for (int64_t axis : attr_ints(node, "axes"))
        if (axis < 0 || axis >= static_cast<int64_t>(in[0].rank()))
          fail(errc::validation, "node '" + node.id + "' reverse axis out of range");
      return in[0];
    }
    case OpKind::Slice: {
      check_arity(node, 1);
      const auto& begin = attr_ints(node, "begin");
      const auto& end = attr_ints(node, "end");
      if (begin.size() != in[0].rank() || end.size() != in[0].rank())
        fail(errc::validation, "node '" + node.id + "' slice bounds must have one entry per axis");
      std::vector<int64_t> dims(in[0].rank());
      for (size_t a = 0; a < dims.size(); ++a) {
        if (begin[a] < 0 || end[a] > in[0].dim(a) || begin[a] >= end[a])
          fail(errc::validation, "node '" + node.id + "' slice bounds invalid on axis " + std::to_string(a));
        dims[a] = end[a] - begin[a];
      }
      return TensorShape(dims);
    }
    case OpKind::Sum: {
      check_arity(node, 1);
      const auto& axes = attr_ints(node, "axes");
      if (axes.empty()) fail(errc::validation, "node '" + node.id + "' sum needs at least one axis");
      std::set<int64_t> reduce(axes.begin(), axes.end());
      if (reduce.size() != axes.size()) fail(errc::validation, "node '" + node.id + "' sum axes repeat");
      for (int64_t axis : reduce) {
        if (axis < 0 || axis >= static_cast<int64_t>(in[0].rank()))
          fail(errc::validation, "node '" + node.id + "' sum axis out of range");
        if (axis == 0)
          fail(errc::validation, "node '" + node.id + "' sum over the batch axis is not supported");
      }
      std::vector<int64_t> dims;
      for (size_t a = 0; a < in[0].rank(); ++a)
        if (!reduce.count(static_cast<int64_t>(a))) dims.push_back(in[0].dim(a));
      return TensorShape(dims);
    }
    case OpKind::PolyAct: {
      check_arity(node, 1);
      attr_f64(node, "a");
      attr_f64(node, "b");
      attr_f64(node, "c");
      return in[0];
    }
  }
  fail(errc::internal, "unhandled op kind in shape inference");
}

/*! \brief Infer shapes for every node, in topological order.
 *
 * With `batch_override > 0` the leading extent of every Parameter is replaced
 * by the override and Broadcast batch placeholders resolve to it; otherwise
 * the graph's nominal extents are used.
 */
//! Batch extent used to resolve placeholders: the override when given, else
//! the leading extent of the lexicographically first Parameter (0 if none).
inline int64_t graph_batch_extent(const Graph& graph, int64_t batch_override = 0) {
  if (batch_override > 0) return batch_override;
  for (const auto& [id, node] : graph.nodes()) {
    (void)id;
    if (node.op != OpKind::Parameter) continue;
    auto it = node.attrs.find("shape");
    if (it == node.attrs.end()) continue;
    const auto* dims = std::get_if<std::vector<int64_t>>(&it->second);
    if (dims && !dims->empty()) return (*dims)[0];
  }
  return 0;
}

inline std::map<std::string, TensorShape> infer_shapes(const Graph& graph, int64_t batch_override = 0) {
  std::map<std::string, TensorShape> shapes;
  int64_t batch_extent = graph_batch_extent(graph, batch_override);
  for (const auto& id : toposort(graph)) {
    const Node& node = graph.node(id);
    std::vector<TensorShape> in;
    in.reserve(node.inputs.size());
    for (const auto& input : node.inputs) in.push_back(shapes.at(input));
    if (node.op == OpKind::Parameter) {
      if (node.data.has_value()) fail(errc::validation, "node '" + id + "' carries data but is not a Constant");
      std::vector<int64_t> dims = attr_ints(node, "shape");
      if (dims.empty()) fail(errc::validation, "Parameter '" + id + "' must have rank >= 1 (leading batch axis)");
      if (batch_override > 0) dims[0] = batch_override;
      shapes.emplace(id, TensorShape(dims));
      continue;
    }
    shapes.emplace(id, infer_node_shape(node, in, batch_extent));
  }
  return shapes;
}

/*! \brief Collect all structural problems of a graph without throwing.
 *
 * Checks reference integrity, acyclicity, attribute completeness, the
 * data-iff-Constant rule, output registration, and shape consistency. An
 * empty result means `infer_shapes` will succeed.
 */
inline std::vector<Diagnostic> validate(const Graph& graph) {
  std::vector<Diagnostic> diags;
  // Reference integrity and cycles first; shape inference needs a valid order.
  for (const auto& [id, node] : graph.nodes())
    for (const auto& in : node.inputs)
      if (!graph.has_node(in)) diags.push_back({id, "references unknown input '" + in + "'"});
  if (graph.outputs().empty()) diags.push_back({"", "graph declares no outputs"});
  for (const auto& out : graph.outputs())
    if (!graph.has_node(out)) diags.push_back({"", "output '" + out + "' is not a node"});
  if (!diags.empty()) return diags;

  std::vector<std::string> order;
  try {
    order = toposort(graph);
  } catch (const Error& e) {
    diags.push_back({"", e.what()});
    return diags;
  }

  std::map<std::string, TensorShape> shapes;
  std::set<std::string> broken;
  int64_t batch_extent = graph_batch_extent(graph);
  for (const auto& id : order) {
    const Node& node = graph.node(id);
    bool inputs_ok = true;
    std::vector<TensorShape> in;
    for (const auto& input : node.inputs) {
      if (broken.count(input)) {
        inputs_ok = false;
        break;
      }
      in.push_back(shapes.at(input));
    }
    if (!inputs_ok) {
      broken.insert(id);
      continue;
    }
    try {
      if (node.op == OpKind::Parameter) {
        if (node.data.has_value()) fail(errc::validation, "node '" + id + "' carries data but is not a Constant");
        std::vector<int64_t> dims = attr_ints(node, "shape");
        if (dims.empty()) fail(errc::validation, "Parameter '" + id + "' must have rank >= 1");
        shapes.emplace(id, TensorShape(dims));
      } else {
        shapes.emplace(id, infer_node_shape(node, in, batch_extent));
      }
    } catch (const Error& e) {
      diags.push_back({id, e.what()});
      broken.insert(id);
    }
  }
  return diags;
}

}  // namespace heg
