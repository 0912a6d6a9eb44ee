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

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "heg/graph.hpp"

namespace heg {

//-----------------------------------------------------------------------------
// Graph file format, version 1:
//
//   {
//     "format_version": 1,
//     "name": "...",
//     "nodes": [ {"id": ..., "op": ..., "inputs": [...],
//                 "attrs": {...}, "data": {"shape": [...], "values": [...]}} ],
//     "outputs": [ ... ]
//   }
//
// Tensor files carry {"shape": [...], "values": [...]} with row-major values.
// Unknown keys are rejected at either level so that typos fail loudly.
//-----------------------------------------------------------------------------

namespace detail {

inline nlohmann::json attr_to_json(const AttrValue& value) {
  nlohmann::json j;
  std::visit([&j](const auto& v) { j = v; }, value);
  return j;
}

inline AttrValue attr_from_json(const std::string& node_id, const std::string& key, const nlohmann::json& j) {
  if (j.is_number_integer() || j.is_number_unsigned()) return j.get<int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    bool any_float = false;
    for (const auto& e : j) {
      if (e.is_number_float())
        any_float = true;
      else if (!e.is_number_integer() && !e.is_number_unsigned())
        fail(errc::parse, "node '" + node_id + "' attr '" + key + "' has a non-numeric array entry");
    }
    if (any_float) return j.get<std::vector<double>>();
    return j.get<std::vector<int64_t>>();
  }
  fail(errc::parse, "node '" + node_id + "' attr '" + key + "' has an unsupported JSON type");
}

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail(errc::parse, where + " has unknown key '" + it.key() + "'");
}

}  // namespace detail

inline nlohmann::json tensor_to_json(const Tensor& t) {
  return nlohmann::json{{"shape", t.shape().dims()}, {"values", t.values()}};
}

inline Tensor tensor_from_json(const nlohmann::json& j, const std::string& where = "tensor") {
  if (!j.is_object()) fail(errc::parse, where + " must be a JSON object");
  detail::reject_unknown_keys(j, {"shape", "values"}, where);
  if (!j.contains("shape") || !j.contains("values")) fail(errc::parse, where + " needs 'shape' and 'values'");
  TensorShape shape(j.at("shape").get<std::vector<int64_t>>());
  std::vector<double> values = j.at("values").get<std::vector<double>>();
  if (static_cast<int64_t>(values.size()) != shape.element_count())
    fail(errc::parse, where + " value count " + std::to_string(values.size()) + " does not match shape " +
                          shape.to_string());
  return Tensor(shape, std::move(values));
}

inline nlohmann::json graph_to_json(const Graph& graph) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& [id, node] : graph.nodes()) {
    nlohmann::json n{{"id", id}, {"op", op_name(node.op)}, {"inputs", node.inputs}};
    if (!node.attrs.empty()) {
      nlohmann::json attrs = nlohmann::json::object();
      for (const auto& [key, value] : node.attrs) attrs[key] = detail::attr_to_json(value);
      n["attrs"] = attrs;
    }
    if (node.data) n["data"] = tensor_to_json(*node.data);
    nodes.push_back(std::move(n));
  }
  return nlohmann::json{{"format_version", 1},
                        {"name", graph.name()},
                        {"nodes", std::move(nodes)},
                        {"outputs", graph.outputs()}};
}

inline Graph graph_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(errc::parse, "graph file must be a JSON object");
  detail::reject_unknown_keys(j, {"format_version", "name", "nodes", "outputs"}, "graph");
  if (!j.contains("format_version") || !j.at("format_version").is_number_integer() ||
      j.at("format_version").get<int64_t>() != 1)
    fail(errc::parse, "graph requires \"format_version\": 1");
  if (!j.contains("name") || !j.at("name").is_string()) fail(errc::parse, "graph requires a string 'name'");
  if (!j.contains("nodes") || !j.at("nodes").is_array()) fail(errc::parse, "graph requires a 'nodes' array");
  if (!j.contains("outputs") || !j.at("outputs").is_array()) fail(errc::parse, "graph requires an 'outputs' array");

  Graph graph(j.at("name").get<std::string>());
  for (const auto& n : j.at("nodes")) {
    if (!n.is_object()) fail(errc::parse, "graph node entries must be objects");
    detail::reject_unknown_keys(n, {"id", "op", "inputs", "attrs", "data"}, "graph node");
    if (!n.contains("id") || !n.at("id").is_string()) fail(errc::parse, "graph node needs a string 'id'");
    Node node;
    node.id = n.at("id").get<std::string>();
    if (!n.contains("op") || !n.at("op").is_string())
      fail(errc::parse, "node '" + node.id + "' needs a string 'op'");
    std::string op = n.at("op").get<std::string>();
    auto kind = op_from_name(op);
    if (!kind) fail(errc::parse, "node '" + node.id + "' has unknown op '" + op + "'");
    node.op = *kind;
    if (n.contains("inputs")) node.inputs = n.at("inputs").get<std::vector<std::string>>();
    if (n.contains("attrs")) {
      if (!n.at("attrs").is_object()) fail(errc::parse, "node '" + node.id + "' attrs must be an object");
      for (auto it = n.at("attrs").begin(); it != n.at("attrs").end(); ++it)
        node.attrs.emplace(it.key(), detail::attr_from_json(node.id, it.key(), it.value()));
    }
    if (n.contains("data")) node.data = tensor_from_json(n.at("data"), "node '" + node.id + "' data");
    try {
      graph.add_node(std::move(node));
    } catch (const Error& e) {
      fail(errc::parse, e.what());
    }
  }
  graph.set_outputs(j.at("outputs").get<std::vector<std::string>>());
  return graph;
}

//-----------------------------------------------------------------------------
// File helpers.
//-----------------------------------------------------------------------------

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io, "cannot open '" + path + "' for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(errc::parse, "cannot parse '" + path + "': " + e.what());
  }
}

inline void save_json_file(const std::string& path, const nlohmann::json& j, int indent = 1) {
  std::ofstream out(path);
  if (!out) fail(errc::io, "cannot open '" + path + "' for writing");
  out << j.dump(indent) << "\n";
  if (!out) fail(errc::io, "failed writing '" + path + "'");
}

inline Graph load_graph(const std::string& path) { return graph_from_json(load_json_file(path)); }
inline void save_graph(const Graph& graph, const std::string& path) { save_json_file(path, graph_to_json(graph)); }
inline Tensor load_tensor(const std::string& path) { return tensor_from_json(load_json_file(path), path); }
inline void save_tensor(const Tensor& tensor, const std::string& path) { save_json_file(path, tensor_to_json(tensor)); }

}  // namespace heg
