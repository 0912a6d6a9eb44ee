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

/*! \file bench.hpp
 *  \brief Timed executions reported as a JSON array of measurement rows.
 *
 *  Every row follows one shape: {"bench": <name>, "params": {...},
 *  "wall_ms": <double>, "bypass": {"mult": n, "add": n}} with an
 *  "amortized_ms" key added when a row covers more than one packed sample.
 *  Walls are measured around execute() with a steady clock; operation and
 *  shortcut counts are deterministic, so a row's "bypass" object is identical
 *  across repetitions and thread counts.
 */

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heg/builders.hpp"
#include "heg/runtime.hpp"

namespace heg {

struct BenchOptions {
  Paradigm paradigm = Paradigm::EncryptedData;
  BypassConfig bypass;
  int threads = 1;
  std::uint64_t seed = 1;
  int repetitions = 5;  //!< how many executions a gemm row's wall sums over
};

namespace detail {

//! Run the graph once and return {elapsed wall ms, result}.
inline std::pair<double, ExecResult> timed_execute(const Graph& graph,
                                                   const std::map<std::string, Tensor>& inputs,
                                                   HEBackend& backend, const ExecOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  ExecResult result = execute(graph, inputs, backend, opts);
  const auto stop = std::chrono::steady_clock::now();
  const double ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return {ms, std::move(result)};
}

inline nlohmann::json bypass_to_json(const BypassCounts& counts) {
  return nlohmann::json{{"mult", counts.mult}, {"add", counts.add}};
}

}  // namespace detail

/*! \brief Matrix-product rows over a list of exact-one mask densities.
 *
 * One row per fraction; the wall sums `repetitions` executions of the same
 * n-by-n product so short runs still time above clock granularity. Rows with
 * more ones multiply less, so walls shrink as the fraction grows.
 */
inline nlohmann::json bench_gemm(std::int64_t n, const std::vector<double>& ones_fracs,
                                 HEBackend& backend, const BenchOptions& opts) {
  nlohmann::json rows = nlohmann::json::array();
  for (double frac : ones_fracs) {
    Graph graph = make_gemm(n, frac, opts.seed);
    const std::map<std::string, Tensor> inputs = synthesize_inputs(graph, 1, opts.seed);
    ExecOptions exec;
    exec.paradigm = opts.paradigm;
    exec.bypass = opts.bypass;
    exec.threads = opts.threads;
    exec.seed = opts.seed;
    double wall = 0.0;
    BypassCounts counts;
    for (int rep = 0; rep < opts.repetitions; ++rep) {
      auto [ms, result] = detail::timed_execute(graph, inputs, backend, exec);
      wall += ms;
      counts = result.profile.bypass;
    }
    rows.push_back(nlohmann::json{
        {"bench", "gemm"},
        {"params", {{"n", n}, {"ones_frac", frac}, {"repetitions", opts.repetitions}}},
        {"wall_ms", wall},
        {"bypass", detail::bypass_to_json(counts)}});
  }
  return rows;
}

/*! \brief One timed execution of a network per batch extent.
 *
 * Slot packing makes the homomorphic work independent of the batch, so
 * "amortized_ms" (wall divided by batch) is the per-sample cost.
 */
inline nlohmann::json bench_network(const Graph& graph, const std::string& name,
                                    const std::vector<std::int64_t>& batches, HEBackend& backend,
                                    const BenchOptions& opts) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::int64_t batch : batches) {
    const std::map<std::string, Tensor> inputs = synthesize_inputs(graph, batch, opts.seed);
    ExecOptions exec;
    exec.paradigm = opts.paradigm;
    exec.bypass = opts.bypass;
    exec.threads = opts.threads;
    exec.seed = opts.seed;
    auto [ms, result] = detail::timed_execute(graph, inputs, backend, exec);
    nlohmann::json row{{"bench", "network"},
                       {"params", {{"graph", name}, {"batch", batch}}},
                       {"wall_ms", ms},
                       {"bypass", detail::bypass_to_json(result.profile.bypass)}};
    if (batch > 1) row["amortized_ms"] = ms / static_cast<double>(batch);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace heg
