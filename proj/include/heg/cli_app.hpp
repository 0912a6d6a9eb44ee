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

/*! \file cli_app.hpp
 *  \brief The hegc command line: keygen, compile, run, and bench.
 *
 *  run_cli() is the whole program as a testable function: it parses the
 *  argument vector, performs the requested action, writes machine-readable
 *  results (JSON) to `out` and human-readable notes to `err`, and returns
 *  the process exit code:
 *
 *    0  success
 *    1  usage or parse problem (bad flags, malformed files, invalid graphs)
 *    2  the graph's multiplicative depth exceeds the modulus chain
 *    3  a capacity limit (slot count) was exceeded
 *    4  file I/O failure
 */

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "heg/bench.hpp"
#include "heg/builders.hpp"
#include "heg/ckks/ckks_backend.hpp"
#include "heg/clear_backend.hpp"
#include "heg/graph_io.hpp"
#include "heg/keyio.hpp"
#include "heg/passes.hpp"
#include "heg/runtime.hpp"

namespace heg {

namespace cli_detail {

struct RingFlags {
  std::int64_t poly_degree = 8192;
  std::vector<int> moduli_bits = {30, 30, 30, 30, 30, 30, 30};
  int scale_bits = 30;
  int security = 128;
};

inline void add_ring_flags(CLI::App* sub, RingFlags& ring) {
  sub->add_option("--poly-degree", ring.poly_degree, "ring dimension N (power of two)")
      ->capture_default_str();
  sub->add_option("--moduli-bits", ring.moduli_bits,
                  "comma-separated bit sizes of the coefficient modulus primes")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--scale-bits", ring.scale_bits, "log2 of the fresh encoding scale")
      ->capture_default_str();
  sub->add_option("--security", ring.security, "security estimate to check: 0, 128, 192 or 256")
      ->capture_default_str();
}

inline ContextParams to_params(const RingFlags& ring, const std::string& scheme) {
  ContextParams p;
  p.scheme = scheme;
  p.poly_degree = ring.poly_degree;
  p.coeff_mod_bits = ring.moduli_bits;
  p.scale_bits = ring.scale_bits;
  p.security = ring.security;
  return p;
}

inline ContextPtr checked_context(const RingFlags& ring, const std::string& scheme, std::ostream& err) {
  ContextParams params = to_params(ring, scheme);
  if (auto warning = security_warning(params)) err << *warning << "\n";
  return make_context(params);
}

inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case errc::depth_exceeded:
      return 2;
    case errc::capacity:
      return 3;
    case errc::io:
      return 4;
    default:
      return 1;
  }
}

//! Backend for a run: a key file wins over ring flags; the plain-debug
//! paradigm gets the exact-arithmetic bookkeeping backend.
inline std::unique_ptr<HEBackend> make_backend(const std::string& keys_path, const RingFlags& ring,
                                               Paradigm paradigm, std::uint64_t seed, std::ostream& err) {
  if (!keys_path.empty()) {
    LoadedKeys loaded = load_keys(keys_path);
    if (loaded.has_keys) return std::make_unique<ckks::CkksBackend>(loaded.context, std::move(loaded.keys));
    check(paradigm == Paradigm::PlainDebug, errc::validation,
          "key file '" + keys_path + "' holds no key material; only the plain-debug paradigm can use it");
    return std::make_unique<ClearBackend>(loaded.context);
  }
  if (paradigm == Paradigm::PlainDebug) {
    return std::make_unique<ClearBackend>(checked_context(ring, "clear", err));
  }
  ContextPtr ctx = checked_context(ring, "ckks-ref", err);
  return std::make_unique<ckks::CkksBackend>(ctx, ckks::generate_keys(*ctx, Rng(seed).fork("keys").next()));
}

}  // namespace cli_detail

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  using cli_detail::RingFlags;

  CLI::App app{"homomorphic graph compiler and executor"};
  app.name("hegc");
  app.require_subcommand(1);

  // ---- keygen ---------------------------------------------------------------
  RingFlags keygen_ring;
  std::uint64_t keygen_seed = 1;
  std::string keygen_out;
  CLI::App* keygen = app.add_subcommand("keygen", "generate keys and print the context summary");
  cli_detail::add_ring_flags(keygen, keygen_ring);
  keygen->add_option("--seed", keygen_seed, "key generation seed")->capture_default_str();
  keygen->add_option("--out", keygen_out, "write the keys to this file");

  // ---- compile ---------------------------------------------------------------
  std::string compile_graph;
  std::string compile_passes = "all,depth";
  std::string compile_out;
  bool compile_bypass_aware = false;
  CLI::App* compile = app.add_subcommand("compile", "rewrite a graph and report its depth");
  compile->add_option("--graph", compile_graph, "graph JSON file")->required();
  compile->add_option("--passes", compile_passes,
                      "comma-separated pass list (constant-fold, avgpool-fold, act-fold, bn-fold, depth; "
                      "'all' expands to every rewrite)")
      ->capture_default_str();
  compile->add_flag("--bypass-aware", compile_bypass_aware,
                    "depth analysis discounts multiplications by +1/-1/0 constants");
  compile->add_option("--out", compile_out, "write the rewritten graph to this file");

  // ---- run -------------------------------------------------------------------
  RingFlags run_ring;
  std::string run_graph;
  std::string run_keys;
  std::string run_passes;
  std::string run_paradigm = "encrypted-data";
  std::int64_t run_batch = 1;
  std::uint64_t run_seed = 1;
  int run_threads = 1;
  bool run_opt_mult = true;
  bool run_opt_add = true;
  CLI::App* run = app.add_subcommand("run", "execute a graph on synthesized inputs and print the profile");
  cli_detail::add_ring_flags(run, run_ring);
  run->add_option("--graph", run_graph, "graph JSON file")->required();
  run->add_option("--keys", run_keys, "key file from keygen --out (overrides the ring flags)");
  run->add_option("--passes", run_passes, "rewrite passes to apply before execution");
  run->add_option("--paradigm", run_paradigm,
                  "encrypted-data, encrypted-model, encrypted-both or plain-debug")
      ->capture_default_str();
  run->add_option("--batch", run_batch, "number of samples packed along the batch axis")
      ->capture_default_str();
  run->add_option("--seed", run_seed, "seed for keys and synthesized inputs")->capture_default_str();
  run->add_option("--threads", run_threads, "worker threads for element-level parallelism")
      ->capture_default_str();
  run->add_flag("--optimized-multiply,!--no-optimized-multiply", run_opt_mult,
                "shortcut plaintext multiplications by +1/-1/0 (default on)");
  run->add_flag("--optimized-addition,!--no-optimized-addition", run_opt_add,
                "skip plaintext additions of zero (default on)");

  // ---- bench -----------------------------------------------------------------
  CLI::App* bench = app.add_subcommand("bench", "timed measurement rows as a JSON array");
  bench->require_subcommand(1);

  RingFlags gemm_ring;
  std::int64_t gemm_n = 8;
  std::vector<double> gemm_fracs = {0.0, 0.5, 0.8};
  int gemm_reps = 5;
  std::uint64_t gemm_seed = 1;
  int gemm_threads = 1;
  std::string gemm_paradigm = "encrypted-data";
  CLI::App* bench_gemm_cmd = bench->add_subcommand("gemm", "matrix product with an exact-one weight mask");
  cli_detail::add_ring_flags(bench_gemm_cmd, gemm_ring);
  bench_gemm_cmd->add_option("--n", gemm_n, "matrix extent")->capture_default_str();
  bench_gemm_cmd->add_option("--ones-frac", gemm_fracs, "comma-separated exact-one densities to sweep")
      ->delimiter(',')
      ->capture_default_str();
  bench_gemm_cmd->add_option("--repetitions", gemm_reps, "executions summed into each row's wall")
      ->capture_default_str();
  bench_gemm_cmd->add_option("--seed", gemm_seed, "seed for weights, inputs and keys")->capture_default_str();
  bench_gemm_cmd->add_option("--threads", gemm_threads, "worker threads")->capture_default_str();
  bench_gemm_cmd->add_option("--paradigm", gemm_paradigm, "execution paradigm")->capture_default_str();

  RingFlags net_ring;
  std::string net_graph;
  std::vector<std::int64_t> net_batches = {1, 4096};
  std::uint64_t net_seed = 1;
  int net_threads = 1;
  std::string net_paradigm = "encrypted-data";
  CLI::App* bench_net_cmd = bench->add_subcommand("network", "a graph executed at several batch extents");
  cli_detail::add_ring_flags(bench_net_cmd, net_ring);
  bench_net_cmd->add_option("--graph", net_graph, "graph JSON file")->required();
  bench_net_cmd->add_option("--batch-list", net_batches, "comma-separated batch extents")
      ->delimiter(',')
      ->capture_default_str();
  bench_net_cmd->add_option("--seed", net_seed, "seed for inputs and keys")->capture_default_str();
  bench_net_cmd->add_option("--threads", net_threads, "worker threads")->capture_default_str();
  bench_net_cmd->add_option("--paradigm", net_paradigm, "execution paradigm")->capture_default_str();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (keygen->parsed()) {
      ContextPtr ctx = cli_detail::checked_context(keygen_ring, "ckks-ref", err);
      if (!keygen_out.empty()) {
        ckks::KeySet keys = ckks::generate_keys(*ctx, Rng(keygen_seed).fork("keys").next());
        save_keys(keygen_out, *ctx, &keys);
        err << "wrote keys to " << keygen_out << "\n";
      }
      out << "slots=" << ctx->slot_count() << ", L=" << ctx->max_level() << "\n";
      return 0;
    }

    if (compile->parsed()) {
      Graph graph = load_graph(compile_graph);
      PipelineResult result =
          run_pipeline(std::move(graph), parse_passes(compile_passes), compile_bypass_aware);
      if (result.depth) out << depth_report_to_json(*result.depth).dump(1) << "\n";
      if (!compile_out.empty()) {
        save_graph(result.graph, compile_out);
        err << "wrote rewritten graph to " << compile_out << "\n";
      }
      return 0;
    }

    if (run->parsed()) {
      Graph graph = load_graph(run_graph);
      if (!run_passes.empty()) graph = run_pipeline(std::move(graph), parse_passes(run_passes)).graph;
      const Paradigm paradigm = parse_paradigm(run_paradigm);
      std::unique_ptr<HEBackend> backend =
          cli_detail::make_backend(run_keys, run_ring, paradigm, run_seed, err);
      ExecOptions opts;
      opts.paradigm = paradigm;
      opts.bypass.optimized_multiply = run_opt_mult;
      opts.bypass.optimized_addition = run_opt_add;
      opts.threads = run_threads;
      opts.seed = run_seed;
      ExecResult result = execute(graph, synthesize_inputs(graph, run_batch, run_seed), *backend, opts);
      for (const auto& [name, tensor] : result.outputs) {
        double peak = 0.0;
        for (double v : tensor.values()) peak = std::max(peak, std::abs(v));
        err << "output " << name << ": shape " << tensor.shape().to_string() << ", max |value| " << peak
            << "\n";
      }
      out << result.profile.to_json().dump(1) << "\n";
      return 0;
    }

    // bench
    if (bench_gemm_cmd->parsed()) {
      BenchOptions opts;
      opts.paradigm = parse_paradigm(gemm_paradigm);
      opts.threads = gemm_threads;
      opts.seed = gemm_seed;
      opts.repetitions = gemm_reps;
      std::unique_ptr<HEBackend> backend =
          cli_detail::make_backend("", gemm_ring, opts.paradigm, gemm_seed, err);
      out << heg::bench_gemm(gemm_n, gemm_fracs, *backend, opts).dump(1) << "\n";
      return 0;
    }
    if (bench_net_cmd->parsed()) {
      Graph graph = load_graph(net_graph);
      BenchOptions opts;
      opts.paradigm = parse_paradigm(net_paradigm);
      opts.threads = net_threads;
      opts.seed = net_seed;
      std::unique_ptr<HEBackend> backend =
          cli_detail::make_backend("", net_ring, opts.paradigm, net_seed, err);
      out << bench_network(graph, net_graph, net_batches, *backend, opts).dump(1) << "\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return cli_detail::exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace heg
