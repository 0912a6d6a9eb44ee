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

// End-to-end walkthrough: build a convolution + batch-norm graph, fold the
// batch norm away, and run both versions homomorphically. The unfolded graph
// needs two rescale levels; the folded one fits in a single level, so it runs
// on a shorter (cheaper) modulus chain.

#include <iostream>

#include "heg/builders.hpp"
#include "heg/ckks/ckks_backend.hpp"
#include "heg/passes.hpp"
#include "heg/runtime.hpp"

int main() {
  using namespace heg;

  Graph graph = make_conv_bn(/*seed=*/1);
  std::cout << "multiplicative depth as written: " << depth_analysis(graph).total << "\n";

  Graph folded = bn_fold(graph);
  std::cout << "after folding batch norm:        " << depth_analysis(folded).total << "\n\n";

  // A two-prime chain offers exactly one rescale level.
  ContextParams params;
  params.poly_degree = 2048;
  params.coeff_mod_bits = {30, 30};
  params.security = 0;  // demonstration ring, far below production size
  ContextPtr ctx = make_context(params);
  ckks::CkksBackend backend(ctx, ckks::generate_keys(*ctx, 7));

  auto inputs = synthesize_inputs(graph, /*batch=*/4, /*seed=*/42);

  try {
    execute(graph, inputs, backend);
  } catch (const Error& e) {
    std::cout << "unfolded graph is rejected on this chain:\n  " << e.what() << "\n\n";
  }

  ExecResult result = execute(folded, inputs, backend);
  const Tensor& bn = result.outputs.begin()->second;
  std::cout << "folded graph runs; output shape " << bn.shape().to_string() << ", first values:";
  for (size_t i = 0; i < 4 && i < bn.values().size(); ++i) std::cout << " " << bn.values()[i];
  std::cout << "\n\nexecution profile:\n" << result.profile.to_json().dump(1) << "\n";
  return 0;
}
