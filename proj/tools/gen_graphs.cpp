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

// Writes the bundled example graphs as JSON files. Usage:
//   hegc_gen_graphs [output-directory]   (default: graphs)

#include <filesystem>
#include <iostream>
#include <string>

#include "heg/builders.hpp"
#include "heg/graph_io.hpp"

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "graphs";
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::string& name, const heg::Graph& graph) {
    const std::string path = dir + "/" + name + ".json";
    heg::save_graph(graph, path);
    std::cout << "wrote " << path << "\n";
  };
  write("conv_bn", heg::make_conv_bn(1));
  write("cryptonets", heg::make_cryptonets(1));
  write("cryptonets_binarized", heg::make_cryptonets_binarized(1));
  write("cifar10", heg::make_cifar10(1));
  write("gemm8", heg::make_gemm(8, 0.5, 1));
  return 0;
}
