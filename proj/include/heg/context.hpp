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
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "heg/ckks/ring.hpp"
#include "heg/common.hpp"

namespace heg {

//! Everything needed to reproduce an encryption context.
struct ContextParams {
  std::string scheme = "ckks-ref";          //!< "ckks-ref" or "clear"
  int64_t poly_degree = 8192;               //!< ring dimension N
  std::vector<int> coeff_mod_bits = {30, 30, 30, 30, 30, 30, 30};
  int scale_bits = 30;                      //!< fresh encodings use scale 2^scale_bits
  int security = 128;                       //!< requested level: 0 (unchecked), 128, 192, 256

  bool operator==(const ContextParams& other) const {
    return scheme == other.scheme && poly_degree == other.poly_degree &&
           coeff_mod_bits == other.coeff_mod_bits && scale_bits == other.scale_bits &&
           security == other.security;
  }
};

/*! \brief Largest total coefficient-modulus width (bits) believed to meet the
 * requested security level at ring dimension n, per the standard uniform
 * ternary-secret estimates. Returns nullopt when the level is unchecked.
 */
inline std::optional<int> max_total_modulus_bits(int security, int64_t n) {
  struct Row {
    int64_t n;
    int bits128, bits192, bits256;
  };
  static const Row table[] = {
      {1024, 27, 19, 14},    {2048, 54, 37, 29},    {4096, 109, 75, 58},
      {8192, 218, 152, 118}, {16384, 438, 305, 237}, {32768, 881, 611, 476},
  };
  for (const Row& row : table) {
    if (row.n != n) continue;
    if (security == 128) return row.bits128;
    if (security == 192) return row.bits192;
    if (security == 256) return row.bits256;
  }
  return std::nullopt;
}

//! Human-readable warning when the parameters exceed the security estimate.
inline std::optional<std::string> security_warning(const ContextParams& params) {
  if (params.security == 0) return std::nullopt;
  auto bound = max_total_modulus_bits(params.security, params.poly_degree);
  if (!bound) return std::nullopt;
  int total = 0;
  for (int bits : params.coeff_mod_bits) total += bits;
  if (total <= *bound) return std::nullopt;
  return "warning: coefficient modulus spans " + std::to_string(total) + " bits, above the " +
         std::to_string(*bound) + "-bit estimate for " + std::to_string(params.security) +
         "-bit security at ring dimension " + std::to_string(params.poly_degree) +
         "; the requested level is not met";
}

/*! \brief Immutable parameter set shared by keys, ciphertexts and executors.
 *
 * Holds the residue moduli (most significant last dropped first by rescaling)
 * and per-modulus transform tables. A fresh ciphertext sits at max_level();
 * each rescale moves it one level down by retiring the top remaining modulus.
 */
class CryptoContext {
 public:
  explicit CryptoContext(ContextParams params) : m_params(std::move(params)) {
    const ContextParams& p = m_params;
    if (p.scheme != "ckks-ref" && p.scheme != "clear")
      fail(errc::validation, "unknown scheme '" + p.scheme + "' (expected ckks-ref or clear)");
    if (p.poly_degree < 1024 || p.poly_degree > 32768 || (p.poly_degree & (p.poly_degree - 1)) != 0)
      fail(errc::validation, "poly_degree must be a power of two in [1024, 32768]");
    if (p.coeff_mod_bits.size() < 2)
      fail(errc::validation, "coefficient modulus needs at least 2 primes (one rescale level)");
    if (p.scale_bits < 10 || p.scale_bits > 60)
      fail(errc::validation, "scale_bits must lie in [10, 60]");
    if (p.security != 0 && p.security != 128 && p.security != 192 && p.security != 256)
      fail(errc::validation, "security must be one of 0, 128, 192, 256");

    std::vector<uint64_t> primes = ckks::generate_ntt_primes(static_cast<size_t>(p.poly_degree), p.coeff_mod_bits);
    for (uint64_t q : primes) m_moduli.emplace_back(q);
    if (p.scheme == "ckks-ref")
      for (const ckks::Modulus& q : m_moduli) m_tables.emplace_back(q, static_cast<size_t>(p.poly_degree));
  }

  const ContextParams& params() const { return m_params; }
  bool is_clear() const { return m_params.scheme == "clear"; }
  int64_t poly_degree() const { return m_params.poly_degree; }

  //! Number of plaintext slots a single ciphertext packs.
  int64_t slot_count() const { return m_params.poly_degree / 2; }

  //! Level of a fresh ciphertext; level 0 supports no further rescaling.
  int max_level() const { return static_cast<int>(m_moduli.size()) - 1; }

  //! Scale of fresh encodings: 2^scale_bits.
  double default_scale() const { return std::ldexp(1.0, m_params.scale_bits); }

  const std::vector<ckks::Modulus>& moduli() const { return m_moduli; }

  const ckks::NttTables& tables(size_t index) const {
    check(!is_clear(), errc::internal, "the clear scheme has no transform tables");
    return m_tables.at(index);
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"scheme", m_params.scheme},
                          {"poly_degree", m_params.poly_degree},
                          {"coeff_mod_bits", m_params.coeff_mod_bits},
                          {"scale_bits", m_params.scale_bits},
                          {"security", m_params.security}};
  }

  static ContextParams params_from_json(const nlohmann::json& j) {
    ContextParams p;
    try {
      p.scheme = j.at("scheme").get<std::string>();
      p.poly_degree = j.at("poly_degree").get<int64_t>();
      p.coeff_mod_bits = j.at("coeff_mod_bits").get<std::vector<int>>();
      p.scale_bits = j.at("scale_bits").get<int>();
      p.security = j.at("security").get<int>();
    } catch (const nlohmann::json::exception& e) {
      fail(errc::parse, std::string("malformed context parameters: ") + e.what());
    }
    return p;
  }

 private:
  ContextParams m_params;
  std::vector<ckks::Modulus> m_moduli;
  std::vector<ckks::NttTables> m_tables;
};

using ContextPtr = std::shared_ptr<const CryptoContext>;

//! Validate parameters, build the context, and report any security shortfall.
inline ContextPtr make_context(ContextParams params) {
  if (auto warning = security_warning(params)) std::cerr << *warning << "\n";
  return std::make_shared<const CryptoContext>(std::move(params));
}

}  // namespace heg
