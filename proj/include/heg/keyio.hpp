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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "heg/common.hpp"
#include "heg/context.hpp"
#include "heg/ckks/ckks_backend.hpp"
#include "heg/ckks/poly.hpp"

namespace heg {

//*****************************************************************************
// Binary container formats.
//
// Key file ("HEGK"):
//   magic 'HEGK' | u32 format_version=1 | u32 json_len | context JSON |
//   u8 has_keys; when set (homomorphic schemes):
//     u8 has_relin | poly secret | poly public_b | poly public_a |
//     [u32 rows, per row u32 digits, per digit poly b + poly a]
// The clear scheme stores the context echo only (has_keys = 0).
//
// Ciphertext file ("HEGC"):
//   magic 'HEGC' | u32 format_version=1 | u32 level | f64 scale | u32 size |
//   size polys
//
// A poly is serialized in the coefficient domain:
//   u32 residue_count | per residue: u64 length + length little-endian u64s
//*****************************************************************************

namespace keyio_detail {

inline void write_bytes(std::ostream& os, const void* data, size_t len, const std::string& what) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
  check(os.good(), errc::io, "write failed: " + what);
}

inline void read_bytes(std::istream& is, void* data, size_t len, const std::string& what) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
  check(is.gcount() == static_cast<std::streamsize>(len), errc::io, "unexpected end of data in " + what);
}

inline void write_u32(std::ostream& os, uint32_t v, const std::string& what) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 4, what);
}

inline uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  read_bytes(is, b, 4, what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void write_u64(std::ostream& os, uint64_t v, const std::string& what) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 8, what);
}

inline uint64_t read_u64(std::istream& is, const std::string& what) {
  unsigned char b[8];
  read_bytes(is, b, 8, what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_poly(std::ostream& os, const CryptoContext& ctx, const ckks::RnsPoly& poly,
                       const std::string& what) {
  const ckks::RnsPoly coeff = ckks::poly_copy_coeff(ctx, poly);
  write_u32(os, static_cast<uint32_t>(coeff.active()), what);
  for (const auto& residue : coeff.residues) {
    write_u64(os, residue.size(), what);
    for (uint64_t c : residue) write_u64(os, c, what);
  }
}

inline ckks::RnsPoly read_poly(std::istream& is, const CryptoContext& ctx, const std::string& what) {
  const uint32_t count = read_u32(is, what);
  check(count >= 1 && count <= ctx.moduli().size(), errc::parse,
        what + ": residue count " + std::to_string(count) + " does not match the context");
  ckks::RnsPoly p;
  p.level = static_cast<int>(count) - 1;
  p.ntt_form = false;
  p.residues.resize(count);
  for (auto& residue : p.residues) {
    const uint64_t len = read_u64(is, what);
    check(len == static_cast<uint64_t>(ctx.poly_degree()), errc::parse,
          what + ": coefficient count " + std::to_string(len) + " does not match the ring degree");
    residue.resize(len);
    for (auto& c : residue) c = read_u64(is, what);
  }
  return p;
}

}  // namespace keyio_detail

//-----------------------------------------------------------------------------
// Key files.
//-----------------------------------------------------------------------------

inline void save_keys(std::ostream& os, const CryptoContext& ctx, const ckks::KeySet* keys,
                      const std::string& what) {
  using namespace keyio_detail;
  write_bytes(os, "HEGK", 4, what);
  write_u32(os, 1, what);
  const std::string ctx_json = ctx.to_json().dump();
  write_u32(os, static_cast<uint32_t>(ctx_json.size()), what);
  write_bytes(os, ctx_json.data(), ctx_json.size(), what);
  const unsigned char has_keys = keys != nullptr ? 1 : 0;
  write_bytes(os, &has_keys, 1, what);
  if (!keys) return;
  const unsigned char has_relin = keys->has_relin() ? 1 : 0;
  write_bytes(os, &has_relin, 1, what);
  write_poly(os, ctx, keys->secret, what);
  write_poly(os, ctx, keys->public_b, what);
  write_poly(os, ctx, keys->public_a, what);
  if (keys->has_relin()) {
    write_u32(os, static_cast<uint32_t>(keys->relin.size()), what);
    for (const auto& row : keys->relin) {
      write_u32(os, static_cast<uint32_t>(row.size()), what);
      for (const auto& key : row) {
        write_poly(os, ctx, key.b, what);
        write_poly(os, ctx, key.a, what);
      }
    }
  }
}

inline void save_keys(const std::string& path, const CryptoContext& ctx, const ckks::KeySet* keys) {
  std::ofstream os(path, std::ios::binary);
  check(os.good(), errc::io, "cannot write key file: " + path);
  save_keys(os, ctx, keys, path);
  os.flush();
  check(os.good(), errc::io, "cannot write key file: " + path);
}

struct LoadedKeys {
  ContextPtr context;
  bool has_keys = false;
  ckks::KeySet keys;  //!< valid only when has_keys
};

inline LoadedKeys load_keys(std::istream& is, const std::string& what) {
  using namespace keyio_detail;
  char magic[4];
  read_bytes(is, magic, 4, what);
  check(std::memcmp(magic, "HEGK", 4) == 0, errc::io, "not a key file (bad magic): " + what);
  const uint32_t version = read_u32(is, what);
  check(version == 1, errc::parse, what + ": unsupported key file version " + std::to_string(version));
  const uint32_t json_len = read_u32(is, what);
  std::string ctx_json(json_len, '\0');
  read_bytes(is, ctx_json.data(), json_len, what);

  LoadedKeys out;
  nlohmann::json ctx_obj;
  try {
    ctx_obj = nlohmann::json::parse(ctx_json);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::parse, what + ": malformed context header: " + e.what());
  }
  out.context = make_context(CryptoContext::params_from_json(ctx_obj));

  unsigned char has_keys = 0;
  read_bytes(is, &has_keys, 1, what);
  out.has_keys = has_keys != 0;
  if (!out.has_keys) {
    check(out.context->is_clear(), errc::parse, what + ": homomorphic context without key material");
    return out;
  }
  check(!out.context->is_clear(), errc::parse, what + ": clear context must not carry key material");

  unsigned char has_relin = 0;
  read_bytes(is, &has_relin, 1, what);
  const CryptoContext& ctx = *out.context;
  auto load_full = [&](const char* name) {
    ckks::RnsPoly p = read_poly(is, ctx, what + std::string(": ") + name);
    check(p.active() == ctx.moduli().size(), errc::parse,
          what + std::string(": ") + name + " does not cover the full modulus chain");
    ckks::poly_to_ntt(ctx, p);
    return p;
  };
  out.keys.secret = load_full("secret key");
  out.keys.public_b = load_full("public key (b)");
  out.keys.public_a = load_full("public key (a)");
  if (has_relin != 0) {
    const uint32_t rows = read_u32(is, what);
    check(rows == ctx.moduli().size(), errc::parse, what + ": relinearization rows do not match the moduli");
    out.keys.relin.resize(rows);
    for (auto& row : out.keys.relin) {
      const uint32_t digits = read_u32(is, what);
      check(digits >= 1 && digits <= 8, errc::parse, what + ": implausible digit count");
      for (uint32_t d = 0; d < digits; ++d) {
        ckks::RelinDigitKey key;
        key.b = load_full("relinearization key (b)");
        key.a = load_full("relinearization key (a)");
        row.push_back(std::move(key));
      }
    }
  }
  return out;
}

inline LoadedKeys load_keys(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), errc::io, "cannot read key file: " + path);
  return load_keys(is, path);
}

//-----------------------------------------------------------------------------
// Ciphertext files.
//-----------------------------------------------------------------------------

inline void save_ciphertext(std::ostream& os, const CryptoContext& ctx, const HECiphertext& cipher,
                            const std::string& what) {
  using namespace keyio_detail;
  const auto* ct = dynamic_cast<const ckks::CkksCiphertext*>(&cipher);
  check(ct != nullptr, errc::validation, "only homomorphic ciphertexts can be serialized");
  write_bytes(os, "HEGC", 4, what);
  write_u32(os, 1, what);
  write_u32(os, static_cast<uint32_t>(ct->level()), what);
  uint64_t scale_bits = 0;
  const double scale = ct->scale();
  std::memcpy(&scale_bits, &scale, sizeof scale);
  write_u64(os, scale_bits, what);
  write_u32(os, static_cast<uint32_t>(ct->polys().size()), what);
  for (const auto& p : ct->polys()) write_poly(os, ctx, p, what);
}

/*! \brief Read a ciphertext produced by save_ciphertext.
 *
 * The payload is re-homed into `backend`'s resident domain. The noise
 * estimate is not serialized; the loaded handle restarts at the
 * fresh-encryption bound.
 */
inline CiphertextPtr load_ciphertext(std::istream& is, const ckks::CkksBackend& backend, const std::string& what) {
  using namespace keyio_detail;
  const CryptoContext& ctx = backend.context();
  char magic[4];
  read_bytes(is, magic, 4, what);
  check(std::memcmp(magic, "HEGC", 4) == 0, errc::io, "not a ciphertext file (bad magic): " + what);
  const uint32_t version = read_u32(is, what);
  check(version == 1, errc::parse, what + ": unsupported ciphertext file version " + std::to_string(version));
  const uint32_t level = read_u32(is, what);
  check(level <= static_cast<uint32_t>(ctx.max_level()), errc::parse, what + ": level outside the modulus chain");
  uint64_t scale_bits = read_u64(is, what);
  double scale = 0;
  std::memcpy(&scale, &scale_bits, sizeof scale);
  check(scale > 0.0, errc::parse, what + ": non-positive scale");
  const uint32_t size = read_u32(is, what);
  check(size >= 2 && size <= 8, errc::parse, what + ": implausible ciphertext size");
  std::vector<ckks::RnsPoly> polys;
  polys.reserve(size);
  for (uint32_t j = 0; j < size; ++j) {
    ckks::RnsPoly p = read_poly(is, ctx, what);
    check(p.active() == static_cast<size_t>(level) + 1, errc::parse, what + ": residue count disagrees with level");
    if (!backend.schoolbook_multiply()) ckks::poly_to_ntt(ctx, p);
    polys.push_back(std::move(p));
  }
  return std::make_shared<ckks::CkksCiphertext>(static_cast<int>(level), scale, std::move(polys),
                                                NoiseEstimate{backend.noise_model().fresh_bound()});
}

inline void save_ciphertext(const std::string& path, const CryptoContext& ctx, const HECiphertext& cipher) {
  std::ofstream os(path, std::ios::binary);
  check(os.good(), errc::io, "cannot write ciphertext file: " + path);
  save_ciphertext(os, ctx, cipher, path);
  os.flush();
  check(os.good(), errc::io, "cannot write ciphertext file: " + path);
}

inline CiphertextPtr load_ciphertext(const std::string& path, const ckks::CkksBackend& backend) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), errc::io, "cannot read ciphertext file: " + path);
  return load_ciphertext(is, backend, path);
}

}  // namespace heg
