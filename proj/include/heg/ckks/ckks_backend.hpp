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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "heg/backend.hpp"
#include "heg/common.hpp"
#include "heg/context.hpp"
#include "heg/ckks/encoder.hpp"
#include "heg/ckks/poly.hpp"
#include "heg/ckks/ring.hpp"

namespace heg {
namespace ckks {

//! Width of the digits used by relinearization-key decomposition.
inline constexpr int kRelinDigitBits = 15;

inline int relin_digit_count(const Modulus& q) {
  int digits = 0;
  for (uint64_t m = q.value() - 1; m != 0; m >>= kRelinDigitBits) ++digits;
  return digits == 0 ? 1 : digits;
}

//-----------------------------------------------------------------------------
// Keys.
//-----------------------------------------------------------------------------

//! One decomposition component of the relinearization key.
struct RelinDigitKey {
  RnsPoly b;
  RnsPoly a;
};

/*! \brief Secret, public, and relinearization keys over the full modulus
 * chain (transform domain). Lower levels use a truncated view.
 *
 * Relinearization keys exist per (residue, digit) pair: the key for residue i
 * embeds 2^(15d) * s^2 on residue i only, which realizes the CRT idempotent
 * that is 1 mod q_i and 0 elsewhere. Keys are therefore level-independent.
 */
struct KeySet {
  RnsPoly secret;
  RnsPoly public_b;
  RnsPoly public_a;
  std::vector<std::vector<RelinDigitKey>> relin;

  bool has_relin() const { return !relin.empty(); }
};

inline KeySet generate_keys(const CryptoContext& ctx, uint64_t seed, bool with_relin = true) {
  check(!ctx.is_clear(), errc::validation, "key generation requires a homomorphic scheme");
  const int L = ctx.max_level();
  Rng root(seed);
  Rng secret_rng = root.fork("secret");
  Rng public_rng = root.fork("public");
  Rng relin_rng = root.fork("relin");

  KeySet ks;
  ks.secret = sample_ternary(ctx, L, secret_rng);
  poly_to_ntt(ctx, ks.secret);

  RnsPoly e = sample_gaussian(ctx, L, kErrorStdDev, public_rng);
  poly_to_ntt(ctx, e);
  ks.public_a = sample_uniform(ctx, L, public_rng, /*ntt_form=*/true);
  ks.public_b = poly_negate(ctx, poly_add(ctx, poly_mul(ctx, ks.public_a, ks.secret), e));

  if (with_relin) {
    const RnsPoly s2 = poly_mul(ctx, ks.secret, ks.secret);
    const size_t prime_count = ctx.moduli().size();
    ks.relin.resize(prime_count);
    for (size_t i = 0; i < prime_count; ++i) {
      const Modulus& qi = ctx.moduli()[i];
      const int digits = relin_digit_count(qi);
      for (int d = 0; d < digits; ++d) {
        RnsPoly e2 = sample_gaussian(ctx, L, kErrorStdDev, relin_rng);
        poly_to_ntt(ctx, e2);
        RnsPoly a = sample_uniform(ctx, L, relin_rng, /*ntt_form=*/true);
        RnsPoly b = poly_negate(ctx, poly_add(ctx, poly_mul(ctx, a, ks.secret), e2));
        // Embed 2^(15d) * s^2 on residue i only.
        const uint64_t f = qi.pow(2, static_cast<uint64_t>(kRelinDigitBits) * static_cast<uint64_t>(d));
        const uint64_t f_shoup = qi.shoup(f);
        uint64_t* bi = b.residues[i].data();
        const uint64_t* s2i = s2.residues[i].data();
        for (int64_t k = 0; k < ctx.poly_degree(); ++k) bi[k] = qi.add(bi[k], qi.mul_shoup(s2i[k], f, f_shoup));
        ks.relin[i].push_back({std::move(b), std::move(a)});
      }
    }
  }
  return ks;
}

//-----------------------------------------------------------------------------
// Payload handles.
//-----------------------------------------------------------------------------

class CkksPlaintext final : public HEPlaintext {
 public:
  CkksPlaintext(int level, double scale, RnsPoly poly) : HEPlaintext(level, scale), m_poly(std::move(poly)) {}
  const RnsPoly& poly() const { return m_poly; }

 private:
  RnsPoly m_poly;
};

class CkksCiphertext final : public HECiphertext {
 public:
  CkksCiphertext(int level, double scale, std::vector<RnsPoly> polys, NoiseEstimate noise)
      : HECiphertext(level, scale, polys.size(), noise), m_polys(std::move(polys)) {
    check(m_polys.size() >= 2, errc::internal, "ciphertext needs at least two ring elements");
  }
  const std::vector<RnsPoly>& polys() const { return m_polys; }

 private:
  std::vector<RnsPoly> m_polys;
};

//-----------------------------------------------------------------------------
// Backend.
//-----------------------------------------------------------------------------

struct CkksOptions {
  //! Run every ring product through the quadratic negacyclic oracle instead
  //! of the transform-domain fast path (polynomials then stay
  //! coefficient-resident). Intended for small rings and equivalence tests.
  bool use_schoolbook_multiply = false;
};

/*! \brief Leveled approximate-arithmetic backend over power-of-two
 * cyclotomic rings, with residue (RNS) representation throughout.
 */
class CkksBackend final : public HEBackend {
 public:
  CkksBackend(ContextPtr context, KeySet keys, CkksOptions options = {})
      : HEBackend(std::move(context)),
        m_options(options),
        m_ntt_resident(!options.use_schoolbook_multiply),
        m_keys(std::move(keys)),
        m_encoder(m_context->poly_degree()) {
    check(!m_context->is_clear(), errc::validation, "this backend requires a homomorphic scheme context");
    if (!m_ntt_resident) {
      poly_to_coeff(*m_context, m_keys.secret);
      poly_to_coeff(*m_context, m_keys.public_b);
      poly_to_coeff(*m_context, m_keys.public_a);
      for (auto& row : m_keys.relin)
        for (auto& key : row) {
          poly_to_coeff(*m_context, key.b);
          poly_to_coeff(*m_context, key.a);
        }
    }
  }

  std::string name() const override { return "ckks-ref"; }
  const KeySet& keys() const { return m_keys; }
  bool schoolbook_multiply() const { return m_options.use_schoolbook_multiply; }

  // --- encoding and encryption ---------------------------------------------

  PlaintextPtr encode(const std::vector<double>& values, int level, double scale) const override {
    require_level_in_range(level);
    check(scale > 0.0, errc::validation, "encoding scale must be positive");
    const std::vector<double> coeffs = m_encoder.values_to_coeffs(values);
    RnsPoly p = make_poly(*m_context, level, /*ntt_form=*/false);
    const int64_t n = m_context->poly_degree();
    for (int64_t k = 0; k < n; ++k) {
      const double scaled = coeffs[static_cast<size_t>(k)] * scale;
      check(std::abs(scaled) < 9.0e18, errc::validation, "encoded coefficient overflows the integer range");
      const int64_t c = std::llround(scaled);
      for (size_t i = 0; i < p.active(); ++i)
        p.residues[i][static_cast<size_t>(k)] = lift_signed(c, m_context->moduli()[i]);
    }
    if (m_ntt_resident) poly_to_ntt(*m_context, p);
    return std::make_shared<CkksPlaintext>(level, scale, std::move(p));
  }

  PlaintextPtr encode_constant(double value, int level, double scale) const override {
    require_level_in_range(level);
    check(scale > 0.0, errc::validation, "encoding scale must be positive");
    const double scaled = value * scale;
    check(std::abs(scaled) < 9.0e18, errc::validation, "encoded coefficient overflows the integer range");
    const int64_t c = std::llround(scaled);
    RnsPoly p = make_poly(*m_context, level, m_ntt_resident);
    for (size_t i = 0; i < p.active(); ++i) {
      const uint64_t r = lift_signed(c, m_context->moduli()[i]);
      if (m_ntt_resident) {
        // The transform of a constant polynomial is that constant everywhere.
        std::fill(p.residues[i].begin(), p.residues[i].end(), r);
      } else {
        p.residues[i][0] = r;
      }
    }
    return std::make_shared<CkksPlaintext>(level, scale, std::move(p));
  }

  std::vector<double> decode(const HEPlaintext& plain, int64_t count) const override {
    const CkksPlaintext& p = as_pt(plain);
    return coeffs_to_values(p.poly(), p.scale(), count);
  }

  CiphertextPtr encrypt(const HEPlaintext& plain, uint64_t seed) const override {
    const CkksPlaintext& p = as_pt(plain);
    std::vector<RnsPoly> polys = fresh_encryption(p.level(), seed);
    poly_add_inplace(*m_context, polys[0], p.poly());
    return std::make_shared<CkksCiphertext>(p.level(), p.scale(), std::move(polys),
                                            NoiseEstimate{m_noise.fresh_bound()});
  }

  CiphertextPtr encrypt_zero_at(int level, double scale, uint64_t seed) const override {
    require_level_in_range(level);
    check(scale > 0.0, errc::validation, "ciphertext scale must be positive");
    std::vector<RnsPoly> polys = fresh_encryption(level, seed);
    return std::make_shared<CkksCiphertext>(level, scale, std::move(polys), NoiseEstimate{m_noise.fresh_bound()});
  }

  std::vector<double> decrypt(const HECiphertext& cipher, int64_t count) const override {
    const CkksCiphertext& c = as_ct(cipher);
    const int level = c.level();
    // m = c0 + c1*s + c2*s^2 + ...
    RnsPoly acc = c.polys()[0];
    RnsPoly s_power = poly_drop_to(*m_context, m_keys.secret, level);
    for (size_t j = 1; j < c.polys().size(); ++j) {
      if (j > 1) s_power = poly_mul(*m_context, s_power, poly_drop_to(*m_context, m_keys.secret, level));
      poly_add_inplace(*m_context, acc, poly_mul(*m_context, c.polys()[j], s_power));
    }
    return coeffs_to_values(acc, c.scale(), count);
  }

  // --- primitives ------------------------------------------------------------

  CiphertextPtr add(const HECiphertext& a, const HECiphertext& b) const override {
    return add_sub(a, b, /*subtract=*/false);
  }

  CiphertextPtr sub(const HECiphertext& a, const HECiphertext& b) const override {
    return add_sub(a, b, /*subtract=*/true);
  }

  CiphertextPtr multiply(const HECiphertext& a, const HECiphertext& b) const override {
    const CkksCiphertext& x = as_ct(a);
    const CkksCiphertext& y = as_ct(b);
    require_same_level(x.level(), y.level(), "multiply");
    require_mul_headroom(x.level());
    const size_t out_size = x.polys().size() + y.polys().size() - 1;
    std::vector<RnsPoly> polys;
    polys.reserve(out_size);
    for (size_t t = 0; t < out_size; ++t) polys.push_back(make_poly(*m_context, x.level(), m_ntt_resident));
    for (size_t i = 0; i < x.polys().size(); ++i)
      for (size_t j = 0; j < y.polys().size(); ++j) poly_mul_acc(*m_context, x.polys()[i], y.polys()[j], polys[i + j]);
    if (polys.size() == 3) {
      if (m_keys.has_relin()) {
        polys = relinearize(std::move(polys), x.level());
      } else if (!m_relin_warned.exchange(true)) {
        std::cerr << "warning: no relinearization key available; ciphertext left at size 3\n";
      }
    }
    const NoiseEstimate noise{m_noise.multiply_bound(x.noise().bound, x.scale(), y.noise().bound, y.scale())};
    return std::make_shared<CkksCiphertext>(x.level(), x.scale() * y.scale(), std::move(polys), noise);
  }

  CiphertextPtr negate(const HECiphertext& a) const override {
    const CkksCiphertext& x = as_ct(a);
    std::vector<RnsPoly> polys;
    polys.reserve(x.polys().size());
    for (const RnsPoly& p : x.polys()) polys.push_back(poly_negate(*m_context, p));
    return std::make_shared<CkksCiphertext>(x.level(), x.scale(), std::move(polys), x.noise());
  }

  CiphertextPtr add_plain(const HECiphertext& a, const HEPlaintext& b) const override {
    return add_sub_plain(a, b, /*subtract=*/false);
  }

  CiphertextPtr sub_plain(const HECiphertext& a, const HEPlaintext& b) const override {
    return add_sub_plain(a, b, /*subtract=*/true);
  }

  CiphertextPtr multiply_plain(const HECiphertext& a, const HEPlaintext& b) const override {
    const CkksCiphertext& x = as_ct(a);
    const CkksPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "multiply_plain");
    require_mul_headroom(x.level());
    std::vector<RnsPoly> polys;
    polys.reserve(x.polys().size());
    for (const RnsPoly& p : x.polys()) polys.push_back(poly_mul(*m_context, p, y.poly()));
    const NoiseEstimate noise{
        m_noise.multiply_bound(x.noise().bound, x.scale(), m_noise.encode_bound(), y.scale())};
    return std::make_shared<CkksCiphertext>(x.level(), x.scale() * y.scale(), std::move(polys), noise);
  }

  PlaintextPtr add_pp(const HEPlaintext& a, const HEPlaintext& b) const override {
    const CkksPlaintext& x = as_pt(a);
    const CkksPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "add_plain");
    require_same_scale(x.scale(), y.scale(), "add_plain");
    return std::make_shared<CkksPlaintext>(x.level(), x.scale(), poly_add(*m_context, x.poly(), y.poly()));
  }

  PlaintextPtr sub_pp(const HEPlaintext& a, const HEPlaintext& b) const override {
    const CkksPlaintext& x = as_pt(a);
    const CkksPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "sub_plain");
    require_same_scale(x.scale(), y.scale(), "sub_plain");
    return std::make_shared<CkksPlaintext>(x.level(), x.scale(), poly_sub(*m_context, x.poly(), y.poly()));
  }

  PlaintextPtr multiply_pp(const HEPlaintext& a, const HEPlaintext& b) const override {
    const CkksPlaintext& x = as_pt(a);
    const CkksPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "multiply_plain");
    require_mul_headroom(x.level());
    return std::make_shared<CkksPlaintext>(x.level(), x.scale() * y.scale(),
                                           poly_mul(*m_context, x.poly(), y.poly()));
  }

  PlaintextPtr negate_p(const HEPlaintext& a) const override {
    const CkksPlaintext& x = as_pt(a);
    return std::make_shared<CkksPlaintext>(x.level(), x.scale(), poly_negate(*m_context, x.poly()));
  }

  // --- level and scale management ---------------------------------------------

  CiphertextPtr rescale(const HECiphertext& a) const override {
    const CkksCiphertext& x = as_ct(a);
    require_mul_headroom(x.level());
    const double dropped = static_cast<double>(m_context->moduli()[static_cast<size_t>(x.level())].value());
    std::vector<RnsPoly> polys;
    polys.reserve(x.polys().size());
    for (const RnsPoly& p : x.polys()) polys.push_back(poly_rescale(*m_context, p));
    const NoiseEstimate noise{m_noise.rescale_bound(x.noise().bound, dropped)};
    return std::make_shared<CkksCiphertext>(x.level() - 1, x.scale() / dropped, std::move(polys), noise);
  }

  PlaintextPtr rescale_p(const HEPlaintext& a) const override {
    const CkksPlaintext& x = as_pt(a);
    require_mul_headroom(x.level());
    const double dropped = static_cast<double>(m_context->moduli()[static_cast<size_t>(x.level())].value());
    return std::make_shared<CkksPlaintext>(x.level() - 1, x.scale() / dropped, poly_rescale(*m_context, x.poly()));
  }

  CiphertextPtr mod_switch(const HECiphertext& a, int target_level) const override {
    const CkksCiphertext& x = as_ct(a);
    check(target_level >= 0 && target_level <= x.level(), errc::validation,
          "modulus switch cannot raise the level");
    std::vector<RnsPoly> polys;
    polys.reserve(x.polys().size());
    for (const RnsPoly& p : x.polys()) polys.push_back(poly_drop_to(*m_context, p, target_level));
    return std::make_shared<CkksCiphertext>(target_level, x.scale(), std::move(polys), x.noise());
  }

  PlaintextPtr mod_switch_p(const HEPlaintext& a, int target_level) const override {
    const CkksPlaintext& x = as_pt(a);
    check(target_level >= 0 && target_level <= x.level(), errc::validation,
          "modulus switch cannot raise the level");
    return std::make_shared<CkksPlaintext>(target_level, x.scale(), poly_drop_to(*m_context, x.poly(), target_level));
  }

  // --- fused compound kernel ----------------------------------------------------

  CiphertextPtr weighted_sum(const std::vector<CiphertextPtr>& xs,
                             const std::vector<PlaintextPtr>& ws) const override {
    check(!xs.empty() && xs.size() == ws.size(), errc::internal, "weighted sum needs matching non-empty operands");
    for (const CiphertextPtr& x : xs)
      if (as_ct(*x).polys().size() != 2) return weighted_sum_default(xs, ws);
    const CkksCiphertext& first = as_ct(*xs[0]);
    const int level = first.level();
    require_mul_headroom(level);
    const double x_scale = first.scale();
    const double w_scale = ws[0]->scale();
    RnsPoly acc0 = make_poly(*m_context, level, m_ntt_resident);
    RnsPoly acc1 = make_poly(*m_context, level, m_ntt_resident);
    double noise = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const CkksCiphertext& x = as_ct(*xs[i]);
      const CkksPlaintext& w = as_pt(*ws[i]);
      require_same_level(x.level(), level, "weighted_sum");
      require_same_level(w.level(), level, "weighted_sum");
      require_same_scale(x.scale(), x_scale, "weighted_sum");
      require_same_scale(w.scale(), w_scale, "weighted_sum");
      poly_mul_acc(*m_context, x.polys()[0], w.poly(), acc0);
      poly_mul_acc(*m_context, x.polys()[1], w.poly(), acc1);
      noise += m_noise.multiply_bound(x.noise().bound, x.scale(), m_noise.encode_bound(), w.scale());
    }
    const double dropped = static_cast<double>(m_context->moduli()[static_cast<size_t>(level)].value());
    std::vector<RnsPoly> polys;
    polys.push_back(poly_rescale(*m_context, acc0));
    polys.push_back(poly_rescale(*m_context, acc1));
    return std::make_shared<CkksCiphertext>(level - 1, x_scale * w_scale / dropped, std::move(polys),
                                            NoiseEstimate{m_noise.rescale_bound(noise, dropped)});
  }

  CiphertextPtr weighted_sum_cipher(const std::vector<CiphertextPtr>& xs,
                                    const std::vector<CiphertextPtr>& ws) const override {
    check(!xs.empty() && xs.size() == ws.size(), errc::internal, "weighted sum needs matching non-empty operands");
    if (!m_keys.has_relin()) return weighted_sum_cipher_default(xs, ws);
    for (const CiphertextPtr& x : xs)
      if (as_ct(*x).polys().size() != 2) return weighted_sum_cipher_default(xs, ws);
    for (const CiphertextPtr& w : ws)
      if (as_ct(*w).polys().size() != 2) return weighted_sum_cipher_default(xs, ws);
    const CkksCiphertext& first = as_ct(*xs[0]);
    const int level = first.level();
    require_mul_headroom(level);
    const double x_scale = first.scale();
    const double w_scale = as_ct(*ws[0]).scale();
    std::vector<RnsPoly> acc;
    acc.reserve(3);
    for (int t = 0; t < 3; ++t) acc.push_back(make_poly(*m_context, level, m_ntt_resident));
    double noise = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const CkksCiphertext& x = as_ct(*xs[i]);
      const CkksCiphertext& w = as_ct(*ws[i]);
      require_same_level(x.level(), level, "weighted_sum_cipher");
      require_same_level(w.level(), level, "weighted_sum_cipher");
      require_same_scale(x.scale(), x_scale, "weighted_sum_cipher");
      require_same_scale(w.scale(), w_scale, "weighted_sum_cipher");
      poly_mul_acc(*m_context, x.polys()[0], w.polys()[0], acc[0]);
      poly_mul_acc(*m_context, x.polys()[0], w.polys()[1], acc[1]);
      poly_mul_acc(*m_context, x.polys()[1], w.polys()[0], acc[1]);
      poly_mul_acc(*m_context, x.polys()[1], w.polys()[1], acc[2]);
      noise += m_noise.multiply_bound(x.noise().bound, x.scale(), w.noise().bound, w.scale());
    }
    acc = relinearize(std::move(acc), level);
    const double dropped = static_cast<double>(m_context->moduli()[static_cast<size_t>(level)].value());
    std::vector<RnsPoly> polys;
    polys.push_back(poly_rescale(*m_context, acc[0]));
    polys.push_back(poly_rescale(*m_context, acc[1]));
    return std::make_shared<CkksCiphertext>(level - 1, x_scale * w_scale / dropped, std::move(polys),
                                            NoiseEstimate{m_noise.rescale_bound(noise, dropped)});
  }

 private:
  static const CkksCiphertext& as_ct(const HECiphertext& c) {
    const auto* p = dynamic_cast<const CkksCiphertext*>(&c);
    check(p != nullptr, errc::internal, "ciphertext does not belong to this backend");
    return *p;
  }

  static const CkksPlaintext& as_pt(const HEPlaintext& p) {
    const auto* q = dynamic_cast<const CkksPlaintext*>(&p);
    check(q != nullptr, errc::internal, "plaintext does not belong to this backend");
    return *q;
  }

  void require_level_in_range(int level) const {
    check(level >= 0 && level <= m_context->max_level(), errc::validation, "level outside the modulus chain");
  }

  //! (pk_b*u + e0, pk_a*u + e1) at the requested level.
  std::vector<RnsPoly> fresh_encryption(int level, uint64_t seed) const {
    Rng rng(seed);
    Rng u_rng = rng.fork("mask");
    Rng e_rng = rng.fork("error");
    RnsPoly u = sample_ternary(*m_context, level, u_rng);
    RnsPoly e0 = sample_gaussian(*m_context, level, kErrorStdDev, e_rng);
    RnsPoly e1 = sample_gaussian(*m_context, level, kErrorStdDev, e_rng);
    if (m_ntt_resident) {
      poly_to_ntt(*m_context, u);
      poly_to_ntt(*m_context, e0);
      poly_to_ntt(*m_context, e1);
    }
    RnsPoly c0 = poly_mul(*m_context, poly_drop_to(*m_context, m_keys.public_b, level), u);
    poly_add_inplace(*m_context, c0, e0);
    RnsPoly c1 = poly_mul(*m_context, poly_drop_to(*m_context, m_keys.public_a, level), u);
    poly_add_inplace(*m_context, c1, e1);
    std::vector<RnsPoly> polys;
    polys.push_back(std::move(c0));
    polys.push_back(std::move(c1));
    return polys;
  }

  //! Decode helper shared by decode() and decrypt().
  std::vector<double> coeffs_to_values(const RnsPoly& poly, double scale, int64_t count) const {
    RnsPoly p = poly_copy_coeff(*m_context, poly);
    std::vector<Modulus> active(m_context->moduli().begin(), m_context->moduli().begin() + p.active());
    CrtReconstructor recon(active);
    const int64_t n = m_context->poly_degree();
    std::vector<double> coeffs(static_cast<size_t>(n));
    std::vector<uint64_t> residues(p.active());
    for (int64_t k = 0; k < n; ++k) {
      for (size_t i = 0; i < p.active(); ++i) residues[i] = p.residues[i][static_cast<size_t>(k)];
      coeffs[static_cast<size_t>(k)] = recon.to_centered_double(residues) / scale;
    }
    return m_encoder.coeffs_to_values(coeffs, count);
  }

  //! Reduce (d0, d1, d2) to (d0', d1') using the digit keys.
  std::vector<RnsPoly> relinearize(std::vector<RnsPoly> polys, int level) const {
    RnsPoly c2 = poly_copy_coeff(*m_context, polys[2]);
    RnsPoly acc0 = std::move(polys[0]);
    RnsPoly acc1 = std::move(polys[1]);
    const int64_t n = m_context->poly_degree();
    std::vector<uint64_t> digit(static_cast<size_t>(n));
    std::vector<uint64_t> transformed(static_cast<size_t>(n));
    for (int i = 0; i <= level; ++i) {
      const Modulus& qi = m_context->moduli()[static_cast<size_t>(i)];
      const int digits = relin_digit_count(qi);
      const uint64_t* src = c2.residues[static_cast<size_t>(i)].data();
      for (int d = 0; d < digits; ++d) {
        for (int64_t k = 0; k < n; ++k)
          digit[static_cast<size_t>(k)] = (src[k] >> (kRelinDigitBits * d)) & ((1u << kRelinDigitBits) - 1);
        const RelinDigitKey& key = m_keys.relin[static_cast<size_t>(i)][static_cast<size_t>(d)];
        for (int j = 0; j <= level; ++j) {
          const Modulus& qj = m_context->moduli()[static_cast<size_t>(j)];
          const size_t sj = static_cast<size_t>(j);
          if (m_ntt_resident) {
            transformed = digit;
            m_context->tables(sj).forward(transformed.data());
            uint64_t* o0 = acc0.residues[sj].data();
            uint64_t* o1 = acc1.residues[sj].data();
            const uint64_t* kb = key.b.residues[sj].data();
            const uint64_t* ka = key.a.residues[sj].data();
            for (int64_t k = 0; k < n; ++k) {
              o0[k] = qj.add(o0[k], qj.mul(transformed[static_cast<size_t>(k)], kb[k]));
              o1[k] = qj.add(o1[k], qj.mul(transformed[static_cast<size_t>(k)], ka[k]));
            }
          } else {
            const std::vector<uint64_t> pb = negacyclic_mul_schoolbook(digit, key.b.residues[sj], qj);
            const std::vector<uint64_t> pa = negacyclic_mul_schoolbook(digit, key.a.residues[sj], qj);
            uint64_t* o0 = acc0.residues[sj].data();
            uint64_t* o1 = acc1.residues[sj].data();
            for (int64_t k = 0; k < n; ++k) {
              o0[k] = qj.add(o0[k], pb[static_cast<size_t>(k)]);
              o1[k] = qj.add(o1[k], pa[static_cast<size_t>(k)]);
            }
          }
        }
      }
    }
    std::vector<RnsPoly> out;
    out.push_back(std::move(acc0));
    out.push_back(std::move(acc1));
    return out;
  }

  CiphertextPtr add_sub(const HECiphertext& a, const HECiphertext& b, bool subtract) const {
    const CkksCiphertext& x = as_ct(a);
    const CkksCiphertext& y = as_ct(b);
    require_same_level(x.level(), y.level(), subtract ? "sub" : "add");
    require_same_scale(x.scale(), y.scale(), subtract ? "sub" : "add");
    const size_t size = std::max(x.polys().size(), y.polys().size());
    std::vector<RnsPoly> polys;
    polys.reserve(size);
    for (size_t j = 0; j < size; ++j) {
      const bool in_x = j < x.polys().size();
      const bool in_y = j < y.polys().size();
      if (in_x && in_y) {
        polys.push_back(subtract ? poly_sub(*m_context, x.polys()[j], y.polys()[j])
                                 : poly_add(*m_context, x.polys()[j], y.polys()[j]));
      } else if (in_x) {
        polys.push_back(x.polys()[j]);
      } else {
        polys.push_back(subtract ? poly_negate(*m_context, y.polys()[j]) : y.polys()[j]);
      }
    }
    const NoiseEstimate noise{m_noise.add_bound(x.noise().bound, y.noise().bound)};
    return std::make_shared<CkksCiphertext>(x.level(), x.scale(), std::move(polys), noise);
  }

  CiphertextPtr add_sub_plain(const HECiphertext& a, const HEPlaintext& b, bool subtract) const {
    const CkksCiphertext& x = as_ct(a);
    const CkksPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), subtract ? "sub_plain" : "add_plain");
    require_same_scale(x.scale(), y.scale(), subtract ? "sub_plain" : "add_plain");
    std::vector<RnsPoly> polys = x.polys();
    polys[0] = subtract ? poly_sub(*m_context, polys[0], y.poly()) : poly_add(*m_context, polys[0], y.poly());
    const NoiseEstimate noise{m_noise.add_bound(x.noise().bound, m_noise.encode_bound())};
    return std::make_shared<CkksCiphertext>(x.level(), x.scale(), std::move(polys), noise);
  }

  CkksOptions m_options;
  bool m_ntt_resident;
  KeySet m_keys;
  SlotEncoder m_encoder;
  mutable std::atomic<bool> m_relin_warned{false};
};

}  // namespace ckks
}  // namespace heg
