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
#include <memory>
#include <string>
#include <vector>

#include "heg/context.hpp"

namespace heg {

//! Standard deviation of the error distribution used by encryption.
inline constexpr double kErrorStdDev = 3.2;

//-----------------------------------------------------------------------------
// Special plaintext values.
//-----------------------------------------------------------------------------

enum class SpecialValue { Zero, One, MinusOne, General };

/*! \brief Classify a numeric payload before encoding.
 *
 * Zero / One / MinusOne require every entry within epsilon of 0 / 1 / -1
 * respectively; anything else is General. The default epsilon of 0 demands
 * exact matches.
 */
inline SpecialValue classify_special(const std::vector<double>& values, double epsilon = 0.0) {
  bool zero = true, one = true, minus_one = true;
  for (double v : values) {
    zero = zero && std::abs(v) <= epsilon;
    one = one && std::abs(v - 1.0) <= epsilon;
    minus_one = minus_one && std::abs(v + 1.0) <= epsilon;
  }
  if (zero) return SpecialValue::Zero;
  if (one) return SpecialValue::One;
  if (minus_one) return SpecialValue::MinusOne;
  return SpecialValue::General;
}

//-----------------------------------------------------------------------------
// Advisory noise tracking.
//-----------------------------------------------------------------------------

//! Worst-case embedded-error bound, carried for diagnostics only.
struct NoiseEstimate {
  double bound = 0.0;
};

/*! \brief First-order noise-growth model shared by every backend.
 *
 * Bounds are advisory: they are never used to gate execution, only tracked so
 * tests and users can compare operation sequences. Multiplication folds in
 * the operand scales (the message magnitude term dominates in practice), so
 * bounds keep growing through multiply-rescale chains instead of collapsing.
 */
class NoiseModel {
 public:
  explicit NoiseModel(int64_t poly_degree)
      : m_sqrt_n(std::sqrt(static_cast<double>(poly_degree))),
        m_rescale_bound(std::sqrt(static_cast<double>(poly_degree) / 3.0) *
                        (3.0 + 8.0 * std::sqrt(static_cast<double>(poly_degree) / 2.0))) {}

  double encode_bound() const { return m_sqrt_n; }
  double fresh_bound() const { return 6.0 * kErrorStdDev * m_sqrt_n + m_sqrt_n; }
  double add_bound(double a, double b) const { return a + b; }
  double multiply_bound(double a, double scale_a, double b, double scale_b) const {
    return scale_b * a + scale_a * b + a * b;
  }
  double rescale_bound(double bound, double dropped_modulus) const {
    return bound / dropped_modulus + m_rescale_bound;
  }

 private:
  double m_sqrt_n;
  double m_rescale_bound;
};

//-----------------------------------------------------------------------------
// Opaque payload handles.
//-----------------------------------------------------------------------------

//! Encoded (unencrypted) payload at a level and scale; representation is
//! backend-specific.
class HEPlaintext {
 public:
  virtual ~HEPlaintext() = default;
  int level() const { return m_level; }
  double scale() const { return m_scale; }

 protected:
  HEPlaintext(int level, double scale) : m_level(level), m_scale(scale) {}
  int m_level;
  double m_scale;
};

//! Encrypted payload: size() ring elements at a level and scale.
class HECiphertext {
 public:
  virtual ~HECiphertext() = default;
  int level() const { return m_level; }
  double scale() const { return m_scale; }
  size_t size() const { return m_size; }
  const NoiseEstimate& noise() const { return m_noise; }

 protected:
  HECiphertext(int level, double scale, size_t size, NoiseEstimate noise)
      : m_level(level), m_scale(scale), m_size(size), m_noise(noise) {}
  int m_level;
  double m_scale;
  size_t m_size;
  NoiseEstimate m_noise;
};

using PlaintextPtr = std::shared_ptr<const HEPlaintext>;
using CiphertextPtr = std::shared_ptr<const HECiphertext>;

//-----------------------------------------------------------------------------
// Backend interface.
//-----------------------------------------------------------------------------

/*! \brief Scheme abstraction: primitive homomorphic operations plus
 * overridable compound kernels.
 *
 * Contracts shared by all implementations:
 *  - add/sub require equal levels and equal scales (1e-9 relative);
 *  - multiply and multiply_plain require level >= 1 and leave the result
 *    un-rescaled at scale s_a * s_b; callers accumulate products and invoke
 *    rescale() once (multiply_rescale composes the two for convenience);
 *  - rescale drops the top active modulus, dividing the scale by it;
 *  - mod_switch drops moduli down to `target_level` without touching scale;
 *  - every operation returns a fresh handle; handles are immutable and safe
 *    to share across threads.
 *
 * The weighted-sum hooks are the compute cores of the Dot / Convolution /
 * AvgPool kernels. The *_default implementations compose the primitives and
 * are always available; schemes may override the virtual hooks with fused
 * versions, which must agree with the defaults within scheme tolerance.
 */
class HEBackend {
 public:
  explicit HEBackend(ContextPtr context) : m_context(std::move(context)), m_noise(m_context->poly_degree()) {}
  virtual ~HEBackend() = default;

  const CryptoContext& context() const { return *m_context; }
  const ContextPtr& context_ptr() const { return m_context; }
  const NoiseModel& noise_model() const { return m_noise; }
  virtual std::string name() const = 0;

  //! Scale at which multiply operands should be encoded so that one rescale
  //! returns the product to the other operand's scale exactly.
  double operand_scale(int level) const {
    check(level >= 0 && level <= m_context->max_level(), errc::internal, "operand_scale: level out of range");
    return static_cast<double>(m_context->moduli()[static_cast<size_t>(level)].value());
  }

  // --- encoding and encryption ---------------------------------------------
  virtual PlaintextPtr encode(const std::vector<double>& values, int level, double scale) const = 0;
  //! Encode one value replicated across every slot (no transform needed).
  virtual PlaintextPtr encode_constant(double value, int level, double scale) const = 0;
  virtual std::vector<double> decode(const HEPlaintext& plain, int64_t count) const = 0;
  //! `seed` feeds the encryption randomness stream; any value is secure-shaped,
  //! fixed values make tests reproducible.
  virtual CiphertextPtr encrypt(const HEPlaintext& plain, uint64_t seed) const = 0;
  virtual CiphertextPtr encrypt_zero_at(int level, double scale, uint64_t seed) const = 0;
  virtual std::vector<double> decrypt(const HECiphertext& cipher, int64_t count) const = 0;

  // --- primitives -----------------------------------------------------------
  virtual CiphertextPtr add(const HECiphertext& a, const HECiphertext& b) const = 0;
  virtual CiphertextPtr sub(const HECiphertext& a, const HECiphertext& b) const = 0;
  virtual CiphertextPtr multiply(const HECiphertext& a, const HECiphertext& b) const = 0;
  virtual CiphertextPtr negate(const HECiphertext& a) const = 0;
  virtual CiphertextPtr add_plain(const HECiphertext& a, const HEPlaintext& b) const = 0;
  virtual CiphertextPtr sub_plain(const HECiphertext& a, const HEPlaintext& b) const = 0;
  virtual CiphertextPtr multiply_plain(const HECiphertext& a, const HEPlaintext& b) const = 0;
  virtual PlaintextPtr add_pp(const HEPlaintext& a, const HEPlaintext& b) const = 0;
  virtual PlaintextPtr sub_pp(const HEPlaintext& a, const HEPlaintext& b) const = 0;
  virtual PlaintextPtr multiply_pp(const HEPlaintext& a, const HEPlaintext& b) const = 0;
  virtual PlaintextPtr negate_p(const HEPlaintext& a) const = 0;

  // --- level and scale management -------------------------------------------
  virtual CiphertextPtr rescale(const HECiphertext& a) const = 0;
  virtual PlaintextPtr rescale_p(const HEPlaintext& a) const = 0;
  virtual CiphertextPtr mod_switch(const HECiphertext& a, int target_level) const = 0;
  virtual PlaintextPtr mod_switch_p(const HEPlaintext& a, int target_level) const = 0;

  //! Full multiply: product, relinearized where applicable, then rescaled.
  CiphertextPtr multiply_rescale(const HECiphertext& a, const HECiphertext& b) const {
    return rescale(*multiply(a, b));
  }
  CiphertextPtr multiply_plain_rescale(const HECiphertext& a, const HEPlaintext& b) const {
    return rescale(*multiply_plain(a, b));
  }

  // --- compound hooks ---------------------------------------------------------
  //! sum_i x_i * w_i followed by one rescale; plaintext weights.
  virtual CiphertextPtr weighted_sum(const std::vector<CiphertextPtr>& xs,
                                     const std::vector<PlaintextPtr>& ws) const {
    return weighted_sum_default(xs, ws);
  }
  //! sum_i x_i * w_i followed by one rescale; ciphertext weights.
  virtual CiphertextPtr weighted_sum_cipher(const std::vector<CiphertextPtr>& xs,
                                            const std::vector<CiphertextPtr>& ws) const {
    return weighted_sum_cipher_default(xs, ws);
  }
  //! Plaintext-only variant for fully unencrypted execution.
  virtual PlaintextPtr weighted_sum_plain(const std::vector<PlaintextPtr>& xs,
                                          const std::vector<PlaintextPtr>& ws) const {
    return weighted_sum_plain_default(xs, ws);
  }

  CiphertextPtr weighted_sum_default(const std::vector<CiphertextPtr>& xs,
                                     const std::vector<PlaintextPtr>& ws) const {
    check(!xs.empty() && xs.size() == ws.size(), errc::internal, "weighted sum needs matching non-empty operands");
    CiphertextPtr acc = multiply_plain(*xs[0], *ws[0]);
    for (size_t i = 1; i < xs.size(); ++i) acc = add(*acc, *multiply_plain(*xs[i], *ws[i]));
    return rescale(*acc);
  }

  CiphertextPtr weighted_sum_cipher_default(const std::vector<CiphertextPtr>& xs,
                                            const std::vector<CiphertextPtr>& ws) const {
    check(!xs.empty() && xs.size() == ws.size(), errc::internal, "weighted sum needs matching non-empty operands");
    CiphertextPtr acc = multiply(*xs[0], *ws[0]);
    for (size_t i = 1; i < xs.size(); ++i) acc = add(*acc, *multiply(*xs[i], *ws[i]));
    return rescale(*acc);
  }

  PlaintextPtr weighted_sum_plain_default(const std::vector<PlaintextPtr>& xs,
                                          const std::vector<PlaintextPtr>& ws) const {
    check(!xs.empty() && xs.size() == ws.size(), errc::internal, "weighted sum needs matching non-empty operands");
    PlaintextPtr acc = multiply_pp(*xs[0], *ws[0]);
    for (size_t i = 1; i < xs.size(); ++i) acc = add_pp(*acc, *multiply_pp(*xs[i], *ws[i]));
    return rescale_p(*acc);
  }

 protected:
  //! Shared precondition: equal levels.
  static void require_same_level(int a, int b, const char* op) {
    if (a != b)
      fail(errc::validation, std::string(op) + ": operand levels differ (" + std::to_string(a) + " vs " +
                                 std::to_string(b) + ")");
  }

  //! Shared precondition: scales equal within 1e-9 relative.
  static void require_same_scale(double a, double b, const char* op) {
    if (std::abs(a - b) > 1e-9 * std::max(std::abs(a), std::abs(b)))
      fail(errc::validation,
           std::string(op) + ": operand scales differ (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }

  //! Shared precondition: multiplies need one rescale of headroom.
  static void require_mul_headroom(int level) {
    if (level < 1) fail(errc::depth_exceeded, "multiplicative depth exceeded: no level left to rescale");
  }

  ContextPtr m_context;
  NoiseModel m_noise;
};

using BackendPtr = std::shared_ptr<const HEBackend>;

}  // namespace heg
