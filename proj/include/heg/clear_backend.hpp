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
#include <utility>
#include <vector>

#include "heg/backend.hpp"
#include "heg/common.hpp"
#include "heg/context.hpp"

namespace heg {

class ClearPlaintext final : public HEPlaintext {
 public:
  ClearPlaintext(int level, double scale, std::vector<double> values)
      : HEPlaintext(level, scale), m_values(std::move(values)) {}
  const std::vector<double>& values() const { return m_values; }

 private:
  std::vector<double> m_values;
};

class ClearCiphertext final : public HECiphertext {
 public:
  ClearCiphertext(int level, double scale, std::vector<double> values, NoiseEstimate noise)
      : HECiphertext(level, scale, /*size=*/2, noise), m_values(std::move(values)) {}
  const std::vector<double>& values() const { return m_values; }

 private:
  std::vector<double> m_values;
};

/*! \brief Bookkeeping backend: payloads are exact doubles, but level and
 * scale management, preconditions, and error behaviour mirror the
 * homomorphic scheme operation for operation. Useful for debugging graphs
 * and for bit-exact oracles in tests.
 *
 * A size-1 payload denotes a value replicated across every slot (the way an
 * encoded constant behaves); binary operations broadcast it.
 */
class ClearBackend final : public HEBackend {
 public:
  explicit ClearBackend(ContextPtr context) : HEBackend(std::move(context)) {
    check(m_context->is_clear(), errc::validation, "this backend requires the clear scheme context");
  }

  std::string name() const override { return "clear"; }

  // --- encoding and encryption ---------------------------------------------

  PlaintextPtr encode(const std::vector<double>& values, int level, double scale) const override {
    require_level_in_range(level);
    check(scale > 0.0, errc::validation, "encoding scale must be positive");
    check(static_cast<int64_t>(values.size()) <= m_context->slot_count(), errc::capacity,
          "payload exceeds the available slot capacity");
    return std::make_shared<ClearPlaintext>(level, scale, values);
  }

  PlaintextPtr encode_constant(double value, int level, double scale) const override {
    require_level_in_range(level);
    check(scale > 0.0, errc::validation, "encoding scale must be positive");
    return std::make_shared<ClearPlaintext>(level, scale, std::vector<double>{value});
  }

  std::vector<double> decode(const HEPlaintext& plain, int64_t count) const override {
    return first_values(as_pt(plain).values(), count);
  }

  CiphertextPtr encrypt(const HEPlaintext& plain, uint64_t) const override {
    const ClearPlaintext& p = as_pt(plain);
    return std::make_shared<ClearCiphertext>(p.level(), p.scale(), p.values(),
                                             NoiseEstimate{m_noise.fresh_bound()});
  }

  CiphertextPtr encrypt_zero_at(int level, double scale, uint64_t) const override {
    require_level_in_range(level);
    check(scale > 0.0, errc::validation, "ciphertext scale must be positive");
    return std::make_shared<ClearCiphertext>(level, scale, std::vector<double>{0.0},
                                             NoiseEstimate{m_noise.fresh_bound()});
  }

  std::vector<double> decrypt(const HECiphertext& cipher, int64_t count) const override {
    return first_values(as_ct(cipher).values(), count);
  }

  // --- primitives ------------------------------------------------------------

  CiphertextPtr add(const HECiphertext& a, const HECiphertext& b) const override {
    const ClearCiphertext& x = as_ct(a);
    const ClearCiphertext& y = as_ct(b);
    require_same_level(x.level(), y.level(), "add");
    require_same_scale(x.scale(), y.scale(), "add");
    return std::make_shared<ClearCiphertext>(x.level(), x.scale(),
                                             combine(x.values(), y.values(), [](double p, double q) { return p + q; }),
                                             NoiseEstimate{m_noise.add_bound(x.noise().bound, y.noise().bound)});
  }

  CiphertextPtr sub(const HECiphertext& a, const HECiphertext& b) const override {
    const ClearCiphertext& x = as_ct(a);
    const ClearCiphertext& y = as_ct(b);
    require_same_level(x.level(), y.level(), "sub");
    require_same_scale(x.scale(), y.scale(), "sub");
    return std::make_shared<ClearCiphertext>(x.level(), x.scale(),
                                             combine(x.values(), y.values(), [](double p, double q) { return p - q; }),
                                             NoiseEstimate{m_noise.add_bound(x.noise().bound, y.noise().bound)});
  }

  CiphertextPtr multiply(const HECiphertext& a, const HECiphertext& b) const override {
    const ClearCiphertext& x = as_ct(a);
    const ClearCiphertext& y = as_ct(b);
    require_same_level(x.level(), y.level(), "multiply");
    require_mul_headroom(x.level());
    const NoiseEstimate noise{m_noise.multiply_bound(x.noise().bound, x.scale(), y.noise().bound, y.scale())};
    return std::make_shared<ClearCiphertext>(
        x.level(), x.scale() * y.scale(),
        combine(x.values(), y.values(), [](double p, double q) { return p * q; }), noise);
  }

  CiphertextPtr negate(const HECiphertext& a) const override {
    const ClearCiphertext& x = as_ct(a);
    std::vector<double> v = x.values();
    for (double& e : v) e = -e;
    return std::make_shared<ClearCiphertext>(x.level(), x.scale(), std::move(v), x.noise());
  }

  CiphertextPtr add_plain(const HECiphertext& a, const HEPlaintext& b) const override {
    const ClearCiphertext& x = as_ct(a);
    const ClearPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "add_plain");
    require_same_scale(x.scale(), y.scale(), "add_plain");
    return std::make_shared<ClearCiphertext>(x.level(), x.scale(),
                                             combine(x.values(), y.values(), [](double p, double q) { return p + q; }),
                                             NoiseEstimate{m_noise.add_bound(x.noise().bound, m_noise.encode_bound())});
  }

  CiphertextPtr sub_plain(const HECiphertext& a, const HEPlaintext& b) const override {
    const ClearCiphertext& x = as_ct(a);
    const ClearPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "sub_plain");
    require_same_scale(x.scale(), y.scale(), "sub_plain");
    return std::make_shared<ClearCiphertext>(x.level(), x.scale(),
                                             combine(x.values(), y.values(), [](double p, double q) { return p - q; }),
                                             NoiseEstimate{m_noise.add_bound(x.noise().bound, m_noise.encode_bound())});
  }

  CiphertextPtr multiply_plain(const HECiphertext& a, const HEPlaintext& b) const override {
    const ClearCiphertext& x = as_ct(a);
    const ClearPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "multiply_plain");
    require_mul_headroom(x.level());
    const NoiseEstimate noise{
        m_noise.multiply_bound(x.noise().bound, x.scale(), m_noise.encode_bound(), y.scale())};
    return std::make_shared<ClearCiphertext>(
        x.level(), x.scale() * y.scale(),
        combine(x.values(), y.values(), [](double p, double q) { return p * q; }), noise);
  }

  PlaintextPtr add_pp(const HEPlaintext& a, const HEPlaintext& b) const override {
    const ClearPlaintext& x = as_pt(a);
    const ClearPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "add_plain");
    require_same_scale(x.scale(), y.scale(), "add_plain");
    return std::make_shared<ClearPlaintext>(x.level(), x.scale(),
                                            combine(x.values(), y.values(), [](double p, double q) { return p + q; }));
  }

  PlaintextPtr sub_pp(const HEPlaintext& a, const HEPlaintext& b) const override {
    const ClearPlaintext& x = as_pt(a);
    const ClearPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "sub_plain");
    require_same_scale(x.scale(), y.scale(), "sub_plain");
    return std::make_shared<ClearPlaintext>(x.level(), x.scale(),
                                            combine(x.values(), y.values(), [](double p, double q) { return p - q; }));
  }

  PlaintextPtr multiply_pp(const HEPlaintext& a, const HEPlaintext& b) const override {
    const ClearPlaintext& x = as_pt(a);
    const ClearPlaintext& y = as_pt(b);
    require_same_level(x.level(), y.level(), "multiply_plain");
    require_mul_headroom(x.level());
    return std::make_shared<ClearPlaintext>(x.level(), x.scale() * y.scale(),
                                            combine(x.values(), y.values(), [](double p, double q) { return p * q; }));
  }

  PlaintextPtr negate_p(const HEPlaintext& a) const override {
    const ClearPlaintext& x = as_pt(a);
    std::vector<double> v = x.values();
    for (double& e : v) e = -e;
    return std::make_shared<ClearPlaintext>(x.level(), x.scale(), std::move(v));
  }

  // --- level and scale management ---------------------------------------------

  CiphertextPtr rescale(const HECiphertext& a) const override {
    const ClearCiphertext& x = as_ct(a);
    require_mul_headroom(x.level());
    const double dropped = static_cast<double>(m_context->moduli()[static_cast<size_t>(x.level())].value());
    return std::make_shared<ClearCiphertext>(x.level() - 1, x.scale() / dropped, x.values(),
                                             NoiseEstimate{m_noise.rescale_bound(x.noise().bound, dropped)});
  }

  PlaintextPtr rescale_p(const HEPlaintext& a) const override {
    const ClearPlaintext& x = as_pt(a);
    require_mul_headroom(x.level());
    const double dropped = static_cast<double>(m_context->moduli()[static_cast<size_t>(x.level())].value());
    return std::make_shared<ClearPlaintext>(x.level() - 1, x.scale() / dropped, x.values());
  }

  CiphertextPtr mod_switch(const HECiphertext& a, int target_level) const override {
    const ClearCiphertext& x = as_ct(a);
    check(target_level >= 0 && target_level <= x.level(), errc::validation,
          "modulus switch cannot raise the level");
    return std::make_shared<ClearCiphertext>(target_level, x.scale(), x.values(), x.noise());
  }

  PlaintextPtr mod_switch_p(const HEPlaintext& a, int target_level) const override {
    const ClearPlaintext& x = as_pt(a);
    check(target_level >= 0 && target_level <= x.level(), errc::validation,
          "modulus switch cannot raise the level");
    return std::make_shared<ClearPlaintext>(target_level, x.scale(), x.values());
  }

  // --- fused compound kernel ----------------------------------------------------

  CiphertextPtr weighted_sum(const std::vector<CiphertextPtr>& xs,
                             const std::vector<PlaintextPtr>& ws) const override {
    check(!xs.empty() && xs.size() == ws.size(), errc::internal, "weighted sum needs matching non-empty operands");
    CiphertextPtr acc = multiply_plain(*xs[0], *ws[0]);
    for (size_t i = 1; i < xs.size(); ++i) acc = add(*acc, *multiply_plain(*xs[i], *ws[i]));
    return rescale(*acc);
  }

 private:
  static const ClearCiphertext& as_ct(const HECiphertext& c) {
    const auto* p = dynamic_cast<const ClearCiphertext*>(&c);
    check(p != nullptr, errc::internal, "ciphertext does not belong to this backend");
    return *p;
  }

  static const ClearPlaintext& as_pt(const HEPlaintext& p) {
    const auto* q = dynamic_cast<const ClearPlaintext*>(&p);
    check(q != nullptr, errc::internal, "plaintext does not belong to this backend");
    return *q;
  }

  void require_level_in_range(int level) const {
    check(level >= 0 && level <= m_context->max_level(), errc::validation, "level outside the modulus chain");
  }

  static std::vector<double> first_values(const std::vector<double>& v, int64_t count) {
    check(count >= 0, errc::validation, "negative slot count");
    std::vector<double> out(static_cast<size_t>(count));
    for (size_t i = 0; i < out.size(); ++i) out[i] = v.size() == 1 ? v[0] : (i < v.size() ? v[i] : 0.0);
    return out;
  }

  template <typename F>
  static std::vector<double> combine(const std::vector<double>& a, const std::vector<double>& b, F f) {
    if (a.size() == b.size()) {
      std::vector<double> out(a.size());
      for (size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
      return out;
    }
    if (a.size() == 1) {
      std::vector<double> out(b.size());
      for (size_t i = 0; i < out.size(); ++i) out[i] = f(a[0], b[i]);
      return out;
    }
    if (b.size() == 1) {
      std::vector<double> out(a.size());
      for (size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[0]);
      return out;
    }
    fail(errc::internal, "payload lengths differ");
  }
};

}  // namespace heg
