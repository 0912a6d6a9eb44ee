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
#include <set>
#include <vector>

#include "heg/common.hpp"

namespace heg::ckks {

//-----------------------------------------------------------------------------
// Word-sized modular arithmetic.
//-----------------------------------------------------------------------------

/*! \brief A prime modulus below 2^62 with precomputed Barrett constants.
 *
 * The Barrett ratio is floor(2^128 / q) stored as two 64-bit words, which
 * reduces any 124-bit product with one 64x64 multiply tree and a single
 * conditional subtraction.
 */
class Modulus {
 public:
  Modulus() = default;

  explicit Modulus(uint64_t value) : m_value(value) {
    check(value >= 3 && value < (uint64_t{1} << 62), errc::validation, "modulus must lie in [3, 2^62)");
    unsigned __int128 two_to_64 = static_cast<unsigned __int128>(1) << 64;
    m_ratio_hi = static_cast<uint64_t>(two_to_64 / value);
    uint64_t rem = static_cast<uint64_t>(two_to_64 % value);
    m_ratio_lo = static_cast<uint64_t>((static_cast<unsigned __int128>(rem) << 64) / value);
  }

  uint64_t value() const { return m_value; }

  //! Reduce z (< 2^124) modulo q.
  uint64_t reduce(unsigned __int128 z) const {
    uint64_t z0 = static_cast<uint64_t>(z);
    uint64_t z1 = static_cast<uint64_t>(z >> 64);
    unsigned __int128 m0 = static_cast<unsigned __int128>(z0) * m_ratio_lo;
    unsigned __int128 m1 = static_cast<unsigned __int128>(z0) * m_ratio_hi;
    unsigned __int128 m2 = static_cast<unsigned __int128>(z1) * m_ratio_lo;
    unsigned __int128 m3 = static_cast<unsigned __int128>(z1) * m_ratio_hi;
    unsigned __int128 mid = (m0 >> 64) + static_cast<uint64_t>(m1) + static_cast<uint64_t>(m2);
    uint64_t quotient = static_cast<uint64_t>(m3 + (m1 >> 64) + (m2 >> 64) + (mid >> 64));
    uint64_t r = z0 - quotient * m_value;
    return r >= m_value ? r - m_value : r;
  }

  //! a + b mod q for a, b in [0, q).
  uint64_t add(uint64_t a, uint64_t b) const {
    uint64_t s = a + b;
    return s >= m_value ? s - m_value : s;
  }

  //! a - b mod q for a, b in [0, q).
  uint64_t sub(uint64_t a, uint64_t b) const { return a >= b ? a - b : a + m_value - b; }

  uint64_t negate(uint64_t a) const { return a == 0 ? 0 : m_value - a; }

  uint64_t mul(uint64_t a, uint64_t b) const { return reduce(static_cast<unsigned __int128>(a) * b); }

  uint64_t pow(uint64_t base, uint64_t exponent) const {
    uint64_t result = 1;
    uint64_t cur = base >= m_value ? base % m_value : base;
    while (exponent != 0) {
      if (exponent & 1) result = mul(result, cur);
      cur = mul(cur, cur);
      exponent >>= 1;
    }
    return result;
  }

  //! Multiplicative inverse; q must be prime and a nonzero.
  uint64_t inv(uint64_t a) const {
    check(a % m_value != 0, errc::internal, "zero has no modular inverse");
    return pow(a, m_value - 2);
  }

  //! Precompute floor(w * 2^64 / q) for repeated multiplication by w.
  uint64_t shoup(uint64_t w) const { return static_cast<uint64_t>((static_cast<unsigned __int128>(w) << 64) / m_value); }

  //! x * w mod q using a precomputed Shoup constant for w.
  uint64_t mul_shoup(uint64_t x, uint64_t w, uint64_t w_shoup) const {
    uint64_t hi = static_cast<uint64_t>((static_cast<unsigned __int128>(x) * w_shoup) >> 64);
    uint64_t r = x * w - hi * m_value;
    return r >= m_value ? r - m_value : r;
  }

  bool operator==(const Modulus& other) const { return m_value == other.m_value; }

 private:
  uint64_t m_value = 0;
  uint64_t m_ratio_hi = 0;
  uint64_t m_ratio_lo = 0;
};

//-----------------------------------------------------------------------------
// Primality and prime generation.
//-----------------------------------------------------------------------------

namespace detail {

inline uint64_t mul_mod_u64(uint64_t a, uint64_t b, uint64_t m) {
  return static_cast<uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline uint64_t pow_mod_u64(uint64_t base, uint64_t exponent, uint64_t m) {
  uint64_t result = 1;
  base %= m;
  while (exponent != 0) {
    if (exponent & 1) result = mul_mod_u64(result, base, m);
    base = mul_mod_u64(base, base, m);
    exponent >>= 1;
  }
  return result;
}

}  // namespace detail

//! Deterministic Miller-Rabin; exact for every 64-bit integer.
inline bool is_prime_u64(uint64_t n) {
  if (n < 2) return false;
  for (uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    if (n == p) return true;
    if (n % p == 0) return false;
  }
  uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (uint64_t base : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull, 29ull, 31ull, 37ull}) {
    uint64_t x = detail::pow_mod_u64(base, d, n);
    if (x == 1 || x == n - 1) continue;
    bool witness = true;
    for (int i = 1; i < s; ++i) {
      x = detail::mul_mod_u64(x, x, n);
      if (x == n - 1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

/*! \brief Generate distinct primes congruent to 1 mod 2n, one per requested
 * bit size, scanning downward from 2^bits - 1.
 *
 * The congruence guarantees a primitive 2n-th root of unity exists, which the
 * negacyclic transform below requires.
 */
inline std::vector<uint64_t> generate_ntt_primes(size_t n, const std::vector<int>& bit_sizes) {
  check(n >= 4 && (n & (n - 1)) == 0, errc::validation, "transform size must be a power of two, at least 4");
  std::vector<uint64_t> primes;
  std::set<uint64_t> used;
  uint64_t step = 2 * static_cast<uint64_t>(n);
  for (int bits : bit_sizes) {
    check(bits >= 20 && bits <= 60, errc::validation, "coefficient modulus bit sizes must lie in [20, 60]");
    uint64_t top = uint64_t{1} << bits;
    uint64_t floor_bound = uint64_t{1} << (bits - 1);
    uint64_t k = (top - 2) / step;
    bool found = false;
    for (; k >= 1; --k) {
      uint64_t candidate = k * step + 1;
      if (candidate < floor_bound) break;
      if (used.count(candidate) || !is_prime_u64(candidate)) continue;
      primes.push_back(candidate);
      used.insert(candidate);
      found = true;
      break;
    }
    if (!found)
      fail(errc::validation, "no unused " + std::to_string(bits) + "-bit prime supports transform size " +
                                 std::to_string(n));
  }
  return primes;
}

//-----------------------------------------------------------------------------
// Negacyclic number-theoretic transform.
//-----------------------------------------------------------------------------

namespace detail {

inline size_t bit_reverse(size_t x, int log_n) {
  size_t r = 0;
  for (int i = 0; i < log_n; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

}  // namespace detail

/*! \brief Twiddle tables for the size-n negacyclic transform modulo one prime.
 *
 * forward() maps coefficients of Z_q[X]/(X^n + 1) into the evaluation domain
 * (output in bit-reversed order); inverse() maps back. Pointwise products in
 * the evaluation domain equal negacyclic convolutions of coefficients.
 */
class NttTables {
 public:
  NttTables(const Modulus& q, size_t n) : m_q(q), m_n(n) {
    check(n >= 4 && (n & (n - 1)) == 0, errc::validation, "transform size must be a power of two, at least 4");
    check((q.value() - 1) % (2 * n) == 0, errc::validation, "modulus does not admit a primitive 2n-th root of unity");
    int log_n = 0;
    while ((size_t{1} << log_n) < n) ++log_n;

    // psi = h^((q-1)/2n) is a primitive 2n-th root iff psi^n = -1.
    uint64_t exponent = (q.value() - 1) / (2 * static_cast<uint64_t>(n));
    uint64_t psi = 0;
    for (uint64_t h = 2;; ++h) {
      uint64_t g = q.pow(h, exponent);
      if (q.pow(g, static_cast<uint64_t>(n)) == q.value() - 1) {
        psi = g;
        break;
      }
    }
    uint64_t psi_inv = q.inv(psi);

    m_psi_brv.resize(n);
    m_psi_brv_shoup.resize(n);
    m_ipsi_brv.resize(n);
    m_ipsi_brv_shoup.resize(n);
    uint64_t fwd = 1, bwd = 1;
    for (size_t j = 0; j < n; ++j) {
      size_t r = detail::bit_reverse(j, log_n);
      m_psi_brv[r] = fwd;
      m_psi_brv_shoup[r] = q.shoup(fwd);
      m_ipsi_brv[r] = bwd;
      m_ipsi_brv_shoup[r] = q.shoup(bwd);
      fwd = q.mul(fwd, psi);
      bwd = q.mul(bwd, psi_inv);
    }
    m_n_inv = q.inv(static_cast<uint64_t>(n) % q.value());
    m_n_inv_shoup = q.shoup(m_n_inv);
  }

  const Modulus& modulus() const { return m_q; }
  size_t size() const { return m_n; }

  //! In-place forward transform; input in standard coefficient order.
  void forward(uint64_t* a) const {
    size_t t = m_n;
    for (size_t m = 1; m < m_n; m <<= 1) {
      t >>= 1;
      for (size_t i = 0; i < m; ++i) {
        uint64_t w = m_psi_brv[m + i];
        uint64_t ws = m_psi_brv_shoup[m + i];
        size_t j1 = 2 * i * t;
        for (size_t j = j1; j < j1 + t; ++j) {
          uint64_t u = a[j];
          uint64_t v = m_q.mul_shoup(a[j + t], w, ws);
          a[j] = m_q.add(u, v);
          a[j + t] = m_q.sub(u, v);
        }
      }
    }
  }

  //! In-place inverse transform; returns standard coefficient order.
  void inverse(uint64_t* a) const {
    size_t t = 1;
    for (size_t m = m_n; m > 1; m >>= 1) {
      size_t j1 = 0;
      size_t h = m >> 1;
      for (size_t i = 0; i < h; ++i) {
        uint64_t w = m_ipsi_brv[h + i];
        uint64_t ws = m_ipsi_brv_shoup[h + i];
        for (size_t j = j1; j < j1 + t; ++j) {
          uint64_t u = a[j];
          uint64_t v = a[j + t];
          a[j] = m_q.add(u, v);
          a[j + t] = m_q.mul_shoup(m_q.sub(u, v), w, ws);
        }
        j1 += 2 * t;
      }
      t <<= 1;
    }
    for (size_t j = 0; j < m_n; ++j) a[j] = m_q.mul_shoup(a[j], m_n_inv, m_n_inv_shoup);
  }

 private:
  Modulus m_q;
  size_t m_n = 0;
  std::vector<uint64_t> m_psi_brv, m_psi_brv_shoup;
  std::vector<uint64_t> m_ipsi_brv, m_ipsi_brv_shoup;
  uint64_t m_n_inv = 0, m_n_inv_shoup = 0;
};

//! Negacyclic product via the transform: INTT(NTT(a) . NTT(b)).
inline std::vector<uint64_t> negacyclic_mul_ntt(std::vector<uint64_t> a, std::vector<uint64_t> b,
                                                const NttTables& tables) {
  check(a.size() == tables.size() && b.size() == tables.size(), errc::internal, "operand length must match transform size");
  tables.forward(a.data());
  tables.forward(b.data());
  const Modulus& q = tables.modulus();
  for (size_t i = 0; i < a.size(); ++i) a[i] = q.mul(a[i], b[i]);
  tables.inverse(a.data());
  return a;
}

/*! \brief Reference negacyclic product in Z_q[X]/(X^n + 1), computed term by
 * term in O(n^2); the oracle the transform path is checked against.
 */
inline std::vector<uint64_t> negacyclic_mul_schoolbook(const std::vector<uint64_t>& a,
                                                       const std::vector<uint64_t>& b, const Modulus& q) {
  check(a.size() == b.size(), errc::internal, "operands must have equal length");
  size_t n = a.size();
  std::vector<uint64_t> c(n, 0);
  for (size_t i = 0; i < n; ++i) {
    if (a[i] == 0) continue;
    for (size_t j = 0; j < n; ++j) {
      uint64_t prod = q.mul(a[i], b[j]);
      size_t k = i + j;
      if (k < n)
        c[k] = q.add(c[k], prod);
      else
        c[k - n] = q.sub(c[k - n], prod);
    }
  }
  return c;
}

//-----------------------------------------------------------------------------
// Multiword integers for residue-system reconstruction.
//-----------------------------------------------------------------------------

//! Unsigned little-endian multiword integer, sized at construction.
struct WideInt {
  std::vector<uint64_t> limbs;

  explicit WideInt(size_t nlimbs) : limbs(nlimbs, 0) {}

  static WideInt from_u64(uint64_t v, size_t nlimbs) {
    WideInt w(nlimbs);
    w.limbs[0] = v;
    return w;
  }

  //! this *= scalar; fails on overflow past the fixed width.
  void mul_u64(uint64_t scalar) {
    unsigned __int128 carry = 0;
    for (uint64_t& limb : limbs) {
      unsigned __int128 cur = static_cast<unsigned __int128>(limb) * scalar + carry;
      limb = static_cast<uint64_t>(cur);
      carry = cur >> 64;
    }
    check(carry == 0, errc::internal, "multiword overflow");
  }

  //! this += other * scalar; fails on overflow past the fixed width.
  void add_scaled(const WideInt& other, uint64_t scalar) {
    unsigned __int128 carry = 0;
    for (size_t i = 0; i < limbs.size(); ++i) {
      uint64_t o = i < other.limbs.size() ? other.limbs[i] : 0;
      unsigned __int128 cur = static_cast<unsigned __int128>(o) * scalar + limbs[i] + carry;
      limbs[i] = static_cast<uint64_t>(cur);
      carry = cur >> 64;
    }
    check(carry == 0, errc::internal, "multiword overflow");
  }

  //! -1, 0, +1 as this compares to other (widths may differ).
  int compare(const WideInt& other) const {
    size_t width = std::max(limbs.size(), other.limbs.size());
    for (size_t i = width; i-- > 0;) {
      uint64_t a = i < limbs.size() ? limbs[i] : 0;
      uint64_t b = i < other.limbs.size() ? other.limbs[i] : 0;
      if (a != b) return a < b ? -1 : 1;
    }
    return 0;
  }

  //! this -= other; requires this >= other.
  void subtract(const WideInt& other) {
    check(compare(other) >= 0, errc::internal, "multiword subtraction would underflow");
    uint64_t borrow = 0;
    for (size_t i = 0; i < limbs.size(); ++i) {
      uint64_t o = i < other.limbs.size() ? other.limbs[i] : 0;
      uint64_t before = limbs[i];
      uint64_t after = before - o - borrow;
      borrow = (before < o || (borrow && before == o)) ? 1 : 0;
      limbs[i] = after;
    }
  }

  WideInt shifted_right_one() const {
    WideInt out(limbs.size());
    for (size_t i = 0; i < limbs.size(); ++i) {
      out.limbs[i] = limbs[i] >> 1;
      if (i + 1 < limbs.size()) out.limbs[i] |= limbs[i + 1] << 63;
    }
    return out;
  }

  //! Reduce modulo a word-sized modulus.
  uint64_t mod_u64(const Modulus& q) const {
    uint64_t r = 0;
    for (size_t i = limbs.size(); i-- > 0;)
      r = static_cast<uint64_t>(((static_cast<unsigned __int128>(r) << 64) | limbs[i]) % q.value());
    return r;
  }

  double to_double() const {
    double result = 0.0;
    for (size_t i = limbs.size(); i-- > 0;) result = result * 18446744073709551616.0 + static_cast<double>(limbs[i]);
    return result;
  }
};

/*! \brief Rebuild centered values from their residues across a prime set.
 *
 * Built once per active prime prefix; to_centered_double maps residues
 * (x mod q_0, ..., x mod q_k) back to the signed representative of x in
 * (-Q/2, Q/2] as a double.
 */
class CrtReconstructor {
 public:
  explicit CrtReconstructor(const std::vector<Modulus>& moduli)
      : m_moduli(moduli), m_width(moduli.size() + 1), m_total(m_width), m_half(m_width) {
    check(!moduli.empty(), errc::internal, "residue reconstruction needs at least one modulus");
    m_total = WideInt::from_u64(1, m_width);
    for (const Modulus& q : moduli) m_total.mul_u64(q.value());
    m_half = m_total.shifted_right_one();
    for (size_t i = 0; i < moduli.size(); ++i) {
      WideInt punctured = WideInt::from_u64(1, m_width);
      for (size_t j = 0; j < moduli.size(); ++j)
        if (j != i) punctured.mul_u64(moduli[j].value());
      uint64_t inv = moduli[i].inv(punctured.mod_u64(moduli[i]));
      m_punctured.push_back(std::move(punctured));
      m_punctured_inv.push_back(inv);
    }
  }

  size_t modulus_count() const { return m_moduli.size(); }

  //! residues[i] = x mod q_i; returns the centered representative of x.
  double to_centered_double(const std::vector<uint64_t>& residues) const {
    check(residues.size() == m_moduli.size(), errc::internal, "residue count must match modulus count");
    WideInt acc(m_width);
    for (size_t i = 0; i < residues.size(); ++i)
      acc.add_scaled(m_punctured[i], m_moduli[i].mul(residues[i], m_punctured_inv[i]));
    while (acc.compare(m_total) >= 0) acc.subtract(m_total);
    if (acc.compare(m_half) > 0) {
      WideInt neg = m_total;
      neg.subtract(acc);
      return -neg.to_double();
    }
    return acc.to_double();
  }

 private:
  std::vector<Modulus> m_moduli;
  size_t m_width;
  WideInt m_total;
  WideInt m_half;
  std::vector<WideInt> m_punctured;
  std::vector<uint64_t> m_punctured_inv;
};

}  // namespace heg::ckks
