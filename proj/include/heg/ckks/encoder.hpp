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
#include <complex>
#include <cstdint>
#include <vector>

#include "heg/common.hpp"

namespace heg {
namespace ckks {

/*! \brief Real slot packing via the canonical embedding.
 *
 * A real vector z of up to N/2 slots maps to the unique real polynomial p of
 * degree < N with p(nu_m) = z_m at the primitive 2N-th roots
 * nu_m = exp(i*pi*(2m+1)/N). Products of polynomials mod X^N + 1 therefore
 * multiply slot-wise. Using
 *     p_k = (2/N) * Re( exp(-i*pi*k/N) * DFT_N(z)_k )
 * both directions reduce to one length-N radix-2 transform.
 */
class SlotEncoder {
 public:
  explicit SlotEncoder(int64_t poly_degree) : m_n(poly_degree) {
    check(m_n >= 2 && (m_n & (m_n - 1)) == 0, errc::internal, "slot encoder needs a power-of-two degree");
    const size_t n = static_cast<size_t>(m_n);
    m_roots.resize(n);
    m_half_roots.resize(n);
    const double pi = std::acos(-1.0);
    for (size_t j = 0; j < n; ++j) {
      const double a = -2.0 * pi * static_cast<double>(j) / static_cast<double>(m_n);
      m_roots[j] = {std::cos(a), std::sin(a)};
      const double h = -pi * static_cast<double>(j) / static_cast<double>(m_n);
      m_half_roots[j] = {std::cos(h), std::sin(h)};
    }
    m_rev.resize(n);
    int log_n = 0;
    while ((int64_t{1} << log_n) < m_n) ++log_n;
    for (size_t j = 0; j < n; ++j) {
      size_t r = 0;
      for (int b = 0; b < log_n; ++b) r |= ((j >> b) & 1u) << (log_n - 1 - b);
      m_rev[j] = r;
    }
  }

  int64_t slot_count() const { return m_n / 2; }

  //! Coefficients (unscaled doubles) of the real polynomial interpolating
  //! `values` at the embedding points.
  std::vector<double> values_to_coeffs(const std::vector<double>& values) const {
    check(static_cast<int64_t>(values.size()) <= slot_count(), errc::capacity,
          "payload exceeds the available slot capacity");
    std::vector<std::complex<double>> a(static_cast<size_t>(m_n), {0.0, 0.0});
    for (size_t m = 0; m < values.size(); ++m) a[m] = {values[m], 0.0};
    fft(a, /*conjugate=*/false);
    std::vector<double> coeffs(static_cast<size_t>(m_n));
    const double norm = 2.0 / static_cast<double>(m_n);
    for (size_t k = 0; k < coeffs.size(); ++k) coeffs[k] = norm * (m_half_roots[k] * a[k]).real();
    return coeffs;
  }

  //! Evaluate the polynomial with the given coefficients at the first `count`
  //! embedding points.
  std::vector<double> coeffs_to_values(const std::vector<double>& coeffs, int64_t count) const {
    check(static_cast<int64_t>(coeffs.size()) == m_n, errc::internal, "coefficient vector has the wrong length");
    check(count >= 0 && count <= slot_count(), errc::capacity, "requested more slots than the ring provides");
    std::vector<std::complex<double>> b(static_cast<size_t>(m_n));
    for (size_t k = 0; k < b.size(); ++k) b[k] = coeffs[k] * std::conj(m_half_roots[k]);
    fft(b, /*conjugate=*/true);
    std::vector<double> values(static_cast<size_t>(count));
    for (size_t m = 0; m < values.size(); ++m) values[m] = b[m].real();
    return values;
  }

 private:
  void fft(std::vector<std::complex<double>>& a, bool conjugate) const {
    const size_t n = a.size();
    for (size_t j = 0; j < n; ++j)
      if (m_rev[j] > j) std::swap(a[j], a[m_rev[j]]);
    for (size_t len = 2; len <= n; len <<= 1) {
      const size_t step = n / len;
      for (size_t start = 0; start < n; start += len) {
        for (size_t j = 0; j < len / 2; ++j) {
          std::complex<double> w = m_roots[j * step];
          if (conjugate) w = std::conj(w);
          const std::complex<double> u = a[start + j];
          const std::complex<double> v = a[start + j + len / 2] * w;
          a[start + j] = u + v;
          a[start + j + len / 2] = u - v;
        }
      }
    }
  }

  int64_t m_n;
  std::vector<std::complex<double>> m_roots;
  std::vector<std::complex<double>> m_half_roots;
  std::vector<size_t> m_rev;
};

}  // namespace ckks
}  // namespace heg
