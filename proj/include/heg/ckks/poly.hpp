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
#include <vector>

#include "heg/common.hpp"
#include "heg/context.hpp"
#include "heg/ckks/ring.hpp"

namespace heg {
namespace ckks {

/*! \brief Polynomial in R_Q = Z_Q[X]/(X^N+1), stored residue-wise.
 *
 * `residues[i]` holds the image modulo the i-th context prime; level + 1
 * residues are active. `ntt_form` records whether each residue currently
 * lives in the evaluation (transform) domain or the coefficient domain.
 */
struct RnsPoly {
  int level = 0;
  bool ntt_form = false;
  std::vector<std::vector<uint64_t>> residues;

  size_t active() const { return residues.size(); }
};

inline RnsPoly make_poly(const CryptoContext& ctx, int level, bool ntt_form) {
  check(level >= 0 && level <= ctx.max_level(), errc::internal, "polynomial level out of range");
  RnsPoly p;
  p.level = level;
  p.ntt_form = ntt_form;
  p.residues.assign(static_cast<size_t>(level) + 1,
                    std::vector<uint64_t>(static_cast<size_t>(ctx.poly_degree()), 0));
  return p;
}

//! Map a signed integer to its residue in [0, q).
inline uint64_t lift_signed(int64_t v, const Modulus& q) {
  int64_t r = v % static_cast<int64_t>(q.value());
  if (r < 0) r += static_cast<int64_t>(q.value());
  return static_cast<uint64_t>(r);
}

inline void poly_to_ntt(const CryptoContext& ctx, RnsPoly& p) {
  if (p.ntt_form) return;
  for (size_t i = 0; i < p.active(); ++i) ctx.tables(i).forward(p.residues[i].data());
  p.ntt_form = true;
}

inline void poly_to_coeff(const CryptoContext& ctx, RnsPoly& p) {
  if (!p.ntt_form) return;
  for (size_t i = 0; i < p.active(); ++i) ctx.tables(i).inverse(p.residues[i].data());
  p.ntt_form = false;
}

//! Copy of `p` converted to the coefficient domain (for serialization).
inline RnsPoly poly_copy_coeff(const CryptoContext& ctx, const RnsPoly& p) {
  RnsPoly out = p;
  poly_to_coeff(ctx, out);
  return out;
}

namespace detail {
inline void require_binary_compatible(const RnsPoly& a, const RnsPoly& b) {
  check(a.level == b.level, errc::internal, "polynomial levels differ");
  check(a.ntt_form == b.ntt_form, errc::internal, "polynomial domains differ");
  check(a.active() == b.active(), errc::internal, "polynomial residue counts differ");
}
}  // namespace detail

inline RnsPoly poly_add(const CryptoContext& ctx, const RnsPoly& a, const RnsPoly& b) {
  detail::require_binary_compatible(a, b);
  RnsPoly out = a;
  for (size_t i = 0; i < out.active(); ++i) {
    const Modulus& q = ctx.moduli()[i];
    uint64_t* o = out.residues[i].data();
    const uint64_t* y = b.residues[i].data();
    for (int64_t k = 0; k < ctx.poly_degree(); ++k) o[k] = q.add(o[k], y[k]);
  }
  return out;
}

inline RnsPoly poly_sub(const CryptoContext& ctx, const RnsPoly& a, const RnsPoly& b) {
  detail::require_binary_compatible(a, b);
  RnsPoly out = a;
  for (size_t i = 0; i < out.active(); ++i) {
    const Modulus& q = ctx.moduli()[i];
    uint64_t* o = out.residues[i].data();
    const uint64_t* y = b.residues[i].data();
    for (int64_t k = 0; k < ctx.poly_degree(); ++k) o[k] = q.sub(o[k], y[k]);
  }
  return out;
}

inline RnsPoly poly_negate(const CryptoContext& ctx, const RnsPoly& a) {
  RnsPoly out = a;
  for (size_t i = 0; i < out.active(); ++i) {
    const Modulus& q = ctx.moduli()[i];
    uint64_t* o = out.residues[i].data();
    for (int64_t k = 0; k < ctx.poly_degree(); ++k) o[k] = q.negate(o[k]);
  }
  return out;
}

/*! \brief Ring product. In the transform domain this is one pointwise pass;
 * in the coefficient domain it falls back to the quadratic negacyclic
 * convolution (the oracle path, selected by backends running with the
 * schoolbook flag).
 */
inline RnsPoly poly_mul(const CryptoContext& ctx, const RnsPoly& a, const RnsPoly& b) {
  detail::require_binary_compatible(a, b);
  RnsPoly out = a;
  if (a.ntt_form) {
    for (size_t i = 0; i < out.active(); ++i) {
      const Modulus& q = ctx.moduli()[i];
      uint64_t* o = out.residues[i].data();
      const uint64_t* y = b.residues[i].data();
      for (int64_t k = 0; k < ctx.poly_degree(); ++k) o[k] = q.mul(o[k], y[k]);
    }
  } else {
    for (size_t i = 0; i < out.active(); ++i) {
      out.residues[i] = negacyclic_mul_schoolbook(a.residues[i], b.residues[i], ctx.moduli()[i]);
    }
  }
  return out;
}

inline void poly_add_inplace(const CryptoContext& ctx, RnsPoly& acc, const RnsPoly& b) {
  detail::require_binary_compatible(acc, b);
  for (size_t i = 0; i < acc.active(); ++i) {
    const Modulus& q = ctx.moduli()[i];
    uint64_t* o = acc.residues[i].data();
    const uint64_t* y = b.residues[i].data();
    for (int64_t k = 0; k < ctx.poly_degree(); ++k) o[k] = q.add(o[k], y[k]);
  }
}

//! acc += x * w without intermediate allocations (transform domain only;
//! the coefficient domain composes poly_mul + poly_add_inplace).
inline void poly_mul_acc(const CryptoContext& ctx, const RnsPoly& x, const RnsPoly& w, RnsPoly& acc) {
  detail::require_binary_compatible(x, w);
  if (!x.ntt_form) {
    poly_add_inplace(ctx, acc, poly_mul(ctx, x, w));
    return;
  }
  detail::require_binary_compatible(x, acc);
  for (size_t i = 0; i < acc.active(); ++i) {
    const Modulus& q = ctx.moduli()[i];
    uint64_t* o = acc.residues[i].data();
    const uint64_t* a = x.residues[i].data();
    const uint64_t* b = w.residues[i].data();
    for (int64_t k = 0; k < ctx.poly_degree(); ++k) o[k] = q.add(o[k], q.mul(a[k], b[k]));
  }
}

//! Multiply every residue by a per-residue scalar (Shoup-accelerated).
inline void poly_scalar_mul_inplace(const CryptoContext& ctx, RnsPoly& p, const std::vector<uint64_t>& scalars) {
  check(scalars.size() >= p.active(), errc::internal, "scalar vector shorter than residue count");
  for (size_t i = 0; i < p.active(); ++i) {
    const Modulus& q = ctx.moduli()[i];
    const uint64_t w = scalars[i];
    const uint64_t w_shoup = q.shoup(w);
    uint64_t* o = p.residues[i].data();
    for (int64_t k = 0; k < ctx.poly_degree(); ++k) o[k] = q.mul_shoup(o[k], w, w_shoup);
  }
}

/*! \brief Drop the top active modulus with rounding: divide by q_top.
 *
 * The top residue is lifted centered, its image is subtracted from every
 * remaining residue, and the result is multiplied by q_top^{-1} mod q_j.
 * Works in either domain; the centered lift happens in coefficient space.
 */
inline RnsPoly poly_rescale(const CryptoContext& ctx, const RnsPoly& a) {
  check(a.level >= 1, errc::internal, "rescale needs at least two active moduli");
  const size_t t = a.active() - 1;
  const Modulus& qt = ctx.moduli()[t];
  const int64_t n = ctx.poly_degree();

  // Centered lift of the dropped residue, in coefficient space.
  std::vector<uint64_t> top = a.residues[t];
  if (a.ntt_form) ctx.tables(t).inverse(top.data());
  std::vector<int64_t> centered(static_cast<size_t>(n));
  const uint64_t half = qt.value() / 2;
  for (int64_t k = 0; k < n; ++k) {
    uint64_t c = top[static_cast<size_t>(k)];
    centered[static_cast<size_t>(k)] =
        c > half ? static_cast<int64_t>(c) - static_cast<int64_t>(qt.value()) : static_cast<int64_t>(c);
  }

  RnsPoly out;
  out.level = a.level - 1;
  out.ntt_form = a.ntt_form;
  out.residues.resize(t);
  std::vector<uint64_t> correction(static_cast<size_t>(n));
  for (size_t j = 0; j < t; ++j) {
    const Modulus& qj = ctx.moduli()[j];
    for (int64_t k = 0; k < n; ++k)
      correction[static_cast<size_t>(k)] = lift_signed(centered[static_cast<size_t>(k)], qj);
    if (a.ntt_form) ctx.tables(j).forward(correction.data());
    const uint64_t inv_qt = qj.inv(qt.value() % qj.value());
    const uint64_t inv_qt_shoup = qj.shoup(inv_qt);
    std::vector<uint64_t>& o = out.residues[j];
    o.resize(static_cast<size_t>(n));
    const uint64_t* x = a.residues[j].data();
    for (int64_t k = 0; k < n; ++k) {
      uint64_t d = qj.sub(x[k], correction[static_cast<size_t>(k)]);
      o[static_cast<size_t>(k)] = qj.mul_shoup(d, inv_qt, inv_qt_shoup);
    }
  }
  return out;
}

//! Keep only the residues up to `target_level` (no scaling involved).
inline RnsPoly poly_drop_to(const CryptoContext& ctx, const RnsPoly& a, int target_level) {
  check(target_level >= 0 && target_level <= a.level, errc::internal, "modulus-switch target out of range");
  (void)ctx;
  RnsPoly out;
  out.level = target_level;
  out.ntt_form = a.ntt_form;
  out.residues.assign(a.residues.begin(), a.residues.begin() + target_level + 1);
  return out;
}

//-----------------------------------------------------------------------------
// Samplers. All return coefficient-domain polynomials; callers transform as
// needed. Each draws from a caller-provided stream so runs are reproducible.
//-----------------------------------------------------------------------------

//! Uniform element of R_Q (each residue coefficient uniform mod q_i).
inline RnsPoly sample_uniform(const CryptoContext& ctx, int level, Rng& rng, bool ntt_form) {
  RnsPoly p = make_poly(ctx, level, ntt_form);
  for (size_t i = 0; i < p.active(); ++i) {
    const uint64_t q = ctx.moduli()[i].value();
    for (auto& c : p.residues[i]) c = rng.uniform_int(q);
  }
  return p;
}

//! Ternary polynomial with coefficients in {-1, 0, 1}.
inline RnsPoly sample_ternary(const CryptoContext& ctx, int level, Rng& rng) {
  RnsPoly p = make_poly(ctx, level, /*ntt_form=*/false);
  const int64_t n = ctx.poly_degree();
  for (int64_t k = 0; k < n; ++k) {
    const int64_t v = static_cast<int64_t>(rng.uniform_int(3)) - 1;
    for (size_t i = 0; i < p.active(); ++i) p.residues[i][static_cast<size_t>(k)] = lift_signed(v, ctx.moduli()[i]);
  }
  return p;
}

//! Rounded centered Gaussian error polynomial with deviation `sigma`.
inline RnsPoly sample_gaussian(const CryptoContext& ctx, int level, double sigma, Rng& rng) {
  RnsPoly p = make_poly(ctx, level, /*ntt_form=*/false);
  const int64_t n = ctx.poly_degree();
  for (int64_t k = 0; k < n; ++k) {
    const int64_t v = static_cast<int64_t>(std::llround(rng.gaussian() * sigma));
    for (size_t i = 0; i < p.active(); ++i) p.residues[i][static_cast<size_t>(k)] = lift_signed(v, ctx.moduli()[i]);
  }
  return p;
}

}  // namespace ckks
}  // namespace heg
