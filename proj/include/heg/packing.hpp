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
#include <string>
#include <vector>

#include "heg/backend.hpp"
#include "heg/common.hpp"
#include "heg/tensor.hpp"

namespace heg {

/*! \brief Tensor of payload handles under batch-axis packing.
 *
 * A batched tensor of shape (B, d1, ..., dk) stores one handle per non-batch
 * element; the B values of that element occupy the payload slots. Weight and
 * constant tensors are unbatched: one handle per element, each holding a
 * replicated scalar.
 */
template <typename Handle>
struct HandleTensor {
  TensorShape shape;
  bool batched = false;
  std::vector<Handle> elements;

  int64_t batch_extent() const { return batched && shape.rank() > 0 ? shape.dim(0) : 1; }
  int64_t element_count() const { return static_cast<int64_t>(elements.size()); }
};

using CipherTensor = HandleTensor<CiphertextPtr>;
using PlainTensor = HandleTensor<PlaintextPtr>;

namespace detail {
inline void require_batch_fits(const HEBackend& backend, int64_t batch) {
  check(batch <= backend.context().slot_count(), errc::capacity,
        "batch extent " + std::to_string(batch) + " exceeds the slot capacity " +
            std::to_string(backend.context().slot_count()));
}

//! Values of non-batch element `e` across the batch axis.
inline std::vector<double> batch_column(const Tensor& t, int64_t e) {
  const int64_t batch = t.shape().rank() == 0 ? 1 : t.shape().dim(0);
  const int64_t nonbatch = t.shape().element_count_nonbatch();
  std::vector<double> out(static_cast<size_t>(batch));
  for (int64_t b = 0; b < batch; ++b) out[static_cast<size_t>(b)] = t.values()[static_cast<size_t>(b * nonbatch + e)];
  return out;
}
}  // namespace detail

//! Encode a batched tensor: one plaintext per non-batch element.
inline PlainTensor pack_plain(const HEBackend& backend, const Tensor& t, int level, double scale,
                              unsigned threads = 1) {
  const int64_t nonbatch = t.shape().element_count_nonbatch();
  detail::require_batch_fits(backend, t.shape().rank() == 0 ? 1 : t.shape().dim(0));
  PlainTensor out;
  out.shape = t.shape();
  out.batched = true;
  out.elements.resize(static_cast<size_t>(nonbatch));
  parallel_for(nonbatch, threads, [&](int64_t begin, int64_t end) {
    for (int64_t e = begin; e < end; ++e)
      out.elements[static_cast<size_t>(e)] = backend.encode(detail::batch_column(t, e), level, scale);
  });
  return out;
}

//! Encode and encrypt a batched tensor. Per-element encryption seeds are
//! drawn sequentially from `seed_rng` so results do not depend on the thread
//! count.
inline CipherTensor pack_cipher(const HEBackend& backend, const Tensor& t, int level, double scale, Rng& seed_rng,
                                unsigned threads = 1) {
  const int64_t nonbatch = t.shape().element_count_nonbatch();
  detail::require_batch_fits(backend, t.shape().rank() == 0 ? 1 : t.shape().dim(0));
  std::vector<uint64_t> seeds(static_cast<size_t>(nonbatch));
  for (auto& s : seeds) s = seed_rng.next();
  CipherTensor out;
  out.shape = t.shape();
  out.batched = true;
  out.elements.resize(static_cast<size_t>(nonbatch));
  parallel_for(nonbatch, threads, [&](int64_t begin, int64_t end) {
    for (int64_t e = begin; e < end; ++e) {
      PlaintextPtr p = backend.encode(detail::batch_column(t, e), level, scale);
      out.elements[static_cast<size_t>(e)] = backend.encrypt(*p, seeds[static_cast<size_t>(e)]);
    }
  });
  return out;
}

inline Tensor unpack_plain(const HEBackend& backend, const PlainTensor& ht, unsigned threads = 1) {
  const int64_t batch = ht.batch_extent();
  const int64_t nonbatch = ht.element_count();
  Tensor out(ht.shape);
  parallel_for(nonbatch, threads, [&](int64_t begin, int64_t end) {
    for (int64_t e = begin; e < end; ++e) {
      const std::vector<double> column = backend.decode(*ht.elements[static_cast<size_t>(e)], batch);
      for (int64_t b = 0; b < batch; ++b) out.values()[static_cast<size_t>(b * nonbatch + e)] = column[static_cast<size_t>(b)];
    }
  });
  return out;
}

inline Tensor unpack_cipher(const HEBackend& backend, const CipherTensor& ht, unsigned threads = 1) {
  const int64_t batch = ht.batch_extent();
  const int64_t nonbatch = ht.element_count();
  Tensor out(ht.shape);
  parallel_for(nonbatch, threads, [&](int64_t begin, int64_t end) {
    for (int64_t e = begin; e < end; ++e) {
      const std::vector<double> column = backend.decrypt(*ht.elements[static_cast<size_t>(e)], batch);
      for (int64_t b = 0; b < batch; ++b) out.values()[static_cast<size_t>(b * nonbatch + e)] = column[static_cast<size_t>(b)];
    }
  });
  return out;
}

}  // namespace heg
