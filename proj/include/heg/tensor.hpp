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
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "heg/common.hpp"

namespace heg {

/*! \brief Dense tensor shape, rank 0 to 4, every extent >= 1.
 *
 * By convention the first axis of a runtime tensor is the batch axis; graphs
 * store batch-independent structure and the executor substitutes the actual
 * batch extent when binding inputs.
 */
class TensorShape {
 public:
  TensorShape() = default;
  TensorShape(std::initializer_list<int64_t> dims) : m_dims(dims) { verify(); }
  explicit TensorShape(std::vector<int64_t> dims) : m_dims(std::move(dims)) { verify(); }

  size_t rank() const { return m_dims.size(); }
  int64_t dim(size_t axis) const { return m_dims.at(axis); }
  const std::vector<int64_t>& dims() const { return m_dims; }

  int64_t element_count() const {
    int64_t n = 1;
    for (int64_t d : m_dims) n *= d;
    return n;
  }

  //! Number of elements ignoring the leading (batch) axis.
  int64_t element_count_nonbatch() const {
    if (m_dims.empty()) return 1;
    int64_t n = 1;
    for (size_t i = 1; i < m_dims.size(); ++i) n *= m_dims[i];
    return n;
  }

  //! Row-major strides.
  std::vector<int64_t> strides() const {
    std::vector<int64_t> s(m_dims.size(), 1);
    for (size_t i = m_dims.size(); i-- > 1;) s[i - 1] = s[i] * m_dims[i];
    return s;
  }

  bool operator==(const TensorShape& other) const { return m_dims == other.m_dims; }
  bool operator!=(const TensorShape& other) const { return !(*this == other); }

  std::string to_string() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < m_dims.size(); ++i) os << (i ? "," : "") << m_dims[i];
    os << ")";
    return os.str();
  }

 private:
  void verify() const {
    if (m_dims.size() > 4) fail(errc::validation, "tensor rank exceeds 4: " + to_string());
    for (int64_t d : m_dims)
      if (d < 1) fail(errc::validation, "tensor extent must be >= 1: " + to_string());
  }

  std::vector<int64_t> m_dims;
};

//! Row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorShape shape) : m_shape(std::move(shape)), m_values(m_shape.element_count(), 0.0) {}
  Tensor(TensorShape shape, std::vector<double> values) : m_shape(std::move(shape)), m_values(std::move(values)) {
    if (static_cast<int64_t>(m_values.size()) != m_shape.element_count())
      fail(errc::validation, "tensor value count " + std::to_string(m_values.size()) +
                                 " does not match shape " + m_shape.to_string());
  }

  const TensorShape& shape() const { return m_shape; }
  const std::vector<double>& values() const { return m_values; }
  std::vector<double>& values() { return m_values; }

  double at(int64_t flat) const { return m_values.at(static_cast<size_t>(flat)); }
  double& at(int64_t flat) { return m_values.at(static_cast<size_t>(flat)); }

  bool operator==(const Tensor& other) const { return m_shape == other.m_shape && m_values == other.m_values; }

 private:
  TensorShape m_shape;
  std::vector<double> m_values;
};

//! Flat offset of a multi-index (row-major).
inline int64_t flat_index(const TensorShape& shape, const std::vector<int64_t>& idx) {
  auto strides = shape.strides();
  int64_t off = 0;
  for (size_t i = 0; i < idx.size(); ++i) off += idx[i] * strides[i];
  return off;
}

}  // namespace heg
