#pragma once

#include <cmath>
#include <cstdint>

#include "catfill/nd/rng.hpp"
#include "catfill/nd/tensor.hpp"

namespace catfill::nd {

inline double glorot_bound(std::size_t rows, std::size_t cols) {
  return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

/// Entries i.i.d. uniform on [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))].
inline Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0)
    throw ShapeError("glorot_uniform: zero dimension " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  const double bound = glorot_bound(rows, cols);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

inline Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  return glorot_uniform(rows, cols, rng);
}

}  // namespace catfill::nd
