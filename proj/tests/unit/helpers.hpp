#pragma once

#include <cstdint>

#include "dpls/rng.hpp"
#include "dpls/types.hpp"

namespace dpls::testing {

inline Matrix random_matrix(Index rows, Index cols, SeededRng& rng) {
  Matrix a(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) a(i, j) = rng.normal();
  }
  return a;
}

inline Vector random_vector(Index size, SeededRng& rng) {
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = rng.normal();
  return v;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace dpls::testing
