#pragma once

#include "stochreg/linalg.hpp"

#include <cstddef>

// Single-step update rules shared by the solvers and the exact oracles, so
// both walk bit-identical iterates along a given index path.
namespace stochreg::update {

// x <- x - c0 ((a, x) - y_i) a
inline void sgd(const double* a, double yi, double c0, double* x, std::size_t m) {
  const double d = kernel::dot(a, x, m) - yi;
  for (std::size_t j = 0; j < m; ++j) x[j] = x[j] - c0 * (d * a[j]);
}

// x <- x - c0 ((a, x - x_anchor) a + g), with (a, x_anchor) taken from the
// anchor matvec. gap_sign = -1 is only used for mutation tests.
inline void svrg(const double* a, double ax_anchor, const double* g, double c0, double* x, std::size_t m,
                 double gap_sign = 1.0) {
  const double d = gap_sign * (kernel::dot(a, x, m) - ax_anchor);
  for (std::size_t j = 0; j < m; ++j) x[j] = x[j] - c0 * (d * a[j] + g[j]);
}

}  // namespace stochreg::update
