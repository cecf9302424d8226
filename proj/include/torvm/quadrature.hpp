#pragma once

#include <vector>

namespace torvm {

// Nodes and weights of a one-dimensional rule on an interval.
struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
};

// n-point Gauss-Legendre rule mapped to [lo, hi].
Rule1D gauss_legendre(int n, double lo = -1.0, double hi = 1.0);

// Composite Gauss-Legendre: `panels` equal panels of `order` points each.
Rule1D composite_gauss(int panels, int order, double lo, double hi);

// Composite rule over consecutive breakpoints, `order` points per piece.
Rule1D piecewise_gauss(const std::vector<double>& breaks, int order);

}  // namespace torvm
