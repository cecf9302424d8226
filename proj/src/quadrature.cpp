#include "torvm/quadrature.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <map>
#include <mutex>
#include <stdexcept>

namespace torvm {

namespace {

const Rule1D& reference_rule(int n) {
  static std::map<int, Rule1D> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Rule1D rule;
  const auto zeros = boost::math::legendre_p_zeros<double>(n);
  for (double z : zeros) {
    const double dp = boost::math::legendre_p_prime<double>(n, z);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    if (z == 0.0) {
      rule.x.push_back(0.0);
      rule.w.push_back(w);
    } else {
      rule.x.push_back(-z);
      rule.w.push_back(w);
      rule.x.push_back(z);
      rule.w.push_back(w);
    }
  }
  return cache.emplace(n, std::move(rule)).first->second;
}

}  // namespace

Rule1D gauss_legendre(int n, double lo, double hi) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  const Rule1D& ref = reference_rule(n);
  Rule1D out;
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  out.x.reserve(ref.size());
  out.w.reserve(ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    out.x.push_back(mid + half * ref.x[k]);
    out.w.push_back(half * ref.w[k]);
  }
  return out;
}

Rule1D composite_gauss(int panels, int order, double lo, double hi) {
  if (panels < 1) throw std::invalid_argument("composite_gauss: panels must be positive");
  std::vector<double> breaks(panels + 1);
  for (int p = 0; p <= panels; ++p) breaks[p] = lo + (hi - lo) * p / panels;
  return piecewise_gauss(breaks, order);
}

Rule1D piecewise_gauss(const std::vector<double>& breaks, int order) {
  Rule1D out;
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    if (breaks[p + 1] <= breaks[p]) continue;
    Rule1D piece = gauss_legendre(order, breaks[p], breaks[p + 1]);
    out.x.insert(out.x.end(), piece.x.begin(), piece.x.end());
    out.w.insert(out.w.end(), piece.w.begin(), piece.w.end());
  }
  return out;
}

}  // namespace torvm
