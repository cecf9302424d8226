#include "torvm/projections.hpp"

#include "torvm/log.hpp"
#include "torvm/quadrature.hpp"

#include <algorithm>
#include <stdexcept>

namespace torvm {

double cut_disk_measure(double d) {
  if (d <= -1.0) return kPi;
  if (d >= 1.0) return 0.0;
  return std::acos(d) - d * std::sqrt(1.0 - d * d);
}

LevelSetRegion level_set_region(double a, double e, double p) {
  if (!(e > 1.0)) throw std::domain_error("level_set_region: requires e > 1");
  LevelSetRegion reg;
  reg.e = e;
  reg.p = p;
  reg.d = std::abs(p) / std::sqrt(e * e - 1.0) - a;
  reg.measure = cut_disk_measure(reg.d);
  return reg;
}

RegionIntegrator::RegionIntegrator(const CrossSectionGrid& grid, int theta_order)
    : grid_(grid), order_(theta_order) {}

template <class Visit>
void RegionIntegrator::visit(double d, Visit&& v) const {
  if (d >= 1.0) return;
  std::vector<double> tb;
  for (int j = 0; j <= grid_.nth(); ++j) tb.push_back(j * grid_.dth());
  if (d > -1.0) {
    const double t0 = std::acos(d);
    tb.push_back(t0);
    tb.push_back(kTwoPi - t0);
  }
  std::sort(tb.begin(), tb.end());
  tb.erase(std::unique(tb.begin(), tb.end(), [](double x, double y) { return std::abs(x - y) < 1e-15; }),
           tb.end());
  const Rule1D tr = piecewise_gauss(tb, order_);
  const Rule1D g3 = gauss_legendre(3, 0.0, 1.0);
  std::vector<double> rb;
  for (std::size_t q = 0; q < tr.size(); ++q) {
    const double th = tr.x[q], c = std::cos(th);
    double lo = 0.0, hi = 1.0;
    if (d > -1.0) {
      if (d < 0.0) {
        if (c < 0.0) hi = std::min(1.0, d / c);
      } else {
        if (c <= 0.0) continue;
        lo = d / c;
        if (lo >= 1.0) continue;
      }
    }
    rb.clear();
    rb.push_back(lo);
    for (int i = 0; i < grid_.nr(); ++i)
      if (grid_.r(i) > lo && grid_.r(i) < hi) rb.push_back(grid_.r(i));
    rb.push_back(hi);
    for (std::size_t m = 0; m + 1 < rb.size(); ++m) {
      const double len = rb[m + 1] - rb[m];
      if (len <= 0.0) continue;
      for (std::size_t g = 0; g < g3.size(); ++g) {
        const double r = rb[m] + len * g3.x[g];
        v(r, th, tr.w[q] * len * g3.w[g] * r);
      }
    }
  }
}

RegionFunctional RegionIntegrator::functional(double d) const {
  RegionFunctional f;
  f.c1 = Vec::Zero(grid_.size());
  f.cR = Vec::Zero(grid_.size());
  f.measure = cut_disk_measure(d);
  const double a = grid_.frame().a();
  visit(d, [&](double r, double th, double w) {
    const Stencil s = grid_.stencil(r, th);
    const double inv_R = 1.0 / (a + r * std::cos(th));
    for (int k = 0; k < s.n; ++k) {
      f.c1[s.idx[k]] += w * s.w[k];
      f.cR[s.idx[k]] += w * s.w[k] * inv_R;
    }
  });
  return f;
}

double RegionIntegrator::integrate(const std::function<double(double, double)>& fn, double d) const {
  double acc = 0.0;
  visit(d, [&](double r, double th, double w) { acc += w * fn(r, th); });
  return acc;
}

double project_homogeneous(const RegionIntegrator& ri, const Vec& h, double e, double p) {
  const LevelSetRegion reg = level_set_region(ri.grid().frame().a(), e, p);
  if (reg.empty()) throw std::domain_error("project_homogeneous: empty level set");
  return ri.functional(reg.d).c1.dot(h) / reg.measure;
}

double project_homogeneous(const RegionIntegrator& ri,
                           const std::function<double(double, double)>& h, double e, double p) {
  const LevelSetRegion reg = level_set_region(ri.grid().frame().a(), e, p);
  if (reg.empty()) throw std::domain_error("project_homogeneous: empty level set");
  return ri.integrate(h, reg.d) / reg.measure;
}

HomogeneousGram homogeneous_gram(const RegionIntegrator& ri, const MuProfile& prof,
                                 const HomogeneousRule& rule) {
  const int n = ri.grid().size();
  const double a = ri.grid().frame().a();
  HomogeneousGram G;
  for (int s = 0; s < 2; ++s) {
    G.G11[s] = Mat::Zero(n, n);
    G.G1p[s] = Mat::Zero(n, n);
    G.Gpp[s] = Mat::Zero(n, n);
  }
  if (prof.is_zero()) return G;

  const Rule1D srule = composite_gauss(rule.s_panels, rule.order, 0.0, rule.vmax);
  const Rule1D drule = composite_gauss(rule.d_panels, rule.order, -1.0, 1.0);
  const Rule1D prule = composite_gauss(rule.p_panels, rule.order, -1.0, 1.0);
  const double four_pi2 = 4.0 * kPi * kPi;
  const int signs[2] = {1, -1};

  // Whole-disk core: |p| <= (a - 1) s.
  const RegionFunctional full = ri.functional(-1.0);
  for (int sp = 0; sp < 2; ++sp) {
    double w11 = 0.0, w1p = 0.0, wpp = 0.0;
    for (std::size_t i = 0; i < srule.size(); ++i) {
      const double s = srule.x[i], e = std::sqrt(1.0 + s * s);
      const double pm = (a - 1.0) * s;
      for (std::size_t k = 0; k < prule.size(); ++k) {
        const double p = pm * prule.x[k];
        const double w = four_pi2 * srule.w[i] * s * pm * prule.w[k] *
                         std::abs(prof.eval_unchecked(signs[sp], e, p).mu_e) / kPi;
        w11 += w;
        w1p += w * p / e;
        wpp += w * (p / e) * (p / e);
      }
    }
    G.G11[sp].noalias() += w11 * full.c1 * full.c1.transpose();
    G.G1p[sp].noalias() += w1p * full.cR * full.c1.transpose();
    G.Gpp[sp].noalias() += wpp * full.cR * full.cR.transpose();
  }

  // Cut regions: |p| = s (a + d), both signs of p.
  for (std::size_t j = 0; j < drule.size(); ++j) {
    const double d = drule.x[j];
    const RegionFunctional f = ri.functional(d);
    if (f.measure <= 0.0) continue;
    for (int sp = 0; sp < 2; ++sp) {
      double w11 = 0.0, w1p = 0.0, wpp = 0.0;
      for (std::size_t i = 0; i < srule.size(); ++i) {
        const double s = srule.x[i], e = std::sqrt(1.0 + s * s);
        const double p = s * (a + d);
        const double base = four_pi2 * srule.w[i] * s * s * drule.w[j] / f.measure;
        const double mp = std::abs(prof.eval_unchecked(signs[sp], e, p).mu_e);
        const double mm = std::abs(prof.eval_unchecked(signs[sp], e, -p).mu_e);
        w11 += base * (mp + mm);
        w1p += base * (p / e) * (mp - mm);
        wpp += base * (p / e) * (p / e) * (mp + mm);
      }
      G.G11[sp].noalias() += w11 * f.c1 * f.c1.transpose();
      G.G1p[sp].noalias() += w1p * f.cR * f.c1.transpose();
      G.Gpp[sp].noalias() += wpp * f.cR * f.cR.transpose();
    }
  }
  return G;
}

std::array<double, 2> projected_vphi_norm(const Vec& h, const HomogeneousGram& gram) {
  return {h.dot(gram.Gpp[0] * h), h.dot(gram.Gpp[1] * h)};
}

ProjectionSample project_general(const PhaseFunction& g, const std::vector<PhaseState>& nodes,
                                 const Tracer& tracer, double T, double ds, double rel_tol) {
  ProjectionSample out;
  out.values.resize(nodes.size());
  out.discrepancy.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const ErgodicResult r = ergodic_average(g, nodes[k], tracer, T, ds, rel_tol);
    out.values[k] = r.value;
    out.discrepancy[k] = r.discrepancy;
    if (!r.converged) ++out.unconverged;
  }
  if (!nodes.empty() && out.unconverged > 0.05 * nodes.size())
    warn("project_general: " + std::to_string(out.unconverged) + " of " +
         std::to_string(nodes.size()) + " nodes failed the T vs 2T check");
  return out;
}

}  // namespace torvm
