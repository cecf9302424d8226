#include "torvm/equilibrium.hpp"

#include "torvm/log.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>

namespace torvm {

namespace {
void chebyshev(int n, double x, std::vector<double>& T, std::vector<double>& dT) {
  T.assign(n + 1, 0.0);
  dT.assign(n + 1, 0.0);
  T[0] = 1.0;
  if (n >= 1) {
    T[1] = x;
    dT[1] = 1.0;
  }
  for (int k = 2; k <= n; ++k) {
    T[k] = 2.0 * x * T[k - 1] - T[k - 2];
    dT[k] = 2.0 * T[k - 1] + 2.0 * x * dT[k - 1] - dT[k - 2];
  }
}
}  // namespace

DiskPolynomial DiskPolynomial::fit(const CrossSectionGrid& grid, const Vec& values, int degree) {
  DiskPolynomial p;
  // Angular harmonics at or above nth/2 alias on the node rings, and the
  // even radial ladder needs one ring per power; beyond that the least-squares
  // system is rank deficient and the fit blows up between nodes.
  degree = std::min({degree, (grid.nth() - 1) / 2, 2 * grid.nr() - 2});
  p.deg_ = degree;
  const int nb = (degree + 1) * (degree + 2) / 2;
  p.coef_.assign(nb, 0.0);
  if (values.cwiseAbs().maxCoeff() == 0.0) return p;
  p.zero_ = false;

  const int n = grid.size();
  Mat A(n, nb);
  Vec b(n);
  std::vector<double> T1, d1, T2, d2;
  for (int k = 0; k < n; ++k) {
    const double r = grid.node_r(k), th = grid.node_theta(k);
    const double y1 = r * std::cos(th), y2 = r * std::sin(th);
    chebyshev(degree, y1, T1, d1);
    chebyshev(degree, y2, T2, d2);
    const double g = 1.0 - r * r;
    const double sw = std::sqrt(grid.weights()[k]);
    int col = 0;
    for (int tot = 0; tot <= degree; ++tot)
      for (int i = tot; i >= 0; --i) A(k, col++) = sw * g * T1[i] * T2[tot - i];
    b[k] = sw * values[k];
  }
  const Vec c = A.colPivHouseholderQr().solve(b);
  for (int i = 0; i < nb; ++i) p.coef_[i] = c[i];
  return p;
}

DiskPolynomial::Value DiskPolynomial::eval(double y1, double y2) const {
  Value v;
  if (zero_) return v;
  thread_local std::vector<double> T1, d1, T2, d2;
  chebyshev(deg_, y1, T1, d1);
  chebyshev(deg_, y2, T2, d2);
  double S = 0.0, S1 = 0.0, S2 = 0.0;
  int col = 0;
  for (int tot = 0; tot <= deg_; ++tot) {
    for (int i = tot; i >= 0; --i) {
      const double c = coef_[col++];
      const int j = tot - i;
      S += c * T1[i] * T2[j];
      S1 += c * d1[i] * T2[j];
      S2 += c * T1[i] * d2[j];
    }
  }
  const double g = 1.0 - y1 * y1 - y2 * y2;
  v.f = g * S;
  v.f1 = -2.0 * y1 * S + g * S1;
  v.f2 = -2.0 * y2 * S + g * S2;
  return v;
}

Equilibrium::Equilibrium(const CrossSectionGrid& grid, const MuProfile& profile, Vec phi,
                         Vec aphi, int fit_degree)
    : grid_(grid), profile_(profile), phi_(std::move(phi)), aphi_(std::move(aphi)) {
  if (phi_.size() != grid_.size() || aphi_.size() != grid_.size())
    throw std::invalid_argument("Equilibrium: field size mismatch");
  homogeneous_ = phi_.cwiseAbs().maxCoeff() == 0.0 && aphi_.cwiseAbs().maxCoeff() == 0.0;
  if (!homogeneous_) {
    phi_fit_ = DiskPolynomial::fit(grid_, phi_, fit_degree);
    a_fit_ = DiskPolynomial::fit(grid_, aphi_, fit_degree);
    for (int k = 0; k < grid_.size(); ++k) {
      const double r = grid_.node_r(k), th = grid_.node_theta(k);
      const double y1 = r * std::cos(th), y2 = r * std::sin(th);
      fit_error = std::max({fit_error, std::abs(phi_fit_.value(y1, y2) - phi_[k]),
                            std::abs(a_fit_.value(y1, y2) - aphi_[k])});
    }
  }
}

FieldSample Equilibrium::fields_cyl(double y1, double y2) const {
  FieldSample s;
  if (homogeneous_) return s;
  const auto p = phi_fit_.eval(y1, y2);
  const auto q = a_fit_.eval(y1, y2);
  const double R = frame().a() + y1;
  s.phi = p.f;
  s.aphi = q.f;
  s.E_R = -p.f1;
  s.E_Z = -p.f2;
  s.B_R = -q.f2;
  s.B_Z = q.f1 + q.f / R;
  const double rr = std::hypot(y1, y2);
  const double c = rr > 0.0 ? y1 / rr : 1.0, sn = rr > 0.0 ? y2 / rr : 0.0;
  s.E_r = c * s.E_R + sn * s.E_Z;
  s.E_th = -sn * s.E_R + c * s.E_Z;
  s.B_r = c * s.B_R + sn * s.B_Z;
  s.B_th = -sn * s.B_R + c * s.B_Z;
  return s;
}

FieldSample Equilibrium::fields(double r, double theta) const {
  FieldSample s = fields_cyl(r * std::cos(theta), r * std::sin(theta));
  if (r == 0.0) {
    // Frame components at the axis follow the requested theta.
    const double c = std::cos(theta), sn = std::sin(theta);
    s.E_r = c * s.E_R + sn * s.E_Z;
    s.E_th = -sn * s.E_R + c * s.E_Z;
    s.B_r = c * s.B_R + sn * s.B_Z;
    s.B_th = -sn * s.B_R + c * s.B_Z;
  }
  return s;
}

Invariants invariants_at(const Equilibrium& eq, double r, double theta, double vr, double vth,
                         double vphi) {
  if (!(r >= 0.0) || r > 1.0 + 1e-9) throw std::domain_error("invariants_at: point outside torus");
  const FieldSample f = eq.fields(r, theta);
  const double ev = lorentz(vr, vth, vphi);
  const double R = eq.frame().weight(r, theta);
  return {ev + f.phi, R * (vphi + f.aphi), ev - f.phi, R * (vphi - f.aphi)};
}

Sources source_integrals(const CrossSectionGrid& grid, const MuProfile& profile,
                         const VelocityQuadrature& rule, const Vec& phi, const Vec& aphi) {
  const int n = grid.size();
  Sources s;
  s.F1 = Vec::Zero(n);
  s.F2 = Vec::Zero(n);
  if (profile.is_zero()) return s;
  const auto& nodes = rule.axial_nodes();
  double scale = 0.0;
  for (int k = 0; k < n; ++k) {
    const double R = grid.node_R(k);
    double f1 = 0.0, f2 = 0.0, mass = 0.0;
    for (const auto& v : nodes) {
      const double ev = lorentz(v.vr, v.vth, v.vphi);
      const double mp = profile.eval_unchecked(1, ev + phi[k], R * (v.vphi + aphi[k])).mu;
      const double mm = profile.eval_unchecked(-1, ev - phi[k], R * (v.vphi - aphi[k])).mu;
      f1 += v.w * (mp - mm);
      f2 += v.w * (mp - mm) * v.vphi / ev;
      mass += v.w * (mp + mm);
    }
    s.F1[k] = f1;
    s.F2[k] = f2;
    scale = std::max(scale, mass);
  }
  if (scale > 0.0) {
    const double cmu = profile.c_mu() > 0.0 ? profile.c_mu()
                                            : profile.sampled_decay_constant(grid.frame().a());
    s.tail_bound = envelope_tail(cmu, profile.gamma(), rule.vmax()) / scale;
    if (s.tail_bound > 1e-8)
      warn("velocity cutoff " + std::to_string(rule.vmax()) +
           " leaves an estimated relative tail of " + std::to_string(s.tail_bound));
  }
  return s;
}

namespace {
double wnorm(const Vec& f, const Vec& w) { return std::sqrt((f.array().square() * w.array()).sum()); }
}  // namespace

Equilibrium solve_picard(const MuProfile& profile, const CrossSectionGrid& grid,
                         const VelocityQuadrature& rule, const PicardOptions& opt) {
  const int n = grid.size();
  const Vec& w = grid.weights();
  const ScalarLaplacian lap0 = assemble_scalar_laplacian(grid, false);
  const ScalarLaplacian lap1 = assemble_scalar_laplacian(grid, true);
  const SpMat K0 = -lap0.form, K1 = -lap1.form;
  Eigen::SimplicialLDLT<SpMat> s0(K0), s1(K1);
  if (s0.info() != Eigen::Success || s1.info() != Eigen::Success)
    throw std::runtime_error("solve_picard: factorization failed");

  Vec phi = Vec::Zero(n), aphi = Vec::Zero(n);
  PicardHistory hist;
  double prev = -1.0;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const Sources src = source_integrals(grid, profile, rule, phi, aphi);
    Vec phi_new = opt.purely_magnetic ? Vec::Zero(n) : Vec(s0.solve(w.cwiseProduct(src.F1)));
    Vec a_new = s1.solve(w.cwiseProduct(src.F2));
    phi_new = (1.0 - opt.damping) * phi + opt.damping * phi_new;
    a_new = (1.0 - opt.damping) * aphi + opt.damping * a_new;
    const double step = std::sqrt(std::pow(wnorm(phi_new - phi, w), 2) +
                                  std::pow(wnorm(a_new - aphi, w), 2));
    hist.step_norms.push_back(step);
    if (prev > 0.0) hist.contraction.push_back(step / prev);
    phi = std::move(phi_new);
    aphi = std::move(a_new);
    if (!std::isfinite(step)) throw PicardFailure("solve_picard: non-finite iterate", phi, aphi);
    if (phi.cwiseAbs().maxCoeff() > 0.5)
      throw PicardFailure("solve_picard: |phi| exceeds 1/2", phi, aphi);
    if (step <= opt.tol) {
      ++it;
      break;
    }
    if (hist.contraction.size() >= 5) {
      const auto& c = hist.contraction;
      bool growing = true;
      for (std::size_t i = c.size() - 5; i < c.size(); ++i) growing = growing && c[i] >= 1.0;
      if (growing) throw PicardFailure("solve_picard: iteration diverges", phi, aphi);
    }
    prev = step;
  }
  if (it >= opt.max_iter && hist.step_norms.back() > opt.tol)
    throw PicardFailure("solve_picard: no convergence within max_iter", phi, aphi);

  Equilibrium eq(grid, profile, phi, aphi, opt.fit_degree);
  eq.history = hist;
  eq.iterations = it;
  const Sources fin = source_integrals(grid, profile, rule, phi, aphi);
  const Vec r0 = lap0.apply(phi) + fin.F1;  // -Delta phi - F1, sign flipped
  const Vec r1 = lap1.apply(aphi) + fin.F2;
  // Both residuals are measured against the combined source size, so a
  // charge density at rounding level does not inflate the phi residual.
  const double src_norm = std::hypot(wnorm(fin.F1, w), wnorm(fin.F2, w));
  const double scale = src_norm > 0.0 ? src_norm : 1.0;
  eq.residual_phi = opt.purely_magnetic ? 0.0 : wnorm(r0, w) / scale;
  eq.residual_aphi = wnorm(r1, w) / scale;
  return eq;
}

namespace {

// Neighbour value with the ghost conventions: across the axis for i = -1,
// odd reflection through the wall for i = nr.
double nb(const CrossSectionGrid& g, const Vec& f, int i, int j) {
  const int nth = g.nth();
  j = ((j % nth) + nth) % nth;
  if (i < 0) return f[g.index(0, (j + nth / 2) % nth)];
  if (i >= g.nr()) return -f[g.index(g.nr() - 1, j)];
  return f[g.index(i, j)];
}

}  // namespace

NodalFields reconstruct_fields(const CrossSectionGrid& g, const Vec& phi, const Vec& aphi) {
  if (g.nth() % 2 != 0) throw std::invalid_argument("reconstruct_fields: n_theta must be even");
  const int n = g.size();
  NodalFields out{Vec(n), Vec(n), Vec(n), Vec(n)};
  Vec ra(n);
  for (int k = 0; k < n; ++k) ra[k] = g.node_R(k) * aphi[k];
  const double dr = g.dr(), dth = g.dth();
  for (int i = 0; i < g.nr(); ++i) {
    for (int j = 0; j < g.nth(); ++j) {
      const int k = g.index(i, j);
      const double r = g.r(i), R = g.node_R(k);
      const double dphi_r = (nb(g, phi, i + 1, j) - nb(g, phi, i - 1, j)) / (2.0 * dr);
      const double dphi_t = (nb(g, phi, i, j + 1) - nb(g, phi, i, j - 1)) / (2.0 * dth);
      const double dra_r = (nb(g, ra, i + 1, j) - nb(g, ra, i - 1, j)) / (2.0 * dr);
      const double dra_t = (nb(g, ra, i, j + 1) - nb(g, ra, i, j - 1)) / (2.0 * dth);
      out.E_r[k] = -dphi_r;
      out.E_th[k] = -dphi_t / r;
      out.B_r[k] = -dra_t / (r * R);
      out.B_th[k] = dra_r / R;
    }
  }
  return out;
}

Vec nodal_divergence(const CrossSectionGrid& g, const Vec& Br, const Vec& Bth) {
  const int n = g.size();
  Vec fr(n), ft(n), out = Vec::Zero(n);
  for (int k = 0; k < n; ++k) {
    fr[k] = g.node_r(k) * g.node_R(k) * Br[k];
    ft[k] = g.node_R(k) * Bth[k];
  }
  for (int i = 1; i + 1 < g.nr(); ++i) {
    for (int j = 0; j < g.nth(); ++j) {
      const int k = g.index(i, j);
      const double d = (nb(g, fr, i + 1, j) - nb(g, fr, i - 1, j)) / (2.0 * g.dr()) +
                       (nb(g, ft, i, j + 1) - nb(g, ft, i, j - 1)) / (2.0 * g.dth());
      out[k] = d / (g.node_r(k) * g.node_R(k));
    }
  }
  return out;
}

}  // namespace torvm
