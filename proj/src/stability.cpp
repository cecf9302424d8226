#include "torvm/stability.hpp"

#include "torvm/log.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace torvm {

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Unstable: return "unstable";
    case Verdict::Marginal: return "marginal";
  }
  return "unknown";
}

namespace {

Eigen::SelfAdjointEigenSolver<Mat> pencil_solver(const Mat& form, const Vec& metric, bool vectors) {
  if (form.rows() != form.cols() || form.rows() != metric.size())
    throw std::invalid_argument("eigensolve: dimension mismatch");
  if ((metric.array() <= 0.0).any()) throw std::invalid_argument("eigensolve: metric must be positive");
  const Vec s = metric.cwiseSqrt().cwiseInverse();
  Mat G = s.asDiagonal() * form * s.asDiagonal();
  G = 0.5 * (G + G.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(G, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolve: factorization failed");
  return es;
}

// Pointwise velocity moment summed over species, on the angle-collapsed rule.
template <class F>
double species_moment(const Equilibrium& eq, const std::vector<VelocityNode>& nodes, double r,
                      double th, F&& f) {
  const double R = eq.frame().weight(r, th);
  const FieldSample fs = eq.homogeneous() ? FieldSample{} : eq.fields(r, th);
  const MuProfile& prof = eq.profile();
  double acc = 0.0;
  for (const auto& v : nodes) {
    const double ev = lorentz(v.vr, v.vth, v.vphi);
    for (int sg : {1, -1}) {
      const double e = ev + sg * fs.phi;
      const double p = R * (v.vphi + sg * fs.aphi);
      const MuValue mu = prof.eval_unchecked(sg, e, p);
      acc += v.w * f(sg, ev, e, p, R, fs.aphi, mu);
    }
  }
  return acc;
}

}  // namespace

EigenPair smallest_eigenvalue(const Mat& form, const Vec& metric) {
  const auto es = pencil_solver(form, metric, true);
  EigenPair out;
  out.value = es.eigenvalues()[0];
  out.vector = es.eigenvectors().col(0).cwiseQuotient(metric.cwiseSqrt());
  out.rayleigh = out.vector.dot(form * out.vector) / out.vector.dot(metric.cwiseProduct(out.vector));
  return out;
}

Vec generalized_eigenvalues(const Mat& form, const Vec& metric) {
  return pencil_solver(form, metric, false).eigenvalues();
}

Vec witness_function(const CrossSectionGrid& grid) {
  const ScalarLaplacian lap = assemble_scalar_laplacian(grid, false);
  const ScalarLaplacian lap_s = assemble_scalar_laplacian(grid, true);
  Vec h = smallest_eigenvalue(-lap.dense_form(), grid.weights()).vector;
  if (h.sum() < 0.0) h = -h;
  return h / std::sqrt(lap_s.energy(h));
}

WitnessDecomposition witness_decomposition(const Equilibrium& eq, const OperatorSet& ops0,
                                           const Vec& h, const VelocityQuadrature& rule) {
  WitnessDecomposition d;
  const LDecomposition l = quadratic_form_L(ops0, h);
  d.value = l.value;
  d.one = h.dot((ops0.stiffness + ops0.curvature) * h);
  d.III = h.dot(ops0.projection_pp * h);
  d.schur = l.correction;
  if (eq.profile().is_zero()) return d;
  const auto& nodes = rule.axial_nodes();
  const CrossSectionGrid& g = eq.grid();
  // I: -sum int p mu_p / e,  II: sum (+-) int R A_phi mu_p / e.
  const Mat mI = weighted_mass_matrix(g, [&](double r, double th) {
    return species_moment(eq, nodes, r, th, [](int, double, double e, double p, double, double, const MuValue& mu) {
      return -p * mu.mu_p / e;
    });
  });
  d.I = h.dot(mI * h);
  if (!eq.homogeneous()) {
    const Mat mII = weighted_mass_matrix(g, [&](double r, double th) {
      return species_moment(eq, nodes, r, th,
                            [](int sg, double, double e, double, double R, double A, const MuValue& mu) {
                              return sg * R * A * mu.mu_p / e;
                            });
    });
    d.II = h.dot(mII * h);
  }
  return d;
}

SmallFieldCondition small_field_condition(const Equilibrium& eq, const VelocityQuadrature& rule) {
  SmallFieldCondition c;
  const CrossSectionGrid& g = eq.grid();
  const ScalarLaplacian lap = assemble_scalar_laplacian(g, false);
  c.c0 = 1.0 / smallest_eigenvalue(-lap.dense_form(), g.weights()).value;
  c.sup_aphi = eq.sup_aphi();
  const auto& nodes = rule.axial_nodes();
  for (int k = 0; k < g.size(); ++k) {
    const double m = species_moment(eq, nodes, g.node_r(k), g.node_theta(k),
                                    [](int, double ev, double, double, double, double, const MuValue& mu) {
                                      return std::abs(mu.mu_p) / ev;
                                    });
    c.sup_moment = std::max(c.sup_moment, m);
  }
  c.value = c.c0 * (1.0 + g.frame().a()) * c.sup_aphi * c.sup_moment;
  c.satisfied = c.value <= 1.0;
  return c;
}

StabilityReport assess(const Equilibrium& eq, const OperatorSet& ops0, const StabilityOptions& opt) {
  if (ops0.lambda != 0.0) throw std::invalid_argument("assess: operators must be assembled at lambda = 0");
  StabilityReport rep;
  rep.backend = backend_name(ops0.backend);
  rep.asym_L = ops0.asym_L;
  rep.b_norm = ops0.B.cwiseAbs().maxCoeff();

  const auto es = pencil_solver(ops0.L, ops0.w, true);
  const Vec& ev = es.eigenvalues();
  rep.kappa = ev[0];
  rep.minimizer = es.eigenvectors().col(0).cwiseQuotient(ops0.w.cwiseSqrt());
  const double spread = ev.cwiseAbs().maxCoeff();
  rep.tol_eig = std::max(opt.tol_eig, opt.asym_factor * ops0.asym_L * spread);

  const VelocityQuadrature rule = opt.operators.velocity.build();
  const Vec h = witness_function(eq.grid());
  rep.witness = witness_decomposition(eq, ops0, h, rule);
  const double hw = h.dot(ops0.w.cwiseProduct(h));

  if (rep.kappa < -rep.tol_eig || rep.witness.value < -rep.tol_eig * hw)
    rep.verdict = Verdict::Unstable;
  else if (rep.kappa > rep.tol_eig)
    rep.verdict = Verdict::Stable;
  else
    rep.verdict = Verdict::Marginal;
  rep.margin = rep.kappa / rep.tol_eig;

  rep.hypotheses = validate_hypotheses(eq.profile(), eq.frame().a(), eq.sup_aphi());
  rep.small_field = small_field_condition(eq, rule);
  return rep;
}

StabilityReport assess(const Equilibrium& eq, const StabilityOptions& opt) {
  OperatorOptions oo = opt.operators;
  oo.lambda = 0.0;
  const OperatorSet ops = assemble_operators(eq, oo);
  return assess(eq, ops, opt);
}

Mat doubled_species_A2(const Equilibrium& eq, const OperatorOptions& opt) {
  if (!eq.homogeneous()) throw std::invalid_argument("doubled_species_A2: homogeneous equilibria only");
  const CrossSectionGrid& g = eq.grid();
  const ScalarLaplacian lap_s = assemble_scalar_laplacian(g, true);
  Mat A2 = -lap_s.dense_form();
  if (eq.profile().is_zero()) return A2;
  const VelocityQuadrature rule = opt.velocity.build();
  const auto& nodes = rule.axial_nodes();
  const Mat Mup = weighted_mass_matrix(g, [&](double r, double th) {
    const double R = g.frame().weight(r, th);
    double acc = 0.0;
    for (const auto& v : nodes) {
      const double ev = lorentz(v.vr, v.vth, v.vphi);
      acc += v.w * R * (v.vphi / ev) * eq.profile().eval_unchecked(-1, ev, R * v.vphi).mu_p;
    }
    return acc;
  });
  const HomogeneousGram G = homogeneous_gram(RegionIntegrator(g), eq.profile(), opt.homogeneous);
  A2 += 2.0 * (G.Gpp[1] - Mup);
  return 0.5 * (A2 + A2.transpose());
}

ScanResult scan_K(const ProfileSpec& base, const std::vector<double>& Ks, const CrossSectionGrid& grid,
                  const ScanOptions& opt) {
  ScanResult res;
  res.rows.resize(Ks.size());
  const VelocityQuadrature eq_rule = opt.equilibrium_velocity.build();
  auto run_row = [&](std::size_t i) {
    ScanRow& row = res.rows[i];
    row.K = Ks[i];
    try {
      ProfileSpec ps = base;
      ps.K = Ks[i];
      const MuProfile prof(ps);
      PicardOptions po = opt.picard;
      po.purely_magnetic = true;
      const Equilibrium eq = solve_picard(prof, grid, eq_rule, po);
      const StabilityReport rep = assess(eq, opt.stability);
      row.witness = rep.witness;
      row.witness_form = rep.witness.value;
      row.kappa = rep.kappa;
      row.sup_aphi = eq.sup_aphi();
      row.verdict = rep.verdict;
      row.ok = true;
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
  };
  const int T = std::max(1, std::min<int>(opt.threads, static_cast<int>(Ks.size())));
  if (T == 1) {
    for (std::size_t i = 0; i < Ks.size(); ++i) run_row(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < Ks.size(); i += T) run_row(i);
      });
    for (auto& th : pool) th.join();
  }

  // Rows in increasing K for the trend statistics.
  std::vector<const ScanRow*> ok;
  for (const auto& r : res.rows)
    if (r.ok) ok.push_back(&r);
  std::sort(ok.begin(), ok.end(), [](const ScanRow* a, const ScanRow* b) { return a->K < b->K; });
  for (const ScanRow* r : ok) {
    res.sup_aphi_max = std::max(res.sup_aphi_max, r->sup_aphi);
    if (!res.K0 && r->witness_form < 0.0) res.K0 = r->K;
    if (r->K > 0.0 && r->sup_aphi > 0.0)
      res.II_ratio_max = std::max(res.II_ratio_max, std::abs(r->witness.II) / (r->K * r->sup_aphi));
  }
  if (!ok.empty()) {
    res.witness_decreases = ok.back()->witness_form < 0.0 && ok.back()->witness_form < ok.front()->witness_form;
  }
  // Least-squares slope of log|I| against log K on the upper half.
  std::vector<double> x, y;
  for (std::size_t k = ok.size() / 2; k < ok.size(); ++k)
    if (ok[k]->K > 0.0 && std::abs(ok[k]->witness.I) > 0.0) {
      x.push_back(std::log(ok[k]->K));
      y.push_back(std::log(std::abs(ok[k]->witness.I)));
    }
  if (x.size() >= 2) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      sx += x[k];
      sy += y[k];
      sxx += x[k] * x[k];
      sxy += x[k] * y[k];
    }
    const double den = n * sxx - sx * sx;
    if (den > 0.0) res.I_exponent = (n * sxy - sx * sy) / den;
  }
  for (const auto& r : res.rows)
    if (!r.ok) warn("scan_K: row K = " + std::to_string(r.K) + " failed: " + r.error);
  return res;
}

}  // namespace torvm
