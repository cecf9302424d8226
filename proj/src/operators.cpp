#include "torvm/operators.hpp"

#include "torvm/log.hpp"
#include "torvm/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <sstream>
#include <stdexcept>

namespace torvm {

std::string backend_name(ProjectionBackend b) {
  switch (b) {
    case ProjectionBackend::Automatic: return "automatic";
    case ProjectionBackend::ClosedForm: return "closed_form";
    case ProjectionBackend::TimeAverage: return "time_average";
    case ProjectionBackend::Sampled: return "sampled";
  }
  return "unknown";
}

double asymmetry(const Mat& F) {
  const double scale = F.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (F - F.transpose()).cwiseAbs().maxCoeff() / scale;
}

namespace {

double symmetrize(Mat& F, const char* name, double limit) {
  const double asym = asymmetry(F);
  if (asym > limit) {
    std::ostringstream os;
    os << "operator " << name << " asymmetry " << asym << " exceeds " << limit;
    throw std::runtime_error(os.str());
  }
  F = 0.5 * (F + F.transpose()).eval();
  return asym;
}

double max_generalized_eigenvalue(const Mat& F, const Vec& w) {
  const Vec s = w.cwiseSqrt().cwiseInverse();
  const Mat G = s.asDiagonal() * F * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double rel_max(const Mat& diff, const Mat& ref) {
  const double scale = ref.cwiseAbs().maxCoeff();
  const double d = diff.cwiseAbs().maxCoeff();
  return scale > 0.0 ? d / scale : d;
}

}  // namespace

OperatorSet assemble_scalar_ops(const Equilibrium& eq, const OperatorOptions& opt,
                                const DivFreeBasis* basis) {
  const CrossSectionGrid& g = eq.grid();
  const int N = g.size();
  const double lam = opt.lambda;
  if (lam < 0.0) throw std::invalid_argument("assemble_scalar_ops: lambda must be nonnegative");
  OperatorSet ops;
  ops.lambda = lam;
  ops.w = g.weights();

  const ScalarLaplacian lap = assemble_scalar_laplacian(g, false);
  const ScalarLaplacian lap_s = assemble_scalar_laplacian(g, true);
  ops.stiffness = -lap.dense_form();
  ops.curvature = lap.dense_form() - lap_s.dense_form();

  const MuProfile& prof = eq.profile();
  ProjectionBackend backend = opt.backend;
  if (backend == ProjectionBackend::Automatic) {
    if (lam > 0.0)
      backend = ProjectionBackend::Sampled;
    else
      backend = eq.homogeneous() ? ProjectionBackend::ClosedForm : ProjectionBackend::TimeAverage;
  }
  if (lam > 0.0 && backend != ProjectionBackend::Sampled)
    throw std::invalid_argument("assemble_scalar_ops: lambda > 0 requires the sampled backend");
  if (lam == 0.0 && backend == ProjectionBackend::Sampled)
    throw std::invalid_argument("assemble_scalar_ops: the sampled backend needs lambda > 0");
  if (backend == ProjectionBackend::ClosedForm && !eq.homogeneous())
    throw std::invalid_argument("assemble_scalar_ops: closed form requires a homogeneous equilibrium");
  ops.backend = backend;

  Mat K11 = Mat::Zero(N, N), K1p = Mat::Zero(N, N), Kpp = Mat::Zero(N, N);
  Mat M11 = Mat::Zero(N, N), Mp1 = Mat::Zero(N, N);
  Mat Mup = Mat::Zero(N, N), Mr = Mat::Zero(N, N);
  const bool want_vector = basis != nullptr && lam > 0.0;
  const int nv = want_vector ? basis->n : 0;
  Mat K1v = Mat::Zero(nv, N), Kpv = Mat::Zero(nv, N), Kvv = Mat::Zero(nv, nv);

  if (!prof.is_zero()) {
    const VelocityQuadrature rule = opt.velocity.build();
    const LocalMasses lm = local_mass_matrices(eq, rule);
    Mup = lm.Mup;
    Mr = lm.Mr;
    ops.velocity_identity = rel_max(lm.Mr - lm.Mp, lm.M0);
    if (backend == ProjectionBackend::ClosedForm) {
      const RegionIntegrator ri(g);
      const HomogeneousGram G = homogeneous_gram(ri, prof, opt.homogeneous);
      K11 = G.sum11();
      K1p = G.sum1p();
      Kpp = G.sumpp();
      M11 = lm.M0;
      Mp1 = lm.Mp;
    } else {
      SamplerOptions so = opt.sampler;
      so.vmax = opt.velocity.vmax;
      const PhaseSample sample = draw_phase_nodes(eq, so);
      const KineticMatrices km =
          backend == ProjectionBackend::TimeAverage
              ? assemble_time_average_gram(eq, sample, opt.kinetic)
              : assemble_kinetic(eq, sample, lam, want_vector ? &basis->nodal : nullptr, opt.kinetic);
      K11 = km.K11;
      K1p = km.K1p;
      Kpp = km.Kpp;
      M11 = km.M11;
      Mp1 = km.Mp1;
      if (want_vector) {
        K1v = km.K1v;
        Kpv = km.Kpv;
        Kvv = km.Kvv;
      }
      ops.degenerate = km.degenerate;
      ops.capped = km.capped;
      ops.unconverged = km.unconverged;
      if (km.capped > 0) warn("trajectories stopped at the bounce cap during operator assembly");
      if (km.unconverged > static_cast<int>(0.05 * sample.nodes.size()))
        warn("more than 5% of time averages failed the T vs 2T check");
    }
  }

  ops.mu_p_mass = Mup;
  ops.projection_pp = Kpp;
  ops.A1 = -ops.stiffness - M11 + K11;
  ops.A2 = lam * lam * Mat(ops.w.asDiagonal()) + ops.stiffness + ops.curvature - Mup + Kpp;
  ops.B = Mp1 - K1p;
  const Mat bstar_direct = Mr - K1p.transpose();
  ops.bstar_residual = rel_max(bstar_direct - ops.B.transpose(), M11);
  ops.Bstar = ops.B.transpose();

  ops.asym_A1 = symmetrize(ops.A1, "A1", opt.asymmetry_limit);
  ops.asym_A2 = symmetrize(ops.A2, "A2", opt.asymmetry_limit);

  ops.neg_A1.compute(-ops.A1);
  if (ops.neg_A1.info() != Eigen::Success || opt.spectrum_check)
    ops.a1_max_eigenvalue = max_generalized_eigenvalue(ops.A1, ops.w);
  if (ops.neg_A1.info() != Eigen::Success || ops.a1_max_eigenvalue >= 0.0) {
    std::ostringstream os;
    os << "A1 is not negative definite: max generalized eigenvalue " << ops.a1_max_eigenvalue;
    throw std::runtime_error(os.str());
  }

  if (want_vector) {
    ops.has_vector = true;
    ops.n_vector = nv;
    ops.sigma = basis->sigma;
    ops.S = -(lam * lam) * Mat::Identity(nv, nv) - Mat(basis->sigma.asDiagonal()) - Kvv;
    ops.asym_S = symmetrize(ops.S, "S", opt.asymmetry_limit);
    ops.T1 = K1v;
    ops.T2 = -Kpv;
  }
  return ops;
}

void assemble_L(OperatorSet& ops) {
  if (ops.neg_A1.info() != Eigen::Success) throw std::runtime_error("assemble_L: A1 not factorized");
  ops.L = ops.A2 + ops.B * ops.neg_A1.solve(ops.Bstar);
  ops.asym_L = asymmetry(ops.L);
  ops.L = 0.5 * (ops.L + ops.L.transpose()).eval();
}

void assemble_vector_blocks(OperatorSet& ops) {
  if (!ops.has_vector) throw std::runtime_error("assemble_vector_blocks: no vector blocks assembled");
  const Mat X = ops.neg_A1.solve(ops.T1.transpose());  // (-A1)^{-1} T1^T
  ops.U = ops.S + ops.T1 * X;
  ops.U = 0.5 * (ops.U + ops.U.transpose()).eval();
  ops.V = ops.T2 + X.transpose() * ops.Bstar;
  Eigen::SelfAdjointEigenSolver<Mat> es(ops.U, Eigen::EigenvaluesOnly);
  ops.u_max_eigenvalue = es.eigenvalues().maxCoeff();
}

OperatorSet assemble_operators(const Equilibrium& eq, const OperatorOptions& opt,
                               const DivFreeBasis* basis) {
  OperatorSet ops = assemble_scalar_ops(eq, opt, basis);
  assemble_L(ops);
  if (ops.has_vector) assemble_vector_blocks(ops);
  return ops;
}

Mat reduced_matrix(const OperatorSet& ops, int n) {
  const int N = ops.size();
  if (n < 0 || (n > 0 && (!ops.has_vector || n > ops.n_vector)))
    throw std::invalid_argument("reduced_matrix: truncation exceeds the assembled basis");
  Mat M(N + n, N + n);
  M.topLeftCorner(N, N) = ops.L;
  if (n > 0) {
    M.bottomLeftCorner(n, N) = ops.V.topRows(n);
    M.topRightCorner(N, n) = ops.V.topRows(n).transpose();
    M.bottomRightCorner(n, n) = ops.U.topLeftCorner(n, n);
  }
  return M;
}

Vec reduced_metric(const OperatorSet& ops, int n) {
  Vec m(ops.size() + n);
  m.head(ops.size()) = ops.w;
  m.tail(n).setOnes();
  return m;
}

A2Decomposition quadratic_form_A2(const OperatorSet& ops, const Vec& h) {
  A2Decomposition d;
  d.gradient = h.dot(ops.stiffness * h);
  d.curvature = h.dot(ops.curvature * h);
  d.mu_p = -h.dot(ops.mu_p_mass * h);
  d.projection = h.dot(ops.projection_pp * h);
  d.lambda_term = ops.lambda * ops.lambda * h.dot(ops.w.cwiseProduct(h));
  d.total = d.gradient + d.curvature + d.mu_p + d.projection + d.lambda_term;
  d.matrix = h.dot(ops.A2 * h);
  return d;
}

LDecomposition quadratic_form_L(const OperatorSet& ops, const Vec& h) {
  LDecomposition d;
  d.value = h.dot(ops.L * h);
  d.a2 = h.dot(ops.A2 * h);
  const Vec bh = ops.Bstar * h;
  d.correction = bh.dot(ops.neg_A1.solve(bh));
  return d;
}

MinimizerCheck minimizer_identity_check(const Equilibrium& eq, const OperatorSet& ops0,
                                        const Vec& A_phi, const VelocityRuleSpec& velocity,
                                        int d_table) {
  if (!eq.homogeneous() || ops0.lambda != 0.0 || ops0.backend != ProjectionBackend::ClosedForm)
    throw std::invalid_argument("minimizer_identity_check: needs homogeneous closed-form operators");
  const CrossSectionGrid& g = eq.grid();
  const int N = g.size();
  const double a = g.frame().a();
  const MuProfile& prof = eq.profile();
  MinimizerCheck out;

  // Operator side.
  const Vec bA = ops0.Bstar * A_phi;
  const Vec phi_star = ops0.neg_A1.solve(bA);  // -A1^{-1} B* A_phi
  out.rhs_schur = bA.dot(phi_star);
  out.rhs_projection = A_phi.dot(ops0.projection_pp * A_phi);
  out.rhs = out.rhs_schur + out.rhs_projection;

  // Level-set means of phi_* and A_phi / R tabulated in the cut position d.
  const RegionIntegrator ri(g);
  std::vector<double> dd(d_table), Pphi(d_table), PA(d_table);
  for (int k = 0; k < d_table; ++k) {
    // Stop short of d = 1 where the region degenerates.
    dd[k] = -1.0 + (2.0 - 1e-6) * k / (d_table - 1);
    const RegionFunctional f = ri.functional(dd[k]);
    Pphi[k] = f.c1.dot(phi_star) / f.measure;
    PA[k] = f.cR.dot(A_phi) / f.measure;
  }
  auto lookup = [&](const std::vector<double>& tab, double d) {
    if (d <= dd.front()) return tab.front();
    if (d >= dd.back()) return tab.back();
    const double t = (d - dd.front()) / (dd.back() - dd.front()) * (d_table - 1);
    const int k = std::min(d_table - 2, static_cast<int>(t));
    const double u = t - k;
    return (1.0 - u) * tab[k] + u * tab[k + 1];
  };

  const VelocityQuadrature rule = velocity.build();
  const auto& vn = rule.axial_nodes();
  // |mu_e| weighted bracket (1 - P) phi_* + P(vphi_hat A_phi) at a point.
  auto pointwise = [&](double R, double phi_x, double& kin, double& charge, double& mup) {
    kin = charge = mup = 0.0;
    for (const auto& v : vn) {
      const double s = std::sqrt(v.vr * v.vr + v.vth * v.vth + v.vphi * v.vphi);
      const double e = std::sqrt(1.0 + s * s);
      const double p = R * v.vphi;
      const double d = s > 0.0 ? std::abs(p) / s - a : -1.0;
      const double bracket = phi_x - lookup(Pphi, d) + (p / e) * lookup(PA, d);
      double me = 0.0, mpp = 0.0;
      for (int sg : {1, -1}) {
        const MuValue mu = prof.eval_unchecked(sg, e, p);
        me += std::abs(mu.mu_e);
        mpp += mu.mu_p;
      }
      kin += v.w * me * bracket * bracket;
      charge -= v.w * me * bracket;
      mup += v.w * mpp;
    }
  };

  // Kinetic energy by cell quadrature.
  std::vector<double> rb{0.0};
  for (int i = 0; i < g.nr(); ++i) rb.push_back(g.r(i));
  rb.push_back(1.0);
  std::vector<double> tb;
  for (int j = 0; j <= g.nth(); ++j) tb.push_back(j * g.dth());
  const Rule1D rr = piecewise_gauss(rb, 2);
  const Rule1D tr = piecewise_gauss(tb, 2);
  for (std::size_t i = 0; i < rr.size(); ++i)
    for (std::size_t j = 0; j < tr.size(); ++j) {
      const double r = rr.x[i], th = tr.x[j];
      const double R = g.frame().weight(r, th);
      double kin, charge, mup;
      pointwise(R, g.interpolate(phi_star, r, th), kin, charge, mup);
      out.lhs_kinetic += kTwoPi * r * R * rr.w[i] * tr.w[j] * kin;
    }

  // Poisson problem for the charge of F_*, at the nodes.
  Vec rho(N);
  for (int k = 0; k < N; ++k) {
    const double R = g.node_R(k);
    double kin, charge, mup;
    pointwise(R, phi_star[k], kin, charge, mup);
    rho[k] = charge + R * A_phi[k] * mup;
  }
  Eigen::LLT<Mat> stiff(ops0.stiffness);
  const Vec phi_J = stiff.solve(ops0.w.cwiseProduct(rho));
  out.lhs_field = phi_J.dot(ops0.stiffness * phi_J);
  // The projection of vphi_hat A_phi sits inside the kinetic bracket.
  out.lhs = out.lhs_kinetic + out.lhs_field;
  const double nphi = std::sqrt(phi_star.dot(ops0.w.cwiseProduct(phi_star)));
  const Vec diff = phi_J - phi_star;
  out.phi_mismatch = nphi > 0.0 ? std::sqrt(diff.dot(ops0.w.cwiseProduct(diff))) / nphi : 0.0;
  const double scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
  out.gap = scale > 0.0 ? std::abs(out.lhs - out.rhs) / scale : 0.0;
  return out;
}

}  // namespace torvm
