#include "torvm/modefinder.hpp"

#include "torvm/log.hpp"
#include "torvm/stability.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace torvm {

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) throw std::invalid_argument("log_grid: bad range");
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1));
  return g;
}

NegativeCount negative_count(const OperatorSet& ops, int n) {
  NegativeCount out;
  const Mat M = reduced_matrix(ops, n);
  const Vec metric = reduced_metric(ops, n);
  out.eigenvalues = generalized_eigenvalues(M, metric);
  if (n == 0) {
    out.schur = true;
    out.count = static_cast<int>((out.eigenvalues.array() < 0.0).count());
    return out;
  }
  const Mat Un = ops.U.topLeftCorner(n, n);
  Eigen::SelfAdjointEigenSolver<Mat> ues(Un, Eigen::EigenvaluesOnly);
  out.u_max = ues.eigenvalues().maxCoeff();
  if (out.u_max < 0.0) {
    const Mat Vn = ops.V.topRows(n);
    const Mat schur = ops.L - Vn.transpose() * Un.ldlt().solve(Vn);
    const Vec sev = generalized_eigenvalues(0.5 * (schur + schur.transpose()), ops.w);
    out.schur = true;
    out.count = n + static_cast<int>((sev.array() < 0.0).count());
  } else {
    out.fallback = true;
    out.count = static_cast<int>((out.eigenvalues.array() < 0.0).count());
  }
  return out;
}

namespace {

struct Evaluation {
  CrossingRow row;
  OperatorSet ops;
};

Evaluation evaluate(const Equilibrium& eq, const DivFreeBasis& basis, const ModeOptions& opt,
                    double lambda) {
  OperatorOptions oo = opt.operators;
  oo.lambda = lambda;
  Evaluation ev;
  ev.ops = assemble_operators(eq, oo, &basis);
  const NegativeCount nc = negative_count(ev.ops, opt.n);
  ev.row.lambda = lambda;
  ev.row.count = nc.count;
  ev.row.fallback = nc.fallback;
  ev.row.ev_n = nc.eigenvalues[opt.n];
  ev.row.ev_min = nc.eigenvalues[0];
  ev.row.u_max = nc.u_max;
  return ev;
}

double wnorm_form(const Vec& f, const Vec& w) { return std::sqrt(f.dot(f.cwiseQuotient(w))); }

}  // namespace

CrossingResult find_crossing(const Equilibrium& eq, const DivFreeBasis& basis, const ModeOptions& opt) {
  if (opt.n < 1 || opt.n > basis.n) throw std::invalid_argument("find_crossing: truncation exceeds the basis");
  const std::vector<double> grid =
      opt.lambda_grid.empty() ? log_grid(opt.lambda_min, opt.lambda_max, opt.grid_points) : opt.lambda_grid;
  CrossingResult res;
  GrowingMode& mode = res.mode;
  mode.n = opt.n;

  std::vector<Evaluation> evals;
  for (double lam : grid) {
    evals.push_back(evaluate(eq, basis, opt, lam));
    mode.scan.push_back(evals.back().row);
  }
  // Last grid interval where the (n+1)-th eigenvalue turns nonnegative.
  int lo = -1;
  for (int i = static_cast<int>(evals.size()) - 2; i >= 0; --i)
    if (evals[i].row.ev_n < 0.0 && evals[i + 1].row.ev_n >= 0.0) {
      lo = i;
      break;
    }
  if (lo < 0) {
    std::ostringstream os;
    const bool all_pos = std::all_of(evals.begin(), evals.end(), [](const Evaluation& e) { return e.row.ev_n >= 0.0; });
    os << "no sign change of the (n+1)-th eigenvalue on [" << grid.front() << ", " << grid.back() << "]; "
       << (all_pos ? "lower lambda_min (or the equilibrium may be stable)" : "raise lambda_max");
    mode.message = os.str();
    return res;
  }
  mode.count_lo = evals[lo].row.count;
  mode.count_hi = evals[lo + 1].row.count;

  // Illinois-modified regula falsi in log lambda.
  double xa = std::log(grid[lo]), xb = std::log(grid[lo + 1]);
  double fa = evals[lo].row.ev_n, fb = evals[lo + 1].row.ev_n;
  Evaluation best = std::move(evals[lo + 1]);
  evals.clear();
  const double scale = std::max(1.0, std::abs(fa) + std::abs(fb));
  int side = 0;
  for (int it = 0; it < opt.max_steps; ++it) {
    if (std::abs(best.row.ev_n) <= opt.root_tol * scale || xb - xa < 1e-13) break;
    double x = (xa * fb - xb * fa) / (fb - fa);
    if (!(x > xa && x < xb)) x = 0.5 * (xa + xb);
    Evaluation e = evaluate(eq, basis, opt, std::exp(x));
    ++mode.bisection_steps;
    const double f = e.row.ev_n;
    if (f < 0.0) {
      xa = x;
      fa = f;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      xb = x;
      fb = f;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
    if (std::abs(f) < std::abs(best.row.ev_n) || it == 0) best = std::move(e);
  }
  mode.lambda_lo = std::exp(xa);
  mode.lambda_hi = std::exp(xb);
  mode.lambda0 = best.row.lambda;

  // Null vector: eigenvector of the (n+1)-th eigenvalue.
  const OperatorSet& ops = best.ops;
  const Mat M = reduced_matrix(ops, opt.n);
  const Vec metric = reduced_metric(ops, opt.n);
  const Vec s = metric.cwiseSqrt().cwiseInverse();
  Eigen::SelfAdjointEigenSolver<Mat> es(s.asDiagonal() * M * s.asDiagonal());
  Vec v = es.eigenvectors().col(opt.n).cwiseProduct(s);
  const int N = ops.size();
  Vec k = v.head(N), h = v.tail(opt.n);
  const double norm = std::sqrt(k.dot(ops.w.cwiseProduct(k))) + h.norm();
  const double sgn = k.sum() < 0.0 ? -1.0 : 1.0;
  k *= sgn / norm;
  h *= sgn / norm;
  v << k, h;
  const Vec r = M * v;
  mode.null_residual = std::sqrt(r.dot(r.cwiseQuotient(metric))) / std::sqrt(v.dot(metric.cwiseProduct(v)));
  mode.k = k;
  mode.h_tilde = h;
  mode.found = mode.null_residual < opt.tol_null;
  if (!mode.found) {
    std::ostringstream os;
    os << "null-vector residual " << mode.null_residual << " above " << opt.tol_null;
    mode.message = os.str();
  }
  res.ops = std::move(best.ops);
  return res;
}

namespace {

// Smooth test functions of x vanishing on the wall. The v_r-symmetric
// Gaussian bump in v is the sampling density, so only its normalization
// enters the weights.
struct TestFunction {
  int spatial = 0;
  Eigen::Vector3d c;  // bump centre (v_r, v_theta, v_phi)
  double x(double r, double th) const {
    const double b = 1.0 - r * r;
    switch (spatial) {
      case 0: return b;
      case 1: return b * r * std::cos(th);
      case 2: return b * r * std::sin(th);
      default: return b * b;
    }
  }
};

struct ModeField {
  const CrossSectionGrid& g;
  const Vec &phi, &aphi, &ar, &ath;
  // v_hat . A - phi at a phase point.
  double u(const PhaseState& z) const {
    const double ev = lorentz(z.vr, z.vth, z.vphi);
    return (z.vr * g.interpolate(ar, z.r, z.th) + z.vth * g.interpolate(ath, z.r, z.th) +
            z.vphi * g.interpolate(aphi, z.r, z.th)) / ev -
           g.interpolate(phi, z.r, z.th);
  }
};

// Discrete Q_lambda u at every backward sample: exact exponential weights on
// the piecewise-linear interpolant, Q_last = u_last.
std::vector<double> backward_averages(const std::vector<double>& u, double x) {
  const int n = static_cast<int>(u.size()) - 1;
  const double c1 = x < 1e-4 ? x / 2.0 - x * x / 3.0 + x * x * x / 8.0 : (1.0 - std::exp(-x) * (1.0 + x)) / x;
  const double m = -std::expm1(-x);
  const double decay = std::exp(-x);
  std::vector<double> q(n + 1);
  q[n] = u[n];
  for (int k = n - 1; k >= 0; --k) q[k] = (m - c1) * u[k] + c1 * u[k + 1] + decay * q[k + 1];
  return q;
}

MuValue mu_at(const Equilibrium& eq, const PhaseState& z) {
  const Invariants inv = invariants_at(eq, z.r, z.th, z.vr, z.vth, z.vphi);
  return z.sign > 0 ? eq.profile().eval_unchecked(1, inv.e_plus, inv.p_plus)
                    : eq.profile().eval_unchecked(-1, inv.e_minus, inv.p_minus);
}

}  // namespace

void reconstruct_and_verify(GrowingMode& mode, const Equilibrium& eq, const OperatorSet& ops,
                            const DivFreeBasis& basis, const OperatorSet* ops0, const ModeOptions& opt) {
  const CrossSectionGrid& g = eq.grid();
  const int N = g.size();
  const int n = static_cast<int>(mode.h_tilde.size());
  const double lam = mode.lambda0;
  if (mode.k.size() != N) throw std::invalid_argument("reconstruct_and_verify: candidate size mismatch");
  const Vec& k = mode.k;
  const Vec& h = mode.h_tilde;
  const Mat T1 = n > 0 ? Mat(ops.T1.topRows(n)) : Mat::Zero(0, N);
  const Mat T2 = n > 0 ? Mat(ops.T2.topRows(n)) : Mat::Zero(0, N);

  // phi from the first row.
  const Vec rhs1 = ops.Bstar * k + T1.transpose() * h;
  mode.phi = ops.neg_A1.solve(rhs1);
  const Vec& phi = mode.phi;

  // Galerkin rows of the Maxwell system. Each residual is measured against
  // the largest of the physical terms making up its row.
  auto rel = [&](const std::vector<Vec>& terms, const Vec& total, bool weighted) {
    auto nrm = [&](const Vec& x) { return weighted ? wnorm_form(x, ops.w) : x.norm(); };
    double s = 0.0;
    for (const auto& t : terms) s = std::max(s, nrm(t));
    return s > 0.0 ? nrm(total) / s : 0.0;
  };
  const Mat kin1 = ops.A1 + ops.stiffness;  // kinetic part of A1
  mode.maxwell_charge = rel({ops.stiffness * phi, kin1 * phi, ops.Bstar * k, T1.transpose() * h},
                            ops.A1 * phi + ops.Bstar * k + T1.transpose() * h, true);
  const Vec lam_k = lam * lam * ops.w.cwiseProduct(k);
  mode.maxwell_toroidal =
      rel({lam_k, (ops.stiffness + ops.curvature) * k, ops.mu_p_mass * k, ops.projection_pp * k, ops.B * phi,
           T2.transpose() * h},
          ops.B * phi + ops.A2 * k + T2.transpose() * h, true);
  if (n > 0) {
    const Mat Sn = ops.S.topLeftCorner(n, n);
    const Vec lam_h = lam * lam * h;
    const Vec sig_h = basis.sigma.head(n).cwiseProduct(h);
    mode.maxwell_poloidal = rel({lam_h, sig_h, Sn * h + lam_h + sig_h, T1 * phi, T2 * k},
                                T1 * phi + T2 * k + Sn * h, false);
  }

  // Fields at the nodes.
  Vec c = Vec::Zero(basis.n);
  c.head(n) = h;
  const NodalVector At = combine_nodal(basis, c);
  mode.A_r = At.r;
  mode.A_th = At.th;
  mode.divergence_max = basis.max_divergence;
  const NodalFields nf = reconstruct_fields(g, phi, k);
  mode.E_r = nf.E_r - lam * mode.A_r;
  mode.E_th = nf.E_th - lam * mode.A_th;
  mode.E_phi = -lam * k;
  mode.B_r = nf.B_r;
  mode.B_th = nf.B_th;
  mode.B_phi.resize(N);
  {
    // (1/r)[d_r(r A_theta) - d_theta A_r]; both components flip sign across the axis.
    const int nr = g.nr(), nt = g.nth();
    auto val = [&](const Vec& f, int i, int j, double& r) {
      j = ((j % nt) + nt) % nt;
      if (i < 0) {
        r = g.r(0);
        return -f[g.index(0, (j + nt / 2) % nt)];
      }
      r = g.r(i);
      return f[g.index(i, j)];
    };
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nt; ++j) {
        double r0, rm, rp;
        const double a0 = val(mode.A_th, i, j, r0);
        double d_r;
        if (i + 1 < nr) {
          const double ap = val(mode.A_th, i + 1, j, rp), am = val(mode.A_th, i - 1, j, rm);
          // Across the axis the signed radius is -r_0.
          const double sm = i == 0 ? -rm : rm;
          d_r = (rp * ap - sm * am) / (2.0 * g.dr());
        } else {
          const double am = val(mode.A_th, i - 1, j, rm);
          d_r = (r0 * a0 - rm * am) / g.dr();
        }
        double r_;
        const double d_t = (val(mode.A_r, i, j + 1, r_) - val(mode.A_r, i, j - 1, r_)) / (2.0 * g.dth());
        mode.B_phi[g.index(i, j)] = (d_r - d_t) / g.r(i);
      }
  }

  // Energy combination on the mode.
  if (ops0) {
    const double lk = k.dot(ops0->L * k);
    const double a2 = lam * lam * (k.dot(ops.w.cwiseProduct(k)) + h.squaredNorm());
    const double bphi = n > 0 ? h.dot(basis.sigma.head(n).cwiseProduct(h)) : 0.0;
    mode.energy = lk + a2 + bphi;
    mode.energy_scale = std::abs(lk) + a2 + bphi;
  }

  // Phase-space checks along backward trajectories.
  const ModeField field{g, phi, k, mode.A_r, mode.A_th};
  const Tracer tracer(eq);
  const double delta = opt.vlasov_step / lam;
  const int steps = static_cast<int>(std::ceil(opt.vlasov_horizon / opt.vlasov_step)) + 2;
  std::vector<double> times(steps + 1);
  for (int s = 0; s <= steps; ++s) times[s] = s * delta;
  std::vector<PhaseState> states;
  std::vector<double> u(steps + 1);
  // Q u at the samples Phi_{-s delta}(top), s = 0, 1, 2.
  auto averages = [&](const PhaseState& top) {
    tracer.backward(top, times, states);
    for (int s = 0; s <= steps; ++s) u[s] = field.u(states[s]);
    return backward_averages(u, lam * delta);
  };
  auto f_value = [&](const PhaseState& z, double qu) {
    const MuValue mu = mu_at(eq, z);
    const double R = g.frame().weight(z.r, z.th);
    return z.sign * (mu.mu_e * g.interpolate(phi, z.r, z.th) + R * mu.mu_p * g.interpolate(k, z.r, z.th) +
                     mu.mu_e * qu);
  };

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> nrm(0.0, 1.0);

  // Reconstructed distribution at sampled phase points.
  mode.samples.clear();
  for (int i = 0; i < opt.distribution_samples; ++i) {
    PhaseState z{std::sqrt(uni(rng)), kTwoPi * uni(rng), nrm(rng), nrm(rng), nrm(rng), i % 2 == 0 ? 1 : -1};
    const auto q = averages(z);
    mode.samples.push_back({z, f_value(z, q[0])});
  }

  // Specularity at the wall.
  double fmax = 0.0, dmax = 0.0;
  for (int i = 0; i < opt.specular_points; ++i) {
    PhaseState z{1.0 - 1e-12, kTwoPi * uni(rng), nrm(rng), nrm(rng), nrm(rng), i % 2 == 0 ? 1 : -1};
    const double f1 = f_value(z, averages(z)[0]);
    const PhaseState zb = specular_image(z);
    const double f2 = f_value(zb, averages(zb)[0]);
    fmax = std::max({fmax, std::abs(f1), std::abs(f2)});
    dmax = std::max(dmax, std::abs(f1 - f2));
  }
  for (const auto& s : mode.samples) fmax = std::max(fmax, std::abs(s.f));
  mode.specular_max = fmax > 0.0 ? dmax / fmax : 0.0;

  // Weak Vlasov panel: <(lambda + D) g - lambda h, psi> with g = mu_e Q u and
  // h = mu_e u. D g is the derivative along the flow, taken by central
  // differences of the discrete backward averages.
  const std::array<Eigen::Vector3d, 2> centres{Eigen::Vector3d(0.8, 0.0, 0.5), Eigen::Vector3d(0.3, -0.6, -0.8)};
  mode.vlasov.clear();
  for (int sp = 0; sp < 4; ++sp)
    for (const auto& cc : centres) {
      const TestFunction tf{sp, cc};
      for (int sign : {1, -1}) {
        double lg = 0.0, dg = 0.0, lh = 0.0, res = 0.0;
        for (int i = 0; i < opt.vlasov_points; ++i) {
          const double r = std::sqrt(uni(rng)), th = kTwoPi * uni(rng);
          const double mirror = uni(rng) < 0.5 ? -1.0 : 1.0;
          const double vr = mirror * cc[0] + nrm(rng), vth = cc[1] + nrm(rng), vphi = cc[2] + nrm(rng);
          // Start one step ahead so the centre sample sits at index 1.
          PhaseState z{r, th, vr, vth, vphi, sign};
          std::vector<PhaseState> ahead;
          tracer.forward(z, {0.0, delta}, ahead);
          const auto q = averages(ahead[1]);
          const PhaseState& zc = states[1];
          const double mu_e = mu_at(eq, zc).mu_e;
          // Importance weight: uniform disk times the bump mixture density.
          const double R = g.frame().weight(zc.r, zc.th);
          const double wgt = 2.0 * kPi * kPi * R * tf.x(zc.r, zc.th) * 2.0 * std::pow(kTwoPi, 1.5) /
                             opt.vlasov_points;
          const double a = wgt * mu_e * lam * q[1];
          const double b = wgt * mu_e * (q[0] - q[2]) / (2.0 * delta);
          const double c2 = wgt * mu_e * lam * u[1];
          lg += a;
          dg += b;
          lh += c2;
          res += a + b - c2;
        }
        const double scale = std::abs(lg) + std::abs(dg) + std::abs(lh);
        mode.vlasov.push_back(scale > 0.0 ? std::abs(res) / scale : 0.0);
      }
    }
  mode.vlasov_max = mode.vlasov.empty() ? 0.0 : *std::max_element(mode.vlasov.begin(), mode.vlasov.end());

  mode.accepted = mode.found && mode.null_residual < opt.tol_null && mode.maxwell_charge < opt.tol_maxwell &&
                  mode.maxwell_toroidal < opt.tol_maxwell && mode.maxwell_poloidal < opt.tol_maxwell &&
                  mode.vlasov_max < opt.tol_vlasov;
  if (!mode.accepted && mode.message.empty()) {
    std::ostringstream os;
    os << "residuals above tolerance: null " << mode.null_residual << "; maxwell " << mode.maxwell_charge << ", " << mode.maxwell_toroidal << ", "
       << mode.maxwell_poloidal << "; vlasov " << mode.vlasov_max;
    mode.message = os.str();
  }
}

}  // namespace torvm
