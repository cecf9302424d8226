// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "torvm/config.hpp"
#include "torvm/modefinder.hpp"
#include "torvm/quadrature.hpp"
#include "torvm/stability.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

using namespace torvm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

RunConfig config(const std::string& name) { return load_config(std::string(TORVM_SOURCE_DIR) + "/configs/" + name); }

Equilibrium solve(const RunConfig& c) {
  return solve_picard(MuProfile(c.profile), c.grid(), c.velocity.build(), c.picard());
}

TracerOptions tracer_options(const RunConfig& c) {
  TracerOptions t;
  t.dt = c.dt;
  t.bounce_cap = c.bounce_cap;
  return t;
}

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Shared artifacts, built on first use.
struct Fixtures {
  std::unique_ptr<CrossSectionGrid> g16;
  std::unique_ptr<Equilibrium> vacuum, stable_even, instability, small_mu_p;
  RunConfig cfg_small_mu_p;
  std::unique_ptr<OperatorSet> ops_small_mu_p;

  const CrossSectionGrid& grid16() {
    if (!g16) g16 = std::make_unique<CrossSectionGrid>(ToroidalFrame(3.0), 16, 16);
    return *g16;
  }
  const Equilibrium& vac() {
    if (!vacuum) vacuum = std::make_unique<Equilibrium>(solve(config("vacuum.ini")));
    return *vacuum;
  }
  const Equilibrium& even() {
    if (!stable_even) stable_even = std::make_unique<Equilibrium>(solve(config("stable_even.ini")));
    return *stable_even;
  }
  const Equilibrium& inst() {
    if (!instability) instability = std::make_unique<Equilibrium>(solve(config("instability_mode.ini")));
    return *instability;
  }
  const Equilibrium& smp() {
    if (!small_mu_p) {
      cfg_small_mu_p = config("small_mu_p.ini");
      small_mu_p = std::make_unique<Equilibrium>(solve(cfg_small_mu_p));
    }
    return *small_mu_p;
  }
  const OperatorSet& smp_ops() {
    if (!ops_small_mu_p) {
      const Equilibrium& eq = smp();
      ops_small_mu_p = std::make_unique<OperatorSet>(assemble_operators(eq, cfg_small_mu_p.operators(0.0)));
    }
    return *ops_small_mu_p;
  }
};

Fixtures fx;

PhaseState random_state(std::mt19937_64& rng, bool on_wall = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  PhaseState z;
  z.r = on_wall ? 1.0 - 1e-12 : std::sqrt(u(rng));
  z.th = kTwoPi * u(rng);
  z.vr = n(rng);
  z.vth = n(rng);
  z.vphi = n(rng);
  z.sign = u(rng) < 0.5 ? 1 : -1;
  if (on_wall) z.vr = -std::abs(z.vr);  // leaving the wall
  return z;
}

double invariant_drift(const Equilibrium& eq, const PhaseState& a, const PhaseState& b) {
  const Invariants i = invariants_at(eq, a.r, a.th, a.vr, a.vth, a.vphi);
  const Invariants j = invariants_at(eq, b.r, b.th, b.vr, b.vth, b.vphi);
  return a.sign > 0 ? std::max(std::abs(i.e_plus - j.e_plus), std::abs(i.p_plus - j.p_plus))
                    : std::max(std::abs(i.e_minus - j.e_minus), std::abs(i.p_minus - j.p_minus));
}

double state_distance(const PhaseState& a, const PhaseState& b) {
  return std::max({std::abs(a.r - b.r), std::abs(std::remainder(a.th - b.th, kTwoPi)), std::abs(a.vr - b.vr),
                   std::abs(a.vth - b.vth), std::abs(a.vphi - b.vphi)});
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  // The three named equilibria are homogeneous, where the default path is
  // exact free streaming; each is also run through RK4 at dt = 1e-3. The
  // inhomogeneous small_mu_p equilibrium is added as a nontrivial field case.
  struct Case {
    const char* name;
    const Equilibrium* eq;
    bool force;
  };
  const std::vector<Case> cases{{"vacuum", &fx.vac(), false},       {"vacuum/rk4", &fx.vac(), true},
                                {"stable_even", &fx.even(), false}, {"stable_even/rk4", &fx.even(), true},
                                {"instability", &fx.inst(), false}, {"instability/rk4", &fx.inst(), true},
                                {"small_mu_p/rk4", &fx.smp(), true}};
  double worst = 0.0;
  std::string per;
  for (const Case& c : cases) {
    TracerOptions opt;
    opt.dt = 1e-3;
    opt.force_rk4 = c.force;
    const Tracer tr(*c.eq, opt);
    std::mt19937_64 rng(101);
    double m = 0.0;
    for (int s = 0; s < 100; ++s) {
      const PhaseState z = random_state(rng);
      for (const auto& p : tr.sample(z, 50.0, 0.5)) m = std::max(m, invariant_drift(*c.eq, z, p.state));
    }
    worst = std::max(worst, m);
    per += fmt(" %s=%.1e", c.name, m);
  }
  return {worst < 1e-6, fmt("max drift %.2e (<1e-6) over 100 seeds, T=50;", worst) + per};
}

Outcome criterion2() {
  struct Case {
    const char* name;
    const Equilibrium* eq;
    TracerOptions opt;
  };
  TracerOptions rk;
  rk.dt = 1e-3;
  const std::vector<Case> cases{{"vacuum", &fx.vac(), TracerOptions{}}, {"small_mu_p", &fx.smp(), rk}};
  double rev = 0.0, spec = 0.0;
  int max_bounces = 0, capped = 0, degenerate = 0;
  for (const Case& c : cases) {
    const Tracer tr(*c.eq, c.opt);
    std::mt19937_64 rng(202);
    for (int s = 0; s < 50; ++s) {
      const PhaseState z = random_state(rng, true);
      std::vector<PhaseState> fw, back, a, b;
      tr.forward(z, {0.0, 5.0}, fw);
      tr.forward(time_reversed(fw[1]), {0.0, 5.0}, back);
      // Wall states are identified with their specular image.
      const PhaseState r = time_reversed(back[1]);
      rev = std::max(rev, std::min(state_distance(r, z), state_distance(specular_image(r), z)));
      tr.forward(z, {0.0, 3.0}, a);
      tr.forward(specular_image(z), {0.0, 3.0}, b);
      spec = std::max(spec, state_distance(a[1], b[1]));
      TraceStats st;
      tr.sample(z, 100.0, 1.0, &st);
      max_bounces = std::max(max_bounces, st.bounces);
      capped += st.capped;
      degenerate += st.degenerate;
    }
  }
  const bool pass = rev < 1e-6 && spec < 1e-6 && capped == 0;
  return {pass, fmt("time reversal %.2e, specular %.2e (<1e-6); T=100: max bounces %d, capped %d, grazing %d "
                    "(cap %d)",
                    rev, spec, max_bounces, capped, degenerate, TracerOptions{}.bounce_cap)};
}

// Coarse 5D brute force of sum_species ||P(vphi_hat h)||_H^2 in the
// homogeneous case: x over the cross-section, v over (v_phi, |v_perp|), and
// the level-set mean of (p / (R e)) h over {y1 > d} in a chord
// parametrisation y1 = cos(alpha), y2 = u sin(alpha).
double brute_force_projected_norm(const Equilibrium& eq, const Vec& h) {
  const CrossSectionGrid& g = eq.grid();
  const double a = g.frame().a();
  const MuProfile& prof = eq.profile();
  const Rule1D rr = composite_gauss(3, 4, 0.0, 1.0);
  const int nth = 24;
  const double vmax = 12.0;
  const Rule1D vp = composite_gauss(12, 4, -vmax, vmax);
  const Rule1D vq = composite_gauss(6, 4, 0.0, vmax);
  const Rule1D ar = gauss_legendre(12, 0.0, 1.0);
  const Rule1D ur = gauss_legendre(8, -1.0, 1.0);

  auto level_mean = [&](double p, double e, double d) {
    const double a0 = std::acos(std::max(-1.0, std::min(1.0, d)));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ar.size(); ++i) {
      const double al = a0 * ar.x[i], sa = std::sin(al), y1 = std::cos(al);
      for (std::size_t j = 0; j < ur.size(); ++j) {
        const double y2 = ur.x[j] * sa;
        const double w = a0 * ar.w[i] * ur.w[j] * sa * sa;
        const double r = std::hypot(y1, y2), th = std::atan2(y2, y1);
        num += w * p / ((a + y1) * e) * g.interpolate(h, std::min(r, 1.0), th < 0 ? th + kTwoPi : th);
        den += w;
      }
    }
    return num / den;
  };

  double total = 0.0;
  for (std::size_t i = 0; i < rr.size(); ++i) {
    const double r = rr.x[i];
    for (int j = 0; j < nth; ++j) {
      const double th = (j + 0.5) * kTwoPi / nth;
      const double R = a + r * std::cos(th);
      const double wx = kTwoPi * R * r * rr.w[i] * kTwoPi / nth;
      for (std::size_t k = 0; k < vp.size(); ++k) {
        for (std::size_t l = 0; l < vq.size(); ++l) {
          const double rho = vq.x[l];
          const double e = std::sqrt(1.0 + vp.x[k] * vp.x[k] + rho * rho);
          const double p = R * vp.x[k];
          const double s = std::sqrt(e * e - 1.0);
          const double wv = vp.w[k] * vq.w[l] * rho * kTwoPi;
          const double mu = std::abs(prof.eval_unchecked(1, e, p).mu_e) + std::abs(prof.eval_unchecked(-1, e, p).mu_e);
          if (mu == 0.0) continue;
          const double P = level_mean(p, e, std::abs(p) / s - a);
          total += wx * wv * mu * P * P;
        }
      }
    }
  }
  return total;
}

Outcome criterion3() {
  // (a) ergodic time averages against the level-set mean.
  const Equilibrium& eq = fx.vac();
  const Tracer tr(eq);
  const RegionIntegrator ri(eq.grid());
  const auto h = [](double r, double th) { return 1.0 + 0.5 * r * std::cos(th) + 0.25 * r * r + 0.3 * r * std::sin(th); };
  std::mt19937_64 rng(303);
  double worst = 0.0;
  int within = 0;
  std::vector<double> errs;
  for (int s = 0; s < 30; ++s) {
    PhaseState z = random_state(rng);
    z.sign = 1;
    const double e = lorentz(z.vr, z.vth, z.vphi), p = eq.frame().weight(z.r, z.th) * z.vphi;
    const double closed = project_homogeneous(ri, h, e, p);
    const ErgodicResult er =
        ergodic_average([&](const PhaseState& q) { return h(q.r, q.th); }, z, tr, 1000.0, 0.05);
    const double rel = std::abs(er.value - closed) / std::abs(closed);
    errs.push_back(rel);
    worst = std::max(worst, rel);
    within += rel < 0.02;
  }
  std::sort(errs.begin(), errs.end());

  // (b) closed-form projected norm against brute force.
  const CrossSectionGrid& g = fx.grid16();
  ProfileSpec ps;
  ps.family = ProfileFamily::Instability;
  ps.mode = SpeciesMode::Mirror;
  ps.c_plus = ps.c_minus = 0.01;
  ps.K = 1.0;
  const Equilibrium inst(g, MuProfile(ps), Vec::Zero(g.size()), Vec::Zero(g.size()));
  const Vec hw = witness_function(g);
  const HomogeneousGram G = homogeneous_gram(RegionIntegrator(g), inst.profile());
  const auto cf = projected_vphi_norm(hw, G);
  const double closed = cf[0] + cf[1];
  const double brute = brute_force_projected_norm(inst, hw);
  const double rel_b = std::abs(closed - brute) / brute;

  const bool pass = worst < 0.02 && rel_b < 0.02;
  return {pass, fmt("ergodic vs level-set mean: max rel %.3f, median %.4f, %d/30 within 2%%; "
                    "||P(vphi h)||^2 closed %.6g vs brute force %.6g (rel %.4f)",
                    worst, errs[errs.size() / 2], within, closed, brute, rel_b)};
}

Outcome criterion4() {
  bool pass = true;
  std::string d;
  auto structure = [&](const char* name, const OperatorSet& ops, bool symmetric_profile) {
    const double kin = max_abs(ops.A1 + ops.stiffness);
    const double b_rel = max_abs(ops.B) / std::max(kin, 1e-300);
    bool ok = ops.a1_max_eigenvalue < 0.0 && ops.asym_A2 < 1e-8 && ops.asym_L < 1e-8;
    if (symmetric_profile) ok = ok && b_rel < 1e-8;
    pass = pass && ok;
    d += fmt("%s: A1max %.3g, asym A2 %.1e L %.1e, |B|/|A1kin| %.1e; ", name, ops.a1_max_eigenvalue, ops.asym_A2,
             ops.asym_L, b_rel);
  };
  const OperatorSet inst0 = assemble_operators(fx.inst(), config("instability_mode.ini").operators(0.0));
  structure("instability", inst0, true);
  const OperatorSet even0 = assemble_operators(fx.even(), config("stable_even.ini").operators(0.0));
  structure("stable_even", even0, true);
  structure("small_mu_p", fx.smp_ops(), false);

  // Q_lambda: the kinetic part of A1 stays nonpositive (norm at most one).
  OperatorOptions oo = config("instability_mode.ini").operators(1.0);
  const OperatorSet inst1 = assemble_operators(fx.inst(), oo);
  const Mat kin = inst1.A1 + inst1.stiffness;
  const Vec ev = generalized_eigenvalues(0.5 * (kin + kin.transpose()), inst1.w);
  const double top = ev[ev.size() - 1] / max_abs(kin);
  pass = pass && top <= 1e-12;
  d += fmt("lambda=1 kinetic A1 top eig %.1e; ", top);

  // Pointwise: |Q g| <= sup|g| and |Q_l g - Q_m g| <= 2 |log l - log m| sup|g|.
  const PhaseFunction gfun = [](const PhaseState& s) { return std::cos(2 * s.th) * s.r + 0.5 * std::tanh(s.vphi); };
  const double sup = 1.5;
  double norm_ratio = 0.0, lip_ratio = 0.0;
  for (const Equilibrium* eq : {&fx.inst(), &fx.smp()}) {
    const Tracer tr(*eq, tracer_options(fx.cfg_small_mu_p));
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int s = 0; s < 20; ++s) {
      const PhaseState z = random_state(rng);
      const double l1 = 0.5 + 2.0 * u(rng), l2 = l1 * std::exp(1.5 * u(rng));
      const double q1 = q_lambda_average(gfun, l1, z, tr, 40.0 / l1, 0.01).value;
      const double q2 = q_lambda_average(gfun, l2, z, tr, 40.0 / l2, 0.01).value;
      norm_ratio = std::max({norm_ratio, std::abs(q1) / sup, std::abs(q2) / sup});
      lip_ratio = std::max(lip_ratio, std::abs(q1 - q2) / (2.0 * std::log(l2 / l1) * sup));
    }
  }
  pass = pass && norm_ratio <= 1.0 && lip_ratio <= 1.0;
  d += fmt("max |Qg|/sup|g| %.3f, max log-Lipschitz ratio %.3f", norm_ratio, lip_ratio);
  return {pass, d};
}

Vec random_potential(const CrossSectionGrid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  double c[6];
  for (double& x : c) x = n(rng);
  return g.sample([&](double r, double th) {
    const double y1 = r * std::cos(th), y2 = r * std::sin(th);
    return (1 - r * r) * (c[0] + c[1] * y1 + c[2] * y2 + c[3] * y1 * y2 + c[4] * r * r + c[5] * y1 * y1);
  });
}

Outcome criterion5() {
  const CrossSectionGrid& g = fx.grid16();
  ProfileSpec asym;
  asym.family = ProfileFamily::SmallMuP;
  asym.mode = SpeciesMode::Identical;
  asym.c_plus = asym.c_minus = 0.05;
  asym.eps = 0.3;
  const Equilibrium e1(g, MuProfile(asym), Vec::Zero(g.size()), Vec::Zero(g.size()));
  const Equilibrium& e2 = fx.inst();
  double worst = 0.0;
  std::string d;
  for (const Equilibrium* eq : {&e1, &e2}) {
    const OperatorOptions opt;
    const OperatorSet ops = assemble_operators(*eq, opt);
    std::mt19937_64 rng(505);
    double m = 0.0;
    for (int t = 0; t < 5; ++t) {
      const MinimizerCheck c = minimizer_identity_check(*eq, ops, random_potential(g, rng), opt.velocity);
      m = std::max(m, c.gap);
    }
    worst = std::max(worst, m);
    d += fmt(" %s(|B| %.2g)=%.4f", family_name(eq->profile().family()).c_str(), max_abs(ops.B), m);
  }
  return {worst < 0.03, fmt("max relative gap %.4f (<0.03) over 5 potentials;", worst) + d};
}

Outcome criterion6() {
  bool pass = true;
  std::string d;
  for (const char* name : {"stable_even.ini", "small_mu_p.ini"}) {
    Verdict v[2];
    for (int level = 0; level < 2; ++level) {
      RunConfig c = config(name);
      if (level == 1) {
        c.nr *= 2;
        c.nth *= 2;
      }
      const auto t0 = Clock::now();
      const Equilibrium eq = level == 0 && std::string(name) == "small_mu_p.ini" ? fx.smp() : solve(c);
      const StabilityReport rep = level == 0 && std::string(name) == "small_mu_p.ini"
                                      ? assess(eq, fx.smp_ops(), c.stability())
                                      : assess(eq, c.stability());
      v[level] = rep.verdict;
      const bool ok = rep.kappa >= -rep.tol_eig;
      pass = pass && ok;
      if (level == 0 && std::string(name) == "stable_even.ini") pass = pass && rep.small_field.satisfied;
      d += fmt("%s %dx%d: kappa %.4g (tol %.1e) %s, small-field %.3g%s (%.0fs); ", name, c.nr, c.nth, rep.kappa,
               rep.tol_eig, verdict_name(rep.verdict).c_str(), rep.small_field.value,
               rep.small_field.satisfied ? " ok" : " violated", seconds_since(t0));
    }
    pass = pass && v[0] == v[1];
  }
  return {pass, d};
}

Outcome criterion7() {
  const RunConfig c = config("instability_scan.ini");
  const auto t0 = Clock::now();
  const ScanResult res = scan_K(c.profile, c.K_values, c.grid(), c.scan());
  const double secs = seconds_since(t0);
  bool all_ok = true;
  double lower_sup = 0.0, upper_sup = 0.0;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    all_ok = all_ok && res.rows[i].ok;
    (i < res.rows.size() / 2 ? lower_sup : upper_sup) =
        std::max(i < res.rows.size() / 2 ? lower_sup : upper_sup, res.rows[i].sup_aphi);
  }
  const ScanRow& last = res.rows.back();
  const bool bounded = std::isfinite(res.sup_aphi_max) && upper_sup <= 2.0 * std::max(lower_sup, 1e-12);
  const bool dominant = std::abs(last.witness.I) > std::abs(last.witness.II) + last.witness.III;
  const bool slope = std::abs(res.I_exponent - 2.0) < 0.2;
  const bool pass = all_ok && res.K0.has_value() && bounded && dominant && slope && secs < 1800.0;
  return {pass, fmt("%dx%d, %zu K values: K0 %s, sup|A_phi| max %.3g, I slope %.3f, at K=%g I=%.4g II=%.3g "
                    "III=%.4g form=%.4g, runtime %.0fs (<1800)",
                    c.nr, c.nth, res.rows.size(), res.K0 ? fmt("%.4g", *res.K0).c_str() : "none",
                    res.sup_aphi_max, res.I_exponent, last.K, last.witness.I, last.witness.II, last.witness.III,
                    last.witness_form, secs)};
}

Outcome criterion8() {
  const RunConfig c = config("instability_mode.ini");
  const auto t0 = Clock::now();
  const Equilibrium& eq = fx.inst();
  const ModeOptions mo = c.mode();
  const DivFreeBasis basis = build_divfree_basis(eq.grid(), mo.n);
  CrossingResult cr = find_crossing(eq, basis, mo);
  GrowingMode& m = cr.mode;
  if (!m.found) return {false, "no crossing: " + m.message};
  const OperatorSet ops0 = assemble_operators(eq, c.operators(0.0));
  reconstruct_and_verify(m, eq, cr.ops, basis, &ops0, mo);
  const int lo = m.scan.front().count, hi = m.scan.back().count;
  const double maxwell = std::max({m.maxwell_charge, m.maxwell_toroidal, m.maxwell_poloidal});
  const bool pass = hi == mo.n && lo >= mo.n + 1 && m.count_lo > m.count_hi && m.lambda_lo <= m.lambda0 &&
                    m.lambda0 <= m.lambda_hi && m.null_residual < 1e-6 && maxwell < 1e-4 && m.vlasov_max < 1e-3;
  return {pass, fmt("n=%d: count %d at lambda=%g, %d at lambda=%g; lambda0 %.6g in [%.6g, %.6g] (counts %d->%d); "
                    "null %.1e, Maxwell %.1e, Vlasov %.1e, energy %.4g (%.0fs)",
                    mo.n, lo, m.scan.front().lambda, hi, m.scan.back().lambda, m.lambda0, m.lambda_lo, m.lambda_hi,
                    m.count_lo, m.count_hi, m.null_residual, maxwell, m.vlasov_max, m.energy, seconds_since(t0))};
}

Outcome criterion9() {
  // Entrywise comparison of the coupled operator [[A1, B^T], [B, A2]] and of
  // L, each against its largest entry at lambda = 0.
  auto block = [](const OperatorSet& o) {
    const int n = o.size();
    Mat M(2 * n, 2 * n);
    M << o.A1, o.B.transpose(), o.B, o.A2;
    return M;
  };
  bool pass = true;
  std::string d;
  const CrossSectionGrid& g = fx.grid16();
  ProfileSpec asym;
  asym.family = ProfileFamily::SmallMuP;
  asym.mode = SpeciesMode::Identical;
  asym.c_plus = asym.c_minus = 0.05;
  asym.eps = 0.3;
  const Equilibrium e1(g, MuProfile(asym), Vec::Zero(g.size()), Vec::Zero(g.size()));
  for (const Equilibrium* eq : {&fx.inst(), &e1}) {
    OperatorOptions o0;
    const OperatorSet z = assemble_operators(*eq, o0);
    OperatorOptions o1;
    o1.lambda = 1e-3;
    const OperatorSet s = assemble_operators(*eq, o1);
    const double rb = max_abs(block(s) - block(z)) / max_abs(block(z));
    const double rl = max_abs(s.L - z.L) / max_abs(z.L);
    const double r1 = max_abs(s.A1 - z.A1) / max_abs(z.A1), r2 = max_abs(s.A2 - z.A2) / max_abs(z.A2);
    const double kin = max_abs((s.A1 + s.stiffness) - (z.A1 + z.stiffness)) / max_abs(z.A1 + z.stiffness);
    pass = pass && rb < 0.01 && rl < 0.01;
    d += fmt("%s: block %.2e (A1 %.2e, A2 %.2e), L %.2e, kinetic part of A1 alone %.2e; ",
             family_name(eq->profile().family()).c_str(), rb, r1, r2, rl, kin);
  }

  // Large lambda: Q_lambda g -> g on a smooth panel.
  const std::vector<PhaseFunction> panel{
      [](const PhaseState& s) { return 1.0 + 0.5 * s.r * std::cos(s.th); },
      [](const PhaseState& s) { return s.r * s.r * std::sin(2 * s.th); },
      [](const PhaseState& s) { return std::cos(s.r * std::sin(s.th)) * (1 + 0.2 * s.vphi / lorentz(s.vr, s.vth, s.vphi)); },
  };
  double worst = 0.0;
  for (const Equilibrium* eq : {&fx.inst(), &fx.smp()}) {
    TracerOptions t = tracer_options(fx.cfg_small_mu_p);
    t.dt = 1e-4;
    const Tracer tr(*eq, t);
    std::mt19937_64 rng(909);
    for (int s = 0; s < 20; ++s) {
      const PhaseState z = random_state(rng);
      for (const auto& gf : panel) {
        const double q = q_lambda_average(gf, 1e3, z, tr, 0.05, 1e-4).value;
        worst = std::max(worst, std::abs(q - gf(z)) / 1.5);
      }
    }
  }
  pass = pass && worst < 1e-3;
  d += fmt("lambda=1e3: max |Q g - g| / sup|g| %.2e (<1e-3)", worst);
  return {pass, d};
}

Outcome criterion10() {
  const double j01 = boost::math::cyl_bessel_j_zero(0.0, 1);
  const CrossSectionGrid g(ToroidalFrame(1000.0), 32, 32);
  const ScalarLaplacian lap = assemble_scalar_laplacian(g, false);
  const double l1 = smallest_eigenvalue(-lap.dense_form(), g.weights()).value;
  const double rel = std::abs(l1 / (j01 * j01) - 1.0);
  double vol = 0.0;
  for (int n : {16, 32, 64}) {
    const CrossSectionGrid gv(ToroidalFrame(3.0), n, n);
    vol = std::max(vol, std::abs(gv.volume() / (2.0 * kPi * kPi * 3.0) - 1.0));
  }
  return {rel < 0.01 && vol < 1e-3,
          fmt("a=1000 32x32: lambda1 %.5f vs j01^2 %.5f (rel %.2e < 1e-2); volume rel error %.1e (< 1e-3)", l1,
              j01 * j01, rel, vol)};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}};
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d: %s  [%.0fs] %s\n", id, o.pass ? "PASS" : "FAIL", seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
