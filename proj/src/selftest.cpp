#include "torvm/selftest.hpp"

#include "torvm/config.hpp"
#include "torvm/modefinder.hpp"
#include "torvm/stability.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace torvm {

namespace {

// Smooth synthetic equilibrium fields vanishing on the wall.
Equilibrium synthetic(const CrossSectionGrid& g, const MuProfile& prof, double phi0, double a0) {
  const Vec phi = g.sample([&](double r, double) { return phi0 * (1.0 - r * r); });
  const Vec aphi = g.sample([&](double r, double th) { return a0 * (1.0 - r * r) * (1.0 + 0.3 * r * std::cos(th)); });
  return Equilibrium(g, prof, phi, aphi, 6);
}

ProfileSpec instability_profile(double K) {
  ProfileSpec ps;
  ps.family = ProfileFamily::Instability;
  ps.mode = SpeciesMode::Mirror;
  ps.c_plus = ps.c_minus = 0.01;
  ps.K = K;
  return ps;
}

template <class F>
void run_case(std::vector<SelftestCase>& out, const std::string& name, double threshold, F&& body) {
  SelftestCase c;
  c.name = name;
  c.threshold = threshold;
  try {
    body(c);
  } catch (const std::exception& ex) {
    c.passed = false;
    c.detail = std::string("exception: ") + ex.what();
  }
  out.push_back(c);
}

}  // namespace

std::vector<SelftestCase> run_selftest(unsigned long long seed) {
  std::vector<SelftestCase> out;
  const ToroidalFrame frame(3.0);
  const CrossSectionGrid g8(frame, 8, 8);
  const CrossSectionGrid g16(frame, 16, 16);

  run_case(out, "torus_volume", 1e-3, [&](SelftestCase& c) {
    c.value = std::abs(g16.volume() / frame.volume() - 1.0);
    c.passed = c.value < c.threshold;
    c.detail = "relative error of the cross-section quadrature volume";
  });

  run_case(out, "laplacian_ground_state", 0.02, [&](SelftestCase& c) {
    const CrossSectionGrid g(ToroidalFrame(1000.0), 24, 16);
    const ScalarLaplacian lap = assemble_scalar_laplacian(g, false);
    const double l1 = smallest_eigenvalue(-lap.dense_form(), g.weights()).value;
    c.value = std::abs(l1 / 5.783185962946784 - 1.0);
    c.passed = c.value < c.threshold;
    c.detail = "large-radius Dirichlet eigenvalue against the first Bessel zero squared";
  });

  run_case(out, "trajectory_invariants", 1e-6, [&](SelftestCase& c) {
    const Equilibrium eq = synthetic(g16, MuProfile(instability_profile(1.0)), 0.05, 0.1);
    const Tracer tr(eq);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nv(0.0, 1.0);
    double drift = 0.0;
    for (int s = 0; s < 4; ++s) {
      PhaseState z{0.9 * std::sqrt(u(rng)), kTwoPi * u(rng), nv(rng), nv(rng), nv(rng), s % 2 ? -1 : 1};
      std::vector<PhaseState> st;
      tr.forward(z, {0.0, 5.0}, st);
      const Invariants a = invariants_at(eq, st[0].r, st[0].th, st[0].vr, st[0].vth, st[0].vphi);
      const Invariants b = invariants_at(eq, st[1].r, st[1].th, st[1].vr, st[1].vth, st[1].vphi);
      const double de = z.sign > 0 ? b.e_plus - a.e_plus : b.e_minus - a.e_minus;
      const double dp = z.sign > 0 ? b.p_plus - a.p_plus : b.p_minus - a.p_minus;
      drift = std::max({drift, std::abs(de), std::abs(dp)});
    }
    c.value = drift;
    c.passed = drift < c.threshold;
    c.detail = "max drift of energy and toroidal momentum over T = 5";
  });

  run_case(out, "time_reversal", 1e-8, [&](SelftestCase& c) {
    const Equilibrium eq = synthetic(g16, MuProfile(instability_profile(1.0)), 0.05, 0.1);
    const Tracer tr(eq);
    const PhaseState z{0.4, 1.0, 0.7, -0.3, 0.5, 1};
    std::vector<PhaseState> fw, back;
    tr.forward(z, {0.0, 3.0}, fw);
    tr.forward(time_reversed(fw[1]), {0.0, 3.0}, back);
    const PhaseState e = time_reversed(back[1]);
    c.value = std::max({std::abs(e.r - z.r), std::abs(std::remainder(e.th - z.th, kTwoPi)), std::abs(e.vr - z.vr),
                        std::abs(e.vth - z.vth), std::abs(e.vphi - z.vphi)});
    c.passed = c.value < c.threshold;
    c.detail = "return error after forward flow and reversed flow";
  });

  run_case(out, "operator_structure", 1e-8, [&](SelftestCase& c) {
    const Equilibrium eq(g8, MuProfile(instability_profile(1.0)), Vec::Zero(g8.size()), Vec::Zero(g8.size()));
    OperatorOptions oo;
    oo.velocity.panels_par = 12;
    oo.velocity.panels_perp = 6;
    const OperatorSet ops = assemble_operators(eq, oo);
    const double bmax = ops.B.cwiseAbs().maxCoeff() / ops.stiffness.cwiseAbs().maxCoeff();
    c.value = std::max({ops.asym_L, bmax});
    c.passed = ops.a1_max_eigenvalue < 0.0 && c.value < c.threshold;
    std::ostringstream os;
    os << "A1 max eigenvalue " << ops.a1_max_eigenvalue << ", L asymmetry " << ops.asym_L << ", relative B "
       << bmax;
    c.detail = os.str();
  });

  run_case(out, "eigen_rayleigh", 1e-10, [&](SelftestCase& c) {
    const ScalarLaplacian lap = assemble_scalar_laplacian(g8, true);
    const EigenPair p = smallest_eigenvalue(-lap.dense_form(), g8.weights());
    c.value = std::abs(p.rayleigh - p.value) / std::abs(p.value);
    c.passed = p.value > 0.0 && c.value < c.threshold;
    c.detail = "Rayleigh quotient of the returned vector against the eigenvalue";
  });

  run_case(out, "divergence_free_basis", 1e-10, [&](SelftestCase& c) {
    const DivFreeBasis b = build_divfree_basis(g8, 6);
    c.value = b.max_divergence;
    c.passed = c.value < c.threshold && b.orthonormality_error < 1e-10 && (b.sigma.array() > 0.0).all();
    c.detail = "max discrete divergence of the basis";
  });

  run_case(out, "vacuum_negative_count", 0.0, [&](SelftestCase& c) {
    const Equilibrium eq(g8, MuProfile(ProfileSpec{}), Vec::Zero(g8.size()), Vec::Zero(g8.size()));
    const DivFreeBasis b = build_divfree_basis(g8, 4);
    OperatorOptions oo;
    oo.lambda = 1.0;
    const OperatorSet ops = assemble_operators(eq, oo, &b);
    const NegativeCount nc = negative_count(ops, 4);
    c.value = std::abs(nc.count - 4);
    c.passed = nc.count == 4 && nc.schur;
    c.detail = "count for the zero profile at lambda = 1 with n = 4";
  });

  run_case(out, "config_hash", 0.0, [&](SelftestCase& c) {
    const RunConfig a = parse_config_string("[frame]\na = 3\n[grid]\nnr = 8\n");
    const RunConfig b = parse_config_string("[grid]\nnr=8\n[frame]\na=3.0\n");
    const RunConfig d = parse_config_string("[frame]\na = 3\n[grid]\nnr = 9\n");
    c.passed = a.hash() == b.hash() && a.hash() != d.hash();
    c.value = c.passed ? 0.0 : 1.0;
    c.detail = "hash invariant under formatting, sensitive to values";
  });
  return out;
}

}  // namespace torvm
