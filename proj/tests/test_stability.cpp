#include "torvm/stability.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <random>

using namespace torvm;

namespace {

const CrossSectionGrid& grid8() {
  static const CrossSectionGrid g(ToroidalFrame(3.0), 8, 8);
  return g;
}

Equilibrium homogeneous(const ProfileSpec& s) {
  const auto& g = grid8();
  return Equilibrium(g, MuProfile(s), Vec::Zero(g.size()), Vec::Zero(g.size()));
}

ProfileSpec instability(double K) {
  ProfileSpec s;
  s.family = ProfileFamily::Instability;
  s.mode = SpeciesMode::Mirror;
  s.c_plus = s.c_minus = 0.01;
  s.K = K;
  return s;
}

// Smallest eigenvalue of the pencil (F, W) by bisection on the inertia of
// F - sigma W (Sylvester's law via an LDL^T factorization).
double inertia_min(const Mat& F, const Vec& w) {
  // Gershgorin interval of W^{-1/2} F W^{-1/2}.
  const Vec s = w.cwiseSqrt().cwiseInverse();
  const Mat G = s.asDiagonal() * F * s.asDiagonal();
  double lo = 0.0, hi = 0.0;
  for (int i = 0; i < G.rows(); ++i) {
    const double rad = G.row(i).cwiseAbs().sum() - std::abs(G(i, i));
    lo = std::min(lo, G(i, i) - rad);
    hi = std::max(hi, G(i, i) + rad);
  }
  auto has_negative = [&](double sigma) {
    Mat S = F;
    S.diagonal() -= sigma * w;
    const Eigen::LDLT<Mat> ldlt(S);
    return (ldlt.vectorD().array() < 0.0).any();
  };
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(std::abs(lo), std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (has_negative(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("smallest eigenvalue matches inertia bisection") {
  const Equilibrium eq = homogeneous(instability(3.0));
  const OperatorSet ops = assemble_operators(eq, OperatorOptions{});
  const EigenPair p = smallest_eigenvalue(ops.L, ops.w);
  const double oracle = inertia_min(ops.L, ops.w);
  CHECK(p.value == doctest::Approx(oracle).epsilon(1e-8));
  CHECK(p.rayleigh == doctest::Approx(p.value).epsilon(1e-10));
  CHECK(p.vector.dot(ops.w.cwiseProduct(p.vector)) == doctest::Approx(1.0));
  const Vec all = generalized_eigenvalues(ops.L, ops.w);
  CHECK(all[0] == doctest::Approx(p.value));
  for (int i = 1; i < all.size(); ++i) CHECK(all[i] >= all[i - 1]);
}

TEST_CASE("vacuum is stable with the field spectrum as margin") {
  const Equilibrium eq = homogeneous(ProfileSpec{});
  const StabilityReport rep = assess(eq, StabilityOptions{});
  const OperatorSet ops = assemble_operators(eq, OperatorOptions{});
  const double expect = inertia_min(ops.stiffness + ops.curvature, ops.w);
  CHECK(rep.kappa == doctest::Approx(expect).epsilon(1e-8));
  CHECK(rep.verdict == Verdict::Stable);
  CHECK(rep.witness.I == 0.0);
  CHECK(rep.witness.III == 0.0);
  CHECK(rep.small_field.satisfied);
  CHECK(rep.small_field.value == 0.0);
}

TEST_CASE("witness decomposition sums to the quadratic form") {
  for (double K : {0.5, 3.0}) {
    const Equilibrium eq = homogeneous(instability(K));
    const StabilityOptions opt;
    const OperatorSet ops = assemble_operators(eq, opt.operators);
    const Vec h = witness_function(eq.grid());
    const WitnessDecomposition d = witness_decomposition(eq, ops, h, opt.operators.velocity.build());
    CHECK(d.one == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(d.sum() == doctest::Approx(d.value).epsilon(1e-8));
    CHECK(d.value == doctest::Approx(h.dot(ops.L * h)).epsilon(1e-10));
    CHECK(d.I < 0.0);
    CHECK(d.II == 0.0);  // homogeneous: A_phi = 0
    CHECK(d.III >= 0.0);
    CHECK(d.schur == doctest::Approx(0.0).scale(1e-10));
  }
}

TEST_CASE("doubled electron operator agrees with L for mirrored profiles") {
  const Equilibrium eq = homogeneous(instability(2.0));
  const OperatorOptions opt;
  const OperatorSet ops = assemble_operators(eq, opt);
  const Mat D = doubled_species_A2(eq, opt);
  CHECK((D - ops.L).cwiseAbs().maxCoeff() < 1e-8 * ops.L.cwiseAbs().maxCoeff());
}

TEST_CASE("verdict deadband") {
  const Equilibrium eq = homogeneous(ProfileSpec{});
  OperatorSet ops = assemble_operators(eq, OperatorOptions{});
  const double k0 = smallest_eigenvalue(ops.L, ops.w).value;
  StabilityOptions opt;
  opt.tol_eig = 1e-6;
  auto with_kappa = [&](double kappa) {
    OperatorSet o = ops;
    o.L.diagonal() -= (k0 - kappa) * o.w;
    return assess(eq, o, opt);
  };
  CHECK(with_kappa(1e-5).verdict == Verdict::Stable);
  CHECK(with_kappa(5e-7).verdict == Verdict::Marginal);
  CHECK(with_kappa(-5e-7).verdict == Verdict::Marginal);
  CHECK(with_kappa(-1e-5).verdict == Verdict::Unstable);
  const StabilityReport r = with_kappa(2e-6);
  CHECK(r.margin == doctest::Approx(2.0).epsilon(1e-6));
  OperatorSet bad = ops;
  bad.lambda = 1.0;
  CHECK_THROWS(assess(eq, bad, opt));
}

TEST_CASE("even mirrored profile is stable") {
  ProfileSpec s;
  s.family = ProfileFamily::StableEven;
  s.mode = SpeciesMode::Mirror;
  s.c_plus = s.c_minus = 0.05;
  const StabilityReport rep = assess(homogeneous(s), StabilityOptions{});
  CHECK(rep.verdict == Verdict::Stable);
  CHECK(rep.witness.value > 0.0);
  CHECK(rep.hypotheses.holds("p_mu_p_nonpositive"));
  CHECK(rep.small_field.satisfied);
}

TEST_CASE("K scan of the instability family changes sign") {
  ScanOptions opt;
  opt.equilibrium_velocity.panels_par = 12;
  opt.equilibrium_velocity.panels_perp = 6;
  const std::vector<double> Ks{0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
  const ScanResult res = scan_K(instability(1.0), Ks, grid8(), opt);
  REQUIRE(res.rows.size() == Ks.size());
  for (const auto& r : res.rows) CHECK(r.ok);
  CHECK(res.rows[0].witness.I == 0.0);
  CHECK(res.rows[0].witness_form > 0.0);
  CHECK(res.rows[0].verdict == Verdict::Stable);
  CHECK(res.rows.back().witness_form < 0.0);
  CHECK(res.rows.back().verdict == Verdict::Unstable);
  REQUIRE(res.K0.has_value());
  CHECK(*res.K0 > 0.5);
  CHECK(res.sup_aphi_max == 0.0);
  CHECK(res.I_exponent == doctest::Approx(2.0).epsilon(0.05));
  CHECK(res.witness_decreases);
  for (std::size_t i = 1; i < res.rows.size(); ++i)
    CHECK(res.rows[i].witness_form < res.rows[i - 1].witness_form);
}

TEST_CASE("small-field constant is the inverse Dirichlet ground eigenvalue") {
  const Equilibrium eq = homogeneous(instability(1.0));
  const SmallFieldCondition c = small_field_condition(eq, VelocityRuleSpec{}.build());
  const ScalarLaplacian lap = assemble_scalar_laplacian(grid8(), false);
  CHECK(c.c0 == doctest::Approx(1.0 / inertia_min(-lap.dense_form(), grid8().weights())).epsilon(1e-8));
  CHECK(c.sup_moment > 0.0);
  CHECK(c.value == 0.0);
  CHECK(c.satisfied);
}
