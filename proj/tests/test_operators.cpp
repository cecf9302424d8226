#include "torvm/operators.hpp"
#include "torvm/output.hpp"
#include "torvm/stability.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
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

// Not symmetric under p -> -p between species, so B does not vanish.
ProfileSpec asymmetric() {
  ProfileSpec s;
  s.family = ProfileFamily::SmallMuP;
  s.mode = SpeciesMode::Identical;
  s.c_plus = s.c_minus = 0.05;
  s.eps = 0.3;
  return s;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

Vec dirichlet_random(const CrossSectionGrid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  const double c[4] = {n(rng), n(rng), n(rng), n(rng)};
  return g.sample([&](double r, double th) {
    return (1 - r * r) * (c[0] + c[1] * r * std::cos(th) + c[2] * r * std::sin(th) + c[3] * r * r);
  });
}

}  // namespace

TEST_CASE("zero profile leaves only the field operators") {
  const Equilibrium eq = homogeneous(ProfileSpec{});
  const OperatorSet ops = assemble_operators(eq, OperatorOptions{});
  const double s = max_abs(ops.stiffness);
  CHECK(max_abs(ops.A1 + ops.stiffness) < 1e-14 * s);
  CHECK(max_abs(ops.A2 - ops.stiffness - ops.curvature) < 1e-14 * s);
  CHECK(max_abs(ops.B) == 0.0);
  CHECK(max_abs(ops.L - ops.A2) < 1e-14 * s);
}

TEST_CASE("vector blocks of the zero profile are diagonal") {
  const Equilibrium eq = homogeneous(ProfileSpec{});
  const DivFreeBasis basis = build_divfree_basis(eq.grid(), 6);
  OperatorOptions opt;
  opt.lambda = 0.7;
  const OperatorSet ops = assemble_operators(eq, opt, &basis);
  REQUIRE(ops.has_vector);
  Mat expect = Mat::Zero(6, 6);
  for (int k = 0; k < 6; ++k) expect(k, k) = -(0.49 + basis.sigma[k]);
  CHECK(max_abs(ops.U - expect) < 1e-12 * max_abs(expect));
  CHECK(max_abs(ops.V) == 0.0);
  CHECK(ops.u_max_eigenvalue < 0.0);
}

TEST_CASE("symmetric homogeneous profile: structure of the closed-form operators") {
  const Equilibrium eq = homogeneous(instability(1.0));
  const OperatorSet ops = assemble_operators(eq, OperatorOptions{});
  CHECK(ops.backend == ProjectionBackend::ClosedForm);
  CHECK(ops.a1_max_eigenvalue < 0.0);
  CHECK(ops.asym_A1 < 1e-8);
  CHECK(ops.asym_A2 < 1e-8);
  CHECK(ops.asym_L < 1e-8);
  CHECK(max_abs(ops.B) < 1e-10 * max_abs(ops.A1));
  CHECK(max_abs(ops.L - ops.A2) < 1e-12 * max_abs(ops.A2));
  CHECK(asymmetry(reduced_matrix(ops, 0)) < 1e-12);
}

TEST_CASE("kinetic part of A1 is nonpositive") {
  for (const ProfileSpec& s : {instability(3.0), asymmetric()}) {
    const Equilibrium eq = homogeneous(s);
    const OperatorSet ops = assemble_operators(eq, OperatorOptions{});
    const Mat kin = ops.A1 + ops.stiffness;
    const Vec ev = generalized_eigenvalues(0.5 * (kin + kin.transpose()), ops.w);
    CHECK(ev[ev.size() - 1] <= 1e-12 * max_abs(kin));
    // And therefore <A1 h, h> <= -||grad h||^2.
    std::mt19937_64 rng(11);
    for (int t = 0; t < 5; ++t) {
      const Vec h = dirichlet_random(eq.grid(), rng);
      CHECK(h.dot(ops.A1 * h) <= -h.dot(ops.stiffness * h) * (1 - 1e-12));
    }
  }
}

TEST_CASE("quadratic form of A2 splits into its physical terms") {
  const Equilibrium eq1 = homogeneous(instability(1.0));
  const Equilibrium eq10 = homogeneous(instability(10.0));
  const OperatorSet o1 = assemble_operators(eq1, OperatorOptions{});
  const OperatorSet o10 = assemble_operators(eq10, OperatorOptions{});
  const Vec h = witness_function(eq1.grid());
  const A2Decomposition d1 = quadratic_form_A2(o1, h), d10 = quadratic_form_A2(o10, h);
  CHECK(d1.gradient + d1.curvature == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(d1.total == doctest::Approx(d1.matrix).epsilon(1e-10));
  CHECK(d10.total == doctest::Approx(d10.matrix).epsilon(1e-10));
  CHECK(d1.lambda_term == 0.0);
  CHECK(d1.mu_p < 0.0);
  // mu_p of the family is proportional to K^2.
  CHECK(d10.mu_p / d1.mu_p == doctest::Approx(100.0).epsilon(1e-8));

  const OperatorSet z = assemble_operators(homogeneous(ProfileSpec{}), OperatorOptions{});
  const A2Decomposition dz = quadratic_form_A2(z, h);
  CHECK(dz.mu_p == 0.0);
  CHECK(dz.projection == 0.0);
}

TEST_CASE("asymmetric profile: coupling, Schur term and adjoint") {
  const Equilibrium eq = homogeneous(asymmetric());
  const OperatorSet ops = assemble_operators(eq, OperatorOptions{});
  CHECK(max_abs(ops.B) > 1e-3 * max_abs(ops.A1 + ops.stiffness));
  // The directly assembled B* agrees with B^T up to the velocity quadrature.
  CHECK(ops.bstar_residual < 1e-2);
  CHECK(ops.asym_L < 1e-8);

  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const Vec h = Vec::Random(ops.size()), g = Vec::Random(ops.size());
    const double lhs = g.dot(ops.B * h), rhs = h.dot(ops.Bstar * g);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + max_abs(ops.B)));
  }
  for (int t = 0; t < 5; ++t) {
    const Vec h = dirichlet_random(eq.grid(), rng);
    const LDecomposition d = quadratic_form_L(ops, h);
    CHECK(d.correction >= 0.0);
    CHECK(d.value == doctest::Approx(d.a2 + d.correction).epsilon(1e-10));
    // Direct evaluation of -<A1^{-1} B^T h, B^T h>.
    const Vec bh = ops.B.transpose() * h;
    const Vec x = ops.solve_A1(bh);
    CHECK(d.correction == doctest::Approx(-x.dot(bh)).epsilon(1e-8));
    CHECK(d.value >= d.a2);
  }
}

TEST_CASE("minimizer identity on an asymmetric homogeneous equilibrium") {
  const Equilibrium eq = homogeneous(asymmetric());
  const OperatorOptions opt;
  const OperatorSet ops = assemble_operators(eq, opt);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 2; ++t) {
    const Vec A = dirichlet_random(eq.grid(), rng);
    const MinimizerCheck m = minimizer_identity_check(eq, ops, A, opt.velocity);
    CHECK(m.lhs > 0.0);
    CHECK(m.gap < 0.03);
  }
  const MinimizerCheck z = minimizer_identity_check(eq, ops, Vec::Zero(ops.size()), opt.velocity);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);
}

TEST_CASE("sampled operators for lambda > 0") {
  const Equilibrium eq = homogeneous(asymmetric());
  const DivFreeBasis basis = build_divfree_basis(eq.grid(), 6);
  OperatorOptions opt;
  opt.lambda = 1.0;
  opt.sampler.n_points = 1024;
  const OperatorSet ops = assemble_operators(eq, opt, &basis);
  CHECK(ops.backend == ProjectionBackend::Sampled);
  CHECK(ops.asym_A1 < 1e-8);
  CHECK(ops.asym_L < 1e-8);
  CHECK(ops.asym_S < 1e-8);
  CHECK(asymmetry(ops.U) < 1e-8);
  // Q_lambda has norm at most one: the kinetic part of A1 stays nonpositive.
  const Mat kin = ops.A1 + ops.stiffness;
  const Vec ev = generalized_eigenvalues(0.5 * (kin + kin.transpose()), ops.w);
  CHECK(ev[ev.size() - 1] <= 1e-12 * max_abs(kin));

  const Mat M = reduced_matrix(ops, 4);
  CHECK(M.rows() == ops.size() + 4);
  CHECK(asymmetry(M) < 1e-8);
  const Vec metric = reduced_metric(ops, 4);
  CHECK(metric.head(ops.size()).isApprox(ops.w));
  CHECK(metric.tail(4).isApprox(Vec::Ones(4)));

  // Coupling to the vector part fades for large lambda, and L becomes positive.
  opt.lambda = 50.0;
  const OperatorSet big = assemble_operators(eq, opt, &basis);
  CHECK(max_abs(ops.V) > 0.0);
  CHECK(max_abs(big.V) < max_abs(ops.V));
  CHECK(smallest_eigenvalue(big.L, big.w).value > 0.0);
}

TEST_CASE("exponential averages are log-Lipschitz in lambda") {
  const Equilibrium eq = homogeneous(instability(1.0));
  const Tracer tr(eq);
  const PhaseFunction g = [](const PhaseState& s) { return std::sin(3 * s.th) * s.r + 0.5 * s.vr; };
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 6; ++t) {
    const PhaseState z{std::sqrt(u(rng)), kTwoPi * u(rng), 2 * u(rng) - 1, 2 * u(rng) - 1, 2 * u(rng) - 1, 1};
    const double l1 = 0.3 + u(rng), l2 = l1 * (1 + 2 * u(rng));
    const double q1 = q_lambda_average(g, l1, z, tr, 40.0 / l1, 0.005).value;
    const double q2 = q_lambda_average(g, l2, z, tr, 40.0 / l2, 0.005).value;
    CHECK(std::abs(q1 - q2) <= 2 * std::log(l2 / l1) * 2.0 + 1e-6);
    CHECK(std::abs(q1) <= 2.0);
  }
}

TEST_CASE("operator dump round trip") {
  const Equilibrium eq = homogeneous(asymmetric());
  const OperatorSet ops = assemble_operators(eq, OperatorOptions{});
  const std::string bin = "ops_test.bin", js = "ops_test.json";
  write_operator_dump(bin, js, ops, "0123456789abcdef");
  const OperatorDump d = read_operator_dump(bin);
  CHECK(d.w == ops.w);
  CHECK(d.get("A1") == ops.A1);
  CHECK(d.get("L") == ops.L);
  CHECK(d.get("Bstar") == ops.Bstar);
  CHECK_THROWS(d.get("nonexistent"));
  std::remove(bin.c_str());
  std::remove(js.c_str());
}
