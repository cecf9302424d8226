#include "torvm/geometry.hpp"
#include "torvm/quadrature.hpp"
#include "torvm/stability.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <doctest.h>

#include <cmath>

using namespace torvm;

TEST_CASE("frame rejects a <= 1 and has the torus volume") {
  CHECK_THROWS(ToroidalFrame(1.0));
  CHECK_THROWS(ToroidalFrame(0.5));
  const ToroidalFrame f(2.5);
  CHECK(f.volume() == doctest::Approx(2.0 * kPi * kPi * 2.5).epsilon(1e-14));
  CHECK(f.weight(0.5, kPi) == doctest::Approx(2.0));
}

TEST_CASE("frame basis is orthonormal and consistent with positions") {
  const ToroidalFrame f(3.0);
  for (double th : {0.0, 0.7, 2.9}) {
    for (double ph : {0.0, 1.3}) {
      const auto b = ToroidalFrame::basis(th, ph);
      CHECK(b.er.norm() == doctest::Approx(1.0));
      CHECK(b.er.dot(b.eth) == doctest::Approx(0.0).epsilon(1e-14));
      CHECK(b.er.dot(b.ephi) == doctest::Approx(0.0).epsilon(1e-14));
      // d position / d r equals e_r.
      const double h = 1e-6;
      const Eigen::Vector3d d = (f.position(0.5 + h, th, ph) - f.position(0.5 - h, th, ph)) / (2 * h);
      CHECK((d - b.er).norm() < 1e-8);
    }
  }
}

TEST_CASE("cell weights integrate the torus volume") {
  for (int n : {4, 8, 16, 32}) {
    const CrossSectionGrid g(ToroidalFrame(3.0), n, n);
    CHECK(std::abs(g.volume() / g.frame().volume() - 1.0) < 1e-3);
    CHECK((g.weights().array() > 0.0).all());
  }
}

TEST_CASE("weighted inner product is symmetric and positive") {
  const CrossSectionGrid g(ToroidalFrame(3.0), 8, 12);
  const Vec f = Vec::Random(g.size()), h = Vec::Random(g.size());
  CHECK(weighted_inner_product(f, h, g) == doctest::Approx(weighted_inner_product(h, f, g)));
  CHECK(weighted_inner_product(f, f, g) > 0.0);
}

TEST_CASE("interpolation reproduces nodal values and vanishes at the wall") {
  const CrossSectionGrid g(ToroidalFrame(3.0), 8, 12);
  const Vec f = Vec::Random(g.size());
  for (int k = 0; k < g.size(); k += 7) CHECK(g.interpolate(f, g.node_r(k), g.node_theta(k)) == doctest::Approx(f[k]));
  CHECK(g.interpolate(f, 1.0, 0.3) == doctest::Approx(0.0));
}

TEST_CASE("laplacian form is symmetric and negative definite") {
  const CrossSectionGrid g(ToroidalFrame(3.0), 10, 12);
  for (bool shifted : {false, true}) {
    const ScalarLaplacian lap = assemble_scalar_laplacian(g, shifted);
    const Mat F = lap.dense_form();
    CHECK((F - F.transpose()).cwiseAbs().maxCoeff() < 1e-12 * F.cwiseAbs().maxCoeff());
    const Vec ev = generalized_eigenvalues(-F, g.weights());
    CHECK(ev[0] > 0.0);
  }
}

TEST_CASE("laplacian consistency on a smooth function") {
  // Large major radius: Delta (1 - r^2) -> -4 away from the wall.
  const CrossSectionGrid g(ToroidalFrame(1e4), 32, 16);
  const ScalarLaplacian lap = assemble_scalar_laplacian(g, false);
  const Vec f = g.sample([](double r, double) { return 1.0 - r * r; });
  const Vec d = lap.apply(f);
  for (int i = 2; i < 24; i += 5) CHECK(d[g.index(i, 3)] == doctest::Approx(-4.0).epsilon(0.02));
}

TEST_CASE("ground Dirichlet eigenvalue approaches the Bessel limit for large a") {
  const double j01 = boost::math::cyl_bessel_j_zero(0.0, 1);
  double prev = 1e300;
  for (int n : {8, 16, 32}) {
    const CrossSectionGrid g(ToroidalFrame(1000.0), n, n);
    const ScalarLaplacian lap = assemble_scalar_laplacian(g, false);
    const double l1 = smallest_eigenvalue(-lap.dense_form(), g.weights()).value;
    const double err = std::abs(l1 / (j01 * j01) - 1.0);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 0.01);
}

TEST_CASE("gauss rules are exact for polynomials") {
  const Rule1D r = gauss_legendre(5, -1.0, 2.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) acc += r.w[i] * std::pow(r.x[i], 9);
  CHECK(acc == doctest::Approx((std::pow(2.0, 10) - 1.0) / 10.0).epsilon(1e-13));
  const Rule1D c = composite_gauss(4, 3, 0.0, 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += c.w[i] * std::exp(c.x[i]);
  CHECK(s == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-10));
}

TEST_CASE("velocity rules integrate a Maxwellian") {
  const double exact = std::pow(kTwoPi, 1.5);
  const auto gauss = [](const VelocityNode& v) {
    return std::exp(-0.5 * (v.vr * v.vr + v.vth * v.vth + v.vphi * v.vphi));
  };
  for (bool tensor : {false, true}) {
    VelocityRuleSpec spec;
    spec.tensor = tensor;
    const VelocityQuadrature q = spec.build();
    CHECK(std::abs(velocity_integrate(q.nodes(), gauss) / exact - 1.0) < 1e-6);
    CHECK(std::abs(velocity_integrate(q.axial_nodes(), gauss) / exact - 1.0) < 1e-6);
    // Second moment in v_phi.
    const double m2 = velocity_integrate(q.nodes(), [&](const VelocityNode& v) { return v.vphi * v.vphi * gauss(v); });
    CHECK(std::abs(m2 / exact - 1.0) < 1e-6);
  }
}

TEST_CASE("envelope tail decreases with the cutoff") {
  const double t1 = envelope_tail(1.0, 4.0, 6.0), t2 = envelope_tail(1.0, 4.0, 12.0);
  CHECK(t1 > t2);
  CHECK(t2 > 0.0);
}
