#include "torvm/divfree.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace torvm {

namespace {

// Linear maps from the stream-function unknowns to face values and to the
// corner curl B_phi, with the measures used in the energies.
struct StreamMaps {
  Mat Hr, Hth, C;
  Vec mr, mth, mc;
};

StreamMaps stream_maps(const CrossSectionGrid& g) {
  const int nr = g.nr(), nt = g.nth();
  const double dr = g.dr(), dt = g.dth();
  const ToroidalFrame& fr = g.frame();
  const int U = nr * nt;
  // psi(i, j) for i = 1..nr; the axis value is zero.
  auto pid = [&](int i, int j) { return (i - 1) * nt + ((j % nt) + nt) % nt; };
  auto tc = [&](int j) { return (j + 0.5) * dt; };  // corner angle

  StreamMaps m;
  m.Hr = Mat::Zero(nr * nt, U);
  m.mr = Vec::Zero(nr * nt);
  for (int i = 1; i <= nr; ++i) {
    const double rho = i * dr;
    for (int j = 0; j < nt; ++j) {
      const int f = (i - 1) * nt + j;
      const double R = fr.weight(rho, j * dt);
      m.Hr(f, pid(i, j)) += 1.0 / (dt * rho * R);
      m.Hr(f, pid(i, j - 1)) -= 1.0 / (dt * rho * R);
      m.mr[f] = kTwoPi * rho * R * (i == nr ? 0.5 * dr : dr) * dt;
    }
  }
  m.Hth = Mat::Zero(nr * nt, U);
  m.mth = Vec::Zero(nr * nt);
  for (int i = 0; i < nr; ++i) {
    const double r = g.r(i);
    for (int j = 0; j < nt; ++j) {
      const int f = i * nt + j;
      const double R = fr.weight(r, tc(j));
      m.Hth(f, pid(i + 1, j)) -= 1.0 / (dr * R);
      if (i > 0) m.Hth(f, pid(i, j)) += 1.0 / (dr * R);
      m.mth[f] = kTwoPi * r * R * dr * dt;
    }
  }
  // Curl at corners: axis (one row), then (i, j) for i = 1..nr.
  m.C = Mat::Zero(1 + nr * nt, U);
  m.mc = Vec::Zero(1 + nr * nt);
  {
    const double r0 = g.r(0);
    for (int j = 0; j < nt; ++j) m.C.row(0) += (r0 * dt / (kPi * r0 * r0)) * m.Hth.row(j);
    m.mc[0] = kTwoPi * fr.a() * kPi * r0 * r0;
  }
  for (int i = 1; i <= nr; ++i) {
    const double rho = i * dr;
    for (int j = 0; j < nt; ++j) {
      const int row = 1 + (i - 1) * nt + j;
      // d_r(r h_theta): inner face r_{i-1}, outer face r_i or the odd ghost.
      const double r_in = g.r(i - 1);
      if (i < nr) {
        m.C.row(row) += (g.r(i) / (dr * rho)) * m.Hth.row(i * nt + j);
        m.C.row(row) -= (r_in / (dr * rho)) * m.Hth.row((i - 1) * nt + j);
      } else {
        m.C.row(row) -= (2.0 * r_in / (dr * rho)) * m.Hth.row((i - 1) * nt + j);
      }
      // -d_theta h_r between faces j and j + 1 at radius rho.
      const int jp = (j + 1) % nt;
      m.C.row(row) -= (1.0 / (dt * rho)) * m.Hr.row((i - 1) * nt + jp);
      m.C.row(row) += (1.0 / (dt * rho)) * m.Hr.row((i - 1) * nt + j);
      const double R = fr.weight(rho, tc(j));
      m.mc[row] = kTwoPi * rho * R * (i == nr ? 0.5 * dr : dr) * dt;
    }
  }
  return m;
}

}  // namespace

Vec face_divergence(const CrossSectionGrid& g, const Vec& face_r, const Vec& face_th) {
  const int nr = g.nr(), nt = g.nth();
  const double dr = g.dr(), dt = g.dth();
  const ToroidalFrame& fr = g.frame();
  Vec div(g.size());
  for (int i = 0; i < nr; ++i) {
    const double r = g.r(i);
    for (int j = 0; j < nt; ++j) {
      const double th = g.theta(j);
      double flux_out = 0.0, flux_in = 0.0;
      const double ro = (i + 1) * dr, ri = i * dr;
      flux_out = ro * fr.weight(ro, th) * face_r[i * nt + j];
      if (i > 0) flux_in = ri * fr.weight(ri, th) * face_r[(i - 1) * nt + j];
      const int jm = (j + nt - 1) % nt;
      const double tp = (j + 0.5) * dt, tm = (j - 0.5) * dt;
      const double ang = fr.weight(r, tp) * face_th[i * nt + j] - fr.weight(r, tm) * face_th[i * nt + jm];
      div[g.index(i, j)] = ((flux_out - flux_in) / dr + ang / dt) / (r * fr.weight(r, th));
    }
  }
  return div;
}

DivFreeBasis build_divfree_basis(const CrossSectionGrid& g, int n) {
  const int nr = g.nr(), nt = g.nth();
  const int U = nr * nt;
  if (n <= 0 || n > U) throw std::invalid_argument("build_divfree_basis: bad basis size");
  const StreamMaps m = stream_maps(g);
  const Mat K = m.C.transpose() * m.mc.asDiagonal() * m.C;
  const Mat M = m.Hr.transpose() * m.mr.asDiagonal() * m.Hr + m.Hth.transpose() * m.mth.asDiagonal() * m.Hth;
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (K + K.transpose()), 0.5 * (M + M.transpose()));
  if (es.info() != Eigen::Success) throw std::runtime_error("build_divfree_basis: eigensolver failed");

  DivFreeBasis b;
  b.n = n;
  b.sigma = es.eigenvalues().head(n);
  b.coef = es.eigenvectors().leftCols(n);
  b.face_r = m.Hr * b.coef;
  b.face_th = m.Hth * b.coef;
  b.mass_r = m.mr;
  b.mass_th = m.mth;

  const Mat gram = b.face_r.transpose() * m.mr.asDiagonal() * b.face_r +
                   b.face_th.transpose() * m.mth.asDiagonal() * b.face_th;
  b.orthonormality_error = (gram - Mat::Identity(n, n)).cwiseAbs().maxCoeff();

  // Nodal values by averaging adjacent faces.
  const int N = g.size();
  b.nodal.psi_r = Mat::Zero(N, n);
  b.nodal.psi_th = Mat::Zero(N, n);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt; ++j) {
      const int k = g.index(i, j);
      const int jm = (j + nt - 1) % nt;
      // Near the axis the inner face is degenerate; use the outer one.
      if (i == 0)
        b.nodal.psi_r.row(k) = b.face_r.row(j);
      else
        b.nodal.psi_r.row(k) = 0.5 * (b.face_r.row((i - 1) * nt + j) + b.face_r.row(i * nt + j));
      b.nodal.psi_th.row(k) = 0.5 * (b.face_th.row(i * nt + j) + b.face_th.row(i * nt + jm));
    }

  // Diagnostics.
  const double a = g.frame().a();
  for (int c = 0; c < n; ++c) {
    const double scale = std::max(b.face_r.col(c).cwiseAbs().maxCoeff(), b.face_th.col(c).cwiseAbs().maxCoeff());
    const Vec div = face_divergence(g, b.face_r.col(c), b.face_th.col(c));
    b.max_divergence = std::max(b.max_divergence, div.cwiseAbs().maxCoeff() / scale);
    double wall_rad = 0.0;
    for (int j = 0; j < nt; ++j) {
      // Wall value of r h_theta: mean of the last face and its odd ghost.
      const double rh_in = g.r(nr - 1) * b.face_th((nr - 1) * nt + j, c);
      const double rh_ghost = -rh_in;
      b.wall_theta_residual = std::max(b.wall_theta_residual, std::abs(0.5 * (rh_in + rh_ghost)) / scale);
      const double th = g.theta(j);
      const double hw = b.face_r((nr - 1) * nt + j, c);
      const double hin = b.face_r((nr - 2) * nt + j, c);
      const double coefw = (a + 2.0 * std::cos(th)) / (a + std::cos(th));
      wall_rad = std::max(wall_rad, std::abs((hw - hin) / g.dr() + coefw * hw));
    }
    // Relative to the size of the radial derivative scale sigma^{1/2} |h|.
    b.wall_radial_residual = std::max(b.wall_radial_residual, wall_rad / (scale * (1.0 + std::sqrt(b.sigma[c]))));
  }
  return b;
}

NodalVector combine_nodal(const DivFreeBasis& basis, const Vec& c) {
  return {basis.nodal.psi_r * c, basis.nodal.psi_th * c};
}

}  // namespace torvm
