#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace torvm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Solid torus of major radius a and minor radius 1 in coordinates (r, theta, phi).
class ToroidalFrame {
 public:
  explicit ToroidalFrame(double a);

  double a() const { return a_; }
  // Distance to the symmetry axis, a + r cos(theta).
  double weight(double r, double theta) const { return a_ + r * std::cos(theta); }
  double volume() const { return 2.0 * kPi * kPi * a_; }

  Eigen::Vector3d position(double r, double theta, double phi) const;

  struct Basis {
    Eigen::Vector3d er, eth, ephi;
  };
  static Basis basis(double theta, double phi);

 private:
  double a_;
};

// Up to four nodal contributions of a bilinear interpolant; nodes on the
// wall carry the Dirichlet value zero and are dropped.
struct Stencil {
  std::array<int, 4> idx{};
  std::array<double, 4> w{};
  int n = 0;
  void add(int k, double weight) {
    if (weight == 0.0) return;
    idx[n] = k;
    w[n] = weight;
    ++n;
  }
};

// Polar cross-section grid with half-cell radial offset: r_i = (i + 1/2) dr,
// theta_j = j dtheta. Node values vanish at the wall r = 1.
class CrossSectionGrid {
 public:
  CrossSectionGrid(const ToroidalFrame& frame, int nr, int nth);

  const ToroidalFrame& frame() const { return frame_; }
  int nr() const { return nr_; }
  int nth() const { return nth_; }
  int size() const { return nr_ * nth_; }
  double dr() const { return dr_; }
  double dth() const { return dth_; }
  double r(int i) const { return (i + 0.5) * dr_; }
  double theta(int j) const { return j * dth_; }
  int index(int i, int j) const { return i * nth_ + j; }
  int ring(int k) const { return k / nth_; }
  int spoke(int k) const { return k % nth_; }
  double node_r(int k) const { return r(ring(k)); }
  double node_theta(int k) const { return theta(spoke(k)); }
  double node_R(int k) const { return frame_.weight(node_r(k), node_theta(k)); }

  // Cell measure 2 pi r (a + r cos theta) dr dtheta.
  const Vec& weights() const { return w_; }
  double volume() const { return w_.sum(); }

  Stencil stencil(double r, double theta) const;
  double interpolate(const Vec& f, double r, double theta) const;

  // Nodal samples of a function of (r, theta).
  Vec sample(const std::function<double(double, double)>& f) const;

 private:
  ToroidalFrame frame_;
  int nr_, nth_;
  double dr_, dth_;
  Vec w_;
};

// Discrete Laplacian in divergence form. The operator is W^{-1} form, with
// W = diag(weights); form is symmetric, so the operator is self-adjoint in
// the w-metric. Unshifted: Delta. Shifted: Delta - (a + r cos theta)^{-2}.
struct ScalarLaplacian {
  SpMat form;
  Vec weights;
  bool shifted = false;

  Vec apply(const Vec& h) const;
  Mat dense_form() const { return Mat(form); }
  // Energy <-M h, h>_w, i.e. the discrete gradient (plus shift) energy.
  double energy(const Vec& h) const { return -h.dot(form * h); }
};

ScalarLaplacian assemble_scalar_laplacian(const CrossSectionGrid& grid, bool shifted);

double weighted_inner_product(const Vec& f, const Vec& g, const CrossSectionGrid& grid);

// Velocity node in the toroidal frame (v_r, v_theta, v_phi) with weight.
struct VelocityNode {
  double vr, vth, vphi, w;
};

// Truncated velocity-space rule.
//
// The cylindrical rule uses v_phi on [-v_max, v_max], the transverse speed
// rho = |(v_r, v_theta)| <= v_max and its angle omega. The tensor rule is a
// Cartesian product on the cube [-v_max, v_max]^3.
class VelocityQuadrature {
 public:
  enum class Kind { Cylindrical, Tensor };

  static VelocityQuadrature cylindrical(double vmax, int panels_par, int panels_perp, int order,
                                        int n_omega);
  static VelocityQuadrature tensor(double vmax, int panels, int order);

  Kind kind() const { return kind_; }
  double vmax() const { return vmax_; }
  // Full rule (all angles).
  const std::vector<VelocityNode>& nodes() const { return nodes_; }
  // Rule for integrands depending only on (|v|, v_phi): angle collapsed.
  const std::vector<VelocityNode>& axial_nodes() const { return axial_; }

 private:
  Kind kind_ = Kind::Cylindrical;
  double vmax_ = 0.0;
  std::vector<VelocityNode> nodes_;
  std::vector<VelocityNode> axial_;
};

// Parameters of a velocity rule, as read from configuration.
struct VelocityRuleSpec {
  bool tensor = false;
  double vmax = 12.0;
  int panels_par = 24;   // v_phi panels (tensor: panels per axis)
  int panels_perp = 12;  // transverse speed panels
  int order = 4;
  int n_omega = 8;
  VelocityQuadrature build() const {
    return tensor ? VelocityQuadrature::tensor(vmax, panels_par, order)
                  : VelocityQuadrature::cylindrical(vmax, panels_par, panels_perp, order, n_omega);
  }
};

inline double lorentz(double vr, double vth, double vphi) {
  return std::sqrt(1.0 + vr * vr + vth * vth + vphi * vphi);
}

// Integral over the rule of f(node).
template <class F>
double velocity_integrate(const std::vector<VelocityNode>& nodes, F&& f) {
  double acc = 0.0;
  for (const auto& n : nodes) acc += n.w * f(n);
  return acc;
}

// Upper bound C * int_{|v| > vmax} (1 + <v>^gamma)^{-1} dv for the tail of
// an integrand obeying the decay envelope C / (1 + e^gamma).
double envelope_tail(double c_mu, double gamma, double vmax);

}  // namespace torvm
