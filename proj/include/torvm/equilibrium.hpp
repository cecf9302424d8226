#pragma once

#include "torvm/geometry.hpp"
#include "torvm/profiles.hpp"

#include <string>
#include <vector>

namespace torvm {

// Smooth global representation of a cross-section field vanishing on the wall:
// f(y1, y2) = (1 - y1^2 - y2^2) * sum_{i+j<=deg} c_ij T_i(y1) T_j(y2),
// with y1 = r cos(theta), y2 = r sin(theta). Fitted to nodal values by
// weighted least squares; the degree is capped at what the grid resolves.
class DiskPolynomial {
 public:
  DiskPolynomial() = default;
  static DiskPolynomial fit(const CrossSectionGrid& grid, const Vec& values, int degree);

  bool is_zero() const { return zero_; }
  int degree() const { return deg_; }

  struct Value {
    double f = 0.0, f1 = 0.0, f2 = 0.0;  // value and partials in y1, y2
  };
  Value eval(double y1, double y2) const;
  double value(double y1, double y2) const { return eval(y1, y2).f; }

 private:
  int deg_ = 0;
  bool zero_ = true;
  std::vector<double> coef_;  // packed by total degree
};

// Equilibrium field values at a point, in both the toroidal frame and the
// cylindrical (R, Z) frame.
struct FieldSample {
  double phi = 0.0, aphi = 0.0;
  double E_R = 0.0, E_Z = 0.0, B_R = 0.0, B_Z = 0.0;
  double E_r = 0.0, E_th = 0.0, B_r = 0.0, B_th = 0.0;
};

struct PicardHistory {
  std::vector<double> step_norms;      // ||x_{k+1} - x_k||_w per iteration
  std::vector<double> contraction;     // ratio of consecutive step norms
};

class Equilibrium {
 public:
  Equilibrium(const CrossSectionGrid& grid, const MuProfile& profile, Vec phi, Vec aphi,
              int fit_degree = 12);

  const CrossSectionGrid& grid() const { return grid_; }
  const ToroidalFrame& frame() const { return grid_.frame(); }
  const MuProfile& profile() const { return profile_; }
  const Vec& phi() const { return phi_; }
  const Vec& aphi() const { return aphi_; }
  // Zero equilibrium fields (straight-line characteristics).
  bool homogeneous() const { return homogeneous_; }
  double sup_phi() const { return phi_.cwiseAbs().maxCoeff(); }
  double sup_aphi() const { return aphi_.cwiseAbs().maxCoeff(); }

  // Smooth field evaluation at (r, theta); r <= 1 + small tolerance.
  FieldSample fields(double r, double theta) const;
  FieldSample fields_cyl(double y1, double y2) const;

  PicardHistory history;
  double residual_phi = 0.0;   // w-norm residuals relative to the combined source norm
  double residual_aphi = 0.0;
  int iterations = 0;
  double fit_error = 0.0;      // max nodal misfit of the smooth representation

 private:
  CrossSectionGrid grid_;
  MuProfile profile_;
  Vec phi_, aphi_;
  DiskPolynomial phi_fit_, a_fit_;
  bool homogeneous_ = true;
};

struct Invariants {
  double e_plus, p_plus, e_minus, p_minus;
};

// Energy and toroidal momentum of a phase point (r, theta, v_r, v_theta, v_phi).
Invariants invariants_at(const Equilibrium& eq, double r, double theta, double vr, double vth,
                         double vphi);

struct Sources {
  Vec F1, F2;
  double tail_bound = 0.0;  // envelope tail estimate relative to the source scale
};

// Nodal charge and toroidal current densities for trial fields (phi, aphi).
Sources source_integrals(const CrossSectionGrid& grid, const MuProfile& profile,
                         const VelocityQuadrature& rule, const Vec& phi, const Vec& aphi);

struct PicardOptions {
  double tol = 1e-10;
  int max_iter = 200;
  double damping = 1.0;       // x <- (1 - d) x + d T(x)
  bool purely_magnetic = false;
  int fit_degree = 12;
};

class PicardFailure : public std::runtime_error {
 public:
  PicardFailure(const std::string& what, Vec phi, Vec aphi)
      : std::runtime_error(what), phi(std::move(phi)), aphi(std::move(aphi)) {}
  Vec phi, aphi;
};

Equilibrium solve_picard(const MuProfile& profile, const CrossSectionGrid& grid,
                         const VelocityQuadrature& rule, const PicardOptions& opt);

// Nodal E and B components by centered differences on the grid.
struct NodalFields {
  Vec E_r, E_th, B_r, B_th;
};
NodalFields reconstruct_fields(const CrossSectionGrid& grid, const Vec& phi, const Vec& aphi);

// Discrete divergence (1/(rR)) [d_r(r R B_r) + d_theta(R B_th)] at nodes.
Vec nodal_divergence(const CrossSectionGrid& grid, const Vec& Br, const Vec& Bth);

}  // namespace torvm
