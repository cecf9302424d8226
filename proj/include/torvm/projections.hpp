#pragma once

#include "torvm/equilibrium.hpp"
#include "torvm/trajectories.hpp"

#include <array>
#include <functional>
#include <vector>

namespace torvm {

// Level set {(r, theta): a + r cos(theta) > |p| / sqrt(e^2 - 1)} of the
// homogeneous problem, i.e. the unit disk cut by the half-plane y1 > d.
struct LevelSetRegion {
  double e = 1.0, p = 0.0;
  double d = -1.0;        // cut position |p| / sqrt(e^2 - 1) - a
  double measure = 0.0;   // integral of r dr dtheta over the region
  bool empty() const { return measure <= 0.0; }
};

LevelSetRegion level_set_region(double a, double e, double p);

// Area of the unit disk above y1 = d.
double cut_disk_measure(double d);

// Linear functionals h -> integral over {y1 > d} of h r dr dtheta, for h the
// grid interpolant (c1) and for h / (a + r cos theta) (cR).
struct RegionFunctional {
  Vec c1, cR;
  double measure = 0.0;
};

class RegionIntegrator {
 public:
  explicit RegionIntegrator(const CrossSectionGrid& grid, int theta_order = 4);

  const CrossSectionGrid& grid() const { return grid_; }
  RegionFunctional functional(double d) const;
  // Integral of f(r, theta) r dr dtheta over {y1 > d} with the same rule.
  double integrate(const std::function<double(double, double)>& f, double d) const;

 private:
  template <class Visit>
  void visit(double d, Visit&& v) const;

  CrossSectionGrid grid_;
  int order_;
};

// Region mean of the grid function h for the level set of (e, p); throws
// std::domain_error when the region is empty.
double project_homogeneous(const RegionIntegrator& ri, const Vec& h, double e, double p);
double project_homogeneous(const RegionIntegrator& ri,
                           const std::function<double(double, double)>& h, double e, double p);

// Parameters of the (s, d) rule behind the homogeneous Gram matrices:
// s = |v| on [0, vmax]; d parametrises |p| = s (a + d) on (-1, 1); the core
// |p| <= (a - 1) s, where the region is the whole disk, is integrated in p.
struct HomogeneousRule {
  double vmax = 12.0;
  int s_panels = 48;
  int d_panels = 32;
  int p_panels = 48;
  int order = 4;
};

// Gram matrices of the kernel projection in the homogeneous case, per species
// (index 0: ions, 1: electrons), on grid hat functions phi_j:
//   G11[i][j] = <P phi_j, P phi_i>_H
//   G1p[i][j] = <P phi_j, P(vphi_hat phi_i)>_H
//   Gpp[i][j] = <P(vphi_hat phi_j), P(vphi_hat phi_i)>_H
struct HomogeneousGram {
  std::array<Mat, 2> G11, G1p, Gpp;
  Mat sum11() const { return G11[0] + G11[1]; }
  Mat sum1p() const { return G1p[0] + G1p[1]; }
  Mat sumpp() const { return Gpp[0] + Gpp[1]; }
};

HomogeneousGram homogeneous_gram(const RegionIntegrator& ri, const MuProfile& profile,
                                 const HomogeneousRule& rule = {});

// Per-species ||P(vphi_hat h)||_H^2. Homogeneous equilibria use the closed
// form; otherwise the supplied sampled Gram is used.
std::array<double, 2> projected_vphi_norm(const Vec& h, const HomogeneousGram& gram);

struct ProjectionSample {
  std::vector<double> values;
  std::vector<double> discrepancy;
  int unconverged = 0;
};

// Time-average realisation of P g at each phase node, with T vs 2T diagnostics.
ProjectionSample project_general(const PhaseFunction& g, const std::vector<PhaseState>& nodes,
                                 const Tracer& tracer, double T, double ds, double rel_tol = 0.01);

}  // namespace torvm
