#pragma once

#include "torvm/kinetic.hpp"

namespace torvm {

// Divergence-free poloidal vector fields from a stream function psi on the
// staggered grid: psi lives at corners (i dr, theta_j + dtheta/2), h_r at
// radial faces (i dr, theta_j) and h_theta at angular faces
// ((i + 1/2) dr, theta_j + dtheta/2):
//   r R h_r = d_theta psi,   R h_theta = -d_r psi.
// The discrete divergence vanishes identically. h_theta = 0 on the wall is
// imposed by an odd ghost; psi = 0 on the axis fixes the gauge.
//
// Basis vectors are eigenvectors of the curl-curl energy (equal to -Delta on
// divergence-free fields with these wall conditions), orthonormal in the
// w-metric, sigma ascending.
struct DivFreeBasis {
  int n = 0;
  Vec sigma;
  Mat coef;           // stream-function coefficients, U x n
  Mat face_r;         // h_r at radial faces i = 1..nr (index (i-1) * nth + j), x n
  Mat face_th;        // h_theta at angular faces i = 0..nr-1 (index i * nth + j), x n
  Vec mass_r, mass_th;  // face measures
  VectorBasisNodal nodal;  // averaged to scalar nodes
  double max_divergence = 0.0;      // max |div| over cells, scaled by field size
  double wall_theta_residual = 0.0; // max |h_theta| interpolated to the wall
  double wall_radial_residual = 0.0;// max |d_r h_r + (a+2cos)/(a+cos) h_r| at the wall, relative
  double orthonormality_error = 0.0;
};

DivFreeBasis build_divfree_basis(const CrossSectionGrid& grid, int n);

// Combination sum_k c_k psi_k at scalar nodes.
struct NodalVector {
  Vec r, th;
};
NodalVector combine_nodal(const DivFreeBasis& basis, const Vec& c);

// Discrete divergence at every scalar cell of a face field.
Vec face_divergence(const CrossSectionGrid& grid, const Vec& face_r, const Vec& face_th);

}  // namespace torvm
