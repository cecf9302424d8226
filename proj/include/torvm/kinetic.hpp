#pragma once

#include "torvm/equilibrium.hpp"
#include "torvm/sampler.hpp"
#include "torvm/trajectories.hpp"

namespace torvm {

// Nodal values (on the scalar grid) of the vector basis functions psi_k.
struct VectorBasisNodal {
  Mat psi_r, psi_th;  // size N x n
  int n() const { return static_cast<int>(psi_r.cols()); }
};

struct KineticOptions {
  int time_nodes = 48;        // quantile nodes of the exponential time weight
  TracerOptions tracer;       // RK4 settings for non-trivial fields
  int threads = 1;
  double ergodic_T = 100.0;   // time-average horizon for the lambda = 0 Gram
  double ergodic_ds = 0.05;   // sampling step along trajectories for averages
};

// Kinetic pairings, summed over species, on grid hat functions phi_j and
// vector basis psi_k (all in the |mu_e|-weighted phase-space inner product):
//   K11[i][j] = <Q phi_j, phi_i>        K1p[i][j] = <Q phi_j, vphi_hat phi_i>
//   Kpp[i][j] = <Q(vphi_hat phi_j), vphi_hat phi_i>
//   K1v[k][j] = <Q phi_j, v_hat.psi_k>  Kpv[k][j] = <Q(vphi_hat phi_j), v_hat.psi_k>
//   Kvv[k][l] = <Q(v_hat.psi_l), v_hat.psi_k>
// Q is Q_lambda for lambda > 0 and the kernel projection for lambda = 0.
// M11 and Mp1 are the matching sampled local masses int |mu_e| phi_i phi_j and
// int |mu_e| vphi_hat phi_i phi_j. Estimating them from the same trajectory
// points keeps M11 - K11 positive semidefinite exactly.
struct KineticMatrices {
  double lambda = 0.0;
  Mat K11, K1p, Kpp, K1v, Kpv, Kvv;
  Mat M11, Mp1;
  bool has_vector = false;
  int degenerate = 0;   // trajectories stopped by a grazing bounce
  int capped = 0;       // trajectories stopped by the bounce cap
  int unconverged = 0;  // time averages failing the T vs 2T check
};

// lambda > 0. Uses the time-symmetric form
//   <Q f, g> = int |mu_e| int_0^inf 2 lambda e^{-2 lambda t} (Rf)(Phi_t Rz) g(Phi_t z) dt dz
// on pairs (z, Rz), which makes the assembled pairings exactly symmetric
// (or antisymmetric for mixed time-reversal parity).
KineticMatrices assemble_kinetic(const Equilibrium& eq, const PhaseSample& sample, double lambda,
                                 const VectorBasisNodal* basis, const KineticOptions& opt);

// lambda = 0 from forward time averages: <P f, P g> = sum W fbar gbar.
KineticMatrices assemble_time_average_gram(const Equilibrium& eq, const PhaseSample& sample,
                                           const KineticOptions& opt);

// Nodal velocity moments (summed over species) entering the local terms:
//   m0   = int |mu_e| dv,            mp  = int |mu_e| vphi_hat dv,
//   mup  = int R vphi_hat mu_p dv,   rmup = int R mu_p dv.
struct LocalMoments {
  Vec m0, mp, mup, rmup;
  // Per-species versions (index 0 ions, 1 electrons).
  std::array<Vec, 2> m0_s, mp_s, mup_s;
};

LocalMoments local_moments(const Equilibrium& eq, const VelocityQuadrature& rule);

// Consistent local mass matrices int m(x) phi_i phi_j dx for the moments
// above, by Gauss quadrature on every grid cell (plus the axis disk and the
// wall annulus).
struct LocalMasses {
  Mat M0, Mp, Mup, Mr;
};

LocalMasses local_mass_matrices(const Equilibrium& eq, const VelocityQuadrature& rule, int order = 2);

// Consistent mass int m(r, theta) phi_i phi_j dx for a pointwise weight m,
// with the same cell quadrature.
Mat weighted_mass_matrix(const CrossSectionGrid& grid, const std::function<double(double, double)>& m,
                         int order = 2);

}  // namespace torvm
