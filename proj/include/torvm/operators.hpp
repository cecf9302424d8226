#pragma once

#include "torvm/divfree.hpp"
#include "torvm/kinetic.hpp"
#include "torvm/projections.hpp"
#include "torvm/sampler.hpp"

#include <string>

namespace torvm {

// How the kinetic averages are realised.
//   ClosedForm:  lambda = 0, homogeneous equilibria, level-set means.
//   TimeAverage: lambda = 0, forward time averages on sampled phase points.
//   Sampled:     lambda > 0, exponentially weighted pairs of trajectories.
enum class ProjectionBackend { Automatic, ClosedForm, TimeAverage, Sampled };

std::string backend_name(ProjectionBackend b);

struct OperatorOptions {
  double lambda = 0.0;
  ProjectionBackend backend = ProjectionBackend::Automatic;
  VelocityRuleSpec velocity;
  HomogeneousRule homogeneous;
  SamplerOptions sampler;
  KineticOptions kinetic;
  double asymmetry_limit = 1e-6;
  bool spectrum_check = true;
};

// Galerkin forms on the grid hat functions, form[i][j] = <Op phi_j, phi_i>
// in the w-metric. The operator itself is W^{-1} form. Vector blocks use the
// w-orthonormal divergence-free basis, so their coefficient space is
// Euclidean:
//   S[k][l] = <S psi_l, psi_k>,  T1[k][j] = <T1 phi_j, psi_k>,  T2 likewise,
//   U = S - T1 A1^{-1} T1^T,     V = T2 - T1 A1^{-1} B^T.
struct OperatorSet {
  double lambda = 0.0;
  ProjectionBackend backend = ProjectionBackend::ClosedForm;
  Vec w;
  Mat A1, A2, B, Bstar, L;

  // Pieces of A2 kept for the quadratic-form decomposition.
  Mat stiffness, curvature, mu_p_mass, projection_pp;

  // Factorization of -A1 (positive definite when A1 is negative definite).
  Eigen::LLT<Mat> neg_A1;
  double a1_max_eigenvalue = 0.0;  // generalized, in the w-metric

  bool has_vector = false;
  int n_vector = 0;
  Vec sigma;
  Mat S, T1, T2, U, V;
  double u_max_eigenvalue = 0.0;

  // Diagnostics.
  double asym_A1 = 0.0, asym_A2 = 0.0, asym_L = 0.0, asym_S = 0.0;
  double bstar_residual = 0.0;        // max|B*_direct - B^T| / max|M11|
  double velocity_identity = 0.0;     // int (R mu_p + vphi_hat mu_e) dv = 0, relative to the mass
  int degenerate = 0, capped = 0, unconverged = 0;

  int size() const { return static_cast<int>(w.size()); }
  // Operator action W^{-1} form h.
  Vec apply(const Mat& form, const Vec& h) const { return (form * h).cwiseQuotient(w); }
  // A1^{-1} applied to a right-hand side given as a form vector (W f).
  Mat solve_A1(const Mat& rhs) const { return -neg_A1.solve(rhs); }
};

// Scalar operators A1, A2, B, B* (B* = B^T, see bstar_residual) and, when a
// basis is supplied with lambda > 0, the raw vector blocks S, T1, T2.
OperatorSet assemble_scalar_ops(const Equilibrium& eq, const OperatorOptions& opt,
                                const DivFreeBasis* basis = nullptr);

// L = A2 - B A1^{-1} B^T. Throws if A1 is not negative definite.
void assemble_L(OperatorSet& ops);

// Composites U and V from the raw vector blocks.
void assemble_vector_blocks(OperatorSet& ops);

// Everything above in one call.
OperatorSet assemble_operators(const Equilibrium& eq, const OperatorOptions& opt,
                               const DivFreeBasis* basis = nullptr);

// Truncated reduced matrix M_n = [[L, V_n^T], [V_n, U_n]] on the first n
// basis vectors, and its metric diag(w, 1).
Mat reduced_matrix(const OperatorSet& ops, int n);
Vec reduced_metric(const OperatorSet& ops, int n);

struct A2Decomposition {
  double total = 0.0;       // sum of the terms below
  double gradient = 0.0;    // int |grad h|^2
  double curvature = 0.0;   // int h^2 / R^2
  double mu_p = 0.0;        // -sum int R vphi_hat mu_p h^2
  double projection = 0.0;  // sum ||P(vphi_hat h)||_H^2 (Q_lambda pairing for lambda > 0)
  double lambda_term = 0.0; // lambda^2 ||h||^2
  double matrix = 0.0;      // h^T A2 h
};

A2Decomposition quadratic_form_A2(const OperatorSet& ops, const Vec& h);

struct LDecomposition {
  double value = 0.0;       // h^T L h
  double a2 = 0.0;          // h^T A2 h
  double correction = 0.0;  // -<A1^{-1} B^T h, B^T h>, nonnegative
};

LDecomposition quadratic_form_L(const OperatorSet& ops, const Vec& h);

// Relative asymmetry max|F - F^T| / max|F|.
double asymmetry(const Mat& F);

struct MinimizerCheck {
  double lhs = 0.0, rhs = 0.0, gap = 0.0;
  double lhs_kinetic = 0.0, lhs_field = 0.0;
  double rhs_schur = 0.0, rhs_projection = 0.0;
  double phi_mismatch = 0.0;  // ||phi_J - phi_*||_w / ||phi_*||_w
};

// Minimum value of the constrained functional for A = A_phi e_phi against
// the operator expression. The left side is evaluated directly: F_* is built
// pointwise in phase space from level-set means, the Poisson problem is
// solved for its charge, and both energies are integrated by quadrature.
// Homogeneous equilibria and lambda = 0 closed-form operators only.
MinimizerCheck minimizer_identity_check(const Equilibrium& eq, const OperatorSet& ops0,
                                        const Vec& A_phi, const VelocityRuleSpec& velocity,
                                        int d_table = 801);

}  // namespace torvm
