#pragma once

#include "torvm/operators.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace torvm {

// Inertia of the truncated reduced matrix M_n in the metric diag(w, 1).
struct NegativeCount {
  int count = 0;
  bool schur = false;    // U_n negative definite: count = n + negatives of L - V^T U^{-1} V
  bool fallback = false; // U_n indefinite: raw count of M_n
  Vec eigenvalues;       // of M_n, ascending
  double u_max = 0.0;    // largest eigenvalue of U_n
};

NegativeCount negative_count(const OperatorSet& ops, int n);

struct CrossingRow {
  double lambda = 0.0;
  int count = 0;
  bool fallback = false;
  double ev_n = 0.0;    // (n+1)-th smallest eigenvalue of M_n; its sign change marks the crossing
  double ev_min = 0.0;
  double u_max = 0.0;
};

// Phase-space sample of the reconstructed distribution.
struct DistributionSample {
  PhaseState z;
  double f = 0.0;
};

struct GrowingMode {
  bool found = false;
  std::string message;
  int n = 0;
  double lambda0 = 0.0;
  double lambda_lo = 0.0, lambda_hi = 0.0;  // final bracket
  int count_lo = 0, count_hi = 0;           // counts at the bracketing grid points
  std::vector<CrossingRow> scan;
  int bisection_steps = 0;

  Vec k;        // A_phi at the nodes
  Vec h_tilde;  // coefficients on the divergence-free basis
  double null_residual = 0.0;  // ||M v|| / ||v|| in the metric

  // Reconstruction.
  Vec phi;
  Vec A_r, A_th;
  Vec E_r, E_th, E_phi, B_r, B_th, B_phi;
  double maxwell_charge = 0.0, maxwell_toroidal = 0.0, maxwell_poloidal = 0.0;
  std::vector<double> vlasov;  // relative weak residual per test function and species
  double vlasov_max = 0.0;
  double specular_max = 0.0;   // max |f(x, v) - f(x, v_bar)| / max |f| at wall points
  double energy = 0.0;         // <L0 k, k> + lambda^2 ||A||^2 + ||B_phi||^2
  double energy_scale = 0.0;
  double divergence_max = 0.0;
  std::vector<DistributionSample> samples;
  bool accepted = false;
};

struct ModeOptions {
  OperatorOptions operators;  // lambda is set per evaluation
  int n = 16;
  std::vector<double> lambda_grid;  // empty: log-spaced over [lambda_min, lambda_max]
  double lambda_min = 0.05, lambda_max = 50.0;
  int grid_points = 13;
  double root_tol = 1e-10;    // stop when |ev_n| falls below this times the spectrum scale
  int max_steps = 80;
  double tol_null = 1e-6, tol_maxwell = 1e-4, tol_vlasov = 1e-3;
  int vlasov_points = 512;
  double vlasov_step = 0.005;     // finite-difference step times lambda0
  double vlasov_horizon = 30.0;   // backward horizon times lambda0
  int specular_points = 64;
  int distribution_samples = 256;
  std::uint64_t seed = 7;
};

std::vector<double> log_grid(double lo, double hi, int points);

struct CrossingResult {
  GrowingMode mode;
  OperatorSet ops;  // assembled at lambda0
};

// Scans the lambda grid, brackets the last change from at least n+1 to n
// negative eigenvalues and refines it by a safeguarded secant iteration.
// The basis must hold at least n vectors; blocks are truncated to n.
CrossingResult find_crossing(const Equilibrium& eq, const DivFreeBasis& basis, const ModeOptions& opt);

// Potentials, fields, distribution samples and residuals for a located
// crossing. ops0 are the lambda = 0 operators for the energy check (may be
// null, in which case the check is skipped).
void reconstruct_and_verify(GrowingMode& mode, const Equilibrium& eq, const OperatorSet& ops,
                            const DivFreeBasis& basis, const OperatorSet* ops0, const ModeOptions& opt);

}  // namespace torvm
