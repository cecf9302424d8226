#pragma once

#include "torvm/operators.hpp"

#include <optional>
#include <string>
#include <vector>

namespace torvm {

enum class Verdict { Stable, Unstable, Marginal };
std::string verdict_name(Verdict v);

struct EigenPair {
  double value = 0.0;
  Vec vector;             // normalized in the metric
  double rayleigh = 0.0;  // Rayleigh quotient of `vector`
};

// Smallest eigenvalue of the symmetric pencil (form, diag(metric)).
EigenPair smallest_eigenvalue(const Mat& form, const Vec& metric);

// All eigenvalues of the pencil, ascending.
Vec generalized_eigenvalues(const Mat& form, const Vec& metric);

// Decomposition of <L h, h> at the witness h_*, normalized so that
// int |grad h|^2 + h^2 / R^2 = 1:
//   value = 1 + I + II + III + schur
//   I   = -sum int p mu_p / e |h|^2
//   II  = sum (+-) int R A_phi mu_p / e |h|^2
//   III = sum ||P(vphi_hat h)||^2
//   schur = -<A1^{-1} B^T h, B^T h> (zero when B vanishes)
struct WitnessDecomposition {
  double value = 0.0;
  double one = 0.0, I = 0.0, II = 0.0, III = 0.0, schur = 0.0;
  double sum() const { return one + I + II + III + schur; }
};

// Ground Dirichlet eigenfunction of -Delta with the normalization above.
Vec witness_function(const CrossSectionGrid& grid);

WitnessDecomposition witness_decomposition(const Equilibrium& eq, const OperatorSet& ops0,
                                           const Vec& h, const VelocityQuadrature& rule);

// Small-field sufficient condition:
//   c0 (1 + a) sup|A_phi| sup_x int <v>^{-1} (|mu_p+| + |mu_p-|) dv <= 1,
// with c0 the constant in ||h||^2 <= c0 ||grad h||^2.
struct SmallFieldCondition {
  double c0 = 0.0, sup_aphi = 0.0, sup_moment = 0.0, value = 0.0;
  bool satisfied = false;
};

SmallFieldCondition small_field_condition(const Equilibrium& eq, const VelocityQuadrature& rule);

struct StabilityOptions {
  OperatorOptions operators;   // lambda is forced to 0
  double tol_eig = 1e-8;       // absolute floor of the deadband
  double asym_factor = 10.0;   // deadband also covers this multiple of the L asymmetry
};

struct StabilityReport {
  double kappa = 0.0;
  Vec minimizer;
  WitnessDecomposition witness;
  Verdict verdict = Verdict::Marginal;
  double tol_eig = 0.0;
  double margin = 0.0;  // kappa relative to the deadband
  HypothesisReport hypotheses;
  SmallFieldCondition small_field;
  double asym_L = 0.0, b_norm = 0.0;
  std::string backend;
  std::string config_hash;
};

StabilityReport assess(const Equilibrium& eq, const StabilityOptions& opt);

// Same verdict logic, given assembled lambda = 0 operators.
StabilityReport assess(const Equilibrium& eq, const OperatorSet& ops0, const StabilityOptions& opt);

// For mirror-symmetric profiles on homogeneous equilibria: A2 at lambda = 0
// rebuilt from the electron terms alone, doubled. Agrees with L when B = 0.
Mat doubled_species_A2(const Equilibrium& eq, const OperatorOptions& opt);

struct ScanRow {
  double K = 0.0;
  bool ok = false;
  std::string error;
  double witness_form = 0.0, kappa = 0.0, sup_aphi = 0.0;
  WitnessDecomposition witness;
  Verdict verdict = Verdict::Marginal;
};

struct ScanOptions {
  StabilityOptions stability;
  PicardOptions picard;
  VelocityRuleSpec equilibrium_velocity;
  int threads = 1;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  std::optional<double> K0;         // smallest scanned K with a negative witness form
  double sup_aphi_max = 0.0;
  double I_exponent = 0.0;          // log-log slope of |I| against K over the upper half of the scan
  double II_ratio_max = 0.0;        // max |II| / (K sup|A_phi|)
  bool witness_decreases = false;   // witness form eventually below zero after a decreasing trend
};

ScanResult scan_K(const ProfileSpec& base, const std::vector<double>& Ks,
                  const CrossSectionGrid& grid, const ScanOptions& opt);

}  // namespace torvm
