#pragma once

#include "torvm/modefinder.hpp"
#include "torvm/stability.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace torvm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Full run configuration. Sections of the INI file:
//   [frame] a
//   [grid] nr, nth
//   [velocity] rule (cylindrical|tensor), vmax, panels_par, panels_perp, order, n_omega
//   [profile] family, mode, c_plus, c_minus, beta, eps, K, gamma, c_mu
//   [trajectory] dt, ergodic_T, ergodic_ds, time_nodes, horizon, bounce_cap
//   [sampler] points, vmax
//   [solver] tol_picard, max_iter, damping, purely_magnetic, fit_degree,
//            tol_eig, asym_factor, tol_null, tol_residual, tol_vlasov
//   [lambda] min, max, points, values (comma list, overrides the range)
//   [scan] K (comma list)
//   [mode] n
//   [run] seed, threads, out
struct RunConfig {
  double a = 3.0;
  int nr = 16, nth = 16;
  VelocityRuleSpec velocity;
  ProfileSpec profile;

  double dt = 1e-3;
  double ergodic_T = 100.0;
  double ergodic_ds = 0.05;
  int time_nodes = 48;
  double horizon = 30.0;  // backward horizon times lambda
  int bounce_cap = 1000000;

  int sampler_points = 4096;
  double sampler_vmax = 12.0;

  double tol_picard = 1e-10;
  int max_iter = 200;
  double damping = 1.0;
  bool purely_magnetic = false;
  int fit_degree = 12;
  double tol_eig = 1e-8;
  double asym_factor = 10.0;
  double tol_null = 1e-6;
  double tol_residual = 1e-4;
  double tol_vlasov = 1e-3;

  double lambda_min = 0.05, lambda_max = 50.0;
  int lambda_points = 13;
  std::vector<double> lambda_values;

  std::vector<double> K_values;
  int n = 16;

  std::uint64_t seed = 1;
  int threads = 1;
  std::string out = "out";

  // Throws ConfigError on out-of-range values.
  void validate() const;

  // Canonical "section.key = value" listing of every field, sorted by key.
  std::string canonical() const;
  // FNV-1a of canonical(), 16 hex digits.
  std::string hash() const;

  CrossSectionGrid grid() const;
  PicardOptions picard() const;
  OperatorOptions operators(double lambda = 0.0) const;
  StabilityOptions stability() const;
  ScanOptions scan() const;
  ModeOptions mode() const;
};

RunConfig parse_config_string(const std::string& text);
RunConfig load_config(const std::string& path);

std::uint64_t fnv1a(const std::string& s);

}  // namespace torvm
