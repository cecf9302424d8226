#pragma once

#include "torvm/equilibrium.hpp"

#include <functional>
#include <string>
#include <vector>

namespace torvm {

// Phase point in the toroidal frame. sign = +1 ions, -1 electrons.
struct PhaseState {
  double r = 0.0, th = 0.0, vr = 0.0, vth = 0.0, vphi = 0.0;
  int sign = 1;
};

// Time reversal (v_r, v_theta, v_phi) -> (-v_r, -v_theta, v_phi).
inline PhaseState time_reversed(PhaseState s) {
  s.vr = -s.vr;
  s.vth = -s.vth;
  return s;
}

// Specular image (v_r -> -v_r).
inline PhaseState specular_image(PhaseState s) {
  s.vr = -s.vr;
  return s;
}

struct TracerOptions {
  double dt = 1e-3;           // RK4 step for non-trivial fields
  int bounce_cap = 1000000;   // hard cap on wall reflections per trajectory
  double wall_tol = 1e-12;    // event location tolerance in r
  double graze_tol = 1e-10;   // |v_r| below this at the wall marks a grazing hit
  bool force_rk4 = false;     // integrate numerically even when the fields vanish
};

struct TraceStats {
  int bounces = 0;
  bool degenerate = false;  // grazing bounce encountered; samples after it are frozen
  bool capped = false;      // bounce cap reached
};

struct TrajectorySample {
  double s = 0.0;
  PhaseState state;
  bool bounce = false;  // a wall reflection happened since the previous sample
};

// Reflected characteristics of one species in a fixed equilibrium.
class Tracer {
 public:
  Tracer(const Equilibrium& eq, TracerOptions opt = {});

  const Equilibrium& equilibrium() const { return eq_; }
  const TracerOptions& options() const { return opt_; }

  // States at the given nondecreasing times s_k >= 0. Negative times are not
  // accepted here; use backward() for s <= 0.
  TraceStats forward(const PhaseState& seed, const std::vector<double>& times,
                     std::vector<PhaseState>& out) const;

  // States at times -s_k, s_k >= 0, via time reversal of a forward run.
  TraceStats backward(const PhaseState& seed, const std::vector<double>& times,
                      std::vector<PhaseState>& out) const;

  // Uniformly spaced samples s = 0, ds, ..., T with bounce markers.
  std::vector<TrajectorySample> sample(const PhaseState& seed, double T, double ds,
                                       TraceStats* stats = nullptr) const;

 private:
  const Equilibrium& eq_;
  TracerOptions opt_;
};

using PhaseFunction = std::function<double(const PhaseState&)>;

struct QLambdaResult {
  double value = 0.0;
  double tail_weight = 0.0;  // e^{-lambda H}
  TraceStats stats;
};

// Q_lambda g at the seed: integral over s <= 0 of lambda e^{lambda s} g(Phi_s),
// using exact exponential weights on the piecewise-linear interpolant of
// samples spaced ds over [-horizon, 0], plus e^{-lambda H} g(Phi_{-H}).
QLambdaResult q_lambda_average(const PhaseFunction& g, double lambda, const PhaseState& seed,
                               const Tracer& tracer, double horizon, double ds);

struct ErgodicResult {
  double value = 0.0;       // average over [0, 2T]
  double value_T = 0.0;     // average over [0, T]
  double discrepancy = 0.0; // |value - value_T| / max(|value|, floor)
  bool converged = true;
  TraceStats stats;
};

ErgodicResult ergodic_average(const PhaseFunction& g, const PhaseState& seed,
                              const Tracer& tracer, double T, double ds, double rel_tol = 0.01,
                              double floor = 1e-12);

// Right-hand side of the characteristic ODE in cylindrical variables
// y = (R, Z, v_R, v_Z, v_phi); exposed for tests.
void characteristic_rhs(const Equilibrium& eq, int sign, const double y[5], double dy[5]);

// CSV dump: s, r, theta, v_r, v_theta, v_phi, bounce.
void write_trajectory_csv(const std::string& path, const std::vector<TrajectorySample>& samples,
                          const std::string& config_hash);

}  // namespace torvm
