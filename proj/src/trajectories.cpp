#include "torvm/trajectories.hpp"

#include "torvm/log.hpp"

#include <unsupported/Eigen/Polynomials>

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace torvm {

namespace {

struct Cyl {
  double y[5];  // R, Z, v_R, v_Z, v_phi
};

Cyl to_cyl(const PhaseState& s, double a) {
  const double c = std::cos(s.th), sn = std::sin(s.th);
  Cyl out;
  out.y[0] = a + s.r * c;
  out.y[1] = s.r * sn;
  out.y[2] = s.vr * c - s.vth * sn;
  out.y[3] = s.vr * sn + s.vth * c;
  out.y[4] = s.vphi;
  return out;
}

PhaseState from_cyl(const double* y, double a, int sign) {
  PhaseState s;
  const double y1 = y[0] - a, y2 = y[1];
  s.r = std::hypot(y1, y2);
  s.th = std::atan2(y2, y1);
  if (s.th < 0.0) s.th += kTwoPi;
  const double c = s.r > 0.0 ? y1 / s.r : 1.0, sn = s.r > 0.0 ? y2 / s.r : 0.0;
  s.vr = y[2] * c + y[3] * sn;
  s.vth = -y[2] * sn + y[3] * c;
  s.vphi = y[4];
  s.sign = sign;
  return s;
}

double rho_of(const double* y, double a) { return std::hypot(y[0] - a, y[1]); }

void rk4_step(const Equilibrium& eq, int sign, const double* y, const double* k1, double h,
              double* out) {
  double tmp[5], k2[5], k3[5], k4[5];
  for (int i = 0; i < 5; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  characteristic_rhs(eq, sign, tmp, k2);
  for (int i = 0; i < 5; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  characteristic_rhs(eq, sign, tmp, k3);
  for (int i = 0; i < 5; ++i) tmp[i] = y[i] + h * k3[i];
  characteristic_rhs(eq, sign, tmp, k4);
  for (int i = 0; i < 5; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// Cubic Hermite interpolation of each component on [0, h] at t.
void hermite(const double* y0, const double* d0, const double* y1, const double* d1, double h,
             double t, double* out) {
  const double s = t / h, s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  for (int i = 0; i < 5; ++i) out[i] = h00 * y0[i] + h10 * h * d0[i] + h01 * y1[i] + h11 * h * d1[i];
}

class Runner {
 public:
  Runner(const Equilibrium& eq, const TracerOptions& opt, int sign)
      : eq_(eq), opt_(opt), sign_(sign), a_(eq.frame().a()) {}

  TraceStats run(const PhaseState& seed, const std::vector<double>& times,
                 std::vector<PhaseState>& out, std::vector<double>* bounce_times) {
    out.assign(times.size(), seed);
    for (std::size_t k = 1; k < times.size(); ++k)
      if (times[k] < times[k - 1]) throw std::invalid_argument("Tracer: times must be sorted");
    if (!times.empty() && times.front() < 0.0)
      throw std::invalid_argument("Tracer: times must be nonnegative");
    if (seed.r > 1.0 + 1e-9) throw std::domain_error("Tracer: seed outside the torus");
    bounce_times_ = bounce_times;
    if (eq_.homogeneous() && !opt_.force_rk4) return free_stream(seed, times, out);
    return rk4(seed, times, out);
  }

 private:
  void reflect_cyl(double* y, TraceStats& st, double t) {
    const double n1 = (y[0] - a_), n2 = y[1];
    const double rho = std::hypot(n1, n2);
    const double e1 = n1 / rho, e2 = n2 / rho;
    const double vn = y[2] * e1 + y[3] * e2;
    if (std::abs(vn) < opt_.graze_tol) st.degenerate = true;
    y[2] -= 2.0 * vn * e1;
    y[3] -= 2.0 * vn * e2;
    ++st.bounces;
    if (bounce_times_) bounce_times_->push_back(t);
    if (st.bounces >= opt_.bounce_cap) st.capped = true;
  }

  TraceStats rk4(const PhaseState& seed, const std::vector<double>& times,
                 std::vector<PhaseState>& out) {
    TraceStats st;
    Cyl c = to_cyl(seed, a_);
    double y[5], dy[5];
    std::copy(c.y, c.y + 5, y);
    characteristic_rhs(eq_, sign_, y, dy);
    double t = 0.0;
    std::size_t k = 0;
    const std::size_t n = times.size();
    while (k < n && times[k] <= 0.0) out[k++] = from_cyl(y, a_, sign_);
    double y1[5], d1[5], tmp[5];
    while (k < n) {
      if (st.degenerate || st.capped) {
        const PhaseState frozen = from_cyl(y, a_, sign_);
        while (k < n) out[k++] = frozen;
        break;
      }
      double h = opt_.dt;
      rk4_step(eq_, sign_, y, dy, h, y1);
      bool hit = false;
      if (rho_of(y1, a_) > 1.0) {
        // Bisect the step fraction until the state sits on the wall from inside.
        double lo = 0.0, hi = h;
        double ylo[5];
        std::copy(y, y + 5, ylo);
        for (int it = 0; it < 200; ++it) {
          const double mid = 0.5 * (lo + hi);
          rk4_step(eq_, sign_, y, dy, mid, tmp);
          if (rho_of(tmp, a_) > 1.0) {
            hi = mid;
          } else {
            lo = mid;
            std::copy(tmp, tmp + 5, ylo);
            if (1.0 - rho_of(ylo, a_) < opt_.wall_tol) break;
          }
          if (hi - lo < 1e-17) break;
        }
        h = lo;
        std::copy(ylo, ylo + 5, y1);
        hit = true;
      }
      characteristic_rhs(eq_, sign_, y1, d1);
      while (k < n && times[k] <= t + h) {
        hermite(y, dy, y1, d1, h, times[k] - t, tmp);
        out[k++] = from_cyl(tmp, a_, sign_);
      }
      t += h;
      std::copy(y1, y1 + 5, y);
      if (hit) {
        reflect_cyl(y, st, t);
        characteristic_rhs(eq_, sign_, y, dy);
      } else {
        std::copy(d1, d1 + 5, dy);
      }
    }
    return st;
  }

  // Exact straight-line motion in Cartesian coordinates with phi = 0 at start.
  TraceStats free_stream(const PhaseState& seed, const std::vector<double>& times,
                         std::vector<PhaseState>& out) {
    TraceStats st;
    const Cyl c = to_cyl(seed, a_);
    double X[3] = {c.y[0], 0.0, c.y[1]};
    double V[3] = {c.y[2], c.y[4], c.y[3]};
    const double ev = lorentz(V[0], V[1], V[2]);
    double u[3] = {V[0] / ev, V[1] / ev, V[2] / ev};
    const double speed = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    double t = 0.0;
    std::size_t k = 0;
    const std::size_t n = times.size();
    if (speed == 0.0) {
      return st;
    }
    while (k < n) {
      if (st.degenerate || st.capped) {
        const PhaseState frozen = cart_state(X, V);
        while (k < n) out[k++] = frozen;
        break;
      }
      const double tau = exit_time(X, u);
      while (k < n && times[k] <= t + tau) {
        const double ds = times[k] - t;
        const double P[3] = {X[0] + u[0] * ds, X[1] + u[1] * ds, X[2] + u[2] * ds};
        out[k++] = cart_state(P, V);
      }
      if (k >= n) break;
      for (int i = 0; i < 3; ++i) X[i] += u[i] * tau;
      t += tau;
      // Outward normal of the torus at X.
      const double R = std::hypot(X[0], X[1]);
      const double y1 = R - a_, y2 = X[2];
      const double rho = std::hypot(y1, y2);
      const double nrm[3] = {y1 / rho * X[0] / R, y1 / rho * X[1] / R, y2 / rho};
      const double vn = V[0] * nrm[0] + V[1] * nrm[1] + V[2] * nrm[2];
      if (std::abs(vn) < opt_.graze_tol) st.degenerate = true;
      for (int i = 0; i < 3; ++i) {
        V[i] -= 2.0 * vn * nrm[i];
        u[i] = V[i] / ev;
      }
      ++st.bounces;
      if (bounce_times_) bounce_times_->push_back(t);
      if (st.bounces >= opt_.bounce_cap) st.capped = true;
    }
    return st;
  }

  PhaseState cart_state(const double* P, const double* V) const {
    const double R = std::hypot(P[0], P[1]);
    const double ex = P[0] / R, ey = P[1] / R;
    double y[5];
    y[0] = R;
    y[1] = P[2];
    y[2] = V[0] * ex + V[1] * ey;
    y[3] = V[2];
    y[4] = -V[0] * ey + V[1] * ex;
    return from_cyl(y, a_, sign_);
  }

  double rho_at(const double* X, const double* u, double s, double* drho) const {
    const double x = X[0] + u[0] * s, y = X[1] + u[1] * s, z = X[2] + u[2] * s;
    const double R = std::hypot(x, y);
    const double y1 = R - a_;
    const double rho = std::hypot(y1, z);
    if (drho) {
      const double dR = (x * u[0] + y * u[1]) / R;
      *drho = (y1 * dR + z * u[2]) / rho;
    }
    return rho;
  }

  // First time s > 0 at which X + u s leaves the torus through its wall.
  double exit_time(const double* X, const double* u) const {
    const double A2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    const double A1 = 2.0 * (X[0] * u[0] + X[1] * u[1] + X[2] * u[2]);
    const double A0 = X[0] * X[0] + X[1] * X[1] + X[2] * X[2];
    const double B2 = u[0] * u[0] + u[1] * u[1];
    const double B1 = 2.0 * (X[0] * u[0] + X[1] * u[1]);
    const double B0 = X[0] * X[0] + X[1] * X[1];
    const double c = A0 + a_ * a_ - 1.0, fa = 4.0 * a_ * a_;
    Eigen::Matrix<double, 5, 1> coef;
    coef << c * c - fa * B0, 2.0 * A1 * c - fa * B1, A1 * A1 + 2.0 * A2 * c - fa * B2,
        2.0 * A2 * A1, A2 * A2;
    Eigen::PolynomialSolver<double, 4> solver;
    solver.compute(coef);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
      const auto z = solver.roots()[i];
      if (std::abs(z.imag()) > 1e-6 * (1.0 + std::abs(z.real()))) continue;
      double s = z.real();
      if (s <= 1e-12) continue;
      // Newton polish on rho(s) = 1.
      bool ok = true;
      for (int it = 0; it < 8; ++it) {
        double d;
        const double f = rho_at(X, u, s, &d) - 1.0;
        if (std::abs(f) < 1e-14) break;
        if (d == 0.0) {
          ok = false;
          break;
        }
        s -= f / d;
      }
      double d;
      const double f = rho_at(X, u, s, &d) - 1.0;
      if (!ok || std::abs(f) > 1e-11 || s <= 1e-12 || d <= 0.0) continue;
      best = std::min(best, s);
    }
    if (std::isfinite(best)) return ensure_inside(X, u, best);
    return scan_exit(X, u);
  }

  // Step back until the point lies inside up to the wall tolerance.
  double ensure_inside(const double* X, const double* u, double s) const {
    double drho;
    for (int it = 0; it < 50 && rho_at(X, u, s, &drho) > 1.0; ++it) s -= 1e-15 * std::max(1.0, s);
    return s;
  }

  // Fallback: march and bisect.
  double scan_exit(const double* X, const double* u) const {
    const double ds = 1e-3;
    double s0 = 0.0;
    for (int it = 0; it < 10000000; ++it) {
      const double s1 = s0 + ds;
      if (rho_at(X, u, s1, nullptr) > 1.0) {
        double lo = s0, hi = s1;
        while (hi - lo > 1e-15 * std::max(1.0, hi)) {
          const double mid = 0.5 * (lo + hi);
          (rho_at(X, u, mid, nullptr) > 1.0 ? hi : lo) = mid;
        }
        return lo;
      }
      s0 = s1;
    }
    throw std::runtime_error("free streaming: no wall crossing found");
  }

  const Equilibrium& eq_;
  const TracerOptions& opt_;
  int sign_;
  double a_;
  std::vector<double>* bounce_times_ = nullptr;
};

}  // namespace

void characteristic_rhs(const Equilibrium& eq, int sign, const double y[5], double dy[5]) {
  const double R = y[0];
  const double ev = lorentz(y[2], y[3], y[4]);
  const double uR = y[2] / ev, uZ = y[3] / ev, uP = y[4] / ev;
  dy[0] = uR;
  dy[1] = uZ;
  const FieldSample f = eq.fields_cyl(R - eq.frame().a(), y[1]);
  const double q = sign;
  // (u x B) with B = (B_R, 0, B_Z) in the right-handed frame (e_R, e_phi, e_Z).
  dy[2] = q * (f.E_R + uP * f.B_Z) + y[4] * uP / R;
  dy[3] = q * (f.E_Z - uP * f.B_R);
  dy[4] = q * (uZ * f.B_R - uR * f.B_Z) - y[2] * uP / R;
}

Tracer::Tracer(const Equilibrium& eq, TracerOptions opt) : eq_(eq), opt_(opt) {
  if (!(opt_.dt > 0.0)) throw std::invalid_argument("Tracer: dt must be positive");
}

TraceStats Tracer::forward(const PhaseState& seed, const std::vector<double>& times,
                           std::vector<PhaseState>& out) const {
  Runner run(eq_, opt_, seed.sign);
  return run.run(seed, times, out, nullptr);
}

TraceStats Tracer::backward(const PhaseState& seed, const std::vector<double>& times,
                            std::vector<PhaseState>& out) const {
  Runner run(eq_, opt_, seed.sign);
  TraceStats st = run.run(time_reversed(seed), times, out, nullptr);
  for (auto& s : out) s = time_reversed(s);
  return st;
}

std::vector<TrajectorySample> Tracer::sample(const PhaseState& seed, double T, double ds,
                                             TraceStats* stats) const {
  if (!(ds > 0.0) || T < 0.0) throw std::invalid_argument("Tracer::sample: bad horizon");
  const int n = static_cast<int>(std::floor(T / ds + 1e-9)) + 1;
  std::vector<double> times(n);
  for (int k = 0; k < n; ++k) times[k] = k * ds;
  std::vector<PhaseState> states;
  std::vector<double> bt;
  Runner run(eq_, opt_, seed.sign);
  TraceStats st = run.run(seed, times, states, &bt);
  if (stats) *stats = st;
  std::vector<TrajectorySample> out(n);
  std::size_t b = 0;
  for (int k = 0; k < n; ++k) {
    out[k].s = times[k];
    out[k].state = states[k];
    bool hit = false;
    while (b < bt.size() && bt[b] <= times[k]) {
      hit = true;
      ++b;
    }
    out[k].bounce = hit;
  }
  return out;
}

QLambdaResult q_lambda_average(const PhaseFunction& g, double lambda, const PhaseState& seed,
                               const Tracer& tracer, double horizon, double ds) {
  if (!(lambda > 0.0)) throw std::invalid_argument("q_lambda_average: lambda must be positive");
  if (lambda * horizon < 40.0)
    warn("q_lambda_average: horizon below 40/lambda, tail weight " +
         std::to_string(std::exp(-lambda * horizon)));
  const int n = std::max(1, static_cast<int>(std::ceil(horizon / ds)));
  const double h = horizon / n;
  std::vector<double> times(n + 1);
  for (int k = 0; k <= n; ++k) times[k] = k * h;
  std::vector<PhaseState> states;
  QLambdaResult res;
  res.stats = tracer.backward(seed, times, states);
  const double x = lambda * h;
  // c1 = (1 - e^{-x}(1 + x)) / x, accurate for small x.
  const double c1 = x < 1e-4 ? x / 2.0 - x * x / 3.0 + x * x * x / 8.0
                             : (1.0 - std::exp(-x) * (1.0 + x)) / x;
  const double m = -std::expm1(-x);
  double acc = 0.0, decay = 1.0;
  double gprev = g(states[0]);
  for (int k = 0; k < n; ++k) {
    const double gnext = g(states[k + 1]);
    acc += decay * ((m - c1) * gprev + c1 * gnext);
    decay *= std::exp(-x);
    gprev = gnext;
  }
  res.tail_weight = std::exp(-lambda * horizon);
  res.value = acc + res.tail_weight * gprev;
  return res;
}

ErgodicResult ergodic_average(const PhaseFunction& g, const PhaseState& seed,
                              const Tracer& tracer, double T, double ds, double rel_tol,
                              double floor) {
  if (!(T > 0.0) || !(ds > 0.0)) throw std::invalid_argument("ergodic_average: bad horizon");
  const int n = std::max(1, static_cast<int>(std::ceil(T / ds)));
  const double h = T / n;
  std::vector<double> times(2 * n + 1);
  for (int k = 0; k <= 2 * n; ++k) times[k] = k * h;
  std::vector<PhaseState> states;
  ErgodicResult res;
  res.stats = tracer.forward(seed, times, states);
  double accT = 0.0, acc2 = 0.0;
  double prev = g(states[0]);
  for (int k = 0; k < 2 * n; ++k) {
    const double next = g(states[k + 1]);
    const double seg = 0.5 * h * (prev + next);
    if (k < n) accT += seg;
    acc2 += seg;
    prev = next;
  }
  res.value_T = accT / T;
  res.value = acc2 / (2.0 * T);
  res.discrepancy = std::abs(res.value - res.value_T) / std::max(std::abs(res.value), floor);
  res.converged = res.discrepancy <= rel_tol;
  return res;
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectorySample>& samples,
                          const std::string& config_hash) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << "# config_hash=" << config_hash << '\n';
  f << "s,r,theta,v_r,v_theta,v_phi,bounce\n";
  f.precision(12);
  for (const auto& s : samples)
    f << s.s << ',' << s.state.r << ',' << s.state.th << ',' << s.state.vr << ',' << s.state.vth
      << ',' << s.state.vphi << ',' << (s.bounce ? 1 : 0) << '\n';
}

}  // namespace torvm
