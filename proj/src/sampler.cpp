#include "torvm/sampler.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace torvm {

std::vector<std::vector<double>> shifted_sobol(int n, int dim, std::uint64_t seed) {
  boost::random::sobol qrng(dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> shift(dim);
  for (auto& s : shift) s = uni(rng);
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < dim; ++k) {
      // The engine returns 64-bit integers.
      double u = std::ldexp(static_cast<double>(qrng()), -64) + shift[k];
      pts[i][k] = u - std::floor(u);
    }
  }
  return pts;
}

namespace {

// Piecewise-linear CDF of the speed density proportional to s^2 exp(-<s>).
struct SpeedTable {
  std::vector<double> s, cdf;
  explicit SpeedTable(double vmax, int n = 4000) {
    s.resize(n + 1);
    cdf.assign(n + 1, 0.0);
    for (int i = 0; i <= n; ++i) s[i] = vmax * i / n;
    auto f = [](double x) { return x * x * std::exp(-std::sqrt(1.0 + x * x)); };
    for (int i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + 0.5 * (f(s[i]) + f(s[i + 1])) * (s[i + 1] - s[i]);
    const double tot = cdf.back();
    for (auto& c : cdf) c /= tot;
  }
  // Inverse CDF and the exact density of the resulting distribution.
  void draw(double u, double& x, double& dens) const {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cdf.begin(), 1), cdf.size() - 1) - 1;
    while (cdf[i + 1] <= cdf[i] && i + 2 < cdf.size()) ++i;
    const double ds = s[i + 1] - s[i], dc = cdf[i + 1] - cdf[i];
    x = s[i] + (u - cdf[i]) / dc * ds;
    dens = dc / ds;
  }
};

}  // namespace

PhaseSample draw_phase_nodes(const Equilibrium& eq, const SamplerOptions& opt) {
  if (opt.n_points <= 0) throw std::invalid_argument("draw_phase_nodes: n_points must be positive");
  const SpeedTable table(opt.vmax);
  const auto pts = shifted_sobol(opt.n_points, 5, opt.seed);
  const MuProfile& prof = eq.profile();
  const double a = eq.frame().a();
  PhaseSample out;
  out.merged_species = eq.homogeneous();
  out.mirrored = out.merged_species && opt.mirror_vphi;
  const double share = out.mirrored ? 0.5 : 1.0;
  for (const auto& u : pts) {
    const double r = std::sqrt(u[0]);
    const double th = kTwoPi * u[1];
    double s, dens;
    table.draw(u[2], s, dens);
    const double c = 2.0 * u[3] - 1.0;
    const double om = kTwoPi * u[4];
    const double perp = s * std::sqrt(std::max(0.0, 1.0 - c * c));
    PhaseState z{r, th, perp * std::cos(om), perp * std::sin(om), s * c, 1};
    const double R = a + r * std::cos(th);
    // Sampling density r/pi in (r, theta) and dens(s)/(4 pi s^2) in v; the
    // measure is 2 pi r R dr dtheta dv.
    const double base = share * 8.0 * kPi * kPi * kPi * R * s * s / (dens * opt.n_points);
    const Invariants inv = invariants_at(eq, r, th, z.vr, z.vth, z.vphi);
    const double wp = std::abs(prof.eval_unchecked(1, inv.e_plus, inv.p_plus).mu_e);
    const double wm = std::abs(prof.eval_unchecked(-1, inv.e_minus, inv.p_minus).mu_e);
    if (out.merged_species) {
      double wmirror = 0.0;
      if (out.mirrored) {
        const Invariants im = invariants_at(eq, r, th, z.vr, z.vth, -z.vphi);
        wmirror = base * (std::abs(prof.eval_unchecked(1, im.e_plus, im.p_plus).mu_e) +
                          std::abs(prof.eval_unchecked(-1, im.e_minus, im.p_minus).mu_e));
      }
      out.nodes.push_back({z, base * (wp + wm), wmirror});
    } else {
      out.nodes.push_back({z, base * wp, 0.0});
      z.sign = -1;
      out.nodes.push_back({z, base * wm, 0.0});
    }
  }
  return out;
}

}  // namespace torvm
