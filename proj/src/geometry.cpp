#include "torvm/geometry.hpp"

#include "torvm/quadrature.hpp"

#include <stdexcept>

namespace torvm {

ToroidalFrame::ToroidalFrame(double a) : a_(a) {
  if (!(a > 1.0)) throw std::invalid_argument("ToroidalFrame: major radius must exceed 1");
}

Eigen::Vector3d ToroidalFrame::position(double r, double theta, double phi) const {
  const double R = weight(r, theta);
  return {R * std::cos(phi), R * std::sin(phi), r * std::sin(theta)};
}

ToroidalFrame::Basis ToroidalFrame::basis(double theta, double phi) {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cp = std::cos(phi), sp = std::sin(phi);
  Basis b;
  b.er = {ct * cp, ct * sp, st};
  b.eth = {-st * cp, -st * sp, ct};
  b.ephi = {-sp, cp, 0.0};
  return b;
}

CrossSectionGrid::CrossSectionGrid(const ToroidalFrame& frame, int nr, int nth)
    : frame_(frame), nr_(nr), nth_(nth) {
  if (nr < 2 || nth < 4) throw std::invalid_argument("CrossSectionGrid: too few nodes");
  dr_ = 1.0 / nr;
  dth_ = kTwoPi / nth;
  w_.resize(size());
  for (int i = 0; i < nr_; ++i)
    for (int j = 0; j < nth_; ++j)
      w_[index(i, j)] = kTwoPi * r(i) * frame_.weight(r(i), theta(j)) * dr_ * dth_;
  if ((w_.array() <= 0.0).any())
    throw std::runtime_error("CrossSectionGrid: non-positive cell measure");
}

Stencil CrossSectionGrid::stencil(double rr, double th) const {
  Stencil s;
  double t = th / dth_;
  t -= nth_ * std::floor(t / nth_);
  int j0 = static_cast<int>(std::floor(t));
  double ft = t - j0;
  if (j0 >= nth_) { j0 -= nth_; }
  const int j1 = (j0 + 1) % nth_;

  auto add_ring = [&](int i, double wr) {
    if (wr == 0.0) return;
    s.add(index(i, j0), wr * (1.0 - ft));
    s.add(index(i, j1), wr * ft);
  };

  const double r0 = r(0), rl = r(nr_ - 1);
  if (rr <= r0) {
    add_ring(0, 1.0);
  } else if (rr >= rl) {
    double wr = (1.0 - rr) / (1.0 - rl);
    if (wr < 0.0) wr = 0.0;
    add_ring(nr_ - 1, wr);
  } else {
    const double u = (rr - r0) / dr_;
    int i0 = static_cast<int>(std::floor(u));
    if (i0 > nr_ - 2) i0 = nr_ - 2;
    const double fr = u - i0;
    add_ring(i0, 1.0 - fr);
    add_ring(i0 + 1, fr);
  }
  return s;
}

double CrossSectionGrid::interpolate(const Vec& f, double rr, double th) const {
  const Stencil s = stencil(rr, th);
  double v = 0.0;
  for (int k = 0; k < s.n; ++k) v += s.w[k] * f[s.idx[k]];
  return v;
}

Vec CrossSectionGrid::sample(const std::function<double(double, double)>& f) const {
  Vec out(size());
  for (int k = 0; k < size(); ++k) out[k] = f(node_r(k), node_theta(k));
  return out;
}

Vec ScalarLaplacian::apply(const Vec& h) const {
  return (form * h).cwiseQuotient(weights);
}

ScalarLaplacian assemble_scalar_laplacian(const CrossSectionGrid& g, bool shifted) {
  const int n = g.size();
  const double dr = g.dr(), dth = g.dth();
  const auto& fr = g.frame();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * n);
  Vec diag = Vec::Zero(n);

  auto couple = [&](int p, int q, double c) {
    diag[p] += c;
    diag[q] += c;
    trip.emplace_back(p, q, -c);
    trip.emplace_back(q, p, -c);
  };

  for (int i = 0; i < g.nr(); ++i) {
    for (int j = 0; j < g.nth(); ++j) {
      const int k = g.index(i, j);
      const double th = g.theta(j);
      if (i + 1 < g.nr()) {
        const double rf = (i + 1) * dr;
        couple(k, g.index(i + 1, j), kTwoPi * rf * fr.weight(rf, th) * dth / dr);
      } else {
        // Wall face at half a cell from the last ring.
        diag[k] += kTwoPi * 1.0 * fr.weight(1.0, th) * dth / (0.5 * dr);
      }
      const double ri = g.r(i);
      const double thf = th + 0.5 * dth;
      couple(k, g.index(i, (j + 1) % g.nth()), kTwoPi * fr.weight(ri, thf) * dr / (ri * dth));
    }
  }
  if (shifted) {
    for (int k = 0; k < n; ++k) {
      const double R = g.node_R(k);
      diag[k] += g.weights()[k] / (R * R);
    }
  }
  for (int k = 0; k < n; ++k) trip.emplace_back(k, k, diag[k]);

  ScalarLaplacian lap;
  SpMat stiff(n, n);
  stiff.setFromTriplets(trip.begin(), trip.end());
  lap.form = -stiff;
  lap.weights = g.weights();
  lap.shifted = shifted;
  return lap;
}

double weighted_inner_product(const Vec& f, const Vec& g, const CrossSectionGrid& grid) {
  if (f.size() != grid.size() || g.size() != grid.size())
    throw std::invalid_argument("weighted_inner_product: shape mismatch");
  return (f.array() * g.array() * grid.weights().array()).sum();
}

VelocityQuadrature VelocityQuadrature::cylindrical(double vmax, int panels_par, int panels_perp,
                                                   int order, int n_omega) {
  if (vmax <= 0.0 || panels_par < 1 || panels_perp < 1 || order < 1 || n_omega < 1)
    throw std::invalid_argument("VelocityQuadrature: invalid rule parameters");
  VelocityQuadrature q;
  q.kind_ = Kind::Cylindrical;
  q.vmax_ = vmax;
  const Rule1D par = composite_gauss(panels_par, order, -vmax, vmax);
  const Rule1D perp = composite_gauss(panels_perp, order, 0.0, vmax);
  const double dom = kTwoPi / n_omega;
  for (std::size_t a = 0; a < par.size(); ++a) {
    for (std::size_t b = 0; b < perp.size(); ++b) {
      const double rho = perp.x[b];
      const double wab = par.w[a] * perp.w[b] * rho;
      q.axial_.push_back({rho, 0.0, par.x[a], wab * kTwoPi});
      for (int m = 0; m < n_omega; ++m) {
        const double om = (m + 0.5) * dom;
        q.nodes_.push_back({rho * std::cos(om), rho * std::sin(om), par.x[a], wab * dom});
      }
    }
  }
  return q;
}

VelocityQuadrature VelocityQuadrature::tensor(double vmax, int panels, int order) {
  if (vmax <= 0.0 || panels < 1 || order < 1)
    throw std::invalid_argument("VelocityQuadrature: invalid rule parameters");
  VelocityQuadrature q;
  q.kind_ = Kind::Tensor;
  q.vmax_ = vmax;
  const Rule1D ax = composite_gauss(panels, order, -vmax, vmax);
  for (std::size_t a = 0; a < ax.size(); ++a)
    for (std::size_t b = 0; b < ax.size(); ++b)
      for (std::size_t c = 0; c < ax.size(); ++c)
        q.nodes_.push_back({ax.x[a], ax.x[b], ax.x[c], ax.w[a] * ax.w[b] * ax.w[c]});
  q.axial_ = q.nodes_;
  return q;
}

double envelope_tail(double c_mu, double gamma, double vmax) {
  // Substitute s = vmax / t on (0, 1] to map the half-line to a finite interval.
  const Rule1D t = composite_gauss(8, 8, 0.0, 1.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double s = vmax / t.x[k];
    const double e = std::sqrt(1.0 + s * s);
    acc += t.w[k] * 4.0 * kPi * s * s / (1.0 + std::pow(e, gamma)) * vmax / (t.x[k] * t.x[k]);
  }
  return c_mu * acc;
}

}  // namespace torvm
