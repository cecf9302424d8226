#include "torvm/kinetic.hpp"

#include "torvm/quadrature.hpp"

#include <thread>

namespace torvm {

namespace {

struct PointEval {
  Stencil st;
  double uphi = 0.0;
  Vec vk;  // v_hat . psi_k at the point
};

void evaluate_point(const CrossSectionGrid& g, const PhaseState& s, const Mat* psiT_r,
                    const Mat* psiT_th, PointEval& out) {
  out.st = g.stencil(s.r, s.th);
  const double ev = lorentz(s.vr, s.vth, s.vphi);
  out.uphi = s.vphi / ev;
  if (psiT_r) {
    const double ur = s.vr / ev, uth = s.vth / ev;
    out.vk.setZero(psiT_r->rows());
    for (int q = 0; q < out.st.n; ++q) {
      const int j = out.st.idx[q];
      out.vk.noalias() += out.st.w[q] * (ur * psiT_r->col(j) + uth * psiT_th->col(j));
    }
  }
}

struct Accumulator {
  Mat K11, K1p, Kpp, K1v, Kpv, Kvv, M11, Mp1;
  int degenerate = 0, capped = 0, unconverged = 0;
  Accumulator(int N, int n) {
    K11 = Mat::Zero(N, N);
    K1p = Mat::Zero(N, N);
    Kpp = Mat::Zero(N, N);
    K1v = Mat::Zero(n, N);
    Kpv = Mat::Zero(n, N);
    Kvv = Mat::Zero(n, n);
    M11 = Mat::Zero(N, N);
    Mp1 = Mat::Zero(N, N);
  }
  void add_mass(const Stencil& st, double uphi, double ce, double co) {
    for (int a = 0; a < st.n; ++a)
      for (int b = 0; b < st.n; ++b) {
        const double v = st.w[a] * st.w[b];
        M11(st.idx[a], st.idx[b]) += ce * v;
        Mp1(st.idx[a], st.idx[b]) += co * v * uphi;
      }
  }
  void add(const Accumulator& o) {
    K11 += o.K11;
    K1p += o.K1p;
    Kpp += o.Kpp;
    K1v += o.K1v;
    Kpv += o.Kpv;
    Kvv += o.Kvv;
    M11 += o.M11;
    Mp1 += o.Mp1;
    degenerate += o.degenerate;
    capped += o.capped;
    unconverged += o.unconverged;
  }
};

template <class Work>
void run_partitioned(int count, int threads, std::vector<Accumulator>& acc, Work&& work) {
  const int T = std::max(1, std::min(threads, count));
  if (T == 1) {
    work(0, count, acc[0]);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < T; ++t) {
    const int lo = static_cast<int>(static_cast<long long>(count) * t / T);
    const int hi = static_cast<int>(static_cast<long long>(count) * (t + 1) / T);
    pool.emplace_back([&, lo, hi, t] { work(lo, hi, acc[t]); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

KineticMatrices assemble_kinetic(const Equilibrium& eq, const PhaseSample& sample, double lambda,
                                 const VectorBasisNodal* basis, const KineticOptions& opt) {
  if (!(lambda > 0.0)) throw std::invalid_argument("assemble_kinetic: lambda must be positive");
  const CrossSectionGrid& g = eq.grid();
  const int N = g.size();
  const int n = basis ? basis->n() : 0;
  Mat psiT_r, psiT_th;
  if (basis) {
    psiT_r = basis->psi_r.transpose();
    psiT_th = basis->psi_th.transpose();
  }
  const int M = opt.time_nodes;
  std::vector<double> times(M);
  for (int m = 0; m < M; ++m) times[m] = -std::log1p(-(m + 0.5) / M) / (2.0 * lambda);

  const Tracer tracer(eq, opt.tracer);
  const int T = std::max(1, opt.threads);
  std::vector<Accumulator> acc;
  for (int t = 0; t < T; ++t) acc.emplace_back(N, n);

  run_partitioned(static_cast<int>(sample.nodes.size()), T, acc, [&](int lo, int hi, Accumulator& A) {
    std::vector<PhaseState> X, Y;
    PointEval px, py;
    for (int idx = lo; idx < hi; ++idx) {
      const PhaseNode& node = sample.nodes[idx];
      if (node.weight == 0.0 && node.mirror_weight == 0.0) continue;
      const TraceStats sx = tracer.forward(node.z, times, X);
      const TraceStats sy = tracer.forward(time_reversed(node.z), times, Y);
      A.degenerate += sx.degenerate + sy.degenerate;
      A.capped += sx.capped + sy.capped;
      // Each node stands for itself and its time reversal; a mirrored node
      // also for its v_phi image, which flips the sign of vphi_hat only.
      const double c_self = node.weight / (2.0 * M);
      const double c_mirror = node.mirror_weight / (2.0 * M);
      const double ce = c_self + c_mirror;  // parts even in v_phi
      const double co = c_self - c_mirror;  // parts odd in v_phi
      for (int m = 0; m < M; ++m) {
        evaluate_point(g, X[m], basis ? &psiT_r : nullptr, basis ? &psiT_th : nullptr, px);
        evaluate_point(g, Y[m], basis ? &psiT_r : nullptr, basis ? &psiT_th : nullptr, py);
        A.add_mass(px.st, px.uphi, ce, co);
        A.add_mass(py.st, py.uphi, ce, co);
        for (int a = 0; a < px.st.n; ++a) {
          const int i = px.st.idx[a];
          const double wx = px.st.w[a];
          for (int b = 0; b < py.st.n; ++b) {
            const int j = py.st.idx[b];
            const double s = wx * py.st.w[b];
            // Entries (i, j) from phi_i(X) phi_j(Y) and (j, i) from phi_j(Y) phi_i(X).
            A.K11(i, j) += ce * s;
            A.K11(j, i) += ce * s;
            A.K1p(i, j) += co * s * px.uphi;
            A.K1p(j, i) += co * s * py.uphi;
            A.Kpp(i, j) += ce * s * px.uphi * py.uphi;
            A.Kpp(j, i) += ce * s * px.uphi * py.uphi;
          }
        }
        if (basis) {
          for (int b = 0; b < py.st.n; ++b) {
            const int j = py.st.idx[b];
            A.K1v.col(j).noalias() += (ce * py.st.w[b]) * px.vk;
            A.Kpv.col(j).noalias() += (co * py.st.w[b] * py.uphi) * px.vk;
          }
          for (int a = 0; a < px.st.n; ++a) {
            const int j = px.st.idx[a];
            A.K1v.col(j).noalias() += (ce * px.st.w[a]) * py.vk;
            A.Kpv.col(j).noalias() += (co * px.st.w[a] * px.uphi) * py.vk;
          }
          // v_hat . psi is odd under time reversal.
          A.Kvv.noalias() -= ce * (px.vk * py.vk.transpose() + py.vk * px.vk.transpose());
        }
      }
    }
  });
  for (int t = 1; t < T; ++t) acc[0].add(acc[t]);
  KineticMatrices K;
  K.lambda = lambda;
  K.K11 = std::move(acc[0].K11);
  K.K1p = std::move(acc[0].K1p);
  K.Kpp = std::move(acc[0].Kpp);
  K.K1v = std::move(acc[0].K1v);
  K.Kpv = std::move(acc[0].Kpv);
  K.Kvv = std::move(acc[0].Kvv);
  K.M11 = std::move(acc[0].M11);
  K.Mp1 = std::move(acc[0].Mp1);
  K.has_vector = basis != nullptr;
  K.degenerate = acc[0].degenerate;
  K.capped = acc[0].capped;
  return K;
}

KineticMatrices assemble_time_average_gram(const Equilibrium& eq, const PhaseSample& sample,
                                           const KineticOptions& opt) {
  const CrossSectionGrid& g = eq.grid();
  const int N = g.size();
  const int steps = std::max(2, static_cast<int>(std::ceil(opt.ergodic_T / opt.ergodic_ds)));
  const double h = opt.ergodic_T / steps;
  std::vector<double> times(steps + 1);
  for (int k = 0; k <= steps; ++k) times[k] = k * h;
  const Tracer tracer(eq, opt.tracer);
  const int T = std::max(1, opt.threads);
  std::vector<Accumulator> acc;
  for (int t = 0; t < T; ++t) acc.emplace_back(N, 0);
  const int batch = 256;

  run_partitioned(static_cast<int>(sample.nodes.size()), T, acc, [&](int lo, int hi, Accumulator& A) {
    std::vector<PhaseState> X;
    Mat F1(batch, N), Fp(batch, N);
    Vec We(batch), Wo(batch);  // weights of the parts even and odd in v_phi
    int fill = 0;
    auto flush = [&] {
      if (fill == 0) return;
      const auto f1 = F1.topRows(fill);
      const auto fp = Fp.topRows(fill);
      const Mat wf1 = We.head(fill).asDiagonal() * f1;
      const Mat of1 = Wo.head(fill).asDiagonal() * f1;
      const Mat wfp = We.head(fill).asDiagonal() * fp;
      A.K11.noalias() += f1.transpose() * wf1;
      A.K1p.noalias() += fp.transpose() * of1;
      A.Kpp.noalias() += fp.transpose() * wfp;
      fill = 0;
    };
    Vec half1(N);
    for (int idx = lo; idx < hi; ++idx) {
      const PhaseNode& node = sample.nodes[idx];
      if (node.weight == 0.0 && node.mirror_weight == 0.0) continue;
      const TraceStats st = tracer.forward(node.z, times, X);
      A.degenerate += st.degenerate;
      A.capped += st.capped;
      F1.row(fill).setZero();
      Fp.row(fill).setZero();
      half1.setZero();
      for (int k = 0; k <= steps; ++k) {
        const double wt = (k == 0 || k == steps ? 0.5 : 1.0) / steps;
        const PhaseState& s = X[k];
        const Stencil sc = g.stencil(s.r, s.th);
        const double uphi = s.vphi / lorentz(s.vr, s.vth, s.vphi);
        for (int q = 0; q < sc.n; ++q) {
          F1(fill, sc.idx[q]) += wt * sc.w[q];
          Fp(fill, sc.idx[q]) += wt * uphi * sc.w[q];
          if (2 * k <= steps) half1[sc.idx[q]] += 2.0 * wt * sc.w[q];
        }
        A.add_mass(sc, uphi, wt * (node.weight + node.mirror_weight), wt * (node.weight - node.mirror_weight));
      }
      const double nrm = F1.row(fill).norm();
      if (nrm > 0.0 && (half1.transpose() - F1.row(fill)).norm() > 0.05 * nrm) ++A.unconverged;
      We[fill] = node.weight + node.mirror_weight;
      Wo[fill] = node.weight - node.mirror_weight;
      if (++fill == batch) flush();
    }
    flush();
  });
  for (int t = 1; t < T; ++t) acc[0].add(acc[t]);
  KineticMatrices K;
  K.lambda = 0.0;
  K.K11 = std::move(acc[0].K11);
  K.K1p = std::move(acc[0].K1p);
  K.Kpp = std::move(acc[0].Kpp);
  K.M11 = std::move(acc[0].M11);
  K.Mp1 = std::move(acc[0].Mp1);
  K.degenerate = acc[0].degenerate;
  K.capped = acc[0].capped;
  K.unconverged = acc[0].unconverged;
  return K;
}

LocalMoments local_moments(const Equilibrium& eq, const VelocityQuadrature& rule) {
  const CrossSectionGrid& g = eq.grid();
  const int N = g.size();
  LocalMoments L;
  for (int s = 0; s < 2; ++s) {
    L.m0_s[s] = Vec::Zero(N);
    L.mp_s[s] = Vec::Zero(N);
    L.mup_s[s] = Vec::Zero(N);
  }
  L.rmup = Vec::Zero(N);
  const MuProfile& prof = eq.profile();
  if (!prof.is_zero()) {
    const auto& nodes = rule.axial_nodes();
    for (int k = 0; k < N; ++k) {
      const double R = g.node_R(k), phi = eq.phi()[k], A = eq.aphi()[k];
      for (int s = 0; s < 2; ++s) {
        const int sg = s == 0 ? 1 : -1;
        double m0 = 0.0, mp = 0.0, mup = 0.0, rmup = 0.0;
        for (const auto& v : nodes) {
          const double ev = lorentz(v.vr, v.vth, v.vphi);
          const MuValue mu = prof.eval_unchecked(sg, ev + sg * phi, R * (v.vphi + sg * A));
          const double uphi = v.vphi / ev;
          m0 += v.w * std::abs(mu.mu_e);
          mp += v.w * std::abs(mu.mu_e) * uphi;
          mup += v.w * R * uphi * mu.mu_p;
          rmup += v.w * R * mu.mu_p;
        }
        L.m0_s[s][k] = m0;
        L.mp_s[s][k] = mp;
        L.mup_s[s][k] = mup;
        L.rmup[k] += rmup;
      }
    }
  }
  L.m0 = L.m0_s[0] + L.m0_s[1];
  L.mp = L.mp_s[0] + L.mp_s[1];
  L.mup = L.mup_s[0] + L.mup_s[1];
  return L;
}

LocalMasses local_mass_matrices(const Equilibrium& eq, const VelocityQuadrature& rule, int order) {
  const CrossSectionGrid& g = eq.grid();
  const int N = g.size();
  LocalMasses L{Mat::Zero(N, N), Mat::Zero(N, N), Mat::Zero(N, N), Mat::Zero(N, N)};
  const MuProfile& prof = eq.profile();
  if (prof.is_zero()) return L;
  std::vector<double> rb{0.0};
  for (int i = 0; i < g.nr(); ++i) rb.push_back(g.r(i));
  rb.push_back(1.0);
  std::vector<double> tb;
  for (int j = 0; j <= g.nth(); ++j) tb.push_back(j * g.dth());
  const Rule1D rr = piecewise_gauss(rb, order);
  const Rule1D tr = piecewise_gauss(tb, order);
  const auto& nodes = rule.axial_nodes();
  for (std::size_t a = 0; a < rr.size(); ++a) {
    const double r = rr.x[a];
    for (std::size_t b = 0; b < tr.size(); ++b) {
      const double th = tr.x[b];
      const double R = g.frame().weight(r, th);
      const double dx = kTwoPi * r * R * rr.w[a] * tr.w[b];
      double phi = 0.0, A = 0.0;
      if (!eq.homogeneous()) {
        const FieldSample f = eq.fields(r, th);
        phi = f.phi;
        A = f.aphi;
      }
      double m0 = 0.0, mp = 0.0, mup = 0.0, mr = 0.0;
      for (const auto& v : nodes) {
        const double ev = lorentz(v.vr, v.vth, v.vphi);
        const double uphi = v.vphi / ev;
        for (int sg : {1, -1}) {
          const MuValue mu = prof.eval_unchecked(sg, ev + sg * phi, R * (v.vphi + sg * A));
          m0 += v.w * std::abs(mu.mu_e);
          mp += v.w * std::abs(mu.mu_e) * uphi;
          mup += v.w * R * uphi * mu.mu_p;
          mr += v.w * R * mu.mu_p;
        }
      }
      const Stencil st = g.stencil(r, th);
      for (int p = 0; p < st.n; ++p)
        for (int q = 0; q < st.n; ++q) {
          const double c = dx * st.w[p] * st.w[q];
          L.M0(st.idx[p], st.idx[q]) += c * m0;
          L.Mp(st.idx[p], st.idx[q]) += c * mp;
          L.Mup(st.idx[p], st.idx[q]) += c * mup;
          L.Mr(st.idx[p], st.idx[q]) += c * mr;
        }
    }
  }
  return L;
}

Mat weighted_mass_matrix(const CrossSectionGrid& g, const std::function<double(double, double)>& m,
                         int order) {
  const int N = g.size();
  Mat M = Mat::Zero(N, N);
  std::vector<double> rb{0.0};
  for (int i = 0; i < g.nr(); ++i) rb.push_back(g.r(i));
  rb.push_back(1.0);
  std::vector<double> tb;
  for (int j = 0; j <= g.nth(); ++j) tb.push_back(j * g.dth());
  const Rule1D rr = piecewise_gauss(rb, order);
  const Rule1D tr = piecewise_gauss(tb, order);
  for (std::size_t a = 0; a < rr.size(); ++a)
    for (std::size_t b = 0; b < tr.size(); ++b) {
      const double r = rr.x[a], th = tr.x[b];
      const double c = kTwoPi * r * g.frame().weight(r, th) * rr.w[a] * tr.w[b] * m(r, th);
      if (c == 0.0) continue;
      const Stencil st = g.stencil(r, th);
      for (int p = 0; p < st.n; ++p)
        for (int q = 0; q < st.n; ++q) M(st.idx[p], st.idx[q]) += c * st.w[p] * st.w[q];
    }
  return M;
}

}  // namespace torvm
