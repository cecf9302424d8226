#include "torvm/output.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace torvm {

namespace {

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  return f;
}

// Round-trip precision for CSV values.
std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void put_u64(std::ofstream& f, std::uint64_t x) { f.write(reinterpret_cast<const char*>(&x), sizeof x); }

std::uint64_t get_u64(std::ifstream& f) {
  std::uint64_t x = 0;
  f.read(reinterpret_cast<char*>(&x), sizeof x);
  if (!f) throw std::runtime_error("operator dump: truncated file");
  return x;
}

void put_doubles(std::ofstream& f, const double* p, std::size_t n) {
  f.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace

Json to_json(const HypothesisReport& h) {
  Json j = Json::object();
  for (const auto& c : h.checks) j[c.name] = {{"holds", c.holds}, {"margin", c.margin}, {"detail", c.detail}};
  return j;
}

Json to_json(const WitnessDecomposition& w) {
  return {{"value", w.value}, {"one", w.one}, {"I", w.I},         {"II", w.II},
          {"III", w.III},     {"schur", w.schur}, {"sum", w.sum()}};
}

Json to_json(const StabilityReport& rep) {
  Json sf = {{"c0", rep.small_field.c0},
             {"sup_aphi", rep.small_field.sup_aphi},
             {"sup_moment", rep.small_field.sup_moment},
             {"value", rep.small_field.value},
             {"satisfied", rep.small_field.satisfied}};
  return {{"verdict", verdict_name(rep.verdict)},
          {"kappa", rep.kappa},
          {"tol_eig", rep.tol_eig},
          {"margin", rep.margin},
          {"witness", to_json(rep.witness)},
          {"hypotheses", to_json(rep.hypotheses)},
          {"small_field", sf},
          {"asymmetry_L", rep.asym_L},
          {"b_max", rep.b_norm},
          {"backend", rep.backend},
          {"minimizer", vec_json(rep.minimizer)}};
}

Json to_json(const ScanResult& scan) {
  Json rows = Json::array();
  for (const auto& r : scan.rows) {
    Json row = {{"K", r.K}, {"ok", r.ok}};
    if (r.ok) {
      row["witness_form"] = r.witness_form;
      row["kappa"] = r.kappa;
      row["sup_aphi"] = r.sup_aphi;
      row["verdict"] = verdict_name(r.verdict);
      row["witness"] = to_json(r.witness);
    } else {
      row["error"] = r.error;
    }
    rows.push_back(row);
  }
  Json j = {{"K0", scan.K0 ? Json(*scan.K0) : Json(nullptr)},
            {"sup_aphi_max", scan.sup_aphi_max},
            {"I_exponent", scan.I_exponent},
            {"II_ratio_max", scan.II_ratio_max},
            {"witness_decreases", scan.witness_decreases},
            {"rows", rows}};
  return j;
}

Json to_json(const GrowingMode& m) {
  Json scan = Json::array();
  for (const auto& r : m.scan)
    scan.push_back({{"lambda", r.lambda},
                    {"count", r.count},
                    {"fallback", r.fallback},
                    {"ev_n", r.ev_n},
                    {"ev_min", r.ev_min},
                    {"u_max", r.u_max}});
  Json j = {{"found", m.found},
            {"accepted", m.accepted},
            {"message", m.message},
            {"n", m.n},
            {"lambda0", m.lambda0},
            {"bracket", {m.lambda_lo, m.lambda_hi}},
            {"counts", {m.count_lo, m.count_hi}},
            {"refinement_steps", m.bisection_steps},
            {"scan", scan}};
  if (!m.found) return j;
  j["residuals"] = {{"null_vector", m.null_residual},
                    {"maxwell_charge", m.maxwell_charge},
                    {"maxwell_toroidal", m.maxwell_toroidal},
                    {"maxwell_poloidal", m.maxwell_poloidal},
                    {"vlasov", m.vlasov},
                    {"vlasov_max", m.vlasov_max},
                    {"specular", m.specular_max},
                    {"divergence", m.divergence_max}};
  j["energy"] = {{"value", m.energy}, {"scale", m.energy_scale}};
  j["norms"] = {{"k_max", m.k.size() ? m.k.cwiseAbs().maxCoeff() : 0.0},
                {"h_tilde", m.h_tilde.norm()},
                {"phi_max", m.phi.size() ? m.phi.cwiseAbs().maxCoeff() : 0.0}};
  j["h_tilde"] = vec_json(m.h_tilde);
  Json samples = Json::array();
  for (const auto& s : m.samples)
    samples.push_back({s.z.sign, s.z.r, s.z.th, s.z.vr, s.z.vth, s.z.vphi, s.f});
  j["distribution_samples"] = {{"columns", {"sign", "r", "theta", "v_r", "v_theta", "v_phi", "f"}},
                               {"rows", samples}};
  return j;
}

Json equilibrium_summary(const Equilibrium& eq) {
  return {{"iterations", eq.iterations},
          {"residual_phi", eq.residual_phi},
          {"residual_aphi", eq.residual_aphi},
          {"fit_error", eq.fit_error},
          {"sup_phi", eq.sup_phi()},
          {"sup_aphi", eq.sup_aphi()},
          {"homogeneous", eq.homogeneous()},
          {"step_norms", eq.history.step_norms},
          {"contraction", eq.history.contraction}};
}

void write_json(const std::string& path, const Json& body, const std::string& config_hash) {
  Json j = {{"config_hash", config_hash}};
  for (const auto& [k, v] : body.items())
    if (k != "config_hash") j[k] = v;
  auto f = open_out(path);
  f << j.dump(2) << '\n';
}

void write_equilibrium_csv(const std::string& path, const Equilibrium& eq, const std::string& config_hash) {
  const CrossSectionGrid& g = eq.grid();
  const NodalFields nf = reconstruct_fields(g, eq.phi(), eq.aphi());
  auto f = open_out(path);
  f << "# config_hash=" << config_hash << '\n';
  f << "r,theta,phi,A_phi,E_r,E_theta,B_r,B_theta\n";
  for (int k = 0; k < g.size(); ++k)
    f << num(g.node_r(k)) << ',' << num(g.node_theta(k)) << ',' << num(eq.phi()[k]) << ',' << num(eq.aphi()[k])
      << ',' << num(nf.E_r[k]) << ',' << num(nf.E_th[k]) << ',' << num(nf.B_r[k]) << ',' << num(nf.B_th[k])
      << '\n';
}

void write_scan_csv(const std::string& path, const ScanResult& scan, const std::string& config_hash) {
  auto f = open_out(path);
  f << "# config_hash=" << config_hash << '\n';
  f << "K,ok,witness_form,kappa,sup_aphi,one,I,II,III,schur,verdict\n";
  for (const auto& r : scan.rows) {
    f << num(r.K) << ',' << (r.ok ? 1 : 0);
    if (r.ok)
      f << ',' << num(r.witness_form) << ',' << num(r.kappa) << ',' << num(r.sup_aphi) << ',' << num(r.witness.one)
        << ',' << num(r.witness.I) << ',' << num(r.witness.II) << ',' << num(r.witness.III) << ','
        << num(r.witness.schur) << ',' << verdict_name(r.verdict);
    else
      f << ",,,,,,,,,error";
    f << '\n';
  }
}

void write_mode_fields_csv(const std::string& path, const Equilibrium& eq, const GrowingMode& m,
                           const std::string& config_hash) {
  const CrossSectionGrid& g = eq.grid();
  auto f = open_out(path);
  f << "# config_hash=" << config_hash << '\n';
  f << "r,theta,phi,A_phi,A_r,A_theta,E_r,E_theta,E_phi,B_r,B_theta,B_phi\n";
  if (!m.found) return;
  for (int k = 0; k < g.size(); ++k)
    f << num(g.node_r(k)) << ',' << num(g.node_theta(k)) << ',' << num(m.phi[k]) << ',' << num(m.k[k]) << ','
      << num(m.A_r[k]) << ',' << num(m.A_th[k]) << ',' << num(m.E_r[k]) << ',' << num(m.E_th[k]) << ','
      << num(m.E_phi[k]) << ',' << num(m.B_r[k]) << ',' << num(m.B_th[k]) << ',' << num(m.B_phi[k]) << '\n';
}

void write_operator_dump(const std::string& bin_path, const std::string& json_path, const OperatorSet& ops,
                         const std::string& config_hash) {
  std::vector<std::pair<std::string, const Mat*>> mats{{"A1", &ops.A1}, {"A2", &ops.A2}, {"B", &ops.B},
                                                       {"Bstar", &ops.Bstar}, {"L", &ops.L}};
  if (ops.has_vector) {
    mats.push_back({"S", &ops.S});
    mats.push_back({"T1", &ops.T1});
    mats.push_back({"T2", &ops.T2});
    mats.push_back({"U", &ops.U});
    mats.push_back({"V", &ops.V});
  }
  auto f = open_out(bin_path, std::ios::out | std::ios::binary);
  f.write("TVMOPS01", 8);
  put_u64(f, mats.size());
  put_u64(f, static_cast<std::uint64_t>(ops.w.size()));
  put_doubles(f, ops.w.data(), static_cast<std::size_t>(ops.w.size()));
  Json shapes = Json::array();
  for (const auto& [name, m] : mats) {
    put_u64(f, name.size());
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(f, static_cast<std::uint64_t>(m->rows()));
    put_u64(f, static_cast<std::uint64_t>(m->cols()));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = *m;
    put_doubles(f, rm.data(), static_cast<std::size_t>(rm.size()));
    shapes.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  }
  if (!f) throw std::runtime_error("cannot write '" + bin_path + "'");
  Json meta = {{"format", "TVMOPS01 little-endian, row-major doubles"},
               {"lambda", ops.lambda},
               {"backend", backend_name(ops.backend)},
               {"metric_size", ops.w.size()},
               {"matrices", shapes},
               {"diagnostics",
                {{"asym_A1", ops.asym_A1},
                 {"asym_A2", ops.asym_A2},
                 {"asym_L", ops.asym_L},
                 {"asym_S", ops.asym_S},
                 {"bstar_residual", ops.bstar_residual},
                 {"velocity_identity", ops.velocity_identity},
                 {"a1_max_eigenvalue", ops.a1_max_eigenvalue},
                 {"degenerate", ops.degenerate},
                 {"capped", ops.capped},
                 {"unconverged", ops.unconverged}}}};
  write_json(json_path, meta, config_hash);
}

const Mat& OperatorDump::get(const std::string& name) const {
  for (const auto& [n, m] : matrices)
    if (n == name) return m;
  throw std::out_of_range("operator dump: no matrix named " + name);
}

OperatorDump read_operator_dump(const std::string& bin_path) {
  std::ifstream f(bin_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read '" + bin_path + "'");
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != "TVMOPS01") throw std::runtime_error("operator dump: bad magic");
  OperatorDump d;
  const std::uint64_t count = get_u64(f);
  const std::uint64_t N = get_u64(f);
  d.w.resize(static_cast<Eigen::Index>(N));
  f.read(reinterpret_cast<char*>(d.w.data()), static_cast<std::streamsize>(N * sizeof(double)));
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(get_u64(f), '\0');
    f.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto rows = static_cast<Eigen::Index>(get_u64(f));
    const auto cols = static_cast<Eigen::Index>(get_u64(f));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    f.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (!f) throw std::runtime_error("operator dump: truncated file");
    d.matrices.emplace_back(name, Mat(rm));
  }
  return d;
}

}  // namespace torvm
