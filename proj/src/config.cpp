#include "torvm/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace torvm {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("config: " + key + ": not a number: '" + item + "'");
    }
  }
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

// Reads typed values and remembers which keys were consumed.
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <class T>
  void get(const std::string& key, T& dst) {
    used_.insert(key);
    const auto node = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!node) return;
    try {
      dst = tree_.get<T>(pt::ptree::path_type(key, '.'));
    } catch (const pt::ptree_error&) {
      throw ConfigError("config: " + key + ": cannot parse '" + *node + "'");
    }
  }

  void get_bool(const std::string& key, bool& dst) {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    std::transform(s.begin(), s.end(), s.begin(), ::tolower);
    if (s == "true" || s == "1" || s == "yes" || s == "on")
      dst = true;
    else if (s == "false" || s == "0" || s == "no" || s == "off")
      dst = false;
    else
      throw ConfigError("config: " + key + ": expected a boolean, got '" + s + "'");
  }

  void get_list(const std::string& key, std::vector<double>& dst) {
    std::string s;
    get(key, s);
    if (!trim(s).empty()) dst = parse_list(key, s);
  }

  void reject_unknown() const {
    for (const auto& sec : tree_) {
      if (sec.second.empty() && !sec.second.data().empty())
        throw ConfigError("config: key '" + sec.first + "' outside any section");
      for (const auto& kv : sec.second) {
        const std::string key = sec.first + "." + kv.first;
        if (!used_.count(key)) throw ConfigError("config: unknown key '" + key + "'");
      }
    }
  }

 private:
  const pt::ptree& tree_;
  std::set<std::string> used_;
};

RunConfig from_tree(const pt::ptree& tree) {
  RunConfig c;
  Reader rd(tree);
  rd.get("frame.a", c.a);
  rd.get("grid.nr", c.nr);
  rd.get("grid.nth", c.nth);

  std::string rule = c.velocity.tensor ? "tensor" : "cylindrical";
  rd.get("velocity.rule", rule);
  if (rule != "tensor" && rule != "cylindrical")
    throw ConfigError("config: velocity.rule must be 'cylindrical' or 'tensor'");
  c.velocity.tensor = rule == "tensor";
  rd.get("velocity.vmax", c.velocity.vmax);
  rd.get("velocity.panels_par", c.velocity.panels_par);
  rd.get("velocity.panels_perp", c.velocity.panels_perp);
  rd.get("velocity.order", c.velocity.order);
  rd.get("velocity.n_omega", c.velocity.n_omega);

  std::string family = family_name(c.profile.family);
  std::string mode = species_mode_name(c.profile.mode);
  rd.get("profile.family", family);
  rd.get("profile.mode", mode);
  try {
    c.profile.family = parse_family(family);
    c.profile.mode = parse_species_mode(mode);
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  rd.get("profile.c_plus", c.profile.c_plus);
  rd.get("profile.c_minus", c.profile.c_minus);
  rd.get("profile.beta", c.profile.beta);
  rd.get("profile.eps", c.profile.eps);
  rd.get("profile.K", c.profile.K);
  rd.get("profile.gamma", c.profile.gamma);
  rd.get("profile.c_mu", c.profile.c_mu);

  rd.get("trajectory.dt", c.dt);
  rd.get("trajectory.ergodic_T", c.ergodic_T);
  rd.get("trajectory.ergodic_ds", c.ergodic_ds);
  rd.get("trajectory.time_nodes", c.time_nodes);
  rd.get("trajectory.horizon", c.horizon);
  rd.get("trajectory.bounce_cap", c.bounce_cap);

  rd.get("sampler.points", c.sampler_points);
  rd.get("sampler.vmax", c.sampler_vmax);

  rd.get("solver.tol_picard", c.tol_picard);
  rd.get("solver.max_iter", c.max_iter);
  rd.get("solver.damping", c.damping);
  rd.get_bool("solver.purely_magnetic", c.purely_magnetic);
  rd.get("solver.fit_degree", c.fit_degree);
  rd.get("solver.tol_eig", c.tol_eig);
  rd.get("solver.asym_factor", c.asym_factor);
  rd.get("solver.tol_null", c.tol_null);
  rd.get("solver.tol_residual", c.tol_residual);
  rd.get("solver.tol_vlasov", c.tol_vlasov);

  rd.get("lambda.min", c.lambda_min);
  rd.get("lambda.max", c.lambda_max);
  rd.get("lambda.points", c.lambda_points);
  rd.get_list("lambda.values", c.lambda_values);

  rd.get_list("scan.K", c.K_values);
  rd.get("mode.n", c.n);

  rd.get("run.seed", c.seed);
  rd.get("run.threads", c.threads);
  rd.get("run.out", c.out);
  rd.reject_unknown();
  c.validate();
  return c;
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

void RunConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  need(a > 1.0, "frame.a must exceed 1");
  need(nr >= 2 && nth >= 4, "grid needs nr >= 2 and nth >= 4");
  need(velocity.vmax > 0.0 && velocity.panels_par > 0 && velocity.order > 0, "invalid velocity rule");
  need(velocity.tensor || (velocity.panels_perp > 0 && velocity.n_omega > 0), "invalid velocity rule");
  need(profile.gamma > 3.0, "profile.gamma must exceed 3");
  need(profile.K >= 0.0, "profile.K must be nonnegative");
  need(dt > 0.0 && ergodic_T > 0.0 && ergodic_ds > 0.0 && horizon > 0.0, "trajectory settings must be positive");
  need(time_nodes > 0 && bounce_cap > 0, "trajectory counts must be positive");
  need(sampler_points > 0 && sampler_vmax > 0.0, "sampler settings must be positive");
  need(tol_picard > 0.0 && tol_eig > 0.0 && tol_null > 0.0 && tol_residual > 0.0 && tol_vlasov > 0.0,
       "all tolerances must be positive");
  need(asym_factor >= 0.0, "solver.asym_factor must be nonnegative");
  need(max_iter > 0 && damping > 0.0 && damping <= 1.0, "picard settings out of range");
  need(fit_degree >= 0, "solver.fit_degree must be nonnegative");
  need(lambda_min > 0.0 && lambda_max > lambda_min && lambda_points >= 2, "invalid lambda range");
  for (double l : lambda_values) need(l > 0.0, "lambda.values must be positive");
  for (double k : K_values) need(k >= 0.0, "scan.K values must be nonnegative");
  need(n >= 1, "mode.n must be positive");
  need(threads >= 1, "run.threads must be positive");
}

std::string RunConfig::canonical() const {
  // Output location and thread count do not affect results and are excluded.
  std::map<std::string, std::string> kv{
      {"frame.a", fmt(a)},
      {"grid.nr", std::to_string(nr)},
      {"grid.nth", std::to_string(nth)},
      {"velocity.rule", velocity.tensor ? "tensor" : "cylindrical"},
      {"velocity.vmax", fmt(velocity.vmax)},
      {"velocity.panels_par", std::to_string(velocity.panels_par)},
      {"velocity.panels_perp", std::to_string(velocity.panels_perp)},
      {"velocity.order", std::to_string(velocity.order)},
      {"velocity.n_omega", std::to_string(velocity.n_omega)},
      {"profile.family", family_name(profile.family)},
      {"profile.mode", species_mode_name(profile.mode)},
      {"profile.c_plus", fmt(profile.c_plus)},
      {"profile.c_minus", fmt(profile.c_minus)},
      {"profile.beta", fmt(profile.beta)},
      {"profile.eps", fmt(profile.eps)},
      {"profile.K", fmt(profile.K)},
      {"profile.gamma", fmt(profile.gamma)},
      {"profile.c_mu", fmt(profile.c_mu)},
      {"trajectory.dt", fmt(dt)},
      {"trajectory.ergodic_T", fmt(ergodic_T)},
      {"trajectory.ergodic_ds", fmt(ergodic_ds)},
      {"trajectory.time_nodes", std::to_string(time_nodes)},
      {"trajectory.horizon", fmt(horizon)},
      {"trajectory.bounce_cap", std::to_string(bounce_cap)},
      {"sampler.points", std::to_string(sampler_points)},
      {"sampler.vmax", fmt(sampler_vmax)},
      {"solver.tol_picard", fmt(tol_picard)},
      {"solver.max_iter", std::to_string(max_iter)},
      {"solver.damping", fmt(damping)},
      {"solver.purely_magnetic", purely_magnetic ? "true" : "false"},
      {"solver.fit_degree", std::to_string(fit_degree)},
      {"solver.tol_eig", fmt(tol_eig)},
      {"solver.asym_factor", fmt(asym_factor)},
      {"solver.tol_null", fmt(tol_null)},
      {"solver.tol_residual", fmt(tol_residual)},
      {"solver.tol_vlasov", fmt(tol_vlasov)},
      {"lambda.min", fmt(lambda_min)},
      {"lambda.max", fmt(lambda_max)},
      {"lambda.points", std::to_string(lambda_points)},
      {"lambda.values", fmt_list(lambda_values)},
      {"scan.K", fmt_list(K_values)},
      {"mode.n", std::to_string(n)},
      {"run.seed", std::to_string(seed)},
  };
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical())));
  return buf;
}

CrossSectionGrid RunConfig::grid() const { return CrossSectionGrid(ToroidalFrame(a), nr, nth); }

PicardOptions RunConfig::picard() const {
  PicardOptions p;
  p.tol = tol_picard;
  p.max_iter = max_iter;
  p.damping = damping;
  p.purely_magnetic = purely_magnetic;
  p.fit_degree = fit_degree;
  return p;
}

OperatorOptions RunConfig::operators(double lambda) const {
  OperatorOptions o;
  o.lambda = lambda;
  o.velocity = velocity;
  o.sampler.n_points = sampler_points;
  o.sampler.vmax = sampler_vmax;
  o.sampler.seed = seed;
  o.kinetic.time_nodes = time_nodes;
  o.kinetic.tracer.dt = dt;
  o.kinetic.tracer.bounce_cap = bounce_cap;
  o.kinetic.threads = threads;
  o.kinetic.ergodic_T = ergodic_T;
  o.kinetic.ergodic_ds = ergodic_ds;
  return o;
}

StabilityOptions RunConfig::stability() const {
  StabilityOptions s;
  s.operators = operators(0.0);
  s.tol_eig = tol_eig;
  s.asym_factor = asym_factor;
  return s;
}

ScanOptions RunConfig::scan() const {
  ScanOptions s;
  s.stability = stability();
  // Rows run concurrently; keep each row's kinetic assembly sequential.
  s.stability.operators.kinetic.threads = 1;
  s.picard = picard();
  s.equilibrium_velocity = velocity;
  s.threads = threads;
  return s;
}

ModeOptions RunConfig::mode() const {
  ModeOptions m;
  m.operators = operators(0.0);
  m.n = n;
  m.lambda_grid = lambda_values;
  m.lambda_min = lambda_min;
  m.lambda_max = lambda_max;
  m.grid_points = lambda_points;
  m.tol_null = tol_null;
  m.tol_maxwell = tol_residual;
  m.tol_vlasov = tol_vlasov;
  m.vlasov_horizon = horizon;
  m.seed = seed;
  return m;
}

RunConfig parse_config_string(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& ex) {
    throw ConfigError(std::string("config: ") + ex.message() + " (line " + std::to_string(ex.line()) + ")");
  }
  return from_tree(tree);
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_string(ss.str());
}

}  // namespace torvm
