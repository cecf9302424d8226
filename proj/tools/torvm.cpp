#include "torvm/config.hpp"
#include "torvm/log.hpp"
#include "torvm/output.hpp"
#include "torvm/selftest.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace torvm;

namespace {

enum ExitCode { kSuccess = 0, kError = 1, kUnstable = 2, kMarginal = 3 };

int verdict_code(Verdict v) {
  switch (v) {
    case Verdict::Stable: return kSuccess;
    case Verdict::Unstable: return kUnstable;
    case Verdict::Marginal: return kMarginal;
  }
  return kError;
}

struct Context {
  RunConfig cfg;
  std::string hash;
  fs::path out;
  std::string path(const std::string& name) const { return (out / name).string(); }
};

Equilibrium solve_equilibrium(const RunConfig& cfg) {
  const MuProfile prof(cfg.profile);
  return solve_picard(prof, cfg.grid(), cfg.velocity.build(), cfg.picard());
}

int cmd_solve(const Context& ctx, int trajectories) {
  const Equilibrium eq = solve_equilibrium(ctx.cfg);
  write_equilibrium_csv(ctx.path("equilibrium.csv"), eq, ctx.hash);
  write_json(ctx.path("equilibrium.json"), equilibrium_summary(eq), ctx.hash);
  if (trajectories > 0) {
    TracerOptions to;
    to.dt = ctx.cfg.dt;
    to.bounce_cap = ctx.cfg.bounce_cap;
    const Tracer tr(eq, to);
    const auto pts = shifted_sobol(trajectories, 5, ctx.cfg.seed);
    for (int i = 0; i < trajectories; ++i) {
      const auto& u = pts[i];
      // Uniform in the disk, velocity components in [-2, 2].
      const PhaseState z{std::sqrt(u[0]), kTwoPi * u[1], 4.0 * u[2] - 2.0, 4.0 * u[3] - 2.0, 4.0 * u[4] - 2.0,
                         i % 2 ? -1 : 1};
      const auto samples = tr.sample(z, ctx.cfg.ergodic_T, ctx.cfg.ergodic_ds);
      write_trajectory_csv(ctx.path("trajectory_" + std::to_string(i) + ".csv"), samples, ctx.hash);
    }
  }
  std::cout << "equilibrium: " << eq.iterations << " iterations, sup|phi| = " << eq.sup_phi()
            << ", sup|A_phi| = " << eq.sup_aphi() << '\n';
  return kSuccess;
}

int cmd_assess(const Context& ctx, bool dump_operators) {
  const Equilibrium eq = solve_equilibrium(ctx.cfg);
  const StabilityOptions so = ctx.cfg.stability();
  OperatorOptions oo = so.operators;
  oo.lambda = 0.0;
  const OperatorSet ops0 = assemble_operators(eq, oo);
  StabilityReport rep = assess(eq, ops0, so);
  rep.config_hash = ctx.hash;
  Json body = to_json(rep);
  body["equilibrium"] = equilibrium_summary(eq);
  write_json(ctx.path("report.json"), body, ctx.hash);
  if (dump_operators) write_operator_dump(ctx.path("operators.bin"), ctx.path("operators.json"), ops0, ctx.hash);
  std::cout << "verdict: " << verdict_name(rep.verdict) << ", kappa = " << rep.kappa
            << ", witness form = " << rep.witness.value << '\n';
  return verdict_code(rep.verdict);
}

int cmd_scan(const Context& ctx) {
  if (ctx.cfg.K_values.empty()) throw ConfigError("scan-k needs a K list in [scan]");
  const ScanResult res = scan_K(ctx.cfg.profile, ctx.cfg.K_values, ctx.cfg.grid(), ctx.cfg.scan());
  write_scan_csv(ctx.path("scan.csv"), res, ctx.hash);
  write_json(ctx.path("scan.json"), to_json(res), ctx.hash);
  std::cout << "scan: " << res.rows.size() << " rows, K0 estimate ";
  if (res.K0)
    std::cout << *res.K0;
  else
    std::cout << "none";
  std::cout << ", sup|A_phi| max " << res.sup_aphi_max << '\n';
  return kSuccess;
}

int cmd_mode(const Context& ctx) {
  const Equilibrium eq = solve_equilibrium(ctx.cfg);
  const StabilityOptions so = ctx.cfg.stability();
  OperatorOptions oo = so.operators;
  oo.lambda = 0.0;
  const OperatorSet ops0 = assemble_operators(eq, oo);
  const StabilityReport rep = assess(eq, ops0, so);
  if (rep.verdict != Verdict::Unstable) {
    GrowingMode none;
    none.message = "equilibrium is " + verdict_name(rep.verdict) + "; no growing mode is sought";
    Json body = to_json(none);
    body["stability"] = {{"verdict", verdict_name(rep.verdict)}, {"kappa", rep.kappa}};
    write_json(ctx.path("mode.json"), body, ctx.hash);
    std::cout << none.message << '\n';
    return verdict_code(rep.verdict);
  }
  const ModeOptions mo = ctx.cfg.mode();
  const DivFreeBasis basis = build_divfree_basis(eq.grid(), mo.n);
  CrossingResult cr = find_crossing(eq, basis, mo);
  if (cr.mode.found) reconstruct_and_verify(cr.mode, eq, cr.ops, basis, &ops0, mo);
  Json body = to_json(cr.mode);
  body["stability"] = {{"verdict", verdict_name(rep.verdict)}, {"kappa", rep.kappa}};
  write_json(ctx.path("mode.json"), body, ctx.hash);
  write_mode_fields_csv(ctx.path("mode_fields.csv"), eq, cr.mode, ctx.hash);
  if (!cr.mode.found || !cr.mode.accepted) {
    std::cerr << "error: " << cr.mode.message << '\n';
    return kError;
  }
  std::cout << "growing mode: lambda0 = " << cr.mode.lambda0 << ", null residual " << cr.mode.null_residual
            << ", vlasov " << cr.mode.vlasov_max << '\n';
  return kUnstable;
}

int cmd_selftest(const Context& ctx) {
  const auto cases = run_selftest(ctx.cfg.seed);
  Json arr = Json::array();
  int failed = 0;
  for (const auto& c : cases) {
    arr.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"value", c.value},
                   {"threshold", c.threshold},
                   {"detail", c.detail}});
    if (!c.passed) ++failed;
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.value << "  (" << c.detail << ")\n";
  }
  Json body = {{"passed", failed == 0}, {"failed", failed}, {"total", cases.size()}, {"cases", arr}};
  write_json(ctx.path("selftest.json"), body, ctx.hash);
  return failed == 0 ? kSuccess : kError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral stability of toroidal Vlasov-Maxwell equilibria"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "INI run configuration");
  app.add_option("--out", out_dir, "output directory (overrides [run] out)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed");

  auto* solve = app.add_subcommand("solve-equilibrium", "solve the equilibrium and dump fields");
  int trajectories = 0;
  solve->add_option("--trajectories", trajectories, "also dump this many sample trajectories")
      ->check(CLI::NonNegativeNumber);
  auto* assess_cmd = app.add_subcommand("assess-stability", "stability verdict at lambda = 0");
  bool dump = false;
  assess_cmd->add_flag("--dump-operators", dump, "write the lambda = 0 operators");
  auto* scan = app.add_subcommand("scan-k", "witness form across the K list");
  auto* mode = app.add_subcommand("find-growing-mode", "lambda continuation and mode reconstruction");
  auto* self = app.add_subcommand("selftest", "fast invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kSuccess : kError;
  }

  Context ctx;
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (!config_path.empty())
      ctx.cfg = load_config(config_path);
    else if (!self->parsed())
      throw ConfigError("--config is required for " + command);
    if (threads) ctx.cfg.threads = *threads;
    if (seed) ctx.cfg.seed = *seed;
    if (!out_dir.empty()) ctx.cfg.out = out_dir;
    ctx.cfg.validate();
    ctx.hash = ctx.cfg.hash();
    ctx.out = ctx.cfg.out;
    fs::create_directories(ctx.out);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kError;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    int code = kError;
    if (solve->parsed())
      code = cmd_solve(ctx, trajectories);
    else if (assess_cmd->parsed())
      code = cmd_assess(ctx, dump);
    else if (scan->parsed())
      code = cmd_scan(ctx);
    else if (mode->parsed())
      code = cmd_mode(ctx);
    else if (self->parsed())
      code = cmd_selftest(ctx);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << command << " finished in " << secs << " s (config " << ctx.hash << ")\n";
    return code;
  } catch (const std::exception& ex) {
    Json err = {{"command", command}, {"error", ex.what()}, {"warnings", warning_count()}};
    if (const auto* pf = dynamic_cast<const PicardFailure*>(&ex)) {
      err["kind"] = "picard_failure";
      err["last_sup_phi"] = pf->phi.size() ? pf->phi.cwiseAbs().maxCoeff() : 0.0;
      err["last_sup_aphi"] = pf->aphi.size() ? pf->aphi.cwiseAbs().maxCoeff() : 0.0;
    } else if (dynamic_cast<const ConfigError*>(&ex)) {
      err["kind"] = "config";
    } else {
      err["kind"] = "runtime";
    }
    try {
      write_json(ctx.path("error.json"), err, ctx.hash);
    } catch (...) {
    }
    std::cerr << "error: " << ex.what() << '\n';
    return kError;
  }
}
