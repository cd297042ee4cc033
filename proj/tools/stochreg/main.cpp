#include "stochreg/errors.hpp"
#include "stochreg/experiment.hpp"
#include "stochreg/io.hpp"
#include "stochreg/problems.hpp"
#include "stochreg/solvers.hpp"
#include "stochreg/spectral.hpp"
#include "stochreg/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

using namespace stochreg;

namespace {

constexpr int kExitVerifyFailed = 2;
constexpr int kExitInternal = 1;

std::string num(double v) { return format_double(v); }

int cmd_generate(const std::string& problem, std::size_t n, double nu, double eps, std::uint64_t seed,
                 const std::string& out, bool precond, bool norm) {
  ProblemInstance inst = generate_problem(problem, n);
  if (norm) inst = normalize(inst);
  inst = smooth_solution(inst, nu);
  NoisyData data = add_noise(inst, eps, seed);
  if (precond) {
    ProblemInstance pre;
    data = precondition_data(inst, data, &pre);
    inst = std::move(pre);
  }
  save_instance(out, inst, &data);
  const GramOperator B(inst.A);
  std::cout << "wrote " << out << "\n"
            << "delta " << num(data.delta) << "\n"
            << "delta_bar " << num(data.delta_bar) << "\n"
            << "norm_B " << num(B.norm()) << "\n"
            << "c " << num(step_constant(inst.A)) << "\n";
  return 0;
}

int cmd_solve(const std::string& path, const std::string& method, const std::string& c0_expr,
              const std::string& M_expr, double max_epochs, std::uint64_t seed, std::uint64_t stream,
              double checkpoint_every, bool allow, const std::string& out) {
  const InstanceFile f = load_instance(path);
  const Vector y = f.data ? f.data->y_delta : f.inst.y_dag;
  SolverConfig cfg;
  cfg.method = parse_method(method);
  const std::size_t n = f.inst.n();
  cfg.M = eval_M(M_expr, n);
  const double nb = GramOperator(f.inst.A).norm();
  cfg.gram_norm = nb;
  if (c0_expr.empty()) {
    if (cfg.method != Method::landweber) throw InputError("--c0 is required for " + method);
    if (!(nb > 0.0)) throw DegenerateInputError("|B| = 0, no default Landweber step");
    cfg.c0 = 1.0 / nb;
  } else {
    cfg.c0 = eval_c0(c0_expr, step_constant(f.inst.A), n, cfg.M);
  }
  cfg.max_epochs = max_epochs;
  cfg.seed = seed;
  cfg.stream = stream;
  cfg.checkpoint_every = checkpoint_every;
  cfg.allow_inadmissible_step = allow;
  const Trajectory t = solve(f.inst, y, cfg);
  if (!out.empty()) {
    write_file_atomic(out, write_csv(trajectory_table(t)));
    write_file_atomic(out + ".json", trajectory_sidecar(t, cfg, f.inst, path).dump(1) + "\n");
  }
  std::cout << "k_star " << num(t.k_star) << "\n"
            << "e_at_k_star " << num(t.e_at_k_star) << "\n"
            << "c0 " << num(cfg.c0) << "\n";
  if (!t.step_admissible) std::cout << "warning: step size is outside the admissible range\n";
  return 0;
}

int cmd_experiment(const std::string& spec_path, const std::string& out) {
  const ExperimentSpec spec = load_experiment_spec(spec_path);
  const ExperimentResult r = run_experiment(spec);
  write_experiment(out, spec, r);
  for (const auto& row : r.rows) {
    std::cout << row.method << " nu=" << num(row.nu) << " eps=" << num(row.epsilon);
    if (row.error.empty())
      std::cout << " e=" << num(*row.e_at_kstar) << " k*=" << num(*row.kstar) << "\n";
    else
      std::cout << " error: " << row.error << "\n";
  }
  std::cout << r.rows.size() - r.failures << " of " << r.rows.size() << " cells completed; results in " << out
            << "\n";
  return 0;
}

int cmd_precondition_study(const std::string& spec_path, const std::string& out) {
  const ExperimentSpec spec = load_experiment_spec(spec_path);
  const PreconditionStudy s = run_precondition_study(spec);
  write_precondition_study(out, spec, s);
  for (const auto& p : s.rows) {
    std::cout << p.raw.method << " nu=" << num(p.raw.nu) << " eps=" << num(p.raw.epsilon);
    if (p.relative_gap)
      std::cout << " e_raw=" << num(*p.raw.e_at_kstar) << " e_pre=" << num(*p.pre.e_at_kstar)
                << " gap=" << num(*p.relative_gap) << "\n";
    else
      std::cout << " error: " << p.raw.error << " " << p.pre.error << "\n";
  }
  if (s.max_relative_gap) std::cout << "max_relative_gap " << num(*s.max_relative_gap) << "\n";
  return 0;
}

int cmd_verify(const std::string& level, const std::string& fault, const std::string& report) {
  Fault f = Fault::none;
  if (fault == "svrg-sign")
    f = Fault::svrg_sign;
  else if (!fault.empty())
    throw InputError("unknown fault '" + fault + "' (known: svrg-sign)");
  const VerifyReport r = run_verification(level, f);
  for (const auto& c : r.checks)
    std::cout << (c.pass ? "PASS " : (c.hard ? "FAIL " : "WARN ")) << c.name << " value=" << num(c.value)
              << " tol=" << num(c.tolerance) << " (" << c.detail << ")\n";
  if (!report.empty()) write_file_atomic(report, r.to_json().dump(1) + "\n");
  if (!r.all_pass()) {
    std::cout << "verification failed:";
    for (const auto& n : r.failed()) std::cout << " " << n;
    std::cout << "\n";
    return kExitVerifyFailed;
  }
  std::cout << "all checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic iterative regularization: solvers, exact-moment oracles and experiments"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "write a test problem with noisy data to JSON");
  std::string g_problem, g_out;
  std::size_t g_n = 0;
  double g_nu = 0.0, g_eps = 0.0;
  std::uint64_t g_seed = 0;
  bool g_pre = false, g_norm = false;
  gen->add_option("problem", g_problem, "s-shaw | s-gravity | s-phillips")->required();
  gen->add_option("--n", g_n, "discretization size")->required();
  gen->add_option("--nu", g_nu, "source smoothness index");
  gen->add_option("--eps", g_eps, "relative noise level");
  gen->add_option("--seed", g_seed, "noise seed");
  gen->add_option("--out,-o", g_out, "output JSON path")->required();
  gen->add_flag("--precondition", g_pre, "store U^t A and U^t y");
  gen->add_flag("--normalize", g_norm, "scale A so that |B| = 1");

  auto* sol = app.add_subcommand("solve", "run one trajectory on an instance file");
  std::string s_inst, s_method = "svrg", s_c0, s_M = "1", s_out;
  double s_epochs = 100.0, s_every = 1.0;
  std::uint64_t s_seed = 0, s_stream = 0;
  bool s_allow = false;
  sol->add_option("instance", s_inst, "instance JSON from generate")->required();
  sol->add_option("--method", s_method, "landweber | sgd | svrg");
  sol->add_option("--c0", s_c0, "step: <r>*c/M, <r>*c/n, <r>*c or a number (landweber default 1/|B|)");
  sol->add_option("--M", s_M, "SVRG frequency: <r>*n or an integer");
  sol->add_option("--max-epochs", s_epochs, "epoch budget");
  sol->add_option("--seed", s_seed, "index stream seed");
  sol->add_option("--stream", s_stream, "index stream number");
  sol->add_option("--checkpoint-every", s_every, "SGD checkpoint stride in epochs");
  sol->add_flag("--allow-inadmissible", s_allow, "run even if c0 exceeds the admissible range");
  sol->add_option("--out,-o", s_out, "trajectory CSV path (sidecar at <path>.json)");

  auto* exp = app.add_subcommand("experiment", "run an experiment grid from a JSON spec");
  std::string e_spec, e_out = "results";
  exp->add_option("spec", e_spec, "experiment spec JSON")->required();
  exp->add_option("--out,-o", e_out, "output directory");

  auto* ver = app.add_subcommand("verify", "run the oracle and identity checks");
  std::string v_level = "fast", v_fault, v_report;
  ver->add_option("--level", v_level, "fast | full")->check(CLI::IsMember({"fast", "full"}));
  ver->add_option("--inject-fault", v_fault, "mutation check: svrg-sign");
  ver->add_option("--report", v_report, "JSON report path");

  auto* pst = app.add_subcommand("precondition-study", "run each cell on A and on U^t A");
  std::string p_spec, p_out = "study";
  pst->add_option("spec", p_spec, "experiment spec JSON")->required();
  pst->add_option("--out,-o", p_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code(ErrorKind::input);
  }

  try {
    if (*gen) return cmd_generate(g_problem, g_n, g_nu, g_eps, g_seed, g_out, g_pre, g_norm);
    if (*sol)
      return cmd_solve(s_inst, s_method, s_c0, s_M, s_epochs, s_seed, s_stream, s_every, s_allow, s_out);
    if (*exp) return cmd_experiment(e_spec, e_out);
    if (*ver) return cmd_verify(v_level, v_fault, v_report);
    if (*pst) return cmd_precondition_study(p_spec, p_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
