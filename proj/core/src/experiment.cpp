#include "stochreg/experiment.hpp"

#include "stochreg/errors.hpp"
#include "stochreg/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace stochreg {

using nlohmann::json;

namespace {

constexpr std::uint64_t kNoiseTag = 0x6E6F697365;

std::string trim(const std::string& s) {
  std::string t;
  for (char ch : s)
    if (!std::isspace(static_cast<unsigned char>(ch))) t += ch;
  return t;
}

double parse_rational(const std::string& s, const std::string& ctx) {
  auto one = [&](const std::string& t) {
    double v = 0.0;
    const char* end = t.data() + t.size();
    auto [p, ec] = std::from_chars(t.data(), end, v);
    if (t.empty() || ec != std::errc() || p != end) throw InputError("cannot parse '" + t + "' in " + ctx);
    return v;
  };
  const auto slash = s.find('/');
  if (slash == std::string::npos) return one(s);
  const double den = one(s.substr(slash + 1));
  if (den == 0.0) throw InputError("zero denominator in " + ctx);
  return one(s.substr(0, slash)) / den;
}

std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }
std::optional<double> opt_parse(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

std::string label_for(double nu, double eps, const std::string& method) {
  return "nu" + format_double(nu) + "_eps" + format_double(eps) + "_" + method;
}

}  // namespace

double eval_c0(const std::string& expr, double c, std::size_t n, std::size_t M) {
  const std::string e = trim(expr);
  const std::string ctx = "c0 expression '" + expr + "'";
  if (e.empty()) throw InputError("empty c0 expression");
  double v = 0.0;
  const auto cpos = e.find('c');
  if (cpos == std::string::npos) {
    v = parse_rational(e, ctx);
  } else {
    double coeff = 1.0;
    if (cpos > 0) {
      if (e[cpos - 1] != '*') throw InputError("malformed " + ctx);
      coeff = parse_rational(e.substr(0, cpos - 1), ctx);
    }
    const std::string tail = e.substr(cpos + 1);
    double div = 1.0;
    if (tail == "/M")
      div = static_cast<double>(M);
    else if (tail == "/n")
      div = static_cast<double>(n);
    else if (!tail.empty())
      throw InputError("malformed " + ctx + " (expected c, c/M or c/n)");
    v = coeff * c / div;
  }
  if (!(v > 0.0) || !std::isfinite(v)) throw InputError(ctx + " must evaluate to a positive number");
  return v;
}

std::size_t eval_M(const std::string& expr, std::size_t n) {
  const std::string e = trim(expr);
  const std::string ctx = "M expression '" + expr + "'";
  if (e.empty()) throw InputError("empty M expression");
  double v = 0.0;
  if (!e.empty() && e.back() == 'n') {
    const std::string head = e.substr(0, e.size() - 1);
    double coeff = 1.0;
    if (!head.empty()) {
      if (head.back() != '*') throw InputError("malformed " + ctx);
      coeff = parse_rational(head.substr(0, head.size() - 1), ctx);
    }
    v = coeff * static_cast<double>(n);
  } else {
    v = parse_rational(e, ctx);
  }
  const double r = std::round(v);
  if (!(r >= 1.0) || !std::isfinite(r)) throw InputError(ctx + " must give M >= 1");
  return static_cast<std::size_t>(r);
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  try {
    ExperimentSpec s;
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion)
      throw InputError("unsupported schema_version in experiment spec");
    s.problem = j.at("problem").get<std::string>();
    s.n = j.at("n").get<std::size_t>();
    if (j.contains("nu")) s.nu = j.at("nu").get<std::vector<double>>();
    if (j.contains("epsilon")) s.epsilon = j.at("epsilon").get<std::vector<double>>();
    for (const json& m : j.at("methods")) {
      MethodSpec ms;
      ms.method = parse_method(m.at("method").get<std::string>());
      ms.c0_expr = m.value("c0", std::string());
      if (m.contains("M")) {
        const json& mm = m.at("M");
        ms.M_expr = mm.is_string() ? mm.get<std::string>() : std::to_string(mm.get<std::size_t>());
      }
      if (ms.c0_expr.empty() && ms.method != Method::landweber)
        throw InputError("method " + to_string(ms.method) + " needs a c0 expression");
      s.methods.push_back(std::move(ms));
    }
    s.runs = j.value("runs", s.runs);
    s.max_epochs = j.value("max_epochs", s.max_epochs);
    s.base_seed = j.value("base_seed", s.base_seed);
    s.precondition = j.value("precondition", s.precondition);
    s.resample_noise = j.value("resample_noise", s.resample_noise);
    s.normalize = j.value("normalize", s.normalize);
    s.checkpoint_every = j.value("checkpoint_every", s.checkpoint_every);
    if (j.contains("checkpoint_iterations"))
      s.checkpoint_iterations = j.at("checkpoint_iterations").get<std::vector<std::uint64_t>>();
    s.emit_moments = j.value("emit_moments", s.emit_moments);
    s.allow_inadmissible_step = j.value("allow_inadmissible_step", s.allow_inadmissible_step);
    if (s.methods.empty()) throw InputError("experiment spec lists no methods");
    if (s.nu.empty() || s.epsilon.empty()) throw InputError("experiment spec needs nu and epsilon lists");
    if (s.runs < 1) throw InputError("runs must be at least 1");
    if (!(s.max_epochs > 0.0)) throw InputError("max_epochs must be positive");
    for (double e : s.epsilon)
      if (!(e >= 0.0)) throw InputError("epsilon values must be nonnegative");
    for (double v : s.nu)
      if (!(v >= 0.0)) throw InputError("nu values must be nonnegative");
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed experiment spec: ") + e.what());
  }
}

json ExperimentSpec::to_json() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["problem"] = problem;
  j["n"] = n;
  j["nu"] = nu;
  j["epsilon"] = epsilon;
  j["methods"] = json::array();
  for (const auto& m : methods) {
    json x = {{"method", to_string(m.method)}, {"M", m.M_expr}};
    if (!m.c0_expr.empty()) x["c0"] = m.c0_expr;
    j["methods"].push_back(std::move(x));
  }
  j["runs"] = runs;
  j["max_epochs"] = max_epochs;
  j["base_seed"] = base_seed;
  j["precondition"] = precondition;
  j["resample_noise"] = resample_noise;
  j["normalize"] = normalize;
  j["checkpoint_every"] = checkpoint_every;
  j["checkpoint_iterations"] = checkpoint_iterations;
  j["emit_moments"] = emit_moments;
  j["allow_inadmissible_step"] = allow_inadmissible_step;
  return j;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError("cannot parse " + path + ": " + e.what());
  }
  return ExperimentSpec::from_json(j);
}

CsvTable result_table(const std::vector<ResultRow>& rows) {
  CsvTable t;
  t.header = {"problem", "nu",   "epsilon",        "method",          "c0_expr",      "c0",
              "M",       "e_at_kstar", "kstar",    "kstar_rounded",   "runs",         "runs_used",
              "divergent_runs", "standard_error", "kstar_standard_error", "delta", "error"};
  for (const auto& r : rows)
    t.rows.push_back({r.problem, format_double(r.nu), format_double(r.epsilon), r.method, r.c0_expr,
                      format_double(r.c0), std::to_string(r.M), opt_str(r.e_at_kstar), opt_str(r.kstar),
                      opt_str(r.kstar_rounded), std::to_string(r.runs), std::to_string(r.runs_used),
                      std::to_string(r.divergent_runs), opt_str(r.standard_error), opt_str(r.kstar_standard_error),
                      opt_str(r.delta), r.error});
  return t;
}

std::vector<ResultRow> result_rows_from_table(const CsvTable& t) {
  const CsvTable ref = result_table({});
  if (t.header != ref.header) throw InputError("result table has unexpected columns");
  std::vector<ResultRow> out;
  for (const auto& f : t.rows) {
    ResultRow r;
    r.problem = f[0];
    r.nu = parse_double(f[1]);
    r.epsilon = parse_double(f[2]);
    r.method = f[3];
    r.c0_expr = f[4];
    r.c0 = parse_double(f[5]);
    r.M = static_cast<std::size_t>(std::stoull(f[6]));
    r.e_at_kstar = opt_parse(f[7]);
    r.kstar = opt_parse(f[8]);
    r.kstar_rounded = opt_parse(f[9]);
    r.runs = static_cast<std::size_t>(std::stoull(f[10]));
    r.runs_used = static_cast<std::size_t>(std::stoull(f[11]));
    r.divergent_runs = static_cast<std::size_t>(std::stoull(f[12]));
    r.standard_error = opt_parse(f[13]);
    r.kstar_standard_error = opt_parse(f[14]);
    r.delta = opt_parse(f[15]);
    r.error = f[16];
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

struct Cell {
  ProblemInstance inst;
  Vector y;
  NoisyData data;
};

Cell make_cell(const ProblemInstance& base, const ExperimentSpec& spec, std::size_t cell, double nu, double eps,
               bool precondition) {
  Cell c;
  c.inst = smooth_solution(base, nu);
  c.data = add_noise(c.inst, eps, derive_seed(spec.base_seed, {cell, kNoiseTag}));
  if (precondition) {
    ProblemInstance pre;
    c.data = precondition_data(c.inst, c.data, &pre);
    c.inst = std::move(pre);
  }
  c.y = c.data.y_delta;
  return c;
}

ResultRow run_method(const Cell& cell, const ExperimentSpec& spec, std::size_t cell_index, std::size_t mi, double c,
                     double norm_B, double nu, double eps, std::vector<CellMoments>* moments,
                     const std::string& label_prefix) {
  const MethodSpec& ms = spec.methods[mi];
  ResultRow row;
  row.problem = spec.problem;
  row.nu = nu;
  row.epsilon = eps;
  row.method = to_string(ms.method);
  row.c0_expr = ms.c0_expr;
  row.delta = cell.data.delta;
  try {
    const std::size_t n = cell.inst.n();
    row.M = ms.method == Method::svrg ? eval_M(ms.M_expr, n) : 1;
    if (ms.c0_expr.empty()) {
      if (!(norm_B > 0.0)) throw DegenerateInputError("|B| = 0, no default Landweber step");
      row.c0 = 1.0 / norm_B;
    } else {
      row.c0 = eval_c0(ms.c0_expr, c, n, ms.method == Method::svrg ? row.M : eval_M(ms.M_expr, n));
    }
    SolverConfig cfg;
    cfg.method = ms.method;
    cfg.c0 = row.c0;
    cfg.M = row.M;
    cfg.max_epochs = spec.max_epochs;
    cfg.seed = derive_seed(spec.base_seed, {cell_index, mi});
    cfg.checkpoint_every = spec.checkpoint_every;
    cfg.checkpoint_iterations = spec.checkpoint_iterations;
    cfg.gram_norm = norm_B;
    cfg.allow_inadmissible_step = spec.allow_inadmissible_step;
    const bool single = ms.method == Method::landweber || spec.runs == 1;
    row.runs = single ? 1 : spec.runs;
    if (single) {
      const Trajectory t = solve(cell.inst, cell.y, cfg);
      row.e_at_kstar = t.e_at_k_star;
      row.kstar = t.k_star;
      row.runs_used = 1;
    } else {
      McOptions opt;
      opt.resample_noise = spec.resample_noise;
      opt.epsilon = eps;
      opt.noise_seed = derive_seed(spec.base_seed, {cell_index, kNoiseTag, 1});
      if (spec.resample_noise && spec.precondition)
        throw InputError("resample_noise with precondition is not supported");
      MomentReport rep = mc_moments(cell.inst, cell.y, cfg, spec.runs, {}, opt);
      row.runs_used = rep.runs_used;
      row.divergent_runs = rep.divergent_runs;
      if (rep.runs_used == 0) throw DivergenceError("all runs diverged: " + rep.divergence_messages.front());
      row.e_at_kstar = rep.e_kstar_mean;
      row.kstar = rep.kstar_mean;
      row.standard_error = rep.e_kstar_standard_error;
      row.kstar_standard_error = rep.kstar_standard_error;
      if (moments) moments->push_back({label_prefix + label_for(nu, eps, row.method), std::move(rep)});
    }
    row.kstar_rounded = std::round(*row.kstar * 100.0) / 100.0;
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, std::optional<double> c_override) {
  ProblemInstance base = generate_problem(spec.problem, spec.n);
  if (spec.normalize) base = normalize(base);
  ExperimentResult out;
  std::size_t cell_index = 0;
  for (double nu : spec.nu) {
    for (double eps : spec.epsilon) {
      const std::size_t ci = cell_index++;
      std::optional<Cell> cell;
      std::string cell_error;
      try {
        cell = make_cell(base, spec, ci, nu, eps, spec.precondition);
      } catch (const Error& e) {
        cell_error = e.what();
      }
      double c = 0.0, norm_B = 0.0;
      if (cell) {
        try {
          c = c_override ? *c_override : step_constant(cell->inst.A);
          norm_B = GramOperator(cell->inst.A).norm();
        } catch (const Error& e) {
          cell_error = e.what();
          cell.reset();
        }
      }
      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        ResultRow row;
        if (cell) {
          row = run_method(*cell, spec, ci, mi, c, norm_B, nu, eps, spec.emit_moments ? &out.moments : nullptr, "");
        } else {
          row.problem = spec.problem;
          row.nu = nu;
          row.epsilon = eps;
          row.method = to_string(spec.methods[mi].method);
          row.c0_expr = spec.methods[mi].c0_expr;
          row.error = cell_error;
        }
        if (!row.error.empty()) ++out.failures;
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

namespace {

CsvTable figure_table(const MomentReport& r) {
  CsvTable t;
  t.header = {"method", "epoch", "iteration", "bias_sq", "variance", "mse", "residual_mse", "run_count"};
  for (const auto& m : r.rows)
    t.rows.push_back({r.method, format_double(m.epoch), std::to_string(m.iteration), format_double(m.bias_sq),
                      format_double(m.variance), format_double(m.mse), format_double(m.residual_mse),
                      std::to_string(m.run_count)});
  return t;
}

void write_moments(const std::string& out_dir, const std::vector<CellMoments>& ms) {
  for (const auto& cm : ms)
    write_file_atomic((std::filesystem::path(out_dir) / ("moments_" + cm.label + ".csv")).string(),
                      write_csv(figure_table(cm.report)));
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

json rows_json(const std::vector<ResultRow>& rows) {
  json a = json::array();
  const CsvTable t = result_table(rows);
  for (const auto& r : t.rows) {
    json o;
    for (std::size_t k = 0; k < t.header.size(); ++k) o[t.header[k]] = r[k];
    a.push_back(std::move(o));
  }
  return a;
}

}  // namespace

void write_experiment(const std::string& out_dir, const ExperimentSpec& spec, const ExperimentResult& r) {
  ensure_dir(out_dir);
  const std::filesystem::path d(out_dir);
  write_file_atomic((d / "results.csv").string(), write_csv(result_table(r.rows)));
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "stochreg.experiment";
  j["spec"] = spec.to_json();
  j["failures"] = r.failures;
  j["kstar_convention"] =
      "kstar is the mean over runs of the per-run oracle epoch (an integer for landweber); kstar_rounded keeps two "
      "decimals";
  j["rows"] = rows_json(r.rows);
  write_file_atomic((d / "results.json").string(), j.dump(1) + "\n");
  write_moments(out_dir, r.moments);
}

PreconditionStudy run_precondition_study(const ExperimentSpec& spec) {
  ExperimentSpec raw = spec, pre = spec;
  raw.precondition = false;
  pre.precondition = true;
  pre.allow_inadmissible_step = true;
  ProblemInstance base = generate_problem(spec.problem, spec.n);
  if (spec.normalize) base = normalize(base);
  const double c = step_constant(base.A);
  ExperimentResult a = run_experiment(raw, c);
  ExperimentResult b = run_experiment(pre, c);
  PreconditionStudy s;
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    PairedRow p{a.rows[k], b.rows[k], std::nullopt};
    if (p.raw.e_at_kstar && p.pre.e_at_kstar && *p.raw.e_at_kstar > 0.0) {
      p.relative_gap = std::abs(*p.pre.e_at_kstar - *p.raw.e_at_kstar) / *p.raw.e_at_kstar;
      s.max_relative_gap = std::max(s.max_relative_gap.value_or(0.0), *p.relative_gap);
    }
    s.rows.push_back(std::move(p));
  }
  for (auto& m : a.moments) s.moments.push_back({"raw_" + m.label, std::move(m.report)});
  for (auto& m : b.moments) s.moments.push_back({"pre_" + m.label, std::move(m.report)});
  return s;
}

CsvTable paired_table(const PreconditionStudy& s) {
  CsvTable t;
  t.header = {"problem", "nu", "epsilon", "method", "c0", "M", "e_raw", "e_pre", "kstar_raw", "kstar_pre",
              "relative_gap", "error"};
  for (const auto& p : s.rows) {
    std::string err = p.raw.error;
    if (!p.pre.error.empty()) err += (err.empty() ? "" : "; ") + p.pre.error;
    t.rows.push_back({p.raw.problem, format_double(p.raw.nu), format_double(p.raw.epsilon), p.raw.method,
                      format_double(p.raw.c0), std::to_string(p.raw.M), opt_str(p.raw.e_at_kstar),
                      opt_str(p.pre.e_at_kstar), opt_str(p.raw.kstar), opt_str(p.pre.kstar), opt_str(p.relative_gap),
                      err});
  }
  return t;
}

void write_precondition_study(const std::string& out_dir, const ExperimentSpec& spec, const PreconditionStudy& s) {
  ensure_dir(out_dir);
  const std::filesystem::path d(out_dir);
  write_file_atomic((d / "paired.csv").string(), write_csv(paired_table(s)));
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "stochreg.precondition_study";
  j["spec"] = spec.to_json();
  j["max_relative_gap"] = s.max_relative_gap ? json(*s.max_relative_gap) : json();
  write_file_atomic((d / "study.json").string(), j.dump(1) + "\n");
  write_moments(out_dir, s.moments);
}

}  // namespace stochreg
