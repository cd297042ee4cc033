#include "stochreg/verify.hpp"

#include "stochreg/bounds.hpp"
#include "stochreg/errors.hpp"
#include "stochreg/exact.hpp"
#include "stochreg/experiment.hpp"
#include "stochreg/io.hpp"
#include "stochreg/moments.hpp"
#include "stochreg/random.hpp"
#include "stochreg/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

namespace stochreg {

using nlohmann::json;

RandomInstance random_instance(std::size_t n, std::size_t m, std::uint64_t seed, bool preconditioned,
                               double noise_scale) {
  const CounterStream sa(seed, 1), sx(seed, 2), sn(seed, 3);
  RowMatrix A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (Eigen::Index k = 0; k < A.size(); ++k) A.data()[k] = standard_normal(sa, static_cast<std::uint64_t>(k));
  Vector xd(static_cast<Eigen::Index>(m));
  for (Eigen::Index k = 0; k < xd.size(); ++k) xd[k] = standard_normal(sx, static_cast<std::uint64_t>(k));
  ProblemInstance inst = make_instance("random", std::move(A), std::move(xd));
  Vector y = inst.y_dag;
  for (Eigen::Index k = 0; k < y.size(); ++k) y[k] += noise_scale * standard_normal(sn, static_cast<std::uint64_t>(k));
  if (!preconditioned) return {std::move(inst), std::move(y)};
  PreconditionedSystem p = precondition(inst, y);
  return {std::move(p.inst), std::move(p.y)};
}

double safe_step(const ProblemInstance& inst, double fraction) {
  const double nb = GramOperator(inst.A).norm();
  return fraction / std::max({inst.A.max_row_norm_sq(), nb * nb, 1e-300});
}

bool VerifyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass || !c.hard; });
}

std::vector<std::string> VerifyReport::failed() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (!c.pass && c.hard) out.push_back(c.name);
  return out;
}

json VerifyReport::to_json() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "stochreg.verify";
  j["level"] = level;
  j["all_pass"] = all_pass();
  j["failed"] = failed();
  j["seconds"] = seconds;
  j["checks"] = json::array();
  for (const auto& c : checks)
    j["checks"].push_back({{"name", c.name},
                           {"pass", c.pass},
                           {"hard", c.hard},
                           {"value", c.value},
                           {"tolerance", c.tolerance},
                           {"margin", c.tolerance - c.value},
                           {"detail", c.detail},
                           {"seconds", c.seconds}});
  return j;
}

namespace {

struct Case {
  std::size_t n, m, M, K;
};

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

const std::vector<Case> kSmallCases = {{2, 2, 2, 1}, {2, 2, 2, 2}, {3, 3, 2, 1}, {2, 3, 3, 1}, {3, 2, 1, 3}};

struct WeightChoice {
  std::string R1;
  ShiftSpec R2;
};
const std::vector<WeightChoice> kWeights = {{"I", ShiftSpec::zero},    {"I", ShiftSpec::pinv_zeta},
                                            {"B", ShiftSpec::zero},    {"B", ShiftSpec::pinv_zeta},
                                            {"M0^2", ShiftSpec::zero}, {"M0^2", ShiftSpec::pinv_zeta}};

class Suite {
 public:
  explicit Suite(VerifyReport& r) : r_(r) {}

  // body returns the measured value; pass iff value <= tol.
  void run(const std::string& name, double tol, const std::function<double(std::string&)>& body, bool hard = true) {
    CheckResult c;
    c.name = name;
    c.tolerance = tol;
    c.hard = hard;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.value = body(c.detail);
      c.pass = c.value <= tol;
    } catch (const std::exception& e) {
      c.pass = false;
      c.value = std::numeric_limits<double>::infinity();
      c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r_.checks.push_back(std::move(c));
  }

 private:
  VerifyReport& r_;
};

std::string case_str(const Case& c) {
  std::ostringstream os;
  os << "n=" << c.n << " m=" << c.m << " M=" << c.M << " K=" << c.K;
  return os.str();
}

}  // namespace

VerifyReport run_verification(const std::string& level, Fault fault) {
  if (level != "fast" && level != "full") throw InputError("verify level must be fast or full");
  VerifyReport rep;
  rep.level = level;
  const auto t0 = std::chrono::steady_clock::now();
  Suite s(rep);

  s.run("step_sum_identity", 1e-12, [](std::string& d) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto ri = random_instance(4, 3, seed, false);
      const GramOperator B(ri.inst.A);
      const double c0 = safe_step(ri.inst);
      const Vector v = ri.inst.x_dag;
      for (std::size_t j : {1, 2, 7, 30}) worst = std::max(worst, step_sum_identity_check(B, c0, j, v));
    }
    d = "c0 sum_{i<j} M0^i vs (I - M0^j) B^-1, relative";
    return worst;
  });

  s.run("kernel_bound_sweep", 0.0, [](std::string& d) {
    const auto ri = random_instance(6, 4, 11, true);
    const GramOperator B(ri.inst.A);
    const double c0 = 0.9 / B.norm();
    int fails = 0, total = 0;
    for (double sp : {0.0, 0.5, 1.0, 2.0})
      for (double tp : {0.0, 0.5, 1.0})
        for (int M : {1, 2, 5})
          for (int K : {1, 2, 5, 10}) {
            ++total;
            if (!kernel_bound_check(B, c0, M, K, sp, tp).pass) ++fails;
          }
    d = std::to_string(total) + " (s, t, M, K) combinations";
    return static_cast<double>(fails);
  });

  s.run("commutator", 1e-12, [](std::string& d) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
      worst = std::max(worst, commutator_check(random_instance(5, 4, seed, true).inst.A));
    d = "max |[a_i a_i^t, a_j a_j^t]| on preconditioned instances";
    return worst;
  });

  s.run("row_factor_identity", 1e-12, [](std::string& d) {
    double worst = 0.0;
    for (auto [n, m] : {std::pair<std::size_t, std::size_t>{4, 3}, {3, 5}, {6, 6}}) {
      const auto ri = random_instance(n, m, 7 + n, true);
      const CounterStream st(99, n);
      Vector diag(static_cast<Eigen::Index>(m)), v(static_cast<Eigen::Index>(m));
      for (Eigen::Index k = 0; k < diag.size(); ++k) {
        diag[k] = standard_normal(st, static_cast<std::uint64_t>(k));
        v[k] = standard_normal(st, static_cast<std::uint64_t>(k + 100));
      }
      worst = std::max(worst, row_factor_check(ri.inst, ri.y, diag, v).max_deviation);
    }
    d = "(n-1)-factor identities for N_j and zeta_j";
    return worst;
  });

  s.run("orthogonality", 1e-12, [](std::string& d) {
    double worst = 0.0;
    for (const Case& c : {Case{2, 2, 2, 1}, Case{3, 3, 2, 2}, Case{2, 3, 3, 2}}) {
      const auto ri = random_instance(c.n, c.m, 21 + c.n + c.M, true);
      const auto o = orthogonality_check(ri.inst, ri.y, safe_step(ri.inst), c.M, c.K);
      worst = std::max(worst, o.max_cross_term / std::max(o.scale, 1e-300));
    }
    d = "max |E<H e, H' e'>| / max E|H e|^2";
    return worst;
  });

  const double gap_sign = fault == Fault::svrg_sign ? -1.0 : 1.0;
  s.run("recursion_check", 1e-12, [&](std::string& d) {
    double worst = 0.0;
    for (const Case& c : {Case{2, 2, 3, 2}, Case{5, 4, 4, 3}, Case{3, 3, 1, 4}}) {
      for (bool pre : {false, true}) {
        const auto ri = random_instance(c.n, c.m, 31 + c.n, pre);
        const auto r = recursion_check(ri.inst, ri.y, safe_step(ri.inst), c.M, 5, c.K, gap_sign);
        const double sc = std::max(1.0, r.scale);
        worst = std::max({worst, r.max_deviation / sc, r.max_g_deviation, r.max_anchor_step / sc});
      }
    }
    d = fault == Fault::svrg_sign ? "replay with flipped variance-reduction sign" : "recursion, G expansion, anchor step";
    return worst;
  });

  s.run("bias_closed_form", 1e-11, [](std::string& d) {
    double worst = 0.0;
    for (const Case& c : kSmallCases) {
      const auto ri = random_instance(c.n, c.m, 41 + c.n * 7 + c.M, false);
      const double c0 = safe_step(ri.inst);
      const Vector cf = closed_form_mean(ri.inst, ri.y, c0, c.M, c.K);
      for (Method me : {Method::sgd, Method::svrg}) {
        const auto em = enumerate_exact_moments(ri.inst, ri.y, c0, c.M, c.K, me);
        worst = std::max(worst, (em.mean - cf).norm() / (1.0 + ri.inst.x_dag.norm()));
      }
    }
    d = "|E x_{KM} - closed form| / (1 + |x_dag|), both methods";
    return worst;
  });

  s.run("bias_equality", 1e-12, [](std::string& d) {
    double worst = 0.0;
    for (const Case& c : kSmallCases) {
      const auto ri = random_instance(c.n, c.m, 51 + c.n + c.K, false);
      const double c0 = safe_step(ri.inst);
      const auto a = enumerate_exact_moments(ri.inst, ri.y, c0, c.M, c.K, Method::sgd);
      const auto b = enumerate_exact_moments(ri.inst, ri.y, c0, c.M, c.K, Method::svrg);
      worst = std::max(worst, (a.mean - b.mean).norm() / (1.0 + ri.inst.x_dag.norm()));
    }
    d = "|E x_sgd - E x_svrg| / (1 + |x_dag|)";
    return worst;
  });

  s.run("propagation_vs_enumeration", 1e-11, [](std::string& d) {
    double worst = 0.0;
    for (const Case& c : kSmallCases) {
      const auto ri = random_instance(c.n, c.m, 61 + c.m + c.M, true);
      const double c0 = safe_step(ri.inst);
      for (Method me : {Method::sgd, Method::svrg})
        for (const auto& w : kWeights) {
          const auto R1 = OperatorWord::parse(w.R1);
          worst = std::max(worst, rel(propagate_weighted_residual(ri.inst, ri.y, c0, c.M, c.K, me, R1, w.R2),
                                      enumerate_weighted_residual(ri.inst, ri.y, c0, c.M, c.K, me, R1, w.R2)));
        }
    }
    d = "exact second-moment recursion vs path enumeration, relative";
    return worst;
  });

  s.run("svrg_decomposition", 1e-11, [](std::string& d) {
    double worst = 0.0;
    for (const Case& c : kSmallCases) {
      const auto ri = random_instance(c.n, c.m, 71 + c.n + c.M, true);
      const double c0 = safe_step(ri.inst);
      for (const auto& w : kWeights) {
        const auto t = svrg_variance_terms(ri.inst, ri.y, c0, c.M, c.K, OperatorWord::parse(w.R1), w.R2);
        worst = std::max(worst, rel(t.total, t.enumerated));
      }
    }
    d = "I0 + sum I1 vs enumerated weighted error, relative";
    return worst;
  });

  s.run("sgd_decomposition", 1e-11, [](std::string& d) {
    double worst = 0.0;
    std::string where;
    for (const Case& c : kSmallCases) {
      const auto ri = random_instance(c.n, c.m, 71 + c.n + c.M, true);
      const double c0 = safe_step(ri.inst);
      for (const auto& w : kWeights) {
        const auto t = sgd_variance_terms(ri.inst, ri.y, c0, c.M, c.K, OperatorWord::parse(w.R1), w.R2);
        const double r = rel(t.total, t.enumerated);
        if (r > worst) {
          worst = r;
          where = case_str(c) + " R1=" + w.R1 + " R2=" + to_string(w.R2);
        }
      }
    }
    d = "I0 + sum (I2 + I3) vs enumerated weighted error, relative; worst at " + where;
    return worst;
  });

  s.run("decomposition_pathwise_closure", 1e-11, [](std::string& d) {
    double worst = 0.0;
    for (const Case& c : kSmallCases) {
      const auto ri = random_instance(c.n, c.m, 71 + c.n + c.M, true);
      const double c0 = safe_step(ri.inst);
      for (const auto& w : kWeights) {
        const auto R1 = OperatorWord::parse(w.R1);
        const auto a = svrg_variance_terms(ri.inst, ri.y, c0, c.M, c.K, R1, w.R2);
        const auto b = sgd_variance_terms(ri.inst, ri.y, c0, c.M, c.K, R1, w.R2);
        worst = std::max({worst, rel(a.pathwise, a.enumerated), rel(b.pathwise, b.enumerated)});
      }
    }
    d = "I0 + E|sum of summands|^2 vs enumerated weighted error, relative";
    return worst;
  });

  s.run("variance_ordering", 1e-12, [](std::string& d) {
    double worst = -std::numeric_limits<double>::infinity();
    int cases = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto ri = random_instance(20, 4, 80 + seed, true);
      const double c0 = safe_step(ri.inst, 0.25);
      for (std::size_t K : {1, 2, 3})
        for (const auto& w : kWeights) {
          const auto v = variance_compare(ri.inst, ri.y, c0, 2, K, OperatorWord::parse(w.R1), w.R2,
                                          CompareRoute::propagation);
          if (!v.condition_holds) throw AssumptionViolationError("comparison condition fails for the test instance");
          worst = std::max(worst, (v.svrg_value - v.sgd_value) / std::max(1.0, std::abs(v.sgd_value)));
          ++cases;
        }
    }
    d = std::to_string(cases) + " cases, max (svrg - sgd) / max(1, sgd)";
    return worst;
  });

  s.run("condition_constants", 1e-13, [](std::string& d) {
    const ConditionReport c = condition_report(100, 1.0, 0.01, 10, 1.0, 2.0);
    // 40-digit reference values
    double worst = std::max({rel(c.c_B, 1.1057273553218805608749872472509619100),
                             rel(c.c_BM, 0.026820147628693434703584897269538201),
                             rel(c.c_B_prime, 1.1983025879194086133886293812368844533),
                             rel(c.cond_rate_lhs, 0.11921619904540674324497843659302570807),
                             rel(c.cond_compare_rhs[0], 0.41725688072504380720803931259270410),
                             rel(c.cond_compare_rhs[1], 41.308431191779336913595891946683646),
                             rel(c.c_dstar, 0.33392966130720792938424614866979049682), rel(c.c_nu, 10.0)});
    if (!c.cond_rate || !c.cond_compare[0] || c.cond_compare[1]) worst = 1.0;
    d = "n=100, M=10, c0=0.01, |B|=1 against high-precision values";
    return worst;
  });

  s.run("mc_vs_enumeration", 4.0, [](std::string& d) {
    const auto ri = random_instance(3, 3, 91, false);
    const double c0 = safe_step(ri.inst);
    double worst = 0.0;
    for (Method me : {Method::sgd, Method::svrg}) {
      const auto em = enumerate_exact_moments(ri.inst, ri.y, c0, 2, 2, me);
      SolverConfig cfg;
      cfg.method = me;
      cfg.c0 = c0;
      cfg.M = 2;
      cfg.seed = 2024;
      cfg.max_epochs = epoch_accounting(me, 3, 2).epoch(4);
      const MomentReport r = mc_moments(ri.inst, ri.y, cfg, 20000, {epoch_accounting(me, 3, 2).epoch(4)});
      const MomentRow& row = r.rows.back();
      const double se = std::sqrt(em.variance_trace / static_cast<double>(row.run_count));
      worst = std::max(worst, (row.mean_iterate - em.mean).cwiseAbs().maxCoeff() / std::max(se, 1e-300));
    }
    d = "max component gap in standard errors (20000 runs, n=3, M=2, K=2)";
    return worst;
  });

  if (level == "full") {
    s.run("theorem_bound_mc", 0.0, [](std::string& d) {
      const auto ri = random_instance(10, 5, 101, true, 0.05);
      const GramOperator B(ri.inst.A);
      ProblemInstance inst = ri.inst;
      // x_dag = B w, so nu = 1 with |w| known
      Vector w = inst.x_dag;
      inst.x_dag = B.matrix() * w;
      Vector yd;
      kernel::matvec(inst.A.matrix(), inst.x_dag, yd);
      inst.y_dag = yd;
      const Vector y = yd + (ri.y - ri.inst.y_dag);
      const double nb = B.norm();
      const std::size_t M = 4;
      const double c0 = std::min(0.09 / nb, safe_step(inst, 1.0));
      const ConditionReport cr = condition_report(inst.n(), nb, c0, M, 1.0);
      if (!cr.cond_rate) throw AssumptionViolationError("rate condition fails for the test instance");
      const double dbar = (y - inst.y_dag).norm() / std::sqrt(static_cast<double>(inst.n()));
      SolverConfig cfg;
      cfg.method = Method::svrg;
      cfg.c0 = c0;
      cfg.M = M;
      cfg.seed = 7;
      const auto acc = epoch_accounting(Method::svrg, inst.n(), M);
      cfg.max_epochs = acc.epoch(10 * M);
      const MomentReport r = mc_moments(inst, y, cfg, 2000);
      int fails = 0;
      for (const auto& row : r.rows) {
        const double K = static_cast<double>(row.iteration / M);
        if (K < 1) continue;
        if (row.mse > theorem_bound(cr, w.norm(), dbar, K) + 3.0 * row.mse_standard_error) ++fails;
        if (row.residual_mse > residual_bound(cr, w.norm(), dbar, K) + 3.0 * row.residual_standard_error)
          ++fails;
      }
      d = "violations of the error and residual bounds over K = 1..10";
      return static_cast<double>(fails);
    });

    s.run("phillips_cell_svrg", 0.0, [](std::string& d) {
      ExperimentSpec spec;
      spec.problem = "s-phillips";
      spec.n = 1000;
      spec.nu = {0.0};
      spec.epsilon = {5e-2};
      spec.methods = {{Method::svrg, "5*c/M", "100"}};
      spec.runs = 100;
      spec.max_epochs = 400;
      spec.base_seed = 1;
      const auto res = run_experiment(spec);
      const ResultRow& row = res.rows.front();
      if (!row.error.empty()) throw NumericalError(row.error);
      const double e = *row.e_at_kstar, k = *row.kstar;
      std::ostringstream os;
      os << "e=" << e << " (ref 5.42e-1), k*=" << k << " (ref 96.25), factor-2 bands";
      d = os.str();
      const double fe = std::max(e / 5.42e-1, 5.42e-1 / e), fk = std::max(k / 96.25, 96.25 / k);
      return std::max(fe, fk) <= 2.0 ? 0.0 : std::max(fe, fk);
    });
  }

  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (level == "fast") {
    CheckResult c;
    c.name = "fast_runtime";
    c.hard = false;
    c.value = rep.seconds;
    c.tolerance = 60.0;
    c.pass = rep.seconds <= 60.0;
    c.detail = "soft budget in seconds";
    rep.checks.push_back(c);
  }
  return rep;
}

}  // namespace stochreg
