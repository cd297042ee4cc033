#include "stochreg/solvers.hpp"

#include "stochreg/errors.hpp"
#include "updates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stochreg {

std::string to_string(Method m) {
  switch (m) {
    case Method::landweber:
      return "landweber";
    case Method::sgd:
      return "sgd";
    case Method::svrg:
      return "svrg";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  if (s == "landweber" || s == "lm") return Method::landweber;
  if (s == "sgd") return Method::sgd;
  if (s == "svrg") return Method::svrg;
  throw InputError("unknown method '" + s + "' (expected landweber, sgd or svrg)");
}

double EpochAccounting::epoch(std::uint64_t iteration) const noexcept {
  if (method == Method::svrg)
    return static_cast<double>(iteration) * static_cast<double>(n + M) /
           (static_cast<double>(n) * static_cast<double>(M));
  if (method == Method::landweber) return static_cast<double>(iteration);
  return static_cast<double>(iteration) / static_cast<double>(n);
}

std::uint64_t EpochAccounting::iterations_within(double epochs) const noexcept {
  if (!(epochs > 0.0)) return 0;
  double it = 0.0;
  if (method == Method::svrg)
    it = epochs * static_cast<double>(n) * static_cast<double>(M) / static_cast<double>(n + M);
  else if (method == Method::landweber)
    it = epochs;
  else
    it = epochs * static_cast<double>(n);
  return static_cast<std::uint64_t>(std::floor(it * (1.0 + 1e-12)));
}

EpochAccounting epoch_accounting(Method method, std::size_t n, std::size_t M) {
  EpochAccounting a;
  a.method = method;
  a.n = n;
  a.M = method == Method::svrg ? M : 1;
  a.iterations_per_epoch = method == Method::svrg
                               ? static_cast<double>(n) * static_cast<double>(M) / static_cast<double>(n + M)
                               : static_cast<double>(n);
  return a;
}

bool step_admissible(Method method, double c0, double max_row_norm_sq, double gram_norm) noexcept {
  if (!(c0 > 0.0)) return false;
  if (method == Method::landweber) return c0 * gram_norm <= 1.0;
  const double bound = std::max(max_row_norm_sq, gram_norm * gram_norm);
  return bound <= 0.0 || c0 <= 1.0 / bound;
}

IndexStream run_index_stream(const SolverConfig& cfg, std::size_t n) { return IndexStream(cfg.seed, cfg.stream, n); }

std::pair<double, double> oracle_stop(const Trajectory& traj) {
  if (traj.checkpoints.empty()) throw InputError("oracle_stop: trajectory has no checkpoints");
  const Checkpoint* best = &traj.checkpoints.front();
  for (const auto& c : traj.checkpoints)
    if (c.error_sq < best->error_sq) best = &c;
  return {best->epoch, best->error_sq};
}

namespace {

class Recorder {
 public:
  Recorder(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg, const EpochAccounting& acc,
           std::uint64_t budget, std::uint64_t default_stride)
      : inst_(inst), y_(y), cfg_(cfg), acc_(acc), budget_(budget), stride_(std::max<std::uint64_t>(1, default_stride)) {
    if (!cfg.checkpoint_iterations.empty()) {
      grid_ = cfg.checkpoint_iterations;
      grid_.push_back(0);
      std::sort(grid_.begin(), grid_.end());
      grid_.erase(std::unique(grid_.begin(), grid_.end()), grid_.end());
      while (!grid_.empty() && grid_.back() > budget_) grid_.pop_back();
    }
    const double init = kernel::dist_sq(inst.x0, inst.x_dag);
    limit_ = 1e12 * std::max({init, kernel::norm_sq(inst.x_dag), 1.0});
  }

  bool wants(std::uint64_t k) const {
    if (!grid_.empty()) return std::binary_search(grid_.begin(), grid_.end(), k);
    return k % stride_ == 0 || k == budget_;
  }

  // residual, when given, is A x - y for this x.
  void record(std::uint64_t k, const Vector& x, const Vector* residual) {
    Checkpoint c;
    c.iteration = k;
    c.epoch = acc_.epoch(k);
    c.error_sq = kernel::dist_sq(x, inst_.x_dag);
    if (cfg_.record_residual) {
      if (residual) {
        c.residual_sq = kernel::norm_sq(*residual);
      } else {
        kernel::matvec(inst_.A.matrix(), x, scratch_);
        c.residual_sq = kernel::dist_sq(scratch_, y_);
      }
    }
    if (!std::isfinite(c.error_sq) || c.error_sq > limit_) {
      std::ostringstream msg;
      msg.precision(17);
      msg << to_string(cfg_.method) << " diverged at iteration " << k << " (epoch " << c.epoch
          << ") with step size c0 = " << cfg_.c0 << ": error_sq = " << c.error_sq;
      throw DivergenceError(msg.str());
    }
    if (cfg_.store_iterates) c.iterate = x;
    traj_.checkpoints.push_back(std::move(c));
  }

  Trajectory finish(bool admissible) {
    auto [k, e] = oracle_stop(traj_);
    traj_.k_star = k;
    traj_.e_at_k_star = e;
    traj_.step_admissible = admissible;
    return std::move(traj_);
  }

 private:
  const ProblemInstance& inst_;
  const Vector& y_;
  const SolverConfig& cfg_;
  const EpochAccounting& acc_;
  std::uint64_t budget_;
  std::uint64_t stride_;
  std::vector<std::uint64_t> grid_;
  double limit_ = 0.0;
  Vector scratch_;
  Trajectory traj_;
};

bool validate(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg, Method expected) {
  if (cfg.method != expected) throw InputError("solver called with method " + to_string(cfg.method));
  if (!(cfg.c0 > 0.0) || !std::isfinite(cfg.c0)) throw InputError("c0 must be positive and finite");
  if (!(cfg.max_epochs >= 0.0) || !std::isfinite(cfg.max_epochs)) throw InputError("max_epochs must be finite and nonnegative");
  if (static_cast<std::size_t>(y.size()) != inst.n()) throw InputError("data vector length must equal n");
  if (expected == Method::svrg && cfg.M < 1) throw InputError("svrg requires M >= 1");
  if (expected == Method::sgd && !(cfg.checkpoint_every > 0.0)) throw InputError("checkpoint_every must be positive");
  const double nb = cfg.gram_norm ? *cfg.gram_norm : GramOperator(inst.A).norm();
  const bool ok = step_admissible(cfg.method, cfg.c0, inst.A.max_row_norm_sq(), nb);
  if (!ok && !cfg.allow_inadmissible_step) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "c0 = " << cfg.c0 << " violates the step bound for " << to_string(cfg.method)
        << " (max row norm^2 = " << inst.A.max_row_norm_sq() << ", |B| = " << nb
        << "); set the override flag to run anyway";
    throw InputError(msg.str());
  }
  return ok;
}

}  // namespace

Trajectory landweber_run(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg) {
  const bool ok = validate(inst, y, cfg, Method::landweber);
  const auto acc = epoch_accounting(Method::landweber, inst.n(), 1);
  const std::uint64_t budget = acc.iterations_within(cfg.max_epochs);
  Recorder rec(inst, y, cfg, acc, budget, 1);
  const auto& A = inst.A.matrix();
  const auto m = static_cast<Eigen::Index>(inst.m());
  const double c0 = cfg.c0;
  Vector x = inst.x0, ax, r, g;
  for (std::uint64_t k = 0;; ++k) {
    kernel::full_gradient(A, x, y, ax, r, g);
    if (rec.wants(k)) rec.record(k, x, &r);
    if (k == budget) break;
    for (Eigen::Index j = 0; j < m; ++j) x[j] = x[j] - c0 * g[j];
  }
  return rec.finish(ok);
}

Trajectory sgd_run(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg) {
  const bool ok = validate(inst, y, cfg, Method::sgd);
  const std::size_t n = inst.n();
  const std::size_t m = inst.m();
  const auto acc = epoch_accounting(Method::sgd, n, 1);
  const std::uint64_t budget = acc.iterations_within(cfg.max_epochs);
  const auto stride = static_cast<std::uint64_t>(std::max(1.0, std::round(cfg.checkpoint_every * static_cast<double>(n))));
  Recorder rec(inst, y, cfg, acc, budget, stride);
  const IndexStream idx = run_index_stream(cfg, n);
  const double c0 = cfg.c0;
  Vector x = inst.x0;
  double* xd = x.data();
  if (rec.wants(0)) rec.record(0, x, nullptr);
  for (std::uint64_t k = 0; k < budget; ++k) {
    const std::size_t i = idx[k];
    update::sgd(inst.A.row(i).data(), y[static_cast<Eigen::Index>(i)], c0, xd, m);
    if (rec.wants(k + 1)) rec.record(k + 1, x, nullptr);
  }
  return rec.finish(ok);
}

Trajectory svrg_run(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg) {
  const bool ok = validate(inst, y, cfg, Method::svrg);
  const std::size_t n = inst.n();
  const std::size_t m = inst.m();
  const std::size_t M = cfg.M;
  const auto acc = epoch_accounting(Method::svrg, n, M);
  // Whole outer loops only, so the run ends on an anchor.
  const std::uint64_t outer = acc.iterations_within(cfg.max_epochs) / M;
  const std::uint64_t budget = outer * M;
  Recorder rec(inst, y, cfg, acc, budget, M);
  const IndexStream idx = run_index_stream(cfg, n);
  const auto& A = inst.A.matrix();
  const double c0 = cfg.c0;
  Vector x = inst.x0, ax, r, g;
  double* xd = x.data();
  std::uint64_t k = 0;
  for (std::uint64_t K = 0;; ++K) {
    kernel::full_gradient(A, x, y, ax, r, g);
    if (rec.wants(k)) rec.record(k, x, &r);
    if (K == outer) break;
    const double* gd = g.data();
    for (std::size_t t = 0; t < M; ++t) {
      const std::size_t i = idx[k];
      update::svrg(inst.A.row(i).data(), ax[static_cast<Eigen::Index>(i)], gd, c0, xd, m);
      ++k;
      if (t + 1 < M && rec.wants(k)) rec.record(k, x, nullptr);
    }
  }
  return rec.finish(ok);
}

Trajectory solve(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg) {
  switch (cfg.method) {
    case Method::landweber:
      return landweber_run(inst, y, cfg);
    case Method::sgd:
      return sgd_run(inst, y, cfg);
    case Method::svrg:
      return svrg_run(inst, y, cfg);
  }
  throw InputError("unknown method");
}

}  // namespace stochreg
