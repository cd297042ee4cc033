#include "stochreg/moments.hpp"

#include "stochreg/errors.hpp"
#include "stochreg/parallel.hpp"
#include "stochreg/random.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace stochreg {

namespace {

constexpr std::size_t kKeepMessages = 8;

struct Welford {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
  void merge(const Welford& b) {
    if (b.count == 0.0) return;
    if (count == 0.0) {
      *this = b;
      return;
    }
    const double n = count + b.count;
    const double d = b.mean - mean;
    mean += d * (b.count / n);
    m2 += b.m2 + d * d * (count * b.count / n);
    count = n;
  }
  double sample_var() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
  double standard_error() const { return count > 1.0 ? std::sqrt(sample_var() / count) : 0.0; }
};

struct VecWelford {
  double count = 0.0;
  Vector mean;
  Vector m2;

  void add(const Vector& x) {
    if (count == 0.0) {
      mean = Vector::Zero(x.size());
      m2 = Vector::Zero(x.size());
    }
    count += 1.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double d = x[j] - mean[j];
      mean[j] += d / count;
      m2[j] += d * (x[j] - mean[j]);
    }
  }
  void merge(const VecWelford& b) {
    if (b.count == 0.0) return;
    if (count == 0.0) {
      *this = b;
      return;
    }
    const double n = count + b.count;
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
      const double d = b.mean[j] - mean[j];
      mean[j] += d * (b.count / n);
      m2[j] += b.m2[j] + d * d * (count * b.count / n);
    }
    count = n;
  }
};

struct RowAcc {
  std::uint64_t iteration = 0;
  double epoch = 0.0;
  VecWelford x;
  Welford err, res;
};

struct BlockAcc {
  std::vector<RowAcc> rows;
  Welford kstar, ekstar;
  std::size_t used = 0, divergent = 0;
  std::vector<std::string> messages;

  void merge(BlockAcc&& b) {
    if (rows.empty()) {
      rows = std::move(b.rows);
    } else if (!b.rows.empty()) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].x.merge(b.rows[i].x);
        rows[i].err.merge(b.rows[i].err);
        rows[i].res.merge(b.rows[i].res);
      }
    }
    kstar.merge(b.kstar);
    ekstar.merge(b.ekstar);
    used += b.used;
    divergent += b.divergent;
    for (auto& m : b.messages)
      if (messages.size() < kKeepMessages) messages.push_back(std::move(m));
  }
};

}  // namespace

MomentReport mc_moments(const ProblemInstance& inst, const Vector& y, const SolverConfig& cfg, std::size_t runs,
                        const std::vector<double>& checkpoint_epochs, const McOptions& opt) {
  if (runs < 2) throw InputError("mc_moments: runs must be at least 2");
  if (static_cast<std::size_t>(y.size()) != inst.n()) throw InputError("mc_moments: data length does not match");
  SolverConfig base = cfg;
  base.store_iterates = true;
  base.record_residual = true;
  if (!checkpoint_epochs.empty()) {
    const EpochAccounting acc = epoch_accounting(cfg.method, inst.n(), cfg.M);
    base.checkpoint_iterations.clear();
    for (double e : checkpoint_epochs) {
      if (!(e >= 0.0) || !std::isfinite(e)) throw InputError("mc_moments: checkpoint epochs must be finite and >= 0");
      base.checkpoint_iterations.push_back(
          static_cast<std::uint64_t>(std::llround(e * acc.iterations_per_epoch)));
    }
  }

  const std::size_t blocks = (runs + kMcBlock - 1) / kMcBlock;
  std::vector<BlockAcc> acc(blocks);
  parallel_for(
      blocks,
      [&](std::size_t b) {
        BlockAcc& blk = acc[b];
        const std::size_t lo = b * kMcBlock, hi = std::min(runs, lo + kMcBlock);
        for (std::size_t r = lo; r < hi; ++r) {
          SolverConfig c = base;
          c.stream = r;
          std::optional<NoisyData> fresh;
          if (opt.resample_noise) fresh = add_noise(inst, opt.epsilon, derive_seed(opt.noise_seed, {r}));
          const Vector& yr = fresh ? fresh->y_delta : y;
          Trajectory t;
          try {
            t = solve(inst, yr, c);
          } catch (const DivergenceError& e) {
            ++blk.divergent;
            if (blk.messages.size() < kKeepMessages) blk.messages.push_back("run " + std::to_string(r) + ": " + e.what());
            continue;
          }
          if (blk.rows.empty() && blk.used == 0) {
            blk.rows.resize(t.checkpoints.size());
            for (std::size_t i = 0; i < t.checkpoints.size(); ++i) {
              blk.rows[i].iteration = t.checkpoints[i].iteration;
              blk.rows[i].epoch = t.checkpoints[i].epoch;
            }
          }
          if (t.checkpoints.size() != blk.rows.size())
            throw NumericalError("mc_moments: runs recorded different checkpoint grids");
          for (std::size_t i = 0; i < t.checkpoints.size(); ++i) {
            const Checkpoint& cp = t.checkpoints[i];
            if (cp.iteration != blk.rows[i].iteration)
              throw NumericalError("mc_moments: runs recorded different checkpoint grids");
            blk.rows[i].x.add(cp.iterate);
            blk.rows[i].err.add(cp.error_sq);
            blk.rows[i].res.add(cp.residual_sq);
          }
          blk.kstar.add(t.k_star);
          blk.ekstar.add(t.e_at_k_star);
          ++blk.used;
        }
      },
      opt.threads ? opt.threads : thread_count());

  BlockAcc all;
  for (auto& b : acc) {
    if (!all.rows.empty() && !b.rows.empty() && all.rows.size() != b.rows.size())
      throw NumericalError("mc_moments: runs recorded different checkpoint grids");
    all.merge(std::move(b));
  }

  MomentReport rep;
  rep.method = to_string(cfg.method);
  rep.runs_requested = runs;
  rep.runs_used = all.used;
  rep.divergent_runs = all.divergent;
  rep.divergence_messages = std::move(all.messages);
  rep.base_seed = cfg.seed;
  if (all.used == 0) return rep;
  rep.kstar_mean = all.kstar.mean;
  rep.kstar_standard_error = all.kstar.standard_error();
  rep.e_kstar_mean = all.ekstar.mean;
  rep.e_kstar_standard_error = all.ekstar.standard_error();
  bool first = true;
  for (const RowAcc& ra : all.rows) {
    MomentRow row;
    row.epoch = ra.epoch;
    row.iteration = ra.iteration;
    row.mean_iterate = ra.x.mean;
    row.bias_sq = kernel::dist_sq(ra.x.mean, inst.x_dag);
    row.variance = ra.x.m2.sum() / ra.x.count;
    row.mse = ra.err.mean;
    row.residual_mse = ra.res.mean;
    row.mse_standard_error = ra.err.standard_error();
    row.residual_standard_error = ra.res.standard_error();
    row.run_count = static_cast<std::size_t>(ra.x.count);
    if (first || row.mse < rep.curve_e) {
      rep.curve_e = row.mse;
      rep.curve_kstar = row.epoch;
      first = false;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace stochreg
