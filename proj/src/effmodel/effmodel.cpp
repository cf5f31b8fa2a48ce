#include "nvlab/effmodel/effmodel.hpp"

#include <cmath>
#include <cstdio>

namespace nvlab::effmodel {

namespace {

void validate(const EfficiencyParams& p) {
  if (p.mtbf <= 0.0) throw EffModelError("mtbf must be positive");
  if (p.t_chk < 0.0) throw EffModelError("checkpoint time cannot be negative");
  if (p.t_r < 0.0 || p.t_sync < 0.0 || p.t_r_prime < 0.0)
    throw EffModelError("restart and sync times cannot be negative");
  if (p.total_time <= 0.0) throw EffModelError("total time must be positive");
  if (p.recomputability < 0.0 || p.recomputability > 1.0)
    throw EffModelError("recomputability must lie in [0,1]");
  if (p.t_s < 0.0 || p.t_s >= 1.0)
    throw EffModelError("runtime overhead fraction must lie in [0,1)");
  if (p.nodes < 1) throw EffModelError("node count must be positive");
}

}  // namespace

EfficiencyParams EfficiencyParams::make(double mtbf, double t_chk) {
  EfficiencyParams p;
  p.mtbf = mtbf;
  p.t_chk = t_chk;
  p.t_r = t_chk;
  p.t_sync = 0.5 * t_chk;
  p.t_r_prime = t_chk;
  return p;
}

double young_interval(double t_chk, double mtbf) {
  if (t_chk < 0.0) throw EffModelError("checkpoint time cannot be negative");
  if (mtbf <= 0.0) throw EffModelError("mtbf must be positive");
  return std::sqrt(2.0 * t_chk * mtbf);
}

double mtbf_with_easycrash(double mtbf, double r) {
  if (mtbf <= 0.0) throw EffModelError("mtbf must be positive");
  if (r < 0.0 || r > 1.0) throw EffModelError("recomputability must lie in [0,1]");
  if (r == 1.0)
    throw PerfectRecomputability(
        "every crash recomputes; the effective mtbf is unbounded");
  return mtbf / (1.0 - r);
}

EfficiencyResult baseline_efficiency(const EfficiencyParams& params) {
  validate(params);
  EfficiencyResult res;
  res.interval = young_interval(params.t_chk, params.mtbf);
  res.crashes = params.total_time / params.mtbf;
  res.rollbacks = res.crashes;
  res.vain_time = res.interval / 2.0;
  const double per_crash = res.vain_time + params.t_r + params.t_sync;
  const double budget = params.total_time - res.crashes * per_crash;
  if (budget <= 0.0) {
    res.thrashing = true;
    return res;
  }
  res.checkpoints = budget / (res.interval + params.t_chk);
  res.efficiency = res.checkpoints * res.interval / params.total_time;
  return res;
}

EfficiencyResult easycrash_efficiency(const EfficiencyParams& params) {
  validate(params);
  if (params.recomputability == 1.0) {
    // Limit case: with every crash recomputing, the checkpoint interval is
    // unbounded, so checkpoints and rollbacks vanish and each crash costs
    // only the recompute-path restart.
    EfficiencyResult res;
    res.crashes = params.total_time / params.mtbf;
    res.recomputes = res.crashes;
    const double budget =
        params.total_time - res.recomputes * (params.t_r_prime + params.t_sync);
    if (budget <= 0.0) {
      res.thrashing = true;
      return res;
    }
    res.efficiency = budget * (1.0 - params.t_s) / params.total_time;
    return res;
  }

  EfficiencyResult res;
  const double stretched = mtbf_with_easycrash(params.mtbf, params.recomputability);
  res.interval = young_interval(params.t_chk, stretched);
  res.crashes = params.total_time / params.mtbf;
  res.rollbacks = res.crashes * (1.0 - params.recomputability);
  res.recomputes = res.crashes * params.recomputability;
  res.vain_time = res.interval / 2.0;
  const double per_rollback = res.vain_time + params.t_r + params.t_sync;
  const double per_recompute = params.t_r_prime + params.t_sync;
  const double budget = params.total_time - res.rollbacks * per_rollback -
                        res.recomputes * per_recompute;
  if (budget <= 0.0) {
    res.thrashing = true;
    return res;
  }
  res.checkpoints = budget / (res.interval + params.t_chk);
  res.efficiency = res.checkpoints * res.interval * (1.0 - params.t_s) /
                   params.total_time;
  return res;
}

TauResult derive_tau(const EfficiencyParams& params) {
  EfficiencyParams probe = params;
  probe.recomputability = 0.0;
  const double base = baseline_efficiency(probe).efficiency;

  const auto gap = [&](double r) {
    probe.recomputability = r;
    return easycrash_efficiency(probe).efficiency - base;
  };

  TauResult result;
  if (gap(0.0) >= 0.0) {
    result.tau = 0.0;
    result.infeasible = false;
    return result;
  }
  const double hi_cap = 1.0 - 1e-9;
  if (gap(hi_cap) < 0.0) {
    result.infeasible = true;
    return result;  // tau stays at the 1.0 sentinel
  }

  double lo = 0.0;
  double hi = hi_cap;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (gap(mid) >= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  result.tau = hi;
  result.infeasible = false;
  return result;
}

double t_r_prime_estimate(double non_readonly_bytes, double nvm_bandwidth) {
  if (non_readonly_bytes < 0.0) throw EffModelError("byte count cannot be negative");
  if (nvm_bandwidth <= 0.0) throw EffModelError("bandwidth must be positive");
  return non_readonly_bytes / nvm_bandwidth;
}

double mtbf_scaled(double base_mtbf, long base_nodes, long nodes) {
  if (base_mtbf <= 0.0) throw EffModelError("mtbf must be positive");
  if (base_nodes < 1 || nodes < base_nodes)
    throw EffModelError("node count can only scale up from the base");
  return base_mtbf * static_cast<double>(base_nodes) / static_cast<double>(nodes);
}

std::string sweep_csv(const SweepSpec& spec) {
  std::string csv = "T_chk,MTBF,nodes,R,t_s,eff_baseline,eff_easycrash,improvement,tau\n";
  char row[256];
  for (const double t_chk : spec.t_chk_values) {
    for (const long nodes : spec.node_counts) {
      const double mtbf = mtbf_scaled(spec.base_mtbf, spec.base_nodes, nodes);
      for (const double r : spec.r_values) {
        for (const double t_s : spec.t_s_values) {
          EfficiencyParams params = EfficiencyParams::make(mtbf, t_chk);
          params.total_time = spec.total_time;
          params.nodes = nodes;
          params.recomputability = r;
          params.t_s = t_s;
          const double base = baseline_efficiency(params).efficiency;
          const double with_plan = easycrash_efficiency(params).efficiency;
          const double improvement = base > 0.0 ? (with_plan - base) / base : 0.0;
          const TauResult tau = derive_tau(params);
          std::snprintf(row, sizeof(row), "%g,%g,%ld,%g,%g,%.6f,%.6f,%.6f,%.6f\n",
                        t_chk, mtbf, nodes, r, t_s, base, with_plan, improvement,
                        tau.tau);
          csv += row;
        }
      }
    }
  }
  return csv;
}

}  // namespace nvlab::effmodel
