#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nvlab::effmodel {

struct EffModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when R=1 makes the effective MTBF unbounded; the caller decides what
// "never needs a checkpoint" means for it.
struct PerfectRecomputability : EffModelError {
  using EffModelError::EffModelError;
};

struct EfficiencyParams {
  double mtbf = 0.0;        // seconds between crashes at the modeled scale
  double t_chk = 0.0;       // time to write one system checkpoint, seconds
  double t_r = 0.0;         // restart-from-checkpoint time, seconds
  double t_sync = 0.0;      // post-crash synchronization time, seconds
  double total_time = 315360000.0;  // ten years of wall clock
  double recomputability = 0.0;     // fraction of crashes that recompute, R
  double t_s = 0.0;         // runtime overhead fraction of the persistence plan
  double t_r_prime = 0.0;   // restart time on the recompute path, seconds
  long nodes = 100000;

  // Default couplings: t_r = t_chk, t_sync = 0.5*t_chk, t_r_prime = t_chk.
  static EfficiencyParams make(double mtbf, double t_chk);
};

struct EfficiencyResult {
  double interval = 0.0;       // checkpoint interval T from Young's formula
  double checkpoints = 0.0;    // interval count N over total_time
  double crashes = 0.0;        // M = total_time / mtbf
  double rollbacks = 0.0;      // M' crashes that replay from a checkpoint
  double recomputes = 0.0;     // M'' crashes absorbed by recomputation
  double vain_time = 0.0;      // T/2 lost per rollback
  double efficiency = 0.0;     // useful compute / total_time
  // Per-crash costs exceed the total budget; efficiency is pinned to zero.
  bool thrashing = false;
};

struct TauResult {
  double tau = 1.0;
  bool infeasible = false;
};

// T = sqrt(2 * t_chk * mtbf).
double young_interval(double t_chk, double mtbf);

// mtbf / (1 - r); throws PerfectRecomputability at r = 1.
double mtbf_with_easycrash(double mtbf, double r);

EfficiencyResult baseline_efficiency(const EfficiencyParams& params);

// Crash counts stay governed by the hardware MTBF; only the checkpoint
// interval stretches with the recomputability-adjusted MTBF. Useful compute
// is drained by the persistence overhead t_s. At recomputability exactly 1
// the interval is unbounded, so the checkpoint and rollback terms drop out
// and each crash costs only the recompute-path restart.
EfficiencyResult easycrash_efficiency(const EfficiencyParams& params);

// Smallest R in [0,1) whose easycrash efficiency reaches the baseline,
// found by bisection to 1e-6; tau=1 with the infeasible flag when no R < 1
// suffices. params.recomputability is ignored.
TauResult derive_tau(const EfficiencyParams& params);

double t_r_prime_estimate(double non_readonly_bytes, double nvm_bandwidth);

// Inverse-linear MTBF scaling with node count.
double mtbf_scaled(double base_mtbf, long base_nodes, long nodes);

struct SweepSpec {
  std::vector<double> t_chk_values = {32.0, 320.0, 3200.0};
  double base_mtbf = 43200.0;
  long base_nodes = 100000;
  std::vector<long> node_counts = {100000};
  std::vector<double> r_values = {0.0, 0.82};
  std::vector<double> t_s_values = {0.03};
  double total_time = 315360000.0;
};

// CSV with header T_chk,MTBF,nodes,R,t_s,eff_baseline,eff_easycrash,
// improvement,tau; improvement = (eff_easycrash - eff_baseline)/eff_baseline.
std::string sweep_csv(const SweepSpec& spec);

}  // namespace nvlab::effmodel
