#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nvlab/crashlab/campaign.hpp"
#include "nvlab/planner/spearman.hpp"
#include "nvlab/simcache/config.hpp"
#include "nvlab/workloads/workloads.hpp"

namespace nvlab::planner {

struct PlannerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ObjectCorrelation {
  std::string name;
  double rho = 0.0;
  double p_value = 1.0;
  bool selected = false;
};

struct CorrelationReport {
  std::vector<ObjectCorrelation> objects;
  // Set when the campaign's success indicator is constant, so ranks carry no
  // signal; everything stays unselected and callers should warn.
  bool degenerate = false;

  std::vector<std::string> selected_names() const;
};

CorrelationReport select_objects(const crashlab::CampaignResult& campaign,
                                 double p_threshold = 0.01);

struct CostModel {
  double flush_cost_per_line = 1.0;
  double op_cost = 1.0;
  double doubling_factor = 2.0;
};

// Overestimated runtime share of flushing `critical_bytes` at `persist_ops`
// planned points: every block is assumed resident-dirty, and the whole
// estimate is doubled.
double estimate_loss(std::uint64_t critical_bytes, std::uint64_t persist_ops,
                     const CostModel& cost, double total_cost,
                     std::size_t line_size);

// Linear interpolation between the every-iteration recomputability c_max
// (x=1) and the never-persisted floor c_k (x -> infinity).
double interpolate_c(double c_k, double c_k_max, double x);

// Y' = sum a'_k * c'_k with a'_k = (a_k + loss_k) / sum_j (a_j + loss_j).
double predict_Y_prime(const std::vector<double>& a,
                       const std::vector<double>& c_prime,
                       const std::vector<double>& loss);

struct RegionOption {
  int region_id = 0;
  long frequency = 0;  // 0 means never; loop regions use x, straight regions 1
  double weight = 0.0;
  double value = 0.0;
  double c_prime = 0.0;
};

struct PersistencePlan {
  struct RegionChoice {
    int region_id = 0;
    workloads::RegionKind kind = workloads::RegionKind::Loop;
    long frequency = 0;
  };

  std::vector<std::string> critical_objects;
  std::vector<RegionChoice> regions;
  double predicted_Y_prime = 0.0;
  double predicted_loss = 0.0;
  bool feasible = false;
  CorrelationReport correlations;

  workloads::FlushSchedule to_schedule() const;
  bool empty_schedule() const;
  std::string to_json_text() const;
  static PersistencePlan from_json_text(const std::string& text);
};

// Exact multiple-choice knapsack on a 0.01% weight grid: one option per
// region, total weight strictly under t_s, value maximized; ties prefer
// lighter plans, then the lexicographically smallest option per region.
PersistencePlan select_regions(const std::vector<std::vector<RegionOption>>& options,
                               double t_s, double tau, const std::vector<double>& c,
                               const std::vector<double>& a);

workloads::FlushSchedule everywhere_plan(const workloads::KernelModel& model,
                                         std::vector<std::string> objects);

struct CMaxResult {
  std::vector<double> c_max;
  std::vector<bool> c_max_has_data;
  std::vector<double> c_base;
  std::vector<bool> c_base_has_data;
  double y_everywhere = 0.0;
  double y_base = 0.0;
};

// Measures per-region recomputability under the everywhere-every-iteration
// plan for the given critical objects. Regions the everywhere campaign never
// hits fall back to its overall Y, mirroring the baseline no-data rule.
// Reuses `baseline` for the c_k side when given, otherwise runs the no-plan
// campaign itself.
CMaxResult measure_c_max(const workloads::KernelSpec& spec,
                         const simcache::CacheConfig& cache,
                         const std::vector<std::string>& critical_objects,
                         long n_tests, std::uint64_t seed,
                         const crashlab::CampaignResult* baseline = nullptr,
                         int jobs = 1);

struct PlanInputs {
  double t_s = 0.03;
  double tau = 0.0;
  double p_threshold = 0.01;
  CostModel cost;
  long cmax_tests = 200;
  std::uint64_t cmax_seed = 1;
  int jobs = 1;
};

std::vector<std::vector<RegionOption>> build_options(
    const workloads::GoldenStats& golden, std::uint64_t critical_bytes,
    const std::vector<double>& c_k, const std::vector<double>& c_max,
    const CostModel& cost, const workloads::KernelModel& model,
    std::size_t line_size = 64);

// Full decision workflow over a finished baseline campaign: correlation
// selection, c_max measurement, option construction, knapsack. When
// `cmax_campaign` is non-null its per-region rates stand in for the
// internally measured ones.
PersistencePlan build_plan(const workloads::KernelSpec& spec,
                           const simcache::CacheConfig& cache,
                           const crashlab::CampaignResult& baseline,
                           const workloads::GoldenStats& golden,
                           const PlanInputs& inputs,
                           const crashlab::CampaignResult* cmax_campaign = nullptr);

}  // namespace nvlab::planner
