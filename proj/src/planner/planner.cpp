#include "nvlab/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace nvlab::planner {

using json = nlohmann::ordered_json;

std::vector<std::string> CorrelationReport::selected_names() const {
  std::vector<std::string> names;
  for (const auto& obj : objects)
    if (obj.selected) names.push_back(obj.name);
  return names;
}

CorrelationReport select_objects(const crashlab::CampaignResult& campaign,
                                 double p_threshold) {
  const std::size_t n = campaign.records.size();
  std::vector<double> success(n);
  for (std::size_t i = 0; i < n; ++i)
    success[i] = campaign.records[i].outcome == crashlab::Outcome::S1 ? 1.0 : 0.0;

  CorrelationReport report;
  report.degenerate =
      std::adjacent_find(success.begin(), success.end(),
                         [](double a, double b) { return a != b; }) == success.end();

  std::vector<double> icr(n);
  for (std::size_t o = 0; o < campaign.candidate_names.size(); ++o) {
    for (std::size_t i = 0; i < n; ++i) icr[i] = campaign.records[i].object_icr[o];
    const SpearmanResult s = spearman(icr, success);
    ObjectCorrelation entry;
    entry.name = campaign.candidate_names[o];
    entry.rho = s.rho;
    entry.p_value = s.p_value;
    entry.selected = !report.degenerate && s.rho < 0.0 && s.p_value < p_threshold;
    report.objects.push_back(std::move(entry));
  }
  return report;
}

double estimate_loss(std::uint64_t critical_bytes, std::uint64_t persist_ops,
                     const CostModel& cost, double total_cost,
                     std::size_t line_size) {
  if (total_cost <= 0.0) throw PlannerError("loss estimate needs a positive total cost");
  if (line_size == 0) throw PlannerError("loss estimate needs a positive line size");
  const auto lines = static_cast<double>((critical_bytes + line_size - 1) / line_size);
  return cost.doubling_factor * cost.flush_cost_per_line * lines *
         static_cast<double>(persist_ops) / total_cost;
}

double interpolate_c(double c_k, double c_k_max, double x) {
  if (!(0.0 <= c_k && c_k <= c_k_max && c_k_max <= 1.0))
    throw PlannerError("recomputability interpolation needs 0 <= c <= c_max <= 1");
  if (x < 1.0) throw PlannerError("persistence frequency must be at least 1");
  if (x == 1.0) return c_k_max;
  return std::clamp((c_k_max - c_k) / x + c_k, c_k, c_k_max);
}

double predict_Y_prime(const std::vector<double>& a,
                       const std::vector<double>& c_prime,
                       const std::vector<double>& loss) {
  if (a.size() != c_prime.size() || a.size() != loss.size())
    throw PlannerError("per-region vectors must have matching lengths");
  double a_sum = 0.0;
  for (const double v : a) a_sum += v;
  if (std::abs(a_sum - 1.0) > 1e-6)
    throw PlannerError("region shares must sum to 1");

  double denom = 0.0;
  double numer = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double share = a[k] + loss[k];
    denom += share;
    numer += share * c_prime[k];
  }
  return numer / denom;
}

namespace {

long capacity_units(double t_s, double grid) {
  long units = static_cast<long>(std::floor(t_s / grid));
  while (units > 0 && static_cast<double>(units) * grid >= t_s) --units;
  while (static_cast<double>(units + 1) * grid < t_s) ++units;
  return std::max(0L, units);
}

long weight_units(double weight, double grid) {
  if (weight <= 0.0) return 0;
  return static_cast<long>(std::ceil(weight / grid - 1e-9));
}

struct DpCell {
  bool reachable = false;
  double value = 0.0;
  double true_weight = 0.0;
  std::vector<std::size_t> choice;
};

bool improves(const DpCell& fresh, const DpCell& incumbent) {
  if (!incumbent.reachable) return true;
  if (fresh.value != incumbent.value) return fresh.value > incumbent.value;
  if (fresh.true_weight != incumbent.true_weight)
    return fresh.true_weight < incumbent.true_weight;
  return fresh.choice < incumbent.choice;
}

}  // namespace

PersistencePlan select_regions(const std::vector<std::vector<RegionOption>>& options,
                               double t_s, double tau, const std::vector<double>& c,
                               const std::vector<double>& a) {
  const std::size_t regions = options.size();
  if (c.size() != regions || a.size() != regions)
    throw PlannerError("per-region vectors must have matching lengths");
  for (const auto& region_options : options) {
    const bool has_never =
        std::any_of(region_options.begin(), region_options.end(),
                    [](const RegionOption& o) { return o.frequency == 0; });
    if (!has_never) throw PlannerError("every region needs a never-persist option");
  }

  constexpr double kGrid = 1e-4;
  const long cap = capacity_units(t_s, kGrid);

  std::vector<DpCell> dp(static_cast<std::size_t>(cap) + 1);
  dp[0].reachable = true;
  for (std::size_t k = 0; k < regions; ++k) {
    std::vector<DpCell> next(dp.size());
    for (std::size_t u = 0; u < dp.size(); ++u) {
      if (!dp[u].reachable) continue;
      for (std::size_t oi = 0; oi < options[k].size(); ++oi) {
        const RegionOption& opt = options[k][oi];
        if (opt.region_id != static_cast<int>(k))
          throw PlannerError("region options are out of order");
        const long units = weight_units(opt.weight, kGrid);
        if (static_cast<long>(u) + units > cap) continue;
        DpCell cell = dp[u];
        cell.value += opt.value;
        cell.true_weight += opt.weight;
        cell.choice.push_back(oi);
        auto& slot = next[u + static_cast<std::size_t>(units)];
        if (improves(cell, slot)) slot = std::move(cell);
      }
    }
    dp = std::move(next);
  }

  const DpCell* best = nullptr;
  for (const auto& cell : dp)
    if (cell.reachable && (!best || improves(cell, *best))) best = &cell;
  if (!best) throw PlannerError("knapsack found no selection");

  PersistencePlan plan;
  std::vector<double> c_prime(regions);
  std::vector<double> loss(regions, 0.0);
  for (std::size_t k = 0; k < regions; ++k) {
    const RegionOption& opt = options[k][best->choice[k]];
    PersistencePlan::RegionChoice choice;
    choice.region_id = static_cast<int>(k);
    choice.frequency = opt.frequency;
    plan.regions.push_back(choice);
    c_prime[k] = opt.frequency == 0 ? c[k] : opt.c_prime;
    loss[k] = opt.weight;
    plan.predicted_loss += opt.weight;
  }
  plan.predicted_Y_prime = predict_Y_prime(a, c_prime, loss);
  plan.feasible = plan.predicted_Y_prime > tau;
  return plan;
}

workloads::FlushSchedule everywhere_plan(const workloads::KernelModel& model,
                                         std::vector<std::string> objects) {
  workloads::FlushSchedule plan;
  plan.objects = std::move(objects);
  for (const auto& region : model.regions) plan.frequency[region.id] = 1;
  return plan;
}

CMaxResult measure_c_max(const workloads::KernelSpec& spec,
                         const simcache::CacheConfig& cache,
                         const std::vector<std::string>& critical_objects,
                         long n_tests, std::uint64_t seed,
                         const crashlab::CampaignResult* baseline, int jobs) {
  CMaxResult result;

  crashlab::CampaignResult base_local;
  if (!baseline) {
    const workloads::GoldenStats golden = workloads::golden_run(spec, cache, nullptr);
    base_local =
        crashlab::run_campaign(spec, cache, nullptr, n_tests, seed, golden, jobs);
    baseline = &base_local;
  }
  result.c_base = baseline->c_k;
  result.c_base_has_data.assign(baseline->c_k_has_data.begin(),
                                baseline->c_k_has_data.end());
  result.y_base = baseline->Y;

  if (critical_objects.empty()) {
    result.c_max = result.c_base;
    result.c_max_has_data = result.c_base_has_data;
    result.y_everywhere = result.y_base;
    return result;
  }

  const workloads::KernelModel model = workloads::describe_kernel(spec);
  const workloads::FlushSchedule plan = everywhere_plan(model, critical_objects);
  const workloads::GoldenStats golden = workloads::golden_run(spec, cache, &plan);
  const crashlab::CampaignResult campaign =
      crashlab::run_campaign(spec, cache, &plan, n_tests, seed, golden, jobs);
  result.c_max = campaign.c_k;
  result.c_max_has_data.assign(campaign.c_k_has_data.begin(),
                               campaign.c_k_has_data.end());
  result.y_everywhere = campaign.Y;
  return result;
}

std::vector<std::vector<RegionOption>> build_options(
    const workloads::GoldenStats& golden, std::uint64_t critical_bytes,
    const std::vector<double>& c_k, const std::vector<double>& c_max,
    const CostModel& cost, const workloads::KernelModel& model,
    std::size_t line_size) {
  const std::size_t regions = model.regions.size();
  if (c_k.size() != regions || c_max.size() != regions ||
      golden.region_trips.size() != regions)
    throw PlannerError("per-region vectors must have matching lengths");

  const double total_cost =
      static_cast<double>(golden.window_ops) * cost.op_cost;
  const auto baseline = static_cast<std::uint64_t>(golden.baseline_iterations);

  std::vector<std::vector<RegionOption>> options(regions);
  for (std::size_t k = 0; k < regions; ++k) {
    // Noise can measure c_max a hair under c_k; persisting is never modeled
    // as hurting, so the interpolation ceiling is clamped up to c_k and the
    // option's value collapses to zero.
    const double ceiling = std::max(c_k[k], c_max[k]);

    RegionOption never;
    never.region_id = static_cast<int>(k);
    never.c_prime = c_k[k];
    options[k].push_back(never);

    const double a_k = golden.region_fracs[k];
    if (model.regions[k].kind == workloads::RegionKind::Straight) {
      RegionOption every;
      every.region_id = static_cast<int>(k);
      every.frequency = 1;
      every.weight = estimate_loss(critical_bytes, baseline, cost, total_cost, line_size);
      every.c_prime = ceiling;
      every.value = a_k * (every.c_prime - c_k[k]);
      options[k].push_back(every);
      continue;
    }

    const auto trips = static_cast<std::uint64_t>(golden.region_trips[k]);
    for (const std::uint64_t x : {16ULL, 8ULL, 4ULL, 2ULL, 1ULL}) {
      const std::uint64_t per_visit = trips / x;
      if (per_visit == 0) continue;
      RegionOption opt;
      opt.region_id = static_cast<int>(k);
      opt.frequency = static_cast<long>(x);
      opt.weight = estimate_loss(critical_bytes, baseline * per_visit, cost,
                                 total_cost, line_size);
      opt.c_prime = interpolate_c(c_k[k], ceiling, static_cast<double>(x));
      opt.value = a_k * (opt.c_prime - c_k[k]);
      options[k].push_back(opt);
    }
  }
  return options;
}

PersistencePlan build_plan(const workloads::KernelSpec& spec,
                           const simcache::CacheConfig& cache,
                           const crashlab::CampaignResult& baseline,
                           const workloads::GoldenStats& golden,
                           const PlanInputs& inputs,
                           const crashlab::CampaignResult* cmax_campaign) {
  const workloads::KernelModel model = workloads::describe_kernel(spec);
  const CorrelationReport report = select_objects(baseline, inputs.p_threshold);
  const std::vector<std::string> selected = report.selected_names();

  std::uint64_t critical_bytes = 0;
  for (const auto& name : selected) {
    const workloads::DataObject* obj = model.registry.find(name);
    if (!obj) throw PlannerError("selected object has no registry entry: " + name);
    critical_bytes += obj->size;
  }

  std::vector<double> c_max;
  if (cmax_campaign) {
    if (cmax_campaign->c_k.size() != model.regions.size())
      throw PlannerError("supplied c_max campaign has the wrong region count");
    c_max = cmax_campaign->c_k;
  } else {
    const CMaxResult measured =
        measure_c_max(spec, cache, selected, inputs.cmax_tests, inputs.cmax_seed,
                      &baseline, inputs.jobs);
    c_max = measured.c_max;
  }

  const auto options = build_options(golden, critical_bytes, baseline.c_k, c_max,
                                     inputs.cost, model, cache.line_size);
  PersistencePlan plan = select_regions(options, inputs.t_s, inputs.tau,
                                        baseline.c_k, golden.region_fracs);
  plan.critical_objects = selected;
  plan.correlations = report;
  for (std::size_t k = 0; k < plan.regions.size(); ++k)
    plan.regions[k].kind = model.regions[k].kind;
  return plan;
}

workloads::FlushSchedule PersistencePlan::to_schedule() const {
  workloads::FlushSchedule schedule;
  schedule.objects = critical_objects;
  for (const auto& region : regions)
    if (region.frequency > 0) schedule.frequency[region.region_id] = region.frequency;
  return schedule;
}

bool PersistencePlan::empty_schedule() const { return to_schedule().empty(); }

std::string PersistencePlan::to_json_text() const {
  json doc;
  doc["critical_objects"] = critical_objects;
  json region_rows = json::array();
  for (const auto& region : regions) {
    json row;
    row["region_id"] = region.region_id;
    row["kind"] = region.kind == workloads::RegionKind::Loop ? "loop" : "straight";
    row["frequency"] = region.frequency;
    region_rows.push_back(row);
  }
  doc["regions"] = region_rows;
  doc["predicted_Y_prime"] = predicted_Y_prime;
  doc["predicted_loss"] = predicted_loss;
  doc["feasible"] = feasible;
  json corr = json::array();
  for (const auto& obj : correlations.objects) {
    json row;
    row["name"] = obj.name;
    row["rho"] = obj.rho;
    row["p_value"] = obj.p_value;
    row["selected"] = obj.selected;
    corr.push_back(row);
  }
  doc["correlations"] = corr;
  doc["degenerate_selection"] = correlations.degenerate;
  return doc.dump(2) + "\n";
}

PersistencePlan PersistencePlan::from_json_text(const std::string& text) {
  PersistencePlan plan;
  try {
    const json doc = json::parse(text);
    plan.critical_objects =
        doc.at("critical_objects").get<std::vector<std::string>>();
    for (const auto& row : doc.at("regions")) {
      RegionChoice choice;
      choice.region_id = row.at("region_id").get<int>();
      const auto kind = row.at("kind").get<std::string>();
      if (kind != "loop" && kind != "straight")
        throw PlannerError("unknown region kind: " + kind);
      choice.kind = kind == "loop" ? workloads::RegionKind::Loop
                                   : workloads::RegionKind::Straight;
      choice.frequency = row.at("frequency").get<long>();
      if (choice.frequency < 0)
        throw PlannerError("region frequency cannot be negative");
      plan.regions.push_back(choice);
    }
    plan.predicted_Y_prime = doc.at("predicted_Y_prime").get<double>();
    plan.predicted_loss = doc.at("predicted_loss").get<double>();
    plan.feasible = doc.at("feasible").get<bool>();
    if (doc.contains("correlations")) {
      for (const auto& row : doc.at("correlations")) {
        ObjectCorrelation obj;
        obj.name = row.at("name").get<std::string>();
        obj.rho = row.at("rho").get<double>();
        obj.p_value = row.at("p_value").get<double>();
        obj.selected = row.at("selected").get<bool>();
        plan.correlations.objects.push_back(std::move(obj));
      }
    }
    if (doc.contains("degenerate_selection"))
      plan.correlations.degenerate = doc.at("degenerate_selection").get<bool>();
  } catch (const json::exception& e) {
    throw PlannerError(std::string("plan JSON is malformed: ") + e.what());
  }
  return plan;
}

}  // namespace nvlab::planner
