#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nvlab/crashlab/campaign.hpp"
#include "nvlab/effmodel/effmodel.hpp"
#include "nvlab/planner/planner.hpp"
#include "nvlab/simcache/config.hpp"
#include "nvlab/workloads/workloads.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace nvlab;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitStale = 3;
constexpr int kExitDegenerate = 4;

struct ConfigIssue : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StaleInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  workloads::KernelSpec spec;
  simcache::CacheConfig cache = simcache::CacheConfig::tiny();
  std::uint64_t seed = 1001;
  long n_tests = 200;
  int jobs = 1;
  std::string out = "out";
  planner::PlanInputs plan;
  std::optional<double> tau_t_chk;
  effmodel::SweepSpec sweep;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigIssue("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string read_pipeline_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw StaleInput("missing pipeline file " + path +
                     "; run the earlier steps first");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path().empty()
          ? "."
          : std::filesystem::path(path).parent_path().string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigIssue("cannot write " + path);
  out << text;
}

simcache::CacheConfig cache_of(const std::string& value) {
  if (value == "tiny") return simcache::CacheConfig::tiny();
  if (value == "desktop") return simcache::CacheConfig::desktop();
  return simcache::CacheConfig::from_json_text(read_file(value));
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  cfg.spec.kernel = "jacobi2d";
  cfg.spec.size = 64;
  cfg.spec.tolerance = 1e-4;
  cfg.spec.seed = 7;
  if (path.empty()) return cfg;

  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigIssue(std::string("config JSON is malformed: ") + e.what());
  }

  try {
    if (doc.contains("kernel")) {
      const auto& k = doc.at("kernel");
      cfg.spec = workloads::KernelSpec::from_json_text(
          k.is_string() ? read_file(k.get<std::string>()) : k.dump());
    }
    if (doc.contains("cache")) cfg.cache = cache_of(doc.at("cache").get<std::string>());
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("n_tests")) cfg.n_tests = doc.at("n_tests").get<long>();
    if (doc.contains("jobs")) cfg.jobs = doc.at("jobs").get<int>();
    if (doc.contains("out")) cfg.out = doc.at("out").get<std::string>();

    if (doc.contains("plan")) {
      const auto& p = doc.at("plan");
      if (p.contains("t_s")) cfg.plan.t_s = p.at("t_s").get<double>();
      if (p.contains("tau")) cfg.plan.tau = p.at("tau").get<double>();
      if (p.contains("tau_t_chk")) cfg.tau_t_chk = p.at("tau_t_chk").get<double>();
      if (p.contains("p_threshold"))
        cfg.plan.p_threshold = p.at("p_threshold").get<double>();
      if (p.contains("cmax_tests")) cfg.plan.cmax_tests = p.at("cmax_tests").get<long>();
      if (p.contains("cmax_seed"))
        cfg.plan.cmax_seed = p.at("cmax_seed").get<std::uint64_t>();
      if (p.contains("cost")) {
        const auto& c = p.at("cost");
        if (c.contains("flush_cost_per_line"))
          cfg.plan.cost.flush_cost_per_line = c.at("flush_cost_per_line").get<double>();
        if (c.contains("op_cost")) cfg.plan.cost.op_cost = c.at("op_cost").get<double>();
        if (c.contains("doubling_factor"))
          cfg.plan.cost.doubling_factor = c.at("doubling_factor").get<double>();
      }
    }

    if (doc.contains("efficiency")) {
      const auto& e = doc.at("efficiency");
      if (e.contains("t_chk_values"))
        cfg.sweep.t_chk_values = e.at("t_chk_values").get<std::vector<double>>();
      if (e.contains("base_mtbf")) cfg.sweep.base_mtbf = e.at("base_mtbf").get<double>();
      if (e.contains("base_nodes")) cfg.sweep.base_nodes = e.at("base_nodes").get<long>();
      if (e.contains("node_counts"))
        cfg.sweep.node_counts = e.at("node_counts").get<std::vector<long>>();
      if (e.contains("r_values"))
        cfg.sweep.r_values = e.at("r_values").get<std::vector<double>>();
      if (e.contains("t_s_values"))
        cfg.sweep.t_s_values = e.at("t_s_values").get<std::vector<double>>();
      if (e.contains("total_time"))
        cfg.sweep.total_time = e.at("total_time").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigIssue(std::string("config field has the wrong shape: ") + e.what());
  }
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out) / name).string();
}

// The stored golden file must match a fresh run of the configured kernel on
// the configured cache; any drift means downstream artifacts describe a
// different experiment.
workloads::GoldenStats load_fresh_golden(const RunConfig& cfg) {
  const std::string stored = read_pipeline_file(out_path(cfg, "golden.json"));
  const workloads::GoldenStats fresh =
      workloads::golden_run(cfg.spec, cfg.cache, nullptr);
  if (stored != fresh.to_json_text())
    throw StaleInput("golden.json is stale for this kernel and cache; re-run golden");
  return fresh;
}

int cmd_golden(const RunConfig& cfg) {
  const workloads::GoldenStats golden =
      workloads::golden_run(cfg.spec, cfg.cache, nullptr);
  write_file(out_path(cfg, "golden.json"), golden.to_json_text());
  std::cout << "golden: " << cfg.spec.kernel << " converged in "
            << golden.baseline_iterations << " iterations, " << golden.window_ops
            << " window ops -> " << out_path(cfg, "golden.json") << "\n";
  return kExitOk;
}

int cmd_campaign(const RunConfig& cfg, const std::string& plan_arg) {
  const workloads::GoldenStats golden = load_fresh_golden(cfg);

  std::optional<workloads::FlushSchedule> schedule;
  if (!plan_arg.empty()) {
    if (plan_arg == "everywhere") {
      const workloads::KernelModel model = workloads::describe_kernel(cfg.spec);
      std::vector<std::string> names;
      for (const auto& obj : model.registry.candidates()) names.push_back(obj.name);
      schedule = planner::everywhere_plan(model, std::move(names));
    } else {
      schedule = planner::PersistencePlan::from_json_text(read_file(plan_arg))
                     .to_schedule();
    }
  }

  const workloads::GoldenStats run_golden =
      schedule ? workloads::golden_run(cfg.spec, cfg.cache, &*schedule) : golden;
  const crashlab::CampaignResult campaign = crashlab::run_campaign(
      cfg.spec, cfg.cache, schedule ? &*schedule : nullptr, cfg.n_tests, cfg.seed,
      run_golden, cfg.jobs);

  write_file(out_path(cfg, "campaign.csv"), campaign.to_csv());
  write_file(out_path(cfg, "summary.json"), campaign.summary_json());
  std::cout << "campaign: " << campaign.n_tests << " tests, Y=" << campaign.Y
            << " -> " << out_path(cfg, "campaign.csv") << "\n";
  return kExitOk;
}

int cmd_plan(const RunConfig& cfg, const std::string& campaign_path,
             const std::string& cmax_path) {
  const workloads::GoldenStats golden = load_fresh_golden(cfg);

  const std::string baseline_path =
      campaign_path.empty() ? out_path(cfg, "campaign.csv") : campaign_path;
  const crashlab::CampaignResult baseline =
      crashlab::CampaignResult::from_csv(read_pipeline_file(baseline_path));
  const std::string expected_kernel = json::parse(cfg.spec.to_json_text()).dump();
  if (baseline.kernel_line != expected_kernel)
    throw StaleInput("campaign.csv was produced for a different kernel spec");

  std::optional<crashlab::CampaignResult> cmax;
  if (!cmax_path.empty()) {
    cmax = crashlab::CampaignResult::from_csv(read_pipeline_file(cmax_path));
    if (cmax->kernel_line != expected_kernel)
      throw StaleInput("c_max campaign was produced for a different kernel spec");
  }

  planner::PlanInputs inputs = cfg.plan;
  if (cfg.tau_t_chk) {
    effmodel::EfficiencyParams params =
        effmodel::EfficiencyParams::make(cfg.sweep.base_mtbf, *cfg.tau_t_chk);
    params.total_time = cfg.sweep.total_time;
    params.t_s = inputs.t_s;
    const effmodel::TauResult tau = effmodel::derive_tau(params);
    inputs.tau = tau.tau;
  }

  const planner::PersistencePlan plan = planner::build_plan(
      cfg.spec, cfg.cache, baseline, golden, inputs, cmax ? &*cmax : nullptr);
  write_file(out_path(cfg, "plan.json"), plan.to_json_text());

  if (plan.correlations.degenerate) {
    std::cerr << "plan: campaign outcomes show no variation, so correlation "
                 "ranking carries no signal; wrote an empty plan\n";
    std::cout << "plan: degenerate campaign -> " << out_path(cfg, "plan.json")
              << "\n";
    return kExitDegenerate;
  }

  std::cout << "plan: " << plan.critical_objects.size()
            << " critical objects, predicted Y'=" << plan.predicted_Y_prime
            << (plan.feasible ? "" : " (infeasible)") << " -> "
            << out_path(cfg, "plan.json") << "\n";
  return kExitOk;
}

int cmd_efficiency(const RunConfig& cfg, double r_flag,
                   const std::string& from_plan, const std::string& from_summary) {
  effmodel::SweepSpec sweep = cfg.sweep;
  if (r_flag >= 0.0) {
    sweep.r_values = {r_flag};
  } else if (!from_plan.empty()) {
    const auto plan = planner::PersistencePlan::from_json_text(read_file(from_plan));
    sweep.r_values = {plan.predicted_Y_prime};
  } else if (!from_summary.empty()) {
    try {
      sweep.r_values = {json::parse(read_file(from_summary)).at("Y").get<double>()};
    } catch (const json::exception& e) {
      throw ConfigIssue(std::string("summary JSON is malformed: ") + e.what());
    }
  }

  const std::string csv = effmodel::sweep_csv(sweep);
  write_file(out_path(cfg, "efficiency.csv"), csv);
  std::cout << "efficiency: " << sweep.t_chk_values.size() << " checkpoint costs x "
            << sweep.node_counts.size() << " node counts x " << sweep.r_values.size()
            << " R values -> " << out_path(cfg, "efficiency.csv") << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crash-recomputability laboratory pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration");

  std::optional<std::uint64_t> seed_flag;
  std::optional<long> n_tests_flag;
  std::optional<int> jobs_flag;
  std::optional<std::string> out_flag;
  app.add_option("--seed", seed_flag, "campaign RNG seed");
  app.add_option("--n-tests", n_tests_flag, "crash tests per campaign");
  app.add_option("--jobs", jobs_flag, "parallel campaign workers");
  app.add_option("--out", out_flag, "output directory");

  auto* golden_cmd = app.add_subcommand("golden", "run the crash-free reference");

  auto* campaign_cmd = app.add_subcommand("campaign", "run a crash-injection campaign");
  std::string plan_arg;
  campaign_cmd->add_option(
      "--plan", plan_arg, "plan JSON path, or 'everywhere' for all candidates");

  auto* plan_cmd = app.add_subcommand("plan", "build a persistence plan");
  std::string campaign_path;
  std::string cmax_path;
  plan_cmd->add_option("--campaign", campaign_path, "baseline campaign CSV");
  plan_cmd->add_option("--cmax", cmax_path, "everywhere-campaign CSV for ceilings");

  auto* eff_cmd = app.add_subcommand("efficiency", "emit the system-efficiency sweep");
  double r_flag = -1.0;
  std::string from_plan;
  std::string from_summary;
  eff_cmd->add_option("--R", r_flag, "recomputability for the sweep");
  eff_cmd->add_option("--from-plan", from_plan, "take R from a plan's predicted Y'");
  eff_cmd->add_option("--from-summary", from_summary, "take R from a campaign summary's Y");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    if (n_tests_flag) cfg.n_tests = *n_tests_flag;
    if (jobs_flag) cfg.jobs = *jobs_flag;
    if (out_flag) cfg.out = *out_flag;

    if (golden_cmd->parsed()) return cmd_golden(cfg);
    if (campaign_cmd->parsed()) return cmd_campaign(cfg, plan_arg);
    if (plan_cmd->parsed()) return cmd_plan(cfg, campaign_path, cmax_path);
    if (eff_cmd->parsed())
      return cmd_efficiency(cfg, r_flag, from_plan, from_summary);
    std::cerr << "error: no subcommand selected\n";
    return kExitConfig;
  } catch (const StaleInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStale;
  } catch (const ConfigIssue& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const workloads::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const simcache::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const planner::PlannerError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const effmodel::EffModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const crashlab::InvalidCampaign& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
