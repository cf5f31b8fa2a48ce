#include "nvlab/workloads/workloads.hpp"

#include <json.hpp>

#include "kernel_base.hpp"

namespace nvlab::workloads {

using json = nlohmann::ordered_json;
using simcache::SimMachine;

KernelSpec KernelSpec::from_json_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    KernelSpec spec;
    spec.kernel = j.at("kernel").get<std::string>();
    spec.size = j.at("size").get<long>();
    spec.tolerance = j.at("tolerance").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    return spec;
  } catch (const json::exception& e) {
    throw SpecError(std::string("kernel spec: ") + e.what());
  }
}

std::string KernelSpec::to_json_text() const {
  json j;
  j["kernel"] = kernel;
  j["size"] = size;
  j["tolerance"] = tolerance;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

std::string GoldenStats::to_json_text() const {
  json j;
  j["spec"] = json::parse(spec.to_json_text());
  j["baseline_iterations"] = baseline_iterations;
  j["window_ops"] = window_ops;
  j["region_ops"] = region_ops;
  j["region_fracs"] = region_fracs;
  j["region_trips"] = region_trips;
  j["reference_value"] = reference_value;
  j["nvm_writes_total"] = nvm_writes_total;
  j["schedule_flush_writes"] = schedule_flush_writes;
  j["persist_ops"] = persist_ops;
  j["max_writes_per_persist_op"] = max_writes_per_persist_op;
  j["persist_op_end_ops"] = persist_op_end_ops;
  return j.dump(2) + "\n";
}

GoldenStats GoldenStats::from_json_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    GoldenStats g;
    g.spec = KernelSpec::from_json_text(j.at("spec").dump());
    g.baseline_iterations = j.at("baseline_iterations").get<long>();
    g.window_ops = j.at("window_ops").get<std::uint64_t>();
    g.region_ops = j.at("region_ops").get<std::vector<std::uint64_t>>();
    g.region_fracs = j.at("region_fracs").get<std::vector<double>>();
    g.region_trips = j.at("region_trips").get<std::vector<long>>();
    g.reference_value = j.at("reference_value").get<double>();
    g.nvm_writes_total = j.at("nvm_writes_total").get<std::uint64_t>();
    g.schedule_flush_writes = j.at("schedule_flush_writes").get<std::uint64_t>();
    g.persist_ops = j.at("persist_ops").get<std::uint64_t>();
    g.max_writes_per_persist_op = j.at("max_writes_per_persist_op").get<std::uint64_t>();
    g.persist_op_end_ops = j.at("persist_op_end_ops").get<std::vector<std::uint64_t>>();
    return g;
  } catch (const json::exception& e) {
    throw SpecError(std::string("golden stats: ") + e.what());
  }
}

KernelModel describe_kernel(const KernelSpec& spec) { return make_kernel(spec)->model(); }

namespace {

constexpr long kGoldenIterationGuard = 100000;

// Shared drive loop behind golden_run, run_kernel and restart_kernel. The
// machine must already hold a consistent initial or restart image; start_it
// names the first iteration to execute.
RunResult drive(Kernel& kernel, SimMachine& machine, RunContext& ctx, long start_it, long max_it,
                const GoldenStats* golden, GoldenStats* stats_out) {
  const std::uint64_t window_writes_start = machine.nvm_write_count();
  ctx.window_begin();
  try {
    auto [used, converged] = kernel.main_loop(machine, ctx, start_it, max_it);
    ctx.finish();
    if (stats_out) {
      stats_out->baseline_iterations = used;
      stats_out->window_ops = ctx.window_ops();
      stats_out->region_ops = ctx.region_ops();
      stats_out->region_fracs.clear();
      for (const auto ops : ctx.region_ops())
        stats_out->region_fracs.push_back(static_cast<double>(ops) /
                                          static_cast<double>(ctx.window_ops()));
      stats_out->region_trips.clear();
      const auto& regions = kernel.model().regions;
      for (std::size_t k = 0; k < regions.size(); ++k) {
        if (regions[k].kind == RegionKind::Straight) {
          stats_out->region_trips.push_back(1);
        } else {
          const auto ticks = ctx.region_ticks()[k];
          if (ctx.visits() == 0 || ticks % static_cast<std::uint64_t>(ctx.visits()) != 0)
            throw SpecError("loop region tick count is not uniform per visit");
          stats_out->region_trips.push_back(
              static_cast<long>(ticks / static_cast<std::uint64_t>(ctx.visits())));
        }
      }
      stats_out->nvm_writes_total = machine.nvm_write_count() - window_writes_start;
      stats_out->schedule_flush_writes = ctx.schedule_flush_writes();
      stats_out->persist_ops = ctx.persist_ops();
      stats_out->max_writes_per_persist_op = ctx.max_writes_per_persist_op();
      stats_out->persist_op_end_ops = ctx.persist_op_end_ops();
    }
    RunResult out;
    out.completed = kernel.verify(machine, used, converged, golden);
    if (stats_out) stats_out->reference_value = out.completed->value;
    return out;
  } catch (const simcache::CrashInterrupt&) {
    CrashInfo info;
    info.region_id = ctx.current_region();
    info.iteration = ctx.current_iteration();
    info.crash_op_index = ctx.window_ops() - 1;
    for (const auto& obj : kernel.model().registry.candidates())
      info.object_icr.push_back(machine.inconsistent_rate(obj.base, obj.size));
    info.snapshot = std::move(machine).crash_snapshot();
    RunResult out;
    out.crashed = std::move(info);
    return out;
  }
}

}  // namespace

RunResult run_kernel(const KernelSpec& spec, SimMachine& machine, const FlushSchedule* schedule,
                     std::optional<std::uint64_t> crash_at, const GoldenStats* golden) {
  auto kernel = make_kernel(spec);
  kernel->init(machine);
  machine.writeback_all(true);
  const long start_it = machine.read_i64(kernel->model().registry.iterator_addr);
  const long max_it = golden ? 2 * golden->baseline_iterations : kGoldenIterationGuard;
  RunContext ctx(machine, kernel->model(), schedule);
  if (crash_at) machine.arm_crash(machine.op_count() + *crash_at + 1);
  return drive(*kernel, machine, ctx, start_it, max_it, golden, nullptr);
}

GoldenStats golden_run(const KernelSpec& spec, const simcache::CacheConfig& cache,
                       const FlushSchedule* schedule) {
  auto kernel = make_kernel(spec);
  SimMachine machine(cache);
  kernel->init(machine);
  machine.writeback_all(true);
  const long start_it = machine.read_i64(kernel->model().registry.iterator_addr);
  GoldenStats stats;
  stats.spec = spec;
  RunContext ctx(machine, kernel->model(), schedule);
  const RunResult result =
      drive(*kernel, machine, ctx, start_it, kGoldenIterationGuard, nullptr, &stats);
  if (!result.completed || !result.completed->passed)
    throw KernelDiverged("crash-free reference run failed its own acceptance check");
  return stats;
}

AcceptanceResult restart_kernel(const KernelSpec& spec, const simcache::MemoryImage& snapshot,
                                const simcache::CacheConfig& cache, const FlushSchedule* schedule,
                                const GoldenStats& golden) {
  auto kernel = make_kernel(spec);
  SimMachine machine(cache);
  kernel->init(machine);
  machine.writeback_all(true);

  const auto& registry = kernel->model().registry;
  const std::size_t line = cache.line_size;
  auto load_lines = [&](Addr base, std::size_t size) {
    const Addr first = base / line * line;
    const Addr last = (base + size + line - 1) / line * line;
    for (Addr a = first; a < last; a += line)
      if (const auto* bytes = snapshot.find_line(a)) machine.preload(a, *bytes);
  };
  for (const auto& obj : registry.candidates()) load_lines(obj.base, obj.size);
  load_lines(registry.iterator_addr, 8);

  const long start_it = machine.read_i64(registry.iterator_addr);
  if (start_it < 1 || start_it > golden.baseline_iterations + 1)
    throw RestartFault("restart iterator " + std::to_string(start_it) + " out of range");

  RunContext ctx(machine, kernel->model(), schedule);
  const RunResult result = drive(*kernel, machine, ctx, start_it,
                                 2 * golden.baseline_iterations, &golden, nullptr);
  return *result.completed;
}

}  // namespace nvlab::workloads
