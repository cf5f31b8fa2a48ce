#include "nvlab/crashlab/campaign.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nvlab/simcache/machine.hpp"
#include "nvlab/workloads/workloads.hpp"

namespace nvlab::crashlab {

namespace {

std::uint64_t checkpoint_writes(const workloads::KernelSpec& spec,
                                const simcache::CacheConfig& cache,
                                const std::vector<std::string>& names) {
  simcache::SimMachine machine(cache);
  workloads::run_kernel(spec, machine, nullptr, std::nullopt, nullptr);
  const workloads::KernelModel model = workloads::describe_kernel(spec);

  const std::uint64_t before = machine.nvm_write_count();
  std::uint64_t dest_writes = 0;
  std::uint8_t probe = 0;
  for (const auto& name : names) {
    const workloads::DataObject* obj = model.registry.find(name);
    if (!obj) throw workloads::SpecError("checkpoint set names unknown object: " + name);
    const std::uint64_t lines =
        (obj->size + cache.line_size - 1) / cache.line_size;
    dest_writes += lines;
    for (std::uint64_t l = 0; l < lines; ++l)
      machine.read(obj->base + l * cache.line_size, {&probe, 1});
  }
  return (machine.nvm_write_count() - before) + dest_writes;
}

}  // namespace

WriteComparison compare_writes(const workloads::KernelSpec& spec,
                               const simcache::CacheConfig& cache,
                               const workloads::FlushSchedule& plan) {
  WriteComparison w;
  w.llc_lines = cache.llc_lines();

  const workloads::GoldenStats with_plan = workloads::golden_run(spec, cache, &plan);
  w.easycrash_writes = with_plan.schedule_flush_writes;
  w.max_writes_per_persist_op = with_plan.max_writes_per_persist_op;
  w.persist_ops = with_plan.persist_ops;

  const workloads::KernelModel model = workloads::describe_kernel(spec);
  std::vector<std::string> all_candidates;
  for (const auto& obj : model.registry.candidates())
    all_candidates.push_back(obj.name);

  w.chk_critical_writes = checkpoint_writes(spec, cache, plan.objects);
  w.chk_all_candidates_writes = checkpoint_writes(spec, cache, all_candidates);
  return w;
}

}  // namespace nvlab::crashlab
