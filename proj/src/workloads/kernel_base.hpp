#pragma once

#include <memory>
#include <utility>

#include "nvlab/workloads/workloads.hpp"

namespace nvlab::workloads {

// Bookkeeping shared by all kernels while the main loop runs: region op
// accounting, iteration tracking, the always-on iterator persistence, and
// plan-driven persistence operations.
class RunContext {
 public:
  RunContext(simcache::SimMachine& m, const KernelModel& model, const FlushSchedule* schedule);

  void window_begin();
  void begin_iteration(long it);
  void enter_region(int id);
  // End of one first-level iteration of the current Loop region (0-based).
  void loop_tick(long inner_it);
  // End of the current Straight region: plan persistence point.
  void end_straight_region();
  // End of the main-loop body: stores and persists the iterator for the next
  // iteration regardless of any plan.
  void end_iteration(long next_it);
  void finish();

  int current_region() const { return region_; }
  long current_iteration() const { return iteration_; }

  std::uint64_t window_ops() const;
  const std::vector<std::uint64_t>& region_ops() const { return region_ops_; }
  const std::vector<std::uint64_t>& region_ticks() const { return region_ticks_; }
  long visits() const { return visits_; }
  std::uint64_t schedule_flush_writes() const { return flush_writes_; }
  std::uint64_t persist_ops() const { return persist_ops_; }
  std::uint64_t max_writes_per_persist_op() const { return max_op_writes_; }
  const std::vector<std::uint64_t>& persist_op_end_ops() const { return persist_end_ops_; }

 private:
  void account_to_here();
  void persistence_op();

  simcache::SimMachine& m_;
  const KernelModel& model_;
  Addr iterator_addr_;
  std::vector<std::pair<Addr, std::size_t>> targets_;  // scheduled object ranges
  std::vector<int> freq_;                              // per region, 0 = never

  std::uint64_t window_start_ = 0;
  std::uint64_t mark_ = 0;
  int region_ = -1;
  long iteration_ = 0;
  long visits_ = 0;
  std::vector<std::uint64_t> region_ops_;
  std::vector<std::uint64_t> region_ticks_;
  std::uint64_t flush_writes_ = 0;
  std::uint64_t persist_ops_ = 0;
  std::uint64_t max_op_writes_ = 0;
  std::vector<std::uint64_t> persist_end_ops_;
};

// A restartable kernel. init() writes every object (including the iterator)
// through the machine; main_loop() runs iterations [start_it ..] until its
// convergence test passes or it exceeds max_it, returning the last iteration
// actually executed and whether it converged.
class Kernel {
 public:
  virtual ~Kernel() = default;

  const KernelModel& model() const { return model_; }

  virtual void init(simcache::SimMachine& m) = 0;
  virtual std::pair<long, bool> main_loop(simcache::SimMachine& m, RunContext& ctx, long start_it,
                                          long max_it) = 0;
  virtual AcceptanceResult verify(simcache::SimMachine& m, long iterations_used, bool converged,
                                  const GoldenStats* golden) = 0;

 protected:
  // Line-aligned bump allocation keeps object ranges disjoint at line
  // granularity, so per-object inconsistency rates never alias.
  Addr alloc(const std::string& name, std::size_t bytes, bool read_only);
  void alloc_iterator();
  void add_region(int id, RegionKind kind, const std::string& name);

  KernelModel model_;
  Addr next_addr_ = 0x10000;
};

std::unique_ptr<Kernel> make_kernel(const KernelSpec& spec);

std::unique_ptr<Kernel> make_jacobi2d(const KernelSpec& spec);
std::unique_ptr<Kernel> make_cgsolve(const KernelSpec& spec);
std::unique_ptr<Kernel> make_kmeans(const KernelSpec& spec);

}  // namespace nvlab::workloads
