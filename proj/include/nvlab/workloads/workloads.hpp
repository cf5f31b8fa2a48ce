#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvlab/simcache/machine.hpp"

namespace nvlab::workloads {

using simcache::Addr;

struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Restart loaded a state it cannot resume from (iterator out of range or
// similarly corrupt bookkeeping).
struct RestartFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A run left the numerically sane envelope (exploding residual, failure to
// converge within the guard bound).
struct KernelDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RegionKind { Loop, Straight };

// One slice of the main-loop body: either a first-level inner loop or the
// straight-line block between two such loops.
struct RegionInfo {
  int id = 0;
  RegionKind kind = RegionKind::Loop;
  std::string name;
};

struct DataObject {
  std::string name;
  Addr base = 0;
  std::size_t size = 0;
  bool read_only = false;
};

// Every registered object lives across the whole main loop, so the candidate
// set (recomputation may depend on them) is exactly the non-read-only ones.
struct DataObjectRegistry {
  std::vector<DataObject> objects;
  Addr iterator_addr = 0;

  std::vector<DataObject> candidates() const;
  const DataObject* find(const std::string& name) const;
};

struct KernelSpec {
  std::string kernel;  // jacobi2d | cgsolve | kmeans
  long size = 0;
  double tolerance = 0.0;
  std::uint64_t seed = 0;

  static KernelSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// Executable slice of a persistence plan: which objects get flushed, and how
// often per region. For Loop regions the frequency x means "after every x-th
// first-level iteration"; for Straight regions 1 means "at every visit".
// Frequency 0 (or an absent region) means never.
struct FlushSchedule {
  std::vector<std::string> objects;
  std::map<int, int> frequency;

  bool empty() const { return objects.empty() || frequency.empty(); }
};

struct AcceptanceResult {
  bool passed = false;
  long iterations_used = 0;
  double value = 0.0;  // residual or objective, kernel-defined
};

// Everything known at the instant of an injected crash, sampled before the
// snapshot consumes the machine.
struct CrashInfo {
  int region_id = -1;
  long iteration = 0;
  std::uint64_t crash_op_index = 0;  // window-relative
  std::vector<double> object_icr;    // candidate order
  simcache::MemoryImage snapshot;
};

struct RunResult {
  std::optional<AcceptanceResult> completed;
  std::optional<CrashInfo> crashed;
};

// Static shape of a kernel: object registry and region map for a given spec.
struct KernelModel {
  DataObjectRegistry registry;
  std::vector<RegionInfo> regions;
};

// Crash-free reference run statistics, the coordinate system for campaigns
// and planning.
struct GoldenStats {
  KernelSpec spec;
  long baseline_iterations = 0;
  std::uint64_t window_ops = 0;  // dynamic ops in the main loop
  std::vector<std::uint64_t> region_ops;
  std::vector<double> region_fracs;       // region_ops / window_ops
  std::vector<long> region_trips;         // first-level iterations per visit (Loop only)
  double reference_value = 0.0;           // converged residual or objective
  std::uint64_t nvm_writes_total = 0;
  std::uint64_t schedule_flush_writes = 0;  // write-backs caused by plan flushes
  std::uint64_t persist_ops = 0;
  std::uint64_t max_writes_per_persist_op = 0;
  std::vector<std::uint64_t> persist_op_end_ops;  // window op index after each persistence op

  std::string to_json_text() const;
  static GoldenStats from_json_text(const std::string& text);
};

KernelModel describe_kernel(const KernelSpec& spec);

// Crash-free instrumented run; throws KernelDiverged if the kernel fails to
// converge inside the guard bound.
GoldenStats golden_run(const KernelSpec& spec, const simcache::CacheConfig& cache,
                       const FlushSchedule* schedule);

// Runs init (ending in one writeback_all to establish a consistent starting
// image) and the main loop on the given machine. If crash_at is set it names
// a window-relative op index; the op executes and then the crash fires,
// yielding Crashed with the machine consumed. golden supplies the acceptance
// reference for verification and may be null for a reference run.
RunResult run_kernel(const KernelSpec& spec, simcache::SimMachine& machine,
                     const FlushSchedule* schedule, std::optional<std::uint64_t> crash_at,
                     const GoldenStats* golden);

// Re-runs init for non-candidate data, loads candidate objects and the loop
// iterator from the snapshot, resumes at the persisted iteration and runs
// until acceptance or 2x baseline iterations. Throws RestartFault on corrupt
// restart state; KernelDiverged maps to a failed verification downstream.
AcceptanceResult restart_kernel(const KernelSpec& spec, const simcache::MemoryImage& snapshot,
                                const simcache::CacheConfig& cache,
                                const FlushSchedule* schedule, const GoldenStats& golden);

}  // namespace nvlab::workloads
