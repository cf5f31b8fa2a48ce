#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nvlab/simcache/config.hpp"
#include "nvlab/workloads/workloads.hpp"

namespace nvlab::crashlab {

// Crash-test outcome classes, from best to worst: clean recomputation,
// recomputation with extra iterations, interrupted restart, wrong answer.
enum class Outcome { S1, S2, S3, S4 };

const char* to_string(Outcome o);
Outcome outcome_from_string(const std::string& text);

struct InvalidCampaign : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CrashRecord {
  long test_id = 0;
  std::uint64_t crash_op_index = 0;
  int region_id = 0;
  long iteration = 0;
  Outcome outcome = Outcome::S4;
  long extra_iterations = 0;
  std::vector<double> object_icr;
};

// A restart either runs to some verdict or aborts with a fault; both feed
// the classifier.
struct RestartAttempt {
  bool faulted = false;
  workloads::AcceptanceResult result;
};

struct CampaignResult {
  std::vector<CrashRecord> records;
  std::vector<std::string> candidate_names;
  std::string kernel_line;
  std::string regions_line;
  double Y = 0.0;
  std::vector<double> c_k;
  std::vector<bool> c_k_has_data;
  std::vector<long> region_landings;
  std::array<long, 4> outcome_counts{};
  long n_tests = 0;
  bool converged = false;
  std::vector<double> y_history;

  std::string to_csv() const;
  std::string summary_json() const;
  static CampaignResult from_csv(const std::string& text);
};

std::vector<std::uint64_t> sample_crash_points(std::uint64_t total_ops, long n,
                                               std::uint64_t seed);

Outcome classify_outcome(const RestartAttempt& attempt, long baseline_iterations);

bool campaign_converged(const std::vector<double>& history, std::size_t window,
                        double epsilon = 0.05);

// Runs n_tests independent crash tests against the golden reference run that
// produced `golden` (same spec, cache, and plan). Results are byte-identical
// for any jobs count.
CampaignResult run_campaign(const workloads::KernelSpec& spec,
                            const simcache::CacheConfig& cache,
                            const workloads::FlushSchedule* plan, long n_tests,
                            std::uint64_t seed, const workloads::GoldenStats& golden,
                            int jobs = 1);

struct WriteComparison {
  std::uint64_t easycrash_writes = 0;
  std::uint64_t chk_critical_writes = 0;
  std::uint64_t chk_all_candidates_writes = 0;
  std::uint64_t max_writes_per_persist_op = 0;
  std::uint64_t persist_ops = 0;
  std::size_t llc_lines = 0;
};

// Extra NVM writes of a flush plan over a crash-free run, against a model of
// one whole-object checkpoint: every line of the set written once to the
// checkpoint destination plus whatever the copy's cache traffic evicts.
WriteComparison compare_writes(const workloads::KernelSpec& spec,
                               const simcache::CacheConfig& cache,
                               const workloads::FlushSchedule& plan);

}  // namespace nvlab::crashlab
