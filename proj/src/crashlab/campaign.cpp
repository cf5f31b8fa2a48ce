#include "nvlab/crashlab/campaign.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nvlab/rng.hpp"
#include "nvlab/simcache/machine.hpp"

namespace nvlab::crashlab {

using json = nlohmann::ordered_json;

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::S1: return "S1";
    case Outcome::S2: return "S2";
    case Outcome::S3: return "S3";
    case Outcome::S4: return "S4";
  }
  return "S4";
}

Outcome outcome_from_string(const std::string& text) {
  if (text == "S1") return Outcome::S1;
  if (text == "S2") return Outcome::S2;
  if (text == "S3") return Outcome::S3;
  if (text == "S4") return Outcome::S4;
  throw InvalidCampaign("unknown outcome label: " + text);
}

std::vector<std::uint64_t> sample_crash_points(std::uint64_t total_ops, long n,
                                               std::uint64_t seed) {
  if (total_ops < 1) throw InvalidCampaign("crash window is empty");
  if (n < 1) throw InvalidCampaign("campaign needs at least one test");
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> points(static_cast<std::size_t>(n));
  for (auto& p : points) p = bounded_draw(rng, total_ops);
  return points;
}

Outcome classify_outcome(const RestartAttempt& attempt, long baseline_iterations) {
  if (attempt.faulted) return Outcome::S3;
  if (!attempt.result.passed) return Outcome::S4;
  return attempt.result.iterations_used > baseline_iterations ? Outcome::S2
                                                              : Outcome::S1;
}

bool campaign_converged(const std::vector<double>& history, std::size_t window,
                        double epsilon) {
  if (history.empty() || window == 0) return false;
  const std::size_t n = std::min(window, history.size());
  const auto tail = history.end() - static_cast<std::ptrdiff_t>(n);
  const auto [lo, hi] = std::minmax_element(tail, history.end());
  return *hi - *lo <= epsilon;
}

namespace {

std::size_t region_count_of(const std::string& regions_line) {
  std::size_t count = 0;
  std::stringstream ss(regions_line);
  std::string entry;
  while (std::getline(ss, entry, ',')) ++count;
  return count;
}

void finalize(CampaignResult& r, std::size_t region_count) {
  r.n_tests = static_cast<long>(r.records.size());
  if (r.n_tests == 0) throw InvalidCampaign("campaign has no records");

  r.outcome_counts = {};
  r.region_landings.assign(region_count, 0);
  std::vector<long> region_s1(region_count, 0);
  long s1_total = 0;

  r.y_history.clear();
  const long stride = (r.n_tests + 9) / 10;
  for (long i = 0; i < r.n_tests; ++i) {
    const CrashRecord& rec = r.records[static_cast<std::size_t>(i)];
    r.outcome_counts[static_cast<std::size_t>(rec.outcome)] += 1;
    if (rec.region_id < 0 || rec.region_id >= static_cast<int>(region_count))
      throw InvalidCampaign("record lands outside the region table");
    r.region_landings[static_cast<std::size_t>(rec.region_id)] += 1;
    if (rec.outcome == Outcome::S1) {
      ++s1_total;
      region_s1[static_cast<std::size_t>(rec.region_id)] += 1;
    }
    if ((i + 1) % stride == 0 || i + 1 == r.n_tests)
      r.y_history.push_back(static_cast<double>(s1_total) / static_cast<double>(i + 1));
  }

  r.Y = static_cast<double>(s1_total) / static_cast<double>(r.n_tests);
  r.c_k.assign(region_count, r.Y);
  r.c_k_has_data.assign(region_count, false);
  for (std::size_t k = 0; k < region_count; ++k) {
    if (r.region_landings[k] > 0) {
      r.c_k_has_data[k] = true;
      r.c_k[k] = static_cast<double>(region_s1[k]) /
                 static_cast<double>(r.region_landings[k]);
    }
  }
  r.converged = campaign_converged(r.y_history, 5, 0.05);
}

RestartAttempt attempt_restart(const workloads::KernelSpec& spec,
                               const simcache::MemoryImage& snapshot,
                               const simcache::CacheConfig& cache,
                               const workloads::FlushSchedule* plan,
                               const workloads::GoldenStats& golden) {
  RestartAttempt attempt;
  try {
    attempt.result = workloads::restart_kernel(spec, snapshot, cache, plan, golden);
  } catch (const workloads::RestartFault&) {
    attempt.faulted = true;
  } catch (const workloads::KernelDiverged&) {
    attempt.faulted = true;
  }
  return attempt;
}

CrashRecord run_one_test(const workloads::KernelSpec& spec,
                         const simcache::CacheConfig& cache,
                         const workloads::FlushSchedule* plan, long test_id,
                         std::uint64_t crash_at,
                         const workloads::GoldenStats& golden) {
  simcache::SimMachine machine(cache);
  const workloads::RunResult run =
      workloads::run_kernel(spec, machine, plan, crash_at, &golden);
  if (!run.crashed)
    throw InvalidCampaign("crash point " + std::to_string(crash_at) +
                          " fell outside the run");
  const workloads::CrashInfo& crash = *run.crashed;

  CrashRecord rec;
  rec.test_id = test_id;
  rec.crash_op_index = crash.crash_op_index;
  rec.region_id = crash.region_id;
  rec.iteration = crash.iteration;
  rec.object_icr = crash.object_icr;

  const RestartAttempt attempt =
      attempt_restart(spec, crash.snapshot, cache, plan, golden);
  rec.outcome = classify_outcome(attempt, golden.baseline_iterations);
  rec.extra_iterations =
      attempt.faulted
          ? 0
          : std::max(0L, attempt.result.iterations_used - golden.baseline_iterations);
  return rec;
}

std::string regions_header(const workloads::KernelModel& model) {
  std::string out;
  for (const auto& region : model.regions) {
    if (!out.empty()) out += ',';
    out += std::to_string(region.id);
    out += region.kind == workloads::RegionKind::Loop ? ":loop:" : ":straight:";
    out += region.name;
  }
  return out;
}

}  // namespace

CampaignResult run_campaign(const workloads::KernelSpec& spec,
                            const simcache::CacheConfig& cache,
                            const workloads::FlushSchedule* plan, long n_tests,
                            std::uint64_t seed, const workloads::GoldenStats& golden,
                            int jobs) {
  if (n_tests < 1) throw InvalidCampaign("campaign needs at least one test");
  const auto points = sample_crash_points(golden.window_ops, n_tests, seed);

  CampaignResult result;
  const workloads::KernelModel model = workloads::describe_kernel(spec);
  for (const auto& obj : model.registry.candidates())
    result.candidate_names.push_back(obj.name);
  result.kernel_line = json::parse(spec.to_json_text()).dump();
  result.regions_line = regions_header(model);

  result.records.resize(static_cast<std::size_t>(n_tests));
  if (jobs > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (long i = 0; i < n_tests; ++i)
      result.records[static_cast<std::size_t>(i)] = run_one_test(
          spec, cache, plan, i, points[static_cast<std::size_t>(i)], golden);
  } else {
    for (long i = 0; i < n_tests; ++i)
      result.records[static_cast<std::size_t>(i)] = run_one_test(
          spec, cache, plan, i, points[static_cast<std::size_t>(i)], golden);
  }

  finalize(result, model.regions.size());
  return result;
}

std::string CampaignResult::to_csv() const {
  std::string out;
  out += "# kernel: " + kernel_line + "\n";
  out += "# regions: " + regions_line + "\n";
  out += "test_id,crash_op_index,region_id,iteration,outcome,extra_iterations";
  for (const auto& name : candidate_names) out += ",icr_" + name;
  out += "\n";
  char buf[96];
  for (const auto& rec : records) {
    std::snprintf(buf, sizeof buf, "%ld,%llu,%d,%ld,%s,%ld", rec.test_id,
                  static_cast<unsigned long long>(rec.crash_op_index),
                  rec.region_id, rec.iteration, to_string(rec.outcome),
                  rec.extra_iterations);
    out += buf;
    for (const double icr : rec.object_icr) {
      std::snprintf(buf, sizeof buf, ",%.6f", icr);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::string CampaignResult::summary_json() const {
  json doc;
  doc["Y"] = Y;
  doc["n_tests"] = n_tests;
  doc["converged"] = converged;
  json regions = json::array();
  for (std::size_t k = 0; k < c_k.size(); ++k) {
    json row;
    row["region_id"] = k;
    row["c"] = c_k[k];
    row["has_data"] = static_cast<bool>(c_k_has_data[k]);
    row["landings"] = region_landings[k];
    regions.push_back(row);
  }
  doc["c_k"] = regions;
  json outcomes;
  for (std::size_t i = 0; i < outcome_counts.size(); ++i)
    outcomes[to_string(static_cast<Outcome>(i))] = outcome_counts[i];
  doc["outcomes"] = outcomes;
  doc["y_history"] = y_history;
  return doc.dump(2) + "\n";
}

CampaignResult CampaignResult::from_csv(const std::string& text) {
  CampaignResult result;
  std::stringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# kernel: ", 0) == 0) {
      result.kernel_line = line.substr(10);
      continue;
    }
    if (line.rfind("# regions: ", 0) == 0) {
      result.regions_line = line.substr(11);
      continue;
    }
    if (line.rfind("#", 0) == 0) continue;

    std::vector<std::string> fields;
    std::stringstream row(line);
    std::string field;
    while (std::getline(row, field, ',')) fields.push_back(field);

    if (!header_seen) {
      if (fields.size() < 6 || fields[0] != "test_id")
        throw InvalidCampaign("campaign CSV header is malformed");
      for (std::size_t i = 6; i < fields.size(); ++i) {
        if (fields[i].rfind("icr_", 0) != 0)
          throw InvalidCampaign("unexpected column: " + fields[i]);
        result.candidate_names.push_back(fields[i].substr(4));
      }
      header_seen = true;
      continue;
    }

    if (fields.size() != 6 + result.candidate_names.size())
      throw InvalidCampaign("campaign CSV row has wrong arity: " + line);
    try {
      CrashRecord rec;
      rec.test_id = std::stol(fields[0]);
      rec.crash_op_index = std::stoull(fields[1]);
      rec.region_id = std::stoi(fields[2]);
      rec.iteration = std::stol(fields[3]);
      rec.outcome = outcome_from_string(fields[4]);
      rec.extra_iterations = std::stol(fields[5]);
      for (std::size_t i = 6; i < fields.size(); ++i)
        rec.object_icr.push_back(std::stod(fields[i]));
      result.records.push_back(std::move(rec));
    } catch (const std::logic_error&) {
      throw InvalidCampaign("campaign CSV row has a bad field: " + line);
    }
  }
  if (!header_seen) throw InvalidCampaign("campaign CSV has no header row");
  if (result.regions_line.empty())
    throw InvalidCampaign("campaign CSV is missing the regions comment");
  std::sort(result.records.begin(), result.records.end(),
            [](const CrashRecord& a, const CrashRecord& b) {
              return a.test_id < b.test_id;
            });
  finalize(result, region_count_of(result.regions_line));
  return result;
}

}  // namespace nvlab::crashlab
