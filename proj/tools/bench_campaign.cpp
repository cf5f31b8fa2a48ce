#include <chrono>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "nvlab/crashlab/campaign.hpp"
#include "nvlab/simcache/config.hpp"
#include "nvlab/workloads/workloads.hpp"

using namespace nvlab;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Campaign fan-out benchmark: serial reference vs parallel workers"};
  std::string kernel = "kmeans";
  long size = 256;
  double tolerance = 1e-6;
  long n_tests = 400;
  int jobs = omp_get_max_threads();
  std::uint64_t seed = 1001;
  app.add_option("--kernel", kernel, "jacobi2d, cgsolve or kmeans");
  app.add_option("--size", size, "problem size");
  app.add_option("--tolerance", tolerance, "convergence tolerance");
  app.add_option("--n-tests", n_tests, "crash tests per campaign");
  app.add_option("--jobs", jobs, "parallel workers for the second run");
  app.add_option("--seed", seed, "campaign seed");
  CLI11_PARSE(app, argc, argv);

  workloads::KernelSpec spec;
  spec.kernel = kernel;
  spec.size = size;
  spec.tolerance = tolerance;
  spec.seed = 7;
  const auto cache = simcache::CacheConfig::tiny();

  try {
    const workloads::GoldenStats golden = workloads::golden_run(spec, cache, nullptr);
    std::cout << "kernel " << kernel << " size " << size << ": "
              << golden.baseline_iterations << " iterations, " << golden.window_ops
              << " window ops\n";

    auto start = Clock::now();
    const crashlab::CampaignResult serial =
        crashlab::run_campaign(spec, cache, nullptr, n_tests, seed, golden, 1);
    const double serial_s = seconds_since(start);

    start = Clock::now();
    const crashlab::CampaignResult parallel =
        crashlab::run_campaign(spec, cache, nullptr, n_tests, seed, golden, jobs);
    const double parallel_s = seconds_since(start);

    const bool identical = serial.to_csv() == parallel.to_csv() &&
                           serial.summary_json() == parallel.summary_json();
    std::cout << "serial   (jobs=1):  " << serial_s << " s, "
              << static_cast<double>(n_tests) / serial_s << " tests/s\n";
    std::cout << "parallel (jobs=" << jobs << "): " << parallel_s << " s, "
              << static_cast<double>(n_tests) / parallel_s << " tests/s\n";
    std::cout << "speedup: " << serial_s / parallel_s << "x\n";
    std::cout << "outputs byte-identical: " << (identical ? "yes" : "NO") << "\n";
    return identical ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
