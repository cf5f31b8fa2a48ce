#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "nvlab/crashlab/campaign.hpp"
#include "nvlab/planner/planner.hpp"
#include "nvlab/planner/spearman.hpp"
#include "nvlab/simcache/config.hpp"
#include "nvlab/workloads/workloads.hpp"

using namespace nvlab;
using namespace nvlab::planner;

namespace {

workloads::KernelSpec kmeans_small() {
  workloads::KernelSpec s;
  s.kernel = "kmeans";
  s.size = 64;
  s.tolerance = 1e-6;
  s.seed = 7;
  return s;
}

workloads::KernelSpec jacobi_small() {
  workloads::KernelSpec s;
  s.kernel = "jacobi2d";
  s.size = 12;
  s.tolerance = 1e-4;
  s.seed = 7;
  return s;
}

// Independent rank oracle: rank = 1 + (#smaller) + (#equal excluding self)/2.
std::vector<double> oracle_ranks(const std::vector<double>& v) {
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t less = 0;
    std::size_t equal = 0;
    for (const double other : v) {
      if (other < v[i]) ++less;
      if (other == v[i]) ++equal;
    }
    ranks[i] = 1.0 + static_cast<double>(less) +
               static_cast<double>(equal - 1) / 2.0;
  }
  return ranks;
}

double oracle_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double t_pdf(double u, double df) {
  const double log_norm = std::lgamma((df + 1.0) / 2.0) -
                          std::lgamma(df / 2.0) -
                          0.5 * std::log(df * M_PI);
  return std::exp(log_norm - (df + 1.0) / 2.0 * std::log1p(u * u / df));
}

// Simpson integration of the t density over [0, t]; the two-tailed p-value of
// a statistic t is 1 - 2 * integral.
double oracle_two_tailed_p(double t, double df) {
  const double hi = std::abs(t);
  const int steps = 20000;
  const double h = hi / steps;
  double acc = t_pdf(0.0, df) + t_pdf(hi, df);
  for (int i = 1; i < steps; ++i)
    acc += t_pdf(h * i, df) * (i % 2 == 1 ? 4.0 : 2.0);
  const double integral = acc * h / 3.0;
  return std::max(0.0, 1.0 - 2.0 * integral);
}

crashlab::CampaignResult synthetic_campaign(
    const std::vector<std::string>& names,
    const std::vector<crashlab::Outcome>& outcomes,
    const std::vector<std::vector<double>>& icr_rows) {
  crashlab::CampaignResult campaign;
  campaign.candidate_names = names;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    crashlab::CrashRecord rec;
    rec.test_id = static_cast<long>(i);
    rec.outcome = outcomes[i];
    rec.object_icr = icr_rows[i];
    campaign.records.push_back(std::move(rec));
  }
  return campaign;
}

RegionOption option_of(int region, long freq, double weight, double value,
                       double c_prime) {
  RegionOption o;
  o.region_id = region;
  o.frequency = freq;
  o.weight = weight;
  o.value = value;
  o.c_prime = c_prime;
  return o;
}

struct OracleChoice {
  double value = 0.0;
  double weight = 0.0;
  std::vector<std::size_t> pick;
  bool set = false;
};

// Exhaustive multiple-choice knapsack with the same quantization and
// tie-break rules, used to cross-check the DP.
OracleChoice exhaustive_best(const std::vector<std::vector<RegionOption>>& options,
                             double t_s) {
  long cap = static_cast<long>(std::floor(t_s / 1e-4));
  while (cap > 0 && static_cast<double>(cap) * 1e-4 >= t_s) --cap;
  while (static_cast<double>(cap + 1) * 1e-4 < t_s) ++cap;

  OracleChoice best;
  std::vector<std::size_t> pick(options.size(), 0);
  while (true) {
    long units = 0;
    double value = 0.0;
    double weight = 0.0;
    for (std::size_t k = 0; k < options.size(); ++k) {
      const RegionOption& o = options[k][pick[k]];
      if (o.weight > 0.0)
        units += static_cast<long>(std::ceil(o.weight / 1e-4 - 1e-9));
      value += o.value;
      weight += o.weight;
    }
    if (units <= cap) {
      const bool wins =
          !best.set || value > best.value ||
          (value == best.value &&
           (weight < best.weight || (weight == best.weight && pick < best.pick)));
      if (wins) {
        best.value = value;
        best.weight = weight;
        best.pick = pick;
        best.set = true;
      }
    }
    std::size_t k = 0;
    while (k < pick.size()) {
      if (++pick[k] < options[k].size()) break;
      pick[k] = 0;
      ++k;
    }
    if (k == pick.size()) break;
  }
  return best;
}

}  // namespace

TEST_CASE("fractional ranks average over ties") {
  CHECK(fractional_ranks({3.0, 1.0, 2.0}) == std::vector<double>{3.0, 1.0, 2.0});
  CHECK(fractional_ranks({10.0, 20.0, 20.0, 30.0}) ==
        std::vector<double>{1.0, 2.5, 2.5, 4.0});
  CHECK(fractional_ranks({5.0, 5.0, 5.0}) == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("rank correlation endpoints and worked example") {
  const auto perfect = spearman({1, 2, 3}, {10, 20, 30});
  CHECK(perfect.rho == doctest::Approx(1.0));
  CHECK(perfect.p_value == 0.0);

  const auto inverse = spearman({1, 2, 3}, {3, 2, 1});
  CHECK(inverse.rho == doctest::Approx(-1.0));
  CHECK(inverse.p_value == 0.0);

  const auto mixed = spearman({0.1, 0.5, 0.2, 0.9}, {1, 0, 1, 0});
  CHECK(mixed.rho == doctest::Approx(-4.0 / std::sqrt(20.0)).epsilon(1e-12));
}

TEST_CASE("rank correlation matches a brute-force oracle on random data") {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> len(3, 20);
  std::uniform_real_distribution<double> real(-5.0, 5.0);
  std::uniform_int_distribution<int> small(0, 4);

  for (int trial = 0; trial < 500; ++trial) {
    const int n = len(rng);
    const bool ties = trial % 2 == 0;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = ties ? static_cast<double>(small(rng)) : real(rng);
      y[i] = ties ? static_cast<double>(small(rng)) : real(rng);
    }
    const auto got = spearman(x, y);
    const double want = oracle_pearson(oracle_ranks(x), oracle_ranks(y));
    CHECK(got.rho == doctest::Approx(want).epsilon(1e-12));
    CHECK(got.rho >= -1.0);
    CHECK(got.rho <= 1.0);
    CHECK(spearman(y, x).rho == doctest::Approx(got.rho).epsilon(1e-12));
  }
}

TEST_CASE("p-value matches numeric integration of the t density") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> len(4, 30);
  std::uniform_real_distribution<double> real(0.0, 1.0);

  int compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = len(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = real(rng);
      y[i] = 0.3 * x[i] + real(rng);
    }
    const auto got = spearman(x, y);
    if (std::abs(got.rho) >= 1.0) continue;
    const double df = n - 2;
    const double t = got.rho * std::sqrt(df / (1.0 - got.rho * got.rho));
    if (std::abs(t) > 30.0) continue;
    CHECK(got.p_value == doctest::Approx(oracle_two_tailed_p(t, df)).epsilon(1e-7));
    ++compared;
  }
  CHECK(compared > 40);
}

TEST_CASE("p-value decisions agree with the exact permutation test at n=7") {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> real(0.0, 1.0);
  const int trials = 200;
  int disagreements = 0;
  int t_rejections = 0;

  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> x(7), y(7);
    for (int i = 0; i < 7; ++i) {
      x[i] = real(rng);
      y[i] = real(rng);
    }
    const auto got = spearman(x, y);
    const double observed = std::abs(got.rho);

    const auto rx = oracle_ranks(x);
    auto ry = oracle_ranks(y);
    std::sort(ry.begin(), ry.end());
    long extreme = 0;
    long total = 0;
    do {
      ++total;
      if (std::abs(oracle_pearson(rx, ry)) >= observed - 1e-12) ++extreme;
    } while (std::next_permutation(ry.begin(), ry.end()));
    REQUIRE(total == 5040);
    const double p_exact = static_cast<double>(extreme) / 5040.0;

    const bool reject_t = got.p_value < 0.01;
    const bool reject_exact = p_exact < 0.01;
    if (reject_t != reject_exact) ++disagreements;
    if (reject_t) ++t_rejections;
  }
  CHECK(disagreements <= 2);
  CHECK(t_rejections <= 8);
}

TEST_CASE("rank correlation is invariant under strictly monotone transforms") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> real(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(12), y(12);
    for (int i = 0; i < 12; ++i) {
      x[i] = real(rng);
      y[i] = real(rng);
    }
    std::vector<double> fx(12), gy(12);
    for (int i = 0; i < 12; ++i) {
      fx[i] = std::exp(x[i]);
      gy[i] = 3.0 * y[i] + 2.0;
    }
    const auto base = spearman(x, y);
    const auto mapped = spearman(fx, gy);
    CHECK(mapped.rho == doctest::Approx(base.rho).epsilon(1e-12));
    CHECK(mapped.p_value == doctest::Approx(base.p_value).epsilon(1e-12));
  }
}

TEST_CASE("rank correlation rejects bad inputs and degenerate vectors") {
  CHECK_THROWS_AS(spearman({1, 2, 3}, {1, 2}), LengthMismatch);
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2}), TooFewSamples);
  CHECK_THROWS_AS(
      spearman({1, 2, std::numeric_limits<double>::quiet_NaN()}, {1, 2, 3}),
      NonFiniteInput);
  CHECK_THROWS_AS(
      spearman({1, 2, 3}, {1, std::numeric_limits<double>::infinity(), 3}),
      NonFiniteInput);

  const auto flat = spearman({5, 5, 5, 5}, {1, 2, 3, 4});
  CHECK(flat.rho == 0.0);
  CHECK(flat.p_value == 1.0);
}

TEST_CASE("object selection applies both correlation criteria") {
  const int n = 24;
  std::vector<crashlab::Outcome> outcomes;
  std::vector<std::vector<double>> rows;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const bool ok = i % 2 == 0;
    outcomes.push_back(ok ? crashlab::Outcome::S1 : crashlab::Outcome::S2);
    const double jitter = 1e-4 * i;
    rows.push_back({(ok ? 0.1 : 0.9) + jitter,   // anti-correlated with success
                    (ok ? 0.9 : 0.1) + jitter,   // positively correlated
                    noise(rng)});                // uninformative
  }
  const auto campaign = synthetic_campaign({"recoverable", "volatile", "noise"},
                                           outcomes, rows);
  const auto report = select_objects(campaign, 0.01);
  REQUIRE(report.objects.size() == 3);
  CHECK(!report.degenerate);

  CHECK(report.objects[0].rho < 0.0);
  CHECK(report.objects[0].p_value < 0.01);
  CHECK(report.objects[0].selected);

  CHECK(report.objects[1].rho > 0.0);
  CHECK(!report.objects[1].selected);

  CHECK(report.objects[2].p_value >= 0.01);
  CHECK(!report.objects[2].selected);

  CHECK(report.selected_names() == std::vector<std::string>{"recoverable"});

  // A significant negative correlation stops qualifying once the threshold
  // drops below its p-value.
  const auto strict = select_objects(campaign, 1e-30);
  CHECK(!strict.objects[0].selected);
}

TEST_CASE("object selection flags campaigns without outcome variation") {
  const int n = 12;
  std::vector<crashlab::Outcome> outcomes(n, crashlab::Outcome::S1);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < n; ++i) rows.push_back({0.1 * i});
  const auto report =
      select_objects(synthetic_campaign({"obj"}, outcomes, rows), 0.01);
  CHECK(report.degenerate);
  CHECK(!report.objects[0].selected);
  CHECK(report.selected_names().empty());
}

TEST_CASE("loss estimate follows the doubled per-line cost model") {
  CostModel cost;
  cost.flush_cost_per_line = 50.0;
  cost.doubling_factor = 2.0;
  // 6400 bytes over 64-byte lines is exactly 100 blocks.
  CHECK(estimate_loss(6400, 1000, cost, 1e9, 64) == doctest::Approx(0.01));
  CHECK(estimate_loss(6400, 500, cost, 1e9, 64) == doctest::Approx(0.005));
  CHECK(estimate_loss(6400, 0, cost, 1e9, 64) == 0.0);
  // Partial lines round up.
  CHECK(estimate_loss(6401, 1000, cost, 1e9, 64) == doctest::Approx(0.0101));
  CHECK_THROWS_AS(estimate_loss(64, 1, cost, 0.0, 64), PlannerError);
  CHECK_THROWS_AS(estimate_loss(64, 1, cost, 1e9, 0), PlannerError);
}

TEST_CASE("recomputability interpolation hits its endpoints and stays bounded") {
  CHECK(interpolate_c(0.2, 0.8, 1.0) == doctest::Approx(0.8));
  CHECK(interpolate_c(0.2, 0.8, 4.0) == doctest::Approx(0.35));
  CHECK(interpolate_c(0.2, 0.8, 1e12) == doctest::Approx(0.2).epsilon(1e-9));

  double prev = 2.0;
  for (const double x : {1.0, 2.0, 4.0, 8.0, 16.0, 1024.0}) {
    const double c = interpolate_c(0.3, 0.9, x);
    CHECK(c <= prev);
    CHECK(c >= 0.3);
    CHECK(c <= 0.9);
    prev = c;
  }

  CHECK_THROWS_AS(interpolate_c(0.9, 0.2, 4.0), PlannerError);
  CHECK_THROWS_AS(interpolate_c(0.2, 1.2, 4.0), PlannerError);
  CHECK_THROWS_AS(interpolate_c(0.2, 0.8, 0.5), PlannerError);
}

TEST_CASE("predicted efficiency renormalizes region shares by their loss") {
  CHECK(predict_Y_prime({0.5, 0.5}, {1.0, 0.0}, {0.0, 0.0}) == doctest::Approx(0.5));
  CHECK(predict_Y_prime({0.5, 0.5}, {1.0, 1.0}, {0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(predict_Y_prime({1.0}, {0.8}, {0.01}) == doctest::Approx(0.8));

  // Loss shifts weight toward the lossy region.
  const double shifted = predict_Y_prime({0.5, 0.5}, {1.0, 0.0}, {0.1, 0.0});
  CHECK(shifted == doctest::Approx(0.6 / 1.1));

  CHECK_THROWS_AS(predict_Y_prime({0.5, 0.5}, {1.0}, {0.0, 0.0}), PlannerError);
  CHECK_THROWS_AS(predict_Y_prime({0.5, 0.4}, {1.0, 1.0}, {0.0, 0.0}), PlannerError);
}

TEST_CASE("region selection picks the highest-value option within budget") {
  // Three regions, each with one real option: unit weights 1, 2, 3 and values
  // 10, 15, 40 under a 3-unit budget; the single (3,40) option beats the
  // (1,10)+(2,15) pair.
  std::vector<std::vector<RegionOption>> options(3);
  options[0] = {option_of(0, 0, 0.0, 0.0, 0.0), option_of(0, 1, 1e-4, 10.0, 0.5)};
  options[1] = {option_of(1, 0, 0.0, 0.0, 0.0), option_of(1, 1, 2e-4, 15.0, 0.5)};
  options[2] = {option_of(2, 0, 0.0, 0.0, 0.0), option_of(2, 1, 2.99e-4, 40.0, 0.5)};
  const std::vector<double> c = {0.0, 0.0, 0.0};
  const std::vector<double> a = {0.3, 0.3, 0.4};

  const auto plan = select_regions(options, 3.5e-4, 0.0, c, a);
  REQUIRE(plan.regions.size() == 3);
  CHECK(plan.regions[0].frequency == 0);
  CHECK(plan.regions[1].frequency == 0);
  CHECK(plan.regions[2].frequency == 1);
  CHECK(plan.predicted_loss == doctest::Approx(2.99e-4));
  CHECK(plan.feasible);
}

TEST_CASE("region selection degrades to never-persist when nothing fits or pays") {
  std::vector<std::vector<RegionOption>> options(2);
  options[0] = {option_of(0, 0, 0.0, 0.0, 0.4), option_of(0, 1, 0.5, 100.0, 0.9)};
  options[1] = {option_of(1, 0, 0.0, 0.0, 0.6), option_of(1, 2, 0.9, 100.0, 0.9)};
  const std::vector<double> c = {0.4, 0.6};
  const std::vector<double> a = {0.5, 0.5};

  SUBCASE("budget below every real option") {
    const auto plan = select_regions(options, 0.01, 0.0, c, a);
    CHECK(plan.regions[0].frequency == 0);
    CHECK(plan.regions[1].frequency == 0);
    CHECK(plan.predicted_loss == 0.0);
    CHECK(plan.predicted_Y_prime == doctest::Approx(0.5));
  }

  SUBCASE("all-zero values tie-break to never") {
    std::vector<std::vector<RegionOption>> flat(2);
    flat[0] = {option_of(0, 0, 0.0, 0.0, 0.4), option_of(0, 1, 1e-4, 0.0, 0.4)};
    flat[1] = {option_of(1, 0, 0.0, 0.0, 0.6), option_of(1, 1, 1e-4, 0.0, 0.6)};
    const auto plan = select_regions(flat, 0.03, 0.0, c, a);
    CHECK(plan.regions[0].frequency == 0);
    CHECK(plan.regions[1].frequency == 0);
    CHECK(plan.predicted_loss == 0.0);
  }

  SUBCASE("unreachable threshold reports infeasible but keeps the best plan") {
    const auto plan = select_regions(options, 0.01, 0.99, c, a);
    CHECK(!plan.feasible);
    CHECK(plan.predicted_Y_prime == doctest::Approx(0.5));
  }
}

TEST_CASE("region selection validates its inputs") {
  std::vector<std::vector<RegionOption>> options(1);
  options[0] = {option_of(0, 1, 1e-4, 1.0, 0.5)};
  CHECK_THROWS_AS(select_regions(options, 0.03, 0.0, {0.1}, {1.0}), PlannerError);

  options[0] = {option_of(0, 0, 0.0, 0.0, 0.5)};
  CHECK_THROWS_AS(select_regions(options, 0.03, 0.0, {0.1, 0.2}, {1.0}),
                  PlannerError);
}

TEST_CASE("region selection matches exhaustive enumeration on random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> region_count(2, 4);
  std::uniform_int_distribution<int> extra_options(1, 3);
  std::uniform_real_distribution<double> weight(0.0, 0.02);
  std::uniform_real_distribution<double> value(-0.2, 1.0);
  std::uniform_real_distribution<double> budget(0.005, 0.04);

  for (int trial = 0; trial < 200; ++trial) {
    const int regions = region_count(rng);
    std::vector<std::vector<RegionOption>> options(regions);
    std::vector<double> c(regions, 0.5);
    std::vector<double> a(regions, 1.0 / regions);
    for (int k = 0; k < regions; ++k) {
      options[k].push_back(option_of(k, 0, 0.0, 0.0, 0.5));
      const int extras = extra_options(rng);
      for (int e = 0; e < extras; ++e)
        options[k].push_back(
            option_of(k, 1 << e, weight(rng), value(rng), 0.75));
    }
    const double t_s = budget(rng);

    const auto plan = select_regions(options, t_s, 0.0, c, a);
    const auto best = exhaustive_best(options, t_s);
    REQUIRE(best.set);

    double plan_value = 0.0;
    double plan_weight = 0.0;
    for (int k = 0; k < regions; ++k) {
      const auto it = std::find_if(
          options[k].begin(), options[k].end(), [&](const RegionOption& o) {
            return o.frequency == plan.regions[k].frequency;
          });
      REQUIRE(it != options[k].end());
      plan_value += it->value;
      plan_weight += it->weight;
      CHECK(static_cast<std::size_t>(it - options[k].begin()) == best.pick[k]);
    }
    CHECK(plan_value == doctest::Approx(best.value).epsilon(1e-12));
    CHECK(plan_weight == doctest::Approx(best.weight).epsilon(1e-12));
    CHECK(plan.predicted_loss == doctest::Approx(best.weight).epsilon(1e-12));
    if (plan.feasible) CHECK(plan.predicted_loss < t_s);
  }
}

TEST_CASE("plan JSON round-trips and maps onto a flush schedule") {
  PersistencePlan plan;
  plan.critical_objects = {"centroids", "scalars"};
  plan.regions = {{0, workloads::RegionKind::Loop, 4},
                  {1, workloads::RegionKind::Loop, 0},
                  {2, workloads::RegionKind::Straight, 1}};
  plan.predicted_Y_prime = 0.93;
  plan.predicted_loss = 0.012;
  plan.feasible = true;
  plan.correlations.objects = {{"centroids", -0.9, 1e-8, true},
                               {"assignments", 0.1, 0.4, false}};

  const auto copy = PersistencePlan::from_json_text(plan.to_json_text());
  CHECK(copy.critical_objects == plan.critical_objects);
  REQUIRE(copy.regions.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(copy.regions[k].region_id == plan.regions[k].region_id);
    CHECK(copy.regions[k].kind == plan.regions[k].kind);
    CHECK(copy.regions[k].frequency == plan.regions[k].frequency);
  }
  CHECK(copy.predicted_Y_prime == doctest::Approx(plan.predicted_Y_prime));
  CHECK(copy.predicted_loss == doctest::Approx(plan.predicted_loss));
  CHECK(copy.feasible == plan.feasible);
  REQUIRE(copy.correlations.objects.size() == 2);
  CHECK(copy.correlations.objects[0].name == "centroids");
  CHECK(copy.correlations.objects[0].selected);
  CHECK(copy.correlations.objects[1].rho == doctest::Approx(0.1));

  const auto schedule = plan.to_schedule();
  CHECK(schedule.objects == plan.critical_objects);
  REQUIRE(schedule.frequency.size() == 2);
  CHECK(schedule.frequency.at(0) == 4);
  CHECK(schedule.frequency.at(2) == 1);
  CHECK(!plan.empty_schedule());

  PersistencePlan idle = plan;
  for (auto& region : idle.regions) region.frequency = 0;
  CHECK(idle.empty_schedule());
  PersistencePlan no_objects = plan;
  no_objects.critical_objects.clear();
  CHECK(no_objects.empty_schedule());

  CHECK_THROWS_AS(PersistencePlan::from_json_text("not json"), PlannerError);
  CHECK_THROWS_AS(PersistencePlan::from_json_text("{}"), PlannerError);
  CHECK_THROWS_AS(
      PersistencePlan::from_json_text(
          R"({"critical_objects":[],"regions":[{"region_id":0,"kind":"spiral","frequency":1}],"predicted_Y_prime":0,"predicted_loss":0,"feasible":false})"),
      PlannerError);
  CHECK_THROWS_AS(
      PersistencePlan::from_json_text(
          R"({"critical_objects":[],"regions":[{"region_id":0,"kind":"loop","frequency":-2}],"predicted_Y_prime":0,"predicted_loss":0,"feasible":false})"),
      PlannerError);
}

TEST_CASE("option construction covers the frequency grid with consistent economics") {
  const auto spec = kmeans_small();
  const auto cache = simcache::CacheConfig::tiny();
  const auto model = workloads::describe_kernel(spec);
  const auto golden = workloads::golden_run(spec, cache, nullptr);
  REQUIRE(model.regions.size() == 3);

  const std::vector<double> c_k = {0.5, 0.7, 0.9};
  const std::vector<double> c_max = {0.9, 0.8, 1.0};
  CostModel cost;
  const auto options = build_options(golden, 80, c_k, c_max, cost, model,
                                     cache.line_size);
  REQUIRE(options.size() == 3);

  for (std::size_t k = 0; k < options.size(); ++k) {
    REQUIRE(!options[k].empty());
    CHECK(options[k][0].frequency == 0);
    CHECK(options[k][0].weight == 0.0);
    CHECK(options[k][0].value == 0.0);

    double prev_weight = 0.0;
    for (std::size_t i = 1; i < options[k].size(); ++i) {
      const auto& opt = options[k][i];
      CHECK(opt.weight > prev_weight);
      prev_weight = opt.weight;
      CHECK(opt.c_prime >= c_k[k]);
      CHECK(opt.c_prime <= c_max[k]);
      CHECK(opt.value ==
            doctest::Approx(golden.region_fracs[k] * (opt.c_prime - c_k[k])));
    }
  }

  // The blocked loop regions run 4 inner trips at this size, so frequencies
  // above 4 would never fire and are dropped from the grid.
  REQUIRE(golden.region_trips[0] == 4);
  for (const std::size_t k : {std::size_t{0}, std::size_t{1}}) {
    REQUIRE(options[k].size() == 4);
    CHECK(options[k][1].frequency == 4);
    CHECK(options[k][3].frequency == 1);
    CHECK(options[k][3].c_prime == doctest::Approx(c_max[k]));
  }
  // The straight region offers only never and every-visit.
  REQUIRE(options[2].size() == 2);
  CHECK(options[2][1].frequency == 1);
  CHECK(options[2][1].c_prime == doctest::Approx(c_max[2]));

  // A measured ceiling below the floor collapses the option's value to zero
  // instead of predicting harm.
  const auto clamped = build_options(golden, 80, {0.9, 0.7, 0.9},
                                     {0.2, 0.8, 1.0}, cost, model,
                                     cache.line_size);
  for (std::size_t i = 1; i < clamped[0].size(); ++i) {
    CHECK(clamped[0][i].value == 0.0);
    CHECK(clamped[0][i].c_prime == doctest::Approx(0.9));
  }
}

TEST_CASE("ceiling measurement reuses the baseline and dominates it on kmeans") {
  const auto spec = kmeans_small();
  const auto cache = simcache::CacheConfig::tiny();
  const auto golden = workloads::golden_run(spec, cache, nullptr);
  const auto baseline =
      crashlab::run_campaign(spec, cache, nullptr, 160, 11, golden);

  const auto measured = measure_c_max(spec, cache, {"centroids", "scalars"},
                                      160, 11, &baseline);
  REQUIRE(measured.c_base.size() == baseline.c_k.size());
  for (std::size_t k = 0; k < baseline.c_k.size(); ++k) {
    CHECK(measured.c_base[k] == baseline.c_k[k]);
    CHECK(measured.c_base_has_data[k] == baseline.c_k_has_data[k]);
  }
  CHECK(measured.y_base == baseline.Y);

  for (std::size_t k = 0; k < measured.c_max.size(); ++k)
    CHECK(measured.c_max[k] >= measured.c_base[k] - 1e-12);
  CHECK(measured.y_everywhere >= measured.y_base - 1e-12);

  const auto empty = measure_c_max(spec, cache, {}, 160, 11, &baseline);
  CHECK(empty.c_max == empty.c_base);
  CHECK(empty.y_everywhere == empty.y_base);
}

TEST_CASE("full planning workflow lifts kmeans recomputability within budget") {
  const auto spec = kmeans_small();
  const auto cache = simcache::CacheConfig::tiny();
  const auto golden = workloads::golden_run(spec, cache, nullptr);
  const auto baseline =
      crashlab::run_campaign(spec, cache, nullptr, 200, 11, golden);

  PlanInputs inputs;
  inputs.cmax_tests = 200;
  inputs.cmax_seed = 11;
  const auto plan = build_plan(spec, cache, baseline, golden, inputs);

  CHECK(!plan.correlations.degenerate);
  REQUIRE(!plan.critical_objects.empty());
  const auto& names = plan.critical_objects;
  CHECK(std::find(names.begin(), names.end(), "centroids") != names.end());
  CHECK(plan.predicted_loss < inputs.t_s);
  CHECK(plan.feasible);
  CHECK(!plan.empty_schedule());

  const auto schedule = plan.to_schedule();
  const auto golden_plan = workloads::golden_run(spec, cache, &schedule);
  const auto replay =
      crashlab::run_campaign(spec, cache, &schedule, 200, 11, golden_plan);
  MESSAGE("baseline Y=" << baseline.Y << " planned Y=" << replay.Y);
  CHECK(replay.Y > baseline.Y + 0.1);

  // Supplying the ceiling campaign explicitly reproduces the same plan.
  const auto model = workloads::describe_kernel(spec);
  const auto everywhere = everywhere_plan(model, plan.critical_objects);
  const auto golden_ew = workloads::golden_run(spec, cache, &everywhere);
  const auto cmax_campaign =
      crashlab::run_campaign(spec, cache, &everywhere, 200, 11, golden_ew);
  const auto replanned =
      build_plan(spec, cache, baseline, golden, inputs, &cmax_campaign);
  CHECK(replanned.to_json_text() == plan.to_json_text());
}

TEST_CASE("degenerate campaigns produce an empty but feasible plan") {
  auto spec = jacobi_small();
  spec.size = 16;
  const auto cache = simcache::CacheConfig::tiny();
  const auto golden = workloads::golden_run(spec, cache, nullptr);
  const auto baseline =
      crashlab::run_campaign(spec, cache, nullptr, 60, 3, golden);
  REQUIRE(baseline.outcome_counts[0] == baseline.n_tests);

  PlanInputs inputs;
  inputs.cmax_tests = 60;
  inputs.cmax_seed = 3;
  const auto plan = build_plan(spec, cache, baseline, golden, inputs);
  CHECK(plan.correlations.degenerate);
  CHECK(plan.critical_objects.empty());
  CHECK(plan.empty_schedule());
  CHECK(plan.predicted_loss == 0.0);
  CHECK(plan.predicted_Y_prime == doctest::Approx(baseline.Y));
  CHECK(plan.feasible);
}
