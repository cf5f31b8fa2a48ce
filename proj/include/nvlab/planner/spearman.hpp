#pragma once

#include <stdexcept>
#include <vector>

namespace nvlab::planner {

struct LengthMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TooFewSamples : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonFiniteInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
};

// Average-fractional ranks; ties share the mean of the rank positions they
// occupy.
std::vector<double> fractional_ranks(const std::vector<double>& values);

// Rank correlation with a two-tailed p-value from the t approximation
// t = rho*sqrt((n-2)/(1-rho^2)) on n-2 degrees of freedom. A constant input
// vector has no ranking signal and reports rho=0, p=1.
SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace nvlab::planner
