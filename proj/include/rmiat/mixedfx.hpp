#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rmiat {

// Reasoning tokens (y) with a 0/1 condition code (0 = compatible,
// 1 = incompatible) and the prompt variation as grouping factor.
struct LmmDataset {
  std::vector<double> y;
  std::vector<uint8_t> condition;
  std::vector<int> group;
};

class DegenerateDesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteObjectiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws DegenerateDesignError: n < 3, fewer than two groups, a missing
// condition, mismatched lengths or non-finite responses.
void validate_dataset(const LmmDataset& data);

enum class Criterion { REML, ML };
std::string_view to_string(Criterion c);

// Per-group sufficient statistics for y = b0 + b1*x + u_g + e. Groups are
// dense indices 0..G-1. Within-group quantities are centered on group means.
struct GroupSums {
  std::vector<int64_t> n;      // rows
  std::vector<int64_t> c;      // rows with x = 1
  std::vector<double> sum_y;   // sum of y
  std::vector<double> wyy;     // sum (y - ybar_g)^2
  std::vector<double> wxy;     // sum (x - xbar_g)(y - ybar_g)

  size_t groups() const { return n.size(); }
  int64_t rows() const;
};

// Profiled log-likelihood at variance ratio lambda = sigma2_u / sigma2_e,
// with beta and sigma2_e at their conditional optima. Uses only the group
// sums; no n-by-n matrices.
double profiled_objective(const GroupSums& sums, double lambda, Criterion criterion = Criterion::REML);

struct LmmFit {
  double beta_intercept = 0.0;
  double beta_condition = 0.0;
  double se_intercept = 0.0;
  double se_condition = 0.0;
  double sigma2_u = 0.0;
  double sigma2_e = 0.0;
  double lambda = 0.0;
  double loglik = 0.0;  // REML or ML log-likelihood, per `criterion`
  Criterion criterion = Criterion::REML;
  size_t n = 0;
  size_t n_groups = 0;
  double z = 0.0;
  double p_value = 1.0;
  bool at_boundary = false;  // lambda == 0

  double ci_low(double zcrit = 1.959963984540054) const { return beta_condition - zcrit * se_condition; }
  double ci_high(double zcrit = 1.959963984540054) const { return beta_condition + zcrit * se_condition; }
};

// Maximizes the profiled criterion over log(lambda) in [1e-8, 1e8] (coarse
// scan, then Brent to 1e-10 relative) and compares against lambda = 0.
LmmFit fit_random_intercept(const LmmDataset& data, Criterion criterion = Criterion::REML);

// GLS estimates with lambda held fixed. lambda = 0 is ordinary least squares.
LmmFit fit_at_lambda(const LmmDataset& data, double lambda, Criterion criterion = Criterion::REML);

// Profiled objective of `data` in original units; matches LmmFit::loglik.
double profiled_objective(const LmmDataset& data, double lambda, Criterion criterion = Criterion::REML);

inline constexpr double kLogLambdaMin = -18.420680743952367;  // log(1e-8)
inline constexpr double kLogLambdaMax = 18.420680743952367;   // log(1e8)

// Brent's minimizer on [lo, hi]; returns (argmin, fmin).
template <class F>
std::pair<double, double> brent_minimize(F&& f, double lo, double hi, double rel_tol = 1e-10,
                                         double abs_tol = 1e-12, int max_iter = 500);

// ---------------------------------------------------------------------------

struct Descriptive {
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator; 0 for n = 1
  size_t n = 0;
  double se = 0.0;  // sd / sqrt(n)
};

struct ConditionDescriptives {
  Descriptive compatible;
  Descriptive incompatible;
};

Descriptive describe(std::span<const double> values);
// Throws std::invalid_argument when a condition has no rows.
ConditionDescriptives descriptives(const LmmDataset& data);

struct EffectSize {
  double d = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  size_t n1 = 0;  // compatible
  size_t n2 = 0;  // incompatible
  double pooled_sd = 0.0;
};

// d = (mean_incompatible - mean_compatible) / pooled SD, with the
// normal-approximation 95% interval.
EffectSize cohens_d(std::span<const double> compatible, std::span<const double> incompatible);

struct OverheadReport {
  std::vector<std::pair<std::string, double>> per_iat;  // percent
  double aggregate = 0.0;                               // unweighted mean of per_iat
};

// 100 * (mean_inc - mean_comp) / mean_comp per IAT. Throws on a zero
// compatible mean or an empty input.
OverheadReport overhead_percent(const std::vector<std::pair<std::string, ConditionDescriptives>>& per_iat);

// Two-sided p-value of a standard normal statistic.
double normal_two_sided_p(double z);

}  // namespace rmiat

#include "rmiat/detail/brent.hpp"
