#include "rmiat/mixedfx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include "rmiat/kernels.hpp"

namespace rmiat {

namespace {

constexpr int kFixedEffects = 2;
constexpr int kCoarseGridPoints = 41;

struct Gls {
  double a00, a01, a11;  // X' H^-1 X
  double b0, b1;         // beta
  double rss;            // r' H^-1 r
  double det;
  double log_det_h;
};

Gls solve_gls(const GroupSums& s, double lambda) {
  Gls g{};
  double r0 = 0.0, r1 = 0.0;
  for (size_t k = 0; k < s.groups(); ++k) {
    const auto n = static_cast<double>(s.n[k]);
    const auto c = static_cast<double>(s.c[k]);
    const double b = 1.0 / (1.0 + lambda * n);
    const double wxx = c * (n - c) / n;
    g.a00 += n * b;
    g.a01 += c * b;
    g.a11 += wxx + c * c * b / n;
    r0 += s.sum_y[k] * b;
    r1 += s.wxy[k] + c * s.sum_y[k] * b / n;
    g.log_det_h += std::log1p(lambda * n);
  }
  g.det = g.a00 * g.a11 - g.a01 * g.a01;
  g.b0 = (g.a11 * r0 - g.a01 * r1) / g.det;
  g.b1 = (g.a00 * r1 - g.a01 * r0) / g.det;
  for (size_t k = 0; k < s.groups(); ++k) {
    const auto n = static_cast<double>(s.n[k]);
    const auto c = static_cast<double>(s.c[k]);
    const double b = 1.0 / (1.0 + lambda * n);
    const double wxx = c * (n - c) / n;
    const double within = s.wyy[k] - 2.0 * g.b1 * s.wxy[k] + g.b1 * g.b1 * wxx;
    const double total = s.sum_y[k] - g.b0 * n - g.b1 * c;
    g.rss += std::max(0.0, within) + total * total * b / n;
  }
  return g;
}

double objective_from(const Gls& g, int64_t rows, Criterion criterion) {
  constexpr double kLog2Pi = 1.8378770664093453;
  const auto n = static_cast<double>(rows);
  if (!(g.rss > 0.0) || !(g.det > 0.0)) return -std::numeric_limits<double>::infinity();
  if (criterion == Criterion::REML) {
    const double dof = n - kFixedEffects;
    return -0.5 * (dof * (1.0 + kLog2Pi + std::log(g.rss / dof)) + g.log_det_h + std::log(g.det));
  }
  return -0.5 * (n * (1.0 + kLog2Pi + std::log(g.rss / n)) + g.log_det_h);
}

// The dataset with y standardized and groups mapped to dense indices.
struct Prepared {
  std::vector<double> y;
  std::vector<int> group;
  size_t n_groups = 0;
  double center = 0.0;
  double scale = 1.0;
  GroupSums sums;
};

Prepared prepare(const LmmDataset& data) {
  validate_dataset(data);
  Prepared p;
  std::map<int, int> dense;
  for (int g : data.group) dense.emplace(g, 0);
  int next = 0;
  for (auto& [_, idx] : dense) idx = next++;
  p.n_groups = dense.size();
  p.group.reserve(data.group.size());
  for (int g : data.group) p.group.push_back(dense[g]);

  const auto n = static_cast<double>(data.y.size());
  p.center = std::accumulate(data.y.begin(), data.y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : data.y) ss += (v - p.center) * (v - p.center);
  p.scale = std::sqrt(ss / n);
  if (!(p.scale > 0.0) || !std::isfinite(p.scale)) {
    throw NonFiniteObjectiveError("response has zero or non-finite variance");
  }
  p.y.reserve(data.y.size());
  for (double v : data.y) p.y.push_back((v - p.center) / p.scale);
  p.sums = kernels::group_sums_parallel(p.y, data.condition, p.group, p.n_groups);
  return p;
}

double log_scale_adjustment(const Prepared& p, int64_t rows, Criterion criterion) {
  const double k = criterion == Criterion::REML ? static_cast<double>(rows - kFixedEffects) : static_cast<double>(rows);
  return -k * std::log(p.scale);
}

LmmFit fit_from(const Prepared& p, double lambda, Criterion criterion) {
  const int64_t rows = p.sums.rows();
  const Gls g = solve_gls(p.sums, lambda);
  const double obj = objective_from(g, rows, criterion);
  if (!std::isfinite(obj)) throw NonFiniteObjectiveError("profiled objective is not finite");

  const double dof = criterion == Criterion::REML ? static_cast<double>(rows - kFixedEffects) : static_cast<double>(rows);
  const double sigma2 = g.rss / dof;
  const double var_b0 = sigma2 * g.a11 / g.det;
  const double var_b1 = sigma2 * g.a00 / g.det;

  LmmFit f;
  f.criterion = criterion;
  f.lambda = lambda;
  f.at_boundary = lambda == 0.0;
  f.n = static_cast<size_t>(rows);
  f.n_groups = p.n_groups;
  f.beta_intercept = p.center + p.scale * g.b0;
  f.beta_condition = p.scale * g.b1;
  f.se_intercept = p.scale * std::sqrt(var_b0);
  f.se_condition = p.scale * std::sqrt(var_b1);
  f.sigma2_e = p.scale * p.scale * sigma2;
  f.sigma2_u = lambda * f.sigma2_e;
  f.loglik = obj + log_scale_adjustment(p, rows, criterion);
  f.z = f.beta_condition / f.se_condition;
  f.p_value = normal_two_sided_p(f.z);
  return f;
}

}  // namespace

std::string_view to_string(Criterion c) { return c == Criterion::REML ? "REML" : "ML"; }

int64_t GroupSums::rows() const { return std::accumulate(n.begin(), n.end(), int64_t{0}); }

void validate_dataset(const LmmDataset& data) {
  const size_t n = data.y.size();
  if (data.condition.size() != n || data.group.size() != n) {
    throw DegenerateDesignError("y, condition and group must have the same length");
  }
  if (n < 3) throw DegenerateDesignError("need at least 3 observations, got " + std::to_string(n));
  bool has0 = false, has1 = false;
  for (auto c : data.condition) {
    if (c == 0) has0 = true;
    else if (c == 1) has1 = true;
    else throw DegenerateDesignError("condition codes must be 0 or 1");
  }
  if (!has0 || !has1) throw DegenerateDesignError("both conditions must be present");
  const int first = data.group.front();
  if (std::all_of(data.group.begin(), data.group.end(), [&](int g) { return g == first; })) {
    throw DegenerateDesignError("need at least 2 groups");
  }
  for (double v : data.y) {
    if (!std::isfinite(v)) throw DegenerateDesignError("response contains non-finite values");
  }
}

double profiled_objective(const GroupSums& sums, double lambda, Criterion criterion) {
  return objective_from(solve_gls(sums, lambda), sums.rows(), criterion);
}

double profiled_objective(const LmmDataset& data, double lambda, Criterion criterion) {
  const Prepared p = prepare(data);
  return profiled_objective(p.sums, lambda, criterion) + log_scale_adjustment(p, p.sums.rows(), criterion);
}

LmmFit fit_at_lambda(const LmmDataset& data, double lambda, Criterion criterion) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
  return fit_from(prepare(data), lambda, criterion);
}

LmmFit fit_random_intercept(const LmmDataset& data, Criterion criterion) {
  const Prepared p = prepare(data);

  std::vector<double> grid(kCoarseGridPoints);
  for (int i = 0; i < kCoarseGridPoints; ++i) {
    grid[static_cast<size_t>(i)] =
        kLogLambdaMin + (kLogLambdaMax - kLogLambdaMin) * i / static_cast<double>(kCoarseGridPoints - 1);
  }
  const auto values = kernels::objective_grid_parallel(p.sums, grid, criterion);
  const auto best = static_cast<size_t>(std::max_element(values.begin(), values.end()) - values.begin());
  if (!std::isfinite(values[best])) throw NonFiniteObjectiveError("profiled objective is not finite on the search grid");

  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  auto negative = [&](double t) {
    const double v = profiled_objective(p.sums, std::exp(t), criterion);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
  };
  auto [t_star, neg_star] = brent_minimize(negative, lo, hi, 1e-10, 1e-12);
  double lambda = std::exp(t_star);
  double obj = -neg_star;
  if (values[best] > obj) {
    lambda = std::exp(grid[best]);
    obj = values[best];
  }

  const double at_zero = profiled_objective(p.sums, 0.0, criterion);
  if (std::isfinite(at_zero) && at_zero >= obj - 1e-12 * std::max(1.0, std::fabs(obj))) lambda = 0.0;

  return fit_from(p, lambda, criterion);
}

double normal_two_sided_p(double z) { return std::erfc(std::fabs(z) / std::numbers::sqrt2); }

Descriptive describe(std::span<const double> values) {
  Descriptive d;
  d.n = values.size();
  if (d.n == 0) return d;
  d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(d.n);
  if (d.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - d.mean) * (v - d.mean);
    d.sd = std::sqrt(ss / static_cast<double>(d.n - 1));
  }
  d.se = d.sd / std::sqrt(static_cast<double>(d.n));
  return d;
}

ConditionDescriptives descriptives(const LmmDataset& data) {
  std::vector<double> comp, inc;
  for (size_t i = 0; i < data.y.size(); ++i) (data.condition[i] ? inc : comp).push_back(data.y[i]);
  if (comp.empty() || inc.empty()) throw std::invalid_argument("descriptives need rows in both conditions");
  return {describe(comp), describe(inc)};
}

EffectSize cohens_d(std::span<const double> compatible, std::span<const double> incompatible) {
  if (compatible.size() < 2 || incompatible.size() < 2) {
    throw std::invalid_argument("Cohen's d needs at least two observations per condition");
  }
  const Descriptive a = describe(compatible);
  const Descriptive b = describe(incompatible);
  const auto n1 = static_cast<double>(a.n);
  const auto n2 = static_cast<double>(b.n);
  const double pooled = std::sqrt(((n1 - 1.0) * a.sd * a.sd + (n2 - 1.0) * b.sd * b.sd) / (n1 + n2 - 2.0));
  if (!(pooled > 0.0)) throw std::invalid_argument("pooled standard deviation is zero");
  EffectSize e;
  e.n1 = a.n;
  e.n2 = b.n;
  e.pooled_sd = pooled;
  e.d = (b.mean - a.mean) / pooled;
  const double half = 1.96 * std::sqrt((n1 + n2) / (n1 * n2) + e.d * e.d / (2.0 * (n1 + n2)));
  e.ci_low = e.d - half;
  e.ci_high = e.d + half;
  return e;
}

OverheadReport overhead_percent(const std::vector<std::pair<std::string, ConditionDescriptives>>& per_iat) {
  if (per_iat.empty()) throw std::invalid_argument("overhead needs at least one IAT");
  OverheadReport r;
  double total = 0.0;
  for (const auto& [id, d] : per_iat) {
    if (d.compatible.mean == 0.0) throw std::invalid_argument("compatible mean is zero for " + id);
    const double pct = 100.0 * (d.incompatible.mean - d.compatible.mean) / d.compatible.mean;
    r.per_iat.emplace_back(id, pct);
    total += pct;
  }
  r.aggregate = total / static_cast<double>(per_iat.size());
  return r;
}

}  // namespace rmiat
