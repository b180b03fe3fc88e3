#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

#include "robopt/distribution.hpp"
#include "robopt/objectives.hpp"
#include "robopt/stats.hpp"
#include "robopt/warp.hpp"

namespace robopt {

struct RobustEstimate {
  double median = 0.0;
  double sigma_minus = 0.0;
  double sigma_plus = 0.0;
  double sigma_mc = 0.0;
  double sigma_gp_sq = 0.0;
  double sigma_median = 0.0;
  std::size_t n_total = 0;
  bool converged = false;
  std::size_t n_failed = 0;
};

enum class StopMode {
  /// Continue while the relative error is above tolerance and fewer than n_cap samples.
  as_printed,
  /// Continue until at least n_cap samples and the relative error is below tolerance
  /// (bounded by n_hard_cap).
  min_samples,
};

struct Alg1Config {
  std::size_t batch = 1000;
  double rel_tol = 1e-3;
  std::size_t n_cap = 50000;
  StopMode stop_mode = StopMode::as_printed;
  VarianceSpace variance_space = VarianceSpace::bounded;
  std::size_t n_hard_cap = 1000000;

  void validate() const {
    if (batch == 0) throw ShapeError("algorithm1: batch must be positive");
    if (!(rel_tol > 0.0)) throw NumericError("algorithm1: rel_tol must be positive");
    if (n_cap < batch) throw ShapeError("algorithm1: n_cap must be at least one batch");
    if (n_hard_cap < n_cap) throw ShapeError("algorithm1: n_hard_cap must be >= n_cap");
  }
};

/// Anything that maps a batch of design points to predicted medians and variances.
template <class S>
concept RobustSurrogate = requires(const S& s, const Matrix& pts, VarianceSpace space, Vector& a,
                                   Vector& b) {
  { s.dim() } -> std::convertible_to<std::size_t>;
  s.robust_batch(pts, space, a, b);
};

namespace detail {

inline RobustEstimate summarize(const std::vector<double>& y, double sigma_gp_sq) {
  const SortedSample s(y);
  RobustEstimate e;
  e.median = s.percentile(50.0);
  e.sigma_minus = e.median - s.percentile(16.0);
  e.sigma_plus = s.percentile(84.0) - e.median;
  e.sigma_mc = mc_error(y);
  e.sigma_gp_sq = sigma_gp_sq;
  e.sigma_median = std::sqrt(sigma_gp_sq + e.sigma_mc * e.sigma_mc);
  e.n_total = y.size();
  return e;
}

}  // namespace detail

/// Convergence-controlled Monte Carlo estimate of the median of the surrogate under `dist`.
/// Samples are drawn in batches; after every batch the relative error
/// sigma_MC(Y) / |P50(Y)| is compared with the tolerance.
template <RobustSurrogate S>
RobustEstimate robust_estimate_surrogate(const S& model, const ManufacturingDistribution& dist,
                                         const Alg1Config& cfg, Rng& rng) {
  cfg.validate();
  if (model.dim() != dist.dim())
    throw ShapeError("robust_estimate_surrogate: model and distribution dimensions differ");
  std::vector<double> y_tot, s_tot;
  double sigma_rel = std::numeric_limits<double>::infinity();
  Vector median, variance;
  auto keep_going = [&] {
    const std::size_t n = y_tot.size();
    if (cfg.stop_mode == StopMode::as_printed) return sigma_rel >= cfg.rel_tol && n < cfg.n_cap;
    return (n < cfg.n_cap || sigma_rel >= cfg.rel_tol) && n < cfg.n_hard_cap;
  };
  while (keep_going()) {
    const Matrix pts = sample_mvn(dist, cfg.batch, rng);
    model.robust_batch(pts, cfg.variance_space, median, variance);
    y_tot.insert(y_tot.end(), median.data(), median.data() + median.size());
    s_tot.insert(s_tot.end(), variance.data(), variance.data() + variance.size());
    const double p50 = percentile(y_tot, 50.0);
    const double err = mc_error(y_tot);
    sigma_rel = p50 != 0.0 ? err / std::abs(p50) : std::numeric_limits<double>::infinity();
  }
  RobustEstimate e = detail::summarize(y_tot, percentile(s_tot, 50.0));
  e.converged = sigma_rel < cfg.rel_tol;
  return e;
}

/// Robust estimate from already evaluated samples; failures are excluded, more than 10%
/// failures is an error.
inline RobustEstimate robust_estimate_from_batch(const BatchEvaluation& ev) {
  const std::size_t count = ev.failed.size();
  const std::size_t failed = ev.failures();
  if (10 * failed > count)
    throw EvaluationError("robust_estimate_direct: " + std::to_string(failed) + " of " +
                          std::to_string(count) + " evaluations failed (more than 10%)");
  std::vector<double> y;
  y.reserve(count - failed);
  for (std::size_t i = 0; i < count; ++i)
    if (!ev.failed[i]) y.push_back(ev.values[static_cast<Eigen::Index>(i)]);
  RobustEstimate e = detail::summarize(y, 0.0);
  e.sigma_median = e.sigma_mc;
  e.converged = true;
  e.n_failed = failed;
  return e;
}

/// Robust estimate from `count` direct objective evaluations (no surrogate term).
inline RobustEstimate robust_estimate_direct(const ObjectiveFn& objective,
                                             const ManufacturingDistribution& dist,
                                             std::size_t count, std::size_t parallelism,
                                             Rng& rng) {
  if (count < 2) throw ShapeError("robust_estimate_direct: count must be at least 2");
  const Matrix pts = sample_mvn(dist, count, rng);
  return robust_estimate_from_batch(evaluate_batch(objective, pts, parallelism));
}

}  // namespace robopt
