#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "robopt/gp.hpp"
#include "robopt/stats.hpp"

namespace robopt {

/// Lower-bounded output transform. g^-1 is exponential below the matching point and
/// affine (slope 1) above it; the two segments agree in value and slope.
struct WarpParams {
  double y_lower = 0.0;
  double y_lower_cutoff = 1.0;
  double b_lower = 0.0;
  double a_lower = 1.0;
  double m_linear = 1.0;
  double b_linear = 1.0;
  double y_tilde_cutoff = 0.0;
};

inline WarpParams derive_warp(double y_lower, double y_lower_cutoff, double b_lower = 0.0) {
  const double span = y_lower_cutoff - y_lower;
  if (!(span > 0.0) || !std::isfinite(span) || !std::isfinite(b_lower))
    throw InvalidCutoffError("derive_warp: cutoff must exceed y_lower (span " +
                             std::to_string(span) + ")");
  WarpParams w;
  w.y_lower = y_lower;
  w.y_lower_cutoff = y_lower_cutoff;
  w.b_lower = b_lower;
  w.a_lower = 1.0 / span;
  w.m_linear = 1.0;
  w.y_tilde_cutoff = b_lower + span * std::log(span);
  w.b_linear = y_lower_cutoff - w.y_tilde_cutoff;
  return w;
}

inline double g_inverse(const WarpParams& w, double y_tilde) {
  if (y_tilde < w.y_tilde_cutoff) return w.y_lower + std::exp(w.a_lower * (y_tilde - w.b_lower));
  return y_tilde + w.b_linear;
}

inline double g_forward(const WarpParams& w, double y) {
  if (!(y > w.y_lower))
    throw OutOfDomainError("g_forward: value " + std::to_string(y) + " not above lower bound " +
                           std::to_string(w.y_lower));
  if (y < w.y_lower_cutoff) return w.b_lower + std::log(y - w.y_lower) / w.a_lower;
  return y - w.b_linear;
}

/// dg/dy.
inline double g_forward_derivative(const WarpParams& w, double y) {
  if (!(y > w.y_lower)) throw OutOfDomainError("g_forward_derivative: value not above lower bound");
  if (y < w.y_lower_cutoff) return (w.y_lower_cutoff - w.y_lower) / (y - w.y_lower);
  return 1.0;
}

struct BoundedPrediction {
  double median = 0.0;
  double sigma_minus = 0.0;
  double sigma_plus = 0.0;
  double variance_proxy = 0.0;
};

/// Space in which the GP variance handed to the robust estimator is expressed.
enum class VarianceSpace { bounded, transformed };

/// GP trained on g(Y); predictions are mapped back through the monotone g^-1.
struct WarpedGPModel {
  GPModel gp;
  WarpParams warp;
  /// Set when the data were constant and the transform reduced to the affine branch.
  bool affine_fallback = false;

  double bound() const { return warp.y_lower; }
  std::size_t dim() const { return gp.dim(); }

  BoundedPrediction predict_bounded(const Vector& p) const {
    const Prediction t = gp.predict(p);
    return map_back(t.mean, t.variance);
  }

  std::vector<BoundedPrediction> predict_bounded_batch(const Matrix& points) const {
    Vector mean, var;
    gp.predict_into(points, mean, var);
    std::vector<BoundedPrediction> out(static_cast<std::size_t>(points.rows()));
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = map_back(mean[static_cast<Eigen::Index>(i)], var[static_cast<Eigen::Index>(i)]);
    return out;
  }

  /// Medians and variances for the robust estimator.
  void robust_batch(const Matrix& points, VarianceSpace space, Vector& median,
                    Vector& variance) const {
    Vector mean, var;
    gp.predict_into(points, mean, var);
    median.resize(mean.size());
    variance.resize(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      const BoundedPrediction b = map_back(mean[i], var[i]);
      median[i] = b.median;
      variance[i] = space == VarianceSpace::bounded ? b.variance_proxy : var[i];
    }
  }

  BoundedPrediction map_back(double mu, double var) const {
    const double s = std::sqrt(std::max(var, 0.0));
    BoundedPrediction b;
    b.median = g_inverse(warp, mu);
    const double lo = g_inverse(warp, mu - s);
    const double hi = g_inverse(warp, mu + s);
    b.sigma_minus = b.median - lo;
    b.sigma_plus = hi - b.median;
    const double half = 0.5 * (hi - lo);
    b.variance_proxy = half * half;
    return b;
  }
};

inline BoundedPrediction predict_bounded(const WarpedGPModel& model, const Vector& p) {
  return model.predict_bounded(p);
}

struct WarpFitOptions : FitOptions {
  double y_lower = 0.0;
};

namespace detail {

/// Transformed values and the summed log-Jacobian for one cutoff.
inline double transform_values(const WarpParams& w, const Vector& y, Vector& out) {
  out.resize(y.size());
  double log_jac = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out[i] = g_forward(w, y[i]);
    log_jac += std::log(g_forward_derivative(w, y[i]));
  }
  return log_jac;
}

}  // namespace detail

/// Joint maximum-likelihood fit of the cutoff and the GP length scales on g(Y), with the
/// log-Jacobian of g included. b_lower is held at 0: it shifts g(Y) uniformly, which the
/// profiled mu0 absorbs, so it does not change the likelihood or any prediction.
inline WarpedGPModel fit_warped(const Matrix& train_points, const Vector& train_values,
                                const WarpFitOptions& opt) {
  detail::check_training_data(train_points, train_values, "fit_warped");
  const double yl = opt.y_lower;
  if (!(train_values.minCoeff() > yl))
    throw OutOfDomainError("fit_warped: every training value must exceed y_lower");

  Rng rng = make_rng(opt.seed);
  const auto idx = detail::fit_subset(train_points.rows(), opt.max_fit_points, rng);
  const Matrix xs = detail::select_rows(train_points, idx);
  const Vector ys = detail::select_rows(train_values, idx);
  const Vector edge = detail::axis_edges(train_points);
  const Vector log_edge = edge.array().log();
  const Eigen::Index n = train_points.cols();

  const double ymin = train_values.minCoeff();
  if (train_values.maxCoeff() == ymin) {
    // Constant data: cutoff below the data so every value sits on the affine branch.
    const WarpParams w = derive_warp(yl, yl + 0.5 * (ymin - yl), 0.0);
    Vector t;
    detail::transform_values(w, train_values, t);
    FitOptions gopt = opt;
    WarpedGPModel model{fit(train_points, t, gopt), w, true};
    return model;
  }

  std::vector<double> yv(train_values.data(), train_values.data() + train_values.size());
  const double span_lo = 0.5 * (ymin - yl);
  const double span_hi = std::max(percentile(yv, 90.0) - yl, span_lo * 1.000001);

  // Parameters: log length scales, then log(cutoff - y_lower).
  Vector lo(n + 1), hi(n + 1), slo(n + 1), shi(n + 1), first(n + 1);
  lo.head(n) = log_edge.array() + std::log(1e-3);
  hi.head(n) = log_edge.array() + std::log(10.0);
  slo.head(n) = log_edge.array() + std::log(0.05);
  shi.head(n) = log_edge.array() + std::log(2.0);
  first.head(n) = log_edge.array() + std::log(0.25);
  lo[n] = slo[n] = std::log(span_lo);
  hi[n] = shi[n] = std::log(span_hi);
  first[n] = 0.5 * (lo[n] + hi[n]);

  auto objective = [&](const Vector& x) {
    const WarpParams w = derive_warp(yl, yl + std::exp(x[n]), 0.0);
    Vector t;
    const double log_jac = detail::transform_values(w, ys, t);
    const double var_ref = detail::reference_variance(t);
    const detail::Profile p = detail::profile_likelihood(xs, t, x.head(n).array().exp(), var_ref);
    return p.ok ? p.loglik + log_jac : -std::numeric_limits<double>::infinity();
  };
  const auto best = detail::multistart_maximize(objective, first, lo, hi, slo, shi, opt.restarts,
                                                opt.max_evals, rng);
  if (!std::isfinite(best.f))
    throw FitError("fit_warped: every restart failed to factorize the kernel matrix (M=" +
                   std::to_string(train_points.rows()) + ")");

  const WarpParams w = derive_warp(yl, yl + std::exp(best.x[n]), 0.0);
  Vector t;
  detail::transform_values(w, train_values, t);
  GPModel gp = detail::build_profiled(train_points, t, best.x.head(n).array().exp(),
                                      detail::reference_variance(t));
  return WarpedGPModel{std::move(gp), w, false};
}

inline WarpedGPModel fit_warped(const Matrix& train_points, const Vector& train_values,
                                std::size_t restarts, std::uint64_t seed, double y_lower = 0.0) {
  WarpFitOptions opt;
  opt.restarts = restarts;
  opt.seed = seed;
  opt.y_lower = y_lower;
  return fit_warped(train_points, train_values, opt);
}

}  // namespace robopt
