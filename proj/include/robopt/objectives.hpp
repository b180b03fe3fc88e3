#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "robopt/core.hpp"
#include "robopt/distribution.hpp"
#include "robopt/parallel.hpp"
#include "robopt/stats.hpp"

namespace robopt {

/// Forward model f(p). Failures are signalled by throwing or by a non-finite return.
using ObjectiveFn = std::function<double(const Vector&)>;

struct ObjectiveModel {
  std::string name;
  std::size_t dim = 0;
  BoxDomain default_domain;
  double lower_bound = 0.0;
  ObjectiveFn eval;
};

/// Broad Gaussian plateau plus a tall ridge that is narrow along some axes.
struct RidgePlateauSpec {
  Vector plateau_center;
  double plateau_width = 1.0;
  double plateau_height = 1.0;
  Vector ridge_center;
  Vector ridge_widths;
  double ridge_height = 2.0;

  void validate() const {
    const auto n = plateau_center.size();
    if (n == 0 || ridge_center.size() != n || ridge_widths.size() != n)
      throw ShapeError("ridge_plateau: center/width dimensions must agree");
    if (!(plateau_width > 0.0) || !(plateau_height > 0.0) || !(ridge_widths.array() > 0.0).all())
      throw NumericError("ridge_plateau: widths and heights must be positive");
    if (!(ridge_height > plateau_height))
      throw NumericError("ridge_plateau: ridge_height must exceed plateau_height");
  }
};

inline double eval_ridge_plateau(const RidgePlateauSpec& s, const Vector& p) {
  require_dim(p, static_cast<std::size_t>(s.plateau_center.size()), "eval_ridge_plateau");
  const double dp = (p - s.plateau_center).squaredNorm();
  double ridge = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double d = (p[i] - s.ridge_center[i]) / s.ridge_widths[i];
    ridge += 0.5 * d * d;
  }
  return s.plateau_height * std::exp(-dp / (2.0 * s.plateau_width * s.plateau_width)) +
         s.ridge_height * std::exp(-ridge);
}

inline ObjectiveModel make_ridge_plateau(RidgePlateauSpec spec, BoxDomain domain,
                                         std::string name = "ridge_plateau") {
  spec.validate();
  if (domain.dim() != static_cast<std::size_t>(spec.plateau_center.size()))
    throw ShapeError("ridge_plateau: domain dimension mismatch");
  const std::size_t n = domain.dim();
  return {std::move(name), n, std::move(domain), 0.0,
          [spec = std::move(spec)](const Vector& p) { return eval_ridge_plateau(spec, p); }};
}

/// baseline + height * exp(-|p - c|^2 / (2 w^2)): one broad optimum.
inline ObjectiveModel make_gaussian_bump(Vector center, double width, double height,
                                         double baseline, BoxDomain domain) {
  if (!(width > 0.0) || !(height > 0.0) || !(baseline >= 0.0))
    throw NumericError("gaussian_bump: width, height > 0 and baseline >= 0 required");
  if (domain.dim() != static_cast<std::size_t>(center.size()))
    throw ShapeError("gaussian_bump: domain dimension mismatch");
  const std::size_t n = domain.dim();
  return {"gaussian_bump", n, std::move(domain), 0.0,
          [=](const Vector& p) {
            require_dim(p, n, "gaussian_bump");
            return baseline + height * std::exp(-(p - center).squaredNorm() / (2.0 * width * width));
          }};
}

inline ObjectiveModel make_constant(double value, BoxDomain domain) {
  const std::size_t n = domain.dim();
  return {"constant", n, std::move(domain), std::min(0.0, value), [=](const Vector& p) {
            require_dim(p, n, "constant");
            return value;
          }};
}

/// offset + amplitude * prod_i cos(2 pi (p_i - phase_i) / period_i); non-negative when
/// offset >= amplitude.
inline ObjectiveModel make_cosine_product(double offset, double amplitude, Vector periods,
                                          Vector phases, BoxDomain domain) {
  if (periods.size() != phases.size() || static_cast<std::size_t>(periods.size()) != domain.dim())
    throw ShapeError("cosine_product: dimension mismatch");
  if (!(offset >= amplitude) || !(amplitude >= 0.0) || !(periods.array() > 0.0).all())
    throw NumericError("cosine_product: need offset >= amplitude >= 0 and positive periods");
  const std::size_t n = domain.dim();
  return {"cosine_product", n, std::move(domain), 0.0, [=](const Vector& p) {
            require_dim(p, n, "cosine_product");
            constexpr double two_pi = 6.283185307179586;
            double prod = 1.0;
            for (Eigen::Index i = 0; i < p.size(); ++i)
              prod *= std::cos(two_pi * (p[i] - phases[i]) / periods[i]);
            return offset + amplitude * prod;
          }};
}

struct BatchEvaluation {
  Vector values;
  std::vector<bool> failed;
  std::vector<std::string> errors;  // one per entry, empty when ok

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), true));
  }
};

/// Evaluates every row of `points`, up to `parallelism` at a time. Output order
/// matches input order; failures are masked rather than propagated.
inline BatchEvaluation evaluate_batch(const ObjectiveFn& f, const Matrix& points,
                                      std::size_t parallelism) {
  const auto n = static_cast<std::size_t>(points.rows());
  BatchEvaluation out{Vector::Constant(static_cast<Eigen::Index>(n),
                                       std::numeric_limits<double>::quiet_NaN()),
                      std::vector<bool>(n, false), std::vector<std::string>(n)};
  std::vector<char> failed(n, 0);
  parallel_for(n, parallelism, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    try {
      const Vector p = points.row(r).transpose();
      const double v = f(p);
      if (!std::isfinite(v)) {
        failed[i] = 1;
        out.errors[i] = "non-finite objective value";
      } else {
        out.values[r] = v;
      }
    } catch (const std::exception& e) {
      failed[i] = 1;
      out.errors[i] = e.what();
    } catch (...) {
      failed[i] = 1;
      out.errors[i] = "unknown evaluation failure";
    }
  });
  for (std::size_t i = 0; i < n; ++i) out.failed[i] = failed[i] != 0;
  return out;
}

inline BatchEvaluation evaluate_batch(const ObjectiveModel& model, const Matrix& points,
                                      std::size_t parallelism) {
  return evaluate_batch(model.eval, points, parallelism);
}

/// Direct Monte Carlo median of f under `dist`. Ground-truth oracle for surrogate results.
inline double brute_force_robust_median(const ObjectiveFn& f, const ManufacturingDistribution& dist,
                                        std::size_t count, Rng& rng, std::size_t parallelism = 1) {
  if (count < 10000) throw ShapeError("brute_force_robust_median: count must be >= 1e4");
  const Matrix pts = sample_mvn(dist, count, rng);
  const BatchEvaluation ev = evaluate_batch(f, pts, parallelism);
  std::vector<double> ok;
  ok.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    if (!ev.failed[i]) ok.push_back(ev.values[static_cast<Eigen::Index>(i)]);
  if (ok.empty()) throw EvaluationError("brute_force_robust_median: every evaluation failed");
  return percentile(ok, 50.0);
}

inline double brute_force_robust_median(const ObjectiveModel& model,
                                        const ManufacturingDistribution& dist,
                                        std::size_t count, Rng& rng, std::size_t parallelism = 1) {
  return brute_force_robust_median(model.eval, dist, count, rng, parallelism);
}

}  // namespace robopt
