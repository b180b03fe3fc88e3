#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "robopt/core.hpp"

namespace robopt::detail {

struct NelderMeadOptions {
  std::size_t max_evals = 400;
  double ftol = 1e-9;        // relative spread of simplex values
  double xtol = 1e-7;        // simplex extent, relative to box width
  double initial_step = 0.1; // fraction of box width
};

struct NelderMeadResult {
  Vector x;
  double f = std::numeric_limits<double>::infinity();
  std::size_t evals = 0;
};

/// Bounded Nelder-Mead minimization; trial points are projected onto the box.
/// Non-finite objective values are treated as +inf.
inline NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, Vector x0,
                                    const Vector& lo, const Vector& hi,
                                    const NelderMeadOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  const Vector width = hi - lo;
  auto project = [&](Vector x) { return Vector(x.cwiseMax(lo).cwiseMin(hi)); };
  NelderMeadResult res;
  auto eval = [&](const Vector& x) {
    ++res.evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Vector> simplex;
  std::vector<double> values;
  simplex.push_back(project(std::move(x0)));
  values.push_back(eval(simplex[0]));
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector x = simplex[0];
    const double step = opt.initial_step * width[i];
    x[i] = x[i] + step <= hi[i] ? x[i] + step : x[i] - step;
    simplex.push_back(project(x));
    values.push_back(eval(simplex.back()));
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n) + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Vector> s2;
    std::vector<double> v2;
    for (std::size_t k : order) {
      s2.push_back(simplex[k]);
      v2.push_back(values[k]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };

  constexpr double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;
  sort_simplex();
  while (res.evals < opt.max_evals) {
    const double fbest = values.front(), fworst = values.back();
    double extent = 0.0;
    for (std::size_t k = 1; k < simplex.size(); ++k)
      for (Eigen::Index i = 0; i < n; ++i)
        extent = std::max(extent, std::abs(simplex[k][i] - simplex[0][i]) /
                                      (width[i] > 0 ? width[i] : 1.0));
    if (std::isfinite(fworst) && std::abs(fworst - fbest) <= opt.ftol * (1.0 + std::abs(fbest)))
      break;
    if (extent <= opt.xtol) break;

    Vector centroid = Vector::Zero(n);
    for (std::size_t k = 0; k + 1 < simplex.size(); ++k) centroid += simplex[k];
    centroid /= static_cast<double>(n);

    const Vector xr = project(centroid + alpha * (centroid - simplex.back()));
    const double fr = eval(xr);
    if (fr < values.front()) {
      const Vector xe = project(centroid + gamma * (xr - centroid));
      const double fe = eval(xe);
      if (fe < fr) {
        simplex.back() = xe;
        values.back() = fe;
      } else {
        simplex.back() = xr;
        values.back() = fr;
      }
    } else if (fr < values[values.size() - 2]) {
      simplex.back() = xr;
      values.back() = fr;
    } else {
      const bool outside = fr < values.back();
      const Vector xc = outside ? project(centroid + rho * (xr - centroid))
                                : project(centroid + rho * (simplex.back() - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : values.back())) {
        simplex.back() = xc;
        values.back() = fc;
      } else {
        for (std::size_t k = 1; k < simplex.size(); ++k) {
          simplex[k] = project(simplex[0] + shrink * (simplex[k] - simplex[0]));
          values[k] = eval(simplex[k]);
        }
      }
    }
    sort_simplex();
  }
  res.x = simplex.front();
  res.f = values.front();
  return res;
}

}  // namespace robopt::detail
