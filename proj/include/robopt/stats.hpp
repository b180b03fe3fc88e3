#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "robopt/core.hpp"

namespace robopt {

namespace detail {
inline void require_nonempty(std::span<const double> values, const char* what) {
  if (values.empty()) throw EmptySampleError(std::string(what) + ": empty sample");
}
}  // namespace detail

/// Sorted copy of a sample, for repeated percentile queries.
class SortedSample {
 public:
  explicit SortedSample(std::span<const double> values) : v_(values.begin(), values.end()) {
    detail::require_nonempty(values, "percentile");
    std::sort(v_.begin(), v_.end());
  }

  /// Linear interpolation between closest ranks (position (n-1)*q/100).
  double percentile(double q) const {
    if (!(q >= 0.0 && q <= 100.0)) throw NumericError("percentile: q must lie in [0, 100]");
    const double h = static_cast<double>(v_.size() - 1) * (q / 100.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v_.size()) return v_.back();
    const double frac = h - static_cast<double>(lo);
    return v_[lo] + frac * (v_[lo + 1] - v_[lo]);
  }

  std::size_t size() const { return v_.size(); }

 private:
  std::vector<double> v_;
};

inline double percentile(std::span<const double> values, double q) {
  return SortedSample(values).percentile(q);
}

/// (P50 - P16, P84 - P50).
inline std::pair<double, double> perc_deviations(std::span<const double> values) {
  const SortedSample s(values);
  const double p50 = s.percentile(50.0);
  return {p50 - s.percentile(16.0), s.percentile(84.0) - p50};
}

inline double sample_mean(std::span<const double> values) {
  detail::require_nonempty(values, "mean");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Population variance (divides by M).
inline double population_variance(std::span<const double> values) {
  const double m = sample_mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size());
}

/// Standard error of the mean, sqrt(Var[Y] / M) with the population variance.
inline double mc_error(std::span<const double> values) {
  return std::sqrt(population_variance(values) / static_cast<double>(values.size()));
}

}  // namespace robopt
