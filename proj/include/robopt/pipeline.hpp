#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "robopt/bayesopt.hpp"
#include "robopt/distribution.hpp"
#include "robopt/objectives.hpp"
#include "robopt/parallel.hpp"
#include "robopt/robust.hpp"
#include "robopt/sobol.hpp"
#include "robopt/stats.hpp"
#include "robopt/warp.hpp"

namespace robopt {

/// One forward-model call, reported to an optional log sink.
struct EvaluationRecord {
  std::string stage;
  std::size_t index = 0;
  Vector point;
  double value = 0.0;
  bool failed = false;
  std::string error;
};

using EvaluationSink = std::function<void(const EvaluationRecord&)>;

struct TrainingSet {
  Matrix points;
  Vector values;
  std::string model;
  std::size_t skip = 0;
  /// Sobol indices (relative to skip) whose evaluation failed, with the reason.
  std::vector<std::size_t> failed_indices;
  std::vector<std::string> failed_errors;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

struct PassConfig {
  BoxDomain train_domain;
  std::size_t n_train = 4096;
  Vector sigma_manuf;
  std::optional<double> outlier_threshold;
  std::size_t n_eval = 4096;
  double cluster_radius = 0.25;
  std::size_t n_candidates = 6;
  std::size_t bo_budget_per_candidate = 64;
  std::size_t n_verify = 64;
  std::size_t sobol_skip = 0;
  Alg1Config alg1;
  std::size_t gp_restarts = 8;
  std::size_t gp_max_fit_points = 512;
  BOOptions bo;
  /// Root of this pass's named random streams.
  std::uint64_t seed = 0;

  void validate() const;
};

// ---------------------------------------------------------------------------------------
// Domains

inline void check_sigma(const Vector& sigma, std::size_t dim, const char* what) {
  if (static_cast<std::size_t>(sigma.size()) != dim)
    throw ShapeError(std::string(what) + ": sigma has " + std::to_string(sigma.size()) +
                     " entries, domain has " + std::to_string(dim) + " axes");
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (!(sigma[i] >= 0.0) || !std::isfinite(sigma[i]))
      throw NumericError(std::string(what) + ": sigma on axis " + std::to_string(i) +
                         " must be finite and non-negative");
}

/// Training domain shrunk by three standard deviations per side.
inline BoxDomain shrink_eval_domain(const BoxDomain& train, const Vector& sigma) {
  check_sigma(sigma, train.dim(), "shrink_eval_domain");
  Vector lo = train.lower() + 3.0 * sigma;
  Vector hi = train.upper() - 3.0 * sigma;
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    const bool has_scatter = sigma[i] > 0.0;
    if (lo[i] > hi[i] || (has_scatter && !(lo[i] < hi[i])))
      throw DomainTooSmallError("axis " + train.labels()[static_cast<std::size_t>(i)] +
                                    ": training span " + std::to_string(train.edge(i)) +
                                    " leaves no evaluation domain at 3 sigma = " +
                                    std::to_string(3.0 * sigma[i]) + " per side",
                                static_cast<std::size_t>(i));
  }
  return BoxDomain(lo, hi, train.labels(), train.units());
}

/// [c - k sigma, c + k sigma] per axis.
inline BoxDomain narrow_domain(const Vector& center, const Vector& sigma, double half_width_sigmas = 5.0) {
  check_sigma(sigma, static_cast<std::size_t>(center.size()), "narrow_domain");
  return BoxDomain(center - half_width_sigmas * sigma, center + half_width_sigmas * sigma);
}

struct ClippedDomain {
  BoxDomain domain;
  std::vector<std::size_t> clipped_axes;
  bool degenerate = false;
};

/// narrow_domain intersected with `outer`; reports which axes were cut.
inline ClippedDomain narrow_domain_clipped(const Vector& center, const Vector& sigma, const BoxDomain& outer,
                                           double half_width_sigmas = 5.0) {
  const BoxDomain raw = narrow_domain(center, sigma, half_width_sigmas);
  ClippedDomain out;
  Vector lo = raw.lower(), hi = raw.upper();
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (lo[i] < outer.lower()[i] || hi[i] > outer.upper()[i]) out.clipped_axes.push_back(static_cast<std::size_t>(i));
    lo[i] = std::clamp(lo[i], outer.lower()[i], outer.upper()[i]);
    hi[i] = std::clamp(hi[i], outer.lower()[i], outer.upper()[i]);
  }
  out.domain = BoxDomain(lo, hi, outer.labels(), outer.units());
  out.degenerate = out.domain.is_degenerate();
  return out;
}

inline void PassConfig::validate() const {
  check_sigma(sigma_manuf, train_domain.dim(), "pass config");
  for (std::size_t i = 0; i < train_domain.dim(); ++i)
    if (train_domain.edge(i) < 6.0 * sigma_manuf[static_cast<Eigen::Index>(i)])
      throw DomainTooSmallError("axis " + train_domain.labels()[i] + ": training span " +
                                    std::to_string(train_domain.edge(i)) + " is below 6 sigma = " +
                                    std::to_string(6.0 * sigma_manuf[static_cast<Eigen::Index>(i)]),
                                i);
  shrink_eval_domain(train_domain, sigma_manuf);
  if (n_train < 2) throw ShapeError("pass config: n_train must be at least 2");
  if (n_eval < 1) throw ShapeError("pass config: n_eval must be at least 1");
  if (n_verify < 2) throw ShapeError("pass config: n_verify must be at least 2");
  if (n_candidates < 1) throw ShapeError("pass config: n_candidates must be at least 1");
  if (!(cluster_radius >= 0.0)) throw NumericError("pass config: cluster_radius must be non-negative");
  if (gp_restarts < 1) throw ShapeError("pass config: gp_restarts must be at least 1");
  alg1.validate();
}

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// ---------------------------------------------------------------------------------------
// Step 1: training data

inline TrainingSet generate_training_data(const ObjectiveModel& model, const BoxDomain& domain, std::size_t n,
                                          std::size_t skip, std::size_t parallelism,
                                          const EvaluationSink& sink = {}, const std::string& stage = "train") {
  if (n < 2) throw ShapeError("generate_training_data: n must be at least 2");
  if (domain.dim() != model.dim) throw ShapeError("generate_training_data: model and domain dimensions differ");
  const Matrix pts = scale_to_domain(sobol_sequence(domain.dim(), n, skip), domain);
  const BatchEvaluation ev = evaluate_batch(model, pts, parallelism);

  TrainingSet t;
  t.model = model.name;
  t.skip = skip;
  std::vector<Eigen::Index> ok;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (sink) sink({stage, i, pts.row(r).transpose(), ev.values[r], static_cast<bool>(ev.failed[i]), ev.errors[i]});
    if (ev.failed[i]) {
      t.failed_indices.push_back(i);
      t.failed_errors.push_back(ev.errors[i]);
    } else {
      ok.push_back(r);
    }
  }
  if (10 * t.failed_indices.size() > n)
    throw EvaluationError("generate_training_data: " + std::to_string(t.failed_indices.size()) + " of " +
                          std::to_string(n) + " evaluations failed (more than 10%)");
  t.points.resize(static_cast<Eigen::Index>(ok.size()), pts.cols());
  t.values.resize(static_cast<Eigen::Index>(ok.size()));
  for (std::size_t k = 0; k < ok.size(); ++k) {
    t.points.row(static_cast<Eigen::Index>(k)) = pts.row(ok[k]);
    t.values[static_cast<Eigen::Index>(k)] = ev.values[ok[k]];
  }
  return t;
}

// ---------------------------------------------------------------------------------------
// Step 2: outliers

struct RemovedPoint {
  std::size_t index = 0;  // row in the unfiltered training set
  Vector point;
  double value = 0.0;
  std::string reason;  // "above_threshold" or "at_or_below_bound"
};

struct FilterResult {
  TrainingSet kept;
  std::vector<RemovedPoint> removed;
  double threshold = 0.0;
  bool default_rule = false;
};

/// median + 10 (P84 - P50) of the values.
inline double default_outlier_threshold(const Vector& values) {
  const SortedSample s(std::vector<double>(values.data(), values.data() + values.size()));
  return s.percentile(50.0) + 10.0 * (s.percentile(84.0) - s.percentile(50.0));
}

/// Removes values strictly above the threshold (or the default rule when none is given),
/// and values at or below `y_lower`, which the bounded surrogate cannot represent.
inline FilterResult filter_outliers(const TrainingSet& train, std::optional<double> threshold,
                                    double y_lower = -std::numeric_limits<double>::infinity()) {
  if (train.size() == 0) throw EmptySampleError("filter_outliers: empty training set");
  FilterResult r;
  r.default_rule = !threshold.has_value();
  r.threshold = threshold ? *threshold : default_outlier_threshold(train.values);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < train.values.rows(); ++i) {
    const double v = train.values[i];
    if (v > r.threshold)
      r.removed.push_back({static_cast<std::size_t>(i), train.points.row(i).transpose(), v, "above_threshold"});
    else if (!(v > y_lower))
      r.removed.push_back({static_cast<std::size_t>(i), train.points.row(i).transpose(), v, "at_or_below_bound"});
    else
      keep.push_back(i);
  }
  if (10 * r.removed.size() > train.size())
    throw NumericError("filter_outliers: threshold " + std::to_string(r.threshold) + " would remove " +
                       std::to_string(r.removed.size()) + " of " + std::to_string(train.size()) +
                       " training points (more than 10%)");
  r.kept.model = train.model;
  r.kept.skip = train.skip;
  r.kept.failed_indices = train.failed_indices;
  r.kept.failed_errors = train.failed_errors;
  r.kept.points.resize(static_cast<Eigen::Index>(keep.size()), train.points.cols());
  r.kept.values.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    r.kept.points.row(static_cast<Eigen::Index>(k)) = train.points.row(keep[k]);
    r.kept.values[static_cast<Eigen::Index>(k)] = train.values[keep[k]];
  }
  return r;
}

// ---------------------------------------------------------------------------------------
// Step 3: robust map and clustering

struct MapEntry {
  std::size_t index = 0;  // Sobol index within the map
  Vector point;
  RobustEstimate estimate;
};

inline ManufacturingDistribution scatter_at(const Vector& p, const Vector& sigma) {
  return ManufacturingDistribution::diagonal(p, sigma);
}

/// Descending by median; equal medians keep their original order.
inline void sort_by_median(std::vector<MapEntry>& v) {
  std::stable_sort(v.begin(), v.end(),
                   [](const MapEntry& a, const MapEntry& b) { return a.estimate.median > b.estimate.median; });
}

/// Algorithm 1 at n_eval Sobol points of the evaluation domain, sorted by median (descending).
/// Point i uses random stream child_seed(seed, i), so results do not depend on parallelism.
template <RobustSurrogate S>
std::vector<MapEntry> batch_robust_map(const S& surrogate, const BoxDomain& eval_domain, std::size_t n_eval,
                                       const Vector& sigma, const Alg1Config& cfg, std::uint64_t seed,
                                       std::size_t parallelism, std::size_t skip = 0) {
  check_sigma(sigma, eval_domain.dim(), "batch_robust_map");
  if (n_eval < 1) throw ShapeError("batch_robust_map: n_eval must be positive");
  const Matrix pts = scale_to_domain(sobol_sequence(eval_domain.dim(), n_eval, skip), eval_domain);
  std::vector<MapEntry> out(n_eval);
  parallel_for(n_eval, parallelism, [&](std::size_t i) {
    Rng rng = make_rng(child_seed(seed, i));
    const Vector p = pts.row(static_cast<Eigen::Index>(i)).transpose();
    out[i] = {i, p, robust_estimate_surrogate(surrogate, scatter_at(p, sigma), cfg, rng)};
  });
  sort_by_median(out);
  return out;
}

inline double unit_distance(const BoxDomain& d, const Vector& a, const Vector& b) {
  return (d.to_unit(a) - d.to_unit(b)).norm();
}

/// Greedy: keep an entry iff it is at least `radius` (unit-cube distance) from every kept one.
inline std::vector<MapEntry> cluster_filter(const std::vector<MapEntry>& sorted, const BoxDomain& eval_domain,
                                            double radius = 0.25) {
  std::vector<MapEntry> kept;
  for (const auto& e : sorted) {
    bool far = true;
    for (const auto& k : kept)
      if (unit_distance(eval_domain, e.point, k.point) < radius) {
        far = false;
        break;
      }
    if (far) kept.push_back(e);
  }
  return kept;
}

// ---------------------------------------------------------------------------------------
// Step 4: convergence

struct ConvergedCandidate {
  Vector start;
  Vector point;
  RobustEstimate estimate;
  std::size_t origin = 0;  // position in the candidate list
  std::vector<HistoryRecord> history;
};

struct ConvergeOptions {
  Alg1Config alg1;
  std::size_t bo_budget = 64;
  double cluster_radius = 0.25;
  BOOptions bo;
};

/// One maximizing BO run per candidate on p -> robust median of the surrogate under N(p, sigma).
/// Each run is seeded with the candidate and every map entry within the cluster radius.
/// Converged points closer than the radius are merged, keeping the best.
template <RobustSurrogate S>
std::vector<ConvergedCandidate> converge_candidates(const S& surrogate, const std::vector<MapEntry>& candidates,
                                                    const std::vector<MapEntry>& robust_map,
                                                    const BoxDomain& eval_domain, const Vector& sigma,
                                                    const ConvergeOptions& opt, std::uint64_t seed) {
  check_sigma(sigma, eval_domain.dim(), "converge_candidates");
  std::vector<ConvergedCandidate> out;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const MapEntry& c = candidates[k];
    if (!eval_domain.contains(c.point, 1e-9 * (1.0 + eval_domain.upper().cwiseAbs().maxCoeff())))
      throw OutOfDomainError("converge_candidates: candidate outside the evaluation domain");
    ConvergedCandidate cc{c.point, c.point, c.estimate, k, {}};
    if (opt.bo_budget == 0) {
      out.push_back(std::move(cc));
      continue;
    }
    const std::uint64_t cseed = child_seed(seed, k);
    std::map<std::vector<double>, RobustEstimate> cache;
    std::vector<Observation> seeds{{c.point, c.estimate.median}};
    cache[to_std(c.point)] = c.estimate;
    for (const auto& e : robust_map) {
      if (e.index == c.index || unit_distance(eval_domain, e.point, c.point) >= opt.cluster_radius) continue;
      seeds.push_back({e.point, e.estimate.median});
      cache[to_std(e.point)] = e.estimate;
    }
    std::uint64_t calls = 0;
    auto objective = [&](const Vector& p) {
      Rng rng = make_rng(child_seed(cseed, ++calls));
      const RobustEstimate est = robust_estimate_surrogate(surrogate, scatter_at(p, sigma), opt.alg1, rng);
      cache[to_std(p)] = est;
      return est.median;
    };
    Rng bo_rng = make_rng(child_seed(cseed, 0));
    BOResult r = bo_run(objective, eval_domain, opt.bo_budget, seeds, Mode::maximize, bo_rng, opt.bo);
    cc.point = r.best_point;
    cc.estimate = cache.at(to_std(r.best_point));
    cc.history = std::move(r.history);
    out.push_back(std::move(cc));
  }
  std::stable_sort(out.begin(), out.end(), [](const ConvergedCandidate& a, const ConvergedCandidate& b) {
    return a.estimate.median > b.estimate.median;
  });
  std::vector<ConvergedCandidate> merged;
  for (auto& c : out) {
    bool dup = false;
    for (const auto& m : merged)
      if (unit_distance(eval_domain, c.point, m.point) < opt.cluster_radius) {
        dup = true;
        break;
      }
    if (!dup) merged.push_back(std::move(c));
  }
  return merged;
}

// ---------------------------------------------------------------------------------------
// Step 5: verification

struct VerifiedCandidate {
  Vector point;
  RobustEstimate estimate;
  std::size_t origin = 0;
};

/// Direct-evaluation robust estimate per candidate, sorted by median (descending), ties by
/// smaller sigma_minus. Candidate k uses stream child_seed(seed, k).
inline std::vector<VerifiedCandidate> verify_candidates(const ObjectiveModel& model, const std::vector<Vector>& points,
                                                        const Vector& sigma, std::size_t n_verify,
                                                        std::size_t parallelism, std::uint64_t seed,
                                                        const EvaluationSink& sink = {},
                                                        const std::string& stage = "verify") {
  if (n_verify < 2) throw ShapeError("verify_candidates: n_verify must be at least 2");
  std::vector<VerifiedCandidate> out;
  for (std::size_t k = 0; k < points.size(); ++k) {
    check_sigma(sigma, static_cast<std::size_t>(points[k].size()), "verify_candidates");
    Rng rng = make_rng(child_seed(seed, k));
    const Matrix pts = sample_mvn(scatter_at(points[k], sigma), n_verify, rng);
    const BatchEvaluation ev = evaluate_batch(model, pts, parallelism);
    if (sink)
      for (Eigen::Index i = 0; i < pts.rows(); ++i)
        sink({stage + "/" + std::to_string(k), static_cast<std::size_t>(i), pts.row(i).transpose(), ev.values[i],
              static_cast<bool>(ev.failed[static_cast<std::size_t>(i)]), ev.errors[static_cast<std::size_t>(i)]});
    out.push_back({points[k], robust_estimate_from_batch(ev), k});
  }
  std::stable_sort(out.begin(), out.end(), [](const VerifiedCandidate& a, const VerifiedCandidate& b) {
    if (a.estimate.median != b.estimate.median) return a.estimate.median > b.estimate.median;
    return a.estimate.sigma_minus < b.estimate.sigma_minus;
  });
  return out;
}

// ---------------------------------------------------------------------------------------
// Naive baseline, re-evaluation, slices

struct NaiveResult {
  Vector point;
  double value = 0.0;
  RobustEstimate estimate;
  std::vector<HistoryRecord> history;
};

/// Maximizes the raw model by BO seeded with the full training set, then verifies the
/// argmax directly under the manufacturing distribution.
inline NaiveResult naive_optimize(const ObjectiveModel& model, const BoxDomain& domain, const TrainingSet& train,
                                  std::size_t bo_budget, const Vector& sigma, std::size_t n_verify,
                                  std::size_t parallelism, std::uint64_t seed, const BOOptions& bo = {},
                                  const EvaluationSink& sink = {}) {
  if (train.size() == 0) throw EmptySampleError("naive_optimize: empty training set");
  NaiveResult r;
  if (bo_budget == 0) {
    Eigen::Index best = 0;
    train.values.maxCoeff(&best);
    r.point = train.points.row(best).transpose();
    r.value = train.values[best];
  } else {
    std::vector<Observation> seeds;
    for (Eigen::Index i = 0; i < train.values.size(); ++i)
      seeds.push_back({train.points.row(i).transpose(), train.values[i]});
    Rng rng = make_rng(child_seed(seed, 0));
    BOResult b = bo_run(model.eval, domain, bo_budget, seeds, Mode::maximize, rng, bo);
    r.point = b.best_point;
    r.value = b.best_value;
    if (sink)
      for (std::size_t i = train.size(); i < b.history.size(); ++i)
        sink({"naive/bo", i - train.size(), b.history[i].point, b.history[i].value, b.history[i].failed,
              b.history[i].error});
    r.history = std::move(b.history);
  }
  const auto v = verify_candidates(model, {r.point}, sigma, n_verify, parallelism, child_seed(seed, 1), sink, "naive/verify");
  r.estimate = v.front().estimate;
  return r;
}

struct ReevaluateResult {
  BoxDomain eval_domain;
  Vector point;
  RobustEstimate estimate;
  std::vector<MapEntry> top;
};

struct ReevaluateOptions {
  std::size_t n_eval = 4096;
  std::size_t n_candidates = 1;
  ConvergeOptions converge;
  std::size_t parallelism = 1;
  std::uint64_t seed = 0;
};

/// Robust map and convergence on an existing surrogate under a different scatter; no model calls.
template <RobustSurrogate S>
ReevaluateResult reevaluate_uncertainty(const S& surrogate, const BoxDomain& train_domain, const Vector& new_sigma,
                                        const ReevaluateOptions& opt) {
  ReevaluateResult r;
  r.eval_domain = shrink_eval_domain(train_domain, new_sigma);
  const auto map = batch_robust_map(surrogate, r.eval_domain, opt.n_eval, new_sigma, opt.converge.alg1,
                                    stream_seed(opt.seed, "map"), opt.parallelism);
  auto clustered = cluster_filter(map, r.eval_domain, opt.converge.cluster_radius);
  clustered.resize(std::min(clustered.size(), std::max<std::size_t>(opt.n_candidates, 1)));
  r.top = clustered;
  const auto conv = converge_candidates(surrogate, clustered, map, r.eval_domain, new_sigma, opt.converge,
                                        stream_seed(opt.seed, "converge"));
  r.point = conv.front().point;
  r.estimate = conv.front().estimate;
  return r;
}

struct LandscapeSlice {
  std::size_t axis_i = 0, axis_j = 1;
  Vector center;
  Vector xs, ys;   // grid coordinates along axis_i and axis_j
  Matrix values;   // values(a, b) at (xs[a], ys[b])
  /// Semi-axes of the k-sigma ellipses (k = 1, 2, 3) in the slice plane.
  std::vector<std::pair<double, double>> ellipses;
};

inline LandscapeSlice landscape_slice(const ObjectiveFn& f, const Vector& center, const Vector& sigma, std::size_t i,
                                      std::size_t j, std::size_t grid, double extent_sigmas = 5.0) {
  const auto n = static_cast<std::size_t>(center.size());
  if (grid < 2) throw ShapeError("landscape_slice: grid must be at least 2");
  if (i >= n || j >= n || i == j) throw ShapeError("landscape_slice: axes must be distinct and < dimension");
  check_sigma(sigma, n, "landscape_slice");
  LandscapeSlice s;
  s.axis_i = i;
  s.axis_j = j;
  s.center = center;
  const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
  const auto g = static_cast<Eigen::Index>(grid);
  s.xs = Vector::LinSpaced(g, center[ii] - extent_sigmas * sigma[ii], center[ii] + extent_sigmas * sigma[ii]);
  s.ys = Vector::LinSpaced(g, center[jj] - extent_sigmas * sigma[jj], center[jj] + extent_sigmas * sigma[jj]);
  s.values.resize(g, g);
  for (Eigen::Index a = 0; a < g; ++a)
    for (Eigen::Index b = 0; b < g; ++b) {
      Vector p = center;
      p[ii] = s.xs[a];
      p[jj] = s.ys[b];
      s.values(a, b) = f(p);
    }
  for (int k = 1; k <= 3; ++k) s.ellipses.emplace_back(k * sigma[ii], k * sigma[jj]);
  return s;
}

/// Surrogate slice: bounded-domain median predictions.
inline LandscapeSlice landscape_slice(const WarpedGPModel& m, const Vector& center, const Vector& sigma, std::size_t i,
                                      std::size_t j, std::size_t grid, double extent_sigmas = 5.0) {
  return landscape_slice([&](const Vector& p) { return m.predict_bounded(p).median; }, center, sigma, i, j, grid,
                         extent_sigmas);
}

}  // namespace robopt
