#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "robopt/gp.hpp"
#include "robopt/objectives.hpp"
#include "robopt/optimize.hpp"
#include "robopt/sobol.hpp"

namespace robopt {

enum class Mode { minimize, maximize };

/// E[max(0, f_best - X)], X ~ N(mean, variance).
inline double expected_improvement(double mean, double variance, double f_best) {
  if (variance < 0.0) throw NumericError("expected_improvement: negative variance");
  const double sigma = std::sqrt(variance);
  const double diff = f_best - mean;
  if (!(sigma > 0.0)) return std::max(0.0, diff);
  const double z = diff / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
  return std::max(0.0, diff * cdf + sigma * pdf);
}

struct Observation {
  Vector point;
  double value = 0.0;
};

struct BOOptions {
  std::size_t acq_starts = 64;
  /// Best-scoring starts that receive local refinement.
  std::size_t acq_refine = 8;
  std::size_t refine_evals = 0;  // 0 selects 30 * (dim + 1)
  std::size_t gp_restarts = 3;
  std::size_t gp_max_fit_points = 256;
};

struct BOState {
  BoxDomain domain;
  Mode mode = Mode::minimize;
  std::vector<Observation> observations;  // values as reported by the objective
  std::optional<GPModel> inner_gp;
  std::size_t iteration = 0;
  std::size_t budget = 0;

  /// Values in minimization orientation.
  Vector internal_values() const {
    Vector v(static_cast<Eigen::Index>(observations.size()));
    for (std::size_t i = 0; i < observations.size(); ++i)
      v[static_cast<Eigen::Index>(i)] =
          mode == Mode::maximize ? -observations[i].value : observations[i].value;
    return v;
  }
};

struct Proposal {
  /// Ranked candidates, best first; the first is the proposal, later ones are fallbacks
  /// used when an evaluation fails.
  std::vector<Vector> candidates;
  double expected_improvement = 0.0;
  /// True when the point came from the Sobol exploration fallback.
  bool sobol_fallback = false;
  std::string note;
};

namespace detail {

inline bool near_any(const Vector& u, const std::vector<Vector>& others, double tol) {
  for (const auto& o : others)
    if ((u - o).cwiseAbs().maxCoeff() <= tol) return true;
  return false;
}

inline Proposal sobol_fallback(const BoxDomain& domain, const std::vector<Vector>& observed_unit,
                               std::size_t skip, std::string note) {
  Proposal p;
  p.sobol_fallback = true;
  p.note = std::move(note);
  const Matrix u = sobol_sequence(domain.dim(), 16, skip);
  for (Eigen::Index i = 0; i < u.rows() && p.candidates.size() < 4; ++i) {
    const Vector ui = u.row(i).transpose();
    if (!near_any(ui, observed_unit, 1e-12)) p.candidates.push_back(domain.from_unit(ui));
  }
  return p;
}

}  // namespace detail

/// Refits the inner GP and returns the EI maximizer found by a Sobol-seeded multi-start
/// local search. Consumes a fixed number of draws from `rng`.
inline Proposal propose_next(BOState& state, const BOOptions& opt, Rng& rng) {
  if (state.observations.size() < 2) throw ShapeError("propose_next: need at least 2 observations");
  const std::uint64_t fit_seed = rng();
  const std::size_t skip = static_cast<std::size_t>(rng() % (1u << 20));
  const BoxDomain& dom = state.domain;
  const std::size_t n = dom.dim();

  Matrix x(static_cast<Eigen::Index>(state.observations.size()), static_cast<Eigen::Index>(n));
  std::vector<Vector> observed_unit;
  for (std::size_t i = 0; i < state.observations.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = state.observations[i].point.transpose();
    observed_unit.push_back(dom.to_unit(state.observations[i].point));
  }
  const Vector y = state.internal_values();
  if (y.maxCoeff() == y.minCoeff()) {
    state.inner_gp.reset();
    return detail::sobol_fallback(dom, observed_unit, skip, "constant observations");
  }
  try {
    FitOptions fo;
    fo.restarts = opt.gp_restarts;
    fo.seed = fit_seed;
    fo.max_fit_points = opt.gp_max_fit_points;
    state.inner_gp = fit(x, y, fo);
  } catch (const Error& e) {
    state.inner_gp.reset();
    return detail::sobol_fallback(dom, observed_unit, skip, std::string("inner GP fit failed: ") + e.what());
  }
  const GPModel& gp = *state.inner_gp;
  const double f_best = y.minCoeff();

  auto ei_unit = [&](const Vector& u) {
    const Prediction pr = gp.predict(dom.from_unit(u));
    return expected_improvement(pr.mean, pr.variance, f_best);
  };

  const Matrix starts_u = sobol_sequence(n, std::max<std::size_t>(opt.acq_starts, 1), skip);
  const Matrix starts = scale_to_domain(starts_u, dom);
  const auto preds = gp.predict_batch(starts);
  struct Cand {
    Vector u;
    double ei;
  };
  std::vector<Cand> cands;
  for (Eigen::Index i = 0; i < starts_u.rows(); ++i)
    cands.push_back({starts_u.row(i).transpose(),
                     expected_improvement(preds[static_cast<std::size_t>(i)].mean,
                                          preds[static_cast<std::size_t>(i)].variance, f_best)});
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cands[a].ei > cands[b].ei; });

  detail::NelderMeadOptions nm;
  nm.max_evals = opt.refine_evals > 0 ? opt.refine_evals : 30 * (n + 1);
  nm.initial_step = 0.02;
  nm.ftol = 1e-10;
  nm.xtol = 1e-6;
  const Vector lo = Vector::Zero(static_cast<Eigen::Index>(n));
  const Vector hi = Vector::Ones(static_cast<Eigen::Index>(n));
  std::vector<Cand> refined;
  for (std::size_t k = 0; k < std::min(opt.acq_refine, order.size()); ++k) {
    const Cand& c = cands[order[k]];
    const auto res = detail::nelder_mead([&](const Vector& u) { return -ei_unit(u); }, c.u, lo, hi, nm);
    refined.push_back({res.x, -res.f});
  }
  for (std::size_t k : order) refined.push_back(cands[k]);
  std::stable_sort(refined.begin(), refined.end(),
                   [](const Cand& a, const Cand& b) { return a.ei > b.ei; });

  Proposal p;
  std::vector<Vector> taken;
  for (const Cand& c : refined) {
    if (!(c.ei > 0.0)) break;
    if (detail::near_any(c.u, observed_unit, 1e-12) || detail::near_any(c.u, taken, 1e-9)) continue;
    if (p.candidates.empty()) p.expected_improvement = c.ei;
    taken.push_back(c.u);
    p.candidates.push_back(dom.clip(dom.from_unit(c.u)));
    if (p.candidates.size() >= 4) break;
  }
  if (p.candidates.empty())
    return detail::sobol_fallback(dom, observed_unit, skip, "expected improvement is zero");
  return p;
}

struct HistoryRecord {
  std::size_t iteration = 0;  // 0 for seed observations
  Vector point;
  double value = std::numeric_limits<double>::quiet_NaN();
  double incumbent = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  bool seed = false;
  bool sobol_fallback = false;
  std::string error;
};

struct BOResult {
  Vector best_point;
  double best_value = 0.0;
  /// Index of the best entry in `history`.
  std::size_t best_index = 0;
  std::vector<HistoryRecord> history;
};

/// Sequential EI optimization for `budget` proposals, starting from `seeds`.
inline BOResult bo_run(const ObjectiveFn& objective, const BoxDomain& domain, std::size_t budget,
                       const std::vector<Observation>& seeds, Mode mode, Rng& rng,
                       const BOOptions& opt = {}) {
  if (budget < 1) throw ShapeError("bo_run: budget must be at least 1");
  BOState state;
  state.domain = domain;
  state.mode = mode;
  state.budget = budget;
  BOResult out;
  auto better = [&](double a, double b) { return mode == Mode::maximize ? a > b : a < b; };
  bool have_best = false;
  auto record = [&](HistoryRecord rec) {
    if (!rec.failed && (!have_best || better(rec.value, out.best_value))) {
      have_best = true;
      out.best_value = rec.value;
      out.best_point = rec.point;
      out.best_index = out.history.size();
    }
    rec.incumbent = have_best ? out.best_value : std::numeric_limits<double>::quiet_NaN();
    if (!rec.failed) state.observations.push_back({rec.point, rec.value});
    out.history.push_back(std::move(rec));
  };

  for (const auto& s : seeds) {
    if (!domain.contains(s.point, 1e-9 * (1.0 + domain.upper().cwiseAbs().maxCoeff())))
      throw OutOfDomainError("bo_run: seed observation outside the domain");
    if (!std::isfinite(s.value)) throw NumericError("bo_run: non-finite seed value");
    HistoryRecord rec;
    rec.point = domain.clip(s.point);
    rec.value = s.value;
    rec.seed = true;
    record(std::move(rec));
  }

  auto try_eval = [&](const Vector& p, std::size_t it, bool fallback) {
    HistoryRecord rec;
    rec.iteration = it;
    rec.point = p;
    rec.sobol_fallback = fallback;
    try {
      rec.value = objective(p);
      if (!std::isfinite(rec.value)) {
        rec.failed = true;
        rec.error = "non-finite objective value";
      }
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    const bool ok = !rec.failed;
    record(std::move(rec));
    return ok;
  };

  for (std::size_t it = 1; it <= budget; ++it) {
    state.iteration = it;
    Proposal prop;
    if (state.observations.size() < 2) {
      std::vector<Vector> observed_unit;
      for (const auto& o : state.observations) observed_unit.push_back(domain.to_unit(o.point));
      prop = detail::sobol_fallback(domain, observed_unit, static_cast<std::size_t>(rng() % (1u << 20)),
                                    "fewer than two observations");
    } else {
      prop = propose_next(state, opt, rng);
    }
    for (std::size_t k = 0; k < std::min<std::size_t>(2, prop.candidates.size()); ++k)
      if (try_eval(prop.candidates[k], it, prop.sobol_fallback)) break;
  }
  if (!have_best) throw EvaluationError("bo_run: no successful evaluation");
  return out;
}

}  // namespace robopt
