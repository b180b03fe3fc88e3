#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

#include "robopt/core.hpp"
#include "robopt/optimize.hpp"

namespace robopt {

struct GPHyperparams {
  double mu0 = 0.0;
  double sigma0_sq = 1.0;
  Vector length_scales;

  void validate() const {
    if (!std::isfinite(mu0)) throw NumericError("GP hyperparameters: mu0 must be finite");
    if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq))
      throw NumericError("GP hyperparameters: sigma0_sq must be positive and finite");
    if (length_scales.size() == 0) throw ShapeError("GP hyperparameters: no length scales");
    for (Eigen::Index i = 0; i < length_scales.size(); ++i)
      if (!(length_scales[i] > 0.0) || !std::isfinite(length_scales[i]))
        throw NumericError("GP hyperparameters: length scales must be positive and finite");
  }
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

inline constexpr double kSqrt5 = 2.23606797749978969641;
inline constexpr double kLog2Pi = 1.83787706640934548356;

/// Matérn 5/2 correlation at scaled distance r (unit amplitude).
inline double matern52_unit(double r) {
  const double s = kSqrt5 * r;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

/// Unit-amplitude Matérn 5/2 correlation matrix of scaled points (one point per column).
inline Matrix correlation_matrix(const Matrix& xs) {
  const Eigen::Index m = xs.cols();
  Matrix c(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    c(j, j) = 1.0;
    for (Eigen::Index i = j + 1; i < m; ++i) {
      const double v = matern52_unit((xs.col(i) - xs.col(j)).norm());
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

/// Cholesky of a + jitter * scale * I with jitter escalating 1e-10 -> 1e-4 by factors of 10.
inline std::optional<Eigen::LLT<Matrix>> factorize_with_jitter(const Matrix& a, double scale,
                                                               double& jitter_used) {
  for (double rel = 1e-10; rel <= 1.000001e-4; rel *= 10.0) {
    Matrix k = a;
    k.diagonal().array() += rel * scale;
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0 &&
        llt.matrixLLT().allFinite()) {
      jitter_used = rel * scale;
      return llt;
    }
  }
  return std::nullopt;
}

// --- prediction kernel --------------------------------------------------------
// Query points are processed in chunks of kChunk columns. Every column is reduced with
// fused multiply-adds in a fixed row order, so a point's result does not depend on the
// chunk it lands in or on the instruction set (scalar std::fma rounds identically).

inline constexpr int kLanes = 8;
inline constexpr Eigen::Index kChunk = 32;

#if defined(__AVX512F__)
struct Pack {
  __m512d v;
};
inline Pack pload(const double* p) { return {_mm512_loadu_pd(p)}; }
inline void pstore(double* p, Pack a) { _mm512_storeu_pd(p, a.v); }
inline Pack pset1(double x) { return {_mm512_set1_pd(x)}; }
inline Pack pzero() { return {_mm512_setzero_pd()}; }
/// c - a * b with a single rounding.
inline Pack pfnmadd(Pack a, Pack b, Pack c) { return {_mm512_fnmadd_pd(a.v, b.v, c.v)}; }
inline Pack pfmadd(Pack a, Pack b, Pack c) { return {_mm512_fmadd_pd(a.v, b.v, c.v)}; }
inline Pack pdiv(Pack a, Pack b) { return {_mm512_div_pd(a.v, b.v)}; }
#else
struct Pack {
  double v[kLanes];
};
inline Pack pload(const double* p) {
  Pack r;
  for (int i = 0; i < kLanes; ++i) r.v[i] = p[i];
  return r;
}
inline void pstore(double* p, Pack a) {
  for (int i = 0; i < kLanes; ++i) p[i] = a.v[i];
}
inline Pack pset1(double x) {
  Pack r;
  for (int i = 0; i < kLanes; ++i) r.v[i] = x;
  return r;
}
inline Pack pzero() { return pset1(0.0); }
inline Pack pfnmadd(Pack a, Pack b, Pack c) {
  for (int i = 0; i < kLanes; ++i) c.v[i] = std::fma(-a.v[i], b.v[i], c.v[i]);
  return c;
}
inline Pack pfmadd(Pack a, Pack b, Pack c) {
  for (int i = 0; i < kLanes; ++i) c.v[i] = std::fma(a.v[i], b.v[i], c.v[i]);
  return c;
}
inline Pack pdiv(Pack a, Pack b) {
  for (int i = 0; i < kLanes; ++i) a.v[i] /= b.v[i];
  return a;
}
#endif

template <class F>
void dispatch_packs(int packs, F&& f) {
  switch (packs) {
    case 1: f.template operator()<1>(); break;
    case 2: f.template operator()<2>(); break;
    case 3: f.template operator()<3>(); break;
    default: f.template operator()<4>(); break;
  }
}

/// out[c] = sum_j a[j] * k[j][c], j ascending.
template <int P>
void dot_columns(const double* a, Eigen::Index m, const double* k, double* out) {
  Pack acc[P];
  for (int p = 0; p < P; ++p) acc[p] = pzero();
  for (Eigen::Index j = 0; j < m; ++j) {
    const Pack aj = pset1(a[j]);
    for (int p = 0; p < P; ++p) acc[p] = pfmadd(aj, pload(k + j * kChunk + p * kLanes), acc[p]);
  }
  for (int p = 0; p < P; ++p) pstore(out + p * kLanes, acc[p]);
}

/// Solves L V = K in place (L row-major lower triangular, m x m; V is m x kChunk) and
/// returns the column sums of squares of V in ss. Rows are updated four at a time.
template <int P>
void forward_substitute(const double* lower, Eigen::Index m, double* v, double* ss) {
  constexpr int R = 4;
  Pack sq[P];
  for (int p = 0; p < P; ++p) sq[p] = pzero();
  auto finish_row = [&](Eigen::Index i, Pack* acc) {
    const Pack d = pset1(lower[i * m + i]);
    for (int p = 0; p < P; ++p) {
      const Pack x = pdiv(acc[p], d);
      pstore(v + i * kChunk + p * kLanes, x);
      sq[p] = pfmadd(x, x, sq[p]);
    }
  };
  Eigen::Index i0 = 0;
  for (; i0 + R <= m; i0 += R) {
    Pack acc[R][P];
    for (int r = 0; r < R; ++r)
      for (int p = 0; p < P; ++p) acc[r][p] = pload(v + (i0 + r) * kChunk + p * kLanes);
    const double* l0 = lower + i0 * m;
    for (Eigen::Index j = 0; j < i0; ++j) {
      Pack vj[P];
      for (int p = 0; p < P; ++p) vj[p] = pload(v + j * kChunk + p * kLanes);
      for (int r = 0; r < R; ++r) {
        const Pack l = pset1(l0[r * m + j]);
        for (int p = 0; p < P; ++p) acc[r][p] = pfnmadd(l, vj[p], acc[r][p]);
      }
    }
    for (int r = 0; r < R; ++r) {
      const Eigen::Index i = i0 + r;
      for (Eigen::Index j = i0; j < i; ++j) {
        const Pack l = pset1(lower[i * m + j]);
        for (int p = 0; p < P; ++p) acc[r][p] = pfnmadd(l, pload(v + j * kChunk + p * kLanes), acc[r][p]);
      }
      finish_row(i, acc[r]);
    }
  }
  for (Eigen::Index i = i0; i < m; ++i) {
    Pack acc[P];
    for (int p = 0; p < P; ++p) acc[p] = pload(v + i * kChunk + p * kLanes);
    for (Eigen::Index j = 0; j < i; ++j) {
      const Pack l = pset1(lower[i * m + j]);
      for (int p = 0; p < P; ++p) acc[p] = pfnmadd(l, pload(v + j * kChunk + p * kLanes), acc[p]);
    }
    finish_row(i, acc);
  }
  for (int p = 0; p < P; ++p) pstore(ss + p * kLanes, sq[p]);
}

}  // namespace detail

/// sigma0_sq * (1 + sqrt5 r + 5/3 r^2) * exp(-sqrt5 r), r the length-scale-weighted distance.
inline double matern52(const Vector& p, const Vector& q, const GPHyperparams& h) {
  const auto n = static_cast<std::size_t>(h.length_scales.size());
  require_dim(p, n, "matern52");
  require_dim(q, n, "matern52");
  if (!p.allFinite() || !q.allFinite()) throw NumericError("matern52: non-finite input");
  const double r = ((p - q).array() / h.length_scales.array()).matrix().norm();
  return h.sigma0_sq * detail::matern52_unit(r);
}

/// Exact GP posterior with a constant prior mean and Matérn 5/2 kernel.
/// Immutable after construction; predictions are safe to call concurrently.
class GPModel {
 public:
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  GPModel() = default;

  /// Factorizes K + jitter for the given data and hyperparameters.
  GPModel(Matrix train_points, Vector train_values, GPHyperparams hyper)
      : hyper_(std::move(hyper)), points_(std::move(train_points)), values_(std::move(train_values)) {
    hyper_.validate();
    if (points_.rows() < 1) throw ShapeError("GPModel: need at least one training point");
    if (points_.cols() != hyper_.length_scales.size())
      throw ShapeError("GPModel: training point dimension does not match length scales");
    if (values_.size() != points_.rows())
      throw ShapeError("GPModel: training value count does not match point count");
    detail::require_finite(points_, "GPModel training points");
    if (!values_.allFinite()) throw NumericError("GPModel: non-finite training values");

    scaled_ = (points_.array().rowwise() / hyper_.length_scales.transpose().array()).matrix().transpose();
    Matrix k = detail::correlation_matrix(scaled_) * hyper_.sigma0_sq;
    auto llt = detail::factorize_with_jitter(k, hyper_.sigma0_sq, jitter_);
    if (!llt)
      throw NotPositiveDefiniteError("GPModel: kernel matrix not positive definite at max jitter");
    lower_ = llt->matrixL();
    const Vector resid = values_.array() - hyper_.mu0;
    alpha_ = llt->solve(resid);
    log_det_half_ = lower_.diagonal().array().log().sum();
    quad_ = resid.dot(alpha_);
  }

  const GPHyperparams& hyper() const { return hyper_; }
  const Matrix& train_points() const { return points_; }
  const Vector& train_values() const { return values_; }
  const RowMajor& cholesky_lower() const { return lower_; }
  const Vector& alpha() const { return alpha_; }
  double jitter() const { return jitter_; }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }

  /// -1/2 r^T K^-1 r - 1/2 log det K - M/2 log 2 pi, via the factorization.
  double log_marginal_likelihood() const {
    return -0.5 * quad_ - log_det_half_ - 0.5 * static_cast<double>(size()) * detail::kLog2Pi;
  }

  Prediction predict(const Vector& p) const {
    require_dim(p, dim(), "GPModel::predict");
    Vector mean(1), var(1);
    predict_into(p.transpose(), mean, var);
    return {mean[0], var[0]};
  }

  std::vector<Prediction> predict_batch(const Matrix& points) const {
    Vector mean, var;
    predict_into(points, mean, var);
    std::vector<Prediction> out(static_cast<std::size_t>(points.rows()));
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = {mean[static_cast<Eigen::Index>(i)], var[static_cast<Eigen::Index>(i)]};
    return out;
  }

  /// Posterior means and variances of every row of `points`. Each point's result is
  /// computed with the same operation sequence regardless of batch size or position.
  void predict_into(const Matrix& points, Vector& mean, Vector& variance) const {
    if (static_cast<std::size_t>(points.cols()) != dim())
      throw ShapeError("GPModel::predict_batch: point dimension mismatch");
    if (size() == 0) throw ShapeError("GPModel: model is empty");
    detail::require_finite(points, "GPModel::predict_batch");
    const Eigen::Index b = points.rows();
    mean.resize(b);
    variance.resize(b);
    std::vector<double> work(size() * detail::kChunk);
    for (Eigen::Index start = 0; start < b; start += detail::kChunk)
      chunk(points, start, std::min<Eigen::Index>(detail::kChunk, b - start), work.data(), mean,
            variance);
  }

 private:
  void chunk(const Matrix& points, Eigen::Index start, Eigen::Index w, double* work, Vector& mean,
             Vector& variance) const {
    constexpr Eigen::Index ld = detail::kChunk;
    const Eigen::Index m = static_cast<Eigen::Index>(size());
    const Eigen::Index n = static_cast<Eigen::Index>(dim());
    const double s0 = hyper_.sigma0_sq;

    std::vector<double> qs(static_cast<std::size_t>(n * ld), 0.0);
    for (Eigen::Index d = 0; d < n; ++d)
      for (Eigen::Index c = 0; c < w; ++c)
        qs[static_cast<std::size_t>(d * ld + c)] = points(start + c, d) / hyper_.length_scales[d];

    // Cross-covariances k(x_j, p_c) in row j of `work`; unused columns are zero.
    for (Eigen::Index j = 0; j < m; ++j) {
      double* kj = work + j * ld;
      const double* xj = scaled_.col(j).data();
      double r2[ld] = {};
      for (Eigen::Index d = 0; d < n; ++d) {
        const double xd = xj[d];
        const double* qd = qs.data() + d * ld;
        for (Eigen::Index c = 0; c < w; ++c) {
          const double diff = xd - qd[c];
          r2[c] = std::fma(diff, diff, r2[c]);
        }
      }
      for (Eigen::Index c = 0; c < w; ++c) kj[c] = s0 * detail::matern52_unit(std::sqrt(r2[c]));
      for (Eigen::Index c = w; c < ld; ++c) kj[c] = 0.0;
    }

    double acc[ld], ss[ld];
    const int packs = static_cast<int>((w + detail::kLanes - 1) / detail::kLanes);
    detail::dispatch_packs(packs, [&]<int P>() {
      detail::dot_columns<P>(alpha_.data(), m, work, acc);
      detail::forward_substitute<P>(lower_.data(), m, work, ss);
    });
    for (Eigen::Index c = 0; c < w; ++c) {
      mean[start + c] = hyper_.mu0 + acc[c];
      variance[start + c] = std::clamp(s0 - ss[c], 0.0, s0);
    }
  }

  GPHyperparams hyper_;
  Matrix points_;
  Vector values_;
  Matrix scaled_;  // N x M, training points divided by length scales
  RowMajor lower_;
  Vector alpha_;
  double jitter_ = 0.0;
  double log_det_half_ = 0.0;
  double quad_ = 0.0;
};

inline double log_marginal_likelihood(const GPModel& model) {
  return model.log_marginal_likelihood();
}

inline Prediction predict(const GPModel& model, const Vector& p) { return model.predict(p); }

inline std::vector<Prediction> predict_batch(const GPModel& model, const Matrix& points) {
  return model.predict_batch(points);
}

struct FitOptions {
  std::size_t restarts = 8;
  std::uint64_t seed = 0;
  /// Hyperparameters are searched on a seeded random subset of at most this many
  /// points; the final model always uses every point.
  std::size_t max_fit_points = 512;
  /// Nelder-Mead evaluation budget per restart; 0 selects 60 * (parameters + 1).
  std::size_t max_evals = 0;
};

namespace detail {

struct Profile {
  double loglik = -std::numeric_limits<double>::infinity();
  double mu0 = 0.0;
  double sigma0_sq = 1.0;
  bool ok = false;
};

/// Marginal likelihood with mu0 and sigma0^2 at their closed-form optima given the
/// correlation structure; sigma0^2 is clamped to [1e-6, 1e6] * var_ref.
inline Profile profile_likelihood(const Matrix& xs_unscaled, const Vector& y,
                                  const Vector& length_scales, double var_ref) {
  const Matrix xs =
      (xs_unscaled.array().rowwise() / length_scales.transpose().array()).matrix().transpose();
  const Matrix c = correlation_matrix(xs);
  double jitter = 0.0;
  auto llt = factorize_with_jitter(c, 1.0, jitter);
  Profile out;
  if (!llt) return out;
  const Eigen::Index m = y.size();
  const Vector ones = Vector::Ones(m);
  const Vector ci1 = llt->solve(ones);
  const Vector ciy = llt->solve(y);
  const double denom = ones.dot(ci1);
  if (!(denom > 0.0)) return out;
  out.mu0 = ones.dot(ciy) / denom;
  const Vector r = y.array() - out.mu0;
  const double quad = r.dot(llt->solve(r));
  double s2 = std::max(quad, 0.0) / static_cast<double>(m);
  s2 = std::clamp(s2, 1e-6 * var_ref, 1e6 * var_ref);
  const double log_det_c = 2.0 * llt->matrixLLT().diagonal().array().log().sum();
  out.sigma0_sq = s2;
  out.loglik = -0.5 * quad / s2 - 0.5 * static_cast<double>(m) * std::log(s2) - 0.5 * log_det_c -
               0.5 * static_cast<double>(m) * kLog2Pi;
  out.ok = std::isfinite(out.loglik);
  return out;
}

inline double reference_variance(const Vector& y) {
  const double mean = y.mean();
  const double v = (y.array() - mean).square().mean();
  return v > 0.0 ? v : 1.0;
}

inline Vector axis_edges(const Matrix& pts) {
  Vector e = pts.colwise().maxCoeff() - pts.colwise().minCoeff();
  for (Eigen::Index i = 0; i < e.size(); ++i)
    if (!(e[i] > 0.0)) e[i] = 1.0;
  return e;
}

/// Seeded subset of row indices (sorted), or all rows when small enough.
inline std::vector<Eigen::Index> fit_subset(Eigen::Index m, std::size_t max_points, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  if (max_points == 0 || static_cast<std::size_t>(m) <= max_points) return idx;
  for (std::size_t i = 0; i < max_points; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(max_points);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Multi-start bounded maximization of `objective` over a box (log-parameter space).
/// The first start is `first`; the rest are uniform in [start_lo, start_hi].
inline NelderMeadResult multistart_maximize(const std::function<double(const Vector&)>& objective,
                                            const Vector& first, const Vector& lo,
                                            const Vector& hi, const Vector& start_lo,
                                            const Vector& start_hi, std::size_t restarts,
                                            std::size_t max_evals, Rng& rng) {
  NelderMeadOptions opt;
  opt.max_evals = max_evals > 0 ? max_evals : 60 * static_cast<std::size_t>(first.size() + 1);
  opt.ftol = 1e-7;
  opt.initial_step = 0.1;
  auto neg = [&](const Vector& x) { return -objective(x); };
  NelderMeadResult best;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Vector x0 = first;
    if (r > 0)
      for (Eigen::Index i = 0; i < x0.size(); ++i)
        x0[i] = start_lo[i] + unif(rng) * (start_hi[i] - start_lo[i]);
    NelderMeadResult res = nelder_mead(neg, x0, lo, hi, opt);
    if (res.f < best.f) best = res;
  }
  return best;
}

inline Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

inline Vector select_rows(const Vector& v, const std::vector<Eigen::Index>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  return out;
}

/// Builds the final model: mu0 and sigma0^2 profiled on the full data for fixed length scales.
inline GPModel build_profiled(const Matrix& pts, const Vector& y, const Vector& length_scales,
                              double var_ref) {
  const Profile p = profile_likelihood(pts, y, length_scales, var_ref);
  if (!p.ok)
    throw FitError("fit: kernel matrix not positive definite on the full training set");
  return GPModel(pts, y, GPHyperparams{p.mu0, p.sigma0_sq, length_scales});
}

inline void check_training_data(const Matrix& pts, const Vector& y, const char* who) {
  if (pts.rows() < 2) throw ShapeError(std::string(who) + ": need at least two training points");
  if (y.size() != pts.rows()) throw ShapeError(std::string(who) + ": point/value count mismatch");
  if (!pts.allFinite() || !y.allFinite())
    throw NumericError(std::string(who) + ": non-finite training data");
}

}  // namespace detail

/// Maximum-likelihood fit of length scales (log space, [1e-3, 10] x axis extent);
/// mu0 and sigma0^2 are profiled out analytically.
inline GPModel fit(const Matrix& train_points, const Vector& train_values, const FitOptions& opt) {
  detail::check_training_data(train_points, train_values, "fit");
  Rng rng = make_rng(opt.seed);
  const auto idx = detail::fit_subset(train_points.rows(), opt.max_fit_points, rng);
  const Matrix xs = detail::select_rows(train_points, idx);
  const Vector ys = detail::select_rows(train_values, idx);
  const double var_ref = detail::reference_variance(train_values);
  const Vector edge = detail::axis_edges(train_points);
  const Vector log_edge = edge.array().log();
  const Vector lo = log_edge.array() + std::log(1e-3);
  const Vector hi = log_edge.array() + std::log(10.0);
  const Vector slo = log_edge.array() + std::log(0.05);
  const Vector shi = log_edge.array() + std::log(2.0);
  const Vector first = log_edge.array() + std::log(0.25);

  auto objective = [&](const Vector& log_ls) {
    const detail::Profile p = detail::profile_likelihood(xs, ys, log_ls.array().exp(), var_ref);
    return p.ok ? p.loglik : -std::numeric_limits<double>::infinity();
  };
  const auto best = detail::multistart_maximize(objective, first, lo, hi, slo, shi, opt.restarts,
                                                opt.max_evals, rng);
  if (!std::isfinite(best.f))
    throw FitError("fit: every restart failed to factorize the kernel matrix (M=" +
                   std::to_string(train_points.rows()) + ")");
  return detail::build_profiled(train_points, train_values, best.x.array().exp(), var_ref);
}

inline GPModel fit(const Matrix& train_points, const Vector& train_values, std::size_t restarts,
                   std::uint64_t seed) {
  FitOptions opt;
  opt.restarts = restarts;
  opt.seed = seed;
  return fit(train_points, train_values, opt);
}

}  // namespace robopt
