#pragma once

#include <Eigen/Eigenvalues>

#include "robopt/core.hpp"

namespace robopt {

/// Multivariate normal model of fabrication scatter around a nominal design.
struct ManufacturingDistribution {
  Vector mean;
  Matrix covariance;

  static ManufacturingDistribution diagonal(Vector mean, const Vector& sigmas) {
    if (mean.size() != sigmas.size()) throw ShapeError("distribution: sigma dimension mismatch");
    for (Eigen::Index i = 0; i < sigmas.size(); ++i)
      if (!(sigmas[i] >= 0.0) || !std::isfinite(sigmas[i]))
        throw NumericError("distribution: sigma must be finite and non-negative");
    return {std::move(mean), sigmas.array().square().matrix().asDiagonal()};
  }

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }

  bool is_diagonal() const {
    for (Eigen::Index i = 0; i < covariance.rows(); ++i)
      for (Eigen::Index j = 0; j < covariance.cols(); ++j)
        if (i != j && covariance(i, j) != 0.0) return false;
    return true;
  }
};

/// Linear map A with A A^T = covariance. Diagonal covariances give diag(sigma).
inline Matrix mvn_transform(const ManufacturingDistribution& dist) {
  const Eigen::Index n = dist.mean.size();
  if (dist.covariance.rows() != n || dist.covariance.cols() != n)
    throw ShapeError("distribution: covariance must be N x N");
  if (!dist.covariance.allFinite()) throw NumericError("distribution: non-finite covariance");
  if ((dist.covariance - dist.covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + dist.covariance.cwiseAbs().maxCoeff()))
    throw NotPositiveDefiniteError("distribution: covariance is not symmetric");
  if (dist.is_diagonal()) {
    Matrix a = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (dist.covariance(i, i) < 0.0)
        throw NotPositiveDefiniteError("distribution: negative variance on axis " +
                                       std::to_string(i));
      a(i, i) = std::sqrt(dist.covariance(i, i));
    }
    return a;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(dist.covariance);
  const Vector& lambda = eig.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -tol)
    throw NotPositiveDefiniteError("distribution: covariance is not positive semidefinite");
  return eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

/// `count` i.i.d. draws, one per row. Standard normals are drawn row by row.
inline Matrix sample_mvn(const ManufacturingDistribution& dist, std::size_t count, Rng& rng) {
  if (count == 0) throw ShapeError("sample_mvn: count must be positive");
  const Matrix a = mvn_transform(dist);
  const Eigen::Index n = dist.mean.size();
  const bool diag = dist.is_diagonal();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(static_cast<Eigen::Index>(count), n);
  Vector z(n);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
    if (diag) {
      for (Eigen::Index i = 0; i < n; ++i) out(r, i) = dist.mean[i] + a(i, i) * z[i];
    } else {
      out.row(r) = (dist.mean + a * z).transpose();
    }
  }
  return out;
}

}  // namespace robopt
