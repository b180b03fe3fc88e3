#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace robopt {

using Vector = Eigen::VectorXd;
/// Point sets are stored one point per row.
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

inline constexpr int kSchemaVersion = 1;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct NotPositiveDefiniteError : Error {
  using Error::Error;
};
struct FitError : Error {
  using Error::Error;
};
struct UnsupportedDimensionError : Error {
  using Error::Error;
};
struct InvalidCutoffError : Error {
  using Error::Error;
};
struct OutOfDomainError : Error {
  using Error::Error;
};
struct EmptySampleError : Error {
  using Error::Error;
};
struct EvaluationError : Error {
  using Error::Error;
};
struct DomainTooSmallError : Error {
  DomainTooSmallError(std::string msg, std::size_t axis_index)
      : Error(std::move(msg)), axis(axis_index) {}
  std::size_t axis;
};
struct SchemaError : Error {
  using Error::Error;
};

/// Axis-aligned box in design space. Units are carried as metadata only.
class BoxDomain {
 public:
  BoxDomain() = default;
  BoxDomain(Vector lower, Vector upper, std::vector<std::string> labels = {},
            std::string units = {})
      : lower_(std::move(lower)), upper_(std::move(upper)), labels_(std::move(labels)),
        units_(std::move(units)) {
    if (lower_.size() == 0) throw ShapeError("domain must have at least one axis");
    if (lower_.size() != upper_.size())
      throw ShapeError("domain lower/upper dimension mismatch");
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
      if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]))
        throw NumericError("domain bounds must be finite (axis " + std::to_string(i) + ")");
      if (lower_[i] > upper_[i])
        throw ShapeError("domain lower > upper on axis " + std::to_string(i));
    }
    if (labels_.empty()) {
      for (Eigen::Index i = 0; i < lower_.size(); ++i) labels_.push_back("x" + std::to_string(i));
    } else if (labels_.size() != static_cast<std::size_t>(lower_.size())) {
      throw ShapeError("domain label count does not match dimension");
    }
  }

  std::size_t dim() const { return static_cast<std::size_t>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& units() const { return units_; }
  double edge(std::size_t i) const { return upper_[i] - lower_[i]; }

  /// True if some axis has zero width.
  bool is_degenerate() const { return ((upper_ - lower_).array() <= 0.0).any(); }

  bool contains(const Vector& p, double tol = 0.0) const {
    if (p.size() != lower_.size()) return false;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (p[i] < lower_[i] - tol || p[i] > upper_[i] + tol) return false;
    return true;
  }

  bool contains(const BoxDomain& other) const {
    return other.dim() == dim() && (other.lower_.array() >= lower_.array()).all() &&
           (other.upper_.array() <= upper_.array()).all();
  }

  Vector clip(const Vector& p) const { return p.cwiseMax(lower_).cwiseMin(upper_); }

  /// Coordinates normalized to the unit cube of this box (degenerate axes map to 0).
  Vector to_unit(const Vector& p) const {
    Vector u(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double w = upper_[i] - lower_[i];
      u[i] = w > 0.0 ? (p[i] - lower_[i]) / w : 0.0;
    }
    return u;
  }

  Vector from_unit(const Vector& u) const {
    Vector p(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) p[i] = lower_[i] + u[i] * (upper_[i] - lower_[i]);
    return p;
  }

  /// Same bounds and labels; units are not compared.
  bool operator==(const BoxDomain& o) const {
    return lower_ == o.lower_ && upper_ == o.upper_ && labels_ == o.labels_;
  }

 private:
  Vector lower_, upper_;
  std::vector<std::string> labels_;
  std::string units_;
};

inline void require_dim(const Vector& p, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(p.size()) != n)
    throw ShapeError(std::string(what) + ": expected dimension " + std::to_string(n) + ", got " +
                     std::to_string(p.size()));
}

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// --- seeding -----------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of a named stream derived from a master seed.
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view name) {
  return splitmix64(master ^ splitmix64(fnv1a64(name)));
}

/// Seed of the index-th child of a stream (used for per-point Algorithm-1 runs).
inline std::uint64_t child_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(parent + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

}  // namespace robopt
