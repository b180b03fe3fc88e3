#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <initializer_list>
#include <limits>

#include "robopt/core.hpp"

namespace robopt {

/// Highest dimension covered by the built-in direction-number table.
inline constexpr std::size_t kSobolMaxDim = 32;

namespace detail {

struct SobolPoly {
  unsigned s;                    // degree of the primitive polynomial
  unsigned a;                    // interior coefficients, most significant first
  std::initializer_list<unsigned> m;
};

// Joe & Kuo (2008) "new-joe-kuo-6.21201" entries for dimensions 2..32.
// Dimension 1 is the van der Corput sequence (all m = 1).
inline const SobolPoly kJoeKuo[kSobolMaxDim - 1] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
    {7, 7, {1, 1, 3, 13, 7, 35, 63}},
    {7, 8, {1, 3, 5, 9, 1, 25, 53}},
    {7, 14, {1, 3, 1, 13, 9, 35, 107}},
    {7, 19, {1, 3, 1, 5, 27, 61, 31}},
    {7, 21, {1, 1, 5, 11, 19, 41, 61}},
    {7, 28, {1, 3, 5, 3, 3, 13, 69}},
    {7, 31, {1, 1, 7, 13, 1, 19, 1}},
    {7, 32, {1, 3, 7, 5, 13, 19, 59}},
    {7, 37, {1, 1, 3, 9, 25, 29, 41}},
    {7, 41, {1, 3, 5, 13, 23, 1, 55}},
    {7, 42, {1, 3, 7, 3, 13, 59, 17}},
};

inline constexpr unsigned kSobolBits = 32;

/// Direction numbers v_1..v_32 of one dimension, scaled to 32-bit integers.
inline std::array<std::uint32_t, kSobolBits> sobol_directions(std::size_t d) {
  std::array<std::uint32_t, kSobolBits> v{};
  if (d == 0) {
    for (unsigned k = 0; k < kSobolBits; ++k) v[k] = 1u << (kSobolBits - 1 - k);
    return v;
  }
  const SobolPoly& poly = kJoeKuo[d - 1];
  const unsigned s = poly.s;
  unsigned k = 0;
  for (unsigned m : poly.m) {
    if (k >= kSobolBits) break;
    v[k] = m << (kSobolBits - 1 - k);
    ++k;
  }
  for (; k < kSobolBits; ++k) {
    std::uint32_t x = v[k - s] ^ (v[k - s] >> s);
    for (unsigned j = 1; j < s; ++j)
      if ((poly.a >> (s - 1 - j)) & 1u) x ^= v[k - j];
    v[k] = x;
  }
  return v;
}

}  // namespace detail

/// `count` consecutive Sobol points after discarding the first `skip`, one per row.
/// Unscrambled, Gray-code order, first point is the origin.
inline Matrix sobol_sequence(std::size_t dim, std::size_t count, std::size_t skip = 0) {
  if (dim == 0) throw ShapeError("sobol_sequence: dim must be positive");
  if (dim > kSobolMaxDim)
    throw UnsupportedDimensionError("sobol_sequence: dimension " + std::to_string(dim) +
                                    " exceeds supported maximum " + std::to_string(kSobolMaxDim));
  if (count == 0) throw ShapeError("sobol_sequence: count must be positive");
  constexpr std::uint64_t limit = std::numeric_limits<std::uint32_t>::max();
  if (skip > limit || count > limit - skip)
    throw ShapeError("sobol_sequence: index range exceeds 2^32 - 1");

  constexpr double scale = 1.0 / 4294967296.0;
  Matrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (std::size_t d = 0; d < dim; ++d) {
    const auto v = detail::sobol_directions(d);
    const auto start = static_cast<std::uint32_t>(skip);
    const std::uint32_t gray = start ^ (start >> 1);
    std::uint32_t x = 0;
    for (unsigned b = 0; b < detail::kSobolBits; ++b)
      if ((gray >> b) & 1u) x ^= v[b];
    for (std::size_t i = 0; i < count; ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = x * scale;
      const std::uint32_t n = start + static_cast<std::uint32_t>(i) + 1;
      x ^= v[static_cast<unsigned>(std::countr_zero(n))];
    }
  }
  return out;
}

/// Maps unit-cube rows into `domain`: lower + u * (upper - lower).
inline Matrix scale_to_domain(const Matrix& unit, const BoxDomain& domain) {
  if (static_cast<std::size_t>(unit.cols()) != domain.dim())
    throw ShapeError("scale_to_domain: sample dimension " + std::to_string(unit.cols()) +
                     " does not match domain dimension " + std::to_string(domain.dim()));
  Matrix out(unit.rows(), unit.cols());
  for (Eigen::Index j = 0; j < unit.cols(); ++j) {
    const double lo = domain.lower()[j];
    const double w = domain.upper()[j] - lo;
    for (Eigen::Index i = 0; i < unit.rows(); ++i) out(i, j) = lo + unit(i, j) * w;
  }
  return out;
}

}  // namespace robopt
