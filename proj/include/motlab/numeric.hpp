#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace motlab {

using Rational = mpq_class;
using Point = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Shared tolerances.
namespace tol {
inline constexpr double kWeightSum = 1e-12;
inline constexpr double kMean = 1e-10;
inline constexpr double kOrder = 1e-10;
inline constexpr double kFeasibility = 1e-9;
inline constexpr double kOptimality = 1e-8;
inline constexpr double kResidual = 1e-8;
}  // namespace tol

/// Exact conversion: every finite double is a dyadic rational.
inline Rational to_rational(double x) {
  Rational q(x);
  q.canonicalize();
  return q;
}

inline double to_double(const Rational& q) { return q.get_d(); }

inline double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double norm1(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

/// 64-bit FNV-1a, used for instance hashes in reports.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h);

}  // namespace motlab
