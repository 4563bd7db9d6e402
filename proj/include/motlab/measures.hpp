#pragma once

#include "motlab/numeric.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace motlab::measures {

class InvalidMeasure : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finitely supported probability measure on R^dim.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  /// Validates: weights > 0 summing to 1 (1e-12), distinct points of equal dim.
  DiscreteMeasure(std::size_t dim, std::vector<Point> points, std::vector<double> weights);

  static DiscreteMeasure dirac(Point x);
  /// Merges repeated points, drops zero weights and sorts lexicographically.
  static DiscreteMeasure aggregate(std::size_t dim, std::vector<Point> points,
                                   std::vector<double> weights);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }
  const Point& point(std::size_t i) const { return points_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<Point>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }

  Point mean() const;
  /// Integral of (x_k - K)^+.
  double call(double strike, std::size_t k = 0) const;
  double abs_moment(const Point& center) const;
  double max_norm() const;

  bool operator==(const DiscreteMeasure& o) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<Point> points_;
  std::vector<double> weights_;
};

struct OrderCertificate {
  enum class Kind { Holds, MeanMismatch, Strike, Farkas };
  Kind kind = Kind::Holds;
  bool holds() const { return kind == Kind::Holds; }
  double strike = 0.0;   // Strike: call value excess at this strike
  double excess = 0.0;
  std::vector<double> farkas;  // Farkas: multipliers of the Strassen LP rows
  std::string describe() const;
};

OrderCertificate check_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// One-step martingale coupling pi(x_i, y_j) between mu and nu, minimizing sum pi |y - x|.
struct StrassenResult {
  bool feasible = false;
  std::vector<std::vector<double>> coupling;  // [i][j]
  std::vector<double> farkas;
};
StrassenResult strassen_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
bool strassen_feasible(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

double w1_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

class Peacock {
 public:
  Peacock() = default;
  /// Validates times (strictly increasing in [0,1], last = 1), shared dim,
  /// equal barycenters and convex order of consecutive laws.
  Peacock(std::vector<double> times, std::vector<DiscreteMeasure> laws);

  std::size_t dim() const { return laws_.front().dim(); }
  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<DiscreteMeasure>& laws() const { return laws_; }
  const DiscreteMeasure& law(std::size_t i) const { return laws_[i]; }

 private:
  std::vector<double> times_;
  std::vector<DiscreteMeasure> laws_;
};

class PeacockError : public std::invalid_argument {
 public:
  PeacockError(const std::string& what, std::size_t index, OrderCertificate cert)
      : std::invalid_argument(what), index(index), certificate(std::move(cert)) {}
  std::size_t index;
  OrderCertificate certificate;
};

/// Right-constant extension to times ∪ query_times.
Peacock close_peacock(const Peacock& p, const std::vector<double>& query_times);

struct CallQuoteCurve {
  double maturity = 1.0;
  std::vector<double> strikes;
  std::vector<double> prices;
  double spot = 1.0;
};

class ArbitrageError : public std::invalid_argument {
 public:
  ArbitrageError(const std::string& what, std::vector<double> strikes)
      : std::invalid_argument(what), strikes(std::move(strikes)) {}
  std::vector<double> strikes;
};

DiscreteMeasure marginals_from_calls(const CallQuoteCurve& curve);
CallQuoteCurve calls_from_measure(const DiscreteMeasure& mu, const std::vector<double>& strikes,
                                  double maturity = 1.0);

/// Convolution with mean-zero symmetric noise Z, E|Z| <= radius. Seed 0 is the
/// two-point split ½δ_{-r} + ½δ_{r} along the first coordinate.
DiscreteMeasure perturb_in_w1(const DiscreteMeasure& m, double radius, std::uint64_t seed);

struct PerturbedPeacock {
  enum class Status { Ok, Repaired, Rejected };
  Status status = Status::Ok;
  std::optional<Peacock> peacock;
  double w1 = 0.0;  // max over times of W1(original, perturbed)
};
std::string to_string(PerturbedPeacock::Status s);

/// Perturbs every law after the first. Independent noise per law is tried
/// first; if it breaks convex order the family is rebuilt with one shared
/// noise law, which preserves the order.
PerturbedPeacock perturb_peacock(const Peacock& p, double radius, std::uint64_t seed);

}  // namespace motlab::measures
