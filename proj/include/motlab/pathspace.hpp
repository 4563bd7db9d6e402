#pragma once

#include "motlab/numeric.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace motlab::pathspace {

class InvalidPath : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Jump {
  double t;
  Point value;  // value on [t, next jump)
  bool operator==(const Jump&) const = default;
};

/// Càdlàg piecewise-constant path on [0, horizon] with finitely many jumps.
/// Jumps of size zero are allowed (lattice paths record them); canonical()
/// removes them.
class StepPath {
 public:
  StepPath() = default;
  StepPath(Point initial, std::vector<Jump> jumps, double horizon = 1.0);
  static StepPath constant(Point value, double horizon = 1.0);

  std::size_t dim() const { return initial_.size(); }
  double horizon() const { return horizon_; }
  const Point& initial() const { return initial_; }
  const std::vector<Jump>& jumps() const { return jumps_; }

  const Point& at(double t) const;
  /// Left limit at t (equals at(0) for t = 0).
  const Point& before(double t) const;
  /// max over segment values of the Euclidean norm.
  double sup_norm() const;
  /// Componentwise integral over [0, horizon].
  Point integral() const;
  /// Integral of |ω_t| (Euclidean).
  double abs_integral() const;
  StepPath canonical() const;

  /// Segment start times (0 then jump times) and their values.
  std::vector<double> breakpoints() const;

  bool operator==(const StepPath& o) const = default;

 private:
  Point initial_;
  std::vector<Jump> jumps_;
  double horizon_ = 1.0;
};

/// Finite family of paths with probabilities.
struct PathMeasure {
  std::vector<StepPath> paths;
  std::vector<double> probs;
};

/// Time grid 0 = t_0 < ... < t_m = 1.
void validate_grid(const std::vector<double>& grid);
double min_step(const std::vector<double>& grid);

enum class PayoffKind { Asian, LookbackMax, BasketCallAt1, MarginalGrid, Custom };
std::string to_string(PayoffKind k);

/// Functions of the marginal-time tuple (ω_{t_0}, ..., ω_{t_m}).
using MarginalFn = std::function<double(const std::vector<Point>&)>;

struct Payoff {
  PayoffKind kind = PayoffKind::Asian;
  std::string name;
  std::vector<double> grid{0.0, 1.0};
  int coordinate = -1;  // Asian/LookbackMax: -1 means Euclidean norm
  Point basket;         // BasketCallAt1 weights
  double strike = 0.0;
  MarginalFn marginal;
  std::function<double(const StepPath&)> custom;
  bool bounded = false;
  std::optional<double> truncation;  // R of χ_R
  double shift_slope = kInf;          // α(u) = shift_slope * u

  double operator()(const StepPath& w) const;
  /// Shift modulus α(u) asserted for this payoff.
  double modulus(double u) const;
};

Payoff asian(std::vector<double> grid, int coordinate = -1);
Payoff lookback_max(std::vector<double> grid, int coordinate = -1);
Payoff basket_call_at_1(std::vector<double> grid, Point weights, double strike);
Payoff marginal_grid(std::vector<double> grid, MarginalFn f, std::string name, bool bounded = false);
/// |X_{t_j} - X_{t_i}|.
Payoff abs_move(std::vector<double> grid, std::size_t i, std::size_t j);
/// (X_{t_i, k} - K)^+.
Payoff call_at(std::vector<double> grid, std::size_t i, double strike, std::size_t k = 0);
Payoff constant(std::vector<double> grid, double c);
/// 1{‖ω‖ >= R} with the sup norm.
Payoff tail_indicator(std::vector<double> grid, double R);
Payoff custom(std::vector<double> grid, std::function<double(const StepPath&)> f, std::string name,
              bool bounded = false);

/// χ_R: 1 on [0,R], linear to 0 on [R, R+1], 0 beyond.
double chi(double R, double x);
Payoff truncate_payoff(Payoff xi, double R);

struct Normalization {
  double lo = 0.0;
  double hi = 1.0;
  double forward(double v) const { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }
  double backward(double v) const { return hi > lo ? lo + v * (hi - lo) : lo; }
};

/// Piecewise-linear nondecreasing time change [0,1] -> [0,1].
class TimeChange {
 public:
  enum class Kind { Forward, Backward };
  TimeChange(std::vector<double> grid, std::vector<double> eps, Kind kind);
  double operator()(double t) const;
  /// min{u : g(u) >= s}.
  double first_reach(double s) const;
  Kind kind() const { return kind_; }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& eps() const { return eps_; }

 private:
  std::vector<double> grid_;
  std::vector<double> eps_;
  Kind kind_;
};

/// Rejects |eps| >= ΔT (Euclidean norm of eps) and negative entries.
TimeChange forward_shift(const std::vector<double>& grid, const std::vector<double>& eps);
TimeChange backward_shift(const std::vector<double>& grid, const std::vector<double>& eps);
StepPath apply_time_change(const StepPath& w, const TimeChange& g);

/// Skorokhod J1 distance between the restrictions of two step paths to [s,t].
double j1_distance(const StepPath& a, const StepPath& b, double s, double t);
double rho_T(const StepPath& a, const StepPath& b, const std::vector<double>& grid);

/// Rescales a path on [0, 1+delta] to [0, 1].
StepPath dilate(const StepPath& w, double delta);

/// Example fixtures. sko_stopo maps a discrete martingale (M0, M1, M2) to the
/// path switching at 1/2 ∓ 1/n; closeness gives Y 1_{[1/n,1]} for Y = ±1.
StepPath sko_stopo(const Point& m0, const Point& m1, const Point& m2, int n);
PathMeasure sko_stopo_family(const std::vector<std::vector<Point>>& triples,
                             const std::vector<double>& probs, int n);
PathMeasure closeness(int n);

/// Law of ω_t under a path family (atoms merged).
struct AtomList {
  std::vector<Point> points;
  std::vector<double> weights;
};
AtomList marginal_at(const PathMeasure& family, double t);

/// Random nonnegative step path starting at `start`, jump times on the grid
/// k 2^{-time_bits}, values uniform in [0, vmax].
StepPath random_path(std::mt19937_64& rng, const Point& start, int max_jumps, double vmax,
                     int time_bits = 12);

}  // namespace motlab::pathspace
