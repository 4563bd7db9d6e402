#pragma once

// Dense simplex solver with Bland's anti-cycling rule.
//
// Duals are reported in "box form": for a maximization problem the dual
// objective of a multiplier vector y is
//
//     b'y + sum_j sup_{l_j <= x_j <= u_j} (c_j - a_j'y) x_j,
//
// which folds the variable bounds into the dual instead of carrying a
// separate multiplier per bound. Signs: for a maximization problem y_i >= 0
// on <= rows and y_i <= 0 on >= rows; the signs flip for minimization.

#include "motlab/numeric.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace motlab::lp {

enum class Sense { Maximize, Minimize };
enum class Relation { LessEqual, Equal, GreaterEqual };
enum class Status { Optimal, Infeasible, Unbounded };
enum class Arithmetic { Float, Rational };
enum class PivotRule { Bland, Dantzig };

std::string to_string(Status s);
std::string to_string(Relation r);

struct Term {
  std::size_t var;
  double coef;
};

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  Relation rel = Relation::Equal;
  double rhs = 0.0;
};

class InvalidModel : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the solver cannot certify its own answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LinearProgram {
 public:
  explicit LinearProgram(Sense sense = Sense::Maximize) : sense_(sense) {}

  std::size_t add_variable(std::string name, double lower = 0.0, double upper = kInf);
  std::size_t add_constraint(std::string name, std::vector<Term> terms, Relation rel, double rhs);
  void set_objective(std::size_t var, double coef);
  void add_objective(std::size_t var, double coef);
  void set_sense(Sense s) { sense_ = s; }

  Sense sense() const { return sense_; }
  std::size_t num_variables() const { return vars_.size(); }
  std::size_t num_constraints() const { return rows_.size(); }
  const Variable& variable(std::size_t j) const { return vars_.at(j); }
  const Constraint& constraint(std::size_t i) const { return rows_.at(i); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Constraint>& constraints() const { return rows_; }
  const std::vector<double>& objective() const { return obj_; }

  /// Throws InvalidModel on non-finite coefficients, bad indices or l > u.
  void validate() const;

  double objective_value(const std::vector<double>& x) const;
  double row_activity(std::size_t i, const std::vector<double>& x) const;

 private:
  Sense sense_;
  std::vector<Variable> vars_;
  std::vector<Constraint> rows_;
  std::vector<double> obj_;
};

struct Residuals {
  double primal = 0.0;           // max constraint/bound violation
  double dual = 0.0;             // max sign / reduced-cost violation
  double complementarity = 0.0;  // sum |y_i| |slack_i| + sum |d_j| dist_j
  double gap = 0.0;              // |primal obj - dual obj|
};

struct ExactSolution {
  std::vector<Rational> primal;
  std::vector<Rational> dual;
  Rational objective;
};

struct LpSolution {
  Status status = Status::Infeasible;
  std::vector<double> primal;
  std::vector<double> dual;
  double objective = 0.0;
  /// Infeasible: multipliers w with sup_{x in box} w'Ax < w'b and sign
  /// pattern w_i <= 0 on <= rows, w_i >= 0 on >= rows.
  std::vector<double> farkas;
  /// Unbounded: a recession direction improving the objective.
  std::vector<double> ray;
  Residuals residuals;
  std::size_t iterations = 0;
  std::optional<ExactSolution> exact;
};

struct IterateInfo {
  int phase;
  std::size_t iteration;
  std::vector<double> primal;  // user space, phase 2 only
  std::vector<double> dual;    // user space, phase 2 only
};

struct SolverOptions {
  Arithmetic arithmetic = Arithmetic::Float;
  PivotRule pivot = PivotRule::Bland;
  std::size_t max_iterations = 0;  // 0: automatic bound
  double pivot_tolerance = 1e-9;
  /// Called after every phase-2 pivot; expensive, for tests only.
  std::function<void(const IterateInfo&)> on_iterate;
};

LpSolution solve(const LinearProgram& lp, const SolverOptions& opts = {});

/// Box-form dual objective of y (may be +/- infinity when y is dual infeasible).
double dual_objective(const LinearProgram& lp, const std::vector<double>& y);

struct DualityReport {
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  double complementarity = 0.0;
  bool passed = false;
  std::optional<Rational> exact_gap;
};

/// Recomputes both objectives, feasibility and complementary slackness.
DualityReport strong_duality_check(const LinearProgram& lp, const LpSolution& sol);

/// Returns the margin w'b - sup_box w'Ax (positive iff the certificate is valid).
double farkas_margin(const LinearProgram& lp, const std::vector<double>& w);

/// CPLEX LP text format (see README for the field layout).
void write_lp_format(std::ostream& os, const LinearProgram& lp);

}  // namespace motlab::lp
