#pragma once

#include "motlab/lattice.hpp"
#include "motlab/pathspace.hpp"
#include "motlab/transport.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace motlab::penalized {

using transport::TreeMeasure;

class PenalizedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PenalizedSolution {
  double n = 1.0;
  double value = 0.0;
  TreeMeasure Q;
  std::vector<double> drift;  // per node: ‖Σ_c Q(c)(x_c - x_v)‖_1, 0 on leaves
  double expected_drift = 0.0;
  double max_multiplier = 0.0;  // largest |dual| on the drift rows (≤ n)
  double expected_payoff = 0.0;
};

/// sup_Q E^Q[ζ] - n Σ_v ‖Σ_c Q(c)(x_v - x_c)‖_1 over probability measures on
/// the leaves, as one LP with an auxiliary variable per node and coordinate.
PenalizedSolution solve_penalized(const lattice::LatticeTree& tree, const pathspace::Payoff& zeta, double n,
                                  lp::Arithmetic arith = lp::Arithmetic::Float);

/// Node masses of a leaf measure.
std::vector<double> node_mass(const lattice::LatticeTree& tree, const TreeMeasure& Q);
/// Σ_v ‖Σ_c Q(c)(x_v - x_c)‖_1.
double expected_drift(const lattice::LatticeTree& tree, const TreeMeasure& Q);

struct Compensator {
  std::vector<std::optional<Point>> increment;  // a_v = x_v - E[X_next | v]; nullopt on zero mass or leaves
  std::vector<std::optional<Point>> A;          // A at each node (A_root = 0)
  std::vector<std::optional<Point>> M;          // M = X + A
  double expected_abs_A1 = 0.0;                 // E^Q ‖A_1‖_1
  bool martingale_exact = false;                // conditional means of M checked in rationals
};
Compensator compensator(const lattice::LatticeTree& tree, const TreeMeasure& Q);

struct DnRow {
  double n = 0.0;
  double value = 0.0;
  double expected_drift = 0.0;
  double gap = 0.0;  // value - V0
};
struct DnTable {
  double V0 = 0.0;
  std::vector<DnRow> rows;
  /// Smallest n in the sweep from which every gap is ≤ tol, if any.
  std::optional<double> n_star;
  bool monotone = false;
  bool above_V0 = false;
};
DnTable dn_convergence_experiment(const lattice::LatticeTree& tree, const pathspace::Payoff& zeta,
                                  const std::vector<double>& ns, double tol = 1e-8);

}  // namespace motlab::penalized
