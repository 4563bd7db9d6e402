#pragma once

#include "motlab/lattice.hpp"
#include "motlab/lp.hpp"
#include "motlab/measures.hpp"
#include "motlab/pathspace.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace motlab::transport {

using measures::DiscreteMeasure;
using measures::Peacock;
using pathspace::Payoff;
using pathspace::StepPath;

enum class Sense { Max, Min };
std::string to_string(Sense s);

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Marginals that no martingale measure on the support can match.
class InfeasibleMarginals : public TransportError {
 public:
  InfeasibleMarginals(const std::string& what, std::optional<measures::OrderCertificate> witness,
                      std::optional<double> min_relaxation)
      : TransportError(what), witness(std::move(witness)), min_relaxation(min_relaxation) {}
  std::optional<measures::OrderCertificate> witness;
  std::optional<double> min_relaxation;  // smallest Σ_i W1 reachable (lattice mode)
};

struct TransportPlan {
  std::vector<double> grid;
  std::vector<StepPath> paths;
  std::vector<double> probs;

  std::size_t size() const { return paths.size(); }
  double expectation(const Payoff& xi) const;
  DiscreteMeasure law_at(double t) const;
};

/// Path that holds values[i] on [t_i, t_{i+1}).
StepPath tuple_path(const std::vector<double>& grid, const std::vector<Point>& values);

/// Σ over conditioning prefixes of ‖Σ p (X_next - X_now)‖_1. Prefixes are
/// taken at every jump or grid time of the support.
double martingale_residual(const TransportPlan& plan);

struct PlanCheck {
  double mass_error = 0.0;
  double martingale = 0.0;
  double marginal = 0.0;  // max_i W1(law at t_i, μ_i)
  bool ok = false;
};
PlanCheck check_plan(const TransportPlan& plan, const Peacock& p, double radius = 0.0);

/// Left-continuous piecewise-constant strategy: h0 on [0, s_1], values[k] on
/// (times[k], times[k+1]] with times[K] followed by 1.
struct StepStrategy {
  Point h0;
  std::vector<double> times;
  std::vector<Point> values;

  static StepStrategy constant(Point h) { return {std::move(h), {}, {}}; }
  const Point& at(double t) const;
};

/// (H·ω)_1 = H_1 ω_1 - H_0 ω_0 - ∫ ω dH, exact.
Rational stochastic_integral_exact(const StepStrategy& H, const StepPath& w);
/// Σ_k H_{s_k}·(ω_{s_{k+1}} - ω_{s_k}) over the change points of H, exact.
Rational riemann_stieltjes_exact(const StepStrategy& H, const StepPath& w);
double stochastic_integral(const StepStrategy& H, const StepPath& w);

/// Static part λ_i per marginal time and a dynamic strategy. For Sense::Max
/// the certificate claims λ(ω) + (H·ω)_1 >= ξ(ω); for Min the reverse.
struct DualCertificate {
  std::string label;
  std::vector<double> grid;
  Sense sense = Sense::Max;
  std::size_t dim = 1;
  /// λ_i(x); NaN marks points outside the certificate's domain.
  std::vector<std::function<double(const Point&)>> lambda;
  /// Strategy for a path, or nullopt if the path is outside the domain.
  std::function<std::optional<StepStrategy>(const StepPath&)> strategy;
  /// Values admissible at t_i (empty: any nonnegative point).
  std::vector<std::vector<Point>> domains;
  // Export tables.
  std::vector<std::vector<std::pair<Point, double>>> lambda_tables;
  std::vector<std::pair<std::string, Point>> node_multipliers;
  pathspace::Normalization normalization;

  /// Σ_i E_{μ_i}[λ_i].
  double cost(const Peacock& p) const;
  /// λ(ω) + (H·ω)_1, or nullopt outside the domain.
  std::optional<double> hedge_value(const StepPath& w) const;
  /// Signed so that negative means violation.
  std::optional<double> residual(const StepPath& w, const Payoff& xi) const;
};

struct VerifyReport {
  std::size_t checked = 0;
  std::size_t uncovered = 0;
  double min_residual = kInf;
  std::size_t argmin = 0;
  std::optional<StepPath> worst;
  bool passed = false;
};
VerifyReport verify_superhedge(const DualCertificate& cert, const Payoff& xi, const std::vector<StepPath>& paths,
                               double tol = tol::kResidual);

/// Deterministic local search for paths with small residual: coordinate moves
/// over jump times and values (values at marginal times stay in the domain).
std::vector<StepPath> adversarial_paths(const DualCertificate& cert, const Payoff& xi,
                                        const std::vector<StepPath>& starts, std::size_t restarts,
                                        std::uint64_t seed, std::size_t steps = 200);

struct MarginalOptions {
  lp::Arithmetic arithmetic = lp::Arithmetic::Float;
  lp::PivotRule pivot = lp::PivotRule::Bland;
  /// Per marginal time: impose the marginal constraint (default all).
  std::vector<bool> constrained;
};

enum class MarginalMode { Exact, Penalized, Free };
std::string to_string(MarginalMode m);

struct LatticeOptions {
  MarginalMode mode = MarginalMode::Exact;
  double penalty = 0.0;  // c in penalized mode
  lp::Arithmetic arithmetic = lp::Arithmetic::Float;
  lp::PivotRule pivot = lp::PivotRule::Bland;
};

struct PrimalResult {
  double value = 0.0;
  Sense sense = Sense::Max;
  TransportPlan plan;
  lp::LinearProgram lp;
  lp::LpSolution solution;
  std::optional<Rational> exact_value;

  // Row bookkeeping for dual extraction.
  bool lattice = false;
  MarginalMode mode = MarginalMode::Exact;
  double penalty = 0.0;
  std::vector<std::vector<Point>> atoms;                 // per time: values carrying λ rows
  std::vector<std::vector<std::size_t>> marginal_rows;   // [i][a], npos if none
  std::vector<std::vector<Point>> target_atoms;          // penalized: atoms of projected μ_i
  std::vector<std::vector<std::size_t>> target_rows;     // penalized: rows of Σ_a γ(a,b) = μ(b)
  std::map<std::vector<Point>, std::vector<std::size_t>> prefix_rows;  // marginal mode
  std::map<std::size_t, std::vector<std::size_t>> node_rows;          // lattice mode
  std::size_t mass_row = static_cast<std::size_t>(-1);
  std::shared_ptr<const lattice::LatticeTree> tree;
  Peacock peacock;  // marginals actually imposed (projected in lattice mode)
};

PrimalResult solve_primal_marginal(const Peacock& p, const Payoff& xi, Sense sense, const MarginalOptions& opts = {});

/// b'y from the exact-rational duals (rational mode only).
Rational dual_cost_exact(const PrimalResult& r);

/// Pushforward of μ under grid_project at level n (no norm bound).
DiscreteMeasure project_measure(const DiscreteMeasure& mu, int n);

PrimalResult solve_primal_lattice(const Peacock& p, const Payoff& xi, std::shared_ptr<const lattice::LatticeTree> tree,
                                  Sense sense, const LatticeOptions& opts = {});

/// λ from marginal-row duals, H from martingale-row duals.
DualCertificate extract_dual_d1(const PrimalResult& r);

struct TreeDP {
  double V0 = 0.0;
  std::vector<double> V;                   // -inf on pruned nodes
  std::vector<std::vector<double>> q;      // optimal child weights per node
};
/// Backward induction V(v) = max {Σ q_c V(c) : q prob., Σ q_c x_c = x_v}.
TreeDP tree_superhedge_dp(const lattice::LatticeTree& tree, const Payoff& zeta);

/// Probabilities on the leaves of a tree.
struct TreeMeasure {
  std::vector<double> leaf_probs;  // indexed like tree.leaves()
};
TransportPlan tree_plan(const lattice::LatticeTree& tree, const TreeMeasure& q);
/// Leaf law from per-node transition weights.
TreeMeasure compose_transitions(const lattice::LatticeTree& tree, const std::vector<std::vector<double>>& q);

/// Superhedge of 1{sup_t ω_{t,i} >= R}: λ_m(x) = (x_i - K)^+/(R - K) and a
/// short position of 1/(R - K) in asset i after the first hitting of R.
DualCertificate bhr_tail_hedge(const std::vector<double>& grid, std::size_t dim, double R, double K, std::size_t i);
/// The indicator it hedges.
Payoff coordinate_tail(const std::vector<double>& grid, double R, std::size_t i);
/// Exact residual of bhr_tail_hedge on a path.
Rational bhr_residual_exact(double R, double K, std::size_t i, const StepPath& w);
/// Sum of per-coordinate BHR hedges at level R/d, K = R/(2d); dominates
/// 1{‖ω‖ >= R} with ‖·‖ the Euclidean sup norm.
DualCertificate tail_hedge(const std::vector<double>& grid, std::size_t dim, double R);
double tail_hedge_bound(const Peacock& p, double R);

/// Markov chain of one-step Strassen couplings (minimal displacement).
TransportPlan construct_plan(const Peacock& p);

struct SolverConfig {
  bool lattice = false;
  std::shared_ptr<const lattice::LatticeTree> tree;
  MarginalOptions marginal;
  LatticeOptions lattice_opts;
};

struct PriceInterval {
  double lower = 0.0;
  double upper = 0.0;
  PrimalResult lower_result;
  PrimalResult upper_result;
  DualCertificate lower_cert;
  DualCertificate upper_cert;
  double radius = 0.0;
};
PriceInterval price_interval(const Peacock& p, const Payoff& xi, const SolverConfig& cfg = {});

struct StabilityRow {
  double radius = 0.0;
  std::uint64_t seed = 0;
  std::string status;  // ok | repaired | rejected
  double w1 = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double escape = 0.0;  // max(P̄_r - P̄, P̲ - P̲_r, 0)
};
struct StabilityTable {
  double base_lower = 0.0;
  double base_upper = 0.0;
  std::vector<StabilityRow> rows;
  std::vector<std::pair<double, double>> eps;  // (radius, max escape over seeds)
};
/// Worker count from MOTLAB_THREADS, else hardware concurrency.
unsigned worker_count();
StabilityTable stability_sweep(const Peacock& p, const Payoff& xi, const std::vector<double>& radii,
                               const std::vector<std::uint64_t>& seeds, const SolverConfig& cfg = {});

/// Pushes every support path through the forward shift f_ε.
TransportPlan freeze_pushforward(const TransportPlan& plan, const std::vector<double>& eps);

}  // namespace motlab::transport
