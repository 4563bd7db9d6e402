#pragma once

#include "motlab/numeric.hpp"
#include "motlab/pathspace.hpp"

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace motlab::lattice {

class LatticeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetExceeded : public LatticeError {
 public:
  BudgetExceeded(const std::string& what, std::size_t attempted)
      : LatticeError(what), attempted(attempted) {}
  std::size_t attempted;
};

/// Exact number a + b√d with rational a, b.
struct Surd {
  Rational a = 0;
  Rational b = 0;
  int d = 1;

  Surd() = default;
  Surd(Rational a_, Rational b_, int d_);
  static Surd rational(const Rational& a, int d) { return Surd(a, 0, d); }

  int sign() const;
  double to_double() const;
  /// Exact value when √d is rational.
  bool is_rational() const { return sgn(b) == 0; }

  Surd operator+(const Surd& o) const { return Surd(a + o.a, b + o.b, d); }
  Surd operator-(const Surd& o) const { return Surd(a - o.a, b - o.b, d); }
  Surd operator*(const Rational& q) const { return Surd(a * q, b * q, d); }
  bool operator<(const Surd& o) const { return (*this - o).sign() < 0; }
  bool operator<=(const Surd& o) const { return (*this - o).sign() <= 0; }
  bool operator==(const Surd& o) const { return (*this - o).sign() == 0; }
};

/// Integer part of a surd, exact.
mpz_class floor(const Surd& x);
/// √d as a surd (rational when d is a perfect square).
Surd sqrt_d(int d);

/// Is x a member of A^(n) = 2^{-n} N^d?
bool on_grid(const Point& x, int n);
/// Nearest point of A^(level) per coordinate, ties toward 0. If the result's
/// Euclidean norm exceeds `bound`, coordinates that were rounded up are
/// rounded down (in index order) until it does not.
Point grid_project(const Point& x, int level, double bound = kInf);
/// Integer grid coordinates q with x = 2^{-level} q.
std::vector<std::int64_t> grid_coords(const Point& x, int level);

/// B^(N) in units of √d: {i 2^{-N}} ∪ {2^{-N}/j}.
bool in_B(const Rational& r, int N);
/// sup{b ∈ B^(N) : b < x} in units of √d; x > 0.
Rational snap_below(const Surd& x, int N);

struct Discretization {
  std::vector<Surd> tau;        // τ_0 = 0 < ... < τ_{K_m} = 1
  std::vector<std::size_t> K;   // K_0 = 0, τ_{K_i} = t_i
};

/// Discretization stopping times τ_k of a finite-jump path.
/// Throws LatticeError when a block needs more than max_steps points.
Discretization discretize_times(const pathspace::StepPath& w, const std::vector<double>& grid, int n,
                                std::size_t max_steps = 1u << 16);

/// A member of Ω̂^(n) with its partition kept explicit.
struct LatticeBlock {
  std::vector<Rational> inc;  // inc[j-1]: τ̂_j - τ̂_{j-1} in units of √d, j = 1..L-1
  std::vector<Point> values;  // value on [τ̂_j, τ̂_{j+1}), j = 0..L-1
};

struct LatticePath {
  int n = 1;
  std::size_t dim = 1;
  std::vector<double> grid;
  std::vector<LatticeBlock> blocks;

  Surd time(std::size_t block, std::size_t j) const;
  /// Every partition point is kept as a (possibly zero-size) jump.
  pathspace::StepPath to_step_path() const;
};

struct Membership {
  bool ok = true;
  std::string reason;  // first failing condition
};

/// Exact Ω̂^(n) membership check on an explicit partition.
Membership validate(const LatticePath& p);
/// Membership of a step path whose breakpoints (plus grid times) are taken as
/// the partition; B-membership is recovered with relative tolerance 1e-9.
Membership validate(const pathspace::StepPath& w, const std::vector<double>& grid, int n);

/// Lifting Π̂ of a finite-jump nonnegative path. Throws LatticeError when the
/// path leaves [0, R] or when √d 2^{-n} >= ΔT.
LatticePath lift(const pathspace::StepPath& w, const std::vector<double>& grid, int n, double R = kInf,
                 std::size_t max_steps = 1u << 16);

struct LatticeParams {
  int n = 1;
  std::size_t dim = 1;
  std::vector<double> grid{0.0, 1.0};
  double R = 2.0;
  int J_max = 1;
  std::size_t budget = 200000;
};

struct TreeNode {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t parent = npos;
  std::vector<std::size_t> children;
  double time = 0.0;
  Point value;
  int depth = 0;
  // Lattice bookkeeping (enumerated trees only).
  int block = -1;
  Rational offset = 0;  // time - t_block in units of √d
  int level = 0;        // resolution of value_q
  std::vector<std::int64_t> value_q;
};

/// Finite rooted tree of path prefixes; every root-to-leaf chain is a step path.
class LatticeTree {
 public:
  LatticeTree() = default;
  explicit LatticeTree(std::vector<double> grid) : grid_(std::move(grid)) {}

  std::size_t add_root(Point value);
  std::size_t add_child(std::size_t parent, double time, Point value);

  std::size_t size() const { return nodes_.size(); }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }
  TreeNode& node(std::size_t i) { return nodes_[i]; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t root() const { return 0; }
  bool is_leaf(std::size_t i) const { return nodes_[i].children.empty(); }
  std::vector<std::size_t> leaves() const;
  std::vector<std::size_t> internal_nodes() const;
  std::size_t dim() const { return nodes_.empty() ? 0 : nodes_[0].value.size(); }
  const std::vector<double>& grid() const { return grid_; }

  /// Root-to-node chain (root first).
  std::vector<std::size_t> chain(std::size_t node) const;
  /// The path ending at a node, extended constantly to t = 1.
  pathspace::StepPath path_to(std::size_t node) const;

  LatticeParams params;
  bool enumerated = false;

 private:
  std::vector<double> grid_;
  std::vector<TreeNode> nodes_;
};

/// Complete tree of Ω̂^(n) prefixes with values in [0,R]^d, at most J_max
/// moves per block. Interior times per block are t_i + √d 2^{-n}(2 - 2^{1-j}).
LatticeTree enumerate_tree(const LatticeParams& params);

/// Flat JSON array, BFS order, children sorted by value_q.
std::string dump_tree_json(const LatticeTree& tree);

}  // namespace motlab::lattice
