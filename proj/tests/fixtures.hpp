#pragma once

// Random instances and brute-force oracles shared by the test binaries.

#include "motlab/lattice.hpp"
#include "motlab/lp.hpp"
#include "motlab/measures.hpp"
#include "motlab/pathspace.hpp"
#include "motlab/transport.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <memory>
#include <random>
#include <vector>

namespace fixtures {

using namespace motlab;
using measures::DiscreteMeasure;
using measures::Peacock;

inline DiscreteMeasure m1(std::vector<double> xs, std::vector<double> ws) {
  std::vector<Point> pts;
  for (double x : xs) pts.push_back({x});
  return DiscreteMeasure(1, pts, ws);
}

// Splits atoms of mu into x - a, x + b with martingale weights (steps in
// quarters). With `dyadic` a + b = 1, so weights stay exact in binary.
inline DiscreteMeasure split(const DiscreteMeasure& mu, std::mt19937_64& rng, bool dyadic = false) {
  std::uniform_int_distribution<int> step(1, dyadic ? 3 : 4);
  std::vector<Point> pts;
  std::vector<double> ws;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double x = mu.point(i)[0];
    const int sa = step(rng);
    double a = std::min<double>(sa, 4.0 * x) * 0.25, b = (dyadic ? 4 - sa : step(rng)) * 0.25;
    if (dyadic && a < 0.25 * sa) a = 0.0;
    if (rng() % 4 == 0 || a == 0.0) {
      pts.push_back({x});
      ws.push_back(mu.weight(i));
      continue;
    }
    pts.push_back({x - a});
    ws.push_back(mu.weight(i) * b / (a + b));
    pts.push_back({x + b});
    ws.push_back(mu.weight(i) * a / (a + b));
  }
  return DiscreteMeasure::aggregate(1, pts, ws);
}

// 1-D peacock on m+1 equally spaced times, each law at most max_atoms atoms.
inline Peacock random_peacock(std::mt19937_64& rng, std::size_t m, std::size_t max_atoms, std::size_t start_atoms = 1,
                              bool dyadic = false) {
  std::vector<double> times;
  for (std::size_t i = 0; i <= m; ++i) times.push_back(static_cast<double>(i) / static_cast<double>(m));
  for (;;) {
    DiscreteMeasure mu = DiscreteMeasure::dirac({2.0});
    while (mu.size() < start_atoms) mu = split(mu, rng, dyadic);
    if (mu.size() > max_atoms) continue;
    std::vector<DiscreteMeasure> laws{mu};
    bool ok = true;
    for (std::size_t i = 1; i <= m && ok; ++i) {
      laws.push_back(split(laws.back(), rng, dyadic));
      ok = laws.back().size() <= max_atoms;
    }
    if (ok) return Peacock(times, laws);
  }
}

// Random marginal payoff: Σ a_ij |x_j - x_i| + Σ b_i (x_i - k_i)^+ + c max_i x_i.
inline pathspace::Payoff random_marginal_payoff(std::mt19937_64& rng, const std::vector<double>& grid) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const std::size_t T = grid.size();
  std::vector<std::vector<double>> a(T, std::vector<double>(T));
  std::vector<double> b(T), k(T);
  for (auto& row : a)
    for (auto& v : row) v = U(rng);
  for (std::size_t i = 0; i < T; ++i) {
    b[i] = U(rng);
    k[i] = 1.0 + U(rng);
  }
  const double c = U(rng);
  return pathspace::marginal_grid(
      grid,
      [=](const std::vector<Point>& x) {
        double s = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < T; ++i) {
          for (std::size_t j = i + 1; j < T; ++j) s += a[i][j] * std::abs(x[j][0] - x[i][0]);
          s += b[i] * positive_part(x[i][0] - k[i]);
          mx = std::max(mx, x[i][0]);
        }
        return s + c * mx;
      },
      "random");
}

// max (or min) of c'x over {Ax = b, x >= 0} by enumerating basic solutions.
inline double vertex_enumeration(const lp::LinearProgram& prog) {
  const std::size_t n = prog.num_variables();
  const std::size_t m = prog.num_constraints();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  Eigen::VectorXd b(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& t : prog.constraint(i).terms) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t.var)) += t.coef;
    b(static_cast<Eigen::Index>(i)) = prog.constraint(i).rhs;
  }
  // Keep a maximal independent row set.
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A.transpose());
  const auto r = static_cast<std::size_t>(lu.rank());
  std::vector<Eigen::Index> rows;
  {
    Eigen::MatrixXd acc(0, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < m && rows.size() < r; ++i) {
      Eigen::MatrixXd next(acc.rows() + 1, acc.cols());
      next << acc, A.row(static_cast<Eigen::Index>(i));
      if (Eigen::FullPivLU<Eigen::MatrixXd>(next).rank() == next.rows()) {
        acc = next;
        rows.push_back(static_cast<Eigen::Index>(i));
      }
    }
  }
  Eigen::MatrixXd Ar(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(n));
  Eigen::VectorXd br(static_cast<Eigen::Index>(r));
  for (std::size_t i = 0; i < r; ++i) {
    Ar.row(static_cast<Eigen::Index>(i)) = A.row(rows[i]);
    br(static_cast<Eigen::Index>(i)) = b(rows[i]);
  }
  const bool maximize = prog.sense() == lp::Sense::Maximize;
  double best = maximize ? -kInf : kInf;
  std::vector<int> pick(n, 0);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(r), 1);
  std::sort(pick.begin(), pick.end());
  do {
    std::vector<Eigen::Index> cols;
    for (std::size_t j = 0; j < n; ++j)
      if (pick[j]) cols.push_back(static_cast<Eigen::Index>(j));
    Eigen::MatrixXd B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
    for (std::size_t k = 0; k < r; ++k) B.col(static_cast<Eigen::Index>(k)) = Ar.col(cols[k]);
    Eigen::FullPivLU<Eigen::MatrixXd> f(B);
    if (f.rank() < static_cast<Eigen::Index>(r)) continue;
    const Eigen::VectorXd x = f.solve(br);
    if ((x.array() < -1e-10).any()) continue;
    double v = 0.0;
    for (std::size_t k = 0; k < r; ++k) v += prog.objective()[static_cast<std::size_t>(cols[k])] * x(static_cast<Eigen::Index>(k));
    best = maximize ? std::max(best, v) : std::min(best, v);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

// Random tree on grid {0, 1} with root value x0 (1-D) and `depth` levels.
// Every node brackets its own value with its children unless `prune_rate`
// fires, in which case all children lie strictly above it.
inline lattice::LatticeTree random_tree(std::mt19937_64& rng, int depth, double prune_rate = 0.0, std::size_t dim = 1) {
  lattice::LatticeTree t({0.0, 1.0});
  t.add_root(Point(dim, 2.0));
  std::uniform_int_distribution<int> nkids(1, 3);
  std::uniform_int_distribution<int> step(1, 4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<std::size_t> frontier{0};
  for (int lev = 1; lev <= depth; ++lev) {
    std::vector<std::size_t> next;
    const double time = static_cast<double>(lev) / depth;
    for (auto v : frontier) {
      const Point x = t.node(v).value;
      const bool prune = U(rng) < prune_rate;
      std::vector<Point> kids;
      const int k = nkids(rng);
      for (int j = 0; j < k; ++j) {
        Point y = x;
        for (auto& c : y) c = std::max(0.0, c + (prune ? 0.25 * step(rng) : 0.25 * (step(rng) - 2.5) * 2.0));
        kids.push_back(y);
      }
      if (!prune) {
        // Force a martingale-feasible pair through x.
        Point lo = x, hi = x;
        for (std::size_t c = 0; c < dim; ++c) {
          const double a = std::min(x[c], 0.25 * step(rng));
          lo[c] = x[c] - a;
          hi[c] = x[c] + a;
        }
        kids.push_back(lo);
        kids.push_back(hi);
      }
      std::sort(kids.begin(), kids.end());
      kids.erase(std::unique(kids.begin(), kids.end()), kids.end());
      for (const auto& y : kids) next.push_back(t.add_child(v, time, y));
    }
    frontier = std::move(next);
  }
  return t;
}

// Random martingale transition weights: mean of two random LP vertices per node.
inline std::vector<std::vector<double>> random_transitions(const lattice::LatticeTree& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<std::vector<double>> q(t.size());
  for (std::size_t v = 0; v < t.size(); ++v) {
    const auto& ch = t.node(v).children;
    if (ch.empty()) continue;
    q[v].assign(ch.size(), 0.0);
    for (int rep = 0; rep < 2; ++rep) {
      lp::LinearProgram prog;
      std::vector<lp::Term> mass;
      for (std::size_t k = 0; k < ch.size(); ++k) {
        prog.add_variable("q");
        prog.set_objective(k, U(rng));
        mass.push_back({k, 1.0});
      }
      prog.add_constraint("mass", mass, lp::Relation::Equal, 1.0);
      for (std::size_t c = 0; c < t.dim(); ++c) {
        std::vector<lp::Term> terms;
        for (std::size_t k = 0; k < ch.size(); ++k)
          terms.push_back({k, t.node(ch[k]).value[c] - t.node(v).value[c]});
        prog.add_constraint("mart", terms, lp::Relation::Equal, 0.0);
      }
      const auto sol = lp::solve(prog);
      if (sol.status != lp::Status::Optimal) throw std::runtime_error("node without martingale weights");
      for (std::size_t k = 0; k < ch.size(); ++k) q[v][k] += 0.5 * std::max(0.0, sol.primal[k]);
    }
  }
  return q;
}

// Marginals of a tree measure at the tree's grid times.
inline Peacock tree_marginals(const lattice::LatticeTree& t, const transport::TreeMeasure& m) {
  const auto plan = transport::tree_plan(t, m);
  std::vector<DiscreteMeasure> laws;
  for (double s : t.grid()) laws.push_back(plan.law_at(s));
  return Peacock(t.grid(), laws);
}

// All leaf paths of a tree.
inline std::vector<pathspace::StepPath> leaf_paths(const lattice::LatticeTree& t) {
  std::vector<pathspace::StepPath> out;
  for (auto l : t.leaves()) out.push_back(t.path_to(l));
  return out;
}

}  // namespace fixtures
