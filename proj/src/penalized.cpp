#include "motlab/penalized.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace motlab::penalized {

std::vector<double> node_mass(const lattice::LatticeTree& tree, const TreeMeasure& Q) {
  const auto leaves = tree.leaves();
  if (Q.leaf_probs.size() != leaves.size()) throw PenalizedError("tree measure has wrong size");
  std::vector<double> mass(tree.size(), 0.0);
  for (std::size_t l = 0; l < leaves.size(); ++l) mass[leaves[l]] = Q.leaf_probs[l];
  for (std::size_t v = tree.size(); v-- > 1;) mass[tree.node(v).parent] += mass[v];
  return mass;
}

double expected_drift(const lattice::LatticeTree& tree, const TreeMeasure& Q) {
  const auto mass = node_mass(tree, Q);
  double total = 0.0;
  for (std::size_t v = 0; v < tree.size(); ++v) {
    const auto& node = tree.node(v);
    Point f(tree.dim(), 0.0);
    for (auto c : node.children)
      for (std::size_t k = 0; k < f.size(); ++k) f[k] += mass[c] * (node.value[k] - tree.node(c).value[k]);
    total += norm1(f);
  }
  return total;
}

PenalizedSolution solve_penalized(const lattice::LatticeTree& tree, const pathspace::Payoff& zeta, double n,
                                  lp::Arithmetic arith) {
  if (tree.size() == 0) throw PenalizedError("empty tree");
  if (!(n >= 0.0)) throw PenalizedError("penalty level must be nonnegative");
  const auto leaves = tree.leaves();
  const std::size_t L = leaves.size(), d = tree.dim();

  lp::LinearProgram prog(lp::Sense::Maximize);
  std::vector<lp::Term> mass;
  std::vector<double> payoff(L);
  for (std::size_t l = 0; l < L; ++l) {
    payoff[l] = zeta(tree.path_to(leaves[l]));
    if (!(payoff[l] >= -1e-12 && payoff[l] <= 1.0 + 1e-12)) throw PenalizedError("payoff must be normalized to [0,1]");
    prog.add_variable("q" + std::to_string(leaves[l]));
    prog.set_objective(l, payoff[l]);
    mass.push_back({l, 1.0});
  }
  prog.add_constraint("mass", std::move(mass), lp::Relation::Equal, 1.0);

  // Linear form of node v, coordinate k: Σ_{leaves below v} q_l (x_v - x_{child on the way})_k.
  std::vector<std::vector<std::vector<lp::Term>>> forms(tree.size());
  for (std::size_t l = 0; l < L; ++l) {
    const auto chain = tree.chain(leaves[l]);
    for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
      auto& f = forms[chain[j]];
      if (f.empty()) f.resize(d);
      const auto& xv = tree.node(chain[j]).value;
      const auto& xc = tree.node(chain[j + 1]).value;
      for (std::size_t k = 0; k < d; ++k)
        if (xv[k] != xc[k]) f[k].push_back({l, xv[k] - xc[k]});
    }
  }
  std::vector<std::size_t> drift_rows;
  for (std::size_t v = 0; v < tree.size(); ++v) {
    for (std::size_t k = 0; k < forms[v].size(); ++k) {
      if (forms[v][k].empty()) continue;
      const auto s = prog.add_variable("s" + std::to_string(v) + "_" + std::to_string(k));
      prog.set_objective(s, -n);
      auto plus = forms[v][k], minus = forms[v][k];
      for (auto& t : plus) t.coef = -t.coef;
      plus.push_back({s, 1.0});
      minus.push_back({s, 1.0});
      drift_rows.push_back(prog.add_constraint("dp" + std::to_string(v), std::move(plus), lp::Relation::GreaterEqual, 0.0));
      drift_rows.push_back(prog.add_constraint("dm" + std::to_string(v), std::move(minus), lp::Relation::GreaterEqual, 0.0));
    }
  }

  lp::SolverOptions so;
  so.arithmetic = arith;
  const auto sol = lp::solve(prog, so);
  if (sol.status != lp::Status::Optimal) throw PenalizedError("penalized LP did not reach an optimum");

  PenalizedSolution out;
  out.n = n;
  out.value = sol.objective;
  for (std::size_t l = 0; l < L; ++l) {
    out.Q.leaf_probs.push_back(std::max(0.0, sol.primal[l]));
    out.expected_payoff += out.Q.leaf_probs.back() * payoff[l];
  }
  const auto m = node_mass(tree, out.Q);
  out.drift.assign(tree.size(), 0.0);
  for (std::size_t v = 0; v < tree.size(); ++v) {
    const auto& node = tree.node(v);
    Point f(d, 0.0);
    for (auto c : node.children)
      for (std::size_t k = 0; k < d; ++k) f[k] += m[c] * (tree.node(c).value[k] - node.value[k]);
    out.drift[v] = norm1(f);
    out.expected_drift += out.drift[v];
  }
  for (auto r : drift_rows) out.max_multiplier = std::max(out.max_multiplier, std::abs(sol.dual[r]));
  return out;
}

Compensator compensator(const lattice::LatticeTree& tree, const TreeMeasure& Q) {
  const auto mass = node_mass(tree, Q);
  const std::size_t N = tree.size(), d = tree.dim();
  Compensator out;
  out.increment.assign(N, std::nullopt);
  out.A.assign(N, std::nullopt);
  out.M.assign(N, std::nullopt);

  // Exact masses for the validator.
  std::vector<Rational> qm(N);
  const auto leaves = tree.leaves();
  for (std::size_t l = 0; l < leaves.size(); ++l) qm[leaves[l]] = to_rational(Q.leaf_probs[l]);
  for (std::size_t v = N; v-- > 1;) qm[tree.node(v).parent] += qm[v];
  std::vector<std::vector<Rational>> Aq(N), Mq(N);

  if (mass[tree.root()] > 0.0) {
    out.A[tree.root()] = Point(d, 0.0);
    Aq[tree.root()].assign(d, 0);
  }
  bool exact = true;
  for (std::size_t v = 0; v < N; ++v) {
    if (!out.A[v]) continue;
    const auto& node = tree.node(v);
    Mq[v].resize(d);
    Point M(d);
    for (std::size_t k = 0; k < d; ++k) {
      Mq[v][k] = to_rational(node.value[k]) + Aq[v][k];
      M[k] = node.value[k] + (*out.A[v])[k];
    }
    out.M[v] = M;
    if (node.children.empty()) continue;
    std::vector<Rational> a(d);
    Point af(d);
    for (std::size_t k = 0; k < d; ++k) {
      Rational mean = 0;
      for (auto c : node.children) mean += qm[c] * to_rational(tree.node(c).value[k]);
      mean /= qm[v];
      a[k] = to_rational(node.value[k]) - mean;
      af[k] = to_double(a[k]);
    }
    out.increment[v] = af;
    for (auto c : node.children) {
      if (!(mass[c] > 0.0)) continue;
      Aq[c].resize(d);
      Point Ac(d);
      for (std::size_t k = 0; k < d; ++k) {
        Aq[c][k] = Aq[v][k] + a[k];
        Ac[k] = to_double(Aq[c][k]);
      }
      out.A[c] = Ac;
    }
  }
  // Σ_c Q(c) (M_c - M_v) = 0 at every node with mass.
  for (std::size_t v = 0; v < N; ++v) {
    if (!out.A[v] || tree.node(v).children.empty()) continue;
    for (std::size_t k = 0; k < d; ++k) {
      Rational s = 0;
      for (auto c : tree.node(v).children) {
        if (!(mass[c] > 0.0)) continue;
        const Rational Mc = to_rational(tree.node(c).value[k]) + Aq[c][k];
        s += qm[c] * (Mc - Mq[v][k]);
      }
      exact = exact && s == 0;
    }
  }
  out.martingale_exact = exact;
  for (std::size_t l = 0; l < leaves.size(); ++l)
    if (out.A[leaves[l]]) out.expected_abs_A1 += Q.leaf_probs[l] * norm1(*out.A[leaves[l]]);
  return out;
}

DnTable dn_convergence_experiment(const lattice::LatticeTree& tree, const pathspace::Payoff& zeta,
                                  const std::vector<double>& ns, double tol) {
  DnTable tab;
  tab.V0 = transport::tree_superhedge_dp(tree, zeta).V0;
  tab.rows.resize(ns.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(ns.size());
  auto work = [&] {
    for (std::size_t k; (k = next++) < ns.size();) {
      try {
        const auto s = solve_penalized(tree, zeta, ns[k]);
        tab.rows[k] = {ns[k], s.value, s.expected_drift, s.value - tab.V0};
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const unsigned w = std::min<unsigned>(transport::worker_count(), static_cast<unsigned>(std::max<std::size_t>(1, ns.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < w; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw PenalizedError(e);

  tab.monotone = true;
  tab.above_V0 = true;
  for (std::size_t k = 0; k < tab.rows.size(); ++k) {
    if (k && tab.rows[k].n > tab.rows[k - 1].n && tab.rows[k].value > tab.rows[k - 1].value + 1e-9)
      tab.monotone = false;
    if (tab.rows[k].gap < -1e-9) tab.above_V0 = false;
  }
  for (std::size_t k = tab.rows.size(); k-- > 0;) {
    if (tab.rows[k].gap > tol) break;
    tab.n_star = tab.rows[k].n;
  }
  return tab;
}

}  // namespace motlab::penalized
