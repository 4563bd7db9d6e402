// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "fixtures.hpp"
#include "motlab/cli.hpp"
#include "motlab/penalized.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace motlab;
using namespace motlab::transport;
using fixtures::m1;

namespace {

struct Outcome {
  bool pass = true;
  std::string failure;
  std::ostringstream note;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) failure = what;
    pass = pass && ok;
  }
};

std::vector<StepPath> support_paths(const PrimalResult& r) {
  std::vector<StepPath> out;
  const auto& g = r.peacock.times();
  std::vector<std::size_t> idx(g.size(), 0);
  for (;;) {
    std::vector<Point> v;
    for (std::size_t i = 0; i < g.size(); ++i) v.push_back(r.atoms[i][idx[i]]);
    out.push_back(tuple_path(g, v));
    std::size_t i = g.size();
    while (i-- > 0) {
      if (++idx[i] < r.atoms[i].size()) break;
      idx[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) return out;
  }
}

Peacock forced() { return Peacock({0.0, 1.0}, {DiscreteMeasure::dirac({1.0}), m1({0, 2}, {0.5, 0.5})}); }

double abs_dev(const DiscreteMeasure& mu, double c) {
  double s = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) s += mu.weight(k) * std::abs(mu.point(k)[0] - c);
  return s;
}

void duality(Outcome& o) {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int exact = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t m = 1 + static_cast<std::size_t>(k % 3);
    const bool dyadic = k < 20;
    const auto p = fixtures::random_peacock(rng, m, 6, 1 + static_cast<std::size_t>(k % 2), dyadic);
    const auto xi = fixtures::random_marginal_payoff(rng, p.times());
    for (auto s : {Sense::Max, Sense::Min}) {
      const auto r = solve_primal_marginal(p, xi, s);
      const double gap = std::abs(extract_dual_d1(r).cost(p) - r.value);
      worst = std::max(worst, gap);
      o.require(gap <= 1e-8, "float gap on instance " + std::to_string(k));
    }
    if (dyadic) {
      MarginalOptions q;
      q.arithmetic = lp::Arithmetic::Rational;
      const auto r = solve_primal_marginal(p, xi, Sense::Max, q);
      const bool zero = r.exact_value && *r.exact_value == dual_cost_exact(r);
      exact += zero;
      o.require(zero, "rational gap on instance " + std::to_string(k));
    }
  }
  o.note << "max float gap " << worst << ", exact zero gap on " << exact << "/20";
}

void forced_instances(Outcome& o) {
  const auto p = forced();
  const auto xi = pathspace::abs_move(p.times(), 0, 1);
  MarginalOptions q;
  q.arithmetic = lp::Arithmetic::Rational;
  for (auto s : {Sense::Max, Sense::Min}) {
    const auto r = solve_primal_marginal(p, xi, s, q);
    o.require(r.exact_value && *r.exact_value == 1, "forced value is not exactly 1");
  }
  const Peacock pc({0.0, 1.0}, {DiscreteMeasure::dirac({1.0}), m1({0, 1, 2}, {0.25, 0.5, 0.25})});
  const auto call = pathspace::call_at(pc.times(), 1, 1.0);
  const auto iv = price_interval(pc, call);
  const double vu = fixtures::vertex_enumeration(iv.upper_result.lp);
  const double vl = fixtures::vertex_enumeration(iv.lower_result.lp);
  o.require(std::abs(iv.upper - 0.25) <= 1e-12 && std::abs(iv.lower - 0.25) <= 1e-12, "call interval");
  o.require(std::abs(vu - 0.25) <= 1e-12 && std::abs(vl - 0.25) <= 1e-12, "vertex enumeration");
  o.note << "forced [1,1] exact; call interval [" << iv.lower << ", " << iv.upper << "], vertices [" << vl << ", "
         << vu << "]";
}

void weak_duality(Outcome& o) {
  std::vector<std::pair<Peacock, pathspace::Payoff>> cases;
  cases.emplace_back(forced(), pathspace::abs_move(forced().times(), 0, 1));
  const Peacock pc({0.0, 1.0}, {DiscreteMeasure::dirac({1.0}), m1({0, 1, 2}, {0.25, 0.5, 0.25})});
  cases.emplace_back(pc, pathspace::call_at(pc.times(), 1, 1.0));
  const Peacock reg({0.0, 0.5, 1.0}, {DiscreteMeasure::dirac({2.0}), m1({1.5, 2.5}, {0.5, 0.5}),
                                      m1({0, 1, 2, 3, 4}, {0.125, 0.25, 0.25, 0.25, 0.125})});
  cases.emplace_back(reg, pathspace::marginal_grid(
                              reg.times(),
                              [](const std::vector<Point>& x) {
                                const double a = x[1][0], b = x[2][0];
                                return std::abs(b - a) + (a == 1.5 && b >= 3.0 ? 0.5 : 0.0);
                              },
                              "regression"));
  std::mt19937_64 rng(303);
  for (int k = 0; k < 12; ++k) {
    const auto p = fixtures::random_peacock(rng, 1 + static_cast<std::size_t>(k % 3), 5);
    cases.emplace_back(p, fixtures::random_marginal_payoff(rng, p.times()));
  }
  int certs = 0;
  for (const auto& [p, xi] : cases) {
    const auto iv = price_interval(p, xi);
    const auto up = verify_superhedge(iv.upper_cert, xi, support_paths(iv.upper_result));
    const auto lo = verify_superhedge(iv.lower_cert, xi, support_paths(iv.lower_result));
    o.require(up.passed && lo.passed, "certificate verification");
    o.require(iv.upper_cert.cost(p) >= iv.upper - 1e-8, "upper certificate below the primal");
    o.require(iv.lower_cert.cost(p) <= iv.lower + 1e-8, "lower certificate above the primal");
    certs += 2;
  }
  int trees = 0;
  double worst = 0.0;
  std::mt19937_64 trng(41);
  while (trees < 10) {
    const auto tree = std::make_shared<lattice::LatticeTree>(fixtures::random_tree(trng, 3));
    const auto xi = pathspace::asian(tree->grid(), 0);
    const auto p = fixtures::tree_marginals(*tree, compose_transitions(*tree, fixtures::random_transitions(*tree, trng)));
    LatticeOptions fr;
    fr.mode = MarginalMode::Free;
    const double dp = tree_superhedge_dp(*tree, xi).V0;
    const double exact = solve_primal_lattice(p, xi, tree, Sense::Max).value;
    const double big = solve_primal_lattice(p, xi, tree, Sense::Max, fr).value;
    o.require(dp >= exact - 1e-8, "V0 below the marginal-constrained primal");
    worst = std::max(worst, std::abs(dp - big));
    o.require(std::abs(dp - big) <= 1e-8, "V0 differs from the big LP");
    ++trees;
  }
  o.note << certs << " certificates verified on " << cases.size() << " instances; V0 vs big LP max diff " << worst
         << " on 10 trees";
}

void discretization(Outcome& o) {
  const auto corpus = cli::path_corpus(2024, 100);
  const auto& g = cli::kCorpusGrid;
  std::vector<std::vector<double>> rho(9), scaled(9);
  for (const auto& w : corpus)
    for (int n = 3; n <= 8; ++n) {
      const double r = pathspace::rho_T(w, lattice::lift(w, g, n).to_step_path(), g);
      rho[n].push_back(r);
      scaled[n].push_back(r * std::ldexp(1.0, n) / (1.0 + w.sup_norm()));
    }
  const double C = *std::max_element(scaled[3].begin(), scaled[3].end());
  o.note << "C = " << C;
  for (int n = 4; n <= 8; ++n) {
    const double mx = *std::max_element(scaled[n].begin(), scaled[n].end());
    std::vector<double> ratio;
    for (std::size_t k = 0; k < corpus.size(); ++k)
      if (rho[n][k] > 0.0) ratio.push_back(rho[n - 1][k] / rho[n][k]);
    std::nth_element(ratio.begin(), ratio.begin() + static_cast<std::ptrdiff_t>(ratio.size() / 2), ratio.end());
    double med = ratio[ratio.size() / 2];
    if (ratio.size() % 2 == 0) {
      med = 0.5 * (med + *std::max_element(ratio.begin(), ratio.begin() + static_cast<std::ptrdiff_t>(ratio.size() / 2)));
    }
    o.note << "; n=" << n << " max " << mx << " median ratio " << med;
    o.require(mx <= C, "bound exceeded at n=" + std::to_string(n));
    o.require(med >= 1.6 && med <= 2.6, "decay ratio at n=" + std::to_string(n));
  }
}

void tail(Outcome& o) {
  std::mt19937_64 rng(505);
  std::size_t bad = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto w = pathspace::random_path(rng, {1.0}, 8, 6.0);
    if (bhr_residual_exact(4.0, 2.0, 0, w) < 0) ++bad;
  }
  o.require(bad == 0, "negative BHR residual");
  int held = 0;
  std::mt19937_64 trng(606);
  for (int k = 0; k < 20; ++k) {
    lattice::LatticeParams prm;
    prm.R = 3.0;
    prm.grid = k % 2 ? std::vector<double>{0.0, 0.5, 1.0} : std::vector<double>{0.0, 1.0};
    prm.n = k % 2 ? 2 : 1;
    const auto tree = std::make_shared<lattice::LatticeTree>(lattice::enumerate_tree(prm));
    const auto p = fixtures::tree_marginals(*tree, compose_transitions(*tree, fixtures::random_transitions(*tree, trng)));
    const auto base = k % 4 < 2 ? pathspace::lookback_max(prm.grid, 0) : pathspace::asian(prm.grid, 0);
    const auto xi = pathspace::custom(prm.grid, [base](const StepPath& w) { return base(w) / 3.0; }, "scaled", true);
    const double R = k % 3 == 0 ? 1.5 : 2.0;
    const double full = solve_primal_lattice(p, xi, tree, Sense::Max).value;
    const double trunc = solve_primal_lattice(p, pathspace::truncate_payoff(xi, R), tree, Sense::Max).value;
    const bool ok = trunc <= full + 1e-9 && full <= trunc + tail_hedge_bound(p, R) + 1e-9;
    held += ok;
    o.require(ok, "sandwich on lattice instance " + std::to_string(k));
  }
  o.note << bad << " violations on 10^4 paths; sandwich holds on " << held << "/20";
}

pathspace::Payoff capped_asian(const std::vector<double>& g) {
  return pathspace::custom(g, [](const StepPath& w) { return std::min(1.0, w.integral()[0] / 4.0); }, "asian/4", true);
}

void penalized_convergence(Outcome& o) {
  std::mt19937_64 rng(707);
  std::vector<double> ns;
  for (int n = 1; n <= 32; ++n) ns.push_back(n);
  for (int k = 0; k < 5; ++k) {
    const auto t = fixtures::random_tree(rng, 3);
    const auto tab = penalized::dn_convergence_experiment(t, capped_asian(t.grid()), ns);
    o.require(tab.monotone && tab.above_V0 && tab.n_star, "tree " + std::to_string(k));
    if (tab.n_star)
      for (const auto& row : tab.rows)
        if (row.n >= *tab.n_star) o.require(row.gap <= 1e-8, "gap after n*");
    o.note << (k ? ", " : "n* = ") << (tab.n_star ? std::to_string(static_cast<int>(*tab.n_star)) : "none");
  }
  lattice::LatticeTree t({0.0, 1.0});
  t.add_root({1.0});
  t.add_child(0, 1.0, {0.0});
  t.add_child(0, 1.0, {2.0});
  const auto z = pathspace::custom(t.grid(), [](const StepPath& w) { return w.at(1.0)[0] == 2.0 ? 1.0 : 0.0; }, "top", true);
  double worst = 0.0;
  for (double n : {0.0, 0.1, 0.25, 0.4, 0.5, 1.0, 2.0, 5.0}) {
    double scan = -kInf;
    for (int k = 0; k <= 10000; ++k) scan = std::max(scan, k * 1e-4 - n * std::abs(1.0 - 2.0 * k * 1e-4));
    worst = std::max(worst, std::abs(penalized::solve_penalized(t, z, n).value - scan));
  }
  o.require(worst <= 1e-4, "two-leaf scan");
  o.note << "; two-leaf max diff " << worst;
}

void stability(Outcome& o) {
  const std::vector<double> radii{0.2, 0.1, 0.05, 0.025, 0.0};
  for (std::uint64_t k = 0; k < 10; ++k) {
    std::mt19937_64 rng(800 + k);
    const auto p = fixtures::random_peacock(rng, 1 + k % 2, 4, 1 + k % 2);
    const auto xi = fixtures::random_marginal_payoff(rng, p.times());
    const auto tab = stability_sweep(p, xi, radii, {1, 2, 3});
    auto eps = tab.eps;
    std::sort(eps.begin(), eps.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t i = 1; i < eps.size(); ++i)
      o.require(eps[i].second <= eps[i - 1].second + 1e-6, "eps increases on instance " + std::to_string(k));
    o.require(eps.back().first == 0.0 && eps.back().second == 0.0, "eps(0) != 0 on instance " + std::to_string(k));
    o.note << (k ? " " : "eps(0.2): ") << eps.front().second;
  }
  const auto p = forced();
  const auto xi = pathspace::abs_move(p.times(), 0, 1);
  double worst = 0.0;
  for (double r : {0.2, 0.1, 0.05, 0.025}) {
    const auto tab = stability_sweep(p, xi, {r}, {0});
    const double closed = abs_dev(measures::perturb_in_w1(p.law(1), r, 0), 1.0);
    worst = std::max({worst, std::abs(tab.rows[0].upper - closed), std::abs(tab.rows[0].lower - closed)});
  }
  o.require(worst <= 1e-10, "symmetric split closed form");
  o.note << "; closed form max diff " << worst;
}

void freeze(Outcome& o) {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  lattice::LatticeParams prm;
  prm.n = 2;
  prm.grid = {0.0, 0.5, 1.0};
  const auto tree = lattice::enumerate_tree(prm);
  const std::vector<pathspace::Payoff> payoffs{pathspace::asian(prm.grid, -1), pathspace::asian(prm.grid, 0),
                                               pathspace::lookback_max(prm.grid, 0),
                                               pathspace::basket_call_at_1(prm.grid, {1.0}, 1.5)};
  const double m = static_cast<double>(prm.grid.size() - 1);
  int samples = 0;
  double tightest = kInf;
  for (int k = 0; k < 20; ++k) {
    const auto plan = tree_plan(tree, compose_transitions(tree, fixtures::random_transitions(tree, rng)));
    double e1 = 0.0;
    for (std::size_t a = 0; a < plan.size(); ++a) e1 += plan.probs[a] * norm2(plan.paths[a].at(1.0));
    for (int s = 0; s < 50; ++s, ++samples) {
      // |ε| < ΔT = 1/2
      std::vector<double> eps{0.35 * U(rng), 0.35 * U(rng)};
      const auto fz = freeze_pushforward(plan, eps);
      for (double t : prm.grid) o.require(plan.law_at(t) == fz.law_at(t), "marginal moved");
      for (const auto& xi : payoffs) {
        const double drift = std::abs(plan.expectation(xi) - fz.expectation(xi));
        const double bound = xi.modulus(norm2(eps)) * (1.0 + (m + 2.0) * e1);
        o.require(drift <= bound + 1e-12, "drift bound for " + xi.name);
        if (bound > 0.0) tightest = std::min(tightest, bound - drift);
      }
    }
  }
  o.note << samples << " samples, marginals identical, smallest slack " << tightest;
}

std::vector<double> random_support(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<double>(rng() % 17) * 0.25);
  return out;
}

DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t max_atoms) {
  std::uniform_real_distribution<double> w(0.1, 1.0);
  const auto xs = random_support(rng, 1 + rng() % max_atoms);
  std::vector<Point> pts;
  std::vector<double> ws;
  double total = 0.0;
  for (double x : xs) {
    pts.push_back({x});
    ws.push_back(w(rng));
    total += ws.back();
  }
  for (auto& v : ws) v /= total;
  return DiscreteMeasure::aggregate(1, pts, ws);
}

double naive_drift(const lattice::LatticeTree& t, const TreeMeasure& Q) {
  const auto mass = penalized::node_mass(t, Q);
  const auto leaves = t.leaves();
  double total = 0.0;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    if (Q.leaf_probs[l] == 0.0) continue;
    const auto chain = t.chain(leaves[l]);
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < chain.size(); ++j)
      for (std::size_t k = 0; k < t.dim(); ++k) {
        double mean = 0.0;
        for (auto c : t.node(chain[j]).children) mean += mass[c] / mass[chain[j]] * t.node(c).value[k];
        s += std::abs(t.node(chain[j]).value[k] - mean);
      }
    total += Q.leaf_probs[l] * s;
  }
  return total;
}

void oracles(Outcome& o) {
  std::mt19937_64 rng(1001);
  int agree = 0, holds = 0;
  for (int k = 0; k < 100;) {
    DiscreteMeasure mu = random_measure(rng, 3);
    DiscreteMeasure nu = fixtures::split(mu, rng);
    if (mu.size() + nu.size() > 8) continue;
    if (k % 2) std::swap(mu, nu);
    const bool call = measures::check_convex_order(mu, nu).holds();
    holds += call;
    agree += call == measures::strassen_feasible(mu, nu);
    ++k;
  }
  o.require(agree == 100, "call test disagrees with Strassen");
  o.require(holds > 0 && holds < 100, "pairs are one-sided");

  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const auto t = fixtures::random_tree(rng, 1 + k % 3, 0.0, 1 + static_cast<std::size_t>(k % 2));
    TreeMeasure Q;
    double s = 0.0;
    for (std::size_t l = 0; l < t.leaves().size(); ++l) {
      Q.leaf_probs.push_back(U(rng) < 0.2 ? 0.0 : U(rng));
      s += Q.leaf_probs.back();
    }
    if (s == 0.0) Q.leaf_probs[0] = s = 1.0;
    for (auto& v : Q.leaf_probs) v /= s;
    worst = std::max(worst, std::abs(penalized::expected_drift(t, Q) - naive_drift(t, Q)));
  }
  o.require(worst <= 1e-10, "drift identity");

  std::uniform_real_distribution<double> H(-2.0, 2.0);
  int same = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t d = 1 + static_cast<std::size_t>(k % 3);
    const auto w = pathspace::random_path(rng, Point(d, 1.0), 6, 3.0, 5);
    StepStrategy h;
    h.h0 = Point(d);
    for (auto& v : h.h0) v = H(rng);
    double t = 0.0;
    while ((t += std::ldexp(1.0 + static_cast<double>(rng() % 8), -4)) < 1.0) {
      h.times.push_back(t);
      Point v(d);
      for (auto& c : v) c = H(rng);
      h.values.push_back(v);
    }
    same += stochastic_integral_exact(h, w) == riemann_stieltjes_exact(h, w);
  }
  o.require(same == 1000, "by-parts form differs from the Riemann-Stieltjes sum");
  o.note << "call/Strassen agree " << agree << "/100; drift identity max diff " << worst << "; by-parts exact "
         << same << "/1000";
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<void(Outcome&)> run;
    double limit_s;
  };
  const std::vector<Criterion> all{
      {"finite strong duality", duality, 60},
      {"forced and marginal-only instances", forced_instances, 0},
      {"weak duality chain", weak_duality, 0},
      {"discretization rate", discretization, 120},
      {"tail hedge and truncation sandwich", tail, 0},
      {"penalized convergence", penalized_convergence, 0},
      {"stability", stability, 0},
      {"freeze transform", freeze, 0},
      {"oracle equivalences", oracles, 0},
  };
  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    Outcome o;
    o.note.precision(6);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      all[i].run(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (all[i].limit_s > 0) o.require(secs <= all[i].limit_s, "runtime over " + std::to_string(all[i].limit_s) + " s");
    failed += !o.pass;
    std::printf("%s %zu %s (%.1f s): %s%s%s\n", o.pass ? "PASS" : "FAIL", i + 1, all[i].name, secs, o.note.str().c_str(),
                o.pass ? "" : "; first failure: ", o.failure.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
