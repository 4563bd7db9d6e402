#include "motlab/transport.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace motlab::transport {

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);
constexpr double kDropMass = 1e-13;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

std::string point_str(const Point& x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < x.size(); ++k) os << (k ? "," : "") << x[k];
  os << ')';
  return os.str();
}

Rational dot_exact(const Point& a, const Point& b) {
  Rational s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += to_rational(a[k]) * to_rational(b[k]);
  return s;
}

lp::Sense lp_sense(Sense s) { return s == Sense::Max ? lp::Sense::Maximize : lp::Sense::Minimize; }

std::size_t index_of(const std::vector<Point>& atoms, const Point& x) {
  auto it = std::lower_bound(atoms.begin(), atoms.end(), x);
  return it != atoms.end() && *it == x ? static_cast<std::size_t>(it - atoms.begin()) : npos;
}

std::function<double(const Point&)> table_fn(std::vector<Point> atoms, std::vector<double> vals) {
  return [atoms = std::move(atoms), vals = std::move(vals)](const Point& x) {
    const auto k = index_of(atoms, x);
    return k == npos ? nan() : vals[k];
  };
}

void check_times(const Peacock& p, const std::vector<double>& grid) {
  if (p.times().size() != grid.size()) throw TransportError("peacock and grid have different sizes");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (std::abs(p.times()[i] - grid[i]) > 1e-15) throw TransportError("peacock times differ from the grid");
}

[[noreturn]] void throw_order_witness(const Peacock& p) {
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    auto c = measures::check_convex_order(p.law(i), p.law(i + 1));
    if (!c.holds())
      throw InfeasibleMarginals("marginals " + std::to_string(i) + "," + std::to_string(i + 1) +
                                    " are not in convex order: " + c.describe(),
                                c, std::nullopt);
  }
  throw InfeasibleMarginals("martingale transport LP infeasible although consecutive marginals are in convex order",
                            std::nullopt, std::nullopt);
}

double rs_double(const StepStrategy& H, const StepPath& w) {
  double s = 0.0, prev_t = 0.0;
  const Point* h = &H.h0;
  for (std::size_t k = 0; k < H.times.size() && H.times[k] < 1.0; ++k) {
    const Point& a = w.at(prev_t);
    const Point& b = w.at(H.times[k]);
    for (std::size_t c = 0; c < a.size(); ++c) s += (*h)[c] * (b[c] - a[c]);
    prev_t = H.times[k];
    h = &H.values[k];
  }
  const Point& a = w.at(prev_t);
  const Point& b = w.at(1.0);
  for (std::size_t c = 0; c < a.size(); ++c) s += (*h)[c] * (b[c] - a[c]);
  return s;
}

}  // namespace

std::string to_string(Sense s) { return s == Sense::Max ? "max" : "min"; }

std::string to_string(MarginalMode m) {
  switch (m) {
    case MarginalMode::Exact: return "exact";
    case MarginalMode::Penalized: return "penalized";
    case MarginalMode::Free: return "free";
  }
  return "?";
}

// ---------------------------------------------------------------- plans

double TransportPlan::expectation(const Payoff& xi) const {
  double s = 0.0;
  for (std::size_t k = 0; k < paths.size(); ++k) s += probs[k] * xi(paths[k]);
  return s;
}

DiscreteMeasure TransportPlan::law_at(double t) const {
  if (paths.empty()) throw TransportError("empty plan");
  std::vector<Point> pts;
  std::vector<double> w;
  double total = 0.0;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    pts.push_back(paths[k].at(t));
    w.push_back(probs[k]);
    total += probs[k];
  }
  for (double& x : w) x /= total;
  return DiscreteMeasure::aggregate(paths[0].dim(), std::move(pts), std::move(w));
}

StepPath tuple_path(const std::vector<double>& grid, const std::vector<Point>& values) {
  if (values.size() != grid.size() || values.empty()) throw TransportError("tuple length differs from the grid");
  std::vector<pathspace::Jump> jumps;
  for (std::size_t i = 1; i < grid.size(); ++i) jumps.push_back({grid[i], values[i]});
  return StepPath(values[0], std::move(jumps));
}

double martingale_residual(const TransportPlan& plan) {
  std::vector<double> times(plan.grid.begin(), plan.grid.end());
  times.push_back(0.0);
  for (const auto& w : plan.paths)
    for (const auto& j : w.jumps()) times.push_back(j.t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  while (!times.empty() && times.back() > 1.0) times.pop_back();

  const std::size_t N = plan.paths.size();
  std::vector<std::size_t> group(N, 0);
  double total = 0.0;
  for (std::size_t s = 0; s < times.size(); ++s) {
    std::map<std::pair<std::size_t, Point>, std::size_t> ids;
    for (std::size_t k = 0; k < N; ++k) {
      auto key = std::make_pair(group[k], plan.paths[k].at(times[s]));
      auto [it, fresh] = ids.emplace(std::move(key), ids.size());
      group[k] = it->second;
    }
    if (s + 1 == times.size()) break;
    std::vector<Point> drift(ids.size(), Point(N ? plan.paths[0].dim() : 0, 0.0));
    for (std::size_t k = 0; k < N; ++k) {
      const Point& a = plan.paths[k].at(times[s]);
      const Point& b = plan.paths[k].at(times[s + 1]);
      for (std::size_t c = 0; c < a.size(); ++c) drift[group[k]][c] += plan.probs[k] * (b[c] - a[c]);
    }
    for (const auto& d : drift) total += norm1(d);
  }
  return total;
}

PlanCheck check_plan(const TransportPlan& plan, const Peacock& p, double radius) {
  PlanCheck c;
  double mass = 0.0;
  for (double q : plan.probs) mass += q;
  c.mass_error = std::abs(mass - 1.0);
  c.martingale = martingale_residual(plan);
  for (std::size_t i = 0; i < p.size(); ++i)
    c.marginal = std::max(c.marginal, measures::w1_distance(plan.law_at(p.times()[i]), p.law(i)));
  c.ok = c.mass_error <= tol::kResidual && c.martingale <= tol::kResidual && c.marginal <= radius + tol::kResidual;
  return c;
}

// ---------------------------------------------------------------- integrals

const Point& StepStrategy::at(double t) const {
  const auto k = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
  return k == 0 ? h0 : values[k - 1];
}

Rational stochastic_integral_exact(const StepStrategy& H, const StepPath& w) {
  Rational s = dot_exact(H.at(1.0), w.at(1.0)) - dot_exact(H.h0, w.at(0.0));
  const Point* prev = &H.h0;
  for (std::size_t k = 0; k < H.times.size() && H.times[k] < 1.0; ++k) {
    const Point& x = w.at(H.times[k]);
    for (std::size_t c = 0; c < x.size(); ++c)
      s -= to_rational(x[c]) * (to_rational(H.values[k][c]) - to_rational((*prev)[c]));
    prev = &H.values[k];
  }
  return s;
}

Rational riemann_stieltjes_exact(const StepStrategy& H, const StepPath& w) {
  Rational s = 0;
  double prev_t = 0.0;
  const Point* h = &H.h0;
  auto add = [&](double u) {
    const Point& a = w.at(prev_t);
    const Point& b = w.at(u);
    for (std::size_t c = 0; c < a.size(); ++c) s += to_rational((*h)[c]) * (to_rational(b[c]) - to_rational(a[c]));
  };
  for (std::size_t k = 0; k < H.times.size() && H.times[k] < 1.0; ++k) {
    add(H.times[k]);
    prev_t = H.times[k];
    h = &H.values[k];
  }
  add(1.0);
  return s;
}

double stochastic_integral(const StepStrategy& H, const StepPath& w) {
  return to_double(stochastic_integral_exact(H, w));
}

// ---------------------------------------------------------------- certificates

double DualCertificate::cost(const Peacock& p) const {
  check_times(p, grid);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!lambda[i]) continue;
    const auto& mu = p.law(i);
    for (std::size_t a = 0; a < mu.size(); ++a) s += mu.weight(a) * lambda[i](mu.point(a));
  }
  return s;
}

std::optional<double> DualCertificate::hedge_value(const StepPath& w) const {
  double s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!lambda[i]) continue;
    const double v = lambda[i](w.at(grid[i]));
    if (std::isnan(v)) return std::nullopt;
    s += v;
  }
  if (strategy) {
    auto H = strategy(w);
    if (!H) return std::nullopt;
    s += rs_double(*H, w);
  }
  return s;
}

std::optional<double> DualCertificate::residual(const StepPath& w, const Payoff& xi) const {
  auto v = hedge_value(w);
  if (!v) return std::nullopt;
  const double r = *v - xi(w);
  return sense == Sense::Max ? r : -r;
}

VerifyReport verify_superhedge(const DualCertificate& cert, const Payoff& xi, const std::vector<StepPath>& paths,
                               double tol) {
  VerifyReport rep;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    auto r = cert.residual(paths[k], xi);
    if (!r) {
      ++rep.uncovered;
      continue;
    }
    ++rep.checked;
    if (*r < rep.min_residual) {
      rep.min_residual = *r;
      rep.argmin = k;
    }
  }
  if (rep.checked) rep.worst = paths[rep.argmin];
  rep.passed = rep.checked > 0 && rep.min_residual >= -tol;
  return rep;
}

std::vector<StepPath> adversarial_paths(const DualCertificate& cert, const Payoff& xi,
                                        const std::vector<StepPath>& starts, std::size_t restarts,
                                        std::uint64_t seed, std::size_t steps) {
  std::vector<StepPath> out;
  if (starts.empty()) return out;
  const auto& grid = cert.grid;
  auto score = [&](const StepPath& w) {
    auto r = cert.residual(w, xi);
    return r ? *r : kInf;
  };
  // First grid index covered by the segment [a, b).
  auto covered = [&](double a, double b) -> std::size_t {
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (grid[i] >= a && (grid[i] < b || (b >= 1.0 && grid[i] == 1.0))) return i;
    return npos;
  };
  for (std::size_t r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + r);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    StepPath w = starts[r % starts.size()];
    double best = score(w);
    double scale = std::max(1.0, w.sup_norm());
    const std::size_t d = w.dim();
    auto pick_value = [&](std::size_t gi, const Point& near) {
      if (gi != npos && gi < cert.domains.size() && !cert.domains[gi].empty()) {
        const auto& dom = cert.domains[gi];
        return dom[static_cast<std::size_t>(U(rng) * dom.size()) % dom.size()];
      }
      Point v = near;
      const std::size_t c = static_cast<std::size_t>(U(rng) * d) % d;
      v[c] = std::max(0.0, v[c] + (U(rng) - 0.5) * scale * std::ldexp(1.0, -static_cast<int>(U(rng) * 6)));
      return v;
    };
    for (std::size_t s = 0; s < steps; ++s) {
      auto jumps = w.jumps();
      Point init = w.initial();
      const int op = static_cast<int>(U(rng) * 4);
      const std::size_t K = jumps.size();
      auto seg_end = [&](std::size_t k) { return k < K ? jumps[k].t : 2.0; };
      if (op == 0 && K) {
        const std::size_t k = static_cast<std::size_t>(U(rng) * K) % K;
        const double step = std::ldexp(U(rng) < 0.5 ? -1.0 : 1.0, -(3 + static_cast<int>(U(rng) * 10)));
        const double t = jumps[k].t + step;
        const double lo = k ? jumps[k - 1].t : 0.0;
        const bool last = k + 1 == K;
        if (!(t > lo && t <= 1.0 && (last || t < jumps[k + 1].t))) continue;
        jumps[k].t = t;
      } else if (op == 1) {
        const std::size_t k = static_cast<std::size_t>(U(rng) * (K + 1)) % (K + 1);
        const double a = k == 0 ? 0.0 : jumps[k - 1].t;
        Point& v = k == 0 ? init : jumps[k - 1].value;
        v = pick_value(covered(a, seg_end(k)), v);
      } else if (op == 2 && K) {
        jumps.erase(jumps.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(U(rng) * K) % K));
      } else if (op == 3) {
        const double t = std::ldexp(std::floor(U(rng) * 4096.0) + 1.0, -12);
        auto it = std::lower_bound(jumps.begin(), jumps.end(), t, [](const pathspace::Jump& j, double x) {
          return j.t < x;
        });
        if (it != jumps.end() && it->t == t) continue;
        const double end = it == jumps.end() ? 2.0 : it->t;
        Point v = pick_value(covered(t, end), w.at(t));
        jumps.insert(it, {t, std::move(v)});
      } else {
        continue;
      }
      StepPath cand(init, std::move(jumps));
      const double f = score(cand);
      if (f < best) {
        best = f;
        w = std::move(cand);
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------- marginal LP

PrimalResult solve_primal_marginal(const Peacock& p, const Payoff& xi, Sense sense, const MarginalOptions& opts) {
  const std::size_t T = p.size();
  const std::size_t d = p.dim();
  const auto& grid = p.times();
  std::vector<bool> con = opts.constrained;
  if (con.empty()) con.assign(T, true);
  if (con.size() != T) throw TransportError("constrained mask has wrong length");

  PrimalResult r;
  r.sense = sense;
  r.peacock = p;
  r.lp = lp::LinearProgram(lp_sense(sense));
  for (std::size_t i = 0; i < T; ++i) r.atoms.push_back(p.law(i).points());

  std::vector<std::size_t> radix(T);
  std::size_t N = 1;
  for (std::size_t i = 0; i < T; ++i) {
    radix[i] = p.law(i).size();
    if (N > (std::size_t{1} << 22) / radix[i]) throw TransportError("tuple space too large");
    N *= radix[i];
  }
  std::vector<std::vector<std::size_t>> tuples(N, std::vector<std::size_t>(T));
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t q = n;
    for (std::size_t i = T; i-- > 0;) {
      tuples[n][i] = q % radix[i];
      q /= radix[i];
    }
  }
  auto value = [&](std::size_t n, std::size_t i) -> const Point& { return r.atoms[i][tuples[n][i]]; };
  auto values = [&](std::size_t n) {
    std::vector<Point> v;
    for (std::size_t i = 0; i < T; ++i) v.push_back(value(n, i));
    return v;
  };

  std::vector<StepPath> paths;
  paths.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    paths.push_back(tuple_path(grid, values(n)));
    r.lp.add_variable("p" + std::to_string(n));
    r.lp.set_objective(n, xi(paths.back()));
  }

  r.marginal_rows.assign(T, {});
  bool any = false;
  for (std::size_t i = 0; i < T; ++i) {
    r.marginal_rows[i].assign(radix[i], npos);
    if (!con[i]) continue;
    any = true;
    std::vector<std::vector<lp::Term>> terms(radix[i]);
    for (std::size_t n = 0; n < N; ++n) terms[tuples[n][i]].push_back({n, 1.0});
    for (std::size_t a = 0; a < radix[i]; ++a)
      r.marginal_rows[i][a] = r.lp.add_constraint("mu" + std::to_string(i) + "_" + std::to_string(a),
                                                  std::move(terms[a]), lp::Relation::Equal, p.law(i).weight(a));
  }
  if (!any) {
    std::vector<lp::Term> terms;
    for (std::size_t n = 0; n < N; ++n) terms.push_back({n, 1.0});
    r.mass_row = r.lp.add_constraint("mass", std::move(terms), lp::Relation::Equal, 1.0);
  }

  // Prefix rows: tuples sharing (x_0..x_i) are contiguous in mixed-radix order.
  for (std::size_t i = 0; i + 1 < T; ++i) {
    std::size_t block = 1;
    for (std::size_t l = i + 1; l < T; ++l) block *= radix[l];
    for (std::size_t start = 0; start < N; start += block) {
      std::vector<Point> prefix;
      for (std::size_t l = 0; l <= i; ++l) prefix.push_back(value(start, l));
      std::vector<std::size_t> rows(d, npos);
      for (std::size_t k = 0; k < d; ++k) {
        std::vector<lp::Term> terms;
        for (std::size_t n = start; n < start + block; ++n) {
          const double c = value(n, i + 1)[k] - value(n, i)[k];
          if (c != 0.0) terms.push_back({n, c});
        }
        if (terms.empty()) continue;
        rows[k] = r.lp.add_constraint("mart" + std::to_string(i) + "_" + std::to_string(start) + "_" +
                                          std::to_string(k),
                                      std::move(terms), lp::Relation::Equal, 0.0);
      }
      r.prefix_rows.emplace(std::move(prefix), std::move(rows));
    }
  }

  lp::SolverOptions so;
  so.arithmetic = opts.arithmetic;
  so.pivot = opts.pivot;
  r.solution = lp::solve(r.lp, so);
  if (r.solution.status == lp::Status::Infeasible) throw_order_witness(p);
  if (r.solution.status != lp::Status::Optimal) throw TransportError("marginal LP is unbounded");
  r.value = r.solution.objective;
  if (r.solution.exact) r.exact_value = r.solution.exact->objective;

  r.plan.grid = grid;
  for (std::size_t n = 0; n < N; ++n) {
    if (r.solution.primal[n] <= kDropMass) continue;
    r.plan.paths.push_back(paths[n]);
    r.plan.probs.push_back(r.solution.primal[n]);
  }
  return r;
}

Rational dual_cost_exact(const PrimalResult& r) {
  if (!r.solution.exact) throw TransportError("no exact solution recorded");
  Rational s = 0;
  for (std::size_t i = 0; i < r.lp.num_constraints(); ++i)
    s += to_rational(r.lp.constraint(i).rhs) * r.solution.exact->dual[i];
  return s;
}

// ---------------------------------------------------------------- lattice LP

DiscreteMeasure project_measure(const DiscreteMeasure& mu, int n) {
  std::vector<Point> pts;
  for (const auto& x : mu.points()) pts.push_back(lattice::grid_project(x, n));
  return DiscreteMeasure::aggregate(mu.dim(), std::move(pts), mu.weights());
}

PrimalResult solve_primal_lattice(const Peacock& p, const Payoff& xi, std::shared_ptr<const lattice::LatticeTree> tree,
                                  Sense sense, const LatticeOptions& opts) {
  if (!tree || tree->size() == 0) throw TransportError("empty tree");
  const auto& grid = tree->grid();
  check_times(p, grid);
  if (p.dim() != tree->dim()) throw TransportError("peacock and tree dimensions differ");
  if (opts.mode == MarginalMode::Penalized && !(opts.penalty >= 0.0)) throw TransportError("penalty must be >= 0");
  const std::size_t T = grid.size();
  const std::size_t d = p.dim();

  std::vector<DiscreteMeasure> laws;
  for (std::size_t i = 0; i < T; ++i)
    laws.push_back(tree->enumerated ? project_measure(p.law(i), tree->params.n) : p.law(i));

  PrimalResult r;
  r.sense = sense;
  r.lattice = true;
  r.mode = opts.mode;
  r.penalty = opts.penalty;
  r.tree = tree;
  try {
    r.peacock = Peacock(grid, laws);
  } catch (const measures::PeacockError&) {
    r.peacock = p;  // projection broke the order; exact mode will report infeasibility
  }
  r.lp = lp::LinearProgram(lp_sense(sense));

  const auto leaves = tree->leaves();
  const std::size_t L = leaves.size();
  std::vector<StepPath> paths;
  for (std::size_t l = 0; l < L; ++l) {
    paths.push_back(tree->path_to(leaves[l]));
    r.lp.add_variable("q" + std::to_string(leaves[l]));
    r.lp.set_objective(l, xi(paths.back()));
  }

  // Tree atoms at each t_i and the leaves reaching them.
  r.atoms.assign(T, {});
  std::vector<std::vector<std::size_t>> atom_of(T, std::vector<std::size_t>(L));
  for (std::size_t i = 0; i < T; ++i) {
    for (const auto& w : paths) r.atoms[i].push_back(w.at(grid[i]));
    std::sort(r.atoms[i].begin(), r.atoms[i].end());
    r.atoms[i].erase(std::unique(r.atoms[i].begin(), r.atoms[i].end()), r.atoms[i].end());
    for (std::size_t l = 0; l < L; ++l) atom_of[i][l] = index_of(r.atoms[i], paths[l].at(grid[i]));
  }

  r.marginal_rows.assign(T, {});
  r.target_atoms.assign(T, {});
  r.target_rows.assign(T, {});
  auto exact_infeasible = [&](const std::string& why) {
    LatticeOptions relax = opts;
    relax.mode = MarginalMode::Penalized;
    relax.penalty = 1.0;
    const auto zero = pathspace::constant(grid, 0.0);
    const double rel = -solve_primal_lattice(p, zero, tree, Sense::Max, relax).value;
    std::ostringstream os;
    os << "exact marginals infeasible on the lattice (" << why
       << "); use penalized mode; minimal relaxation sum_i W1 = " << rel;
    throw InfeasibleMarginals(os.str(), std::nullopt, rel);
  };

  if (opts.mode == MarginalMode::Exact) {
    if (laws[0].size() != 1 || laws[0].point(0) != tree->node(tree->root()).value)
      exact_infeasible("initial law is not the root Dirac");
    for (std::size_t i = 1; i < T; ++i) {
      const auto& mu = laws[i];
      std::vector<double> rhs(r.atoms[i].size(), 0.0);
      for (std::size_t b = 0; b < mu.size(); ++b) {
        const auto a = index_of(r.atoms[i], mu.point(b));
        if (a == npos) exact_infeasible("atom " + point_str(mu.point(b)) + " at t_" + std::to_string(i) + " is off the tree");
        rhs[a] = mu.weight(b);
      }
      std::vector<std::vector<lp::Term>> terms(r.atoms[i].size());
      for (std::size_t l = 0; l < L; ++l) terms[atom_of[i][l]].push_back({l, 1.0});
      r.marginal_rows[i].assign(r.atoms[i].size(), npos);
      for (std::size_t a = 0; a < r.atoms[i].size(); ++a)
        r.marginal_rows[i][a] = r.lp.add_constraint("mu" + std::to_string(i) + "_" + std::to_string(a),
                                                    std::move(terms[a]), lp::Relation::Equal, rhs[a]);
    }
    if (T == 1) {
      std::vector<lp::Term> terms;
      for (std::size_t l = 0; l < L; ++l) terms.push_back({l, 1.0});
      r.mass_row = r.lp.add_constraint("mass", std::move(terms), lp::Relation::Equal, 1.0);
    }
  } else if (opts.mode == MarginalMode::Penalized) {
    const double c = opts.penalty;
    const double s = sense == Sense::Max ? -1.0 : 1.0;
    for (std::size_t i = 0; i < T; ++i) {
      const auto& A = r.atoms[i];
      r.target_atoms[i] = laws[i].points();
      const auto& B = r.target_atoms[i];
      std::vector<std::vector<lp::Term>> law_terms(A.size()), tgt_terms(B.size());
      for (std::size_t l = 0; l < L; ++l) law_terms[atom_of[i][l]].push_back({l, 1.0});
      for (std::size_t a = 0; a < A.size(); ++a)
        for (std::size_t b = 0; b < B.size(); ++b) {
          const auto g = r.lp.add_variable("g" + std::to_string(i) + "_" + std::to_string(a) + "_" + std::to_string(b));
          r.lp.set_objective(g, s * c * dist2(A[a], B[b]));
          law_terms[a].push_back({g, -1.0});
          tgt_terms[b].push_back({g, 1.0});
        }
      r.marginal_rows[i].assign(A.size(), npos);
      for (std::size_t a = 0; a < A.size(); ++a)
        r.marginal_rows[i][a] = r.lp.add_constraint("law" + std::to_string(i) + "_" + std::to_string(a),
                                                    std::move(law_terms[a]), lp::Relation::Equal, 0.0);
      r.target_rows[i].assign(B.size(), npos);
      for (std::size_t b = 0; b < B.size(); ++b)
        r.target_rows[i][b] = r.lp.add_constraint("tgt" + std::to_string(i) + "_" + std::to_string(b),
                                                  std::move(tgt_terms[b]), lp::Relation::Equal, laws[i].weight(b));
    }
  } else {
    std::vector<lp::Term> terms;
    for (std::size_t l = 0; l < L; ++l) terms.push_back({l, 1.0});
    r.mass_row = r.lp.add_constraint("mass", std::move(terms), lp::Relation::Equal, 1.0);
  }

  // Martingale rows per internal node: Σ_{leaves below v} q_l (x_{child} - x_v) = 0.
  std::map<std::size_t, std::vector<std::vector<lp::Term>>> node_terms;
  for (std::size_t l = 0; l < L; ++l) {
    const auto chain = tree->chain(leaves[l]);
    for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
      const auto& xv = tree->node(chain[k]).value;
      const auto& xc = tree->node(chain[k + 1]).value;
      auto& rows = node_terms[chain[k]];
      if (rows.empty()) rows.resize(d);
      for (std::size_t c = 0; c < d; ++c)
        if (xc[c] != xv[c]) rows[c].push_back({l, xc[c] - xv[c]});
    }
  }
  for (auto& [v, rows] : node_terms) {
    std::vector<std::size_t> ids(d, npos);
    for (std::size_t c = 0; c < d; ++c)
      if (!rows[c].empty())
        ids[c] = r.lp.add_constraint("node" + std::to_string(v) + "_" + std::to_string(c), std::move(rows[c]),
                                     lp::Relation::Equal, 0.0);
    r.node_rows.emplace(v, std::move(ids));
  }

  lp::SolverOptions so;
  so.arithmetic = opts.arithmetic;
  so.pivot = opts.pivot;
  r.solution = lp::solve(r.lp, so);
  if (r.solution.status == lp::Status::Infeasible) {
    if (opts.mode == MarginalMode::Exact) exact_infeasible("no martingale tree measure matches the projected marginals");
    throw TransportError("no martingale measure on tree");
  }
  if (r.solution.status != lp::Status::Optimal) throw TransportError("lattice LP is unbounded");
  r.value = r.solution.objective;
  if (r.solution.exact) r.exact_value = r.solution.exact->objective;

  r.plan.grid = grid;
  for (std::size_t l = 0; l < L; ++l) {
    if (r.solution.primal[l] <= kDropMass) continue;
    r.plan.paths.push_back(paths[l]);
    r.plan.probs.push_back(r.solution.primal[l]);
  }
  return r;
}

// ---------------------------------------------------------------- duals

namespace {

std::optional<StepStrategy> walk_tree(const lattice::LatticeTree& tree, const std::map<std::size_t, Point>& H,
                                      const StepPath& w, std::size_t dim) {
  std::size_t v = tree.root();
  if (w.at(0.0) != tree.node(v).value) return std::nullopt;
  auto h_of = [&](std::size_t node) {
    auto it = H.find(node);
    return it == H.end() ? Point(dim, 0.0) : it->second;
  };
  StepStrategy s;
  s.h0 = h_of(v);
  while (!tree.is_leaf(v)) {
    const auto& ch = tree.node(v).children;
    const double t = tree.node(ch[0]).time;
    std::size_t next = npos;
    for (auto c : ch) {
      if (tree.node(c).time != t) return std::nullopt;
      if (tree.node(c).value == w.at(t)) next = c;
    }
    if (next == npos) return std::nullopt;
    v = next;
    if (!tree.is_leaf(v)) {
      s.times.push_back(t);
      s.values.push_back(h_of(v));
    }
  }
  return s;
}

}  // namespace

DualCertificate extract_dual_d1(const PrimalResult& r) {
  if (r.solution.status != lp::Status::Optimal || r.solution.dual.size() != r.lp.num_constraints())
    throw TransportError("extract_dual_d1 needs an optimal LP solution with duals");
  const auto& y = r.solution.dual;
  const auto& grid = r.peacock.times();
  const std::size_t T = grid.size();
  const std::size_t d = r.peacock.dim();
  const double y0 = r.mass_row == npos ? 0.0 : y[r.mass_row];

  DualCertificate c;
  c.grid = grid;
  c.sense = r.sense;
  c.dim = d;
  c.lambda.resize(T);
  c.lambda_tables.resize(T);
  c.domains.resize(T);

  if (r.lattice && r.mode == MarginalMode::Penalized) {
    c.label = "d1-lattice-penalized";
    const double pen = r.penalty;
    const double s = r.sense == Sense::Max ? 1.0 : -1.0;
    for (std::size_t i = 0; i < T; ++i) {
      std::vector<Point> B = r.target_atoms[i];
      std::vector<double> v;
      for (std::size_t b = 0; b < B.size(); ++b) v.push_back(y[r.target_rows[i][b]]);
      const double shift = i == 0 ? y0 : 0.0;
      // c-Lipschitz envelope of the target-row duals: dominates the law-row duals on tree atoms.
      c.lambda[i] = [B, v, pen, s, shift](const Point& x) {
        double best = kInf;
        for (std::size_t b = 0; b < B.size(); ++b) best = std::min(best, s * v[b] + pen * dist2(x, B[b]));
        return s * best + shift;
      };
      for (std::size_t b = 0; b < B.size(); ++b) c.lambda_tables[i].push_back({B[b], c.lambda[i](B[b])});
    }
  } else {
    c.label = r.lattice ? (r.mode == MarginalMode::Free ? "d1-lattice-free" : "d1-lattice-exact") : "d1-marginal";
    for (std::size_t i = 0; i < T; ++i) {
      const auto& A = r.atoms[i];
      c.domains[i] = A;
      const bool has_rows = !r.marginal_rows[i].empty() && r.marginal_rows[i][0] != npos;
      std::vector<double> vals(A.size(), 0.0);
      for (std::size_t a = 0; a < A.size(); ++a) {
        if (has_rows) vals[a] = y[r.marginal_rows[i][a]];
        if (i == 0) vals[a] += y0;
        c.lambda_tables[i].push_back({A[a], vals[a]});
      }
      c.lambda[i] = table_fn(A, std::move(vals));
    }
  }

  if (!r.lattice) {
    std::map<std::vector<Point>, Point> H;
    for (const auto& [prefix, rows] : r.prefix_rows) {
      Point h(d, 0.0);
      for (std::size_t k = 0; k < d; ++k)
        if (rows[k] != npos) h[k] = y[rows[k]];
      std::string key;
      for (const auto& x : prefix) key += point_str(x);
      c.node_multipliers.push_back({key, h});
      H.emplace(prefix, std::move(h));
    }
    c.strategy = [H = std::move(H), grid](const StepPath& w) -> std::optional<StepStrategy> {
      std::vector<Point> prefix;
      StepStrategy s;
      for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        prefix.push_back(w.at(grid[i]));
        auto it = H.find(prefix);
        if (it == H.end()) return std::nullopt;
        if (i == 0) {
          s.h0 = it->second;
        } else {
          s.times.push_back(grid[i]);
          s.values.push_back(it->second);
        }
      }
      if (grid.size() == 1) s.h0 = Point(w.dim(), 0.0);
      return s;
    };
  } else {
    std::map<std::size_t, Point> H;
    for (const auto& [v, rows] : r.node_rows) {
      Point h(d, 0.0);
      for (std::size_t k = 0; k < d; ++k)
        if (rows[k] != npos) h[k] = y[rows[k]];
      c.node_multipliers.push_back({std::to_string(v), h});
      H.emplace(v, std::move(h));
    }
    c.strategy = [tree = r.tree, H = std::move(H), d](const StepPath& w) { return walk_tree(*tree, H, w, d); };
  }
  return c;
}

// ---------------------------------------------------------------- tree DP

TreeDP tree_superhedge_dp(const lattice::LatticeTree& tree, const Payoff& zeta) {
  const std::size_t N = tree.size();
  if (N == 0) throw TransportError("empty tree");
  const double ninf = -kInf;
  TreeDP out;
  out.V.assign(N, ninf);
  out.q.assign(N, {});
  for (std::size_t v = N; v-- > 0;) {
    const auto& node = tree.node(v);
    if (node.children.empty()) {
      out.V[v] = zeta(tree.path_to(v));
      if (!std::isfinite(out.V[v])) throw TransportError("payoff is not finite on a tree leaf");
      continue;
    }
    const auto& ch = node.children;
    out.q[v].assign(ch.size(), 0.0);
    std::vector<std::size_t> live;
    for (std::size_t k = 0; k < ch.size(); ++k)
      if (out.V[ch[k]] > ninf) live.push_back(k);
    if (live.empty()) continue;
    lp::LinearProgram prog(lp::Sense::Maximize);
    std::vector<lp::Term> mass;
    for (std::size_t k : live) {
      const auto j = prog.add_variable("q" + std::to_string(ch[k]));
      prog.set_objective(j, out.V[ch[k]]);
      mass.push_back({j, 1.0});
    }
    prog.add_constraint("mass", mass, lp::Relation::Equal, 1.0);
    for (std::size_t c = 0; c < node.value.size(); ++c) {
      std::vector<lp::Term> terms;
      for (std::size_t j = 0; j < live.size(); ++j) {
        const double delta = tree.node(ch[live[j]]).value[c] - node.value[c];
        if (delta != 0.0) terms.push_back({j, delta});
      }
      prog.add_constraint("mart" + std::to_string(c), std::move(terms), lp::Relation::Equal, 0.0);
    }
    const auto sol = lp::solve(prog);
    if (sol.status != lp::Status::Optimal) continue;
    out.V[v] = sol.objective;
    for (std::size_t j = 0; j < live.size(); ++j) out.q[v][live[j]] = sol.primal[j];
  }
  if (!(out.V[tree.root()] > ninf)) throw TransportError("no martingale measure on tree");
  out.V0 = out.V[tree.root()];
  return out;
}

TransportPlan tree_plan(const lattice::LatticeTree& tree, const TreeMeasure& q) {
  const auto leaves = tree.leaves();
  if (q.leaf_probs.size() != leaves.size()) throw TransportError("tree measure has wrong size");
  TransportPlan plan;
  plan.grid = tree.grid();
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    if (q.leaf_probs[l] <= 0.0) continue;
    plan.paths.push_back(tree.path_to(leaves[l]));
    plan.probs.push_back(q.leaf_probs[l]);
  }
  return plan;
}

TreeMeasure compose_transitions(const lattice::LatticeTree& tree, const std::vector<std::vector<double>>& q) {
  std::vector<double> mass(tree.size(), 0.0);
  mass[tree.root()] = 1.0;
  for (std::size_t v = 0; v < tree.size(); ++v) {
    const auto& ch = tree.node(v).children;
    for (std::size_t k = 0; k < ch.size(); ++k) mass[ch[k]] += mass[v] * q.at(v).at(k);
  }
  TreeMeasure m;
  for (auto l : tree.leaves()) m.leaf_probs.push_back(mass[l]);
  return m;
}

// ---------------------------------------------------------------- tail hedge

namespace {

/// First time coordinate i reaches R, or nullopt.
std::optional<double> first_hit(const StepPath& w, double R, std::size_t i) {
  if (w.initial()[i] >= R) return 0.0;
  for (const auto& j : w.jumps())
    if (j.value[i] >= R) return j.t;
  return std::nullopt;
}

}  // namespace

DualCertificate bhr_tail_hedge(const std::vector<double>& grid, std::size_t dim, double R, double K, std::size_t i) {
  if (!(K > 0.0 && K < R)) throw TransportError("bhr_tail_hedge needs 0 < K < R");
  if (i >= dim) throw TransportError("coordinate out of range");
  DualCertificate c;
  c.label = "bhr";
  c.grid = grid;
  c.dim = dim;
  c.lambda.resize(grid.size());
  c.lambda_tables.resize(grid.size());
  c.domains.resize(grid.size());
  c.lambda.back() = [=](const Point& x) { return positive_part(x[i] - K) / (R - K); };
  c.strategy = [=](const StepPath& w) -> std::optional<StepStrategy> {
    StepStrategy s{Point(dim, 0.0), {}, {}};
    if (auto sigma = first_hit(w, R, i); sigma && *sigma < 1.0) {
      Point h(dim, 0.0);
      h[i] = -1.0 / (R - K);
      s.times.push_back(*sigma);
      s.values.push_back(std::move(h));
    }
    return s;
  };
  return c;
}

Payoff coordinate_tail(const std::vector<double>& grid, double R, std::size_t i) {
  auto p = pathspace::custom(
      grid, [R, i](const StepPath& w) { return first_hit(w, R, i) ? 1.0 : 0.0; },
      "tail" + std::to_string(i), true);
  p.shift_slope = 0.0;
  return p;
}

Rational bhr_residual_exact(double R, double K, std::size_t i, const StepPath& w) {
  const Rational r = to_rational(R), k = to_rational(K);
  const Rational x1 = to_rational(w.at(1.0)[i]);
  Rational res = x1 > k ? Rational((x1 - k) / (r - k)) : Rational(0);
  if (auto sigma = first_hit(w, R, i)) {
    res -= 1;
    if (*sigma < 1.0) res += (to_rational(w.at(*sigma)[i]) - x1) / (r - k);
  }
  return res;
}

DualCertificate tail_hedge(const std::vector<double>& grid, std::size_t dim, double R) {
  if (!(R > 0.0)) throw TransportError("tail_hedge needs R > 0");
  const double level = R / static_cast<double>(dim);
  const double K = level / 2.0;
  DualCertificate c;
  c.label = "tail";
  c.grid = grid;
  c.dim = dim;
  c.lambda.resize(grid.size());
  c.lambda_tables.resize(grid.size());
  c.domains.resize(grid.size());
  c.lambda.back() = [=](const Point& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s += positive_part(x[i] - K) / (level - K);
    return s;
  };
  c.strategy = [=](const StepPath& w) -> std::optional<StepStrategy> {
    std::vector<std::pair<double, std::size_t>> hits;
    for (std::size_t i = 0; i < dim; ++i)
      if (auto s = first_hit(w, level, i); s && *s < 1.0) hits.push_back({*s, i});
    std::sort(hits.begin(), hits.end());
    StepStrategy s{Point(dim, 0.0), {}, {}};
    Point h(dim, 0.0);
    for (const auto& [t, i] : hits) {
      h[i] = -1.0 / (level - K);
      if (!s.times.empty() && s.times.back() == t) {
        s.values.back() = h;
      } else {
        s.times.push_back(t);
        s.values.push_back(h);
      }
    }
    return s;
  };
  return c;
}

double tail_hedge_bound(const Peacock& p, double R) {
  const double d = static_cast<double>(p.dim());
  const auto& mu = p.law(p.size() - 1);
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) s += mu.call(R / (2.0 * d), i);
  return 2.0 * d / R * s;
}

// ---------------------------------------------------------------- plans

TransportPlan construct_plan(const Peacock& p) {
  TransportPlan plan;
  plan.grid = p.times();
  const std::size_t T = p.size();
  bool dirac = true;
  for (const auto& mu : p.laws()) dirac = dirac && mu.size() == 1;
  if (dirac) {
    std::vector<Point> v;
    for (const auto& mu : p.laws()) v.push_back(mu.point(0));
    plan.paths.push_back(tuple_path(plan.grid, v));
    plan.probs.push_back(1.0);
    return plan;
  }
  std::vector<std::vector<std::vector<double>>> pi;
  for (std::size_t i = 0; i + 1 < T; ++i) {
    auto s = measures::strassen_coupling(p.law(i), p.law(i + 1));
    if (!s.feasible)
      throw TransportError("no martingale coupling between marginals " + std::to_string(i) + " and " +
                           std::to_string(i + 1));
    pi.push_back(std::move(s.coupling));
  }
  std::vector<std::size_t> idx;
  std::vector<Point> vals;
  auto rec = [&](auto&& self, std::size_t i, double w) -> void {
    if (i + 1 == T) {
      plan.paths.push_back(tuple_path(plan.grid, vals));
      plan.probs.push_back(w);
      return;
    }
    const auto a = idx.back();
    const auto& mu = p.law(i);
    for (std::size_t b = 0; b < p.law(i + 1).size(); ++b) {
      const double q = pi[i][a][b];
      if (q <= kDropMass) continue;
      idx.push_back(b);
      vals.push_back(p.law(i + 1).point(b));
      self(self, i + 1, w * q / mu.weight(a));
      idx.pop_back();
      vals.pop_back();
    }
  };
  for (std::size_t a = 0; a < p.law(0).size(); ++a) {
    idx.assign(1, a);
    vals.assign(1, p.law(0).point(a));
    rec(rec, 0, p.law(0).weight(a));
  }
  return plan;
}

PriceInterval price_interval(const Peacock& p, const Payoff& xi, const SolverConfig& cfg) {
  PriceInterval out;
  auto run = [&](Sense s) {
    return cfg.lattice ? solve_primal_lattice(p, xi, cfg.tree, s, cfg.lattice_opts)
                       : solve_primal_marginal(p, xi, s, cfg.marginal);
  };
  out.upper_result = run(Sense::Max);
  out.lower_result = run(Sense::Min);
  out.upper = out.upper_result.value;
  out.lower = out.lower_result.value;
  out.upper_cert = extract_dual_d1(out.upper_result);
  out.lower_cert = extract_dual_d1(out.lower_result);
  if (cfg.lattice && cfg.lattice_opts.mode == MarginalMode::Penalized) out.radius = kInf;
  return out;
}

unsigned worker_count() {
  if (const char* env = std::getenv("MOTLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

StabilityTable stability_sweep(const Peacock& p, const Payoff& xi, const std::vector<double>& radii,
                               const std::vector<std::uint64_t>& seeds, const SolverConfig& cfg) {
  StabilityTable tab;
  const auto base = price_interval(p, xi, cfg);
  tab.base_lower = base.lower;
  tab.base_upper = base.upper;
  for (double r : radii)
    for (auto s : seeds) tab.rows.push_back({r, s, "", 0.0, 0.0, 0.0, 0.0});

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(tab.rows.size());
  auto work = [&] {
    for (std::size_t k; (k = next++) < tab.rows.size();) {
      auto& row = tab.rows[k];
      try {
        const auto pert = measures::perturb_peacock(p, row.radius, row.seed);
        row.status = measures::to_string(pert.status);
        if (!pert.peacock) continue;
        row.w1 = pert.w1;
        if (row.radius == 0.0) {
          row.lower = base.lower;
          row.upper = base.upper;
        } else {
          const auto iv = price_interval(*pert.peacock, xi, cfg);
          row.lower = iv.lower;
          row.upper = iv.upper;
        }
        row.escape = std::max({row.upper - base.upper, base.lower - row.lower, 0.0});
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const unsigned n = std::min<unsigned>(worker_count(), static_cast<unsigned>(std::max<std::size_t>(1, tab.rows.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw TransportError("stability sweep: " + e);

  for (double r : radii) {
    double eps = 0.0;
    for (const auto& row : tab.rows)
      if (row.radius == r && row.status != "rejected") eps = std::max(eps, row.escape);
    tab.eps.push_back({r, eps});
  }
  return tab;
}

TransportPlan freeze_pushforward(const TransportPlan& plan, const std::vector<double>& eps) {
  const auto g = pathspace::forward_shift(plan.grid, eps);
  TransportPlan out;
  out.grid = plan.grid;
  out.probs = plan.probs;
  for (const auto& w : plan.paths) out.paths.push_back(pathspace::apply_time_change(w, g));
  return out;
}

}  // namespace motlab::transport
