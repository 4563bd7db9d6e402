#include "motlab/pathspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace motlab::pathspace {

StepPath::StepPath(Point initial, std::vector<Jump> jumps, double horizon)
    : initial_(std::move(initial)), jumps_(std::move(jumps)), horizon_(horizon) {
  if (initial_.empty()) throw InvalidPath("path dimension must be positive");
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw InvalidPath("horizon must be positive");
  for (double v : initial_)
    if (!std::isfinite(v)) throw InvalidPath("non-finite path value");
  double prev = 0.0;
  for (const auto& j : jumps_) {
    if (!(j.t > prev) || j.t > horizon_) throw InvalidPath("jump times must increase within (0, horizon]");
    if (j.value.size() != initial_.size()) throw InvalidPath("jump value of wrong dimension");
    for (double v : j.value)
      if (!std::isfinite(v)) throw InvalidPath("non-finite path value");
    prev = j.t;
  }
}

StepPath StepPath::constant(Point value, double horizon) { return StepPath(std::move(value), {}, horizon); }

const Point& StepPath::at(double t) const {
  auto it = std::upper_bound(jumps_.begin(), jumps_.end(), t, [](double x, const Jump& j) { return x < j.t; });
  return it == jumps_.begin() ? initial_ : std::prev(it)->value;
}

const Point& StepPath::before(double t) const {
  auto it = std::lower_bound(jumps_.begin(), jumps_.end(), t, [](const Jump& j, double x) { return j.t < x; });
  return it == jumps_.begin() ? initial_ : std::prev(it)->value;
}

double StepPath::sup_norm() const {
  double m = norm2(initial_);
  for (const auto& j : jumps_) m = std::max(m, norm2(j.value));
  return m;
}

Point StepPath::integral() const {
  Point s(dim(), 0.0);
  double start = 0.0;
  const Point* v = &initial_;
  auto add = [&](double end) {
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += (*v)[k] * (end - start);
  };
  for (const auto& j : jumps_) {
    add(j.t);
    start = j.t;
    v = &j.value;
  }
  add(horizon_);
  return s;
}

double StepPath::abs_integral() const {
  double s = 0.0, start = 0.0;
  const Point* v = &initial_;
  for (const auto& j : jumps_) {
    s += norm2(*v) * (j.t - start);
    start = j.t;
    v = &j.value;
  }
  return s + norm2(*v) * (horizon_ - start);
}

StepPath StepPath::canonical() const {
  std::vector<Jump> out;
  const Point* prev = &initial_;
  for (const auto& j : jumps_) {
    if (j.value != *prev) {
      out.push_back(j);
      prev = &out.back().value;
    }
  }
  return StepPath(initial_, std::move(out), horizon_);
}

std::vector<double> StepPath::breakpoints() const {
  std::vector<double> b{0.0};
  for (const auto& j : jumps_) b.push_back(j.t);
  return b;
}

void validate_grid(const std::vector<double>& grid) {
  if (grid.size() < 2 || grid.front() != 0.0 || grid.back() != 1.0)
    throw InvalidPath("time grid must run from 0 to 1");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw InvalidPath("time grid must be strictly increasing");
}

double min_step(const std::vector<double>& grid) {
  double m = kInf;
  for (std::size_t i = 1; i < grid.size(); ++i) m = std::min(m, grid[i] - grid[i - 1]);
  return m;
}

std::string to_string(PayoffKind k) {
  switch (k) {
    case PayoffKind::Asian: return "asian";
    case PayoffKind::LookbackMax: return "lookback_max";
    case PayoffKind::BasketCallAt1: return "basket_call_at_1";
    case PayoffKind::MarginalGrid: return "marginal_grid";
    case PayoffKind::Custom: return "custom";
  }
  return "?";
}

namespace {

double scalar(const Point& v, int coordinate) {
  return coordinate < 0 ? norm2(v) : v.at(static_cast<std::size_t>(coordinate));
}

}  // namespace

double Payoff::operator()(const StepPath& w) const {
  double v = 0.0;
  switch (kind) {
    case PayoffKind::Asian: {
      if (coordinate < 0) {
        v = w.abs_integral();
      } else {
        v = w.integral().at(static_cast<std::size_t>(coordinate));
      }
      break;
    }
    case PayoffKind::LookbackMax: {
      v = scalar(w.initial(), coordinate);
      for (const auto& j : w.jumps()) v = std::max(v, scalar(j.value, coordinate));
      break;
    }
    case PayoffKind::BasketCallAt1: {
      const Point& x = w.at(1.0);
      double s = 0.0;
      for (std::size_t k = 0; k < x.size(); ++k) s += basket.at(k) * x[k];
      v = positive_part(s - strike);
      break;
    }
    case PayoffKind::MarginalGrid: {
      std::vector<Point> tuple;
      tuple.reserve(grid.size());
      for (double t : grid) tuple.push_back(w.at(t));
      v = marginal(tuple);
      break;
    }
    case PayoffKind::Custom: v = custom(w); break;
  }
  if (truncation) v *= chi(*truncation, w.sup_norm());
  return v;
}

double Payoff::modulus(double u) const { return u == 0.0 ? 0.0 : shift_slope * u; }

Payoff asian(std::vector<double> grid, int coordinate) {
  validate_grid(grid);
  Payoff p;
  p.kind = PayoffKind::Asian;
  p.name = "asian";
  p.coordinate = coordinate;
  // Each block (t_{i-1}, t_i] contributes at most ε_i |ω_{t_{i-1}}| + (ε_i/Δt_i) ∫|ω|.
  p.shift_slope = 1.0 / min_step(grid);
  p.grid = std::move(grid);
  return p;
}

Payoff lookback_max(std::vector<double> grid, int coordinate) {
  validate_grid(grid);
  Payoff p;
  p.kind = PayoffKind::LookbackMax;
  p.name = "lookback_max";
  p.coordinate = coordinate;
  p.shift_slope = 0.0;
  p.grid = std::move(grid);
  return p;
}

Payoff basket_call_at_1(std::vector<double> grid, Point weights, double strike) {
  validate_grid(grid);
  Payoff p;
  p.kind = PayoffKind::BasketCallAt1;
  p.name = "basket_call_at_1";
  p.basket = std::move(weights);
  p.strike = strike;
  p.shift_slope = 0.0;
  p.grid = std::move(grid);
  return p;
}

Payoff marginal_grid(std::vector<double> grid, MarginalFn f, std::string name, bool bounded) {
  validate_grid(grid);
  Payoff p;
  p.kind = PayoffKind::MarginalGrid;
  p.name = std::move(name);
  p.marginal = std::move(f);
  p.bounded = bounded;
  p.shift_slope = 0.0;
  p.grid = std::move(grid);
  return p;
}

Payoff abs_move(std::vector<double> grid, std::size_t i, std::size_t j) {
  if (i >= grid.size() || j >= grid.size()) throw InvalidPath("abs_move index outside grid");
  return marginal_grid(
      std::move(grid), [i, j](const std::vector<Point>& x) { return dist2(x[j], x[i]); },
      "abs_move(" + std::to_string(i) + "," + std::to_string(j) + ")");
}

Payoff call_at(std::vector<double> grid, std::size_t i, double strike, std::size_t k) {
  if (i >= grid.size()) throw InvalidPath("call index outside grid");
  auto p = marginal_grid(
      std::move(grid), [i, k, strike](const std::vector<Point>& x) { return positive_part(x[i].at(k) - strike); },
      "call(" + std::to_string(i) + ")");
  p.strike = strike;
  return p;
}

Payoff constant(std::vector<double> grid, double c) {
  return marginal_grid(std::move(grid), [c](const std::vector<Point>&) { return c; }, "constant", true);
}

Payoff tail_indicator(std::vector<double> grid, double R) {
  auto p = custom(std::move(grid), [R](const StepPath& w) { return w.sup_norm() >= R ? 1.0 : 0.0; },
                  "tail_indicator", true);
  p.shift_slope = 0.0;  // sup norm is invariant under onto time changes
  return p;
}

Payoff custom(std::vector<double> grid, std::function<double(const StepPath&)> f, std::string name,
              bool bounded) {
  validate_grid(grid);
  Payoff p;
  p.kind = PayoffKind::Custom;
  p.name = std::move(name);
  p.custom = std::move(f);
  p.bounded = bounded;
  p.grid = std::move(grid);
  return p;
}

double chi(double R, double x) {
  if (x <= R) return 1.0;
  if (x >= R + 1.0) return 0.0;
  return R + 1.0 - x;
}

Payoff truncate_payoff(Payoff xi, double R) {
  if (!(R > 0.0)) throw InvalidPath("truncation level must be positive");
  xi.truncation = xi.truncation ? std::min(*xi.truncation, R) : R;
  xi.name += "_R";
  xi.bounded = true;
  return xi;
}

TimeChange::TimeChange(std::vector<double> grid, std::vector<double> eps, Kind kind)
    : grid_(std::move(grid)), eps_(std::move(eps)), kind_(kind) {
  validate_grid(grid_);
  if (eps_.size() + 1 != grid_.size()) throw InvalidPath("need one shift per grid interval");
  double n = 0.0;
  for (double e : eps_) {
    if (!(e >= 0.0)) throw InvalidPath("shifts must be nonnegative");
    n += e * e;
  }
  if (!(std::sqrt(n) < min_step(grid_))) throw InvalidPath("|eps| must be smaller than the grid step");
}

namespace {

std::size_t block_of(const std::vector<double>& grid, double t) {
  // i with t in (t_{i-1}, t_i]
  auto it = std::lower_bound(grid.begin() + 1, grid.end(), t);
  if (it == grid.end()) --it;
  return static_cast<std::size_t>(it - grid.begin());
}

}  // namespace

double TimeChange::operator()(double t) const {
  if (t <= 0.0) return 0.0;
  const std::size_t i = block_of(grid_, t);
  const double a = grid_[i - 1], dt = grid_[i] - a, e = eps_[i - 1];
  const double k = dt / (dt - e);
  if (kind_ == Kind::Forward) return a + k * positive_part(t - a - e);
  return grid_[i] - positive_part(dt - k * (t - a));
}

double TimeChange::first_reach(double s) const {
  if (s <= 0.0) return 0.0;
  const std::size_t i = block_of(grid_, s);
  const Rational a = to_rational(grid_[i - 1]), dt = to_rational(grid_[i]) - a, e = to_rational(eps_[i - 1]);
  Rational u = (to_rational(s) - a) * (dt - e) / dt + a;
  if (kind_ == Kind::Forward) u += e;
  return to_double(u);
}

TimeChange forward_shift(const std::vector<double>& grid, const std::vector<double>& eps) {
  return TimeChange(grid, eps, TimeChange::Kind::Forward);
}

TimeChange backward_shift(const std::vector<double>& grid, const std::vector<double>& eps) {
  return TimeChange(grid, eps, TimeChange::Kind::Backward);
}

StepPath apply_time_change(const StepPath& w, const TimeChange& g) {
  std::vector<Jump> out;
  for (const auto& j : w.jumps()) {
    const double u = g.first_reach(j.t);
    if (!out.empty() && out.back().t >= u) {
      out.back().value = j.value;
    } else {
      out.push_back({u, j.value});
    }
  }
  return StepPath(w.initial(), std::move(out), w.horizon());
}

namespace {

struct Restriction {
  std::vector<double> times;   // jumps in (s, t]
  std::vector<Point> values;   // values[0] = value at s, values[k] after k-th jump
};

Restriction restrict(const StepPath& w, double s, double t) {
  Restriction r;
  r.values.push_back(w.at(s));
  for (const auto& j : w.jumps()) {
    if (j.t > s && j.t <= t) {
      r.times.push_back(j.t);
      r.values.push_back(j.value);
    }
  }
  return r;
}

// Is there a time change λ of [s,t] with |λ - id| <= eps and |x∘λ - y| <= eps?
// Dynamic program over the interleaving of x's moved jumps with y's fixed
// jumps; state value is the earliest admissible position of the last event.
bool j1_feasible(const Restriction& x, const Restriction& y, double s, double t, double eps) {
  const double slack = 1e-13 * (1.0 + std::abs(t));
  const std::size_t p = x.times.size(), q = y.times.size();
  if (dist2(x.values[0], y.values[0]) > eps) return false;
  std::vector<double> earliest((p + 1) * (q + 1), kInf);
  auto E = [&](std::size_t i, std::size_t j) -> double& { return earliest[i * (q + 1) + j]; };
  E(0, 0) = s;
  for (std::size_t sum = 0; sum <= p + q; ++sum) {
    for (std::size_t i = 0; i <= std::min(sum, p); ++i) {
      const std::size_t j = sum - i;
      if (j > q) continue;
      const double e = E(i, j);
      if (e == kInf) continue;
      if (i < p) {
        const double a = x.times[i];
        const bool at_end = a == t;
        if (!at_end || j == q) {
          double lo = std::max(e, a - eps), hi = std::min(a + eps, j < q ? y.times[j] : t);
          if (at_end) lo = std::max(lo, t);
          if (lo <= hi + slack && dist2(x.values[i + 1], y.values[j]) <= eps)
            E(i + 1, j) = std::min(E(i + 1, j), lo);
        }
      }
      if (j < q) {
        const double b = y.times[j];
        const bool at_end = b == t;
        if ((!at_end || i == p) && e <= b + slack && dist2(x.values[i], y.values[j + 1]) <= eps)
          E(i, j + 1) = std::min(E(i, j + 1), b);
      }
      if (i < p && j < q) {
        const double a = x.times[i], b = y.times[j];
        const bool end_ok = (a == t) == (b == t);
        if (end_ok && std::abs(a - b) <= eps + slack && e <= b + slack &&
            dist2(x.values[i + 1], y.values[j + 1]) <= eps)
          E(i + 1, j + 1) = std::min(E(i + 1, j + 1), b);
      }
    }
  }
  return E(p, q) < kInf;
}

}  // namespace

double j1_distance(const StepPath& a, const StepPath& b, double s, double t) {
  if (a.dim() != b.dim()) throw InvalidPath("dimension mismatch");
  const Restriction x = restrict(a, s, t), y = restrict(b, s, t);
  std::vector<double> cand{0.0};
  for (const auto& u : x.values)
    for (const auto& v : y.values) cand.push_back(dist2(u, v));
  for (double u : x.times)
    for (double v : y.times) cand.push_back(std::abs(u - v));
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  std::size_t lo = 0, hi = cand.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (j1_feasible(x, y, s, t, cand[mid])) hi = mid;
    else lo = mid + 1;
  }
  return cand[lo];
}

double rho_T(const StepPath& a, const StepPath& b, const std::vector<double>& grid) {
  validate_grid(grid);
  double r = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) r += j1_distance(a, b, grid[i - 1], grid[i]);
  Point ia = a.integral(), ib = b.integral();
  return r + dist2(ia, ib);
}

StepPath dilate(const StepPath& w, double delta) {
  if (!(delta >= 0.0)) throw InvalidPath("dilation must be nonnegative");
  if (delta == 0.0) return w;
  const Rational k = 1 + to_rational(delta);
  std::vector<Jump> out;
  for (const auto& j : w.jumps()) out.push_back({to_double(to_rational(j.t) / k), j.value});
  return StepPath(w.initial(), std::move(out), 1.0);
}

StepPath sko_stopo(const Point& m0, const Point& m1, const Point& m2, int n) {
  if (n < 3) throw InvalidPath("sko_stopo needs n >= 3");
  return StepPath(m0, {{0.5 - 1.0 / n, m1}, {0.5 + 1.0 / n, m2}});
}

PathMeasure sko_stopo_family(const std::vector<std::vector<Point>>& triples, const std::vector<double>& probs,
                             int n) {
  PathMeasure out;
  for (std::size_t k = 0; k < triples.size(); ++k) {
    out.paths.push_back(sko_stopo(triples[k].at(0), triples[k].at(1), triples[k].at(2), n));
    out.probs.push_back(probs.at(k));
  }
  return out;
}

PathMeasure closeness(int n) {
  if (n < 1) throw InvalidPath("closeness needs n >= 1");
  PathMeasure out;
  for (double y : {-1.0, 1.0}) {
    out.paths.push_back(StepPath({0.0}, {{1.0 / n, {y}}}));
    out.probs.push_back(0.5);
  }
  return out;
}

AtomList marginal_at(const PathMeasure& family, double t) {
  std::map<Point, double> acc;
  for (std::size_t k = 0; k < family.paths.size(); ++k) acc[family.paths[k].at(t)] += family.probs[k];
  AtomList out;
  for (auto& [p, w] : acc) {
    if (w <= 0.0) continue;
    out.points.push_back(p);
    out.weights.push_back(w);
  }
  return out;
}

StepPath random_path(std::mt19937_64& rng, const Point& start, int max_jumps, double vmax, int time_bits) {
  std::uniform_int_distribution<int> count(0, max_jumps);
  std::uniform_int_distribution<std::int64_t> tick(1, std::int64_t{1} << time_bits);
  std::uniform_real_distribution<double> val(0.0, vmax);
  const int k = count(rng);
  std::vector<std::int64_t> ticks;
  while (static_cast<int>(ticks.size()) < k) {
    const auto v = tick(rng);
    if (std::find(ticks.begin(), ticks.end(), v) == ticks.end()) ticks.push_back(v);
  }
  std::sort(ticks.begin(), ticks.end());
  std::vector<Jump> jumps;
  for (auto v : ticks) {
    Point p(start.size());
    for (auto& c : p) c = val(rng);
    jumps.push_back({std::ldexp(static_cast<double>(v), -time_bits), p});
  }
  return StepPath(start, std::move(jumps));
}

}  // namespace motlab::pathspace
