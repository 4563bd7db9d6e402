#include "motlab/lattice.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace motlab::lattice {

using pathspace::Jump;
using pathspace::StepPath;

namespace {

int perfect_root(int d) {
  int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
  return r * r == d ? r : 0;
}

Rational pow2(int k) {
  Rational r = 1;
  if (k >= 0)
    mpz_mul_2exp(r.get_num_mpz_t(), r.get_num_mpz_t(), static_cast<mp_bitcnt_t>(k));
  else
    mpz_mul_2exp(r.get_den_mpz_t(), r.get_den_mpz_t(), static_cast<mp_bitcnt_t>(-k));
  return r;
}

Surd mul(const Surd& x, const Surd& y) {
  return Surd(x.a * y.a + x.b * y.b * x.d, x.a * y.b + x.b * y.a, x.d);
}

Surd div_sqrt_d(const Surd& x) {
  if (int r = perfect_root(x.d)) return Surd(x.a / r, 0, x.d);
  return Surd(x.b, x.a / x.d, x.d);
}

Surd inverse(const Surd& x) {
  const Rational den = x.a * x.a - x.b * x.b * x.d;
  return Surd(x.a / den, -x.b / den, x.d);
}

Rational norm2_exact(const Point& x) {
  Rational s = 0;
  for (double v : x) s += Rational(v) * Rational(v);
  return s;
}

// Value of a step path at an exact time.
const Point& value_at(const StepPath& w, const Surd& t) {
  const Point* v = &w.initial();
  for (const auto& j : w.jumps()) {
    if (t < Surd::rational(Rational(j.t), t.d)) break;
    v = &j.value;
  }
  return *v;
}

Point project_exact(const Point& x, int level, const Rational& bound2) {
  Point down(x.size()), out(x.size());
  std::vector<bool> up(x.size(), false);
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k] < 0.0) throw LatticeError("grid_project: negative coordinate");
    if (level >= 1074) {
      down[k] = out[k] = x[k];
      continue;
    }
    const double y = std::ldexp(x[k], level);
    if (!std::isfinite(y) || y >= 9007199254740992.0) {
      down[k] = out[k] = x[k];
      continue;
    }
    const double fl = std::floor(y);
    down[k] = std::ldexp(fl, -level);
    up[k] = y - fl > 0.5;
    out[k] = up[k] ? std::ldexp(fl + 1.0, -level) : down[k];
  }
  for (std::size_t k = 0; k < x.size() && sgn(bound2) >= 0 && norm2_exact(out) > bound2; ++k)
    if (up[k]) out[k] = down[k];
  return out;
}

Rational bound2_of(double bound) {
  if (!std::isfinite(bound)) return Rational(-1);
  return Rational(bound) * Rational(bound);
}

void check_grid(const std::vector<double>& grid) { pathspace::validate_grid(grid); }

Surd step_h(int n, int d) { return sqrt_d(d) * pow2(-n); }

std::string block_tag(std::size_t i, std::size_t j) {
  return "block " + std::to_string(i) + ", point " + std::to_string(j) + ": ";
}

bool near_integer(double s) {
  const double r = std::round(s);
  return r >= 1.0 && std::abs(s - r) <= 1e-9 * std::max(1.0, s);
}

nlohmann::json big_int(const mpz_class& z) {
  if (z.fits_slong_p()) return nlohmann::json(z.get_si());
  return nlohmann::json(z.get_str());
}

}  // namespace

Surd::Surd(Rational a_, Rational b_, int d_) : a(std::move(a_)), b(std::move(b_)), d(d_) {
  if (d < 1) throw LatticeError("surd: d must be positive");
  a.canonicalize();
  b.canonicalize();
  if (sgn(b) != 0) {
    if (int r = perfect_root(d)) {
      a += b * r;
      b = 0;
    }
  }
}

int Surd::sign() const {
  const int sa = sgn(a), sb = sgn(b);
  if (sb == 0) return sa;
  if (sa == 0 || sa == sb) return sb;
  const int c = cmp(a * a, b * b * d);
  return c == 0 ? 0 : (c > 0 ? sa : sb);
}

double Surd::to_double() const {
  return motlab::to_double(a) + motlab::to_double(b) * std::sqrt(static_cast<double>(d));
}

mpz_class floor(const Surd& x) {
  mpz_class m;
  if (sgn(x.b) == 0) {
    mpz_fdiv_q(m.get_mpz_t(), x.a.get_num_mpz_t(), x.a.get_den_mpz_t());
    return m;
  }
  const std::size_t bits = 64 + mpz_sizeinbase(x.a.get_num_mpz_t(), 2) + mpz_sizeinbase(x.a.get_den_mpz_t(), 2) +
                           mpz_sizeinbase(x.b.get_num_mpz_t(), 2) + mpz_sizeinbase(x.b.get_den_mpz_t(), 2);
  mpf_class a(x.a, bits), b(x.b, bits), s(x.d, bits);
  s = sqrt(s);
  mpf_class v(a + b * s, bits);
  v = ::floor(v);
  m = v;
  while (Surd(x.a - Rational(m), x.b, x.d).sign() < 0) --m;
  while (Surd(x.a - Rational(m) - 1, x.b, x.d).sign() >= 0) ++m;
  return m;
}

Surd sqrt_d(int d) { return Surd(0, 1, d); }

bool on_grid(const Point& x, int n) {
  for (double v : x) {
    if (!(v >= 0.0)) return false;
    if (n >= 1074) continue;
    const double y = std::ldexp(v, n);
    if (std::isfinite(y) && y != std::floor(y)) return false;
  }
  return true;
}

Point grid_project(const Point& x, int level, double bound) { return project_exact(x, level, bound2_of(bound)); }

std::vector<std::int64_t> grid_coords(const Point& x, int level) {
  std::vector<std::int64_t> q;
  for (double v : x) {
    const double y = std::ldexp(v, level);
    if (y != std::floor(y) || std::abs(y) > 9.0e15) throw LatticeError("grid_coords: value not on grid");
    q.push_back(static_cast<std::int64_t>(y));
  }
  return q;
}

bool in_B(const Rational& r, int N) {
  if (sgn(r) <= 0) return false;
  Rational s = r * pow2(N);
  if (s.get_den() == 1) return true;
  return s.get_num() == 1;
}

Rational snap_below(const Surd& x, int N) {
  if (x.sign() <= 0) throw LatticeError("snap_below: nonpositive increment");
  const Surd y = x * pow2(N);
  if (Surd::rational(1, x.d) < y) {
    mpz_class c = floor(y);
    if (y == Surd::rational(Rational(c), x.d)) c -= 1;
    return Rational(c) * pow2(-N);
  }
  mpz_class j = floor(inverse(y)) + 1;
  return pow2(-N) / Rational(j);
}

Discretization discretize_times(const StepPath& w, const std::vector<double>& grid, int n, std::size_t max_steps) {
  check_grid(grid);
  if (n < 1) throw LatticeError("discretize_times: n must be >= 1");
  const int d = static_cast<int>(w.dim());
  const Surd h = step_h(n, d);
  const Rational eps2 = pow2(-2 * n);
  Discretization out;
  out.tau.push_back(Surd::rational(0, d));
  out.K.push_back(0);
  const auto& jumps = w.jumps();
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const Surd te = Surd::rational(Rational(grid[i + 1]), d);
    Surd cur = out.tau.back();
    Surd inc = h;
    std::size_t steps = 0;
    while (true) {
      const Point& v = value_at(w, cur);
      Surd next = te;
      if (cur + inc < next) next = cur + inc;
      for (const auto& j : jumps) {
        const Surd tj = Surd::rational(Rational(j.t), d);
        if (tj <= cur) continue;
        if (next <= tj) break;
        Rational dist = 0;
        for (std::size_t k = 0; k < v.size(); ++k) {
          const Rational e = Rational(j.value[k]) - Rational(v[k]);
          dist += e * e;
        }
        if (dist >= eps2) {
          next = tj;
          break;
        }
      }
      inc = next - cur;
      out.tau.push_back(next);
      cur = next;
      if (cur == te) break;
      if (++steps > max_steps)
        throw LatticeError("discretize_times: block " + std::to_string(i) + " needs more than " +
                           std::to_string(max_steps) + " steps");
    }
    out.K.push_back(out.tau.size() - 1);
  }
  return out;
}

Surd LatticePath::time(std::size_t block, std::size_t j) const {
  const int d = static_cast<int>(dim);
  const auto& b = blocks.at(block);
  if (j >= b.values.size()) return Surd::rational(Rational(grid.at(block + 1)), d);
  Rational s = 0;
  for (std::size_t l = 0; l < j; ++l) s += b.inc[l];
  return Surd::rational(Rational(grid[block]), d) + sqrt_d(d) * s;
}

StepPath LatticePath::to_step_path() const {
  if (blocks.empty()) throw LatticeError("empty lattice path");
  std::vector<Jump> jumps;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const int d = static_cast<int>(dim);
    const Surd t0 = Surd::rational(Rational(grid[b]), d);
    Rational s = 0;
    for (std::size_t j = 1; j < blocks[b].values.size(); ++j) {
      s += blocks[b].inc[j - 1];
      jumps.push_back({(t0 + sqrt_d(d) * s).to_double(), blocks[b].values[j]});
    }
    jumps.push_back({grid[b + 1], blocks[b].values.back()});
  }
  return StepPath(blocks[0].values[0], std::move(jumps));
}

Membership validate(const LatticePath& p) {
  auto fail = [](std::string s) { return Membership{false, std::move(s)}; };
  try {
    check_grid(p.grid);
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  if (p.blocks.size() + 1 != p.grid.size()) return fail("block count does not match the marginal grid");
  const int d = static_cast<int>(p.dim);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& b = p.blocks[i];
    const std::size_t L = b.values.size();
    if (L < 2) return fail(block_tag(i, 0) + "no interior partition point");
    if (b.inc.size() + 1 != L) return fail(block_tag(i, 0) + "increment count does not match values");
    for (const auto& v : b.values)
      if (v.size() != p.dim) return fail(block_tag(i, 0) + "value of wrong dimension");
    if (!on_grid(b.values[0], p.n)) return fail(block_tag(i, 0) + "value not on A^(" + std::to_string(p.n) + ")");
    if (i > 0 && b.values[0] != p.blocks[i - 1].values.back())
      return fail(block_tag(i, 0) + "value differs from the previous block's terminal value");
    Rational total = 0;
    for (std::size_t j = 1; j < L; ++j) {
      const int N = p.n + static_cast<int>(j);
      if (!on_grid(b.values[j], N)) return fail(block_tag(i, j) + "value not on A^(" + std::to_string(N) + ")");
      if (!in_B(b.inc[j - 1], N))
        return fail(block_tag(i, j) + "time increment not in B^(" + std::to_string(N) + ")");
      total += b.inc[j - 1];
    }
    if (!on_grid(b.values.back(), p.n))
      return fail(block_tag(i, L - 1) + "terminal value not on A^(" + std::to_string(p.n) + ")");
    const Surd span = Surd::rational(Rational(p.grid[i + 1]) - Rational(p.grid[i]), d);
    if (!(sqrt_d(d) * total < span)) return fail(block_tag(i, L - 1) + "partition overruns the marginal time");
  }
  return {};
}

Membership validate(const StepPath& w, const std::vector<double>& grid, int n) {
  auto fail = [](std::string s) { return Membership{false, std::move(s)}; };
  try {
    check_grid(grid);
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  if (w.horizon() != 1.0) return fail("horizon must be 1");
  if (!on_grid(w.initial(), n)) return fail("initial value not on A^(" + std::to_string(n) + ")");
  const double sq = std::sqrt(static_cast<double>(w.dim()));
  const auto& jumps = w.jumps();
  std::size_t p = 0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double ti = grid[i], te = grid[i + 1];
    while (p < jumps.size() && jumps[p].t <= ti) ++p;
    std::vector<double> times{ti};
    while (p < jumps.size() && jumps[p].t < te) times.push_back(jumps[p++].t);
    if (times.size() < 2) return fail(block_tag(i, 0) + "no interior partition point");
    if (w.before(te) != w.at(te)) return fail(block_tag(i, times.size()) + "jump at the marginal time");
    if (!on_grid(w.at(ti), n)) return fail(block_tag(i, 0) + "value not on A^(" + std::to_string(n) + ")");
    for (std::size_t j = 1; j < times.size(); ++j) {
      const int N = n + static_cast<int>(j);
      if (!on_grid(w.at(times[j]), N)) return fail(block_tag(i, j) + "value not on A^(" + std::to_string(N) + ")");
      const double r = (times[j] - times[j - 1]) / sq;
      const double s = N < 1000 ? std::ldexp(r, N) : kInf;
      if (!(s > 1e9 || near_integer(s) || (s < 1.0 && near_integer(1.0 / s))))
        return fail(block_tag(i, j) + "time increment not in B^(" + std::to_string(N) + ")");
    }
    if (!on_grid(w.at(te), n)) return fail(block_tag(i, times.size() - 1) + "terminal value not on A^(" +
                                            std::to_string(n) + ")");
  }
  return {};
}

LatticePath lift(const StepPath& w, const std::vector<double>& grid, int n, double R, std::size_t max_steps) {
  check_grid(grid);
  if (n < 1) throw LatticeError("lift: n must be >= 1");
  if (w.horizon() != 1.0) throw LatticeError("lift: horizon must be 1");
  const int d = static_cast<int>(w.dim());
  Rational bound2 = norm2_exact(w.initial());
  for (const auto& j : w.jumps()) bound2 = std::max(bound2, norm2_exact(j.value));
  for (const auto& j : w.jumps())
    for (double v : j.value)
      if (v < 0.0) throw LatticeError("lift: negative path value");
  for (double v : w.initial())
    if (v < 0.0) throw LatticeError("lift: negative path value");
  if (std::isfinite(R) && w.sup_norm() > R)
    throw LatticeError("lift: path exits the value cap R = " + std::to_string(R));
  const Surd h = step_h(n, d);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(h < Surd::rational(Rational(grid[i + 1]) - Rational(grid[i]), d)))
      throw LatticeError("lift: sqrt(d) 2^-n must be below every marginal time step");

  const Discretization disc = discretize_times(w, grid, n, max_steps);
  LatticePath out;
  out.n = n;
  out.dim = w.dim();
  out.grid = grid;
  const Rational hn = pow2(-n);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const std::size_t kb = disc.K[i], M = disc.K[i + 1] - kb;
    const Rational dt = Rational(grid[i + 1]) - Rational(grid[i]);
    const Surd shrink(1, -hn / dt, d);
    LatticeBlock b;
    b.inc.push_back(hn);
    for (std::size_t j = 2; j <= M; ++j) {
      const Surd delta = disc.tau[kb + j - 1] - disc.tau[kb + j - 2];
      b.inc.push_back(snap_below(div_sqrt_d(mul(shrink, delta)), n + static_cast<int>(j)));
    }
    b.values.push_back(project_exact(w.at(grid[i]), n, bound2));
    for (std::size_t j = 1; j < M; ++j)
      b.values.push_back(project_exact(value_at(w, disc.tau[kb + j]), n + static_cast<int>(j), bound2));
    b.values.push_back(project_exact(w.at(grid[i + 1]), n, bound2));
    out.blocks.push_back(std::move(b));
  }
  return out;
}

std::size_t LatticeTree::add_root(Point value) {
  if (!nodes_.empty()) throw LatticeError("tree already has a root");
  TreeNode r;
  r.value = std::move(value);
  nodes_.push_back(std::move(r));
  return 0;
}

std::size_t LatticeTree::add_child(std::size_t parent, double time, Point value) {
  if (parent >= nodes_.size()) throw LatticeError("add_child: unknown parent");
  if (!(time > nodes_[parent].time) || time > 1.0) throw LatticeError("add_child: child time must increase");
  if (value.size() != nodes_[parent].value.size()) throw LatticeError("add_child: dimension mismatch");
  TreeNode c;
  c.parent = parent;
  c.time = time;
  c.value = std::move(value);
  c.depth = nodes_[parent].depth + 1;
  nodes_.push_back(std::move(c));
  const std::size_t id = nodes_.size() - 1;
  nodes_[parent].children.push_back(id);
  return id;
}

std::vector<std::size_t> LatticeTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].children.empty()) out.push_back(i);
  return out;
}

std::vector<std::size_t> LatticeTree::internal_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!nodes_[i].children.empty()) out.push_back(i);
  return out;
}

std::vector<std::size_t> LatticeTree::chain(std::size_t node) const {
  std::vector<std::size_t> c;
  for (std::size_t v = node; v != TreeNode::npos; v = nodes_[v].parent) c.push_back(v);
  std::reverse(c.begin(), c.end());
  return c;
}

StepPath LatticeTree::path_to(std::size_t node) const {
  const auto c = chain(node);
  std::vector<Jump> jumps;
  for (std::size_t k = 1; k < c.size(); ++k) jumps.push_back({nodes_[c[k]].time, nodes_[c[k]].value});
  return StepPath(nodes_[c[0]].value, std::move(jumps));
}

LatticeTree enumerate_tree(const LatticeParams& params) {
  const int n = params.n;
  if (n < 1) throw LatticeError("enumerate_tree: n must be >= 1");
  if (!(params.R > 0.0)) throw LatticeError("enumerate_tree: R must be positive");
  if (params.J_max < 0) throw LatticeError("enumerate_tree: J_max must be >= 0");
  if (params.dim < 1) throw LatticeError("enumerate_tree: dim must be >= 1");
  check_grid(params.grid);
  if (params.R < 1.0) throw LatticeError("enumerate_tree: R must be >= 1 to contain the start 1");
  const int d = static_cast<int>(params.dim);
  const Surd h = step_h(n, d);
  for (std::size_t i = 0; i + 1 < params.grid.size(); ++i)
    if (Surd::rational(Rational(params.grid[i + 1]) - Rational(params.grid[i]), d) < h * Rational(2))
      throw LatticeError("enumerate_tree: 2 sqrt(d) 2^-n must not exceed a marginal time step");

  const int L = std::max(params.J_max, 1);
  const std::size_t m = params.grid.size() - 1;
  auto level_of = [&](int j) { return j < L ? n + j : n; };
  auto axis_count = [&](int level) { return static_cast<std::size_t>(std::floor(std::ldexp(params.R, level))) + 1; };
  auto children_per_node = [&](int j) {
    if (params.J_max == 0) return 1.0;
    return std::pow(static_cast<double>(axis_count(level_of(j))), d);
  };

  double total = 1.0, frontier = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (int j = 1; j <= L; ++j) {
      frontier *= children_per_node(j);
      total += frontier;
    }
    total += frontier;
  }
  if (total > static_cast<double>(params.budget)) {
    const double cap = static_cast<double>(std::numeric_limits<std::size_t>::max());
    throw BudgetExceeded("enumerate_tree: " + std::to_string(total) + " nodes exceed the budget of " +
                             std::to_string(params.budget),
                         total >= cap ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(total));
  }

  LatticeTree tree(params.grid);
  tree.params = params;
  tree.enumerated = true;
  tree.add_root(Point(params.dim, 1.0));
  {
    auto& r = tree.node(0);
    r.block = 0;
    r.level = n;
    r.value_q = grid_coords(r.value, n);
  }
  std::vector<std::size_t> front{0};
  for (std::size_t i = 0; i < m; ++i) {
    for (int j = 1; j <= L; ++j) {
      const Rational offset = pow2(-n) * (Rational(2) - pow2(1 - j));
      const double t = (Surd::rational(Rational(params.grid[i]), d) + sqrt_d(d) * offset).to_double();
      const int level = level_of(j);
      std::vector<std::size_t> next;
      for (std::size_t v : front) {
        std::vector<Point> vals;
        if (params.J_max == 0) {
          vals.push_back(tree.node(v).value);
        } else {
          const std::size_t A = axis_count(level);
          std::vector<std::size_t> q(params.dim, 0);
          while (true) {
            Point p(params.dim);
            for (std::size_t k = 0; k < params.dim; ++k) p[k] = std::ldexp(static_cast<double>(q[k]), -level);
            vals.push_back(p);
            std::size_t k = params.dim;
            while (k > 0 && ++q[k - 1] == A) q[--k] = 0;
            if (k == 0) break;
          }
        }
        for (auto& p : vals) {
          const std::size_t c = tree.add_child(v, t, p);
          auto& node = tree.node(c);
          node.block = static_cast<int>(i);
          node.offset = offset;
          node.level = params.J_max == 0 ? tree.node(v).level : level;
          node.value_q = grid_coords(node.value, node.level);
          next.push_back(c);
        }
      }
      front = std::move(next);
    }
    std::vector<std::size_t> next;
    for (std::size_t v : front) {
      const std::size_t c = tree.add_child(v, params.grid[i + 1], tree.node(v).value);
      auto& node = tree.node(c);
      node.block = static_cast<int>(i + 1);
      node.offset = 0;
      node.level = n;
      node.value_q = grid_coords(node.value, n);
      next.push_back(c);
    }
    front = std::move(next);
  }
  return tree;
}

std::string dump_tree_json(const LatticeTree& tree) {
  using nlohmann::json;
  json arr = json::array();
  if (tree.size() == 0) return arr.dump();
  std::vector<std::size_t> order;
  std::deque<std::size_t> queue{tree.root()};
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    order.push_back(v);
    auto kids = tree.node(v).children;
    std::stable_sort(kids.begin(), kids.end(), [&](std::size_t a, std::size_t b) {
      const auto& na = tree.node(a);
      const auto& nb = tree.node(b);
      if (!na.value_q.empty() && !nb.value_q.empty()) return na.value_q < nb.value_q;
      return na.value < nb.value;
    });
    for (std::size_t c : kids) queue.push_back(c);
  }
  std::vector<std::size_t> id(tree.size());
  for (std::size_t k = 0; k < order.size(); ++k) id[order[k]] = k;
  const int d = static_cast<int>(tree.dim());
  for (std::size_t v : order) {
    const auto& nd = tree.node(v);
    json j;
    j["id"] = id[v];
    j["parent"] = nd.parent == TreeNode::npos ? json(nullptr) : json(id[nd.parent]);
    Surd t = Surd::rational(Rational(nd.time), d);
    if (nd.block >= 0 && static_cast<std::size_t>(nd.block) < tree.grid().size())
      t = Surd::rational(Rational(tree.grid()[nd.block]), d) + sqrt_d(d) * nd.offset;
    if (t.is_rational()) {
      j["time_num"] = big_int(t.a.get_num());
      j["time_den"] = big_int(t.a.get_den());
    } else {
      j["time_num"] = nullptr;
      j["time_den"] = nullptr;
    }
    j["time"] = nd.time;
    if (!nd.value_q.empty()) {
      j["value_q"] = nd.value_q;
      j["level"] = nd.level;
    } else {
      j["value"] = nd.value;
      j["level"] = nullptr;
    }
    arr.push_back(std::move(j));
  }
  return arr.dump();
}

}  // namespace motlab::lattice
