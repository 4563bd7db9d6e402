#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "motlab/lattice.hpp"

#include <json.hpp>

#include <cmath>
#include <random>

using namespace motlab;
using namespace motlab::lattice;
using pathspace::Jump;
using pathspace::StepPath;

namespace {

// Largest element of B^(N) (in √d units) strictly below x, by listing.
double brute_snap(double x, int N) {
  const double u = std::ldexp(1.0, -N);
  double best = 0.0;
  for (int i = 1; i * u < x + 4 * u && i < 100000; ++i)
    if (i * u < x) best = std::max(best, i * u);
  for (int j = 1; j < 100000; ++j)
    if (u / j < x) {
      best = std::max(best, u / j);
      break;
    }
  return best;
}

std::vector<Point> distinct_values(const StepPath& w) {
  std::vector<Point> out{w.initial()};
  for (const auto& j : w.jumps())
    if (j.value != out.back()) out.push_back(j.value);
  return out;
}

StepPath corpus_path(std::mt19937_64& rng, std::size_t dim, double vmax = 3.0) {
  return pathspace::random_path(rng, Point(dim, 1.0), 6, vmax, 12);
}

}  // namespace

TEST_CASE("grid projection") {
  CHECK(grid_project({0.77}, 2) == Point{0.75});
  CHECK(grid_project({0.875}, 2) == Point{0.75});
  CHECK(grid_project({0.625}, 3) == Point{0.625});
  CHECK(grid_project({0.9}, 1) == Point{1.0});
  CHECK(grid_project({0.9}, 1, 0.9) == Point{0.5});
  CHECK(grid_project({0.9, 0.2}, 1, std::hypot(0.9, 0.2)) == Point{0.5, 0.0});
  CHECK(grid_project({0.9, 0.3}, 1, 1.0) == Point{0.5, 0.5});
  CHECK_THROWS_AS(grid_project({-0.1}, 2), LatticeError);
  CHECK(on_grid({0.75, 2.0}, 2));
  CHECK(!on_grid({0.3}, 2));
  CHECK(grid_coords({0.75, 2.0}, 2) == std::vector<std::int64_t>{3, 8});
}

TEST_CASE("grid projection is nearest with ties toward zero") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int k = 0; k < 2000; ++k) {
    const double x = u(rng);
    const int n = 1 + k % 7;
    const double step = std::ldexp(1.0, -n);
    const double p = grid_project({x}, n)[0];
    CHECK(on_grid({p}, n));
    CHECK(std::abs(p - x) <= step / 2);
    CHECK(std::abs(p - x) <= std::abs(p + step - x));
    if (p >= step) CHECK(std::abs(p - x) < std::abs(p - step - x) + 1e-300);
  }
}

TEST_CASE("surd arithmetic") {
  Surd s2 = sqrt_d(2);
  CHECK(floor(s2) == 1);
  CHECK(floor(s2 * Rational(1000)) == 1414);
  CHECK(floor(Surd(Rational(-1, 2), 0, 2)) == -1);
  CHECK(sqrt_d(4).is_rational());
  CHECK(sqrt_d(9) == Surd::rational(3, 9));
  CHECK(Surd(Rational(3, 2), -1, 2).sign() > 0);
  CHECK(Surd(Rational(7, 5), -1, 2).sign() < 0);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> num(-5000, 5000), den(1, 97);
  for (int k = 0; k < 1000; ++k) {
    const int d = 2 + k % 5;
    Surd x(Rational(num(rng), den(rng)), Rational(num(rng), den(rng)), d);
    const long double v = static_cast<long double>(x.a.get_d()) + x.b.get_d() * std::sqrt(static_cast<long double>(d));
    const long double f = std::floor(v);
    if (v - f < 1e-9 || f + 1 - v < 1e-9) continue;
    CHECK(floor(x).get_si() == static_cast<long>(f));
  }
}

TEST_CASE("B grids and snapping") {
  CHECK(in_B(Rational(1, 4), 2));
  CHECK(in_B(Rational(3, 4), 2));
  CHECK(in_B(Rational(1, 12), 2));
  CHECK(!in_B(Rational(2, 12 * 5), 2));
  CHECK(!in_B(Rational(3, 40), 2));
  CHECK(!in_B(Rational(0), 2));
  CHECK(snap_below(Surd::rational(Rational(3, 10), 1), 2) == Rational(1, 4));
  CHECK(snap_below(Surd::rational(Rational(1, 2), 1), 2) == Rational(1, 4));
  CHECK(snap_below(Surd::rational(Rational(1, 8), 1), 2) == Rational(1, 12));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.001, 0.6);
  for (int k = 0; k < 500; ++k) {
    const int d = 1 + k % 3, N = 2 + k % 5;
    const double a = u(rng), b = d == 1 ? 0.0 : u(rng) / 4;
    Surd x(Rational(a), Rational(b), d);
    const Rational r = snap_below(x, N);
    CHECK(in_B(r, N));
    CHECK(Surd::rational(r, d) < x);
    CHECK(r.get_d() == doctest::Approx(brute_snap(x.to_double(), N)).epsilon(1e-12));
  }
}

TEST_CASE("discretization of constant paths is the mesh") {
  auto c = StepPath::constant({1.0});
  auto disc = discretize_times(c, {0.0, 1.0}, 2);
  REQUIRE(disc.tau.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) CHECK(disc.tau[k] == Surd::rational(Rational(k, 4), 1));
  CHECK(disc.K == std::vector<std::size_t>{0, 4});
  auto two = discretize_times(c, {0.0, 0.6, 1.0}, 2);
  std::vector<double> expect{0, 0.25, 0.5, 0.6, 0.85, 1.0};
  REQUIRE(two.tau.size() == expect.size());
  for (std::size_t k = 0; k < expect.size(); ++k) CHECK(two.tau[k] == Surd::rational(Rational(expect[k]), 1));
  CHECK(two.K == std::vector<std::size_t>{0, 3, 5});
  auto plane = discretize_times(StepPath::constant({1.0, 1.0}), {0.0, 1.0}, 2);
  REQUIRE(plane.tau.size() == 4);
  CHECK(plane.tau[2] == sqrt_d(2) * Rational(1, 2));
  CHECK(plane.tau[3] == Surd::rational(1, 2));
}

TEST_CASE("discretization postconditions") {
  auto check = [](const StepPath& w, const std::vector<double>& grid, int n) {
    auto disc = discretize_times(w, grid, n);
    const int d = static_cast<int>(w.dim());
    const Surd h = sqrt_d(d) * Rational(1, 1 << n);
    const double eps = std::ldexp(1.0, -n);
    REQUIRE(disc.K.size() == grid.size());
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      CHECK(disc.tau[disc.K[i]] == Surd::rational(Rational(grid[i]), d));
      CHECK(disc.tau[disc.K[i + 1]] == Surd::rational(Rational(grid[i + 1]), d));
      Surd prev = h;
      for (std::size_t k = disc.K[i] + 1; k <= disc.K[i + 1]; ++k) {
        const Surd inc = disc.tau[k] - disc.tau[k - 1];
        CHECK(inc.sign() > 0);
        CHECK(inc <= prev);
        prev = inc;
        const double a = disc.tau[k - 1].to_double(), b = disc.tau[k].to_double();
        const Point base = w.at(a);
        for (const auto& j : w.jumps())
          if (j.t > a && j.t < b) CHECK(dist2(j.value, base) < eps);
      }
    }
    return disc;
  };
  StepPath one({1.0}, {{0.5, {2.0}}});
  auto disc = check(one, {0.0, 1.0}, 2);
  bool hit = false;
  for (const auto& t : disc.tau) hit = hit || t == Surd::rational(Rational(1, 2), 1);
  CHECK(hit);
  check(one, {0.0, 0.3, 1.0}, 3);
  check(StepPath({1.0, 1.0}, {{0.5, {2.0, 1.0}}, {0.75, {1.0, 0.5}}}), {0.0, 1.0}, 2);
  StepPath near({1.0, 1.0}, {{0.354, {2.0, 1.0}}});
  CHECK_THROWS_AS(discretize_times(near, {0.0, 1.0}, 2, 1000), LatticeError);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 200; ++k) {
    const std::size_t dim = k % 2 ? 1 : 4;
    check(corpus_path(rng, dim), k % 3 ? std::vector<double>{0.0, 1.0} : std::vector<double>{0.0, 0.5, 1.0},
          2 + k % 4);
  }
}

TEST_CASE("lift of the constant path") {
  auto c = StepPath::constant({1.0});
  for (int n = 1; n <= 6; ++n) {
    auto p = lift(c, {0.0, 1.0}, n);
    CHECK(validate(p).ok);
    CHECK(p.to_step_path().canonical() == c);
  }
  auto c2 = StepPath::constant({1.0, 1.0});
  auto p2 = lift(c2, {0.0, 0.5, 1.0}, 2);
  CHECK(validate(p2).ok);
  CHECK(p2.to_step_path().canonical() == c2);
  CHECK_THROWS_AS(lift(c, {0.0, 0.1, 1.0}, 2), LatticeError);
  CHECK_THROWS_AS(lift(StepPath({1.0}, {{0.5, {5.0}}}), {0.0, 1.0}, 2, 4.0), LatticeError);
}

TEST_CASE("lifted corpora are lattice members and never grow the norm") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 300; ++k) {
    const std::size_t dim = k % 3 ? 1 : 4;
    const int n = (dim == 4 ? 3 : 2) + k % 5;
    const auto grid = k % 2 ? std::vector<double>{0.0, 1.0} : std::vector<double>{0.0, 0.5, 1.0};
    const auto w = corpus_path(rng, dim);
    const auto p = lift(w, grid, n);
    const auto m = validate(p);
    CHECK_MESSAGE(m.ok, m.reason);
    const auto s = p.to_step_path();
    const auto ms = validate(s, grid, n);
    CHECK_MESSAGE(ms.ok, ms.reason);
    CHECK(s.sup_norm() <= w.sup_norm());
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(s.at(grid[i]) == grid_project(w.at(grid[i]), n, w.sup_norm()));
  }
}

TEST_CASE("lift is idempotent on marginal values") {
  std::mt19937_64 rng(6);
  int relifted = 0, stalled = 0, same_values = 0;
  for (int k = 0; k < 100; ++k) {
    const int n = 2 + k % 4;
    const std::vector<double> grid{0.0, 0.5, 1.0};
    const auto once = lift(corpus_path(rng, 1), grid, n).to_step_path();
    try {
      const auto twice = lift(once, grid, n, kInf, 4096).to_step_path();
      ++relifted;
      CHECK(validate(twice, grid, n).ok);
      for (double t : grid) CHECK(twice.at(t) == once.at(t));
      same_values += distinct_values(twice) == distinct_values(once);
    } catch (const LatticeError&) {
      ++stalled;
    }
  }
  CHECK(relifted > 50);
  MESSAGE("relifted " << relifted << ", stalled " << stalled << ", identical value sequences " << same_values);
}

TEST_CASE("validator rejects non-members") {
  const std::vector<double> grid{0.0, 1.0};
  auto c = lift(StepPath::constant({1.0}), grid, 2).to_step_path();
  CHECK(validate(c, grid, 2).ok);
  auto none = validate(StepPath::constant({1.0}), grid, 2);
  CHECK(!none.ok);
  CHECK(none.reason.find("no interior") != std::string::npos);
  auto off = validate(StepPath({1.0}, {{0.25, {0.3}}}), grid, 2);
  CHECK(!off.ok);
  CHECK(off.reason.find("not on A") != std::string::npos);
  auto bad_time = validate(StepPath({1.0}, {{0.3, {1.0}}}), grid, 2);
  CHECK(!bad_time.ok);
  CHECK(bad_time.reason.find("not in B") != std::string::npos);
  auto at_end = validate(StepPath({1.0}, {{0.25, {1.0}}, {1.0, {2.0}}}), grid, 2);
  CHECK(!at_end.ok);
  CHECK(at_end.reason.find("marginal time") != std::string::npos);

  auto p = lift(StepPath({1.0}, {{0.4, {2.0}}}), grid, 2);
  CHECK(validate(p).ok);
  auto q = p;
  q.blocks[0].inc[0] = Rational(3, 10);
  CHECK(!validate(q).ok);
  q = p;
  q.blocks[0].values.back() = {1.125};
  CHECK(!validate(q).ok);
}

TEST_CASE("small tree") {
  LatticeParams prm;
  prm.n = 1;
  prm.dim = 1;
  prm.grid = {0.0, 1.0};
  prm.R = 2.0;
  prm.J_max = 1;
  auto tree = enumerate_tree(prm);
  CHECK(tree.size() == 11);
  CHECK(tree.leaves().size() == 5);
  int max_depth = 0;
  for (const auto& nd : tree.nodes()) max_depth = std::max(max_depth, nd.depth);
  CHECK(max_depth == 2);
  for (auto l : tree.leaves()) CHECK(tree.node(l).time == 1.0);
  CHECK(dump_tree_json(tree) == dump_tree_json(enumerate_tree(prm)));
}

TEST_CASE("zero moves gives only the constant path") {
  LatticeParams prm;
  prm.n = 2;
  prm.grid = {0.0, 0.5, 1.0};
  prm.J_max = 0;
  auto tree = enumerate_tree(prm);
  for (auto l : tree.leaves()) CHECK(tree.path_to(l).canonical() == StepPath::constant({1.0}));
  CHECK(tree.leaves().size() == 1);
}

TEST_CASE("enumerated leaves are lattice members") {
  struct Case {
    int n;
    std::size_t dim;
    std::vector<double> grid;
    double R;
    int J;
  };
  for (const auto& c : {Case{1, 1, {0.0, 1.0}, 2.0, 1}, Case{1, 1, {0.0, 1.0}, 2.0, 2},
                        Case{2, 1, {0.0, 0.5, 1.0}, 1.5, 1}, Case{2, 2, {0.0, 1.0}, 1.5, 1},
                        Case{2, 2, {0.0, 1.0}, 1.0, 2}, Case{2, 1, {0.0, 0.5, 1.0}, 1.0, 2}}) {
    LatticeParams prm{c.n, c.dim, c.grid, c.R, c.J, 200000};
    auto tree = enumerate_tree(prm);
    CHECK(tree.internal_nodes().size() + tree.leaves().size() == tree.size());
    for (auto l : tree.leaves()) {
      auto w = tree.path_to(l);
      auto m = validate(w, prm.grid, prm.n);
      CHECK_MESSAGE(m.ok, m.reason);
      CHECK(w.sup_norm() <= std::sqrt(static_cast<double>(c.dim)) * c.R + 1e-12);
    }
  }
}

TEST_CASE("tree budget") {
  LatticeParams prm;
  prm.n = 3;
  prm.dim = 2;
  prm.R = 2.0;
  prm.J_max = 2;
  prm.budget = 1000;
  try {
    enumerate_tree(prm);
    FAIL("budget not enforced");
  } catch (const BudgetExceeded& e) {
    CHECK(e.attempted > 1000);
  }
}

TEST_CASE("tree dump") {
  LatticeParams prm;
  prm.n = 1;
  prm.grid = {0.0, 1.0};
  auto tree = enumerate_tree(prm);
  auto j = nlohmann::json::parse(dump_tree_json(tree));
  REQUIRE(j.size() == tree.size());
  CHECK(j[0]["parent"].is_null());
  CHECK(j[0]["value_q"] == std::vector<int>{2});
  CHECK(j[1]["time_num"] == 1);
  CHECK(j[1]["time_den"] == 2);
  CHECK(j[1]["value_q"] == std::vector<int>{0});
  CHECK(j[5]["value_q"] == std::vector<int>{4});
  CHECK(j[10]["time_num"] == 1);
  CHECK(j[10]["time_den"] == 1);
  for (std::size_t k = 1; k < j.size(); ++k) CHECK(j[k]["parent"].get<std::size_t>() < k);

  LatticeParams plane = prm;
  plane.n = 2;
  plane.dim = 2;
  plane.R = 1.0;
  auto jp = nlohmann::json::parse(dump_tree_json(enumerate_tree(plane)));
  CHECK(jp[1]["time_num"].is_null());
  CHECK(jp[1]["time"].get<double>() == doctest::Approx(std::sqrt(2.0) / 4));
}
