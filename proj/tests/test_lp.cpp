#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "motlab/lp.hpp"

#include <random>
#include <sstream>

using namespace motlab;
using namespace motlab::lp;

TEST_CASE("single variable bound row") {
  LinearProgram lp(Sense::Maximize);
  auto x = lp.add_variable("x");
  lp.set_objective(x, 1.0);
  lp.add_constraint("cap", {{x, 1.0}}, Relation::LessEqual, 1.0);
  auto sol = solve(lp);
  REQUIRE(sol.status == Status::Optimal);
  CHECK(sol.primal[0] == doctest::Approx(1.0));
  CHECK(sol.dual[0] == doctest::Approx(1.0));
  CHECK(sol.objective == doctest::Approx(1.0));
  auto rep = strong_duality_check(lp, sol);
  CHECK(rep.passed);
  CHECK(rep.gap == 0.0);
}

TEST_CASE("hand-built optimal pair has zero gap") {
  LinearProgram lp(Sense::Minimize);
  auto x = lp.add_variable("x");
  lp.set_objective(x, 2.0);
  lp.add_constraint("floor", {{x, 1.0}}, Relation::GreaterEqual, 3.0);
  LpSolution sol;
  sol.status = Status::Optimal;
  sol.primal = {3.0};
  sol.dual = {2.0};
  auto rep = strong_duality_check(lp, sol);
  CHECK(rep.gap == 0.0);
  CHECK(rep.passed);
}

TEST_CASE("infeasible program yields a Farkas certificate") {
  LinearProgram lp(Sense::Maximize);
  auto x = lp.add_variable("x");
  lp.set_objective(x, 1.0);
  lp.add_constraint("lo", {{x, 1.0}}, Relation::GreaterEqual, 2.0);
  lp.add_constraint("hi", {{x, 1.0}}, Relation::LessEqual, 1.0);
  for (auto arith : {Arithmetic::Float, Arithmetic::Rational}) {
    SolverOptions opts;
    opts.arithmetic = arith;
    auto sol = solve(lp, opts);
    REQUIRE(sol.status == Status::Infeasible);
    CHECK(farkas_margin(lp, sol.farkas) > 0.5);
  }
}

TEST_CASE("unbounded program yields an improving ray") {
  LinearProgram lp(Sense::Maximize);
  auto x = lp.add_variable("x");
  auto y = lp.add_variable("y", -kInf, kInf);
  lp.set_objective(x, 1.0);
  lp.set_objective(y, 1.0);
  lp.add_constraint("r", {{x, 1.0}, {y, -1.0}}, Relation::LessEqual, 1.0);
  auto sol = solve(lp);
  REQUIRE(sol.status == Status::Unbounded);
  const auto& d = sol.ray;
  CHECK(d[0] + d[1] > 0.0);
  CHECK(d[0] - d[1] <= 1e-12);
  CHECK(d[0] >= 0.0);
}

TEST_CASE("2x2 transport with identity-favouring costs") {
  LinearProgram lp(Sense::Minimize);
  const double cost[2][2] = {{0, 1}, {1, 0}};
  std::size_t v[2][2];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      v[i][j] = lp.add_variable("p" + std::to_string(i) + std::to_string(j));
      lp.set_objective(v[i][j], cost[i][j]);
    }
  for (int i = 0; i < 2; ++i) {
    lp.add_constraint("row", {{v[i][0], 1.0}, {v[i][1], 1.0}}, Relation::Equal, 0.5);
    lp.add_constraint("col", {{v[0][i], 1.0}, {v[1][i], 1.0}}, Relation::Equal, 0.5);
  }
  auto sol = solve(lp);
  REQUIRE(sol.status == Status::Optimal);
  CHECK(sol.objective == doctest::Approx(0.0));
  CHECK(strong_duality_check(lp, sol).passed);
}

TEST_CASE("bounded, mirrored and free variables") {
  LinearProgram lp(Sense::Minimize);
  auto a = lp.add_variable("a", -2.0, 3.0);
  auto b = lp.add_variable("b", -kInf, 4.0);
  auto c = lp.add_variable("c", -kInf, kInf);
  lp.set_objective(a, 1.0);
  lp.set_objective(b, -1.0);
  lp.set_objective(c, 1.0);
  lp.add_constraint("link", {{c, 1.0}, {a, -1.0}}, Relation::GreaterEqual, -1.0);
  lp.add_constraint("sum", {{a, 1.0}, {b, 1.0}}, Relation::LessEqual, 10.0);
  for (auto arith : {Arithmetic::Float, Arithmetic::Rational}) {
    SolverOptions opts;
    opts.arithmetic = arith;
    auto sol = solve(lp, opts);
    REQUIRE(sol.status == Status::Optimal);
    // a = -2, c = -3, b = 4.
    CHECK(sol.objective == doctest::Approx(-9.0));
    CHECK(strong_duality_check(lp, sol).passed);
  }
}

TEST_CASE("Beale's cycling example terminates under Bland's rule") {
  // Classic degenerate instance on which Dantzig's rule with lowest-index ties cycles.
  LinearProgram lp(Sense::Maximize);
  std::size_t x[4];
  for (int j = 0; j < 4; ++j) x[j] = lp.add_variable("x" + std::to_string(j + 1));
  const double c[4] = {0.75, -150.0, 0.02, -6.0};
  for (int j = 0; j < 4; ++j) lp.set_objective(x[j], c[j]);
  lp.add_constraint("r1", {{x[0], 0.25}, {x[1], -60.0}, {x[2], -0.04}, {x[3], 9.0}},
                    Relation::LessEqual, 0.0);
  lp.add_constraint("r2", {{x[0], 0.5}, {x[1], -90.0}, {x[2], -0.02}, {x[3], 3.0}},
                    Relation::LessEqual, 0.0);
  lp.add_constraint("r3", {{x[2], 1.0}}, Relation::LessEqual, 1.0);
  for (auto arith : {Arithmetic::Float, Arithmetic::Rational}) {
    SolverOptions opts;
    opts.arithmetic = arith;
    auto sol = solve(lp, opts);
    REQUIRE(sol.status == Status::Optimal);
    CHECK(sol.objective == doctest::Approx(0.05));
    CHECK(sol.iterations < 50);
  }
}

TEST_CASE("exact mode returns rational optimum") {
  LinearProgram lp(Sense::Maximize);
  auto x = lp.add_variable("x");
  auto y = lp.add_variable("y");
  lp.set_objective(x, 1.0);
  lp.set_objective(y, 1.0);
  lp.add_constraint("a", {{x, 2.0}, {y, 1.0}}, Relation::LessEqual, 1.0);
  lp.add_constraint("b", {{x, 1.0}, {y, 2.0}}, Relation::LessEqual, 1.0);
  SolverOptions opts;
  opts.arithmetic = Arithmetic::Rational;
  auto sol = solve(lp, opts);
  REQUIRE(sol.exact);
  CHECK(sol.exact->objective == Rational(2, 3));
  CHECK(sol.exact->primal[0] == Rational(1, 3));
  CHECK(sol.exact->dual[0] == Rational(1, 3));
  auto rep = strong_duality_check(lp, sol);
  REQUIRE(rep.exact_gap);
  CHECK(*rep.exact_gap == 0);
}

namespace {

LinearProgram random_lp(std::mt19937_64& rng, std::size_t m, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.1, 1.0);
  std::uniform_int_distribution<int> rel(0, 2);
  LinearProgram lp(rng() % 2 ? Sense::Maximize : Sense::Minimize);
  std::vector<double> x0(n);
  for (std::size_t j = 0; j < n; ++j) {
    lp.add_variable("x" + std::to_string(j), 0.0, 5.0);
    lp.set_objective(j, u(rng));
    x0[j] = pos(rng) * 4.0;
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<Term> row;
    double act = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = u(rng);
      row.push_back({j, a});
      act += a * x0[j];
    }
    const int r = rel(rng);
    if (r == 0) lp.add_constraint("", row, Relation::LessEqual, act + pos(rng));
    if (r == 1) lp.add_constraint("", row, Relation::GreaterEqual, act - pos(rng));
    if (r == 2) lp.add_constraint("", row, Relation::Equal, act);
  }
  return lp;
}

}  // namespace

TEST_CASE("random dense 10x10 programs pass the duality check") {
  std::mt19937_64 rng(12345);
  int passed = 0;
  for (int k = 0; k < 100; ++k) {
    auto lp = random_lp(rng, 10, 10);
    auto sol = solve(lp);
    REQUIRE(sol.status == Status::Optimal);
    if (strong_duality_check(lp, sol).passed) ++passed;
    if (k < 10) {
      SolverOptions ex;
      ex.arithmetic = Arithmetic::Rational;
      auto exact = solve(lp, ex);
      CHECK(exact.objective == doctest::Approx(sol.objective).epsilon(1e-9));
      CHECK(*strong_duality_check(lp, exact).exact_gap == 0);
    }
  }
  CHECK(passed == 100);
}

TEST_CASE("weak duality on every exposed iterate") {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 20; ++k) {
    auto lp = random_lp(rng, 8, 12);
    SolverOptions opts;
    bool ok = true;
    opts.on_iterate = [&](const IterateInfo& it) {
      const double p = lp.objective_value(it.primal);
      const double d = dual_objective(lp, it.dual);
      if (lp.sense() == Sense::Maximize ? d < p - 1e-9 : d > p + 1e-9) ok = false;
    };
    auto sol = solve(lp, opts);
    REQUIRE(sol.status == Status::Optimal);
    CHECK(ok);
  }
}

TEST_CASE("identical models give identical bits") {
  std::mt19937_64 rng(7);
  auto lp = random_lp(rng, 12, 15);
  auto a = solve(lp);
  auto b = solve(lp);
  CHECK(a.iterations == b.iterations);
  CHECK(a.primal == b.primal);
  CHECK(a.dual == b.dual);
}

TEST_CASE("invalid models are rejected") {
  LinearProgram empty;
  CHECK_THROWS_AS(solve(empty), InvalidModel);
  LinearProgram lp;
  auto x = lp.add_variable("x", 1.0, 0.0);
  (void)x;
  CHECK_THROWS_AS(solve(lp), InvalidModel);
  LinearProgram nan;
  auto y = nan.add_variable("y");
  nan.add_constraint("c", {{y, std::nan("")}}, Relation::Equal, 0.0);
  CHECK_THROWS_AS(solve(nan), InvalidModel);
}

TEST_CASE("LP text export") {
  LinearProgram lp(Sense::Minimize);
  auto x = lp.add_variable("x", -kInf, kInf);
  auto y = lp.add_variable("y", 0.0, 2.0);
  lp.set_objective(x, 1.0);
  lp.set_objective(y, -3.0);
  lp.add_constraint("c1", {{x, 1.0}, {y, 1.0}}, Relation::GreaterEqual, 1.0);
  std::ostringstream os;
  write_lp_format(os, lp);
  const std::string s = os.str();
  CHECK(s.find("Minimize\n obj: 1 x - 3 y") != std::string::npos);
  CHECK(s.find(" c1: 1 x + 1 y >= 1") != std::string::npos);
  CHECK(s.find(" x free") != std::string::npos);
  CHECK(s.find(" 0 <= y <= 2") != std::string::npos);
}
