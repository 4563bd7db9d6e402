#include "motlab/lp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace motlab::lp {

std::string to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
  }
  return "?";
}

std::string to_string(Relation r) {
  switch (r) {
    case Relation::LessEqual: return "<=";
    case Relation::Equal: return "=";
    case Relation::GreaterEqual: return ">=";
  }
  return "?";
}

std::size_t LinearProgram::add_variable(std::string name, double lower, double upper) {
  vars_.push_back({std::move(name), lower, upper});
  obj_.push_back(0.0);
  return vars_.size() - 1;
}

std::size_t LinearProgram::add_constraint(std::string name, std::vector<Term> terms, Relation rel,
                                          double rhs) {
  rows_.push_back({std::move(name), std::move(terms), rel, rhs});
  return rows_.size() - 1;
}

void LinearProgram::set_objective(std::size_t var, double coef) { obj_.at(var) = coef; }
void LinearProgram::add_objective(std::size_t var, double coef) { obj_.at(var) += coef; }

void LinearProgram::validate() const {
  if (vars_.empty()) throw InvalidModel("linear program has no variables");
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    const auto& v = vars_[j];
    if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower == kInf || v.upper == -kInf ||
        v.lower > v.upper)
      throw InvalidModel("variable '" + v.name + "' has inconsistent bounds");
    if (!std::isfinite(obj_[j])) throw InvalidModel("non-finite objective coefficient");
  }
  for (const auto& r : rows_) {
    if (!std::isfinite(r.rhs)) throw InvalidModel("constraint '" + r.name + "' has non-finite rhs");
    for (const auto& t : r.terms) {
      if (t.var >= vars_.size())
        throw InvalidModel("constraint '" + r.name + "' references unknown variable");
      if (!std::isfinite(t.coef))
        throw InvalidModel("constraint '" + r.name + "' has non-finite coefficient");
    }
  }
}

double LinearProgram::objective_value(const std::vector<double>& x) const {
  double s = 0.0;
  for (std::size_t j = 0; j < obj_.size(); ++j) s += obj_[j] * x[j];
  return s;
}

double LinearProgram::row_activity(std::size_t i, const std::vector<double>& x) const {
  double s = 0.0;
  for (const auto& t : rows_[i].terms) s += t.coef * x[t.var];
  return s;
}

namespace {

template <class T>
struct Arith;

template <>
struct Arith<double> {
  static double from(double x) { return x; }
  static double to_d(double x) { return x; }
  static bool is_zero(double x) { return x == 0.0; }
  static Rational exact(double x) { return to_rational(x); }
};

template <>
struct Arith<Rational> {
  static Rational from(double x) { return to_rational(x); }
  static double to_d(const Rational& x) { return x.get_d(); }
  static bool is_zero(const Rational& x) { return sgn(x) == 0; }
  static Rational exact(const Rational& x) { return x; }
};

enum class ColKind { Shift, Mirror, Split };

constexpr double kHarris = 1e-9;

struct ColumnMap {
  ColKind kind;
  std::size_t col;
  std::size_t col2;  // Split only
};

// Equality standard form: max c'x  s.t.  A x = b,  x >= 0,  b >= 0.
template <class T>
struct StandardForm {
  std::size_t m = 0;  // rows
  std::size_t n = 0;  // structural + slack columns
  std::vector<T> A;   // m x n row-major
  std::vector<T> b;
  std::vector<T> c;
  std::vector<int> row_sign;         // +1/-1 flip applied to make b >= 0
  std::vector<ColumnMap> var_map;    // per user variable
  std::size_t user_rows = 0;
  T& a(std::size_t i, std::size_t j) { return A[i * n + j]; }
};

template <class T>
StandardForm<T> build_standard_form(const LinearProgram& lp) {
  using Ar = Arith<T>;
  StandardForm<T> sf;
  const auto& vars = lp.variables();
  const auto& rows = lp.constraints();
  const double obj_sign = lp.sense() == Sense::Maximize ? 1.0 : -1.0;

  // Columns for user variables.
  std::size_t ncol = 0;
  std::vector<std::size_t> ub_vars;
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const auto& v = vars[j];
    if (std::isfinite(v.lower)) {
      sf.var_map.push_back({ColKind::Shift, ncol++, 0});
      if (std::isfinite(v.upper)) ub_vars.push_back(j);
    } else if (std::isfinite(v.upper)) {
      sf.var_map.push_back({ColKind::Mirror, ncol++, 0});
    } else {
      sf.var_map.push_back({ColKind::Split, ncol, ncol + 1});
      ncol += 2;
    }
  }
  sf.user_rows = rows.size();
  sf.m = rows.size() + ub_vars.size();
  std::size_t nslack = ub_vars.size();
  for (const auto& r : rows)
    if (r.rel != Relation::Equal) ++nslack;
  sf.n = ncol + nslack;
  sf.A.assign(sf.m * sf.n, T(0));
  sf.b.assign(sf.m, T(0));
  sf.c.assign(sf.n, T(0));
  sf.row_sign.assign(sf.m, 1);

  for (std::size_t j = 0; j < vars.size(); ++j) {
    const T cj = Ar::from(obj_sign * lp.objective()[j]);
    const auto& mp = sf.var_map[j];
    switch (mp.kind) {
      case ColKind::Shift: sf.c[mp.col] = cj; break;
      case ColKind::Mirror: sf.c[mp.col] = -cj; break;
      case ColKind::Split:
        sf.c[mp.col] = cj;
        sf.c[mp.col2] = -cj;
        break;
    }
  }

  std::size_t slack = ncol;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    T rhs = Ar::from(rows[i].rhs);
    for (const auto& t : rows[i].terms) {
      const T coef = Ar::from(t.coef);
      const auto& v = vars[t.var];
      const auto& mp = sf.var_map[t.var];
      switch (mp.kind) {
        case ColKind::Shift:
          sf.a(i, mp.col) += coef;
          rhs -= coef * Ar::from(v.lower);
          break;
        case ColKind::Mirror:
          sf.a(i, mp.col) -= coef;
          rhs -= coef * Ar::from(v.upper);
          break;
        case ColKind::Split:
          sf.a(i, mp.col) += coef;
          sf.a(i, mp.col2) -= coef;
          break;
      }
    }
    if (rows[i].rel == Relation::LessEqual) sf.a(i, slack++) = T(1);
    if (rows[i].rel == Relation::GreaterEqual) sf.a(i, slack++) = T(-1);
    sf.b[i] = rhs;
  }
  for (std::size_t k = 0; k < ub_vars.size(); ++k) {
    const std::size_t i = rows.size() + k;
    const auto& v = vars[ub_vars[k]];
    sf.a(i, sf.var_map[ub_vars[k]].col) = T(1);
    sf.a(i, slack++) = T(1);
    sf.b[i] = Ar::from(v.upper) - Ar::from(v.lower);
  }
  for (std::size_t i = 0; i < sf.m; ++i) {
    if (sf.b[i] < 0) {
      sf.row_sign[i] = -1;
      sf.b[i] = -sf.b[i];
      for (std::size_t j = 0; j < sf.n; ++j) sf.a(i, j) = -sf.a(i, j);
    }
  }
  return sf;
}

template <class T>
struct SolveOutcome {
  Status status = Status::Infeasible;
  std::vector<T> x;        // internal columns (size n)
  std::vector<T> y;        // internal rows (optimal duals, or phase-1 duals)
  std::vector<T> ray;      // internal columns (unbounded)
  std::size_t iterations = 0;
  std::vector<std::size_t> basis;
};

template <class T>
class Tableau {
 public:
  Tableau(const StandardForm<T>& sf, const SolverOptions& opts)
      : sf_(sf), opts_(opts), m_(sf.m), n_(sf.n), N_(sf.n + sf.m), w_(N_ + 1) {
    T_.assign(m_ * w_, T(0));
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) at(i, j) = sf.A[i * n_ + j];
      at(i, n_ + i) = T(1);
      at(i, N_) = sf.b[i];
    }
    basis_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) basis_[i] = n_ + i;
    d_.assign(w_, T(0));
    if constexpr (std::is_same_v<T, double>) {
      double cmax = 0.0;
      for (const auto& v : sf.c) cmax = std::max(cmax, std::abs(v));
      cost_tol_ = 1e-10 * (1.0 + cmax);
      piv_tol_ = opts.pivot_tolerance;
    }
    max_iter_ = opts.max_iterations ? opts.max_iterations : 200 * (m_ + N_) + 1000;
  }

  SolveOutcome<T> run() {
    SolveOutcome<T> out;
    // Phase 1: maximize -sum(artificials).
    for (std::size_t j = 0; j < w_; ++j) d_[j] = T(0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) d_[j] += at(i, j);
      d_[N_] += at(i, N_);  // -z = sum b
    }
    phase_ = 1;
    if (iterate(out) != IterResult::Optimal)
      throw NumericalError("phase 1 did not terminate at an optimum");
    // Phase-1 optimum is -d_[N_]... objective z = -sum a, and d_[N_] holds -z = sum a.
    if (infeasible_after_phase1()) {
      out.status = Status::Infeasible;
      out.y.resize(m_);
      // y_r = c_art - d_art = -1 - d_art
      for (std::size_t r = 0; r < m_; ++r) out.y[r] = T(-1) - d_[n_ + r];
      out.iterations = iterations_;
      return out;
    }
    drive_out_artificials();

    // Phase 2.
    phase_ = 2;
    for (std::size_t j = 0; j < w_; ++j) d_[j] = T(0);
    for (std::size_t j = 0; j < n_; ++j) d_[j] = sf_.c[j];
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t bj = basis_[i];
      if (bj >= n_) continue;
      const T& cb = sf_.c[bj];
      if (Arith<T>::is_zero(cb)) continue;
      for (std::size_t j = 0; j < w_; ++j) {
        if (!Arith<T>::is_zero(at(i, j))) d_[j] -= cb * at(i, j);
      }
    }
    const IterResult r = iterate(out);
    out.iterations = iterations_;
    out.basis = basis_;
    if (r == IterResult::Unbounded) {
      out.status = Status::Unbounded;
      out.ray.assign(n_, T(0));
      out.ray[unbounded_col_] = T(1);
      for (std::size_t i = 0; i < m_; ++i)
        if (basis_[i] < n_) out.ray[basis_[i]] = -at(i, unbounded_col_);
      return out;
    }
    out.status = Status::Optimal;
    extract_primal_dual(out.x, out.y);
    return out;
  }

  // Primal x (internal columns) and duals y (internal rows) of the current basis.
  void extract_primal_dual(std::vector<T>& x, std::vector<T>& y) const {
    x.assign(n_, T(0));
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] < n_) x[basis_[i]] = at(i, N_);
    y.assign(m_, T(0));
    for (std::size_t r = 0; r < m_; ++r) y[r] = -d_[n_ + r];
  }

  const std::vector<std::size_t>& basis() const { return basis_; }

 private:
  enum class IterResult { Optimal, Unbounded };

  T& at(std::size_t i, std::size_t j) { return T_[i * w_ + j]; }
  const T& at(std::size_t i, std::size_t j) const { return T_[i * w_ + j]; }

  bool positive_cost(const T& v) const {
    if constexpr (std::is_same_v<T, double>) return v > cost_tol_;
    else return sgn(v) > 0;
  }
  bool positive_pivot(const T& v) const {
    if constexpr (std::is_same_v<T, double>) return v > piv_tol_;
    else return sgn(v) > 0;
  }
  bool nonzero_pivot(const T& v) const {
    if constexpr (std::is_same_v<T, double>) return std::abs(v) > piv_tol_;
    else return sgn(v) != 0;
  }

  bool infeasible_after_phase1() const {
    // d_[N_] = -z where z = -sum(artificials) at the optimum.
    if constexpr (std::is_same_v<T, double>) {
      double bmax = 0.0;
      for (const auto& v : sf_.b) bmax = std::max(bmax, std::abs(v));
      return d_[N_] > tol::kFeasibility * (1.0 + bmax);
    } else {
      return sgn(d_[N_]) > 0;
    }
  }

  void drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      if constexpr (std::is_same_v<T, double>) {
        // Largest available pivot; the artificial sits at zero.
        std::size_t jb = n_;
        for (std::size_t j = 0; j < n_; ++j)
          if (nonzero_pivot(at(r, j)) && (jb == n_ || std::abs(at(r, j)) > std::abs(at(r, jb)))) jb = j;
        if (jb < n_) {
          at(r, N_) = 0.0;
          pivot(r, jb);
        }
        continue;
      }
      for (std::size_t j = 0; j < n_; ++j) {
        if (nonzero_pivot(at(r, j))) {
          pivot(r, j);
          break;
        }
      }
      // Otherwise the row is redundant; its artificial stays basic at zero.
    }
  }

  std::size_t choose_entering() const {
    const std::size_t limit = phase_ == 1 ? N_ : n_;
    std::size_t best = limit;
    if (opts_.pivot == PivotRule::Bland) {
      for (std::size_t j = 0; j < limit; ++j)
        if (positive_cost(d_[j])) return j;
      return limit;
    }
    for (std::size_t j = 0; j < limit; ++j) {
      if (!positive_cost(d_[j])) continue;
      if (best == limit || d_[j] > d_[best]) best = j;
    }
    return best;
  }

  // Minimum ratio test. Exact: ties go to the smallest basic index (Bland).
  // Float: Harris two-pass test, taking the largest pivot among rows whose
  // ratio is within the feasibility tolerance of the minimum.
  std::size_t choose_leaving(std::size_t j) const {
    std::size_t best = m_;
    if constexpr (std::is_same_v<T, double>) {
      // A leftover artificial must stay at zero, whatever the pivot's sign.
      if (phase_ == 2)
        for (std::size_t i = 0; i < m_; ++i)
          if (basis_[i] >= n_ && nonzero_pivot(at(i, j))) return i;
      double theta = kInf;
      for (std::size_t i = 0; i < m_; ++i)
        if (positive_pivot(at(i, j))) theta = std::min(theta, (std::max(0.0, at(i, N_)) + kHarris) / at(i, j));
      for (std::size_t i = 0; i < m_; ++i) {
        if (!positive_pivot(at(i, j)) || std::max(0.0, at(i, N_)) / at(i, j) > theta) continue;
        if (best == m_ || at(i, j) > at(best, j) || (at(i, j) == at(best, j) && basis_[i] < basis_[best])) best = i;
      }
      return best;
    } else {
      for (std::size_t i = 0; i < m_; ++i) {
        if (!positive_pivot(at(i, j))) continue;
        if (best == m_) {
          best = i;
          continue;
        }
        // Compare rhs_i / a_ij with rhs_best / a_best,j without dividing.
        const T lhs = at(i, N_) * at(best, j);
        const T rhs = at(best, N_) * at(i, j);
        if (lhs < rhs || (lhs == rhs && basis_[i] < basis_[best])) best = i;
      }
      return best;
    }
  }

  void pivot(std::size_t r, std::size_t j) {
    T* row_r = &T_[r * w_];
    const T p = row_r[j];
    for (std::size_t k = 0; k < w_; ++k)
      if (!Arith<T>::is_zero(row_r[k])) row_r[k] /= p;
    row_r[j] = T(1);
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      T* row_i = &T_[i * w_];
      if (Arith<T>::is_zero(row_i[j])) continue;
      const T f = row_i[j];
      eliminate(row_i, row_r, f);
      row_i[j] = T(0);
    }
    if (!Arith<T>::is_zero(d_[j])) {
      const T f = d_[j];
      eliminate(d_.data(), row_r, f);
      d_[j] = T(0);
    }
    if constexpr (std::is_same_v<T, double>) {
      for (std::size_t i = 0; i < m_; ++i) {
        double& v = T_[i * w_ + N_];
        if (v < 0.0 && v > -2.0 * kHarris) v = 0.0;
      }
    }
    basis_[r] = j;
  }

  // Rebuilds the tableau and reduced costs from the original data for the
  // current basis, discarding accumulated rounding. Skipped if B is singular.
  void reinvert() {
    since_reinvert_ = 0;
    const auto m = static_cast<Eigen::Index>(m_);
    Eigen::MatrixXd B(m, m), M = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(w_));
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) M(i, j) = sf_.A[i * n_ + j];
      M(i, n_ + i) = 1.0;
      M(i, N_) = sf_.b[i];
    }
    for (std::size_t k = 0; k < m_; ++k) B.col(k) = M.col(basis_[k]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (!lu.isInvertible()) return;
    const Eigen::MatrixXd X = lu.solve(M);
    if (!X.allFinite()) return;
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < w_; ++j) {
        double v = X(i, j);
        if (std::abs(v) < 1e-14) v = 0.0;
        at(i, j) = v;
      }
    for (std::size_t i = 0; i < m_; ++i) {
      at(i, basis_[i]) = 1.0;
      if (at(i, N_) < 0.0 && at(i, N_) > -1e-9) at(i, N_) = 0.0;
    }
    auto cost = [&](std::size_t j) {
      if (j >= N_) return 0.0;
      if (phase_ == 1) return j < n_ ? 0.0 : -1.0;
      return j < n_ ? sf_.c[j] : 0.0;
    };
    for (std::size_t j = 0; j < w_; ++j) {
      double v = cost(j);
      for (std::size_t i = 0; i < m_; ++i) v -= cost(basis_[i]) * at(i, j);
      d_[j] = v;
    }
    for (std::size_t i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
  }

  void eliminate(T* dst, const T* src, const T& f) {
    for (std::size_t k = 0; k < w_; ++k) {
      if (Arith<T>::is_zero(src[k])) continue;
      dst[k] -= f * src[k];
    }
  }

  IterResult iterate(SolveOutcome<T>& out) {
    (void)out;
    while (true) {
      const std::size_t j = choose_entering();
      const std::size_t limit = phase_ == 1 ? N_ : n_;
      if (j == limit) return IterResult::Optimal;
      const std::size_t r = choose_leaving(j);
      if (r == m_) {
        if (phase_ == 1) throw NumericalError("phase 1 reported unbounded");
        unbounded_col_ = j;
        return IterResult::Unbounded;
      }
      if constexpr (std::is_same_v<T, double>) {
        if (phase_ == 2 && basis_[r] >= n_) at(r, N_) = 0.0;
      }
      pivot(r, j);
      if constexpr (std::is_same_v<T, double>) {
        if (++since_reinvert_ >= std::max<std::size_t>(50, m_)) reinvert();
      }
      if (++iterations_ > max_iter_)
        throw NumericalError("simplex iteration limit exceeded (" + std::to_string(max_iter_) + ")");
      if (phase_ == 2 && on_iterate_) on_iterate_(*this);
    }
  }

 public:
  std::function<void(const Tableau&)> on_iterate_;
  std::size_t iterations() const { return iterations_; }

 private:
  const StandardForm<T>& sf_;
  const SolverOptions& opts_;
  std::size_t m_, n_, N_, w_;
  std::vector<T> T_;
  std::vector<T> d_;
  std::vector<std::size_t> basis_;
  int phase_ = 1;
  std::size_t iterations_ = 0;
  std::size_t max_iter_ = 0;
  std::size_t since_reinvert_ = 0;
  std::size_t unbounded_col_ = 0;
  double cost_tol_ = 0.0;
  double piv_tol_ = 0.0;
};

// Re-solves B x_B = b and B'y = c_B from the original data for the final basis.
void refine_double(const StandardForm<double>& sf, const std::vector<std::size_t>& basis,
                   std::vector<double>& x, std::vector<double>& y) {
  const std::size_t m = sf.m;
  if (m == 0) return;
  Eigen::MatrixXd B(m, m);
  Eigen::VectorXd cb(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t j = basis[k];
    for (std::size_t i = 0; i < m; ++i) B(i, k) = j < sf.n ? sf.A[i * sf.n + j] : (j - sf.n == i ? 1.0 : 0.0);
    cb(k) = j < sf.n ? sf.c[j] : 0.0;
  }
  Eigen::Map<const Eigen::VectorXd> b(sf.b.data(), m);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  const Eigen::VectorXd xb = lu.solve(b);
  const Eigen::VectorXd yy = lu.transpose().solve(cb);
  if (!xb.allFinite() || !yy.allFinite()) return;
  // Keep whichever of the tableau and refined values fits its system better.
  Eigen::VectorXd xt(m), yt = Eigen::Map<const Eigen::VectorXd>(y.data(), m);
  for (std::size_t k = 0; k < m; ++k) xt(k) = basis[k] < sf.n ? x[basis[k]] : 0.0;
  auto err = [](const Eigen::VectorXd& r) { return r.lpNorm<Eigen::Infinity>(); };
  if (err(B * xb - b) <= err(B * xt - b)) {
    std::vector<double> xr(sf.n, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      if (basis[k] >= sf.n) continue;
      double v = xb(k);
      if (v < 0.0 && v > -1e-9) v = 0.0;
      xr[basis[k]] = v;
    }
    x = std::move(xr);
  }
  if (err(B.transpose() * yy - cb) <= err(B.transpose() * yt - cb)) y.assign(yy.data(), yy.data() + m);
}

template <class T>
std::vector<T> map_primal(const LinearProgram& lp, const StandardForm<T>& sf, const std::vector<T>& x) {
  using Ar = Arith<T>;
  std::vector<T> out(lp.num_variables(), T(0));
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto& mp = sf.var_map[j];
    const auto& v = lp.variable(j);
    switch (mp.kind) {
      case ColKind::Shift: out[j] = Ar::from(v.lower) + x[mp.col]; break;
      case ColKind::Mirror: out[j] = Ar::from(v.upper) - x[mp.col]; break;
      case ColKind::Split: out[j] = x[mp.col] - x[mp.col2]; break;
    }
  }
  return out;
}

template <class T>
std::vector<T> map_direction(const LinearProgram& lp, const StandardForm<T>& sf, const std::vector<T>& dx) {
  std::vector<T> out(lp.num_variables(), T(0));
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto& mp = sf.var_map[j];
    switch (mp.kind) {
      case ColKind::Shift: out[j] = dx[mp.col]; break;
      case ColKind::Mirror: out[j] = -dx[mp.col]; break;
      case ColKind::Split: out[j] = dx[mp.col] - dx[mp.col2]; break;
    }
  }
  return out;
}

template <class T>
std::vector<T> map_dual(const LinearProgram& lp, const StandardForm<T>& sf, const std::vector<T>& y) {
  const int s = lp.sense() == Sense::Maximize ? 1 : -1;
  std::vector<T> out(lp.num_constraints(), T(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(s * sf.row_sign[i]) * y[i];
  return out;
}

template <class T>
std::vector<double> as_double(const std::vector<T>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = Arith<T>::to_d(v[i]);
  return out;
}

// sup over x_j in [l, u] of coef * x_j (for min problems pass the negated coef).
double box_sup(double coef, double l, double u) {
  if (coef > 0.0) return u == kInf ? kInf : coef * u;
  if (coef < 0.0) return l == -kInf ? kInf : coef * l;
  return 0.0;
}

Residuals compute_residuals(const LinearProgram& lp, const std::vector<double>& x,
                            const std::vector<double>& y) {
  Residuals res;
  const bool maximize = lp.sense() == Sense::Maximize;
  const auto& rows = lp.constraints();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double act = lp.row_activity(i, x);
    const double slack = act - rows[i].rhs;
    double viol = 0.0;
    switch (rows[i].rel) {
      case Relation::LessEqual: viol = positive_part(slack); break;
      case Relation::GreaterEqual: viol = positive_part(-slack); break;
      case Relation::Equal: viol = std::abs(slack); break;
    }
    res.primal = std::max(res.primal, viol);
    // Dual sign: max => y>=0 on <=, y<=0 on >=; min flips.
    double sign_viol = 0.0;
    const double yy = maximize ? y[i] : -y[i];
    if (rows[i].rel == Relation::LessEqual) sign_viol = positive_part(-yy);
    if (rows[i].rel == Relation::GreaterEqual) sign_viol = positive_part(yy);
    res.dual = std::max(res.dual, sign_viol);
    res.complementarity += std::abs(y[i]) * std::abs(slack);
  }
  std::vector<double> reduced(lp.objective());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& t : rows[i].terms) reduced[t.var] -= t.coef * y[i];
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const auto& v = lp.variable(j);
    res.primal = std::max(res.primal, positive_part(v.lower - x[j]));
    res.primal = std::max(res.primal, positive_part(x[j] - v.upper));
    const double dj = maximize ? reduced[j] : -reduced[j];
    if (dj > 0.0) {
      if (v.upper == kInf) res.dual = std::max(res.dual, dj);
      else res.complementarity += dj * std::abs(v.upper - x[j]);
    } else if (dj < 0.0) {
      if (v.lower == -kInf) res.dual = std::max(res.dual, -dj);
      else res.complementarity += -dj * std::abs(x[j] - v.lower);
    }
  }
  const double dobj = dual_objective(lp, y);
  res.gap = std::abs(dobj - lp.objective_value(x));
  return res;
}

template <class T>
LpSolution solve_impl(const LinearProgram& lp, const SolverOptions& opts) {
  StandardForm<T> sf = build_standard_form<T>(lp);
  Tableau<T> tab(sf, opts);
  if (opts.on_iterate) {
    tab.on_iterate_ = [&](const Tableau<T>& t) {
      std::vector<T> x, y;
      t.extract_primal_dual(x, y);
      IterateInfo info{2, t.iterations(), as_double(map_primal(lp, sf, x)),
                       as_double(map_dual(lp, sf, y))};
      opts.on_iterate(info);
    };
  }
  SolveOutcome<T> out = tab.run();
  LpSolution sol;
  sol.status = out.status;
  sol.iterations = out.iterations;
  if (out.status == Status::Infeasible) {
    // w_i = -s_i y_i restricted to user rows.
    sol.farkas.resize(lp.num_constraints());
    for (std::size_t i = 0; i < sol.farkas.size(); ++i)
      sol.farkas[i] = Arith<T>::to_d(T(-sf.row_sign[i]) * out.y[i]);
    return sol;
  }
  if (out.status == Status::Unbounded) {
    sol.ray = as_double(map_direction(lp, sf, out.ray));
    return sol;
  }
  if constexpr (std::is_same_v<T, double>) {
    refine_double(sf, out.basis, out.x, out.y);
  }
  const std::vector<T> xu = map_primal(lp, sf, out.x);
  const std::vector<T> yu = map_dual(lp, sf, out.y);
  sol.primal = as_double(xu);
  sol.dual = as_double(yu);
  sol.objective = lp.objective_value(sol.primal);
  if constexpr (std::is_same_v<T, Rational>) {
    ExactSolution ex;
    ex.primal = xu;
    ex.dual = yu;
    ex.objective = 0;
    for (std::size_t j = 0; j < xu.size(); ++j) ex.objective += to_rational(lp.objective()[j]) * xu[j];
    sol.objective = ex.objective.get_d();
    sol.exact = std::move(ex);
  }
  sol.residuals = compute_residuals(lp, sol.primal, sol.dual);
  if constexpr (std::is_same_v<T, double>) {
    double bmax = 0.0;
    for (const auto& r : lp.constraints()) bmax = std::max(bmax, std::abs(r.rhs));
    const auto& res = sol.residuals;
    if (!(res.primal <= tol::kFeasibility * (1.0 + bmax)) || !(res.dual <= tol::kFeasibility) ||
        !(res.gap <= tol::kOptimality * (1.0 + std::abs(sol.objective)))) {
      std::ostringstream msg;
      msg << std::setprecision(3) << "simplex could not certify optimum: primal residual "
          << res.primal << ", dual residual " << res.dual << ", gap " << res.gap;
      throw NumericalError(msg.str());
    }
  }
  return sol;
}

}  // namespace

LpSolution solve(const LinearProgram& lp, const SolverOptions& opts) {
  lp.validate();
  if (opts.arithmetic == Arithmetic::Rational) return solve_impl<Rational>(lp, opts);
  try {
    return solve_impl<double>(lp, opts);
  } catch (const NumericalError&) {
    // One retry under the other rule; rounding trouble rarely follows both pivot paths.
    SolverOptions alt = opts;
    alt.pivot = opts.pivot == PivotRule::Bland ? PivotRule::Dantzig : PivotRule::Bland;
    try {
      return solve_impl<double>(lp, alt);
    } catch (const NumericalError&) {
    }
    throw;
  }
}

double dual_objective(const LinearProgram& lp, const std::vector<double>& y) {
  const bool maximize = lp.sense() == Sense::Maximize;
  double val = 0.0;
  const auto& rows = lp.constraints();
  std::vector<double> reduced(lp.objective());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    // A multiplier of the wrong sign makes the Lagrangian unbounded over the slack.
    const double yy = maximize ? y[i] : -y[i];
    if ((rows[i].rel == Relation::LessEqual && yy < -tol::kFeasibility) ||
        (rows[i].rel == Relation::GreaterEqual && yy > tol::kFeasibility))
      return maximize ? kInf : -kInf;
    val += rows[i].rhs * y[i];
    for (const auto& t : rows[i].terms) reduced[t.var] -= t.coef * y[i];
  }
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const auto& v = lp.variable(j);
    // max: + sup (d_j x_j);  min: + inf (d_j x_j) = - sup(-d_j x_j)
    // Reduced costs within tolerance of zero do not open an infinite direction.
    double dj = reduced[j];
    if (std::abs(dj) <= tol::kFeasibility && ((dj > 0.0) == maximize ? v.upper == kInf : v.lower == -kInf))
      dj = 0.0;
    const double s = maximize ? box_sup(dj, v.lower, v.upper) : -box_sup(-dj, v.lower, v.upper);
    val += s;
  }
  return val;
}

double farkas_margin(const LinearProgram& lp, const std::vector<double>& w) {
  const auto& rows = lp.constraints();
  if (w.size() != rows.size()) return -kInf;
  std::vector<double> coef(lp.num_variables(), 0.0);
  double wb = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].rel == Relation::LessEqual && w[i] > 0.0) return -kInf;
    if (rows[i].rel == Relation::GreaterEqual && w[i] < 0.0) return -kInf;
    wb += w[i] * rows[i].rhs;
    for (const auto& t : rows[i].terms) coef[t.var] += w[i] * t.coef;
  }
  double sup = 0.0;
  for (std::size_t j = 0; j < coef.size(); ++j) {
    const auto& v = lp.variable(j);
    sup += box_sup(coef[j], v.lower, v.upper);
  }
  return wb - sup;
}

DualityReport strong_duality_check(const LinearProgram& lp, const LpSolution& sol) {
  DualityReport rep;
  if (sol.status != Status::Optimal) return rep;
  rep.primal_objective = lp.objective_value(sol.primal);
  rep.dual_objective = dual_objective(lp, sol.dual);
  const Residuals res = compute_residuals(lp, sol.primal, sol.dual);
  rep.gap = std::abs(rep.primal_objective - rep.dual_objective);
  rep.primal_infeasibility = res.primal;
  rep.dual_infeasibility = res.dual;
  rep.complementarity = res.complementarity;
  if (sol.exact) {
    // Exact box-form dual objective.
    const bool maximize = lp.sense() == Sense::Maximize;
    const auto& y = sol.exact->dual;
    Rational dual = 0;
    std::vector<Rational> reduced(lp.num_variables());
    for (std::size_t j = 0; j < reduced.size(); ++j) reduced[j] = to_rational(lp.objective()[j]);
    for (std::size_t i = 0; i < lp.num_constraints(); ++i) {
      const auto& r = lp.constraint(i);
      dual += to_rational(r.rhs) * y[i];
      for (const auto& t : r.terms) reduced[t.var] -= to_rational(t.coef) * y[i];
    }
    bool finite = true;
    for (std::size_t j = 0; j < reduced.size(); ++j) {
      const auto& v = lp.variable(j);
      const int s = sgn(reduced[j]) * (maximize ? 1 : -1);
      if (s > 0) {
        if (v.upper == kInf) finite = false;
        else dual += reduced[j] * to_rational(v.upper);
      } else if (s < 0) {
        if (v.lower == -kInf) finite = false;
        else dual += reduced[j] * to_rational(v.lower);
      }
    }
    if (finite) {
      Rational g = dual - sol.exact->objective;
      rep.exact_gap = abs(g);
    }
  }
  double bmax = 0.0;
  for (const auto& r : lp.constraints()) bmax = std::max(bmax, std::abs(r.rhs));
  rep.passed = rep.gap <= tol::kOptimality * (1.0 + std::abs(rep.primal_objective)) &&
               rep.primal_infeasibility <= tol::kFeasibility * (1.0 + bmax) &&
               rep.dual_infeasibility <= tol::kFeasibility &&
               rep.complementarity <= tol::kOptimality * (1.0 + std::abs(rep.primal_objective));
  if (rep.exact_gap && sgn(*rep.exact_gap) != 0) rep.passed = false;
  return rep;
}

void write_lp_format(std::ostream& os, const LinearProgram& lp) {
  auto name = [&](std::size_t j) {
    const auto& n = lp.variable(j).name;
    return n.empty() ? "x" + std::to_string(j) : n;
  };
  auto write_terms = [&](const std::vector<std::pair<std::size_t, double>>& terms) {
    bool first = true;
    for (const auto& [j, c] : terms) {
      if (c == 0.0) continue;
      if (!first || c < 0.0) os << (c < 0.0 ? " - " : " + ");
      os << std::abs(c) << ' ' << name(j);
      first = false;
    }
    if (first) os << "0 " << name(0);
  };
  os << std::setprecision(17);
  os << (lp.sense() == Sense::Maximize ? "Maximize" : "Minimize") << "\n obj: ";
  std::vector<std::pair<std::size_t, double>> obj;
  for (std::size_t j = 0; j < lp.num_variables(); ++j) obj.emplace_back(j, lp.objective()[j]);
  write_terms(obj);
  os << "\nSubject To\n";
  for (std::size_t i = 0; i < lp.num_constraints(); ++i) {
    const auto& r = lp.constraint(i);
    os << ' ' << (r.name.empty() ? "c" + std::to_string(i) : r.name) << ": ";
    std::vector<std::pair<std::size_t, double>> terms;
    for (const auto& t : r.terms) terms.emplace_back(t.var, t.coef);
    write_terms(terms);
    os << ' ' << to_string(r.rel) << ' ' << r.rhs << '\n';
  }
  os << "Bounds\n";
  for (std::size_t j = 0; j < lp.num_variables(); ++j) {
    const auto& v = lp.variable(j);
    if (v.lower == -kInf && v.upper == kInf) {
      os << ' ' << name(j) << " free\n";
    } else {
      os << ' ' << (v.lower == -kInf ? std::string("-inf") : (std::ostringstream() << std::setprecision(17) << v.lower).str())
         << " <= " << name(j) << " <= "
         << (v.upper == kInf ? std::string("+inf") : (std::ostringstream() << std::setprecision(17) << v.upper).str())
         << '\n';
    }
  }
  os << "End\n";
}

}  // namespace motlab::lp
