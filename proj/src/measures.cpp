#include "motlab/measures.hpp"

#include "motlab/lp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace motlab::measures {

DiscreteMeasure::DiscreteMeasure(std::size_t dim, std::vector<Point> points, std::vector<double> weights)
    : dim_(dim), points_(std::move(points)), weights_(std::move(weights)) {
  if (dim_ == 0) throw InvalidMeasure("measure dimension must be positive");
  if (points_.empty()) throw InvalidMeasure("measure has no atoms");
  if (points_.size() != weights_.size()) throw InvalidMeasure("points and weights differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].size() != dim_) throw InvalidMeasure("atom of wrong dimension");
    for (double v : points_[i])
      if (!std::isfinite(v)) throw InvalidMeasure("non-finite atom");
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
      throw InvalidMeasure("weights must be positive");
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > tol::kWeightSum) {
    std::ostringstream msg;
    msg << "weights sum to " << std::setprecision(17) << total;
    throw InvalidMeasure(msg.str());
  }
  std::vector<const Point*> sorted;
  for (const auto& p : points_) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return *a < *b; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (*sorted[i] == *sorted[i - 1]) throw InvalidMeasure("repeated atom");
}

DiscreteMeasure DiscreteMeasure::dirac(Point x) {
  const std::size_t d = x.size();
  return DiscreteMeasure(d, {std::move(x)}, {1.0});
}

DiscreteMeasure DiscreteMeasure::aggregate(std::size_t dim, std::vector<Point> points,
                                           std::vector<double> weights) {
  std::map<Point, double> acc;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (weights[i] > 0.0) acc[points[i]] += weights[i];
  std::vector<Point> pts;
  std::vector<double> ws;
  for (auto& [p, w] : acc) {
    pts.push_back(p);
    ws.push_back(w);
  }
  return DiscreteMeasure(dim, std::move(pts), std::move(ws));
}

Point DiscreteMeasure::mean() const {
  Point m(dim_, 0.0);
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t k = 0; k < dim_; ++k) m[k] += weights_[i] * points_[i][k];
  return m;
}

double DiscreteMeasure::call(double strike, std::size_t k) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * positive_part(points_[i][k] - strike);
  return s;
}

double DiscreteMeasure::abs_moment(const Point& center) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weights_[i] * dist2(points_[i], center);
  return s;
}

double DiscreteMeasure::max_norm() const {
  double m = 0.0;
  for (const auto& p : points_) m = std::max(m, norm2(p));
  return m;
}

std::string OrderCertificate::describe() const {
  std::ostringstream os;
  os << std::setprecision(17);
  switch (kind) {
    case Kind::Holds: os << "holds"; break;
    case Kind::MeanMismatch: os << "violated: barycenters differ by " << excess; break;
    case Kind::Strike: os << "violated at K=" << strike << " (call excess " << excess << ")"; break;
    case Kind::Farkas: os << "violated: Strassen coupling LP infeasible (Farkas certificate)"; break;
  }
  return os.str();
}

namespace {

void require_same_dim(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (mu.dim() != nu.dim()) throw InvalidMeasure("dimension mismatch");
}

struct StrassenLp {
  lp::LinearProgram lp{lp::Sense::Minimize};
  std::vector<std::vector<std::size_t>> var;
};

StrassenLp build_strassen(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  StrassenLp s;
  const std::size_t I = mu.size(), J = nu.size(), d = mu.dim();
  s.var.assign(I, std::vector<std::size_t>(J));
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = 0; j < J; ++j) {
      s.var[i][j] = s.lp.add_variable("p_" + std::to_string(i) + "_" + std::to_string(j));
      s.lp.set_objective(s.var[i][j], dist2(mu.point(i), nu.point(j)));
    }
  for (std::size_t i = 0; i < I; ++i) {
    std::vector<lp::Term> row;
    for (std::size_t j = 0; j < J; ++j) row.push_back({s.var[i][j], 1.0});
    s.lp.add_constraint("mu_" + std::to_string(i), row, lp::Relation::Equal, mu.weight(i));
  }
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<lp::Term> row;
    for (std::size_t i = 0; i < I; ++i) row.push_back({s.var[i][j], 1.0});
    s.lp.add_constraint("nu_" + std::to_string(j), row, lp::Relation::Equal, nu.weight(j));
  }
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      std::vector<lp::Term> row;
      for (std::size_t j = 0; j < J; ++j) {
        const double c = nu.point(j)[k] - mu.point(i)[k];
        if (c != 0.0) row.push_back({s.var[i][j], c});
      }
      s.lp.add_constraint("bary_" + std::to_string(i) + "_" + std::to_string(k), row,
                          lp::Relation::Equal, 0.0);
    }
  return s;
}

bool means_match(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double* gap) {
  const Point a = mu.mean(), b = nu.mean();
  double g = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) g = std::max(g, std::abs(a[k] - b[k]));
  if (gap) *gap = g;
  return g <= tol::kMean;
}

}  // namespace

StrassenResult strassen_coupling(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_dim(mu, nu);
  StrassenLp s = build_strassen(mu, nu);
  const auto sol = lp::solve(s.lp);
  StrassenResult out;
  if (sol.status != lp::Status::Optimal) {
    out.farkas = sol.farkas;
    return out;
  }
  out.feasible = true;
  out.coupling.assign(mu.size(), std::vector<double>(nu.size(), 0.0));
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) out.coupling[i][j] = sol.primal[s.var[i][j]];
  return out;
}

bool strassen_feasible(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  return strassen_coupling(mu, nu).feasible;
}

OrderCertificate check_convex_order(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_dim(mu, nu);
  OrderCertificate cert;
  double gap = 0.0;
  if (!means_match(mu, nu, &gap)) {
    cert.kind = OrderCertificate::Kind::MeanMismatch;
    cert.excess = gap;
    return cert;
  }
  if (mu.dim() == 1) {
    std::vector<double> strikes;
    for (const auto& p : mu.points()) strikes.push_back(p[0]);
    for (const auto& p : nu.points()) strikes.push_back(p[0]);
    std::sort(strikes.begin(), strikes.end());
    for (double k : strikes) {
      const double excess = mu.call(k) - nu.call(k);
      if (excess > tol::kOrder) {
        cert.kind = OrderCertificate::Kind::Strike;
        cert.strike = k;
        cert.excess = excess;
        return cert;
      }
    }
    return cert;
  }
  const auto res = strassen_coupling(mu, nu);
  if (!res.feasible) {
    cert.kind = OrderCertificate::Kind::Farkas;
    cert.farkas = res.farkas;
  }
  return cert;
}

double w1_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  require_same_dim(mu, nu);
  if (mu.dim() == 1) {
    // Integral of |F_mu - F_nu| over the merged support.
    std::vector<std::pair<double, double>> ev;
    for (std::size_t i = 0; i < mu.size(); ++i) ev.emplace_back(mu.point(i)[0], mu.weight(i));
    for (std::size_t j = 0; j < nu.size(); ++j) ev.emplace_back(nu.point(j)[0], -nu.weight(j));
    std::sort(ev.begin(), ev.end());
    double diff = 0.0, total = 0.0;
    for (std::size_t k = 0; k + 1 < ev.size(); ++k) {
      diff += ev[k].second;
      total += std::abs(diff) * (ev[k + 1].first - ev[k].first);
    }
    return total;
  }
  lp::LinearProgram prog(lp::Sense::Minimize);
  std::vector<std::vector<std::size_t>> var(mu.size(), std::vector<std::size_t>(nu.size()));
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) {
      var[i][j] = prog.add_variable("");
      prog.set_objective(var[i][j], dist2(mu.point(i), nu.point(j)));
    }
  for (std::size_t i = 0; i < mu.size(); ++i) {
    std::vector<lp::Term> row;
    for (std::size_t j = 0; j < nu.size(); ++j) row.push_back({var[i][j], 1.0});
    prog.add_constraint("", row, lp::Relation::Equal, mu.weight(i));
  }
  for (std::size_t j = 0; j < nu.size(); ++j) {
    std::vector<lp::Term> row;
    for (std::size_t i = 0; i < mu.size(); ++i) row.push_back({var[i][j], 1.0});
    prog.add_constraint("", row, lp::Relation::Equal, nu.weight(j));
  }
  const auto sol = lp::solve(prog);
  return std::max(0.0, sol.objective);
}

Peacock::Peacock(std::vector<double> times, std::vector<DiscreteMeasure> laws)
    : times_(std::move(times)), laws_(std::move(laws)) {
  if (times_.empty() || times_.size() != laws_.size())
    throw PeacockError("peacock needs one law per time", 0, {});
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!(times_[i] >= 0.0 && times_[i] <= 1.0)) throw PeacockError("time outside [0,1]", i, {});
    if (i > 0 && !(times_[i] > times_[i - 1]))
      throw PeacockError("times must be strictly increasing", i, {});
    if (laws_[i].dim() != laws_[0].dim()) throw PeacockError("laws differ in dimension", i, {});
  }
  if (times_.back() != 1.0) throw PeacockError("last time must be 1", times_.size() - 1, {});
  for (std::size_t i = 1; i < laws_.size(); ++i) {
    double gap = 0.0;
    if (!means_match(laws_[0], laws_[i], &gap)) {
      OrderCertificate c;
      c.kind = OrderCertificate::Kind::MeanMismatch;
      c.excess = gap;
      throw PeacockError("law " + std::to_string(i) + " has a different barycenter", i, c);
    }
    auto cert = check_convex_order(laws_[i - 1], laws_[i]);
    if (!cert.holds())
      throw PeacockError("convex order fails between laws " + std::to_string(i - 1) + " and " +
                             std::to_string(i) + ": " + cert.describe(),
                         i, cert);
  }
}

Peacock close_peacock(const Peacock& p, const std::vector<double>& query_times) {
  std::vector<double> times = p.times();
  for (double q : query_times) {
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidMeasure("query time outside [0,1]");
    if (q > p.times().back()) throw InvalidMeasure("query time beyond last listed time");
    times.push_back(q);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<DiscreteMeasure> laws;
  for (double t : times) {
    const auto it = std::lower_bound(p.times().begin(), p.times().end(), t);
    laws.push_back(p.law(static_cast<std::size_t>(it - p.times().begin())));
  }
  return Peacock(std::move(times), std::move(laws));
}

DiscreteMeasure marginals_from_calls(const CallQuoteCurve& curve) {
  const auto& ks = curve.strikes;
  const auto& cs = curve.prices;
  if (ks.empty() || ks.size() != cs.size()) throw InvalidMeasure("quote curve needs strikes and prices");
  if (!(curve.spot >= 0.0)) throw InvalidMeasure("spot must be nonnegative");
  std::vector<Rational> k, c;
  if (ks.front() > 0.0) {
    k.push_back(0);
    c.push_back(to_rational(curve.spot));
  } else if (ks.front() < 0.0) {
    throw InvalidMeasure("strikes must be nonnegative");
  } else if (std::abs(cs.front() - curve.spot) > 1e-9 * (1.0 + curve.spot)) {
    throw ArbitrageError("price at strike 0 differs from spot", {0.0});
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (i > 0 && !(ks[i] > ks[i - 1])) throw InvalidMeasure("strikes must be strictly increasing");
    if (!(cs[i] >= 0.0)) throw ArbitrageError("negative call price", {ks[i]});
    k.push_back(to_rational(ks[i]));
    c.push_back(to_rational(i == 0 && ks[0] == 0.0 ? curve.spot : cs[i]));
  }
  const std::size_t n = k.size();
  std::vector<Rational> slope(n);  // slope[i] on (k[i-1], k[i]); slope[0] = -1
  slope[0] = -1;
  for (std::size_t i = 1; i < n; ++i) slope[i] = (c[i] - c[i - 1]) / (k[i] - k[i - 1]);
  const Rational slack = to_rational(1e-12);
  for (std::size_t i = 1; i < n; ++i) {
    if (slope[i] > slack) throw ArbitrageError("call prices increase in strike", {to_double(k[i - 1]), to_double(k[i])});
    if (slope[i] < slope[i - 1] - slack) {
      std::vector<double> triple;
      if (i >= 2) triple.push_back(to_double(k[i - 2]));
      triple.push_back(to_double(k[i - 1]));
      triple.push_back(to_double(k[i]));
      throw ArbitrageError(i == 1 ? "call slope below -1" : "call prices not convex", triple);
    }
  }
  std::vector<Point> pts;
  std::vector<double> ws;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Rational m = slope[i + 1] - slope[i];
    if (m > slack) {
      pts.push_back({to_double(k[i])});
      ws.push_back(to_double(m));
    }
  }
  // Residual mass beyond the last strike: extend the last slope until the price is zero.
  const Rational rest = -slope[n - 1];
  if (c[n - 1] > slack) {
    if (sgn(rest) <= 0) throw ArbitrageError("positive price with flat tail", {to_double(k[n - 1])});
    pts.push_back({to_double(k[n - 1] + c[n - 1] / rest)});
    ws.push_back(to_double(rest));
  } else if (rest > slack) {
    pts.push_back({to_double(k[n - 1])});
    ws.push_back(to_double(rest));
  }
  return DiscreteMeasure::aggregate(1, std::move(pts), std::move(ws));
}

CallQuoteCurve calls_from_measure(const DiscreteMeasure& mu, const std::vector<double>& strikes,
                                  double maturity) {
  CallQuoteCurve c;
  c.maturity = maturity;
  c.strikes = strikes;
  c.spot = mu.mean()[0];
  for (double k : strikes) c.prices.push_back(mu.call(k));
  return c;
}

namespace {

struct Noise {
  std::vector<Point> offsets;
  std::vector<double> probs;
};

// Symmetric, mean-zero noise with E|Z| = scale.
Noise make_noise(std::size_t dim, double radius, std::uint64_t seed) {
  Noise z;
  if (radius == 0.0) {
    z.offsets.push_back(Point(dim, 0.0));
    z.probs.push_back(1.0);
    return z;
  }
  if (seed == 0) {
    Point e(dim, 0.0);
    e[0] = radius;
    z.offsets.push_back(e);
    e[0] = -radius;
    z.offsets.push_back(e);
    z.probs = {0.5, 0.5};
    return z;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.25, 1.0);
  std::normal_distribution<double> gauss;
  const int pairs = 1 + static_cast<int>(rng() % 3);
  std::vector<Point> dirs;
  std::vector<double> p;
  double mass = 0.0, first = 0.0;
  for (int j = 0; j < pairs; ++j) {
    Point dir(dim);
    double n = 0.0;
    do {
      for (auto& v : dir) v = dim == 1 ? 1.0 : gauss(rng);
      n = norm2(dir);
    } while (n == 0.0);
    const double a = unit(rng);
    for (auto& v : dir) v *= a / n;
    dirs.push_back(dir);
    p.push_back(unit(rng));
    mass += p.back();
    first += p.back() * a;
  }
  const double scale = radius * unit(rng) * mass / first;
  for (int j = 0; j < pairs; ++j) {
    Point plus(dim), minus(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      plus[k] = scale * dirs[j][k];
      minus[k] = -plus[k];
    }
    z.offsets.push_back(plus);
    z.offsets.push_back(minus);
    z.probs.push_back(0.5 * p[j] / mass);
    z.probs.push_back(0.5 * p[j] / mass);
  }
  return z;
}

DiscreteMeasure convolve(const DiscreteMeasure& m, const Noise& z) {
  std::vector<Point> pts;
  std::vector<double> ws;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < z.offsets.size(); ++j) {
      Point p = m.point(i);
      for (std::size_t k = 0; k < p.size(); ++k) p[k] += z.offsets[j][k];
      pts.push_back(std::move(p));
      ws.push_back(m.weight(i) * z.probs[j]);
    }
  return DiscreteMeasure::aggregate(m.dim(), std::move(pts), std::move(ws));
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t x = seed * 0x9e3779b97f4a7c15ULL + k + 1;
  x ^= x >> 31;
  x *= 0xbf58476d1ce4e5b9ULL;
  return x ^ (x >> 29);
}

}  // namespace

DiscreteMeasure perturb_in_w1(const DiscreteMeasure& m, double radius, std::uint64_t seed) {
  if (!(radius >= 0.0)) throw InvalidMeasure("radius must be nonnegative");
  if (radius == 0.0) return m;
  return convolve(m, make_noise(m.dim(), radius, seed));
}

std::string to_string(PerturbedPeacock::Status s) {
  switch (s) {
    case PerturbedPeacock::Status::Ok: return "ok";
    case PerturbedPeacock::Status::Repaired: return "repaired";
    case PerturbedPeacock::Status::Rejected: return "rejected";
  }
  return "?";
}

PerturbedPeacock perturb_peacock(const Peacock& p, double radius, std::uint64_t seed) {
  PerturbedPeacock out;
  if (radius == 0.0) {
    out.peacock = p;
    return out;
  }
  auto finish = [&](std::vector<DiscreteMeasure> laws) -> bool {
    try {
      Peacock q(p.times(), laws);
      out.w1 = 0.0;
      for (std::size_t i = 0; i < laws.size(); ++i)
        out.w1 = std::max(out.w1, w1_distance(p.law(i), laws[i]));
      out.peacock = std::move(q);
      return true;
    } catch (const PeacockError&) {
      return false;
    }
  };
  std::vector<DiscreteMeasure> laws{p.law(0)};
  for (std::size_t i = 1; i < p.size(); ++i)
    laws.push_back(perturb_in_w1(p.law(i), radius, seed == 0 ? 0 : mix(seed, i)));
  if (finish(laws)) return out;
  const Noise shared = make_noise(p.dim(), radius, seed);
  laws.assign(1, p.law(0));
  for (std::size_t i = 1; i < p.size(); ++i) laws.push_back(convolve(p.law(i), shared));
  out.status = finish(laws) ? PerturbedPeacock::Status::Repaired : PerturbedPeacock::Status::Rejected;
  return out;
}

}  // namespace motlab::measures
