#include "motlab/cli.hpp"

#include "motlab/lattice.hpp"
#include "motlab/lp.hpp"
#include "motlab/penalized.hpp"
#include "motlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

namespace motlab::cli {

namespace fs = std::filesystem;
using io::fmt;
using io::json;
using pathspace::Normalization;
using pathspace::Payoff;
using pathspace::StepPath;

namespace {

constexpr const char* kFixture = "fixture:";

bool is_fixture(const std::string& s) { return s.rfind(kFixture, 0) == 0; }

std::optional<double> penalty_of(const std::string& mode) {
  if (mode == "exact") return std::nullopt;
  if (mode.rfind("penalized:", 0) == 0) {
    const auto v = parse_doubles(mode.substr(10));
    if (v.size() == 1 && v[0] >= 0.0) return v[0];
  }
  throw ConfigError("--mode must be exact or penalized:<c> with c >= 0");
}

lp::Arithmetic arith_of(const RunConfig& cfg) {
  return cfg.arith == "rational" ? lp::Arithmetic::Rational : lp::Arithmetic::Float;
}

std::string load(RunConfig& cfg, const std::string& path, const std::string& role) {
  auto text = io::read_file(path);
  cfg.input_hashes[role] = io::sha256_hex(text);
  return text;
}

measures::Peacock load_peacock(RunConfig& cfg) {
  const auto j = io::parse(load(cfg, cfg.input, "input"), cfg.input);
  return io::build_peacock(io::is_quotes(j) ? io::calibrate(io::quotes_from_json(j)) : io::peacock_from_json(j));
}

std::pair<Payoff, json> load_payoff(RunConfig& cfg, const std::vector<double>& grid, std::size_t dim) {
  if (cfg.payoff.empty()) throw ConfigError("--payoff is required");
  auto j = io::parse(load(cfg, cfg.payoff, "payoff"), cfg.payoff);
  return {io::payoff_from_json(j, grid, dim), j};
}

Payoff normalized(const Payoff& xi, const Normalization& nm) {
  auto p = pathspace::custom(xi.grid, [xi, nm](const StepPath& w) { return nm.forward(xi(w)); }, xi.name, true);
  p.shift_slope = xi.shift_slope / (nm.hi - nm.lo);
  return p;
}

// All tuple paths through the supports, at most `cap`.
std::vector<StepPath> tuple_paths(const measures::Peacock& p, std::size_t cap) {
  std::vector<StepPath> out;
  std::vector<std::size_t> idx(p.size(), 0);
  for (;;) {
    std::vector<Point> vals;
    for (std::size_t i = 0; i < p.size(); ++i) vals.push_back(p.law(i).point(idx[i]));
    out.push_back(transport::tuple_path(p.times(), vals));
    if (out.size() >= cap) return out;
    std::size_t i = 0;
    for (; i < p.size(); ++i) {
      if (++idx[i] < p.law(i).size()) break;
      idx[i] = 0;
    }
    if (i == p.size()) return out;
  }
}

Normalization normalization_on(const Payoff& xi, const std::vector<StepPath>& paths) {
  std::vector<double> v;
  for (const auto& w : paths) v.push_back(xi(w));
  return dyadic_normalization(v);
}

void write_outputs(const RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& files) {
  if (cfg.out.empty()) return;
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw io::IoError("cannot create " + cfg.out + ": " + ec.message());
  io::write_file(fs::path(cfg.out) / "run_config.json", cfg.to_json().dump(2) + "\n");
  for (const auto& [name, text] : files) io::write_file(fs::path(cfg.out) / name, text);
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string s;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t k = 0; k < r.size(); ++k) s += (k ? "," : "") + r[k];
    s += "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---- validate ----

int cmd_validate(RunConfig& cfg, std::ostream& out) {
  const auto j = io::parse(load(cfg, cfg.input, "input"), cfg.input);
  io::RawPeacock raw;
  json report;
  if (io::is_quotes(j)) {
    const auto q = io::quotes_from_json(j);
    try {
      raw = io::calibrate(q);
    } catch (const measures::ArbitrageError& e) {
      std::string ks;
      for (double k : e.strikes) ks += (ks.empty() ? "" : " ") + fmt(k);
      out << "invalid: " << e.what() << " (strikes " << ks << ")\n";
      report = {{"valid", false}, {"reason", e.what()}, {"strikes", e.strikes}};
      write_outputs(cfg, {{"report.json", report.dump(2) + "\n"}});
      return kInvalid;
    }
    report["calibrated"] = io::to_json(raw);
  } else {
    raw = io::peacock_from_json(j);
  }
  try {
    const auto p = io::build_peacock(raw);
    out << "valid peacock: " << p.size() << " times, dim " << p.dim() << "\n";
    report["valid"] = true;
    write_outputs(cfg, {{"report.json", report.dump(2) + "\n"}});
    return kOk;
  } catch (const measures::PeacockError& e) {
    const auto& c = e.certificate;
    out << "invalid: " << e.what() << "\n";
    report["valid"] = false;
    report["reason"] = e.what();
    report["index"] = e.index;
    if (c.kind == measures::OrderCertificate::Kind::Strike) {
      out << "witness strike " << fmt(c.strike) << ", call excess " << fmt(c.excess) << "\n";
      report["strike"] = c.strike;
      report["excess"] = c.excess;
    } else if (!c.holds()) {
      out << "witness: " << c.describe() << "\n";
      report["witness"] = c.describe();
    }
    write_outputs(cfg, {{"report.json", report.dump(2) + "\n"}});
    return kInvalid;
  }
}

// ---- price ----

struct PriceSetup {
  measures::Peacock peacock;
  Payoff xi;
  json payoff_spec;
  transport::SolverConfig solver;
  std::vector<StepPath> corpus;
  Normalization nm;
};

PriceSetup price_setup(RunConfig& cfg) {
  PriceSetup s{load_peacock(cfg), {}, {}, {}, {}, {}};
  std::tie(s.xi, s.payoff_spec) = load_payoff(cfg, s.peacock.times(), s.peacock.dim());
  const auto pen = penalty_of(cfg.mode);
  s.solver.marginal.arithmetic = arith_of(cfg);
  if (!cfg.n.empty()) {
    lattice::LatticeParams lp;
    lp.n = static_cast<int>(cfg.n.front());
    lp.dim = s.peacock.dim();
    lp.grid = s.peacock.times();
    double R = 0.0;
    for (const auto& m : s.peacock.laws())
      for (const auto& x : m.points())
        for (double v : x) R = std::max(R, v);
    lp.R = std::max(1.0, std::ceil(R));
    lp.budget = cfg.budget;
    auto tree = std::make_shared<const lattice::LatticeTree>(lattice::enumerate_tree(lp));
    s.solver.lattice = true;
    s.solver.tree = tree;
    s.solver.lattice_opts.arithmetic = arith_of(cfg);
    if (pen) {
      s.solver.lattice_opts.mode = transport::MarginalMode::Penalized;
      s.solver.lattice_opts.penalty = *pen;
    }
    for (auto l : tree->leaves()) s.corpus.push_back(tree->path_to(l));
  } else {
    if (pen) throw ConfigError("penalized mode needs a lattice level (--n)");
    s.corpus = tuple_paths(s.peacock, 1u << 16);
  }
  s.nm = normalization_on(s.xi, s.corpus);
  cfg.normalization = s.nm;
  return s;
}

json side_json(const transport::PrimalResult& r, const transport::DualCertificate& cert, const Payoff& xin,
               const std::vector<StepPath>& corpus, const Normalization& nm, bool& verified) {
  json j;
  j["sense"] = transport::to_string(r.sense);
  j["value"] = nm.backward(r.value);
  if (r.exact_value) {
    const Rational v = to_rational(nm.lo) + *r.exact_value * (to_rational(nm.hi) - to_rational(nm.lo));
    j["exact_value"] = v.get_str();
  }
  j["plan"] = io::to_json(r.plan);
  j["dual"] = io::to_json(cert);
  std::vector<StepPath> paths = corpus;
  for (const auto& w : r.plan.paths) paths.push_back(w);
  const auto rep = transport::verify_superhedge(cert, xin, paths);
  verified = verified && rep.passed;
  j["residuals"] = {{"checked", rep.checked},
                    {"uncovered", rep.uncovered},
                    {"min", rep.checked ? rep.min_residual * (nm.hi - nm.lo) : 0.0},
                    {"passed", rep.passed}};
  j["certificate_cost"] = nm.backward(cert.cost(r.peacock));
  return j;
}

int cmd_price(RunConfig& cfg, std::ostream& out) {
  auto s = price_setup(cfg);
  const auto xin = normalized(s.xi, s.nm);
  const auto iv = transport::price_interval(s.peacock, xin, s.solver);
  bool verified = true;
  json res;
  res["instance_hash"] = io::sha256_hex(io::to_json(s.peacock).dump() + "\n" + s.payoff_spec.dump());
  res["interval"] = {s.nm.backward(iv.lower), s.nm.backward(iv.upper)};
  res["normalization"] = {{"lo", s.nm.lo}, {"hi", s.nm.hi}};
  res["results"] = json::array({side_json(iv.upper_result, iv.upper_cert, xin, s.corpus, s.nm, verified),
                                side_json(iv.lower_result, iv.lower_cert, xin, s.corpus, s.nm, verified)});

  out << "payoff      " << s.xi.name << "\n";
  out << "support     " << (s.solver.lattice ? "lattice tree" : "marginal tuples") << ", " << s.corpus.size()
      << " paths\n";
  out << "lower       " << fmt(res["interval"][0].get<double>()) << "\n";
  out << "upper       " << fmt(res["interval"][1].get<double>()) << "\n";
  for (const auto& side : res["results"])
    out << "residual    " << side["sense"].get<std::string>() << " min " << fmt(side["residuals"]["min"].get<double>())
        << (side["residuals"]["passed"].get<bool>() ? " ok" : " FAILED") << "\n";
  write_outputs(cfg, {{"result.json", res.dump(2) + "\n"}});
  return verified ? kOk : kSolver;
}

// ---- lattice ----

std::vector<std::pair<std::vector<double>, StepPath>> load_paths(RunConfig& cfg) {
  if (is_fixture(cfg.input)) {
    const auto name = cfg.input.substr(std::string(kFixture).size());
    if (name == "constant") return {{kCorpusGrid, StepPath::constant({1.0})}};
    if (name == "corpus") {
      std::vector<std::pair<std::vector<double>, StepPath>> out;
      for (auto& w : path_corpus(cfg.seeds.empty() ? 2024 : cfg.seeds.front(), 100)) out.push_back({kCorpusGrid, w});
      return out;
    }
    throw ConfigError("unknown path fixture " + name);
  }
  const auto j = io::parse(load(cfg, cfg.input, "input"), cfg.input);
  std::vector<double> grid{0.0, 1.0};
  if (j.contains("grid")) grid = j.at("grid").get<std::vector<double>>();
  try {
    pathspace::validate_grid(grid);
  } catch (const std::exception& e) {
    throw io::IoError(std::string("path grid: ") + e.what());
  }
  return {{grid, io::path_from_json(j)}};
}

int cmd_lattice(RunConfig& cfg, std::ostream& out) {
  const auto paths = load_paths(cfg);
  std::vector<int> levels;
  for (double n : cfg.n) levels.push_back(static_cast<int>(n));
  if (levels.empty()) levels = {3, 4, 5, 6, 7, 8};
  std::vector<std::vector<std::string>> rows;
  std::map<int, std::vector<double>> errs;
  std::map<int, double> worst;
  int code = kOk;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const auto& [grid, w] = paths[k];
    const double norm = w.sup_norm();
    for (int n : levels) {
      const auto m = lattice::validate(w, grid, n);
      const auto lp = lattice::lift(w, grid, n);
      const auto lifted = lp.to_step_path();
      const double err = pathspace::rho_T(w, lifted, grid);
      const double scaled = err * std::ldexp(1.0, n) / (1.0 + norm);
      const double gap = lifted.sup_norm() - norm;
      const bool norm_ok = std::abs(gap) <= std::sqrt(static_cast<double>(w.dim())) * std::ldexp(1.0, -n) + 1e-12;
      const auto lm = lattice::validate(lp);
      if (!lm.ok || !norm_ok) code = kSolver;
      errs[n].push_back(err);
      worst[n] = std::max(worst[n], scaled);
      rows.push_back({std::to_string(k), std::to_string(n), fmt(err), fmt(norm), fmt(scaled), fmt(gap),
                      norm_ok ? "1" : "0", lm.ok ? "1" : "0", m.ok ? "1" : "0"});
      if (paths.size() == 1) {
        out << "n=" << n << " rho_T " << fmt(err) << " scaled " << fmt(scaled) << " norm gap " << fmt(gap)
            << (lm.ok ? " lift member" : " lift NOT a member: " + lm.reason) << "\n";
        out << "    input path " << (m.ok ? "is a member" : "not a member: " + m.reason) << "\n";
      }
    }
  }
  std::vector<std::vector<std::string>> decay;
  for (std::size_t a = 0; a + 1 < levels.size(); ++a) {
    const int n0 = levels[a], n1 = levels[a + 1];
    std::vector<double> r;
    for (std::size_t k = 0; k < paths.size(); ++k) {
      const double e0 = errs[n0][k], e1 = errs[n1][k];
      if (e1 > 0.0) r.push_back(e0 / e1);
    }
    const double med = median(r);
    decay.push_back({std::to_string(n1), fmt(med), fmt(worst[n1])});
    if (paths.size() > 1) out << "n=" << n1 << " median decay " << fmt(med) << " max scaled " << fmt(worst[n1]) << "\n";
  }
  write_outputs(cfg, {{"lattice.csv", csv({"path", "n", "rho_T", "sup_norm", "scaled", "norm_gap", "norm_ok",
                                            "lift_member", "input_member"},
                                           rows)},
                      {"lattice_decay.csv", csv({"n", "median_ratio", "max_scaled"}, decay)}});
  return code;
}

// ---- stability ----

int cmd_stability(RunConfig& cfg, std::ostream& out) {
  auto s = price_setup(cfg);
  if (cfg.radii.empty()) cfg.radii = {0.2, 0.1, 0.05, 0.025, 0.0};
  if (cfg.seeds.empty()) cfg.seeds = {1, 2, 3};
  const double scale = s.nm.hi - s.nm.lo;
  const auto tab = transport::stability_sweep(s.peacock, normalized(s.xi, s.nm), cfg.radii, cfg.seeds, s.solver);
  std::vector<std::vector<std::string>> rows, eps_rows;
  for (const auto& r : tab.rows) {
    const bool solved = r.status != "rejected";
    rows.push_back({fmt(r.radius), std::to_string(r.seed), r.status, fmt(r.w1),
                    solved ? fmt(s.nm.backward(r.lower)) : "", solved ? fmt(s.nm.backward(r.upper)) : "",
                    solved ? fmt(r.escape * scale) : ""});
  }
  auto eps = tab.eps;
  std::sort(eps.begin(), eps.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  bool trend = true;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    eps_rows.push_back({fmt(eps[k].first), fmt(eps[k].second * scale)});
    if (k && eps[k].second * scale > eps[k - 1].second * scale + 1e-6) trend = false;
  }
  out << "base interval [" << fmt(s.nm.backward(tab.base_lower)) << ", " << fmt(s.nm.backward(tab.base_upper)) << "]\n";
  for (const auto& r : eps_rows) out << "radius " << r[0] << " eps " << r[1] << "\n";
  for (const auto& r : rows)
    if (r[2] != "ok") out << "radius " << r[0] << " seed " << r[1] << " " << r[2] << "\n";
  out << "trend " << (trend ? "nonincreasing" : "violated") << "\n";
  write_outputs(cfg, {{"stability.csv", csv({"radius", "seed", "status", "w1", "lower", "upper", "eps"}, rows)},
                      {"stability_eps.csv", csv({"radius", "eps"}, eps_rows)}});
  return kOk;
}

// ---- dn ----

lattice::LatticeTree two_leaf_tree() {
  lattice::LatticeTree t({0.0, 1.0});
  t.add_root({1.0});
  t.add_child(0, 1.0, {0.0});
  t.add_child(0, 1.0, {2.0});
  return t;
}

lattice::LatticeTree load_tree(RunConfig& cfg) {
  json j;
  if (is_fixture(cfg.input)) {
    j = {{"fixture", cfg.input.substr(std::string(kFixture).size())}};
  } else {
    j = io::parse(load(cfg, cfg.input, "input"), cfg.input);
  }
  if (j.contains("fixture")) {
    if (j.at("fixture") == "two_leaf") return two_leaf_tree();
    throw ConfigError("unknown tree fixture " + j.at("fixture").dump());
  }
  lattice::LatticeParams p;
  try {
    p.n = j.at("n").get<int>();
    p.dim = j.value("dim", std::size_t{1});
    p.grid = j.value("grid", std::vector<double>{0.0, 1.0});
    p.R = j.value("R", 2.0);
    p.J_max = j.value("J_max", 1);
  } catch (const json::exception& e) {
    throw io::IoError(std::string("tree spec: ") + e.what());
  }
  p.budget = cfg.budget;
  return lattice::enumerate_tree(p);
}

int cmd_dn(RunConfig& cfg, std::ostream& out) {
  const auto tree = load_tree(cfg);
  auto [xi, spec] = load_payoff(cfg, tree.grid(), tree.dim());
  std::vector<StepPath> leaves;
  for (auto l : tree.leaves()) leaves.push_back(tree.path_to(l));
  const auto nm = normalization_on(xi, leaves);
  cfg.normalization = nm;
  const auto zeta = normalized(xi, nm);
  auto ns = cfg.n;
  if (ns.empty()) ns = {1, 2, 4, 8, 16, 32};
  if (!std::is_sorted(ns.begin(), ns.end())) throw ConfigError("--n must be increasing for dn");
  const auto tab = penalized::dn_convergence_experiment(tree, zeta, ns);

  std::vector<std::vector<std::string>> rows;
  json sols = json::array();
  for (const auto& r : tab.rows) {
    rows.push_back({fmt(r.n), fmt(r.value), fmt(r.expected_drift), fmt(r.gap)});
    const auto sol = penalized::solve_penalized(tree, zeta, r.n, arith_of(cfg));
    const auto mass = penalized::node_mass(tree, sol.Q);
    json nodes = json::array();
    for (std::size_t v = 0; v < tree.size(); ++v) nodes.push_back({{"id", v}, {"q", mass[v]}, {"drift", sol.drift[v]}});
    sols.push_back({{"n", r.n}, {"value", sol.value}, {"max_multiplier", sol.max_multiplier}, {"nodes", nodes}});
  }
  json dump = {{"V0", tab.V0},
               {"n_star", tab.n_star ? json(*tab.n_star) : json(nullptr)},
               {"monotone", tab.monotone},
               {"above_V0", tab.above_V0},
               {"solutions", sols}};
  out << "tree " << tree.size() << " nodes, " << leaves.size() << " leaves, V0 " << fmt(tab.V0) << "\n";
  for (const auto& r : rows) out << "n " << r[0] << " value " << r[1] << " drift " << r[2] << " gap " << r[3] << "\n";
  out << "n* " << (tab.n_star ? fmt(*tab.n_star) : "none") << ", monotone " << (tab.monotone ? "yes" : "no")
      << ", above V0 " << (tab.above_V0 ? "yes" : "no") << "\n";
  write_outputs(cfg, {{"dn.csv", csv({"n", "value", "expected_drift", "gap_to_V0"}, rows)},
                      {"dn_solution.json", dump.dump(2) + "\n"}});
  return kOk;
}

}  // namespace

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(v)) throw ConfigError("not a number list: " + list);
    out.push_back(v);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& list) {
  std::vector<std::uint64_t> out;
  for (double v : parse_doubles(list)) {
    if (v < 0.0 || v != std::floor(v)) throw ConfigError("seeds must be nonnegative integers: " + list);
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

void RunConfig::validate() const {
  static const std::vector<std::string> commands{"validate", "price", "lattice", "stability", "dn"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    throw ConfigError("unknown command " + command);
  if (input.empty()) throw ConfigError("--input is required");
  if (arith != "float" && arith != "rational") throw ConfigError("--arith must be float or rational");
  penalty_of(mode);
  if (budget == 0) throw ConfigError("--budget must be positive");
  if (command == "price" && n.size() > 1) throw ConfigError("price takes one lattice level");
  if (command == "price" || command == "lattice")
    for (double v : n)
      if (v < 1.0 || v != std::floor(v) || v > 30.0) throw ConfigError("lattice levels must be integers in [1, 30]");
  if (command == "dn")
    for (double v : n)
      if (v < 0.0) throw ConfigError("penalty levels must be nonnegative");
  for (double r : radii)
    if (r < 0.0) throw ConfigError("radii must be nonnegative");
}

json RunConfig::to_json() const {
  json j = {{"command", command}, {"input", input},   {"payoff", payoff}, {"n", n},
            {"radii", radii},     {"seeds", seeds},   {"mode", mode},     {"arith", arith},
            {"out", out},         {"budget", budget}, {"input_hashes", input_hashes}};
  if (normalization) j["normalization"] = {{"lo", normalization->lo}, {"hi", normalization->hi}};
  return j;
}

Normalization dyadic_normalization(const std::vector<double>& values) {
  Normalization nm{0.0, 1.0};
  if (values.empty()) return nm;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  double w = 1.0;
  if (*hi > *lo) {
    w = std::exp2(std::ceil(std::log2(*hi - *lo)));
    while (w < *hi - *lo) w *= 2.0;
    w = std::max(w, 0x1p-40);
  }
  nm.lo = *lo;
  nm.hi = nm.lo + w;
  return nm;
}

std::vector<StepPath> path_corpus(std::uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  std::vector<StepPath> out;
  while (out.size() < count) {
    auto w = pathspace::random_path(rng, {1.0}, 6, 3.0, 12);
    const bool hits_grid = std::any_of(w.jumps().begin(), w.jumps().end(),
                                       [](const pathspace::Jump& j) { return j.t == 0.5 || j.t == 1.0; });
    if (!hits_grid) out.push_back(std::move(w));
  }
  return out;
}

int run(RunConfig cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
    if (cfg.command == "validate") return cmd_validate(cfg, out);
    if (cfg.command == "price") return cmd_price(cfg, out);
    if (cfg.command == "lattice") return cmd_lattice(cfg, out);
    if (cfg.command == "stability") return cmd_stability(cfg, out);
    return cmd_dn(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const io::IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kConfig;
  } catch (const lattice::BudgetExceeded& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const transport::InfeasibleMarginals& e) {
    err << "solver: " << e.what();
    if (e.min_relaxation) err << " (minimal relaxation " << fmt(*e.min_relaxation) << ")";
    err << "\n";
    return kSolver;
  } catch (const measures::PeacockError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const measures::InvalidMeasure& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const measures::ArbitrageError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const pathspace::InvalidPath& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const lattice::LatticeError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    err << "solver: " << e.what() << "\n";
    return kSolver;
  }
}

}  // namespace motlab::cli
