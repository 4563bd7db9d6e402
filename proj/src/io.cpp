#include "motlab/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace motlab::io {

namespace {

const json& need(const json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) throw IoError(what + ": missing \"" + key + "\"");
  return j.at(key);
}

double num(const json& j, const std::string& what) {
  if (!j.is_number()) throw IoError(what + ": expected a number");
  return j.get<double>();
}

std::vector<double> nums(const json& j, const std::string& what) {
  if (!j.is_array()) throw IoError(what + ": expected an array");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(num(v, what));
  return out;
}

std::size_t index(const json& j, const char* key, const std::string& what) {
  const auto& v = need(j, key, what);
  if (!v.is_number_integer() || v.get<long long>() < 0) throw IoError(what + ": \"" + key + "\" must be a nonnegative integer");
  return v.get<std::size_t>();
}

json point(const Point& x) {
  json a = json::array();
  for (double v : x) a.push_back(v);
  return a;
}

json law(const measures::DiscreteMeasure& m) {
  json pts = json::array(), ws = json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    pts.push_back(point(m.point(i)));
    ws.push_back(m.weight(i));
  }
  return {{"points", pts}, {"weights", ws}};
}

}  // namespace

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + p.string());
}

json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(what + ": " + e.what());
  }
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr)) throw IoError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

RawPeacock peacock_from_json(const json& j) {
  const std::string what = "peacock";
  RawPeacock p;
  p.dim = index(j, "dim", what);
  if (p.dim == 0) throw IoError("peacock: dim must be positive");
  p.times = nums(need(j, "times", what), what + ".times");
  const auto& ms = need(j, "marginals", what);
  if (!ms.is_array() || ms.size() != p.times.size()) throw IoError("peacock: need one marginal per time");
  for (const auto& m : ms) {
    std::vector<Point> pts;
    for (const auto& x : need(m, "points", what)) {
      pts.push_back(nums(x, what + ".points"));
      if (pts.back().size() != p.dim) throw IoError("peacock: point of wrong dimension");
    }
    p.laws.emplace_back(p.dim, std::move(pts), nums(need(m, "weights", what), what + ".weights"));
  }
  return p;
}

json to_json(const RawPeacock& p) {
  json ms = json::array();
  for (const auto& m : p.laws) ms.push_back(law(m));
  return {{"dim", p.dim}, {"times", p.times}, {"marginals", ms}};
}

json to_json(const measures::Peacock& p) { return to_json(RawPeacock{p.dim(), p.times(), p.laws()}); }

measures::Peacock build_peacock(const RawPeacock& p) { return measures::Peacock(p.times, p.laws); }

bool is_quotes(const json& j) { return j.is_object() && j.contains("curves"); }

Quotes quotes_from_json(const json& j) {
  const std::string what = "quotes";
  Quotes q;
  q.spot = num(need(j, "spot", what), what + ".spot");
  for (const auto& c : need(j, "curves", what)) {
    measures::CallQuoteCurve curve;
    curve.maturity = num(need(c, "maturity", what), what + ".maturity");
    curve.strikes = nums(need(c, "strikes", what), what + ".strikes");
    curve.prices = nums(need(c, "prices", what), what + ".prices");
    curve.spot = q.spot;
    q.curves.push_back(std::move(curve));
  }
  return q;
}

json to_json(const Quotes& q) {
  json cs = json::array();
  for (const auto& c : q.curves) cs.push_back({{"maturity", c.maturity}, {"strikes", c.strikes}, {"prices", c.prices}});
  return {{"spot", q.spot}, {"curves", cs}};
}

RawPeacock calibrate(const Quotes& q) {
  RawPeacock p;
  if (q.curves.empty() || q.curves.front().maturity > 0.0) {
    p.times.push_back(0.0);
    p.laws.push_back(measures::DiscreteMeasure::dirac({q.spot}));
  }
  for (const auto& c : q.curves) {
    p.times.push_back(c.maturity);
    p.laws.push_back(measures::marginals_from_calls(c));
  }
  return p;
}

pathspace::StepPath path_from_json(const json& j) {
  const std::string what = "path";
  const std::size_t dim = index(j, "dim", what);
  Point x0 = nums(need(j, "t0_value", what), what + ".t0_value");
  if (x0.size() != dim) throw IoError("path: t0_value of wrong dimension");
  std::vector<pathspace::Jump> jumps;
  if (j.contains("jumps"))
    for (const auto& jp : j.at("jumps"))
      jumps.push_back({num(need(jp, "t", what), what + ".t"), nums(need(jp, "value", what), what + ".value")});
  try {
    return pathspace::StepPath(std::move(x0), std::move(jumps));
  } catch (const pathspace::InvalidPath& e) {
    throw IoError(std::string("path: ") + e.what());
  }
}

json to_json(const pathspace::StepPath& w) {
  json js = json::array();
  for (const auto& jp : w.jumps()) js.push_back({{"t", jp.t}, {"value", point(jp.value)}});
  return {{"dim", w.dim()}, {"t0_value", point(w.initial())}, {"jumps", js}};
}

pathspace::Payoff payoff_from_json(const json& j, const std::vector<double>& grid, std::size_t dim) {
  const std::string what = "payoff";
  const auto& kind_j = need(j, "kind", what);
  if (!kind_j.is_string()) throw IoError("payoff: kind must be a string");
  const std::string kind = kind_j.get<std::string>();
  auto coord = [&]() -> int {
    if (!j.contains("coordinate")) return -1;
    const auto c = index(j, "coordinate", what);
    if (c >= dim) throw IoError("payoff: coordinate out of range");
    return static_cast<int>(c);
  };
  auto time_index = [&](const char* key) {
    const auto i = index(j, key, what);
    if (i >= grid.size()) throw IoError(std::string("payoff: \"") + key + "\" is not a marginal time index");
    return i;
  };

  pathspace::Payoff xi;
  if (kind == "asian") {
    xi = pathspace::asian(grid, coord());
  } else if (kind == "lookback_max") {
    xi = pathspace::lookback_max(grid, coord());
  } else if (kind == "basket_call") {
    Point w = nums(need(j, "weights", what), what + ".weights");
    if (w.size() != dim) throw IoError("payoff: basket weights of wrong dimension");
    xi = pathspace::basket_call_at_1(grid, std::move(w), num(need(j, "strike", what), what + ".strike"));
  } else if (kind == "call") {
    const int c = coord();
    xi = pathspace::call_at(grid, time_index("i"), num(need(j, "strike", what), what + ".strike"),
                            static_cast<std::size_t>(std::max(c, 0)));
  } else if (kind == "abs_move") {
    xi = pathspace::abs_move(grid, time_index("i"), time_index("j"));
  } else if (kind == "constant") {
    xi = pathspace::constant(grid, num(need(j, "value", what), what + ".value"));
  } else if (kind == "tail_indicator") {
    xi = pathspace::tail_indicator(grid, num(need(j, "R", what), what + ".R"));
  } else if (kind == "table") {
    // {"entries": [{"x": [[...] per time], "value"}], "default"}
    std::map<std::vector<Point>, double> table;
    for (const auto& e : need(j, "entries", what)) {
      std::vector<Point> key;
      for (const auto& x : need(e, "x", what)) key.push_back(nums(x, what + ".x"));
      if (key.size() != grid.size()) throw IoError("payoff: table entry needs one point per marginal time");
      table[key] = num(need(e, "value", what), what + ".value");
    }
    const double dflt = j.contains("default") ? num(j.at("default"), what + ".default") : 0.0;
    xi = pathspace::marginal_grid(
        grid,
        [table = std::move(table), dflt](const std::vector<Point>& x) {
          const auto it = table.find(x);
          return it == table.end() ? dflt : it->second;
        },
        "table");
  } else {
    throw IoError("payoff: unknown kind \"" + kind + "\"");
  }
  if (j.contains("truncate")) xi = pathspace::truncate_payoff(std::move(xi), num(j.at("truncate"), what + ".truncate"));
  return xi;
}

json to_json(const transport::TransportPlan& plan) {
  json out = json::array();
  for (std::size_t k = 0; k < plan.size(); ++k) out.push_back({{"prob", plan.probs[k]}, {"path", to_json(plan.paths[k])}});
  return out;
}

json to_json(const transport::DualCertificate& cert) {
  json lambdas = json::array();
  for (const auto& tab : cert.lambda_tables) {
    json t = json::array();
    for (const auto& [x, v] : tab) t.push_back({{"x", point(x)}, {"value", v}});
    lambdas.push_back(t);
  }
  json nodes = json::array();
  for (const auto& [prefix, h] : cert.node_multipliers) nodes.push_back({{"prefix", prefix}, {"h", point(h)}});
  return {{"label", cert.label}, {"lambdas", lambdas}, {"nodes", nodes}};
}

}  // namespace motlab::io
