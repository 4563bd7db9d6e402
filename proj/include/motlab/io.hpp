#pragma once

#include "motlab/measures.hpp"
#include "motlab/pathspace.hpp"
#include "motlab/transport.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace motlab::io {

using nlohmann::json;

/// Unreadable files, malformed JSON, schema errors.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& text);
json parse(const std::string& text, const std::string& what);

/// Shortest round-trip decimal form.
std::string fmt(double x);
std::string sha256_hex(const std::string& bytes);

// peacock.json: {"dim", "times", "marginals": [{"points": [[...]], "weights": [...]}]}.
// Each law is validated on read; convex order only in build_peacock.
struct RawPeacock {
  std::size_t dim = 1;
  std::vector<double> times;
  std::vector<measures::DiscreteMeasure> laws;
};
RawPeacock peacock_from_json(const json& j);
json to_json(const RawPeacock& p);
json to_json(const measures::Peacock& p);
measures::Peacock build_peacock(const RawPeacock& p);

// quotes.json: {"spot", "curves": [{"maturity", "strikes", "prices"}]}.
struct Quotes {
  double spot = 1.0;
  std::vector<measures::CallQuoteCurve> curves;
};
Quotes quotes_from_json(const json& j);
json to_json(const Quotes& q);
bool is_quotes(const json& j);
/// δ_spot at time 0 (unless quoted) followed by the calibrated law of each curve.
RawPeacock calibrate(const Quotes& q);

// {"dim", "t0_value", "jumps": [{"t", "value"}]}; optional "grid".
pathspace::StepPath path_from_json(const json& j);
json to_json(const pathspace::StepPath& w);

/// Payoff spec {"kind", ...params, "truncate"?}. Kinds: asian, lookback_max,
/// basket_call, call, abs_move, constant, tail_indicator, table.
pathspace::Payoff payoff_from_json(const json& j, const std::vector<double>& grid, std::size_t dim);

json to_json(const transport::TransportPlan& plan);
json to_json(const transport::DualCertificate& cert);

}  // namespace motlab::io
