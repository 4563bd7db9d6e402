#pragma once

#include "motlab/io.hpp"
#include "motlab/pathspace.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace motlab::cli {

enum Exit : int { kOk = 0, kInvalid = 1, kConfig = 2, kSolver = 3 };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string command;
  std::string input;
  std::string payoff;
  std::vector<double> n;  // price: lattice level; lattice: levels; dn: penalty levels
  std::vector<double> radii;
  std::vector<std::uint64_t> seeds;
  std::string mode = "exact";  // exact | penalized:<c>
  std::string arith = "float";
  std::string out;
  std::size_t budget = 200000;

  // Filled in while running.
  std::map<std::string, std::string> input_hashes;
  std::optional<pathspace::Normalization> normalization;

  /// Throws ConfigError.
  void validate() const;
  io::json to_json() const;
};

std::vector<double> parse_doubles(const std::string& list);
std::vector<std::uint64_t> parse_seeds(const std::string& list);

/// Runs one command and returns its exit code. Human-readable output goes to
/// `out`, diagnostics to `err`; files are written under cfg.out when set.
int run(RunConfig cfg, std::ostream& out, std::ostream& err);

/// The seeded lattice corpus: nonnegative 1-D paths with up to 6 jumps in
/// [0, 3], jump times on k/4096 avoiding the grid {0, 1/2, 1}.
std::vector<pathspace::StepPath> path_corpus(std::uint64_t seed, std::size_t count);
inline const std::vector<double> kCorpusGrid{0.0, 0.5, 1.0};

/// [min, min + 2^k] with k smallest (down to -40) covering all values, so the
/// forward map stays exact on dyadic payoff values of moderate size.
pathspace::Normalization dyadic_normalization(const std::vector<double>& values);

}  // namespace motlab::cli
