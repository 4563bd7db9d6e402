#include "motlab/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace motlab::cli;
  CLI::App app{"motlab: martingale optimal transport workbench"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string n, radii, seeds;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--input", cfg.input, "peacock.json, quotes.json, path.json, tree spec or fixture:<name>");
    sub->add_option("--payoff", cfg.payoff, "payoff spec JSON");
    sub->add_option("--n", n, "comma list: lattice level(s), or penalty levels for dn");
    sub->add_option("--radii", radii, "comma list of W1 radii");
    sub->add_option("--seeds", seeds, "comma list of seeds");
    sub->add_option("--mode", cfg.mode, "exact | penalized:<c>");
    sub->add_option("--arith", cfg.arith, "float | rational");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--budget", cfg.budget, "node budget for lattice trees");
  };
  common(app.add_subcommand("validate", "check a peacock (or calibrate quotes and check)"));
  common(app.add_subcommand("price", "model-free price interval with dual certificates"));
  common(app.add_subcommand("lattice", "lift diagnostics on a path or corpus"));
  common(app.add_subcommand("stability", "price interval under W1 perturbations"));
  common(app.add_subcommand("dn", "penalized sweep on a tree"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  try {
    if (!n.empty()) cfg.n = parse_doubles(n);
    if (!radii.empty()) cfg.radii = parse_doubles(radii);
    if (!seeds.empty()) cfg.seeds = parse_seeds(seeds);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }
  return run(cfg, std::cout, std::cerr);
}
