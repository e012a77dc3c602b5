#include "CLI11.hpp"
#include "cli_commands.hpp"

#include <fstream>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kConfigError = 2;

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw geat::ConfigError("cannot write '" + path + "'");
  f << text;
}

struct Common {
  std::string config;
  std::string out;
  uint64_t seed = 0;
  int workers = 1;
  double tol = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* tol_opt = nullptr;

  void attach(CLI::App* app, bool needs_config) {
    auto* c = app->add_option("--config", config, "JSON config file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    app->add_option("--out", out, "output path (default: stdout)");
    seed_opt = app->add_option("--seed", seed, "root seed; overrides the config");
    app->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    tol_opt = app->add_option("--tol", tol, "tolerance override")->check(CLI::PositiveNumber);
  }

  geat::cli::Options options() const {
    geat::cli::Options o;
    if (seed_opt->count()) o.seed = seed;
    if (tol_opt->count()) o.tol = tol;
    o.workers = workers;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy accumulation toolkit: entropies, EAT rate curves, protocol simulation, verification suites"};
  app.require_subcommand(1);

  Common ent, rate, sim, ver;
  auto* c_ent = app.add_subcommand("entropy", "evaluate an entropy or divergence from a JSON config");
  ent.attach(c_ent, true);
  auto* c_rate = app.add_subcommand("rate-curve", "certified rate against n as CSV");
  rate.attach(c_rate, true);
  auto* c_sim = app.add_subcommand("simulate", "run the randomness-expansion protocol");
  sim.attach(c_sim, true);
  std::string summary_path;
  c_sim->add_option("--summary", summary_path, "summary JSON path (default: stdout)");
  auto* c_ver = app.add_subcommand("verify", "run a verification suite");
  ver.attach(c_ver, false);
  std::string suite;
  int instances = 0;
  c_ver->add_option("suite", suite, "suite name")->required();
  c_ver->add_option("--instances", instances, "number of instances (default: suite default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (c_ent->parsed()) {
      auto res = geat::cli::cmd_entropy(geat::read_json_file(ent.config), ent.options());
      write_out(ent.out, res.dump(2) + "\n");
      return kOk;
    }
    if (c_rate->parsed()) {
      auto res = geat::cli::cmd_rate_curve(geat::read_json_file(rate.config), rate.options());
      write_out(rate.out, res.csv);
      if (res.infeasible > 0) std::cerr << res.infeasible << " grid point(s) with an empty accepted set\n";
      return kOk;
    }
    if (c_sim->parsed()) {
      auto res = geat::cli::cmd_simulate(geat::read_json_file(sim.config), sim.options());
      if (!sim.out.empty()) write_out(sim.out, res.csv);
      write_out(summary_path, res.summary.dump(2) + "\n");
      return kOk;
    }
    if (c_ver->parsed()) {
      if (!ver.config.empty()) throw geat::ConfigError("verify takes no config file");
      auto reps = geat::cli::cmd_verify(suite, instances, ver.options());
      write_out(ver.out, geat::to_json(reps).dump(2) + "\n");
      for (const auto& r : reps)
        std::cerr << r.name << ": " << r.instances << " checks, " << r.violations << " violation(s)\n";
      for (const auto& r : reps)
        if (!r.passed()) return kViolation;
      return kOk;
    }
  } catch (const geat::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
