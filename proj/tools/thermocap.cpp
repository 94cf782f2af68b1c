// Command-line driver: one subcommand per experiment mode plus "run", which
// takes the mode from the config file.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "thermocap/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitResource = 3;

int exit_code(thermocap::ErrorKind k) {
  switch (k) {
    case thermocap::ErrorKind::InvalidConfig:
    case thermocap::ErrorKind::InvalidInput: return kExitValidation;
    case thermocap::ErrorKind::ResourceLimit: return kExitResource;
    default: return kExitFailure;
  }
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
};

int run(const std::string& subcommand, const Flags& f) {
  using namespace thermocap;
  std::ifstream in(f.config, std::ios::binary);
  if (!in) {
    std::cerr << "cannot read config " << f.config << '\n';
    return kExitValidation;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (f.seed) {
    // Inject the override before validation so that a config without a seed
    // is accepted when --seed is given.
    try {
      auto j = nlohmann::json::parse(text);
      if (j.is_object()) {
        j["seed"] = *f.seed;
        text = j.dump();
      }
    } catch (const nlohmann::json::parse_error&) {
      // parse_config reports the syntax error with its line.
    }
  }
  ExperimentConfig cfg;
  try {
    cfg = parse_config(text);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code(e.kind());
  }
  if (subcommand != "run" && subcommand != to_string(cfg.mode)) {
    std::cerr << "config mode '" << to_string(cfg.mode) << "' does not match subcommand '" << subcommand << "'\n";
    return kExitValidation;
  }
  if (f.threads > 0) cfg.threads = f.threads;
  const auto dir = resolve_output_dir(f.out.empty() ? cfg.output : f.out);
  const auto bundle = run_experiment(cfg);
  try {
    emit_report(bundle, dir);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code(e.kind());
  }
  std::cout << summary_text(bundle) << "report: " << dir.string() << '\n';
  if (!bundle.complete) {
    std::cerr << "study '" << bundle.failed_study << "' failed: " << bundle.error << '\n';
    return exit_code(*bundle.error_kind);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal capacity, Brownian sheet hitting and dimension experiments"};
  app.require_subcommand(1);
  Flags flags;
  std::uint64_t seed = 0;
  std::string chosen;
  for (const char* name : {"run", "capacity", "dimension", "hit", "gamma_star", "codimension", "full_battery"}) {
    const std::string desc = std::string(name) == "run" ? "run the mode named in the config"
                                                         : std::string("run a ") + name + " experiment";
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", flags.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", flags.out, "output directory (default: config output, $THERMOCAP_OUT_DIR, thermocap_out)");
    sub->add_option("--threads", flags.threads, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }
  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed") > 0) flags.seed = seed;
  return run(chosen, flags);
}
