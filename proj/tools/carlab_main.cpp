#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "carlab/cli/report.hpp"
#include "carlab/cli/run.hpp"

using namespace carlab;
using namespace carlab::cli;

int main(int argc, char** argv) {
  CLI::App app{"Carleman-estimate experiment harness"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "run";
  unsigned long long seed = 0;
  app.add_option("--config", config_path, "experiment config (JSON); defaults apply when omitted");
  app.add_option("--out", out_dir, "run directory")->capture_default_str();
  CLI::Option* seed_opt = app.add_option("--seed", seed, "override the config seed");

  std::vector<CLI::App*> runs;
  for (const auto& name : subcommands()) {
    std::string what = "acceptance criteria";
    for (int k : subcommand_criteria(name)) what += " " + std::to_string(k);
    runs.push_back(app.add_subcommand(name, what));
  }
  CLI::App* report = app.add_subcommand("report", "summarise a run directory into report.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kValidationError;
  }

  try {
    if (report->parsed()) {
      std::cout << emit_report(out_dir);
      return kPass;
    }
    Config config = config_path.empty() ? default_config() : load_config(config_path);
    if (seed_opt->count() > 0) config.seed = seed;
    validate(config);
    for (auto* sub : runs) {
      if (!sub->parsed()) continue;
      const auto outcome = run_subcommand(sub->get_name(), config, out_dir);
      for (const auto& c : outcome.checks) {
        std::cout << (c.pass ? "PASS" : "FAIL") << "  [" << c.criterion << "] " << c.name << ": " << c.detail
                  << "\n";
      }
      std::cout << "run directory: " << out_dir << "\n";
      return outcome.pass ? kPass : kAcceptanceFailure;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  }
  return kValidationError;
}
