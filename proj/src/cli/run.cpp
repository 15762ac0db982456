#include "carlab/cli/run.hpp"

#include <map>

#include "carlab/cli/report.hpp"

namespace carlab::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::vector<int>>& criteria_map() {
  static const std::map<std::string, std::vector<int>> m{{"forward", {1, 2}},
                                                        {"carleman-check", {3, 4, 5, 6}},
                                                        {"inverse-source", {7, 8}},
                                                        {"continuation", {9, 10}},
                                                        {"stability-sweep", {11}}};
  return m;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"forward", "carleman-check", "inverse-source", "continuation",
                                              "stability-sweep"};
  return names;
}

const std::vector<int>& subcommand_criteria(const std::string& name) {
  const auto it = criteria_map().find(name);
  if (it == criteria_map().end()) throw Error("unknown subcommand " + name);
  return it->second;
}

json summary_json(const std::string& name, const Config& config, const RunOutcome& outcome) {
  json checks = json::array();
  for (const auto& c : outcome.checks) {
    json files = json::array();
    for (const auto& t : c.tables) {
      files.push_back(t.name + ".csv");
      if (!t.plot_y.empty()) files.push_back(t.name + ".svg");
    }
    checks.push_back({{"criterion", c.criterion},
                      {"name", c.name},
                      {"pass", c.pass},
                      {"detail", c.detail},
                      {"metrics", c.metrics},
                      {"tables", files}});
  }
  return {{"subcommand", name}, {"seed", config.seed}, {"pass", outcome.pass}, {"checks", checks}};
}

RunOutcome run_subcommand(const std::string& name, const Config& config, const fs::path& out_dir) {
  const auto& criteria = subcommand_criteria(name);
  validate(config);
  fs::create_directories(out_dir);
  write_text(out_dir / "config.json", to_json(config).dump(2) + "\n");

  RunOutcome out;
  out.pass = true;
  for (int k : criteria) {
    out.checks.push_back(run_check(k, config));
    for (const auto& t : out.checks.back().tables) write_table(out_dir, t);
    out.pass = out.pass && out.checks.back().pass;
  }
  write_text(out_dir / "summary.json", summary_json(name, config, out).dump(2) + "\n");
  return out;
}

}  // namespace carlab::cli
