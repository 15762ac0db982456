#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "carlab/cli/report.hpp"
#include "carlab/cli/run.hpp"

using namespace carlab;
using namespace carlab::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Fresh empty directory under the system temp dir.
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("carlab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

json minimal() { return {{"weights", {{"tau", 0.5}}}}; }

/// Runs the command-line tool; returns its exit status with stderr in `err`.
int run_tool(const std::string& args, const fs::path& dir, std::string& err) {
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = std::string(CARLAB_TOOL) + " " + args + " > " + (dir / "stdout.txt").string() +
                          " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  err = slurp(err_file);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("missing tau names the field") {
  const std::string msg = config_error(json{{"weights", json::object()}});
  CHECK(msg.find("weights.tau") != std::string::npos);
  CHECK(msg.find("missing required field") != std::string::npos);
  CHECK(config_error(json::object()).find("weights") == 0);
}

TEST_CASE("schema errors carry the path to the field") {
  json j = minimal();
  j["continuation"] = {{"epsilon", "small"}};
  CHECK(config_error(j).find("continuation.epsilon: expected a number") == 0);
  j = minimal();
  j["carleman"] = {{"s_mx", 10.0}};
  CHECK(config_error(j).find("carleman.s_mx: unknown field") == 0);
  j = minimal();
  j["inverse_source"] = {{"coefficients", {{{"beta", {2, 0}}}}}};
  CHECK(config_error(j).find("inverse_source.coefficients[0].value") == 0);
  j = minimal();
  j["geometry"] = {{"omega", {0.6, 0.4}}};
  CHECK(config_error(j).find("geometry.omega") == 0);
}

TEST_CASE("eps <= tau is a validation error") {
  json j = minimal();
  j["continuation"] = {{"epsilon", 0.004}, {"tau", 0.004}};
  CHECK(config_error(j).find("continuation.tau: window violates eps > tau") == 0);
  j["continuation"] = {{"epsilon", 0.004}, {"tau", 0.008}};
  CHECK(!config_error(j).empty());
  j["continuation"] = {{"epsilon", 0.004}, {"tau", 0.003}};
  CHECK(config_error(j).empty());
}

TEST_CASE("config round trip") {
  const Config c = default_config();
  const json j = to_json(c);
  CHECK(to_json(parse_config(j)) == j);
  json k = minimal();
  k["seed"] = 7;
  CHECK(parse_config(k).seed == 7);
  k["seed"] = -1;
  CHECK(config_error(k).find("seed: expected a nonnegative integer") == 0);
  k["seed"] = 7;
  CHECK(parse_config(k).continuation.epsilon == c.continuation.epsilon);
}

TEST_CASE("every criterion belongs to exactly one subcommand") {
  std::multiset<int> seen;
  for (const auto& s : subcommands()) {
    for (int k : subcommand_criteria(s)) seen.insert(k);
  }
  for (int k = 1; k <= 11; ++k) CHECK(seen.count(k) == 1);
  CHECK(seen.size() == 11);
  CHECK_THROWS_AS(subcommand_criteria("nope"), Error);
}

TEST_CASE("CSV rows round-trip through %.17g") {
  Table t{"t", {"a", "b"}};
  t.add({0.1, -3.0});
  t.add({1e-300, 2.0 / 3.0});
  CHECK(to_csv(t) == "a,b\n0.10000000000000001,-3\n1e-300,0.66666666666666663\n");
  CHECK(std::strtod("0.66666666666666663", nullptr) == 2.0 / 3.0);
  CHECK_THROWS_AS(t.add({1.0}), Error);
  t.plot_x = "a";
  t.plot_y = {"b"};
  t.log_x = true;
  const std::string svg = to_svg(t);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
}

TEST_CASE("report needs a complete run directory") {
  const fs::path empty = scratch("empty");
  CHECK_THROWS_AS(emit_report(empty), Error);
  const fs::path partial = scratch("partial");
  json s = {{"subcommand", "forward"},
            {"seed", 1},
            {"pass", true},
            {"checks", {{{"criterion", 1}, {"tables", {"forward_space.csv"}}}}}};
  write_text(partial / "summary.json", s.dump());
  CHECK_THROWS_WITH_AS(emit_report(partial), doctest::Contains("forward_space.csv"), Error);
}

TEST_CASE("thresholds do not depend on the seed") {
  Config a = default_config(), b = default_config();
  a.seed = 1;
  b.seed = 99;
  const auto ra = check_weight_system(a);
  const auto rb = check_weight_system(b);
  REQUIRE(ra.pass);
  CHECK(ra.metrics["thresholds"] == rb.metrics["thresholds"]);
  CHECK(ra.metrics["thresholds"]["ordered"] == true);
}

TEST_CASE("carleman-check on the default config writes a complete run directory") {
  const fs::path dir = scratch("carleman");
  const auto out = run_subcommand("carleman-check", default_config(), dir);
  CHECK(out.pass);
  CHECK(out.checks.size() == 4);
  for (const char* f : {"config.json", "summary.json", "carleman_ratios.csv", "carleman_ratios.svg",
                        "weight_bounds.csv", "energy_shift.csv", "lebesgue_collapse.csv"}) {
    CHECK_MESSAGE(fs::is_regular_file(dir / f), f);
  }
  const json summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary["pass"] == true);
  CHECK(summary["checks"][0]["criterion"] == 3);
  // the saved config reproduces the run configuration
  CHECK(to_json(load_config((dir / "config.json").string())) == to_json(default_config()));
  const std::string report = emit_report(dir);
  CHECK(report.find("delta1") != std::string::npos);
  CHECK(report.find("delta(4)") != std::string::npos);
  CHECK(report.find("max_C_emp") != std::string::npos);
  CHECK(fs::is_regular_file(dir / "report.txt"));
}

TEST_CASE("identical config and seed give byte-identical run directories") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_subcommand("forward", default_config(), a);
  run_subcommand("forward", default_config(), b);
  int compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const fs::path other = b / e.path().filename();
    REQUIRE(fs::is_regular_file(other));
    CHECK_MESSAGE(slurp(e.path()) == slurp(other), e.path().filename().string());
    ++compared;
  }
  CHECK(compared >= 6);
}

TEST_CASE("exit codes of the command-line tool") {
  const fs::path dir = scratch("tool");
  std::string err;

  write_text(dir / "no_tau.json", R"({"weights": {"T": 1.0}})");
  CHECK(run_tool("--config " + (dir / "no_tau.json").string() + " --out " + (dir / "r1").string() +
                     " carleman-check",
                 dir, err) == kValidationError);
  CHECK(err.find("weights.tau") != std::string::npos);

  write_text(dir / "eps.json", R"({"weights": {"tau": 0.5}, "continuation": {"epsilon": 0.002, "tau": 0.004}})");
  CHECK(run_tool("--config " + (dir / "eps.json").string() + " --out " + (dir / "r2").string() + " continuation",
                 dir, err) == kValidationError);
  CHECK(err.find("eps > tau") != std::string::npos);
  // rejected before any solve: no run directory
  CHECK(!fs::exists(dir / "r2"));

  CHECK(run_tool("--out " + (dir / "r3").string() + " carleman-check", dir, err) == kPass);
  CHECK(fs::is_regular_file(dir / "r3" / "carleman_ratios.csv"));
  CHECK(run_tool("--out " + (dir / "r3").string() + " report", dir, err) == kPass);
  CHECK(fs::is_regular_file(dir / "r3" / "report.txt"));
  CHECK(run_tool("--out " + (dir / "missing").string() + " report", dir, err) == kValidationError);

  // a failing acceptance check exits with 2
  write_text(dir / "strict.json", R"({"weights": {"tau": 0.5}, "carleman": {"growth_tol": 1.0, "min_points_above_knee": 50}})");
  CHECK(run_tool("--config " + (dir / "strict.json").string() + " --out " + (dir / "r4").string() +
                     " carleman-check",
                 dir, err) == kAcceptanceFailure);
  const json summary = json::parse(slurp(dir / "r4" / "summary.json"));
  CHECK(summary["pass"] == false);
}

}  // TEST_SUITE
