#pragma once

/// \file checks.hpp
/// \brief The eleven acceptance checks, each a pure function of the config.

#include <string>
#include <vector>

#include "carlab/cli/config.hpp"

namespace carlab::cli {

/// Rectangular numeric table; becomes one CSV file and, when `plot_y` is set, one SVG.
struct Table {
  Table() = default;
  Table(std::string n, std::vector<std::string> cols) : name(std::move(n)), columns(std::move(cols)) {}

  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::string plot_x;
  std::vector<std::string> plot_y;
  bool log_x = false;
  bool log_y = false;

  void add(std::vector<double> row);
  std::vector<double> column(const std::string& c) const;
};

struct CheckResult {
  int criterion = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  std::vector<Table> tables;
  nlohmann::json metrics = nlohmann::json::object();
};

/// Criterion number -> short name, 1..11.
const std::vector<std::string>& criterion_names();

/// Runs one criterion. Any Error thrown by the numerics marks the check failed
/// with the message as detail; ConfigError propagates.
CheckResult run_check(int criterion, const Config& config);

CheckResult check_forward_order(const Config& c);
CheckResult check_operator_spectrum(const Config& c);
CheckResult check_weight_system(const Config& c);
CheckResult check_carleman_inequality(const Config& c);
CheckResult check_energy_shift(const Config& c);
CheckResult check_lebesgue_collapse(const Config& c);
CheckResult check_inverse_source(const Config& c);
CheckResult check_lipschitz_stability(const Config& c);
CheckResult check_continuation_uniqueness(const Config& c);
CheckResult check_holder_stability(const Config& c);
CheckResult check_determinism(const Config& c);

}  // namespace carlab::cli
