#pragma once

/// \file config.hpp
/// \brief Experiment configuration: one JSON object per module, every
///        existential constant of the estimates surfaced as a field.

#include <array>
#include <string>
#include <vector>

#include "json.hpp"

#include "carlab/geometry.hpp"
#include "carlab/operators.hpp"

namespace carlab::cli {

/// Schema violation; the message starts with the JSON path of the field.
class ConfigError : public Error {
public:
  using Error::Error;
};

struct CoefficientSpec {
  std::array<int, 2> beta{0, 0};
  double value = 0.0;
};

struct GeometryConfig {
  std::array<double, 2> domain{0.0, 1.0};
  Box omega{{0.4}, {0.6}};
  Box omega0{{0.0}, {0.3}};
  Face gamma{0, 0};
  double pad = 0.5;
};

struct OperatorsConfig {
  /// Lower-order terms used by the Carleman and continuation experiments.
  std::vector<CoefficientSpec> coefficients{{{1, 0}, 0.5}, {{0, 0}, 1.0}};
  std::vector<int> spectral_nodes{41, 81, 161};
  int spectral_modes = 4;
  int symmetry_pairs = 10;
  double symmetry_tol = 1e-10;
  /// Accepted band for the observed convergence order of the spectral ratios.
  std::array<double, 2> spectral_order{1.9, 2.1};
};

struct WeightsConfig {
  double T = 1.0;
  int nodes = 101;
  int Nt = 200;
  double t0 = 0.5;
  double tau = 0.0;  ///< required
  double lambda_min = 1.0;
  double lambda_cap = 64.0;
  std::array<int, 3> N{2, 3, 4};
  std::vector<double> s_values{1.0, 10.0, 100.0, 1000.0};
};

struct ForwardConfig {
  int mode = 1;
  double space_T = 0.01;
  int space_Nt = 40000;
  std::vector<int> space_nodes{17, 33, 65};
  double time_T = 0.01;
  int time_nodes = 201;
  std::vector<int> time_Nt{50, 100, 200};
  std::array<double, 2> space_order{1.7, 2.3};
  std::array<double, 2> time_order{0.8, 1.2};
};

struct CarlemanConfig {
  double lambda = 1.0;
  double s_min = 0.125;
  double s_max = 32.0;
  double s_factor = 2.0;
  int members = 5;
  int supported_members = 5;
  Box support{{0.65}, {0.95}};
  double growth_tol = 1.2;
  int min_points_above_knee = 5;
  // energy shift
  double energy_T = 0.1;
  double energy_theta = 0.05;
  double energy_t1 = 0.025;
  double energy_s = 4.0;
  std::vector<std::array<int, 2>> energy_grids{{101, 400}, {201, 1600}};
  double identity_tol = 0.01;
  double energy_stability = 0.25;
  // Lebesgue collapse
  double collapse_s_min = 0.01;
  double collapse_s_max = 1e4;
  double collapse_factor = 4.0;
  double collapse_ratio = 0.01;
};

struct InverseSourceConfig {
  double T = 0.1;
  int nodes = 201;
  int Nt = 200;
  double theta = 0.05;
  double t1 = 0.025;
  double r0 = 0.5;
  std::vector<CoefficientSpec> coefficients{{{2, 0}, 0.3}, {{0, 0}, 2.0}};
  double direct_tol = 0.05;
  std::vector<double> reg_sweep{1e-2, 1e-4, 1e-6, 1e-8, 1e-10};
  double tikhonov_target = 0.1;
  double cg_tol = 1e-12;
  int cg_max_iter = 2000;
  int adjoint_pairs = 5;
  double adjoint_tol = 1e-8;
  int ensemble_size = 20;
  int mode_cap = 8;
  std::vector<int> lipschitz_nodes{101, 201};
  double lipschitz_stability = 0.25;
  double homogeneity_tol = 1e-10;
};

struct ContinuationConfig {
  double T = 0.02;
  int nodes = 101;
  int Nt = 200;
  double epsilon = 0.004;
  double tau = 0.0;  ///< 0 means epsilon / 2
  std::vector<CoefficientSpec> coefficients{{{2, 0}, 0.3}, {{0, 0}, 1.0}};
  double s = 5e-3;
  double reg = 1e4;
  double extension_width = 0.25;
  double solver_tol = 1e-10;
  std::vector<double> noise_levels{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  int seeds = 3;
  std::vector<double> two_term_levels{1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
  std::vector<double> two_term_s{0.0, 0.0025, 0.005, 0.01, 0.02};
  double kappa_max = 1.05;
  double r2_min = 0.9;
  double knee_factor = 2.0;
};

struct Config {
  unsigned long long seed = 2024;
  GeometryConfig geometry;
  OperatorsConfig operators;
  WeightsConfig weights;
  ForwardConfig forward;
  CarlemanConfig carleman;
  InverseSourceConfig inverse_source;
  ContinuationConfig continuation;
};

/// Defaults with weights.tau = 0.5.
Config default_config();

/// Parses and validates; missing optional fields take the defaults above.
Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);

nlohmann::json to_json(const Config& c);

/// Cross-field checks (windows inside (0, T), eps > tau, ...). Throws ConfigError.
void validate(const Config& c);

Box make_box(const std::array<double, 2>& interval);
CoefficientSet make_coefficients(const Grid& grid, const std::vector<CoefficientSpec>& spec);

}  // namespace carlab::cli
