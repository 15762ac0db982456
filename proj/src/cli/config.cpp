#include "carlab/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace carlab::cli {

using nlohmann::json;

namespace {

/// Reads one JSON object, reporting errors by dotted path and rejecting unknown keys.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(at(key), "unknown field");
    }
  }

  template <class T>
  void get(const std::string& key, T& out, bool required = false) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      if (required) fail(at(key), "missing required field");
      return;
    }
    read(j_.at(key), at(key), out);
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

private:
  static void read(const json& v, const std::string& p, double& out) {
    if (!v.is_number()) fail(p, "expected a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& p, int& out) {
    if (!v.is_number_integer()) fail(p, "expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, const std::string& p, unsigned long long& out) {
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(p, "expected a nonnegative integer");
    out = v.get<unsigned long long>();
  }
  template <class T, std::size_t n>
  static void read(const json& v, const std::string& p, std::array<T, n>& out) {
    if (!v.is_array() || v.size() != n) fail(p, "expected an array of length " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) read(v[i], p + "[" + std::to_string(i) + "]", out[i]);
  }
  template <class T>
  static void read(const json& v, const std::string& p, std::vector<T>& out) {
    if (!v.is_array() || v.empty()) fail(p, "expected a nonempty array");
    out.assign(v.size(), T{});
    for (std::size_t i = 0; i < v.size(); ++i) read(v[i], p + "[" + std::to_string(i) + "]", out[i]);
  }
  static void read(const json& v, const std::string& p, CoefficientSpec& out) {
    Section s(v, p);
    s.get("beta", out.beta, true);
    s.get("value", out.value, true);
  }
  static void read(const json& v, const std::string& p, Box& out) {
    std::array<double, 2> iv{};
    read(v, p, iv);
    if (!(iv[0] < iv[1])) fail(p, "interval must have lo < hi");
    out = make_box(iv);
  }
  static void read(const json& v, const std::string& p, Face& out) {
    Section s(v, p);
    s.get("axis", out.axis, true);
    s.get("side", out.side, true);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json box_json(const Box& b) { return json::array({b.lo[0], b.hi[0]}); }

json coeffs_json(const std::vector<CoefficientSpec>& v) {
  json a = json::array();
  for (const auto& c : v) a.push_back({{"beta", c.beta}, {"value", c.value}});
  return a;
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) Section::fail(path, what);
}

void positive(double v, const std::string& path) { require(v > 0.0, path, "must be positive"); }

void increasing_levels(const std::vector<double>& v, const std::string& path) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(v[i] > 0.0, path, "levels must be positive");
    if (i > 0) require(v[i] > v[i - 1], path, "levels must increase");
  }
}

}  // namespace

Box make_box(const std::array<double, 2>& interval) { return Box{{interval[0]}, {interval[1]}}; }

CoefficientSet make_coefficients(const Grid& grid, const std::vector<CoefficientSpec>& spec) {
  std::vector<std::pair<MultiIndex, double>> terms;
  for (const auto& c : spec) terms.push_back({MultiIndex{c.beta}, c.value});
  return terms.empty() ? CoefficientSet{} : CoefficientSet::constant(grid, terms);
}

Config default_config() {
  Config c;
  c.weights.tau = 0.5;
  return c;
}

Config parse_config(const json& j) {
  Config c;
  Section root(j, "");
  root.get("seed", c.seed);
  if (const json* g = root.child("geometry")) {
    Section s(*g, "geometry");
    s.get("domain", c.geometry.domain);
    s.get("omega", c.geometry.omega);
    s.get("omega0", c.geometry.omega0);
    s.get("gamma", c.geometry.gamma);
    s.get("pad", c.geometry.pad);
  }
  if (const json* o = root.child("operators")) {
    Section s(*o, "operators");
    s.get("coefficients", c.operators.coefficients);
    s.get("spectral_nodes", c.operators.spectral_nodes);
    s.get("spectral_modes", c.operators.spectral_modes);
    s.get("symmetry_pairs", c.operators.symmetry_pairs);
    s.get("symmetry_tol", c.operators.symmetry_tol);
    s.get("spectral_order", c.operators.spectral_order);
  }
  {
    const json* w = root.child("weights");
    if (!w) Section::fail("weights", "missing required section");
    Section s(*w, "weights");
    s.get("T", c.weights.T);
    s.get("nodes", c.weights.nodes);
    s.get("Nt", c.weights.Nt);
    s.get("t0", c.weights.t0);
    s.get("tau", c.weights.tau, true);
    s.get("lambda_min", c.weights.lambda_min);
    s.get("lambda_cap", c.weights.lambda_cap);
    s.get("N", c.weights.N);
    s.get("s_values", c.weights.s_values);
  }
  if (const json* f = root.child("forward")) {
    Section s(*f, "forward");
    s.get("mode", c.forward.mode);
    s.get("space_T", c.forward.space_T);
    s.get("space_Nt", c.forward.space_Nt);
    s.get("space_nodes", c.forward.space_nodes);
    s.get("time_T", c.forward.time_T);
    s.get("time_nodes", c.forward.time_nodes);
    s.get("time_Nt", c.forward.time_Nt);
    s.get("space_order", c.forward.space_order);
    s.get("time_order", c.forward.time_order);
  }
  if (const json* k = root.child("carleman")) {
    Section s(*k, "carleman");
    auto& cc = c.carleman;
    s.get("lambda", cc.lambda);
    s.get("s_min", cc.s_min);
    s.get("s_max", cc.s_max);
    s.get("s_factor", cc.s_factor);
    s.get("members", cc.members);
    s.get("supported_members", cc.supported_members);
    s.get("support", cc.support);
    s.get("growth_tol", cc.growth_tol);
    s.get("min_points_above_knee", cc.min_points_above_knee);
    s.get("energy_T", cc.energy_T);
    s.get("energy_theta", cc.energy_theta);
    s.get("energy_t1", cc.energy_t1);
    s.get("energy_s", cc.energy_s);
    s.get("energy_grids", cc.energy_grids);
    s.get("identity_tol", cc.identity_tol);
    s.get("energy_stability", cc.energy_stability);
    s.get("collapse_s_min", cc.collapse_s_min);
    s.get("collapse_s_max", cc.collapse_s_max);
    s.get("collapse_factor", cc.collapse_factor);
    s.get("collapse_ratio", cc.collapse_ratio);
  }
  if (const json* i = root.child("inverse_source")) {
    Section s(*i, "inverse_source");
    auto& ic = c.inverse_source;
    s.get("T", ic.T);
    s.get("nodes", ic.nodes);
    s.get("Nt", ic.Nt);
    s.get("theta", ic.theta);
    s.get("t1", ic.t1);
    s.get("r0", ic.r0);
    s.get("coefficients", ic.coefficients);
    s.get("direct_tol", ic.direct_tol);
    s.get("reg_sweep", ic.reg_sweep);
    s.get("tikhonov_target", ic.tikhonov_target);
    s.get("cg_tol", ic.cg_tol);
    s.get("cg_max_iter", ic.cg_max_iter);
    s.get("adjoint_pairs", ic.adjoint_pairs);
    s.get("adjoint_tol", ic.adjoint_tol);
    s.get("ensemble_size", ic.ensemble_size);
    s.get("mode_cap", ic.mode_cap);
    s.get("lipschitz_nodes", ic.lipschitz_nodes);
    s.get("lipschitz_stability", ic.lipschitz_stability);
    s.get("homogeneity_tol", ic.homogeneity_tol);
  }
  if (const json* q = root.child("continuation")) {
    Section s(*q, "continuation");
    auto& qc = c.continuation;
    s.get("T", qc.T);
    s.get("nodes", qc.nodes);
    s.get("Nt", qc.Nt);
    s.get("epsilon", qc.epsilon);
    s.get("tau", qc.tau);
    s.get("coefficients", qc.coefficients);
    s.get("s", qc.s);
    s.get("reg", qc.reg);
    s.get("extension_width", qc.extension_width);
    s.get("solver_tol", qc.solver_tol);
    s.get("noise_levels", qc.noise_levels);
    s.get("seeds", qc.seeds);
    s.get("two_term_levels", qc.two_term_levels);
    s.get("two_term_s", qc.two_term_s);
    s.get("kappa_max", qc.kappa_max);
    s.get("r2_min", qc.r2_min);
    s.get("knee_factor", qc.knee_factor);
  }
  validate(c);
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

json to_json(const Config& c) {
  json j;
  j["seed"] = c.seed;
  j["geometry"] = {{"domain", c.geometry.domain},
                   {"omega", box_json(c.geometry.omega)},
                   {"omega0", box_json(c.geometry.omega0)},
                   {"gamma", {{"axis", c.geometry.gamma.axis}, {"side", c.geometry.gamma.side}}},
                   {"pad", c.geometry.pad}};
  const auto& o = c.operators;
  j["operators"] = {{"coefficients", coeffs_json(o.coefficients)},
                    {"spectral_nodes", o.spectral_nodes},
                    {"spectral_modes", o.spectral_modes},
                    {"symmetry_pairs", o.symmetry_pairs},
                    {"symmetry_tol", o.symmetry_tol},
                    {"spectral_order", o.spectral_order}};
  const auto& w = c.weights;
  j["weights"] = {{"T", w.T},         {"nodes", w.nodes},           {"Nt", w.Nt},
                  {"t0", w.t0},       {"tau", w.tau},               {"lambda_min", w.lambda_min},
                  {"lambda_cap", w.lambda_cap}, {"N", w.N},         {"s_values", w.s_values}};
  const auto& f = c.forward;
  j["forward"] = {{"mode", f.mode},           {"space_T", f.space_T},       {"space_Nt", f.space_Nt},
                  {"space_nodes", f.space_nodes}, {"time_T", f.time_T},     {"time_nodes", f.time_nodes},
                  {"time_Nt", f.time_Nt},     {"space_order", f.space_order}, {"time_order", f.time_order}};
  const auto& k = c.carleman;
  j["carleman"] = {{"lambda", k.lambda},
                   {"s_min", k.s_min},
                   {"s_max", k.s_max},
                   {"s_factor", k.s_factor},
                   {"members", k.members},
                   {"supported_members", k.supported_members},
                   {"support", box_json(k.support)},
                   {"growth_tol", k.growth_tol},
                   {"min_points_above_knee", k.min_points_above_knee},
                   {"energy_T", k.energy_T},
                   {"energy_theta", k.energy_theta},
                   {"energy_t1", k.energy_t1},
                   {"energy_s", k.energy_s},
                   {"energy_grids", k.energy_grids},
                   {"identity_tol", k.identity_tol},
                   {"energy_stability", k.energy_stability},
                   {"collapse_s_min", k.collapse_s_min},
                   {"collapse_s_max", k.collapse_s_max},
                   {"collapse_factor", k.collapse_factor},
                   {"collapse_ratio", k.collapse_ratio}};
  const auto& i = c.inverse_source;
  j["inverse_source"] = {{"T", i.T},
                         {"nodes", i.nodes},
                         {"Nt", i.Nt},
                         {"theta", i.theta},
                         {"t1", i.t1},
                         {"r0", i.r0},
                         {"coefficients", coeffs_json(i.coefficients)},
                         {"direct_tol", i.direct_tol},
                         {"reg_sweep", i.reg_sweep},
                         {"tikhonov_target", i.tikhonov_target},
                         {"cg_tol", i.cg_tol},
                         {"cg_max_iter", i.cg_max_iter},
                         {"adjoint_pairs", i.adjoint_pairs},
                         {"adjoint_tol", i.adjoint_tol},
                         {"ensemble_size", i.ensemble_size},
                         {"mode_cap", i.mode_cap},
                         {"lipschitz_nodes", i.lipschitz_nodes},
                         {"lipschitz_stability", i.lipschitz_stability},
                         {"homogeneity_tol", i.homogeneity_tol}};
  const auto& q = c.continuation;
  j["continuation"] = {{"T", q.T},
                       {"nodes", q.nodes},
                       {"Nt", q.Nt},
                       {"epsilon", q.epsilon},
                       {"tau", q.tau},
                       {"coefficients", coeffs_json(q.coefficients)},
                       {"s", q.s},
                       {"reg", q.reg},
                       {"extension_width", q.extension_width},
                       {"solver_tol", q.solver_tol},
                       {"noise_levels", q.noise_levels},
                       {"seeds", q.seeds},
                       {"two_term_levels", q.two_term_levels},
                       {"two_term_s", q.two_term_s},
                       {"kappa_max", q.kappa_max},
                       {"r2_min", q.r2_min},
                       {"knee_factor", q.knee_factor}};
  return j;
}

void validate(const Config& c) {
  const auto& g = c.geometry;
  require(g.domain[0] < g.domain[1], "geometry.domain", "interval must have lo < hi");
  require(g.gamma.axis == 0 && (g.gamma.side == 0 || g.gamma.side == 1), "geometry.gamma",
          "a 1D domain has faces axis 0, side 0 or 1");
  positive(g.pad, "geometry.pad");

  const auto& w = c.weights;
  positive(w.tau, "weights.tau");
  positive(w.T, "weights.T");
  require(w.t0 - w.tau >= 0.0 && w.t0 + w.tau <= w.T, "weights.tau",
          "window (t0 - tau, t0 + tau) must lie in (0, T)");
  require(w.lambda_min > 0.0 && w.lambda_cap >= w.lambda_min, "weights.lambda_cap",
          "need 0 < lambda_min <= lambda_cap");
  require(w.N[0] >= 2 && w.N[0] < w.N[1] && w.N[1] < w.N[2], "weights.N", "need 2 <= N1 < N2 < N3");

  const auto& f = c.forward;
  require(f.space_nodes.size() >= 3, "forward.space_nodes", "need at least three grids");
  require(f.time_Nt.size() >= 3, "forward.time_Nt", "need at least three grids");

  const auto& k = c.carleman;
  require(k.s_min > 0.0 && k.s_max > k.s_min && k.s_factor > 1.0, "carleman.s_factor",
          "need 0 < s_min < s_max and factor > 1");
  require(k.energy_theta - k.energy_t1 > 0.0 && k.energy_theta + k.energy_t1 < k.energy_T, "carleman.energy_t1",
          "window (theta - t1, theta + t1) must lie in (0, T)");
  require(k.energy_grids.size() >= 2, "carleman.energy_grids", "need at least two grids");

  const auto& i = c.inverse_source;
  require(i.theta - i.t1 > 0.0 && i.theta + i.t1 < i.T, "inverse_source.t1",
          "window (theta - t1, theta + t1) must lie in (0, T)");
  require(i.lipschitz_nodes.size() == 2, "inverse_source.lipschitz_nodes", "need exactly two grids");
  for (double r : i.reg_sweep) require(r >= 0.0, "inverse_source.reg_sweep", "reg must be nonnegative");

  const auto& q = c.continuation;
  const double tau = q.tau > 0.0 ? q.tau : 0.5 * q.epsilon;
  if (!(q.epsilon > tau)) {
    std::ostringstream os;
    os << "window violates eps > tau (eps = " << q.epsilon << ", tau = " << tau << ")";
    Section::fail("continuation.tau", os.str());
  }
  require(2.0 * q.epsilon < q.T, "continuation.epsilon", "eps must be smaller than T / 2");
  require(q.s >= 0.0, "continuation.s", "must be nonnegative");
  require(q.reg > 0.0, "continuation.reg", "must be positive");
  require(q.seeds >= 1, "continuation.seeds", "need at least one seed");
  increasing_levels(q.noise_levels, "continuation.noise_levels");
  increasing_levels(q.two_term_levels, "continuation.two_term_levels");
  for (std::size_t n = 1; n < q.two_term_s.size(); ++n) {
    require(q.two_term_s[n] > q.two_term_s[n - 1], "continuation.two_term_s", "s values must increase");
  }
  require(q.two_term_s.front() >= 0.0, "continuation.two_term_s", "s values must be nonnegative");
}

}  // namespace carlab::cli
