#include "carlab/continuation.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace carlab {

namespace {

constexpr std::array<double, 4> kFactorial{1.0, 1.0, 2.0, 6.0};

/// Maps the four layer values to the traces g_j = d_nu^j u at Gamma.
Eigen::Matrix4d layers_to_traces(double h) {
  Eigen::Matrix4d V;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) V(i, j) = std::pow(-i * h, j) / kFactorial[j];
  }
  return V.inverse();
}

int axis_index(const Grid& grid, int k, int axis) { return grid.multi_index(k)[axis]; }

/// Inward layer index of node k relative to Gamma (0 on Gamma).
int inward_index(const Grid& grid, const Face& gamma, int k) {
  const int i = axis_index(grid, k, gamma.axis);
  return gamma.side == 0 ? i : grid.nodes(gamma.axis) - 1 - i;
}

/// Row in the trace matrices of the Gamma node sharing k's tangential position; -1 if none.
int gamma_row(const Grid& grid, const Face& gamma, int k) {
  if (grid.dim() == 1) return 0;
  const int t = 1 - gamma.axis;
  const int j = axis_index(grid, k, t);
  if (j < 1 || j > grid.nodes(t) - 2) return -1;
  return j - 1;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Mask all_nodes(const Grid& g) { return Mask(g.size(), 1); }

}  // namespace

std::vector<int> gamma_nodes(const Grid& grid, const Face& gamma) {
  if (gamma.axis < 0 || gamma.axis >= grid.dim() || gamma.side < 0 || gamma.side > 1) {
    throw Error("gamma face out of range");
  }
  const int edge = gamma.side == 0 ? 0 : grid.nodes(gamma.axis) - 1;
  std::vector<int> out;
  if (grid.dim() == 1) {
    out.push_back(edge);
    return out;
  }
  const int t = 1 - gamma.axis;
  for (int j = 1; j + 1 < grid.nodes(t); ++j) {
    std::array<int, kMaxDim> ij{0, 0};
    ij[gamma.axis] = edge;
    ij[t] = j;
    out.push_back(grid.index(ij));
  }
  return out;
}

int layer_node(const Grid& grid, const Face& gamma, int k, int layer) {
  auto ij = grid.multi_index(k);
  ij[gamma.axis] += gamma.side == 0 ? layer : -layer;
  if (ij[gamma.axis] < 0 || ij[gamma.axis] >= grid.nodes(gamma.axis)) {
    throw Error("layer outside the grid");
  }
  return grid.index(ij);
}

CauchyTrace CauchyTrace::from_field(const Grid& grid, const Face& gamma, const SpaceTimeField& u) {
  if (u.nodes() != grid.size()) throw Error("field does not match the grid");
  if (grid.nodes(gamma.axis) < 8) throw Error("too few nodes across Gamma for four layers");
  CauchyTrace tr;
  tr.gamma = gamma;
  tr.nodes = gamma_nodes(grid, gamma);
  const Eigen::Matrix4d Vinv = layers_to_traces(grid.spacing(gamma.axis));
  const int n = static_cast<int>(tr.nodes.size());
  for (auto& g : tr.g) g = Eigen::MatrixXd::Zero(n, u.levels());
  for (int r = 0; r < n; ++r) {
    for (int m = 0; m < u.levels(); ++m) {
      Eigen::Vector4d L;
      for (int i = 0; i < 4; ++i) L(i) = u.values(layer_node(grid, gamma, tr.nodes[r], i), m);
      const Eigen::Vector4d c = Vinv * L;
      for (int j = 0; j < 4; ++j) tr.g[j](r, m) = c(j);
    }
  }
  return tr;
}

Eigen::MatrixXd CauchyTrace::layer(const Grid& grid, int j) const {
  if (j < 0 || j > 3) throw Error("layer index must be in 0..3");
  const double r = -j * grid.spacing(gamma.axis);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g[0].rows(), g[0].cols());
  for (int q = 0; q < 4; ++q) out += std::pow(r, q) / kFactorial[q] * g[q];
  return out;
}

double CauchyTrace::data_size(const Grid& grid) const {
  double D = trace_h1_time_norm(grid, gamma, g[0]);
  for (int j = 0; j < 4; ++j) D += trace_norm_surrogate(grid, gamma, g[j], j);
  return D;
}

CauchyTrace CauchyTrace::operator-(const CauchyTrace& other) const {
  CauchyTrace out = *this;
  for (int j = 0; j < 4; ++j) out.g[j] -= other.g[j];
  return out;
}

CauchyTrace add_trace_noise(const CauchyTrace& trace, const Grid& grid, double target_D,
                            unsigned long long seed) {
  if (!(target_D >= 0.0)) throw Error("target data size must be nonnegative");
  if (target_D == 0.0) return trace;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  CauchyTrace noise = trace;
  for (auto& g : noise.g) {
    for (int c = 0; c < g.cols(); ++c) {
      for (int r = 0; r < g.rows(); ++r) g(r, c) = n01(rng);
    }
  }
  const double scale = target_D / noise.data_size(grid);
  CauchyTrace out = trace;
  for (int j = 0; j < 4; ++j) out.g[j] += scale * noise.g[j];
  return out;
}

SpaceTimeField extend_cauchy(const CauchyTrace& trace, const Grid& grid, double width) {
  const double h = grid.spacing(trace.gamma.axis);
  const double r1 = 3.5 * h;
  if (!(width > r1 + h)) throw Error("extension width must exceed four node layers");
  const int levels = static_cast<int>(trace.g[0].cols());
  SpaceTimeField u(grid.size(), levels);
  for (int k = 0; k < grid.size(); ++k) {
    const int row = gamma_row(grid, trace.gamma, k);
    if (row < 0) continue;
    const double r = inward_index(grid, trace.gamma, k) * h;
    if (r >= width) continue;
    const double chi = r <= r1 ? 1.0 : 1.0 - smooth_ramp((r - r1) / (width - r1));
    for (int j = 0; j < 4; ++j) {
      const double c = chi * std::pow(-r, j) / kFactorial[j];
      u.values.row(k) += c * trace.g[j].row(row);
    }
  }
  return u;
}

double max_trace(const Grid& grid, const Face& gamma, const SpaceTimeField& v) {
  const auto tr = CauchyTrace::from_field(grid, gamma, v);
  double m = 0.0;
  for (const auto& g : tr.g) m = std::max(m, g.cwiseAbs().maxCoeff());
  return m;
}

SpaceTimeField zero_extend(const SpaceTimeField& v, const Grid& grid, const ExtendedDomain& ext,
                           double tol) {
  if (!ext.masks.gamma_face) throw Error("extended domain carries no Gamma face");
  const Face gamma = *ext.masks.gamma_face;
  const auto tr = CauchyTrace::from_field(grid, gamma, v);
  double worst = 0.0;
  int worst_j = 0;
  for (int j = 0; j < 4; ++j) {
    const double m = tr.g[j].cwiseAbs().maxCoeff();
    if (m > worst) {
      worst = m;
      worst_j = j;
    }
  }
  if (worst > tol) {
    std::ostringstream os;
    os << "field does not vanish on Gamma: max |d_nu^" << worst_j << " v| = " << worst
       << " exceeds tolerance " << tol;
    throw Error(os.str());
  }
  SpaceTimeField out(ext.grid.size(), v.levels(), v.first_level);
  for (int k = 0; k < grid.size(); ++k) out.values.row(ext.physical_to_working[k]) = v.values.row(k);
  return out;
}

ContinuationProblem make_continuation_problem(const Grid& grid, const CoefficientSet& coeffs,
                                              const Face& gamma, double pad, const Box& omega0,
                                              double epsilon, double tau,
                                              const LambdaSweepOptions& sweep) {
  if (tau <= 0.0) tau = 0.5 * epsilon;
  if (!(epsilon > tau)) {
    std::ostringstream os;
    os << "time window violates eps > tau (eps = " << epsilon << ", tau = " << tau << ")";
    throw Error(os.str());
  }
  if (!(2.0 * epsilon < grid.T())) throw Error("eps must be smaller than T / 2");
  ContinuationProblem p;
  p.grid = grid;
  p.coeffs = coeffs;
  p.gamma = gamma;
  p.epsilon = epsilon;
  p.tau = tau;
  p.ext = extend_domain(grid, gamma, pad, omega0);
  p.omega0.assign(grid.size(), 0);
  for (int k = 0; k < grid.size(); ++k) p.omega0[k] = in_closed_box(grid, k, omega0) ? 1 : 0;
  if (count(p.omega0) == 0) throw Error("omega0 contains no nodes");
  p.d = build_distance_fn(p.ext.grid, p.ext.masks);
  p.lambda = select_lambda(p.ext.grid, p.ext.masks, p.d, 0.5 * grid.T(), tau, sweep);
  return p;
}

std::vector<double> window_centres(double T, double epsilon, double tau) {
  if (!(epsilon > tau) || !(tau > 0.0)) throw Error("window covering needs eps > tau > 0");
  const double span = T - 2.0 * epsilon;
  if (!(span > 0.0)) throw Error("eps must be smaller than T / 2");
  const double q = 0.5 * tau;
  const int n = std::max(1, static_cast<int>(std::ceil(span / q - 1e-9)));
  std::vector<double> out;
  if (n == 1) {
    out.push_back(0.5 * T);
    return out;
  }
  const double first = epsilon + 0.25 * tau;
  const double last = T - epsilon - 0.25 * tau;
  for (int k = 0; k < n; ++k) out.push_back(first + (last - first) * k / (n - 1));
  return out;
}

namespace {

/// Discretisation shared by every window: unknown nodes, equation rows, K.
struct QrSystem {
  const ContinuationProblem& prob;
  Eigen::SparseMatrix<double, Eigen::RowMajor> K;
  Vec wq;
  std::vector<int> col_of;
  std::vector<int> unknown;
  std::vector<int> rows;

  explicit QrSystem(const ContinuationProblem& p);
  QrWindow solve(const SpaceTimeField& ut, double t0, const QrOptions& opts) const;
};

QrSystem::QrSystem(const ContinuationProblem& p) : prob(p) {
  const Grid& g = prob.grid;
  K = spatial_operator(g, prob.coeffs);
  wq = quadrature_weights(g, all_nodes(g));

  // data nodes (the four layers) carry v = 0; everything else is unknown
  std::vector<char> fixed(g.size(), 0);
  for (int k : gamma_nodes(g, prob.gamma)) {
    for (int i = 0; i < 4; ++i) fixed[layer_node(g, prob.gamma, k, i)] = 1;
  }
  col_of.assign(g.size(), -1);
  for (int k = 0; k < g.size(); ++k) {
    if (!fixed[k]) {
      col_of[k] = static_cast<int>(unknown.size());
      unknown.push_back(k);
    }
  }
  // equation rows: stencils inside the closed box, clear of the Navier rows
  for (int k = 0; k < g.size(); ++k) {
    const auto ij = g.multi_index(k);
    bool ok = true;
    for (int a = 0; a < g.dim(); ++a) ok = ok && ij[a] >= 2 && ij[a] <= g.nodes(a) - 3;
    if (ok) rows.push_back(k);
  }
}

QrWindow QrSystem::solve(const SpaceTimeField& ut, double t0, const QrOptions& opts) const {
  const Grid& g = prob.grid;
  const double dt = g.dt();
  const int nu = static_cast<int>(unknown.size());
  // alpha does not depend on s; s enters only through the row weights below
  const WeightParams wp(prob.ext.grid, prob.d, prob.lambda.lambda, 1.0, t0, prob.tau);
  QrWindow win;
  win.t0 = t0;
  win.q_first = win.q_last = -1;
  win.m_first = static_cast<int>(std::ceil((t0 - prob.tau) / dt - 1e-9));
  win.m_last = static_cast<int>(std::floor((t0 + prob.tau) / dt + 1e-9));
  const int L = win.m_last - win.m_first + 1;
  if (L < 3) throw Error("time window holds fewer than three levels");

  // row weights exp(2 s (alpha - alpha_ref)) with alpha_ref the largest alpha in use
  struct Row {
    int node;
    int m;
    double alpha;
  };
  std::vector<Row> eq;
  double alpha_ref = -std::numeric_limits<double>::infinity();
  for (int m = win.m_first + 1; m <= win.m_last; ++m) {
    if (!wp.inside(g.time(m))) continue;
    for (int k : rows) {
      const double a = wp.alpha(prob.ext.physical_to_working[k], g.time(m));
      alpha_ref = std::max(alpha_ref, a);
      eq.push_back({k, m, a});
    }
  }
  if (eq.empty()) throw Error("time window holds no interior levels");

  std::vector<Eigen::Triplet<double>> trip;
  Vec b(eq.size()), q(eq.size());
  for (std::size_t r = 0; r < eq.size(); ++r) {
    const int k = eq[r].node, m = eq[r].m;
    const int lm = m - win.m_first;
    q(r) = dt * wq(k) * std::exp(2.0 * opts.s * (eq[r].alpha - alpha_ref));
    // residual of u = v + u_tilde; the v part goes into the matrix
    double Fk = -(ut.level(m)(k) - ut.level(m - 1)(k)) / dt;
    for (decltype(K)::InnerIterator it(K, k); it; ++it) {
      Fk -= it.value() * ut.level(m)(it.index());
      const int c = col_of[it.index()];
      if (c >= 0) trip.emplace_back(static_cast<int>(r), lm * nu + c, it.value());
    }
    const int c = col_of[k];
    if (c >= 0) {
      trip.emplace_back(static_cast<int>(r), lm * nu + c, 1.0 / dt);
      trip.emplace_back(static_cast<int>(r), (lm - 1) * nu + c, -1.0 / dt);
    }
    b(r) = Fk;
  }
  SpMat A(static_cast<int>(eq.size()), L * nu);
  A.setFromTriplets(trip.begin(), trip.end());
  // augmented system [I, As; As^T, -mu M] [r; x] = [bs; 0] with As = Q^{1/2} A;
  // its condition number is that of As rather than its square
  const Vec sq = q.cwiseSqrt();
  const SpMat As = sq.asDiagonal() * A;
  const Vec bs = sq.cwiseProduct(b);
  const int nr = static_cast<int>(As.rows()), nc = static_cast<int>(As.cols());
  Vec mass(nc);
  for (int lm = 0; lm < L; ++lm) {
    for (int c = 0; c < nu; ++c) mass(lm * nu + c) = dt * wq(unknown[c]);
  }
  const double mu = opts.reg;
  std::vector<Eigen::Triplet<double>> aug;
  aug.reserve(2 * As.nonZeros() + nr + nc);
  for (int i = 0; i < nr; ++i) aug.emplace_back(i, i, 1.0);
  for (int c = 0; c < nc; ++c) {
    for (SpMat::InnerIterator it(As, c); it; ++it) {
      aug.emplace_back(static_cast<int>(it.row()), nr + c, it.value());
      aug.emplace_back(nr + c, static_cast<int>(it.row()), it.value());
    }
    aug.emplace_back(nr + c, nr + c, -mu * mass(c));
  }
  SpMat S(nr + nc, nr + nc);
  S.setFromTriplets(aug.begin(), aug.end());
  Eigen::SparseLU<SpMat> lu;
  lu.compute(S);
  if (lu.info() != Eigen::Success) throw Error("quasi-reversibility system is singular (reg too small?)");
  Vec rhs = Vec::Zero(nr + nc);
  rhs.head(nr) = bs;
  Vec z = lu.solve(rhs);
  z += lu.solve(Vec(rhs - S * z));
  if (lu.info() != Eigen::Success || !z.allFinite()) {
    throw Error("quasi-reversibility solve did not converge");
  }
  const Vec x = z.tail(nc);
  const Vec r = A * x - b;
  win.weighted_residual = std::sqrt(r.dot(q.cwiseProduct(r)));

  win.u = SpaceTimeField(g.size(), L, win.m_first);
  for (int lm = 0; lm < L; ++lm) {
    const int m = win.m_first + lm;
    win.u.level(m) = ut.level(m);
    for (int c = 0; c < nu; ++c) win.u.level(m)(unknown[c]) += x(lm * nu + c);
  }
  return win;
}

void check_inputs(const ContinuationProblem& prob, const CauchyTrace& trace, const QrOptions& opts) {
  if (trace.g[0].cols() != prob.grid.Nt() + 1) throw Error("traces must cover every time level");
  if (trace.nodes != gamma_nodes(prob.grid, prob.gamma)) {
    throw Error("traces inconsistent with the Gamma nodes");
  }
  if (!(opts.reg >= 0.0) || !(opts.s >= 0.0)) throw Error("s and reg must be nonnegative");
}

}  // namespace

QrWindow qr_window(const ContinuationProblem& prob, const CauchyTrace& trace, double t0,
                   const QrOptions& opts) {
  check_inputs(prob, trace, opts);
  const SpaceTimeField ut = extend_cauchy(trace, prob.grid, opts.extension_width);
  QrWindow win = QrSystem(prob).solve(ut, t0, opts);
  win.q_first = win.m_first;
  win.q_last = win.m_last;
  return win;
}

QrResult qr_continue(const ContinuationProblem& prob, const CauchyTrace& trace, const QrOptions& opts) {
  const Grid& g = prob.grid;
  const double dt = g.dt();
  check_inputs(prob, trace, opts);

  const SpaceTimeField ut = extend_cauchy(trace, g, opts.extension_width);
  const QrSystem sys(prob);
  QrResult res;
  res.m_lo = static_cast<int>(std::ceil(prob.epsilon / dt - 1e-9));
  res.m_hi = static_cast<int>(std::floor((g.T() - prob.epsilon) / dt + 1e-9));
  res.u = SpaceTimeField(g.size(), res.m_hi - res.m_lo + 1, res.m_lo);
  for (double t0 : window_centres(g.T(), prob.epsilon, prob.tau)) {
    res.windows.push_back(sys.solve(ut, t0, opts));
  }

  // assemble: each level goes to the window with the nearest centre
  for (int m = res.m_lo; m <= res.m_hi; ++m) {
    std::size_t best = 0;
    for (std::size_t w = 1; w < res.windows.size(); ++w) {
      if (std::abs(g.time(m) - res.windows[w].t0) < std::abs(g.time(m) - res.windows[best].t0)) best = w;
    }
    auto& win = res.windows[best];
    res.u.level(m) = win.u.level(m);
    if (win.q_first < 0) {
      win.q_first = m;
      win.q_last = m;
    } else {
      win.q_first = std::min(win.q_first, m);
      win.q_last = std::max(win.q_last, m);
    }
  }
  return res;
}

CoveringCheck covering_check(const ContinuationProblem& prob, const QrResult& res,
                             const SpaceTimeField& u_true) {
  const Grid& g = prob.grid;
  const Vec w = quadrature_weights(g, prob.omega0);
  CoveringCheck out;
  out.consistent = true;
  for (std::size_t i = 0; i + 1 < res.windows.size(); ++i) {
    const auto& a = res.windows[i];
    const auto& b = res.windows[i + 1];
    // overlap of the central halves (t0 - tau/2, t0 + tau/2)
    const double lo = std::max(a.t0, b.t0) - 0.5 * prob.tau;
    const double hi = std::min(a.t0, b.t0) + 0.5 * prob.tau;
    double dis = 0.0, ea = 0.0, eb = 0.0;
    int used = 0;
    for (int m = std::max(a.m_first, b.m_first); m <= std::min(a.m_last, b.m_last); ++m) {
      const double t = g.time(m);
      if (t < lo || t > hi) continue;
      const Vec ua = a.u.level(m), ub = b.u.level(m), ut = u_true.level(m);
      dis += w.dot((ua - ub).cwiseAbs2());
      ea += w.dot((ua - ut).cwiseAbs2());
      eb += w.dot((ub - ut).cwiseAbs2());
      ++used;
    }
    if (used == 0) continue;
    const double d = std::sqrt(g.dt() * dis);
    const double e = std::sqrt(g.dt() * std::max(ea, eb));
    out.disagreement = std::max(out.disagreement, d);
    out.single_error = std::max(out.single_error, e);
    out.consistent = out.consistent && d <= 2.0 * e;
    ++out.overlaps;
  }
  if (out.overlaps == 0) throw Error("window covering has no overlaps");
  return out;
}

double spacetime_l2(const Grid& grid, const SpaceTimeField& w, const Mask& region, int m0, int m1) {
  const Vec wx = quadrature_weights(grid, region);
  const Vec wt = time_weights(grid.dt(), m0, m1);
  double sum = 0.0;
  for (int m = m0; m <= m1; ++m) sum += wt(m - m0) * wx.dot(w.level(m).cwiseAbs2());
  return std::sqrt(sum);
}

double j_norm(const Grid& grid, const SpaceTimeField& w, const Mask& region, int m0, int m1) {
  const Vec wx = quadrature_weights(grid, region);
  const Vec wt = time_weights(grid.dt(), m0, m1);
  std::vector<SpMat> low;
  for (const auto& beta : multi_indices_up_to(grid.dim(), 2)) {
    if (beta.total() > 0) low.push_back(derivative_matrix(grid, beta));
  }
  SpMat lap(grid.size(), grid.size());
  std::vector<SpMat> grad;
  for (int a = 0; a < grid.dim(); ++a) {
    MultiIndex two, one;
    two.order[a] = 2;
    one.order[a] = 1;
    lap += derivative_matrix(grid, two);
    grad.push_back(derivative_matrix(grid, one));
  }
  const SpaceTimeField win = w.window(m0, m1);
  const SpaceTimeField dtw = win.time_derivative(grid.dt());
  double sum = 0.0;
  for (int m = m0; m <= m1; ++m) {
    const Vec y = win.level(m);
    Vec J = y.cwiseAbs() + dtw.level(m).cwiseAbs();
    for (const auto& D : low) J += (D * y).cwiseAbs();
    const Vec ly = lap * y;
    Vec g2 = Vec::Zero(grid.size());
    for (const auto& G : grad) g2 += (G * ly).cwiseAbs2();
    J += g2.cwiseSqrt() + (lap * ly).cwiseAbs();
    sum += wt(m - m0) * wx.dot(J.cwiseAbs2());
  }
  return std::sqrt(sum);
}

StabilityBudget make_budget(double M, double delta0, double C_balance) {
  if (!(M > 0.0) || !(delta0 > 0.0) || !(C_balance > 0.0)) {
    throw Error("budget needs M, delta0 and C positive");
  }
  return {M, delta0, C_balance, delta0 / (C_balance + delta0)};
}

Balance balance_s(double D, double M, double c, double delta0) {
  if (!(D > 0.0)) throw Error("data size D must be positive");
  if (!(c + delta0 > 0.0)) throw Error("c + delta0 must be positive");
  if (M <= D) return {0.0, true};
  return {2.0 / (c + delta0) * std::log(M / D), false};
}

TwoTermSweep two_term_sweep(const ContinuationProblem& prob, const SpaceTimeField& u_true,
                            const std::vector<double>& levels, const std::vector<double>& s_values,
                            unsigned long long seed, const QrOptions& opts, bool reg_rule) {
  const Grid& g = prob.grid;
  TwoTermSweep out;
  out.t0 = 0.5 * g.T();
  out.levels = levels;
  out.s_values = s_values;
  out.M = l2_time_sobolev_norm(g, u_true, 3, all_nodes(g), 0, g.Nt());
  out.delta0 = prob.lambda.thresholds.delta0;
  out.measured.resize(static_cast<int>(levels.size()), static_cast<int>(s_values.size()));
  const int m0 = static_cast<int>(std::ceil((out.t0 - 0.25 * prob.tau) / g.dt() - 1e-9));
  const int m1 = static_cast<int>(std::floor((out.t0 + 0.25 * prob.tau) / g.dt() + 1e-9));
  if (m1 - m0 < 2) throw Error("quarter window holds fewer than three levels");
  const auto clean = CauchyTrace::from_field(g, prob.gamma, u_true);
  const double D_clean = clean.data_size(g);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double D = levels[i] * D_clean;
    out.D.push_back(D);
    const auto noisy = add_trace_noise(clean, g, D, seed + 1000003ULL * i);
    for (std::size_t j = 0; j < s_values.size(); ++j) {
      QrOptions o = opts;
      o.s = s_values[j];
      if (reg_rule) o.reg = opts.reg * levels[i];
      const QrWindow win = qr_window(prob, noisy, out.t0, o);
      SpaceTimeField e = win.u.window(m0, m1);
      e.values -= u_true.window(m0, m1).values;
      e.first_level = m0;
      const double J = j_norm(g, e, prob.omega0, m0, m1);
      out.measured(static_cast<int>(i), static_cast<int>(j)) = J * J;
    }
  }
  return out;
}

TwoTermTable two_term_bound_check(const std::vector<double>& D, const Eigen::MatrixXd& measured,
                                  double M, double delta0, const std::vector<double>& s_values) {
  if (D.empty() || measured.rows() != static_cast<int>(D.size()) ||
      measured.cols() != static_cast<int>(s_values.size())) {
    throw Error("two-term table shape does not match D and s");
  }
  if (!(M > 0.0) || !(delta0 > 0.0)) throw Error("two-term check needs M and delta0 positive");
  TwoTermTable t;
  t.M = M;
  t.delta0 = delta0;
  for (int i = 0; i < measured.rows(); ++i) {
    if (!(D[i] > 0.0)) throw Error("data size D must be positive");
    for (int j = 0; j < measured.cols(); ++j) {
      if (s_values[j] == 0.0) t.C0 = std::max(t.C0, measured(i, j) / (D[i] * D[i] + M * M));
    }
  }
  double c = 1e-9 * delta0;
  for (int i = 0; i < measured.rows(); ++i) {
    for (int j = 0; j < measured.cols(); ++j) {
      const double s = s_values[j];
      const double excess = measured(i, j) / t.C0 - std::exp(-s * delta0) * M * M;
      if (s > 0.0 && excess > 0.0) c = std::max(c, std::log(excess / (D[i] * D[i])) / s);
    }
  }
  t.c_fit = c;
  t.holds = true;
  for (int i = 0; i < measured.rows(); ++i) {
    for (int j = 0; j < measured.cols(); ++j) {
      const double s = s_values[j];
      const double bound = t.C0 * (std::exp(c * s) * D[i] * D[i] + std::exp(-s * delta0) * M * M);
      t.holds = t.holds && measured(i, j) <= bound * (1.0 + 1e-12);
    }
    TwoTermRow row;
    row.D = D[i];
    const Balance bal = balance_s(D[i], M, c, delta0);
    row.s_star = bal.s_star;
    row.case2 = bal.case2;
    // stationary point of e^{cs} D^2 + e^{-s delta0} M^2
    row.s_knee = bal.case2 ? 0.0
                           : std::max(0.0, std::log(delta0 * M * M / (c * D[i] * D[i])) / (c + delta0));
    if (!row.case2) {
      const double r = row.s_knee > 0.0 ? std::max(row.s_star / row.s_knee, row.s_knee / row.s_star)
                                        : std::numeric_limits<double>::infinity();
      t.worst_knee_ratio = std::max(t.worst_knee_ratio, r);
    }
    t.rows.push_back(row);
  }
  return t;
}

HolderFit holder_fit(const std::vector<double>& D, const std::vector<double>& err) {
  if (D.size() != err.size()) throw Error("noise levels and errors differ in length");
  if (D.size() < 5) throw Error("Hoelder fit needs at least five noise levels");
  const auto [lo, hi] = std::minmax_element(D.begin(), D.end());
  if (!(*lo > 0.0)) throw Error("noise levels must be positive");
  HolderFit fit;
  fit.decades = std::log10(*hi / *lo);
  if (fit.decades < 3.0 - 1e-9) {
    std::ostringstream os;
    os << "noise levels span only " << fit.decades << " decades (need 3)";
    throw Error(os.str());
  }
  const int n = static_cast<int>(D.size());
  Eigen::MatrixXd X(n, 2);
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    if (!(err[i] > 0.0)) throw Error("errors must be positive for a log-log fit");
    X(i, 0) = 1.0;
    X(i, 1) = std::log(D[i]);
    y(i) = std::log(err[i]);
  }
  const Vec beta = X.colPivHouseholderQr().solve(y);
  fit.kappa_hat = beta(1);
  fit.C_hat = std::exp(beta(0));
  const Vec r = y - X * beta;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  fit.r2 = ss_tot > 0.0 ? 1.0 - r.squaredNorm() / ss_tot : 1.0;
  return fit;
}

NoiseSweep noise_sweep(const ContinuationProblem& prob, const SpaceTimeField& u_true,
                       const std::vector<double>& levels, int seeds, unsigned long long seed,
                       const QrOptions& opts, bool reg_rule) {
  if (seeds < 1) throw Error("noise sweep needs at least one seed");
  const Grid& g = prob.grid;
  NoiseSweep out;
  const auto clean = CauchyTrace::from_field(g, prob.gamma, u_true);
  out.D_clean = clean.data_size(g);
  out.M = l2_time_sobolev_norm(g, u_true, 3, all_nodes(g), 0, g.Nt());
  int m_lo = 0, m_hi = 0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    NoiseSweepRow row;
    row.level = levels[i];
    row.D = levels[i] * out.D_clean;
    QrOptions o = opts;
    if (reg_rule) o.reg = opts.reg * levels[i];
    std::vector<double> jerr;
    for (int k = 0; k < seeds; ++k) {
      const auto noisy = add_trace_noise(clean, g, row.D, seed + 1000003ULL * i + k);
      const auto rec = qr_continue(prob, noisy, o);
      m_lo = rec.m_lo;
      m_hi = rec.m_hi;
      SpaceTimeField e = rec.u;
      e.values -= u_true.window(rec.m_lo, rec.m_hi).values;
      row.per_seed.push_back(spacetime_l2(g, e, prob.omega0, rec.m_lo, rec.m_hi));
      const double j = j_norm(g, e, prob.omega0, rec.m_lo, rec.m_hi);
      jerr.push_back(j * j);
    }
    row.error = median(row.per_seed);
    row.j_error = median(jerr);
    out.rows.push_back(row);
  }
  out.u_norm = spacetime_l2(g, u_true, prob.omega0, m_lo, m_hi);
  out.monotone = true;
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    out.monotone = out.monotone && out.rows[i].error >= out.rows[i - 1].error;
  }
  return out;
}

}  // namespace carlab
