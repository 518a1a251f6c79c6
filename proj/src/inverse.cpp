#include "mfglab/inverse.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "mfglab/errors.hpp"
#include "mfglab/norms.hpp"
#include "mfglab/operators.hpp"
#include "mfglab/parallel.hpp"
#include "mfglab/stencil.hpp"

namespace mfglab {

namespace {

double field_l2(const SpaceTimeGrid& g, const std::vector<double>& f) {
  const auto& sw = g.space_weights();
  double acc = 0.0;
  for (int k = 0; k < g.nodes(); ++k) acc += sw[k] * f[k] * f[k];
  return std::sqrt(acc);
}

double block_norm(const std::vector<double>& f, size_t begin, size_t end) {
  double acc = 0.0;
  for (size_t i = begin; i < end; ++i) acc += f[i] * f[i];
  return std::sqrt(acc);
}

struct FeatureLayout {
  size_t u_gamma, v_gamma, ut_gamma, vt_gamma, u_snap, v_snap, end;
};

// Gamma block of one traced series w (levels l0..l1 x observed entries): H1 of w (which = 0)
// or of d_t w (which = 1).
void gamma_block(const SpaceTimeGrid& g, const BoundaryPartition& part, const ObservationWindow& win,
                 const std::vector<double>& w, int which, std::vector<double>& out) {
  const auto ent = observed_entries(part);
  const int m = static_cast<int>(ent.size());
  const int L = win.l1 - win.l0 + 1;
  std::vector<double> wt(w.size()), wtt(w.size());
  for (int i = 0; i < m; ++i) {
    series_d1(w.data() + i, L, m, g.tau(), wt.data() + i, m);
    series_d2(w.data() + i, L, m, g.tau(), wtt.data() + i, m);
  }
  const std::vector<double>& a = which == 0 ? w : wt;
  const std::vector<double>& at = which == 0 ? wt : wtt;
  auto tw = g.time_weights(win.l0, win.l1);
  const auto& b = g.boundary();
  std::vector<double> as(m, 0.0);
  for (int l = 0; l < L; ++l) {
    const double* row = a.data() + static_cast<size_t>(l) * m;
    if (g.dim() == 2) {
      int off = 0;
      for (Side s : part.observed_sides()) {
        int len = static_cast<int>(g.side_entries(s).size());
        double h = s == Side::X0 || s == Side::X1 ? g.hy() : g.hx();
        series_d1(row + off, len, 1, h, as.data() + off, 1);
        off += len;
      }
    }
    for (int i = 0; i < m; ++i) {
      double c = std::sqrt(tw[win.l0 + l] * b[ent[i]].arc_weight);
      out.push_back(c * row[i]);
      out.push_back(c * at[static_cast<size_t>(l) * m + i]);
      if (g.dim() == 2) out.push_back(c * as[i]);
    }
  }
}

void snapshot_block(const SpaceTimeGrid& g, const std::vector<double>& f, std::vector<double>& out) {
  std::vector<Deriv> ds{Deriv::X, Deriv::XX};
  if (g.dim() == 2) ds = {Deriv::X, Deriv::Y, Deriv::XX, Deriv::XY, Deriv::YY};
  std::vector<std::vector<double>> d(ds.size(), std::vector<double>(g.nodes()));
  for (size_t i = 0; i < ds.size(); ++i) spatial_derivative(g, f.data(), ds[i], d[i].data());
  const auto& sw = g.space_weights();
  for (int k = 0; k < g.nodes(); ++k) {
    double c = std::sqrt(sw[k]);
    out.push_back(c * f[k]);
    for (const auto& di : d) out.push_back(c * di[k]);
  }
}

FeatureLayout build_features(const SourceProblem& p, const ObservationBundle& b, std::vector<double>& out) {
  const auto& g = *p.grid;
  FeatureLayout lay;
  out.clear();
  lay.u_gamma = out.size();
  gamma_block(g, p.part, p.win, b.u_gamma, 0, out);
  lay.v_gamma = out.size();
  gamma_block(g, p.part, p.win, b.v_gamma, 0, out);
  lay.ut_gamma = out.size();
  gamma_block(g, p.part, p.win, b.u_gamma, 1, out);
  lay.vt_gamma = out.size();
  gamma_block(g, p.part, p.win, b.v_gamma, 1, out);
  lay.u_snap = out.size();
  snapshot_block(g, b.u_snap, out);
  lay.v_snap = out.size();
  snapshot_block(g, b.v_snap, out);
  lay.end = out.size();
  return lay;
}

std::vector<double> smooth_random(const SpaceTimeGrid& g, UniformNoise& rng) {
  double c[3][3];
  for (auto& row : c)
    for (double& v : row) v = rng.next();
  std::vector<double> f(g.nodes());
  for (int k = 0; k < g.nodes(); ++k) {
    double x = g.x(k) / g.lx(), y = g.dim() == 2 ? g.y(k) / g.ly() : 0.0;
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < (g.dim() == 2 ? 3 : 1); ++j) acc += c[i][j] * std::cos(M_PI * i * x) * std::cos(M_PI * j * y);
    f[k] = acc;
  }
  return f;
}

BoundaryTrace smooth_random_trace(const SpaceTimeGrid& g, const GridPtr& gp, UniformNoise& rng) {
  double amp[4], ph[4];
  for (int s = 0; s < 4; ++s) {
    amp[s] = rng.next();
    ph[s] = rng.next();
  }
  BoundaryTrace tr(gp);
  const auto& b = g.boundary();
  for (int n = 0; n < g.nt(); ++n)
    for (int e = 0; e < g.boundary_size(); ++e) {
      int s = static_cast<int>(b[e].side);
      tr.at(e, n) = amp[s] * std::sin(M_PI * g.t(n) / g.T() + ph[s]) * (1.0 + 0.5 * std::cos(M_PI * b[e].sigma));
    }
  return tr;
}

ObservationBundle difference(const ObservationBundle& a, const ObservationBundle& b) {
  ObservationBundle d = a;
  for (size_t i = 0; i < d.u_gamma.size(); ++i) d.u_gamma[i] -= b.u_gamma[i];
  for (size_t i = 0; i < d.v_gamma.size(); ++i) d.v_gamma[i] -= b.v_gamma[i];
  for (size_t i = 0; i < d.u_snap.size(); ++i) d.u_snap[i] -= b.u_snap[i];
  for (size_t i = 0; i < d.v_snap.size(); ++i) d.v_snap[i] -= b.v_snap[i];
  d.g -= b.g;
  d.h -= b.h;
  return d;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

}  // namespace

ObservationWindow make_window(const SpaceTimeGrid& g, double t0, double t_begin, double t_end) {
  if (!(0.0 < t_begin && t_begin < t0 && t0 < t_end && t_end < g.T()))
    throw ConfigError(fmt::format("observation window needs 0 < t_begin < t0 < t_end < T (got {}, {}, {}, T = {})",
                                  t_begin, t0, t_end, g.T()));
  ObservationWindow w;
  auto [l0, l1] = window_levels(g, t_begin, t_end);
  w.l0 = l0;
  w.l1 = l1;
  // Snapshot at the nearest time level; callers report g.t(level) as the t0 used.
  w.level = static_cast<int>(std::lround(t0 / g.tau()));
  if (w.level - 2 < 0 || w.level + 2 > g.nt() - 1 || w.level <= l0 || w.level >= l1)
    throw ConfigError(fmt::format("t0 = {} must lie strictly inside the window with two levels on each side", t0));
  if (l1 - l0 + 1 < 5) throw ConfigError("observation window must hold at least 5 time levels");
  return w;
}

void check_positivity(const SourceProblem& p) {
  const auto& g = *p.grid;
  for (int k = 0; k < g.nodes(); ++k) {
    double a = std::fabs(p.q1.at(k, p.win.level)), b = std::fabs(p.q2.at(k, p.win.level));
    if (a < p.q_min || b < p.q_min)
      throw InvariantViolation(fmt::format("positivity floor violated at node {} (x = {}, y = {}): |q1| = {:.3e}, "
                                           "|q2| = {:.3e}, q_min = {:.3e}",
                                           k, g.x(k), g.y(k), a, b, p.q_min));
  }
}

SourcePair zero_sources(const SpaceTimeGrid& g) {
  return {std::vector<double>(g.nodes(), 0.0), std::vector<double>(g.nodes(), 0.0)};
}

std::vector<double> stack(const SourcePair& f) {
  std::vector<double> x(f.f1);
  x.insert(x.end(), f.f2.begin(), f.f2.end());
  return x;
}

SourcePair unstack(const std::vector<double>& x, int nodes) {
  return {std::vector<double>(x.begin(), x.begin() + nodes), std::vector<double>(x.begin() + nodes, x.end())};
}

double source_norm(const SpaceTimeGrid& g, const SourcePair& f) {
  return std::hypot(field_l2(g, f.f1), field_l2(g, f.f2));
}

SourcePair direct_source_formula(const SourceProblem& p, const ScalarField& u, const ScalarField& v,
                                 const std::vector<double>* ut, const std::vector<double>* vt) {
  check_positivity(p);
  const auto& g = *p.grid;
  const int n = p.win.level, N = g.nodes();
  std::vector<double> dut = ut ? *ut : time_derivative4(u, n);
  std::vector<double> dvt = vt ? *vt : time_derivative4(v, n);
  std::vector<double> Au = apply_A(u, n, p.coef), Bv = apply_B(v, n, p.coef), A0u = apply_A0(u, n, p.coef);
  SourcePair f = zero_sources(g);
  for (int k = 0; k < N; ++k) {
    double c0 = p.coef.at(C0, k, n);
    double r1 = dut[k] + Au[k] - c0 * v.at(k, n) - p.base.F.at(k, n);
    double r2 = dvt[k] - Bv[k] - A0u[k] - p.base.G.at(k, n);
    f.f1[k] = r1 / p.q1.at(k, n);
    f.f2[k] = r2 / p.q2.at(k, n);
  }
  return f;
}

std::vector<int> observed_entries(const BoundaryPartition& part) {
  const auto& g = *part.grid();
  std::vector<int> out;
  for (Side s : part.observed_sides())
    for (int e : g.side_entries(s)) out.push_back(e);
  return out;
}

ObservationBundle observe(const SourceProblem& p, const ScalarField& u, const ScalarField& v, const SystemData& d) {
  const auto& g = *p.grid;
  const auto ent = observed_entries(p.part);
  const auto& b = g.boundary();
  ObservationBundle o;
  for (int n = p.win.l0; n <= p.win.l1; ++n)
    for (int e : ent) {
      o.u_gamma.push_back(u.at(b[e].node, n));
      o.v_gamma.push_back(v.at(b[e].node, n));
    }
  o.u_snap.assign(u.level(p.win.level), u.level(p.win.level) + g.nodes());
  o.v_snap.assign(v.level(p.win.level), v.level(p.win.level) + g.nodes());
  o.g = d.g;
  o.h = d.h;
  return o;
}

SystemData source_data(const SourceProblem& p, const SourcePair& f) {
  SystemData d = p.base;
  const auto& g = *p.grid;
  for (int n = 0; n < g.nt(); ++n)
    for (int k = 0; k < g.nodes(); ++k) {
      d.F.at(k, n) += p.q1.at(k, n) * f.f1[k];
      d.G.at(k, n) += p.q2.at(k, n) * f.f2[k];
    }
  return d;
}

ObservationBundle simulate(const SourceProblem& p, const LinearizedSolver& solver, const SourcePair& f) {
  SystemData d = source_data(p, f);
  SolveResult r = solver.solve(d);
  return observe(p, r.u, r.v, d);
}

double DataNorms::total(bool with_star) const {
  double t = u_gamma + v_gamma + ut_gamma + vt_gamma + u_snap + v_snap;
  if (with_star) t += g_star + h_star + gt_star + ht_star;
  return t;
}

std::vector<double> features(const SourceProblem& p, const ObservationBundle& b) {
  std::vector<double> out;
  build_features(p, b, out);
  return out;
}

DataNorms data_norms(const SourceProblem& p, const ObservationBundle& b) {
  std::vector<double> f;
  FeatureLayout lay = build_features(p, b, f);
  DataNorms n;
  n.u_gamma = block_norm(f, lay.u_gamma, lay.v_gamma);
  n.v_gamma = block_norm(f, lay.v_gamma, lay.ut_gamma);
  n.ut_gamma = block_norm(f, lay.ut_gamma, lay.vt_gamma);
  n.vt_gamma = block_norm(f, lay.vt_gamma, lay.u_snap);
  n.u_snap = block_norm(f, lay.u_snap, lay.v_snap);
  n.v_snap = block_norm(f, lay.v_snap, lay.end);
  const int l0 = p.win.l0, l1 = p.win.l1;
  n.g_star = norm_star(b.g, p.part, l0, l1);
  n.h_star = norm_star(b.h, p.part, l0, l1);
  n.gt_star = norm_star(time_derivative(b.g), p.part, l0, l1);
  n.ht_star = norm_star(time_derivative(b.h), p.part, l0, l1);
  return n;
}

std::vector<int> interior_nodes(const SpaceTimeGrid& g) {
  std::vector<int> out;
  for (int k = 0; k < g.nodes(); ++k)
    if (!g.on_boundary(k)) out.push_back(k);
  return out;
}

SourcePair expand_sources(const SpaceTimeGrid& g, const std::vector<int>& unknowns, const Eigen::VectorXd& x) {
  const int nu = static_cast<int>(unknowns.size());
  SourcePair f = zero_sources(g);
  for (int i = 0; i < nu; ++i) {
    f.f1[unknowns[i]] = x[i];
    f.f2[unknowns[i]] = x[i + nu];
  }
  const int nx = g.nx(), ny = g.ny();
  for (auto* v : {&f.f1, &f.f2}) {
    auto& a = *v;
    int j0 = g.dim() == 2 ? 1 : 0, j1 = g.dim() == 2 ? ny - 2 : 0;
    for (int j = j0; j <= j1; ++j) {
      a[g.node(0, j)] = 2.0 * a[g.node(1, j)] - a[g.node(2, j)];
      a[g.node(nx - 1, j)] = 2.0 * a[g.node(nx - 2, j)] - a[g.node(nx - 3, j)];
    }
    if (g.dim() == 2)
      for (int i = 0; i < nx; ++i) {
        a[g.node(i, 0)] = 2.0 * a[g.node(i, 1)] - a[g.node(i, 2)];
        a[g.node(i, ny - 1)] = 2.0 * a[g.node(i, ny - 2)] - a[g.node(i, ny - 3)];
      }
  }
  return f;
}

ForwardMap assemble_forward_map(const SourceProblem& p, const LinearizedSolver& solver, int workers) {
  const auto& g = *p.grid;
  ForwardMap fm;
  fm.grid = p.grid;
  fm.unknowns = interior_nodes(g);
  const int nu = static_cast<int>(fm.unknowns.size());
  fm.offset = to_vec(features(p, simulate(p, solver, zero_sources(g))));
  fm.M.resize(fm.offset.size(), 2 * nu);
  SourceProblem hom = p;
  hom.base = SystemData::zeros(p.grid);
  parallel_for(2 * nu, workers, [&](int j) {
    SourcePair f = zero_sources(g);
    const int node = fm.unknowns[j % nu];
    (j < nu ? f.f1 : f.f2)[node] = 1.0;
    try {
      fm.M.col(j) = to_vec(features(hom, simulate(hom, solver, f)));
    } catch (const SolverError& e) {
      throw SolverError(e.kind(), fmt::format("forward map column {} ({} at node {}): {}", j, j < nu ? "f1" : "f2",
                                              node, e.what()),
                        e.level(), e.last_update());
    }
  });
  fm.mass.resize(2 * nu);
  for (int i = 0; i < nu; ++i) fm.mass[i] = fm.mass[i + nu] = g.space_weights()[fm.unknowns[i]];
  return fm;
}

Reconstruction reconstruct_tikhonov(const ForwardMap& fm, const Eigen::VectorXd& y, double beta) {
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
  Eigen::MatrixXd A = fm.M.transpose() * fm.M;
  A.diagonal() += beta * fm.mass;
  Eigen::VectorXd rhs = fm.M.transpose() * (y - fm.offset);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
  Reconstruction r;
  r.beta = beta;
  r.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (beta == 0.0 && !(lmin > 1e-13 * lmax))
    throw InvariantViolation(fmt::format("normal matrix is rank deficient at beta = 0 (eigenvalues {:.3e} .. {:.3e}); "
                                         "set beta > 0",
                                         lmin, lmax));
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  Eigen::VectorXd x = ldlt.solve(rhs);
  r.residual = (fm.M * x + fm.offset - y).norm();
  r.solution = std::sqrt(x.dot(fm.mass.cwiseProduct(x)));
  r.f = expand_sources(*fm.grid, fm.unknowns, x);
  return r;
}

double tikhonov_objective(const ForwardMap& fm, const Eigen::VectorXd& y, double beta, const Eigen::VectorXd& x) {
  return (fm.M * x + fm.offset - y).squaredNorm() + beta * x.dot(fm.mass.cwiseProduct(x));
}

Eigen::VectorXd tikhonov_gradient(const ForwardMap& fm, const Eigen::VectorXd& y, double beta,
                                  const Eigen::VectorXd& x) {
  return 2.0 * fm.M.transpose() * (fm.M * x + fm.offset - y) + 2.0 * beta * fm.mass.cwiseProduct(x);
}

GradientCheck gradient_check(const SourceProblem& p, const LinearizedSolver& solver, const ForwardMap& fm,
                             const Eigen::VectorXd& y, double beta, int directions, std::uint64_t seed) {
  const int n = static_cast<int>(fm.mass.size());
  UniformNoise rng(seed);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.next();
  auto J = [&](const Eigen::VectorXd& z) {
    SourcePair f = expand_sources(*p.grid, fm.unknowns, z);
    Eigen::VectorXd r = to_vec(features(p, simulate(p, solver, f))) - y;
    return r.squaredNorm() + beta * z.dot(fm.mass.cwiseProduct(z));
  };
  Eigen::VectorXd grad = tikhonov_gradient(fm, y, beta, x);
  GradientCheck gc;
  const double h = 1e-3 * std::max(1.0, x.norm());
  for (int d = 0; d < directions; ++d) {
    Eigen::VectorXd dir(n);
    for (int i = 0; i < n; ++i) dir[i] = rng.next();
    dir.normalize();
    double fd = (J(x + h * dir) - J(x - h * dir)) / (2.0 * h);
    double an = grad.dot(dir);
    double err = std::fabs(fd - an) / std::max(std::fabs(an), 1e-300);
    gc.rel_errors.push_back(err);
    gc.max_rel_error = std::max(gc.max_rel_error, err);
  }
  return gc;
}

LCurve l_curve(const ForwardMap& fm, const Eigen::VectorXd& y, double beta_min, double beta_max, int points) {
  if (points < 3 || !(beta_min > 0.0) || !(beta_max > beta_min)) throw ConfigError("invalid L-curve beta grid");
  LCurve lc;
  for (int i = 0; i < points; ++i) {
    double b = beta_min * std::pow(beta_max / beta_min, static_cast<double>(i) / (points - 1));
    Reconstruction r = reconstruct_tikhonov(fm, y, b);
    lc.beta.push_back(b);
    lc.residual.push_back(r.residual);
    lc.solution.push_back(r.solution);
  }
  // Menger curvature of consecutive points of (log residual, log solution).
  double best = -std::numeric_limits<double>::infinity();
  lc.corner = points / 2;
  auto pt = [&](int i) {
    return std::array<double, 2>{std::log(std::max(lc.residual[i], 1e-300)), std::log(std::max(lc.solution[i], 1e-300))};
  };
  for (int i = 1; i + 1 < points; ++i) {
    auto a = pt(i - 1), b = pt(i), c = pt(i + 1);
    double cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    double ab = std::hypot(b[0] - a[0], b[1] - a[1]), bc = std::hypot(c[0] - b[0], c[1] - b[1]);
    double ca = std::hypot(a[0] - c[0], a[1] - c[1]);
    double denom = ab * bc * ca;
    if (denom <= 0.0) continue;
    // Corner of the L bends toward the origin: negative orientation in (rho, eta) order.
    double kappa = -2.0 * cross / denom;
    if (kappa > best) {
      best = kappa;
      lc.corner = i;
    }
  }
  return lc;
}

UniformNoise::UniformNoise(std::uint64_t seed) : state_(seed) {}

double UniformNoise::next() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return 2.0 * (static_cast<double>(z >> 11) * 0x1.0p-53) - 1.0;
}

void add_noise(ObservationBundle& b, double amp, UniformNoise& rng) {
  for (auto* ch : {&b.u_gamma, &b.v_gamma, &b.u_snap, &b.v_snap}) {
    double mx = 0.0;
    for (double x : *ch) mx = std::max(mx, std::fabs(x));
    for (double& x : *ch) x += amp * mx * rng.next();
  }
}

std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  const size_t n = lx.size();
  if (n < 2) return {0.0, 0.0};
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) return {0.0, 0.0};
  double slope = sxy / sxx, res = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double r = ly[i] - (my + slope * (lx[i] - mx));
    res += r * r;
  }
  return {slope, std::sqrt(res / n)};
}

namespace {

void summarize(std::vector<LipschitzTrial>& trials, double& C) {
  C = 0.0;
  for (auto& t : trials) {
    t.used = t.D > 0.0;
    if (t.used) {
      t.ratio = t.E / t.D;
      C = std::max(C, t.ratio);
    }
  }
}

}  // namespace

LipschitzReport lipschitz_pairs(const SourceProblem& p, const LinearizedSolver& solver, int trials,
                                std::uint64_t seed) {
  if (trials < 5) throw ConfigError("a Lipschitz experiment needs at least 5 trials");
  const auto& g = *p.grid;
  UniformNoise rng(seed);
  LipschitzReport rep;
  rep.mode = "pairs";
  std::vector<double> Ds, Es;
  for (int homogeneous = 0; homogeneous < 2; ++homogeneous) {
    auto& out = homogeneous ? rep.homogeneous_trials : rep.trials;
    for (int i = 0; i < trials; ++i) {
      double scale = std::pow(10.0, -2.0 + 3.0 * 0.5 * (rng.next() + 1.0));
      SourcePair fa{smooth_random(g, rng), smooth_random(g, rng)};
      SourcePair fb{smooth_random(g, rng), smooth_random(g, rng)};
      for (int k = 0; k < g.nodes(); ++k) {
        fb.f1[k] = fa.f1[k] + scale * fb.f1[k];
        fb.f2[k] = fa.f2[k] + scale * fb.f2[k];
      }
      SourceProblem pa = p, pb = p;
      if (homogeneous) {
        for (auto* q : {&pa, &pb}) {
          q->base.g = BoundaryTrace(p.grid);
          q->base.h = BoundaryTrace(p.grid);
        }
      } else {
        BoundaryTrace dg = smooth_random_trace(g, p.grid, rng), dh = smooth_random_trace(g, p.grid, rng);
        pb.base.g += scale * dg;
        pb.base.h += scale * dh;
      }
      ObservationBundle oa = simulate(pa, solver, fa), ob = simulate(pb, solver, fb);
      LipschitzTrial t;
      t.D = data_norms(p, difference(ob, oa)).total(!homogeneous);
      std::vector<double> d1(g.nodes()), d2(g.nodes());
      for (int k = 0; k < g.nodes(); ++k) {
        d1[k] = fb.f1[k] - fa.f1[k];
        d2[k] = fb.f2[k] - fa.f2[k];
      }
      t.E = field_l2(g, d1) + field_l2(g, d2);
      out.push_back(t);
    }
  }
  summarize(rep.trials, rep.C_emp);
  summarize(rep.homogeneous_trials, rep.C_emp_homogeneous);
  for (const auto& t : rep.trials)
    if (t.used) {
      Ds.push_back(t.D);
      Es.push_back(t.E);
    }
  std::tie(rep.slope, rep.slope_residual) = loglog_fit(Ds, Es);
  return rep;
}

LipschitzReport lipschitz_noise(const SourceProblem& p, const LinearizedSolver& solver, const ForwardMap& fm,
                                const SourcePair& truth, const std::vector<double>& amplitudes, double beta,
                                int repeats, std::uint64_t seed) {
  if (amplitudes.size() * repeats < 5) throw ConfigError("a Lipschitz experiment needs at least 5 trials");
  const auto& g = *p.grid;
  UniformNoise rng(seed);
  LipschitzReport rep;
  rep.mode = "noise";
  rep.amplitudes = amplitudes;
  rep.beta = beta;
  ObservationBundle clean = simulate(p, solver, truth);
  const double fnorm = source_norm(g, truth);
  std::vector<double> mean_err;
  for (double amp : amplitudes) {
    double acc = 0.0;
    for (int r = 0; r < repeats; ++r) {
      ObservationBundle noisy = clean;
      add_noise(noisy, amp, rng);
      Reconstruction rec = reconstruct_tikhonov(fm, to_vec(features(p, noisy)), beta);
      std::vector<double> d1(g.nodes()), d2(g.nodes());
      for (int k = 0; k < g.nodes(); ++k) {
        d1[k] = rec.f.f1[k] - truth.f1[k];
        d2[k] = rec.f.f2[k] - truth.f2[k];
      }
      LipschitzTrial t;
      t.D = data_norms(p, difference(noisy, clean)).total(false);
      t.E = field_l2(g, d1) + field_l2(g, d2);
      acc += std::hypot(field_l2(g, d1), field_l2(g, d2)) / fnorm;
      rep.trials.push_back(t);
    }
    mean_err.push_back(acc / repeats);
  }
  summarize(rep.trials, rep.C_emp);
  for (size_t i = 1; i < mean_err.size(); ++i)
    if (mean_err[i] < mean_err[i - 1]) rep.monotone = false;
  std::tie(rep.slope, rep.slope_residual) = loglog_fit(amplitudes, mean_err);
  rep.mean_errors = mean_err;
  return rep;
}

}  // namespace mfglab
