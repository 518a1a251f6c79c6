#include "mfglab/nonlinear.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mfglab/errors.hpp"
#include "mfglab/manufacture.hpp"
#include "mfglab/stencil.hpp"

namespace mfglab {

namespace {

struct Derived {
  ScalarField a, ax, ay, lap_a, kappa, kx, ky, c0;
};

Derived derive(const NonlinearCoefficients& nc, const GridPtr& g) {
  Derived d;
  d.a = sample_field(nc.a, g);
  for (double x : d.a.v)
    if (!(x > 0.0)) throw ConfigError("nonlinear system: diffusion coefficient a must be positive");
  Expr ax = nc.a.diff(Var::X);
  Expr ay = g->dim() == 2 ? nc.a.diff(Var::Y) : Expr::constant(0.0);
  Expr lap = ax.diff(Var::X) + (g->dim() == 2 ? ay.diff(Var::Y) : Expr::constant(0.0));
  d.ax = sample_field(ax, g);
  d.ay = sample_field(ay, g);
  d.lap_a = sample_field(lap, g);
  d.kappa = sample_field(nc.kappa, g);
  d.kx = sample_field(nc.kappa.diff(Var::X), g);
  d.ky = sample_field(g->dim() == 2 ? nc.kappa.diff(Var::Y) : Expr::constant(0.0), g);
  d.c0 = sample_field(nc.c0, g);
  return d;
}

SystemData as_linear_data(const NonlinearData& d, const GridPtr& g) {
  SystemData s = SystemData::zeros(g);
  s.F = d.F;
  s.G = d.G;
  s.uT = d.uT;
  s.v0 = d.v0;
  return s;
}

SampledCoefficients frozen_from(const Derived& dv, const GridPtr& g, const ScalarField* u_lag,
                                const ScalarField* u_frozen) {
  const auto& G = *g;
  SampledCoefficients sc(g);
  const size_t nn = static_cast<size_t>(G.nodes()) * G.nt();
  ScalarField lx(g), ly(g), fx(g), fy(g), flap(g);
  if (u_lag) {
    lx = spatial_derivative(*u_lag, Deriv::X);
    if (G.dim() == 2) ly = spatial_derivative(*u_lag, Deriv::Y);
  }
  if (u_frozen) {
    fx = spatial_derivative(*u_frozen, Deriv::X);
    flap = spatial_derivative(*u_frozen, Deriv::XX);
    if (G.dim() == 2) {
      fy = spatial_derivative(*u_frozen, Deriv::Y);
      flap += spatial_derivative(*u_frozen, Deriv::YY);
    }
  }
  for (size_t i = 0; i < nn; ++i) {
    double a = dv.a.v[i], k = dv.kappa.v[i];
    sc.c[A11][i] = a;
    sc.c[B11][i] = a;
    sc.c[A1][i] = -0.5 * k * lx.v[i];
    sc.c[B1][i] = 2.0 * dv.ax.v[i] + k * fx.v[i];
    sc.c[B0][i] = dv.lap_a.v[i] + dv.kx.v[i] * fx.v[i] + dv.ky.v[i] * fy.v[i] + k * flap.v[i];
    sc.c[C0][i] = -dv.c0.v[i];
    if (G.dim() == 2) {
      sc.c[A22][i] = a;
      sc.c[B22][i] = a;
      sc.c[A2][i] = -0.5 * k * ly.v[i];
      sc.c[B2][i] = 2.0 * dv.ay.v[i] + k * fy.v[i];
    }
  }
  // a d_nu v + (d_nu a) v = 0 in conormal form: q = -d_nu a.
  const auto& b = G.boundary();
  for (int n = 0; n < G.nt(); ++n)
    for (int e = 0; e < G.boundary_size(); ++e) {
      int k = b[e].node;
      sc.q_at(e, n) = -(b[e].normal[0] * dv.ax.at(k, n) + b[e].normal[1] * dv.ay.at(k, n));
    }
  return sc;
}

}  // namespace

NonlinearData NonlinearData::zeros(const GridPtr& g) {
  NonlinearData d;
  d.F = ScalarField(g);
  d.G = ScalarField(g);
  d.uT.assign(g->nodes(), 0.0);
  d.v0.assign(g->nodes(), 0.0);
  return d;
}

SampledCoefficients frozen_coefficients(const NonlinearCoefficients& nc, const GridPtr& g, const ScalarField* u_lag,
                                        const ScalarField* u_frozen) {
  return frozen_from(derive(nc, g), g, u_lag, u_frozen);
}

NonlinearResult solve_nonlinear(const NonlinearData& d, const NonlinearCoefficients& nc, const GridPtr& g,
                                const SolveOptions& opts) {
  opts.validate();
  Derived dv = derive(nc, g);
  SystemData lin = as_linear_data(d, g);
  NonlinearResult res;
  res.u = ScalarField(g);
  res.v = ScalarField(g);
  const int max_it = opts.fixed_iterations > 0 ? opts.fixed_iterations : opts.picard_max;
  for (int it = 1; it <= max_it; ++it) {
    SampledCoefficients cu = frozen_from(dv, g, &res.u, &res.u);
    ScalarField u = LinearizedSolver(cu, opts, LinearizedSolver::Part::UOnly).step_backward_u(res.v, lin);
    SampledCoefficients cv = frozen_from(dv, g, &res.u, &u);
    ScalarField v = LinearizedSolver(cv, opts, LinearizedSolver::Part::VOnly).step_forward_v(u, lin);
    double upd = relative_update(u, res.u, v, res.v);
    res.u = std::move(u);
    res.v = std::move(v);
    res.updates.push_back(upd);
    res.iterations = it;
    if (opts.fixed_iterations == 0 && upd <= opts.picard_tol) {
      res.converged = true;
      break;
    }
  }
  if (opts.fixed_iterations > 0) res.converged = true;
  if (!res.converged && opts.throw_on_nonconvergence)
    throw SolverError(SolverError::Kind::MaxIterationsExceeded,
                      fmt::format("nonlinear Picard iteration did not converge in {} sweeps (last update {:.3e})",
                                  max_it, res.updates.back()),
                      -1, res.updates.back());
  auto [ru, rv] = nonlinear_residual(res.u, res.v, d, nc);
  res.residual_u = ru;
  res.residual_v = rv;
  return res;
}

std::pair<double, double> nonlinear_residual(const ScalarField& u, const ScalarField& v, const NonlinearData& d,
                                             const NonlinearCoefficients& nc) {
  const GridPtr& g = u.grid;
  const auto& G = *g;
  Derived dv = derive(nc, g);
  ScalarField ut = time_derivative(u), vt = time_derivative(v);
  ScalarField ux = spatial_derivative(u, Deriv::X), uxx = spatial_derivative(u, Deriv::XX);
  ScalarField vx = spatial_derivative(v, Deriv::X), vxx = spatial_derivative(v, Deriv::XX);
  ScalarField uy(g), uyy(g), vy(g), vyy(g);
  if (G.dim() == 2) {
    uy = spatial_derivative(u, Deriv::Y);
    uyy = spatial_derivative(u, Deriv::YY);
    vy = spatial_derivative(v, Deriv::Y);
    vyy = spatial_derivative(v, Deriv::YY);
  }
  auto tw = G.time_weights(0, G.nt() - 1);
  const auto& sw = G.space_weights();
  double ru = 0, su = 0, rv = 0, sv = 0;
  for (int n = 0; n < G.nt(); ++n)
    for (int k = 0; k < G.nodes(); ++k) {
      if (G.on_boundary(k)) continue;
      size_t i = static_cast<size_t>(n) * G.nodes() + k;
      double a = dv.a.v[i], kap = dv.kappa.v[i];
      double lap_u = uxx.v[i] + uyy.v[i], lap_v = vxx.v[i] + vyy.v[i];
      double grad2 = ux.v[i] * ux.v[i] + uy.v[i] * uy.v[i];
      double t1 = a * lap_u, t2 = -0.5 * kap * grad2, t3 = dv.c0.v[i] * v.v[i];
      double r1 = ut.v[i] + t1 + t2 + t3 - d.F.v[i];
      double s1 = std::fabs(ut.v[i]) + std::fabs(t1) + std::fabs(t2) + std::fabs(t3) + std::fabs(d.F.v[i]);
      double lap_av = a * lap_v + 2.0 * (dv.ax.v[i] * vx.v[i] + dv.ay.v[i] * vy.v[i]) + dv.lap_a.v[i] * v.v[i];
      double div_k = kap * (ux.v[i] * vx.v[i] + uy.v[i] * vy.v[i]) +
                     v.v[i] * (dv.kx.v[i] * ux.v[i] + dv.ky.v[i] * uy.v[i] + kap * lap_u);
      double r2 = vt.v[i] - lap_av - div_k - d.G.v[i];
      double s2 = std::fabs(vt.v[i]) + std::fabs(lap_av) + std::fabs(div_k) + std::fabs(d.G.v[i]);
      double w = tw[n] * sw[k];
      ru += w * r1 * r1;
      su += w * s1 * s1;
      rv += w * r2 * r2;
      sv += w * s2 * s2;
    }
  auto rel = [](double r, double s) { return r == 0.0 ? 0.0 : std::sqrt(r) / std::max(std::sqrt(s), 1e-300); };
  return {rel(ru, su), rel(rv, sv)};
}

double winf_norm(const ScalarField& f, int order) {
  const auto& G = *f.grid;
  std::vector<Deriv> ds;
  ds.push_back(Deriv::X);
  if (G.dim() == 2) ds.push_back(Deriv::Y);
  if (order >= 2) {
    ds.push_back(Deriv::XX);
    if (G.dim() == 2) {
      ds.push_back(Deriv::XY);
      ds.push_back(Deriv::YY);
    }
  }
  std::vector<double> buf(G.nodes());
  double best = 0.0;
  for (int n = 0; n < G.nt(); ++n) {
    const double* p = f.level(n);
    double total = 0.0, m = 0.0;
    for (int k = 0; k < G.nodes(); ++k) m = std::max(m, std::fabs(p[k]));
    total += m;
    for (Deriv d : ds) {
      spatial_derivative(G, p, d, buf.data());
      m = 0.0;
      for (double x : buf) m = std::max(m, std::fabs(x));
      // The mixed derivative appears twice in the multi-index sum.
      total += (d == Deriv::XY ? 2.0 : 1.0) * m;
    }
    best = std::max(best, total);
  }
  return best;
}

}  // namespace mfglab
