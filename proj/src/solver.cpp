#include "mfglab/solver.hpp"

#include <cmath>
#include <mutex>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <fmt/format.h>
#include <lapacke.h>

#include "mfglab/errors.hpp"

namespace mfglab {

namespace {

constexpr int kBand = 2;  // one-sided 3-point Robin rows reach two nodes inward

class BandedLU final : public LevelSolver {
 public:
  BandedLU(int n, const std::vector<SparseRow>& rows, int level) : n_(n), ldab_(2 * kBand + kBand + 1) {
    ab_.assign(static_cast<size_t>(ldab_) * n_, 0.0);
    ipiv_.assign(n_, 0);
    for (int i = 0; i < n_; ++i)
      for (const auto& [j, w] : rows[i].e) {
        if (std::abs(i - j) > kBand) throw SolverError(SolverError::Kind::LinearSolve, "stencil exceeds band", level);
        ab_[static_cast<size_t>(j) * ldab_ + (2 * kBand + i - j)] += w;
      }
    lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n_, n_, kBand, kBand, ab_.data(), ldab_, ipiv_.data());
    if (info != 0)
      throw SolverError(SolverError::Kind::LinearSolve,
                        fmt::format("banded LU failed at time level {} (info {})", level, info), level);
  }

  void solve(const double* rhs, double* x) const override {
    std::copy(rhs, rhs + n_, x);
    lapack_int info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n_, kBand, kBand, 1, ab_.data(), ldab_, ipiv_.data(), x, n_);
    if (info != 0) throw SolverError(SolverError::Kind::LinearSolve, "banded triangular solve failed");
  }

 private:
  int n_;
  int ldab_;
  std::vector<double> ab_;
  std::vector<lapack_int> ipiv_;
};

class PreconditionedIterative final : public LevelSolver {
 public:
  PreconditionedIterative(int n, const std::vector<SparseRow>& rows, double tol, int level) : level_(level) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i)
      for (const auto& [j, w] : rows[i].e) trip.emplace_back(i, j, w);
    m_.resize(n, n);
    m_.setFromTriplets(trip.begin(), trip.end());
    m_.makeCompressed();
    solver_.preconditioner().setDroptol(1e-6);
    solver_.preconditioner().setFillfactor(20);
    solver_.setTolerance(tol);
    solver_.setMaxIterations(2000);
    solver_.compute(m_);
    if (solver_.info() != Eigen::Success)
      throw SolverError(SolverError::Kind::LinearSolve,
                        fmt::format("incomplete factorization failed at time level {}", level), level);
  }

  void solve(const double* rhs, double* x) const override {
    Eigen::Map<const Eigen::VectorXd> b(rhs, m_.rows());
    Eigen::VectorXd sol;
    {
      // The Eigen solver records iteration statistics in mutable members.
      std::lock_guard<std::mutex> lock(mu_);
      sol = solver_.solve(b);
      if (solver_.info() != Eigen::Success)
        throw SolverError(SolverError::Kind::LinearSolve,
                          fmt::format("preconditioned BiCGSTAB did not converge at time level {} (error {:.3e})",
                                      level_, solver_.error()),
                          level_);
    }
    std::copy(sol.data(), sol.data() + sol.size(), x);
  }

 private:
  int level_;
  Eigen::SparseMatrix<double> m_;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> solver_;
  mutable std::mutex mu_;
};

// Rows of the implicit system at time level n: I/tau - theta*Op on interior nodes,
// averaged Robin rows on boundary nodes.
std::vector<SparseRow> implicit_rows(const DiscreteOperators& ops, Which which, int n, double theta) {
  const auto& c = ops.coefficients();
  const auto& g = *c.grid;
  const SparseRM& op = ops.op(which, n);
  const SparseRM& nop = ops.conormal(which, n);
  std::vector<SparseRow> rows(g.nodes());
  const double inv_tau = 1.0 / g.tau();
  for (int k = 0; k < g.nodes(); ++k) {
    SparseRow& r = rows[k];
    const auto& ents = g.entries_at(k);
    if (ents.empty()) {
      r.add(k, inv_tau);
      for (SparseRM::InnerIterator it(op, k); it; ++it) r.add(static_cast<int>(it.col()), -theta * it.value());
    } else {
      double wgt = 1.0 / ents.size();
      for (int e : ents) {
        for (SparseRM::InnerIterator it(nop, e); it; ++it) r.add(static_cast<int>(it.col()), wgt * it.value());
        double rc = which == Which::A ? c.p_at(e, n) : c.q_at(e, n);
        r.add(k, -wgt * rc);
      }
    }
    r.finish();
  }
  return rows;
}

std::unique_ptr<LevelSolver> factorize(const SpaceTimeGrid& g, const std::vector<SparseRow>& rows, double tol,
                                       int level) {
  if (g.dim() == 1) return std::make_unique<BandedLU>(g.nodes(), rows, level);
  return std::make_unique<PreconditionedIterative>(g.nodes(), rows, tol, level);
}

double boundary_average(const SpaceTimeGrid& g, const BoundaryTrace& tr, int k, int n) {
  const auto& ents = g.entries_at(k);
  double acc = 0.0;
  for (int e : ents) acc += tr.at(e, n);
  return acc / ents.size();
}

double weighted_sq(const SpaceTimeGrid& g, const std::vector<double>& r, bool interior_only) {
  const auto& w = g.space_weights();
  double acc = 0.0;
  for (int k = 0; k < g.nodes(); ++k)
    if (!interior_only || !g.on_boundary(k)) acc += w[k] * r[k] * r[k];
  return acc;
}

}  // namespace

SystemData SystemData::zeros(const GridPtr& grid) {
  SystemData d;
  d.F = ScalarField(grid);
  d.G = ScalarField(grid);
  d.g = BoundaryTrace(grid);
  d.h = BoundaryTrace(grid);
  d.uT.assign(grid->nodes(), 0.0);
  d.v0.assign(grid->nodes(), 0.0);
  return d;
}

SystemData& SystemData::operator+=(const SystemData& o) {
  F += o.F;
  G += o.G;
  g += o.g;
  h += o.h;
  for (size_t i = 0; i < uT.size(); ++i) uT[i] += o.uT[i];
  for (size_t i = 0; i < v0.size(); ++i) v0[i] += o.v0[i];
  return *this;
}

SystemData& SystemData::operator-=(const SystemData& o) {
  F -= o.F;
  G -= o.G;
  g -= o.g;
  h -= o.h;
  for (size_t i = 0; i < uT.size(); ++i) uT[i] -= o.uT[i];
  for (size_t i = 0; i < v0.size(); ++i) v0[i] -= o.v0[i];
  return *this;
}

SystemData& SystemData::operator*=(double c) {
  F *= c;
  G *= c;
  g *= c;
  h *= c;
  for (double& x : uT) x *= c;
  for (double& x : v0) x *= c;
  return *this;
}

SystemData operator-(SystemData a, const SystemData& b) { return a -= b; }
SystemData operator*(double c, SystemData a) { return a *= c; }

void SolveOptions::validate() const {
  if (!(theta >= 0.5 && theta <= 1.0)) throw ConfigError("solver.theta must lie in [0.5, 1]");
  if (!(picard_tol > 0.0)) throw ConfigError("solver.picard_tol must be positive");
  if (picard_max < 1) throw ConfigError("solver.picard_max must be >= 1");
  if (!(linear_tol > 0.0)) throw ConfigError("solver.linear_tol must be positive");
  if (fixed_iterations < 0) throw ConfigError("solver.fixed_iterations must be >= 0");
}

LinearizedSolver::LinearizedSolver(const SampledCoefficients& c, const SolveOptions& opts, Part part)
    : grid_(c.grid), opts_(opts), ops_(c) {
  opts_.validate();
  const auto& g = *grid_;
  u_solvers_.resize(g.nt() - 1);
  v_solvers_.resize(g.nt() - 1);
  if (part != Part::VOnly)
    for (int n = 0; n < g.nt() - 1; ++n)
      u_solvers_[n] = factorize(g, implicit_rows(ops_, Which::A, n, opts_.theta), opts_.linear_tol, n);
  if (part != Part::UOnly)
    for (int n = 1; n < g.nt(); ++n)
      v_solvers_[n - 1] = factorize(g, implicit_rows(ops_, Which::B, n, opts_.theta), opts_.linear_tol, n);
}

ScalarField LinearizedSolver::step_backward_u(const ScalarField& v, const SystemData& d) const {
  const auto& g = *grid_;
  const auto& c = ops_.coefficients();
  const int N = g.nodes();
  const double th = opts_.theta, inv_tau = 1.0 / g.tau();
  ScalarField u(grid_);
  std::copy(d.uT.begin(), d.uT.end(), u.level(g.nt() - 1));
  std::vector<double> au(N), rhs(N);
  for (int n = g.nt() - 2; n >= 0; --n) {
    const double* up = u.level(n + 1);
    ops_.apply(Which::A, n + 1, up, au.data());
    for (int k = 0; k < N; ++k) {
      if (g.on_boundary(k)) {
        rhs[k] = boundary_average(g, d.g, k, n);
        continue;
      }
      double s0 = c.at(C0, k, n) * v.at(k, n) + d.F.at(k, n);
      double s1 = c.at(C0, k, n + 1) * v.at(k, n + 1) + d.F.at(k, n + 1);
      rhs[k] = up[k] * inv_tau + (1.0 - th) * au[k] - th * s0 - (1.0 - th) * s1;
    }
    u_solvers_[n]->solve(rhs.data(), u.level(n));
  }
  return u;
}

ScalarField LinearizedSolver::step_forward_v(const ScalarField& u, const SystemData& d) const {
  const auto& g = *grid_;
  const int N = g.nodes();
  const double th = opts_.theta, inv_tau = 1.0 / g.tau();
  ScalarField v(grid_);
  std::copy(d.v0.begin(), d.v0.end(), v.level(0));
  std::vector<double> bv(N), r0(N), r1(N), rhs(N);
  for (int n = 0; n < g.nt() - 1; ++n) {
    const double* vp = v.level(n);
    ops_.apply(Which::B, n, vp, bv.data());
    ops_.apply(Which::A0, n, u.level(n), r0.data());
    ops_.apply(Which::A0, n + 1, u.level(n + 1), r1.data());
    for (int k = 0; k < N; ++k) {
      if (g.on_boundary(k)) {
        rhs[k] = boundary_average(g, d.h, k, n + 1);
        continue;
      }
      rhs[k] = vp[k] * inv_tau + (1.0 - th) * bv[k] + th * (r1[k] + d.G.at(k, n + 1)) +
               (1.0 - th) * (r0[k] + d.G.at(k, n));
    }
    v_solvers_[n]->solve(rhs.data(), v.level(n + 1));
  }
  return v;
}

SolveResult LinearizedSolver::solve(const SystemData& d) const {
  SolveResult res;
  res.u = ScalarField(grid_);
  res.v = ScalarField(grid_);
  const int max_it = opts_.fixed_iterations > 0 ? opts_.fixed_iterations : opts_.picard_max;
  for (int it = 1; it <= max_it; ++it) {
    ScalarField u = step_backward_u(res.v, d);
    ScalarField v = step_forward_v(u, d);
    double upd = relative_update(u, res.u, v, res.v);
    res.u = std::move(u);
    res.v = std::move(v);
    res.updates.push_back(upd);
    res.iterations = it;
    if (opts_.fixed_iterations == 0 && upd <= opts_.picard_tol) {
      res.converged = true;
      return res;
    }
  }
  if (opts_.fixed_iterations > 0) {
    res.converged = true;
    return res;
  }
  if (opts_.throw_on_nonconvergence)
    throw SolverError(SolverError::Kind::MaxIterationsExceeded,
                      fmt::format("Picard iteration did not converge in {} sweeps (last update {:.3e})", max_it,
                                  res.updates.back()),
                      -1, res.updates.back());
  return res;
}

SolveResult solve_linearized(const SystemData& d, const SampledCoefficients& c, const SolveOptions& opts) {
  return LinearizedSolver(c, opts).solve(d);
}

double l2_norm(const ScalarField& f) {
  const auto& g = *f.grid;
  auto tw = g.time_weights(0, g.nt() - 1);
  const auto& sw = g.space_weights();
  double acc = 0.0;
  for (int n = 0; n < g.nt(); ++n) {
    const double* p = f.level(n);
    double s = 0.0;
    for (int k = 0; k < g.nodes(); ++k) s += sw[k] * p[k] * p[k];
    acc += tw[n] * s;
  }
  return std::sqrt(acc);
}

double relative_update(const ScalarField& u_new, const ScalarField& u_old, const ScalarField& v_new,
                       const ScalarField& v_old) {
  double du = l2_norm(u_new - u_old), dv = l2_norm(v_new - v_old);
  double nu = l2_norm(u_new), nv = l2_norm(v_new);
  double diff = std::hypot(du, dv), norm = std::hypot(nu, nv);
  if (diff == 0.0) return 0.0;
  return diff / std::max(norm, 1e-300);
}

ResidualReport discrete_residual(const ScalarField& u, const ScalarField& v, const SystemData& d,
                                 const LinearizedSolver& solver) {
  const auto& ops = solver.ops();
  const auto& c = ops.coefficients();
  const auto& g = *u.grid;
  const int N = g.nodes();
  const double th = solver.options().theta, tau = g.tau();
  std::vector<double> a0(N), a1(N), b0(N), b1(N), k0(N), k1(N);
  std::vector<double> ru(N), rv(N), su(N), sv(N);
  ResidualReport r;
  double acc_u = 0, acc_v = 0, sc_u = 0, sc_v = 0;
  const int NB = g.boundary_size();
  std::vector<double> cu(NB), cv(NB);
  for (int n = 0; n < g.nt() - 1; ++n) {
    ops.apply(Which::A, n, u.level(n), a0.data());
    ops.apply(Which::A, n + 1, u.level(n + 1), a1.data());
    ops.apply(Which::B, n, v.level(n), b0.data());
    ops.apply(Which::B, n + 1, v.level(n + 1), b1.data());
    ops.apply(Which::A0, n, u.level(n), k0.data());
    ops.apply(Which::A0, n + 1, u.level(n + 1), k1.data());
    ops.apply_conormal(Which::A, n, u.level(n), cu.data());
    ops.apply_conormal(Which::B, n + 1, v.level(n + 1), cv.data());
    for (int k = 0; k < N; ++k) {
      if (g.on_boundary(k)) {
        ru[k] = rv[k] = su[k] = sv[k] = 0.0;
        continue;
      }
      double dt_u = (u.at(k, n + 1) - u.at(k, n)) / tau;
      double au = th * a0[k] + (1 - th) * a1[k];
      double s = th * (c.at(C0, k, n) * v.at(k, n) + d.F.at(k, n)) +
                 (1 - th) * (c.at(C0, k, n + 1) * v.at(k, n + 1) + d.F.at(k, n + 1));
      ru[k] = dt_u + au - s;
      su[k] = std::fabs(dt_u) + std::fabs(au) + std::fabs(s);
      double dt_v = (v.at(k, n + 1) - v.at(k, n)) / tau;
      double bv = th * b1[k] + (1 - th) * b0[k];
      double rr = th * (k1[k] + d.G.at(k, n + 1)) + (1 - th) * (k0[k] + d.G.at(k, n));
      rv[k] = dt_v - bv - rr;
      sv[k] = std::fabs(dt_v) + std::fabs(bv) + std::fabs(rr);
    }
    acc_u += tau * weighted_sq(g, ru, true);
    acc_v += tau * weighted_sq(g, rv, true);
    sc_u += tau * weighted_sq(g, su, true);
    sc_v += tau * weighted_sq(g, sv, true);
    // Robin rows as the scheme imposes them: averaged over the entries of a boundary node
    // (2D corners carry two).
    for (int k = 0; k < N; ++k) {
      const auto& ents = g.entries_at(k);
      if (ents.empty()) continue;
      double bu = 0, bvv = 0, s1 = 0, s2 = 0, wgt = 0;
      for (int e : ents) {
        bu += cu[e] - c.p_at(e, n) * u.at(k, n) - d.g.at(e, n);
        bvv += cv[e] - c.q_at(e, n + 1) * v.at(k, n + 1) - d.h.at(e, n + 1);
        s1 += std::fabs(cu[e]) + std::fabs(d.g.at(e, n));
        s2 += std::fabs(cv[e]) + std::fabs(d.h.at(e, n + 1));
        wgt += g.boundary()[e].arc_weight;
      }
      const double m = 1.0 / ents.size();
      bu *= m, bvv *= m, s1 *= m, s2 *= m;
      acc_u += tau * wgt * bu * bu;
      acc_v += tau * wgt * bvv * bvv;
      sc_u += tau * wgt * s1 * s1;
      sc_v += tau * wgt * s2 * s2;
    }
  }
  r.abs_u = std::sqrt(acc_u);
  r.abs_v = std::sqrt(acc_v);
  r.scale_u = std::sqrt(sc_u);
  r.scale_v = std::sqrt(sc_v);
  double scale = std::hypot(r.scale_u, r.scale_v);
  double num = std::hypot(r.abs_u, r.abs_v);
  r.relative = num == 0.0 ? 0.0 : num / std::max(scale, 1e-300);
  return r;
}

double equation_residual(Which which, const ScalarField& w, const ScalarField* other, const ScalarField& source,
                         const DiscreteOperators& ops) {
  const auto& g = *w.grid;
  const auto& c = ops.coefficients();
  const int N = g.nodes();
  ScalarField wt = time_derivative(w);
  auto tw = g.time_weights(0, g.nt() - 1);
  std::vector<double> opw(N), coup(N, 0.0), res(N), sc(N);
  double acc = 0.0, scale = 0.0;
  for (int n = 0; n < g.nt(); ++n) {
    ops.apply(which, n, w.level(n), opw.data());
    if (other) {
      if (which == Which::A) {
        for (int k = 0; k < N; ++k) coup[k] = c.at(C0, k, n) * other->at(k, n);
      } else {
        ops.apply(Which::A0, n, other->level(n), coup.data());
      }
    }
    for (int k = 0; k < N; ++k) {
      double o = which == Which::A ? opw[k] : -opw[k];
      double r = wt.at(k, n) + o - coup[k] - source.at(k, n);
      res[k] = r;
      sc[k] = std::fabs(wt.at(k, n)) + std::fabs(opw[k]) + std::fabs(coup[k]) + std::fabs(source.at(k, n));
    }
    acc += tw[n] * weighted_sq(g, res, true);
    scale += tw[n] * weighted_sq(g, sc, true);
  }
  if (acc == 0.0) return 0.0;
  return std::sqrt(acc) / std::max(std::sqrt(scale), 1e-300);
}

double robin_relative_residual(Which which, const ScalarField& w, const BoundaryTrace& data,
                               const SampledCoefficients& c) {
  const auto& g = *w.grid;
  BoundaryTrace cn = conormal_trace(w, c, which);
  auto tw = g.time_weights(0, g.nt() - 1);
  double acc = 0.0, scale = 0.0;
  for (int n = 0; n < g.nt(); ++n)
    for (int e = 0; e < g.boundary_size(); ++e) {
      const auto& be = g.boundary()[e];
      double rc = which == Which::A ? c.p_at(e, n) : c.q_at(e, n);
      double pu = rc * w.at(be.node, n);
      double r = cn.at(e, n) - pu - data.at(e, n);
      double s = std::fabs(cn.at(e, n)) + std::fabs(pu) + std::fabs(data.at(e, n));
      acc += tw[n] * be.arc_weight * r * r;
      scale += tw[n] * be.arc_weight * s * s;
    }
  if (acc == 0.0) return 0.0;
  return std::sqrt(acc) / std::max(std::sqrt(scale), 1e-300);
}

}  // namespace mfglab
