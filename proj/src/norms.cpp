#include "mfglab/norms.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mfglab/errors.hpp"
#include "mfglab/stencil.hpp"

namespace mfglab {

namespace {

int resolve_l1(const SpaceTimeGrid& g, int l1) { return l1 < 0 ? g.nt() - 1 : l1; }

std::vector<Deriv> spatial_derivs(int dim, int order) {
  std::vector<Deriv> d{Deriv::X};
  if (dim == 2) d.push_back(Deriv::Y);
  if (order >= 2) {
    d.push_back(Deriv::XX);
    if (dim == 2) {
      d.push_back(Deriv::XY);
      d.push_back(Deriv::YY);
    }
  }
  return d;
}

double level_sq(const SpaceTimeGrid& g, const double* f) {
  const auto& sw = g.space_weights();
  double acc = 0.0;
  for (int k = 0; k < g.nodes(); ++k) acc += sw[k] * f[k] * f[k];
  return acc;
}

// Squared H^2(Omega) norm of one slice.
double h2_sq(const SpaceTimeGrid& g, const double* f, std::vector<double>& buf) {
  double acc = level_sq(g, f);
  for (Deriv d : spatial_derivs(g.dim(), 2)) {
    spatial_derivative(g, f, d, buf.data());
    acc += level_sq(g, buf.data());
  }
  return acc;
}

double h12_sq(const SpaceTimeGrid& g, const double* tr) {
  const auto& b = g.boundary();
  double l2 = 0.0;
  for (int e = 0; e < g.boundary_size(); ++e) l2 += b[e].arc_weight * tr[e] * tr[e];
  if (g.dim() == 1) return l2;
  double semi = seminorm_H12_boundary(g, tr);
  return l2 + semi * semi;
}

}  // namespace

std::pair<int, int> interior_levels(const SpaceTimeGrid& g, double eps) {
  if (eps < 0.0 || 2.0 * eps >= g.T()) throw ConfigError(fmt::format("eps = {} must lie in [0, T/2)", eps));
  return window_levels(g, eps, g.T() - eps);
}

std::pair<int, int> window_levels(const SpaceTimeGrid& g, double t0, double t1) {
  const double tol = 1e-9 * g.tau();
  int l0 = static_cast<int>(std::ceil((t0 - tol) / g.tau()));
  int l1 = static_cast<int>(std::floor((t1 + tol) / g.tau()));
  l0 = std::max(l0, 0);
  l1 = std::min(l1, g.nt() - 1);
  if (l1 - l0 + 1 < 3)
    throw ConfigError(fmt::format("time window [{}, {}] holds fewer than 3 levels", t0, t1));
  return {l0, l1};
}

double norm_L2(const ScalarField& f, int l0, int l1) {
  const auto& g = *f.grid;
  l1 = resolve_l1(g, l1);
  auto tw = g.time_weights(l0, l1);
  double acc = 0.0;
  for (int n = l0; n <= l1; ++n) acc += tw[n] * level_sq(g, f.level(n));
  return std::sqrt(acc);
}

double norm_H21(const ScalarField& f, double eps) {
  const auto& g = *f.grid;
  require_finite(f.v, "norm_H21");
  auto [l0, l1] = interior_levels(g, eps);
  auto tw = g.time_weights(l0, l1);
  ScalarField ft = time_derivative(f);
  std::vector<double> buf(g.nodes());
  double acc = 0.0;
  for (int n = l0; n <= l1; ++n) acc += tw[n] * (h2_sq(g, f.level(n), buf) + level_sq(g, ft.level(n)));
  return std::sqrt(acc);
}

double norm_H2_level(const ScalarField& f, int level) {
  const auto& g = *f.grid;
  std::vector<double> buf(g.nodes());
  return std::sqrt(h2_sq(g, f.level(level), buf));
}

double seminorm_H12_boundary(const SpaceTimeGrid& g, const double* tr) {
  if (g.dim() == 1) return 0.0;
  const auto& b = g.boundary();
  const int nb = g.boundary_size();
  double acc = 0.0;
  for (int e = 0; e < nb; ++e) {
    double xe = g.x(b[e].node), ye = g.y(b[e].node);
    for (int f = 0; f < nb; ++f) {
      if (b[f].node == b[e].node) continue;  // diagonal cell and duplicated corners
      double dx = xe - g.x(b[f].node), dy = ye - g.y(b[f].node);
      double d = tr[e] - tr[f];
      acc += b[e].arc_weight * b[f].arc_weight * d * d / (dx * dx + dy * dy);
    }
  }
  return std::sqrt(acc);
}

double norm_H12_boundary(const SpaceTimeGrid& g, const double* trace) { return std::sqrt(h12_sq(g, trace)); }

double norm_L2_H12(const BoundaryTrace& f, int l0, int l1) {
  const auto& g = *f.grid;
  l1 = resolve_l1(g, l1);
  auto tw = g.time_weights(l0, l1);
  const int nb = g.boundary_size();
  double acc = 0.0;
  for (int n = l0; n <= l1; ++n) acc += tw[n] * h12_sq(g, f.v.data() + static_cast<size_t>(n) * nb);
  return std::sqrt(acc);
}

double norm_H1_L2(const BoundaryTrace& f, const BoundaryPartition& part, Segment seg, int l0, int l1) {
  const auto& g = *f.grid;
  l1 = resolve_l1(g, l1);
  BoundaryTrace ft = time_derivative(f);
  auto tw = g.time_weights(l0, l1);
  const auto& b = g.boundary();
  double acc = 0.0;
  for (int n = l0; n <= l1; ++n)
    for (int e = 0; e < g.boundary_size(); ++e) {
      if (!part.in_segment(e, seg)) continue;
      acc += tw[n] * b[e].arc_weight * (f.at(e, n) * f.at(e, n) + ft.at(e, n) * ft.at(e, n));
    }
  return std::sqrt(acc);
}

double norm_star_h1_part(const BoundaryTrace& g, const BoundaryPartition& part, int l0, int l1) {
  return norm_H1_L2(g, part, Segment::Unobserved, l0, l1);
}

double norm_star(const BoundaryTrace& g, const BoundaryPartition& part, int l0, int l1) {
  return norm_star_h1_part(g, part, l0, l1) + norm_L2_H12(g, l0, l1);
}

double norm_H1_gamma(const ScalarField& u, const BoundaryPartition& part, int l0, int l1) {
  const auto& g = *u.grid;
  l1 = resolve_l1(g, l1);
  ScalarField ut = time_derivative(u);
  auto tw = g.time_weights(l0, l1);
  const auto& b = g.boundary();
  double acc = 0.0;
  std::vector<double> vals, dvals;
  for (Side side : part.observed_sides()) {
    const auto& ent = g.side_entries(side);
    const int m = static_cast<int>(ent.size());
    double h = side == Side::X0 || side == Side::X1 ? g.hy() : g.hx();
    vals.resize(m);
    dvals.assign(m, 0.0);
    for (int n = l0; n <= l1; ++n) {
      for (int i = 0; i < m; ++i) vals[i] = u.at(b[ent[i]].node, n);
      if (m >= 3) series_d1(vals.data(), m, 1, h, dvals.data(), 1);
      for (int i = 0; i < m; ++i) {
        int k = b[ent[i]].node;
        double ti = ut.at(k, n);
        acc += tw[n] * b[ent[i]].arc_weight * (vals[i] * vals[i] + ti * ti + dvals[i] * dvals[i]);
      }
    }
  }
  return std::sqrt(acc);
}

}  // namespace mfglab
