#include "mfglab/operators.hpp"

namespace mfglab {

namespace {

void add_axis_taps(SparseRow& row, const SpaceTimeGrid& g, int i, int j, bool along_x, bool second, double coef) {
  if (coef == 0.0) return;
  Tap t[4];
  int m = 0;
  if (along_x)
    m = second ? d2_taps(i, g.nx(), g.hx(), t) : d1_taps(i, g.nx(), g.hx(), t);
  else
    m = second ? d2_taps(j, g.ny(), g.hy(), t) : d1_taps(j, g.ny(), g.hy(), t);
  for (int q = 0; q < m; ++q) row.add(along_x ? g.node(t[q].index, j) : g.node(i, t[q].index), coef * t[q].w);
}

void add_mixed_taps(SparseRow& row, const SpaceTimeGrid& g, int i, int j, double coef) {
  if (coef == 0.0) return;
  Tap tx[4], ty[4];
  int mx = d1_taps(i, g.nx(), g.hx(), tx);
  int my = d1_taps(j, g.ny(), g.hy(), ty);
  for (int a = 0; a < mx; ++a)
    for (int b = 0; b < my; ++b) row.add(g.node(tx[a].index, ty[b].index), coef * tx[a].w * ty[b].w);
}

SparseRM assemble(int rows, int cols, const std::vector<SparseRow>& r) {
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < rows; ++i)
    for (const auto& p : r[i].e) trip.emplace_back(i, p.first, p.second);
  SparseRM m(rows, cols);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

}  // namespace

SparseRow operator_row(const SpaceTimeGrid& g, int node, const PointCoefficients& pc) {
  SparseRow row;
  int i = g.ix(node), j = g.jy(node);
  add_axis_taps(row, g, i, j, true, true, pc.cxx);
  add_axis_taps(row, g, i, j, true, false, pc.cx);
  if (g.dim() == 2) {
    add_axis_taps(row, g, i, j, false, true, pc.cyy);
    add_axis_taps(row, g, i, j, false, false, pc.cy);
    add_mixed_taps(row, g, i, j, pc.cxy);
  }
  if (pc.c0 != 0.0) row.add(node, pc.c0);
  row.finish();
  return row;
}

SparseRow conormal_row(const SpaceTimeGrid& g, int entry, double m11, double m12, double m22) {
  const auto& be = g.boundary()[entry];
  int i = g.ix(be.node), j = g.jy(be.node);
  double nx = be.normal[0], ny = be.normal[1];
  SparseRow row;
  add_axis_taps(row, g, i, j, true, false, nx * m11 + ny * m12);
  if (g.dim() == 2) add_axis_taps(row, g, i, j, false, false, nx * m12 + ny * m22);
  row.finish();
  return row;
}

PointCoefficients point_coefficients(const SampledCoefficients& c, Which which, int node, int level) {
  PointCoefficients pc;
  switch (which) {
    case Which::A:
      pc = {c.at(A11, node, level), 2.0 * c.at(A12, node, level), c.at(A22, node, level),
            c.at(A1, node, level),  c.at(A2, node, level),        c.at(A0, node, level)};
      break;
    case Which::B:
      pc = {c.at(B11, node, level), 2.0 * c.at(B12, node, level), c.at(B22, node, level),
            c.at(B1, node, level),  c.at(B2, node, level),        c.at(B0, node, level)};
      break;
    case Which::A0:
      pc = {c.at(KXX, node, level), c.at(KXY, node, level), c.at(KYY, node, level),
            c.at(KX, node, level),  c.at(KY, node, level),  c.at(K0, node, level)};
      break;
  }
  return pc;
}

DiscreteOperators::DiscreteOperators(const SampledCoefficients& coef)
    : c_(std::make_shared<const SampledCoefficients>(coef)) {
  const SampledCoefficients& c = *c_;
  const auto& g = *c.grid;
  const int N = g.nodes(), NB = g.boundary_size();
  std::vector<SparseRow> rows(N), brows(NB);
  for (Which w : {Which::A, Which::B, Which::A0}) {
    auto& dst = w == Which::A ? a_ : (w == Which::B ? b_ : a0_);
    dst.resize(g.nt());
    for (int n = 0; n < g.nt(); ++n) {
      for (int k = 0; k < N; ++k) rows[k] = operator_row(g, k, point_coefficients(c, w, k, n));
      dst[n] = assemble(N, N, rows);
    }
  }
  for (Which w : {Which::A, Which::B}) {
    auto& dst = w == Which::A ? na_ : nb_;
    dst.resize(g.nt());
    Coef c11 = w == Which::A ? A11 : B11, c12 = w == Which::A ? A12 : B12, c22 = w == Which::A ? A22 : B22;
    for (int n = 0; n < g.nt(); ++n) {
      for (int e = 0; e < NB; ++e) {
        int k = g.boundary()[e].node;
        brows[e] = conormal_row(g, e, c.at(c11, k, n), c.at(c12, k, n), c.at(c22, k, n));
      }
      dst[n] = assemble(NB, N, brows);
    }
  }
}

const SparseRM& DiscreteOperators::op(Which w, int level) const {
  return w == Which::A ? a_[level] : (w == Which::B ? b_[level] : a0_[level]);
}

const SparseRM& DiscreteOperators::conormal(Which w, int level) const {
  return w == Which::A ? na_[level] : nb_[level];
}

void DiscreteOperators::apply(Which w, int level, const double* u, double* out) const {
  const SparseRM& m = op(w, level);
  Eigen::Map<const Eigen::VectorXd> x(u, m.cols());
  Eigen::Map<Eigen::VectorXd> y(out, m.rows());
  y.noalias() = m * x;
}

void DiscreteOperators::apply_conormal(Which w, int level, const double* u, double* out) const {
  const SparseRM& m = conormal(w, level);
  Eigen::Map<const Eigen::VectorXd> x(u, m.cols());
  Eigen::Map<Eigen::VectorXd> y(out, m.rows());
  y.noalias() = m * x;
}

ScalarField DiscreteOperators::apply(Which w, const ScalarField& u) const {
  ScalarField out(u.grid);
  for (int n = 0; n < u.grid->nt(); ++n) apply(w, n, u.level(n), out.level(n));
  return out;
}

namespace {

std::vector<double> apply_one(const ScalarField& u, int level, const SampledCoefficients& c, Which w) {
  const auto& g = *u.grid;
  std::vector<double> out(g.nodes());
  for (int k = 0; k < g.nodes(); ++k) out[k] = operator_row(g, k, point_coefficients(c, w, k, level)).dot(u.level(level));
  return out;
}

}  // namespace

std::vector<double> apply_A(const ScalarField& u, int level, const SampledCoefficients& c) {
  return apply_one(u, level, c, Which::A);
}
std::vector<double> apply_B(const ScalarField& v, int level, const SampledCoefficients& c) {
  return apply_one(v, level, c, Which::B);
}
std::vector<double> apply_A0(const ScalarField& u, int level, const SampledCoefficients& c) {
  return apply_one(u, level, c, Which::A0);
}

BoundaryTrace conormal_trace(const ScalarField& u, const SampledCoefficients& c, Which which) {
  const auto& g = *u.grid;
  BoundaryTrace out(u.grid);
  Coef c11 = which == Which::A ? A11 : B11, c12 = which == Which::A ? A12 : B12, c22 = which == Which::A ? A22 : B22;
  for (int n = 0; n < g.nt(); ++n)
    for (int e = 0; e < g.boundary_size(); ++e) {
      int k = g.boundary()[e].node;
      out.at(e, n) = conormal_row(g, e, c.at(c11, k, n), c.at(c12, k, n), c.at(c22, k, n)).dot(u.level(n));
    }
  return out;
}

BoundaryTrace robin_residual(const ScalarField& u, const SampledCoefficients& c, Which which, const BoundaryTrace& g) {
  BoundaryTrace out = conormal_trace(u, c, which);
  const auto& G = *u.grid;
  for (int n = 0; n < G.nt(); ++n)
    for (int e = 0; e < G.boundary_size(); ++e) {
      double coef = which == Which::A ? c.p_at(e, n) : c.q_at(e, n);
      out.at(e, n) -= coef * u.at(G.boundary()[e].node, n) + g.at(e, n);
    }
  return out;
}

}  // namespace mfglab
