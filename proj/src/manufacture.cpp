#include "mfglab/manufacture.hpp"

#include "mfglab/errors.hpp"

namespace mfglab {

namespace {

Expr second_order(const Expr& cxx, const Expr& cxy, const Expr& cyy, const Expr& cx, const Expr& cy,
                  const Expr& c0, const Expr& w, int dim) {
  Expr wx = w.diff(Var::X);
  Expr out = cxx * wx.diff(Var::X) + cx * wx + c0 * w;
  if (dim == 2) {
    Expr wy = w.diff(Var::Y);
    out = out + cyy * wy.diff(Var::Y) + cxy * wx.diff(Var::Y) + cy * wy;
  }
  return out;
}

Expr get_or_zero(const CoefficientSet& cs, const char* key) {
  auto it = cs.expr.find(key);
  return it == cs.expr.end() ? Expr::constant(0.0) : it->second;
}

}  // namespace

ScalarField sample_field(const Expr& e, const GridPtr& g) {
  ScalarField f(g);
  for (int n = 0; n < g->nt(); ++n)
    for (int k = 0; k < g->nodes(); ++k) f.at(k, n) = e.eval(g->x(k), g->y(k), g->t(n));
  require_finite(f.v, "sampled expression");
  return f;
}

std::vector<double> sample_level(const Expr& e, const SpaceTimeGrid& g, double t) {
  std::vector<double> out(g.nodes());
  for (int k = 0; k < g.nodes(); ++k) out[k] = e.eval(g.x(k), g.y(k), t);
  require_finite(out, "sampled expression");
  return out;
}

BoundaryTrace sample_trace(const std::array<Expr, 4>& per_side, const GridPtr& g) {
  BoundaryTrace tr(g);
  const auto& b = g->boundary();
  for (int n = 0; n < g->nt(); ++n)
    for (int e = 0; e < g->boundary_size(); ++e) {
      int k = b[e].node;
      tr.at(e, n) = per_side[static_cast<int>(b[e].side)].eval(g->x(k), g->y(k), g->t(n));
    }
  require_finite(tr.v, "sampled boundary expression");
  return tr;
}

BoundaryTrace sample_trace(const Expr& e, const GridPtr& g) { return sample_trace({e, e, e, e}, g); }

Expr symbolic_A(const CoefficientSet& cs, const Expr& u) {
  Expr two = Expr::constant(2.0);
  return second_order(cs.get("a11"), two * get_or_zero(cs, "a12"), get_or_zero(cs, "a22"), cs.get("a1"),
                      get_or_zero(cs, "a2"), cs.get("a0"), u, cs.dim);
}

Expr symbolic_B(const CoefficientSet& cs, const Expr& v) {
  Expr two = Expr::constant(2.0);
  return second_order(cs.get("b11"), two * get_or_zero(cs, "b12"), get_or_zero(cs, "b22"), cs.get("b1"),
                      get_or_zero(cs, "b2"), cs.get("b0"), v, cs.dim);
}

Expr symbolic_A0(const CoefficientSet& cs, const Expr& u) {
  return second_order(cs.get("kxx"), get_or_zero(cs, "kxy"), get_or_zero(cs, "kyy"), cs.get("kx"),
                      get_or_zero(cs, "ky"), cs.get("k0"), u, cs.dim);
}

std::array<Expr, 4> symbolic_robin(const CoefficientSet& cs, Which which, const Expr& w, int dim) {
  const bool a = which == Which::A;
  Expr m11 = cs.get(a ? "a11" : "b11");
  Expr m12 = get_or_zero(cs, a ? "a12" : "b12");
  Expr m22 = get_or_zero(cs, a ? "a22" : "b22");
  Expr rc = cs.get(a ? "p" : "q");
  Expr wx = w.diff(Var::X);
  Expr wy = dim == 2 ? w.diff(Var::Y) : Expr::constant(0.0);
  Expr fx = m11 * wx + m12 * wy;  // first row of M grad w
  Expr fy = m12 * wx + m22 * wy;
  Expr rw = rc * w;
  return {-fx - rw, fx - rw, -fy - rw, fy - rw};
}

ManufacturedProblem manufacture(const Expr& u, const Expr& v, const CoefficientSet& cs, const GridPtr& g) {
  if (cs.dim != g->dim()) throw ConfigError("manufactured problem: coefficient dimension does not match grid");
  ManufacturedProblem mp;
  Expr ut = u.diff(Var::T), vt = v.diff(Var::T);
  mp.F = ut + symbolic_A(cs, u) - cs.get("c0") * v;
  mp.G = vt - symbolic_B(cs, v) - symbolic_A0(cs, u);
  auto gs = symbolic_robin(cs, Which::A, u, cs.dim);
  auto hs = symbolic_robin(cs, Which::B, v, cs.dim);

  mp.data.F = sample_field(mp.F, g);
  mp.data.G = sample_field(mp.G, g);
  mp.data.g = sample_trace(gs, g);
  mp.data.h = sample_trace(hs, g);
  mp.data.uT = sample_level(u, *g, g->T());
  mp.data.v0 = sample_level(v, *g, 0.0);

  std::array<Expr, 4> gts, hts;
  for (int s = 0; s < 4; ++s) {
    gts[s] = gs[s].diff(Var::T);
    hts[s] = hs[s].diff(Var::T);
  }
  mp.dt_data.F = sample_field(mp.F.diff(Var::T), g);
  mp.dt_data.G = sample_field(mp.G.diff(Var::T), g);
  mp.dt_data.g = sample_trace(gts, g);
  mp.dt_data.h = sample_trace(hts, g);
  mp.dt_data.uT = sample_level(ut, *g, g->T());
  mp.dt_data.v0 = sample_level(vt, *g, 0.0);

  mp.u = sample_field(u, g);
  mp.v = sample_field(v, g);
  mp.ut = sample_field(ut, g);
  mp.vt = sample_field(vt, g);
  return mp;
}

}  // namespace mfglab
