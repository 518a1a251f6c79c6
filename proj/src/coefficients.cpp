#include "mfglab/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <fmt/format.h>

#include "mfglab/errors.hpp"

namespace mfglab {

namespace {

const char* kNames[kNodalCoefs] = {"a11", "a12", "a22", "a1", "a2", "a0", "b11", "b12", "b22", "b1",
                                   "b2",  "b0",  "k0",  "kx", "ky", "kxx", "kxy", "kyy", "c0"};

bool is_2d_only(Coef k) {
  return k == A12 || k == A22 || k == A2 || k == B12 || k == B22 || k == B2 || k == KY || k == KXY || k == KYY;
}

double min_eig(double a11, double a12, double a22, int dim) {
  if (dim == 1) return a11;
  double m = 0.5 * (a11 + a22);
  double d = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
  return m - d;
}

SampledCoefficients sample_with(const GridPtr& g,
                                const std::function<Expr(const std::string&)>& pick) {
  SampledCoefficients sc(g);
  const auto& G = *g;
  for (int k = 0; k < kNodalCoefs; ++k) {
    if (G.dim() == 1 && is_2d_only(static_cast<Coef>(k))) continue;
    Expr e = pick(kNames[k]);
    if (e.is_zero()) continue;
    auto& dst = sc.c[k];
    for (int n = 0; n < G.nt(); ++n)
      for (int node = 0; node < G.nodes(); ++node)
        dst[static_cast<size_t>(n) * G.nodes() + node] = e.eval(G.x(node), G.y(node), G.t(n));
  }
  Expr ep = pick("p"), eq = pick("q");
  const auto& b = G.boundary();
  for (int n = 0; n < G.nt(); ++n)
    for (int e = 0; e < G.boundary_size(); ++e) {
      double x = G.x(b[e].node), y = G.y(b[e].node), t = G.t(n);
      sc.p_at(e, n) = ep.eval(x, y, t);
      sc.q_at(e, n) = eq.eval(x, y, t);
    }
  require_finite(sc.p, "coefficient p");
  require_finite(sc.q, "coefficient q");
  for (int k = 0; k < kNodalCoefs; ++k) require_finite(sc.c[k], kNames[k]);
  return sc;
}

}  // namespace

const char* coef_name(Coef c) { return kNames[c]; }

std::vector<std::string> coefficient_keys(int dim) {
  std::vector<std::string> out;
  for (int k = 0; k < kNodalCoefs; ++k)
    if (dim == 2 || !is_2d_only(static_cast<Coef>(k))) out.push_back(kNames[k]);
  out.push_back("p");
  out.push_back("q");
  return out;
}

CoefficientSet CoefficientSet::defaults(int dim) {
  CoefficientSet cs;
  cs.dim = dim;
  for (const auto& k : coefficient_keys(dim)) cs.expr[k] = Expr::constant(0.0);
  cs.expr["a11"] = Expr::constant(1.0);
  cs.expr["b11"] = Expr::constant(1.0);
  if (dim == 2) {
    cs.expr["a22"] = Expr::constant(1.0);
    cs.expr["b22"] = Expr::constant(1.0);
  }
  return cs;
}

const Expr& CoefficientSet::get(const std::string& key) const {
  auto it = expr.find(key);
  if (it == expr.end()) throw ConfigError(fmt::format("unknown coefficient '{}'", key));
  return it->second;
}

void CoefficientSet::set(const std::string& key, const Expr& e) {
  if (!expr.count(key)) throw ConfigError(fmt::format("unknown coefficient '{}' for dimension {}", key, dim));
  expr[key] = e;
}

Expr CoefficientSet::dt(const std::string& key) const {
  auto it = dt_override.find(key);
  if (it != dt_override.end()) return it->second;
  return get(key).diff(Var::T);
}

CoefficientSet CoefficientSet::time_derivative() const {
  CoefficientSet out;
  out.dim = dim;
  for (const auto& [k, e] : expr) out.expr[k] = dt(k);
  return out;
}

SampledCoefficients::SampledCoefficients(GridPtr g) : grid(std::move(g)) {
  size_t nn = static_cast<size_t>(grid->nodes()) * grid->nt();
  for (auto& v : c) v.assign(nn, 0.0);
  size_t nb = static_cast<size_t>(grid->boundary_size()) * grid->nt();
  p.assign(nb, 0.0);
  q.assign(nb, 0.0);
}

bool SampledCoefficients::coupling_zero() const {
  for (Coef k : {C0, K0, KX, KY, KXX, KXY, KYY})
    for (double x : c[k])
      if (x != 0.0) return false;
  return true;
}

SampledCoefficients sample(const CoefficientSet& cs, const GridPtr& g) {
  if (cs.dim != g->dim()) throw ConfigError("coefficient set dimension does not match the grid");
  return sample_with(g, [&](const std::string& k) { return cs.get(k); });
}

SampledCoefficients sample_time_derivative(const CoefficientSet& cs, const GridPtr& g) {
  if (cs.dim != g->dim()) throw ConfigError("coefficient set dimension does not match the grid");
  return sample_with(g, [&](const std::string& k) { return cs.dt(k); });
}

CoefficientReport validate(const SampledCoefficients& sc) {
  const auto& G = *sc.grid;
  CoefficientReport r;
  r.chi_a = r.chi_b = std::numeric_limits<double>::infinity();
  size_t nn = static_cast<size_t>(G.nodes()) * G.nt();
  for (size_t i = 0; i < nn; ++i) {
    r.chi_a = std::min(r.chi_a, min_eig(sc.c[A11][i], sc.c[A12][i], sc.c[A22][i], G.dim()));
    r.chi_b = std::min(r.chi_b, min_eig(sc.c[B11][i], sc.c[B12][i], sc.c[B22][i], G.dim()));
  }
  r.chi = std::min(r.chi_a, r.chi_b);
  for (const auto& v : sc.c)
    for (double x : v) r.M = std::max(r.M, std::fabs(x));
  for (double x : sc.p) r.M = std::max(r.M, std::fabs(x));
  for (double x : sc.q) r.M = std::max(r.M, std::fabs(x));
  return r;
}

CoefficientReport validate(const CoefficientSet& cs, const GridPtr& g) {
  SampledCoefficients sc = sample(cs, g);
  CoefficientReport r = validate(sc);
  const auto& G = *g;
  for (const auto& [key, e] : cs.transpose) {
    std::string partner = key == "a21" ? "a12" : (key == "b21" ? "b12" : "");
    if (partner.empty()) throw ConfigError(fmt::format("unknown transpose coefficient '{}'", key));
    const Expr& other = cs.get(partner);
    for (int n = 0; n < G.nt(); ++n)
      for (int k = 0; k < G.nodes(); ++k)
        r.max_asymmetry =
            std::max(r.max_asymmetry, std::fabs(e.eval(G.x(k), G.y(k), G.t(n)) - other.eval(G.x(k), G.y(k), G.t(n))));
  }
  SampledCoefficients dsc = sample_time_derivative(cs, g);
  for (const auto& v : dsc.c)
    for (double x : v) r.M0 = std::max(r.M0, std::fabs(x));
  for (double x : dsc.p) r.M0 = std::max(r.M0, std::fabs(x));
  for (double x : dsc.q) r.M0 = std::max(r.M0, std::fabs(x));
  if (r.max_asymmetry > 1e-12)
    throw ConfigError(fmt::format("principal coefficients are not symmetric (max |a_ij - a_ji| = {:.3e})",
                                  r.max_asymmetry));
  if (!(r.chi > 0.0))
    throw ConfigError(fmt::format("principal coefficients are not uniformly elliptic (min eigenvalue {:.3e})", r.chi));
  return r;
}

}  // namespace mfglab
