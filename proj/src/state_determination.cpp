#include "mfglab/state_determination.hpp"

#include <cmath>

#include "mfglab/errors.hpp"
#include "mfglab/manufacture.hpp"
#include "mfglab/norms.hpp"
#include "mfglab/stencil.hpp"

namespace mfglab {

namespace {

double unobserved_dt_l2(const BoundaryTrace& g, const BoundaryPartition& part) {
  BoundaryTrace gt = time_derivative(g);
  for (double& x : gt.v) x *= x;
  return std::sqrt(integrate_boundary(gt, part, Segment::Unobserved));
}

double sum_terms(const std::map<std::string, double>& t) {
  double s = 0.0;
  for (const auto& [k, v] : t) s += v;
  return s;
}

void fill_eps(StateReport& rep, const ScalarField& du, const ScalarField& dv, const std::vector<double>& eps) {
  if (eps.empty()) throw ConfigError("at least one eps value is required");
  for (double e : eps) {
    EpsEntry en;
    en.eps = e;
    en.lhs_u = norm_H21(du, e);
    en.lhs_v = norm_H21(dv, e);
    en.lhs = en.lhs_u + en.lhs_v;
    en.ratio = rep.rhs > 0.0 ? en.lhs / rep.rhs : 0.0;
    rep.eps.push_back(en);
  }
  for (size_t i = 0; i < rep.eps.size(); ++i)
    for (size_t j = 0; j < rep.eps.size(); ++j)
      if (rep.eps[i].eps < rep.eps[j].eps && rep.eps[j].lhs > rep.eps[i].lhs) rep.eps_monotone = false;
}

double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

// Bound on the coefficients of the difference system: |kappa (grad u1 + grad u2)|,
// |grad kappa . grad u1 + kappa Lap u1|, |kappa v2|, |grad(kappa v2)|.
double difference_bound(const NonlinearCoefficients& nc, const ScalarField& u1, const ScalarField& u2,
                        const ScalarField& v2) {
  const GridPtr& g = u1.grid;
  const bool two = g->dim() == 2;
  ScalarField kap = sample_field(nc.kappa, g);
  ScalarField kx = spatial_derivative(kap, Deriv::X), ky = two ? spatial_derivative(kap, Deriv::Y) : ScalarField(g);
  auto grad = [&](const ScalarField& f) {
    return std::pair{spatial_derivative(f, Deriv::X), two ? spatial_derivative(f, Deriv::Y) : ScalarField(g)};
  };
  auto [u1x, u1y] = grad(u1);
  auto [u2x, u2y] = grad(u2);
  ScalarField lap = spatial_derivative(u1, Deriv::XX);
  if (two) lap += spatial_derivative(u1, Deriv::YY);
  ScalarField kv(g);
  for (size_t i = 0; i < kv.v.size(); ++i) kv.v[i] = kap.v[i] * v2.v[i];
  auto [kvx, kvy] = grad(kv);
  std::vector<double> t1(kv.v.size()), t2(kv.v.size()), t4(kv.v.size());
  for (size_t i = 0; i < kv.v.size(); ++i) {
    t1[i] = std::fabs(kap.v[i]) * std::hypot(u1x.v[i] + u2x.v[i], u1y.v[i] + u2y.v[i]);
    t2[i] = kx.v[i] * u1x.v[i] + ky.v[i] * u1y.v[i] + kap.v[i] * lap.v[i];
    t4[i] = std::hypot(kvx.v[i], kvy.v[i]);
  }
  return sup_abs(t1) + sup_abs(t2) + sup_abs(kv.v) + sup_abs(t4);
}

}  // namespace

std::map<std::string, double> linear_data_terms(const BoundaryPartition& part, const SystemData& d, const ScalarField& u,
                                                const ScalarField& v) {
  std::map<std::string, double> t;
  t["F_L2"] = norm_L2(d.F);
  t["G_L2"] = norm_L2(d.G);
  t["u_gamma_H1"] = norm_H1_gamma(u, part);
  t["v_gamma_H1"] = norm_H1_gamma(v, part);
  t["dt_g_unobserved_L2"] = unobserved_dt_l2(d.g, part);
  t["dt_h_unobserved_L2"] = unobserved_dt_l2(d.h, part);
  t["g_L2H12"] = norm_L2_H12(d.g);
  t["h_L2H12"] = norm_L2_H12(d.h);
  return t;
}

StateReport state_linear(const SampledCoefficients& c, const BoundaryPartition& part, const SystemData& d1,
                         const SystemData& d2, const std::vector<double>& eps, const SolveOptions& opts) {
  StateReport rep;
  rep.mode = "linear";
  SystemData dd = d2 - d1;
  SolveResult r = solve_linearized(dd, c, opts);
  rep.rhs_terms = linear_data_terms(part, dd, r.u, r.v);
  rep.rhs = sum_terms(rep.rhs_terms);
  fill_eps(rep, r.u, r.v, eps);
  return rep;
}

StateReport state_nonlinear(const NonlinearCoefficients& nc, const BoundaryPartition& part, const NonlinearData& d1,
                            const NonlinearData& d2, const std::vector<double>& eps, double M1,
                            const SolveOptions& opts) {
  const GridPtr& g = part.grid();
  StateReport rep;
  rep.mode = "nonlinear";
  rep.M1 = M1;
  NonlinearResult r1 = solve_nonlinear(d1, nc, g, opts);
  NonlinearResult r2 = solve_nonlinear(d2, nc, g, opts);
  for (const auto* r : {&r1, &r2}) {
    double m = winf_norm(r->u, 2) + winf_norm(r->v, 1);
    rep.M1_observed.push_back(m);
    if (m > M1) rep.in_hypothesis = false;
    rep.residuals.push_back(std::max(r->residual_u, r->residual_v));
  }
  rep.M2 = difference_bound(nc, r1.u, r2.u, r2.v);
  ScalarField du = r2.u - r1.u, dv = r2.v - r1.v;
  ScalarField dF = d2.F - d1.F, dG = d2.G - d1.G;
  rep.rhs_terms["F_L2"] = norm_L2(dF);
  rep.rhs_terms["G_L2"] = norm_L2(dG);
  rep.rhs_terms["u_gamma_H1"] = norm_H1_gamma(du, part);
  rep.rhs_terms["v_gamma_H1"] = norm_H1_gamma(dv, part);
  rep.rhs = sum_terms(rep.rhs_terms);
  fill_eps(rep, du, dv, eps);

  // kappa = 0 reference: the linear system with the same a and c0 and Neumann conditions.
  SampledCoefficients lin = frozen_coefficients(nc, g, nullptr, nullptr);
  SystemData s1 = SystemData::zeros(g), s2 = SystemData::zeros(g);
  s1.F = d1.F;
  s1.G = d1.G;
  s1.uT = d1.uT;
  s1.v0 = d1.v0;
  s2.F = d2.F;
  s2.G = d2.G;
  s2.uT = d2.uT;
  s2.v0 = d2.v0;
  StateReport ref = state_linear(lin, part, s1, s2, {eps.front()}, opts);
  rep.linear_ratio = ref.eps.front().ratio;
  return rep;
}

}  // namespace mfglab
