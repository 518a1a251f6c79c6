#include "mfglab/conjugate.hpp"

#include <cmath>
#include <limits>

#include "mfglab/operators.hpp"
#include "mfglab/stencil.hpp"

namespace mfglab {

namespace {

// a(grad psi, grad psi) and sum a_ij d_i psi d_j (.) coefficients at a node.
struct PsiTerms {
  double quad;     // a(grad psi, grad psi)
  double drift_x;  // sum_i a_ix d_i psi
  double drift_y;
};

PsiTerms psi_terms(const SampledCoefficients& c, const CarlemanWeights& wt, int k, int n) {
  auto gp = wt.eta().grad();
  double a11 = c.at(A11, k, n), a12 = c.at(A12, k, n), a22 = c.at(A22, k, n);
  PsiTerms p;
  p.drift_x = a11 * gp[0] + a12 * gp[1];
  p.drift_y = a12 * gp[0] + a22 * gp[1];
  p.quad = gp[0] * p.drift_x + gp[1] * p.drift_y;
  return p;
}

struct Derivs {
  ScalarField wt, wx, wy, principal;  // principal = sum a_ij d_i d_j w
};

Derivs derivs(const ScalarField& w, const SampledCoefficients& c) {
  const auto& g = *w.grid;
  Derivs d;
  d.wt = time_derivative(w);
  d.wx = spatial_derivative(w, Deriv::X);
  d.wy = ScalarField(w.grid);
  d.principal = ScalarField(w.grid);
  ScalarField wxx = spatial_derivative(w, Deriv::XX);
  ScalarField wxy(w.grid), wyy(w.grid);
  if (g.dim() == 2) {
    d.wy = spatial_derivative(w, Deriv::Y);
    wxy = spatial_derivative(w, Deriv::XY);
    wyy = spatial_derivative(w, Deriv::YY);
  }
  for (size_t i = 0; i < w.v.size(); ++i)
    d.principal.v[i] = c.c[A11][i] * wxx.v[i] + 2.0 * c.c[A12][i] * wxy.v[i] + c.c[A22][i] * wyy.v[i];
  return d;
}

// sign(x) e^{log|x| + shift} without intermediate overflow.
// s = 0 gives 0 * inf at the end levels; treat it as no shift.
double shifted(double x, double shift) {
  if (x == 0.0) return 0.0;
  if (std::isnan(shift)) return x;
  return std::copysign(std::exp(std::log(std::fabs(x)) + shift), x);
}

}  // namespace

ScalarField sample_alpha(const CarlemanWeights& wt) {
  const auto& g = *wt.grid();
  ScalarField a(wt.grid(), -std::numeric_limits<double>::infinity());
  for (int n = 1; n < g.nt() - 1; ++n)
    for (int k = 0; k < g.nodes(); ++k) a.at(k, n) = wt.alpha(g.x(k), g.y(k), g.t(n));
  return a;
}

ScalarField principal_operator(const ScalarField& w, const SampledCoefficients& c) {
  Derivs d = derivs(w, c);
  ScalarField out(w.grid);
  for (size_t i = 0; i < w.v.size(); ++i) out.v[i] = d.wt.v[i] - d.principal.v[i];
  return out;
}

ConjugateResult conjugate_P(const ScalarField& w, const CarlemanWeights& wt, const SampledCoefficients& c) {
  const auto& g = *w.grid;
  const double s = wt.s(), lam = wt.lambda();
  Derivs d = derivs(w, c);
  ConjugateResult r{ScalarField(w.grid), ScalarField(w.grid)};

  for (int n = 1; n < g.nt() - 1; ++n) {
    double t = g.t(n);
    for (int k = 0; k < g.nodes(); ++k) {
      double x = g.x(k), y = g.y(k);
      double phi = wt.eval(x, y, t).phi;
      PsiTerms p = psi_terms(c, wt, k, n);
      size_t i = static_cast<size_t>(n) * g.nodes() + k;
      double wv = w.v[i];
      // The Hessian of the affine psi vanishes, so the s*lambda*phi*(sum a_ij d_ij psi) term drops.
      r.direct.v[i] = d.wt.v[i] - d.principal.v[i] + 2.0 * s * lam * phi * (p.drift_x * d.wx.v[i] + p.drift_y * d.wy.v[i]) +
                      s * lam * lam * phi * p.quad * wv - s * s * lam * lam * phi * phi * p.quad * wv -
                      s * wt.dt_alpha(x, y, t) * wv;
    }
  }

  // Numeric route: e^{s alpha_i} sum_k c_ik e^{-s alpha_k} w_k.
  ScalarField alpha = sample_alpha(wt);
  const int N = g.nodes(), nt = g.nt();
  Tap taps[4];
  for (int n = 1; n < nt - 1; ++n) {
    // time derivative, same stencil as time_derivative()
    int m = d1_taps(n, nt, g.tau(), taps);
    for (int k = 0; k < N; ++k) {
      double ai = alpha.at(k, n);
      double acc = 0.0;
      for (int q = 0; q < m; ++q) {
        int l = taps[q].index;
        double wl = w.at(k, l);
        if (wl == 0.0) continue;
        acc += taps[q].w * shifted(wl, s * (ai - alpha.at(k, l)));
      }
      r.numeric.at(k, n) = acc;
    }
    for (int k = 0; k < N; ++k) {
      PointCoefficients pc;
      pc.cxx = c.at(A11, k, n);
      pc.cxy = 2.0 * c.at(A12, k, n);
      pc.cyy = c.at(A22, k, n);
      SparseRow row = operator_row(g, k, pc);
      double ai = alpha.at(k, n);
      double acc = 0.0;
      for (const auto& [col, cw] : row.e) {
        double wl = w.at(col, n);
        if (wl == 0.0) continue;
        acc += cw * shifted(wl, s * (ai - alpha.at(col, n)));
      }
      r.numeric.at(k, n) -= acc;
    }
  }
  return r;
}

SplitResult decompose_L1_L2(const ScalarField& w, const ScalarField& source, const CarlemanWeights& wt,
                            const SampledCoefficients& c) {
  const auto& g = *w.grid;
  const double s = wt.s(), lam = wt.lambda();
  Derivs d = derivs(w, c);
  SplitResult r{ScalarField(w.grid), ScalarField(w.grid), ScalarField(w.grid)};
  for (int n = 1; n < g.nt() - 1; ++n) {
    double t = g.t(n);
    for (int k = 0; k < g.nodes(); ++k) {
      double x = g.x(k), y = g.y(k);
      WeightValues wv = wt.eval(x, y, t);
      PsiTerms p = psi_terms(c, wt, k, n);
      size_t i = static_cast<size_t>(n) * g.nodes() + k;
      double val = w.v[i];
      double phi = wv.phi;
      r.L2.v[i] = -d.principal.v[i] - s * s * lam * lam * phi * phi * p.quad * val - s * wt.dt_alpha(x, y, t) * val;
      r.L1.v[i] = d.wt.v[i] + 2.0 * s * lam * phi * (p.drift_x * d.wx.v[i] + p.drift_y * d.wy.v[i]) +
                  2.0 * s * lam * lam * phi * p.quad * val;
      // L1 + L2 = P + s lambda^2 phi a(grad psi, grad psi) - s lambda phi (sum a_ij d_ij psi); the
      // last term vanishes for affine psi.
      double esa = std::exp(s * wv.alpha);
      r.H.v[i] = esa * source.v[i] + s * lam * lam * phi * p.quad * val;
    }
  }
  return r;
}

}  // namespace mfglab
