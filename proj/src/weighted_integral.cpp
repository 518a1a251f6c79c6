#include "mfglab/weighted_integral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfglab/errors.hpp"
#include "mfglab/norms.hpp"

namespace mfglab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kSkipBelow = 120.0;  // cells this far below the global peak are dropped
constexpr double kMaxStep = 0.5;      // log-weight change per sub-interval
constexpr int kMaxSub = 64;

const double kGaussX[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
const double kGaussW[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

int subdivisions(double dl) {
  if (!std::isfinite(dl)) return kMaxSub;
  return std::clamp(static_cast<int>(std::ceil(dl / kMaxStep)), 1, kMaxSub);
}

double span(double a, double b) {
  if (a == kNegInf && b == kNegInf) return 0.0;
  return std::fabs(a - b);
}

// Corner moments int N_c W over a cell with ds spatial directions and one time direction.
// pos maps the spatial reference coordinates to (x, y).
template <class Pos, class LogW>
void cell_moments(int ds, const Pos& pos, double t0, double t1, double volume, const LogW& logw, double global_max,
                  double T, double* out) {
  const int nsc = 1 << ds;  // spatial corners
  double lc[8];
  double cmax = kNegInf;
  for (int c = 0; c < nsc; ++c) {
    double xi[2] = {static_cast<double>(c & 1), static_cast<double>((c >> 1) & 1)};
    auto p = pos(xi);
    for (int tc = 0; tc < 2; ++tc) {
      double v = logw(p[0], p[1], tc ? t1 : t0);
      lc[c + nsc * tc] = v;
      cmax = std::max(cmax, v);
    }
  }
  double tmid = 0.5 * T;
  bool has_mid = tmid > t0 && tmid < t1;
  double lmid[4] = {kNegInf, kNegInf, kNegInf, kNegInf};
  if (has_mid)
    for (int c = 0; c < nsc; ++c) {
      double xi[2] = {static_cast<double>(c & 1), static_cast<double>((c >> 1) & 1)};
      auto p = pos(xi);
      lmid[c] = logw(p[0], p[1], tmid);
      cmax = std::max(cmax, lmid[c]);
    }
  for (int c = 0; c < 2 * nsc; ++c) out[c] = 0.0;
  if (cmax < global_max - kSkipBelow) return;

  double dlt = 0.0, dlx = 0.0, dly = 0.0;
  for (int c = 0; c < nsc; ++c) {
    dlt = std::max(dlt, span(lc[c], lc[c + nsc]));
    if (has_mid) dlt = std::max(dlt, span(lc[c], lmid[c]) + span(lmid[c], lc[c + nsc]));
  }
  for (int tc = 0; tc < 2; ++tc) {
    const double* l = lc + nsc * tc;
    if (ds >= 1) {
      dlx = std::max(dlx, span(l[0], l[1]));
      if (ds == 2) dlx = std::max(dlx, span(l[2], l[3]));
    }
    if (ds == 2) dly = std::max({dly, span(l[0], l[2]), span(l[1], l[3])});
  }
  const int mt = subdivisions(dlt);
  const int mx = ds >= 1 ? subdivisions(dlx) : 1;
  const int my = ds == 2 ? subdivisions(dly) : 1;

  for (int it = 0; it < mt; ++it)
    for (int gt = 0; gt < 3; ++gt) {
      double st = (it + kGaussX[gt]) / mt;
      double t = t0 + st * (t1 - t0);
      double wt = kGaussW[gt] / mt;
      for (int ix = 0; ix < mx; ++ix)
        for (int gx = 0; gx < (ds >= 1 ? 3 : 1); ++gx) {
          double sx = ds >= 1 ? (ix + kGaussX[gx]) / mx : 0.0;
          double wx = ds >= 1 ? kGaussW[gx] / mx : 1.0;
          for (int iy = 0; iy < my; ++iy)
            for (int gy = 0; gy < (ds == 2 ? 3 : 1); ++gy) {
              double sy = ds == 2 ? (iy + kGaussX[gy]) / my : 0.0;
              double wy = ds == 2 ? kGaussW[gy] / my : 1.0;
              double xi[2] = {sx, sy};
              auto p = pos(xi);
              double l = logw(p[0], p[1], t);
              if (l == kNegInf) continue;
              double w = wt * wx * wy * std::exp(l) * volume;
              for (int c = 0; c < nsc; ++c) {
                double nx = ds >= 1 ? ((c & 1) ? sx : 1.0 - sx) : 1.0;
                double ny = ds == 2 ? (((c >> 1) & 1) ? sy : 1.0 - sy) : 1.0;
                out[c] += w * nx * ny * (1.0 - st);
                out[c + nsc] += w * nx * ny * st;
              }
            }
        }
    }
}

}  // namespace

WeightedIntegrator::WeightedIntegrator(const CarlemanWeights& w) : w_(w), e2_(w.exp_2norm()) {}

double WeightedIntegrator::log_weight(double x, double y, double t, double b) const {
  const double T = w_.T();
  if (t <= 0.0 || t >= T) return kNegInf;
  double m = eval_mu(t, T);
  double le = w_.lambda() * w_.eta()(x, y);
  double alpha = (std::exp(le) - e2_) / m;
  double lw = 2.0 * w_.s() * (alpha - w_.alpha_max());
  if (b != 0.0) lw += b * (le - std::log(m));
  return lw;
}

std::vector<double> WeightedIntegrator::build_interior(double b) const {
  const auto& g = *w_.grid();
  const int nx = g.nx(), ny = g.ny(), nt = g.nt(), N = g.nodes();
  std::vector<double> out(static_cast<size_t>(N) * nt, 0.0);
  auto lw = [&](double x, double y, double t) { return log_weight(x, y, t, b); };
  double gmax = kNegInf;
  for (int n = 1; n < nt - 1; ++n)
    for (int k = 0; k < N; ++k) gmax = std::max(gmax, lw(g.x(k), g.y(k), g.t(n)));
  for (int k = 0; k < N; ++k) gmax = std::max(gmax, lw(g.x(k), g.y(k), 0.5 * g.T()));
  const int ds = g.dim();
  const double hx = g.hx(), hy = g.hy();
  const double vol = (ds == 2 ? hx * hy : hx) * g.tau();
  double mom[8];
  for (int n = 0; n + 1 < nt; ++n)
    for (int j = 0; j < (ds == 2 ? ny - 1 : 1); ++j)
      for (int i = 0; i + 1 < nx; ++i) {
        double x0 = i * hx, y0 = j * hy;
        auto pos = [&](const double* xi) { return std::array<double, 2>{x0 + xi[0] * hx, ds == 2 ? y0 + xi[1] * hy : 0.0}; };
        cell_moments(ds, pos, g.t(n), g.t(n + 1), vol, lw, gmax, g.T(), mom);
        const int nsc = 1 << ds;
        for (int c = 0; c < nsc; ++c) {
          int k = g.node(i + (c & 1), ds == 2 ? j + ((c >> 1) & 1) : 0);
          out[static_cast<size_t>(n) * N + k] += mom[c];
          out[static_cast<size_t>(n + 1) * N + k] += mom[c + nsc];
        }
      }
  return out;
}

std::vector<double> WeightedIntegrator::build_boundary(double b) const {
  const auto& g = *w_.grid();
  const int nt = g.nt(), nb = g.boundary_size();
  const auto& be = g.boundary();
  std::vector<double> out(static_cast<size_t>(nb) * nt, 0.0);
  auto lw = [&](double x, double y, double t) { return log_weight(x, y, t, b); };
  double gmax = kNegInf;
  for (int n = 1; n < nt - 1; ++n)
    for (int e = 0; e < nb; ++e) gmax = std::max(gmax, lw(g.x(be[e].node), g.y(be[e].node), g.t(n)));
  for (int e = 0; e < nb; ++e) gmax = std::max(gmax, lw(g.x(be[e].node), g.y(be[e].node), 0.5 * g.T()));
  double mom[8];
  if (g.dim() == 1) {
    for (int e = 0; e < nb; ++e) {
      double x = g.x(be[e].node);
      auto pos = [&](const double*) { return std::array<double, 2>{x, 0.0}; };
      for (int n = 0; n + 1 < nt; ++n) {
        cell_moments(0, pos, g.t(n), g.t(n + 1), g.tau(), lw, gmax, g.T(), mom);
        out[static_cast<size_t>(n) * nb + e] += mom[0];
        out[static_cast<size_t>(n + 1) * nb + e] += mom[1];
      }
    }
    return out;
  }
  for (Side side : g.sides()) {
    const auto& ent = g.side_entries(side);
    for (size_t i = 0; i + 1 < ent.size(); ++i) {
      int ka = be[ent[i]].node, kb = be[ent[i + 1]].node;
      double xa = g.x(ka), ya = g.y(ka), xb = g.x(kb), yb = g.y(kb);
      double len = std::hypot(xb - xa, yb - ya);
      auto pos = [&](const double* xi) { return std::array<double, 2>{xa + xi[0] * (xb - xa), ya + xi[0] * (yb - ya)}; };
      for (int n = 0; n + 1 < nt; ++n) {
        cell_moments(1, pos, g.t(n), g.t(n + 1), len * g.tau(), lw, gmax, g.T(), mom);
        out[static_cast<size_t>(n) * nb + ent[i]] += mom[0];
        out[static_cast<size_t>(n) * nb + ent[i + 1]] += mom[1];
        out[static_cast<size_t>(n + 1) * nb + ent[i]] += mom[2];
        out[static_cast<size_t>(n + 1) * nb + ent[i + 1]] += mom[3];
      }
    }
  }
  return out;
}

const std::vector<double>& WeightedIntegrator::interior_weights(double b) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto& slot = interior_cache_[b];
  if (!slot) slot = std::make_unique<std::vector<double>>(build_interior(b));
  return *slot;
}

const std::vector<double>& WeightedIntegrator::boundary_weights(double b) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto& slot = boundary_cache_[b];
  if (!slot) slot = std::make_unique<std::vector<double>>(build_boundary(b));
  return *slot;
}

double WeightedIntegrator::interior(const ScalarField& f, double b) const {
  const auto& w = interior_weights(b);
  double acc = 0.0;
  for (size_t i = 0; i < w.size(); ++i)
    if (w[i] != 0.0) acc += w[i] * f.v[i];
  if (!std::isfinite(acc)) throw InvariantViolation("weighted interior integral is not finite");
  return acc;
}

double WeightedIntegrator::boundary(const BoundaryTrace& f, double b, const BoundaryPartition& part,
                                    Segment seg) const {
  const auto& g = *w_.grid();
  const auto& w = boundary_weights(b);
  const int nb = g.boundary_size();
  double acc = 0.0;
  for (int n = 0; n < g.nt(); ++n)
    for (int e = 0; e < nb; ++e) {
      if (!part.in_segment(e, seg)) continue;
      double wi = w[static_cast<size_t>(n) * nb + e];
      if (wi != 0.0) acc += wi * f.at(e, n);
    }
  if (!std::isfinite(acc)) throw InvariantViolation("weighted boundary integral is not finite");
  return acc;
}

double WeightedIntegrator::weighted_h12_sq(const BoundaryTrace& f, double c) const {
  const auto& g = *w_.grid();
  const auto& be = g.boundary();
  const int nb = g.boundary_size(), nt = g.nt();
  // Sub-steps from the variation of the squared weight at the point of largest eta.
  int kmax = be[0].node;
  for (int e = 0; e < nb; ++e)
    if (w_.eta()(g.x(be[e].node), g.y(be[e].node)) > w_.eta()(g.x(kmax), g.y(kmax))) kmax = be[e].node;
  const double xm = g.x(kmax), ym = g.y(kmax);
  auto lw = [&](double t) { return log_weight(xm, ym, t, 2.0 * c); };
  double gmax = lw(0.5 * g.T());
  for (int n = 1; n < nt - 1; ++n) gmax = std::max(gmax, lw(g.t(n)));
  std::vector<double> buf(nb);
  double acc = 0.0;
  for (int n = 0; n + 1 < nt; ++n) {
    double t0 = g.t(n), t1 = g.t(n + 1);
    double l0 = lw(t0), l1 = lw(t1);
    double cmax = std::max(l0, l1), dl = span(l0, l1);
    if (0.5 * g.T() > t0 && 0.5 * g.T() < t1) {
      double lm = lw(0.5 * g.T());
      cmax = std::max(cmax, lm);
      dl = std::max(dl, span(l0, lm) + span(lm, l1));
    }
    if (cmax < gmax - kSkipBelow) continue;
    int m = subdivisions(dl);
    for (int i = 0; i < m; ++i)
      for (int q = 0; q < 3; ++q) {
        double st = (i + kGaussX[q]) / m;
        double t = t0 + st * (t1 - t0);
        for (int e = 0; e < nb; ++e) {
          double x = g.x(be[e].node), y = g.y(be[e].node);
          double l = 0.5 * log_weight(x, y, t, 2.0 * c);
          double val = (1.0 - st) * f.at(e, n) + st * f.at(e, n + 1);
          buf[e] = l == kNegInf ? 0.0 : val * std::exp(l);
        }
        double h = norm_H12_boundary(g, buf.data());
        acc += kGaussW[q] / m * (t1 - t0) * h * h;
      }
  }
  if (!std::isfinite(acc)) throw InvariantViolation("weighted H^1/2 integral is not finite");
  return acc;
}

}  // namespace mfglab
