#include "mfglab/stencil.hpp"

#include <algorithm>

#include "mfglab/errors.hpp"

namespace mfglab {

int d1_taps(int i, int n, double h, Tap out[4]) {
  const double c = 1.0 / (2.0 * h);
  if (i == 0) {
    out[0] = {0, -3.0 * c};
    out[1] = {1, 4.0 * c};
    out[2] = {2, -1.0 * c};
  } else if (i == n - 1) {
    out[0] = {n - 3, 1.0 * c};
    out[1] = {n - 2, -4.0 * c};
    out[2] = {n - 1, 3.0 * c};
  } else {
    out[0] = {i - 1, -c};
    out[1] = {i + 1, c};
    return 2;
  }
  return 3;
}

int d2_taps(int i, int n, double h, Tap out[4]) {
  const double c = 1.0 / (h * h);
  if ((i == 0 || i == n - 1) && n >= 4) {
    int s = (i == 0) ? 1 : -1;
    out[0] = {i, 2.0 * c};
    out[1] = {i + s, -5.0 * c};
    out[2] = {i + 2 * s, 4.0 * c};
    out[3] = {i + 3 * s, -1.0 * c};
    return 4;
  }
  int m = std::clamp(i, 1, n - 2);
  out[0] = {m - 1, c};
  out[1] = {m, -2.0 * c};
  out[2] = {m + 1, c};
  return 3;
}

void series_d1(const double* f, int n, int stride, double h, double* out, int out_stride) {
  Tap t[4];
  for (int i = 0; i < n; ++i) {
    int m = d1_taps(i, n, h, t);
    double acc = 0.0;
    for (int q = 0; q < m; ++q) acc += t[q].w * f[static_cast<size_t>(t[q].index) * stride];
    out[static_cast<size_t>(i) * out_stride] = acc;
  }
}

void series_d2(const double* f, int n, int stride, double h, double* out, int out_stride) {
  Tap t[4];
  for (int i = 0; i < n; ++i) {
    int m = d2_taps(i, n, h, t);
    double acc = 0.0;
    for (int q = 0; q < m; ++q) acc += t[q].w * f[static_cast<size_t>(t[q].index) * stride];
    out[static_cast<size_t>(i) * out_stride] = acc;
  }
}

void spatial_derivative(const SpaceTimeGrid& g, const double* f, Deriv d, double* out) {
  const int nx = g.nx(), ny = g.ny();
  if (g.dim() == 1 && (d == Deriv::Y || d == Deriv::XY || d == Deriv::YY)) {
    std::fill(out, out + g.nodes(), 0.0);
    return;
  }
  switch (d) {
    case Deriv::X:
      for (int j = 0; j < ny; ++j) series_d1(f + j * nx, nx, 1, g.hx(), out + j * nx, 1);
      break;
    case Deriv::XX:
      for (int j = 0; j < ny; ++j) series_d2(f + j * nx, nx, 1, g.hx(), out + j * nx, 1);
      break;
    case Deriv::Y:
      for (int i = 0; i < nx; ++i) series_d1(f + i, ny, nx, g.hy(), out + i, nx);
      break;
    case Deriv::YY:
      for (int i = 0; i < nx; ++i) series_d2(f + i, ny, nx, g.hy(), out + i, nx);
      break;
    case Deriv::XY: {
      std::vector<double> fx(g.nodes());
      for (int j = 0; j < ny; ++j) series_d1(f + j * nx, nx, 1, g.hx(), fx.data() + j * nx, 1);
      for (int i = 0; i < nx; ++i) series_d1(fx.data() + i, ny, nx, g.hy(), out + i, nx);
      break;
    }
  }
}

ScalarField spatial_derivative(const ScalarField& f, Deriv d) {
  ScalarField out(f.grid);
  for (int n = 0; n < f.grid->nt(); ++n) spatial_derivative(*f.grid, f.level(n), d, out.level(n));
  return out;
}

ScalarField time_derivative(const ScalarField& f) {
  ScalarField out(f.grid);
  const int N = f.stride();
  for (int k = 0; k < N; ++k) series_d1(f.v.data() + k, f.grid->nt(), N, f.grid->tau(), out.v.data() + k, N);
  return out;
}

ScalarField time_second_derivative(const ScalarField& f) {
  ScalarField out(f.grid);
  const int N = f.stride();
  for (int k = 0; k < N; ++k) series_d2(f.v.data() + k, f.grid->nt(), N, f.grid->tau(), out.v.data() + k, N);
  return out;
}

BoundaryTrace time_derivative(const BoundaryTrace& f) {
  BoundaryTrace out(f.grid);
  const int N = f.stride();
  for (int e = 0; e < N; ++e) series_d1(f.v.data() + e, f.grid->nt(), N, f.grid->tau(), out.v.data() + e, N);
  return out;
}

std::vector<double> time_derivative4(const ScalarField& f, int level) {
  const int nt = f.grid->nt();
  if (level < 2 || level > nt - 3)
    throw ConfigError("fourth-order time derivative needs two levels on each side of the snapshot");
  const double c = 1.0 / (12.0 * f.grid->tau());
  std::vector<double> out(f.stride());
  for (int k = 0; k < f.stride(); ++k)
    out[k] = c * (f.at(k, level - 2) - 8.0 * f.at(k, level - 1) + 8.0 * f.at(k, level + 1) - f.at(k, level + 2));
  return out;
}

void SparseRow::finish() {
  std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> merged;
  for (const auto& p : e) {
    if (!merged.empty() && merged.back().first == p.first)
      merged.back().second += p.second;
    else
      merged.push_back(p);
  }
  e.swap(merged);
}

}  // namespace mfglab
