#pragma once

#include <utility>
#include <vector>

#include "mfglab/grid.hpp"

namespace mfglab {

// Absolute index + weight of one finite-difference tap along an axis.
struct Tap {
  int index;
  double w;
};

// Second-order first/second derivative taps at index i of n uniformly spaced points.
// Central in the interior, one-sided (3 resp. 4 points) at the ends.
int d1_taps(int i, int n, double h, Tap out[4]);
int d2_taps(int i, int n, double h, Tap out[4]);

enum class Deriv { X, Y, XX, XY, YY };

// Derivative of one spatial slice (nodes of the grid).
void spatial_derivative(const SpaceTimeGrid& g, const double* f, Deriv d, double* out);
ScalarField spatial_derivative(const ScalarField& f, Deriv d);

// Derivative along a strided 1D series of length n.
void series_d1(const double* f, int n, int stride, double h, double* out, int out_stride);
void series_d2(const double* f, int n, int stride, double h, double* out, int out_stride);

ScalarField time_derivative(const ScalarField& f);
ScalarField time_second_derivative(const ScalarField& f);
BoundaryTrace time_derivative(const BoundaryTrace& f);

// Fourth-order centered time derivative at an interior level (needs 2 levels on each side).
std::vector<double> time_derivative4(const ScalarField& f, int level);

// Sparse row with duplicate columns merged on finish().
struct SparseRow {
  std::vector<std::pair<int, double>> e;
  void add(int col, double w) { e.emplace_back(col, w); }
  void scale(double c) {
    for (auto& p : e) p.second *= c;
  }
  void finish();
  double dot(const double* x) const {
    double acc = 0.0;
    for (const auto& p : e) acc += p.second * x[p.first];
    return acc;
  }
};

}  // namespace mfglab
