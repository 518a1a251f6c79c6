#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCore>

#include "mfglab/coefficients.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/stencil.hpp"

namespace mfglab {

using SparseRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Which { A, B, A0 };

// Second-order operator cxx d_xx + cxy d_xy + cyy d_yy + cx d_x + cy d_y + c0 at one node.
struct PointCoefficients {
  double cxx = 0, cxy = 0, cyy = 0, cx = 0, cy = 0, c0 = 0;
};

SparseRow operator_row(const SpaceTimeGrid& g, int node, const PointCoefficients& pc);
// Conormal derivative nu . (M grad u) at one boundary entry, M = [[m11, m12], [m12, m22]].
SparseRow conormal_row(const SpaceTimeGrid& g, int entry, double m11, double m12, double m22);

PointCoefficients point_coefficients(const SampledCoefficients& c, Which which, int node, int level);

// Per-level sparse matrices of A, B, A0 over all nodes (one-sided stencils on the
// boundary) and of the A/B conormal derivatives over boundary entries.
class DiscreteOperators {
 public:
  explicit DiscreteOperators(const SampledCoefficients& c);  // keeps its own copy

  const SampledCoefficients& coefficients() const { return *c_; }
  const SparseRM& op(Which w, int level) const;
  const SparseRM& conormal(Which w, int level) const;
  // Result written to out (size nodes / boundary entries).
  void apply(Which w, int level, const double* u, double* out) const;
  void apply_conormal(Which w, int level, const double* u, double* out) const;
  ScalarField apply(Which w, const ScalarField& u) const;

 private:
  std::shared_ptr<const SampledCoefficients> c_;
  std::vector<SparseRM> a_, b_, a0_, na_, nb_;
};

std::vector<double> apply_A(const ScalarField& u, int level, const SampledCoefficients& c);
std::vector<double> apply_B(const ScalarField& v, int level, const SampledCoefficients& c);
std::vector<double> apply_A0(const ScalarField& u, int level, const SampledCoefficients& c);

// d_{nu_A} u - p u - g (which = A) or d_{nu_B} v - q v - h (which = B) on all entries and levels.
BoundaryTrace robin_residual(const ScalarField& u, const SampledCoefficients& c, Which which, const BoundaryTrace& g);
BoundaryTrace conormal_trace(const ScalarField& u, const SampledCoefficients& c, Which which);

}  // namespace mfglab
