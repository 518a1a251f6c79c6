#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "mfglab/grid.hpp"
#include "mfglab/weights.hpp"

namespace mfglab {

// Product quadrature for integrals of nodal data against phi^b e^{2 s alpha}.
// Nodal data is interpolated multilinearly inside each space-time cell while the weight
// is evaluated analytically at Gauss points, with sub-intervals chosen so that the log
// weight varies by at most 0.5 per sub-interval. All results are normalized by
// e^{-2 s alpha_max}; log_scale() returns the factor to undo this.
class WeightedIntegrator {
 public:
  explicit WeightedIntegrator(const CarlemanWeights& w);

  const CarlemanWeights& weights() const { return w_; }
  double log_scale() const { return 2.0 * w_.s() * w_.alpha_max(); }

  // Normalized log of phi^b e^{2 s alpha} (-inf at t = 0 and t = T).
  double log_weight(double x, double y, double t, double b) const;

  double interior(const ScalarField& f, double b) const;
  double boundary(const BoundaryTrace& f, double b, const BoundaryPartition& part, Segment seg) const;

  // Effective nodal weights (level-major, same layout as the fields).
  const std::vector<double>& interior_weights(double b) const;
  const std::vector<double>& boundary_weights(double b) const;

  // Normalized || phi^c f e^{s alpha} ||^2 in L2(0,T; H^{1/2}(boundary)). The trace is
  // interpolated linearly in time and the level norm is evaluated at Gauss points.
  double weighted_h12_sq(const BoundaryTrace& f, double c) const;

 private:
  CarlemanWeights w_;
  double e2_;
  mutable std::mutex mu_;
  mutable std::map<double, std::unique_ptr<std::vector<double>>> interior_cache_, boundary_cache_;

  std::vector<double> build_interior(double b) const;
  std::vector<double> build_boundary(double b) const;
};

}  // namespace mfglab
