#pragma once

#include <memory>
#include <vector>

#include "mfglab/coefficients.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/operators.hpp"

namespace mfglab {

// Sources, Robin data, terminal state of u and initial state of v for
//   d_t u + A u = c0 v + F,   d_t v - B v = A0 u + G,
//   d_{nu_A} u - p u = g,     d_{nu_B} v - q v = h.
struct SystemData {
  ScalarField F, G;
  BoundaryTrace g, h;
  std::vector<double> uT, v0;

  static SystemData zeros(const GridPtr& grid);
  SystemData& operator+=(const SystemData& o);
  SystemData& operator-=(const SystemData& o);
  SystemData& operator*=(double c);
};

SystemData operator-(SystemData a, const SystemData& b);
SystemData operator*(double c, SystemData a);

struct SolveOptions {
  double theta = 0.5;
  double picard_tol = 1e-8;
  int picard_max = 50;
  double linear_tol = 1e-10;
  int fixed_iterations = 0;  // > 0: run exactly this many sweeps, ignore the tolerance
  bool throw_on_nonconvergence = true;

  void validate() const;
};

struct SolveResult {
  ScalarField u, v;
  int iterations = 0;
  bool converged = false;
  std::vector<double> updates;  // relative L2(Q) update per sweep
};

// Factorized implicit system of one time level.
class LevelSolver {
 public:
  virtual ~LevelSolver() = default;
  virtual void solve(const double* rhs, double* x) const = 0;
};

// Picard solver for the linearized coupled system with per-level factorizations cached.
class LinearizedSolver {
 public:
  enum class Part { Both, UOnly, VOnly };  // which level systems to factorize
  LinearizedSolver(const SampledCoefficients& c, const SolveOptions& opts, Part part = Part::Both);

  const DiscreteOperators& ops() const { return ops_; }
  const SolveOptions& options() const { return opts_; }
  const GridPtr& grid() const { return grid_; }

  // Backward march of the u-equation for a given v.
  ScalarField step_backward_u(const ScalarField& v, const SystemData& d) const;
  // Forward march of the v-equation for a given u.
  ScalarField step_forward_v(const ScalarField& u, const SystemData& d) const;
  SolveResult solve(const SystemData& d) const;

 private:
  GridPtr grid_;
  SolveOptions opts_;
  DiscreteOperators ops_;
  std::vector<std::unique_ptr<LevelSolver>> u_solvers_;  // index: implicit level n = 0..nt-2
  std::vector<std::unique_ptr<LevelSolver>> v_solvers_;  // index: implicit level n = 1..nt-1
};

SolveResult solve_linearized(const SystemData& d, const SampledCoefficients& c, const SolveOptions& opts);

// L2(Q) trapezoid norm.
double l2_norm(const ScalarField& f);
// Relative combined update ||(du, dv)|| / ||(u, v)|| (0 when both vanish).
double relative_update(const ScalarField& u_new, const ScalarField& u_old, const ScalarField& v_new,
                       const ScalarField& v_old);

struct ResidualReport {
  double abs_u = 0.0, abs_v = 0.0;
  double scale_u = 0.0, scale_v = 0.0;
  double relative = 0.0;
};

// Residual of the theta-scheme equations (interior rows and Robin rows) for a given pair.
ResidualReport discrete_residual(const ScalarField& u, const ScalarField& v, const SystemData& d,
                                 const LinearizedSolver& solver);

// Relative continuous-form residuals with second-order time differences, interior nodes only.
// which = A: d_t u + A u - c0 v - F  (v may be null: no coupling term)
// which = B: d_t v - B v - A0 u - G  (u may be null)
double equation_residual(Which which, const ScalarField& w, const ScalarField* other, const ScalarField& source,
                         const DiscreteOperators& ops);
// Relative Robin residual over all boundary entries and levels.
double robin_relative_residual(Which which, const ScalarField& w, const BoundaryTrace& data,
                               const SampledCoefficients& c);

}  // namespace mfglab
