#pragma once

#include "mfglab/coefficients.hpp"
#include "mfglab/expr.hpp"
#include "mfglab/solver.hpp"

namespace mfglab {

ScalarField sample_field(const Expr& e, const GridPtr& g);
std::vector<double> sample_level(const Expr& e, const SpaceTimeGrid& g, double t);
// Boundary trace from one expression per side (indexed by Side).
BoundaryTrace sample_trace(const std::array<Expr, 4>& per_side, const GridPtr& g);
BoundaryTrace sample_trace(const Expr& e, const GridPtr& g);

// Symbolic images of the operators.
Expr symbolic_A(const CoefficientSet& cs, const Expr& u);
Expr symbolic_B(const CoefficientSet& cs, const Expr& v);
Expr symbolic_A0(const CoefficientSet& cs, const Expr& u);
// Conormal derivative minus Robin coefficient times the field, one expression per side.
std::array<Expr, 4> symbolic_robin(const CoefficientSet& cs, Which which, const Expr& w, int dim);

struct ManufacturedProblem {
  SystemData data;     // consistent with the exact pair
  SystemData dt_data;  // time derivatives of F, G, g, h (uT, v0 hold d_t u(T), d_t v(0))
  ScalarField u, v;    // exact fields
  ScalarField ut, vt;  // exact time derivatives
  Expr F, G;
};

ManufacturedProblem manufacture(const Expr& u, const Expr& v, const CoefficientSet& cs, const GridPtr& g);

}  // namespace mfglab
