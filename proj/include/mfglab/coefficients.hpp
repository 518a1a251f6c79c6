#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "mfglab/expr.hpp"
#include "mfglab/grid.hpp"

namespace mfglab {

// Node-valued coefficients. The u-operator is sum a_ij d_i d_j + a_1 d_x + a_2 d_y + a_0,
// the v-operator the same with b, the coupling operator sum k_gamma d^gamma, and c0 the
// zeroth-order coupling in the u-equation.
enum Coef {
  A11, A12, A22, A1, A2, A0,
  B11, B12, B22, B1, B2, B0,
  K0, KX, KY, KXX, KXY, KYY,
  C0,
  kNodalCoefs
};

const char* coef_name(Coef c);
// Keys meaningful in the given dimension (nodal ones followed by "p", "q").
std::vector<std::string> coefficient_keys(int dim);

// Closed-form coefficients. p and q are the Robin traces of the u- and v-equations.
struct CoefficientSet {
  int dim = 1;
  std::map<std::string, Expr> expr;
  std::map<std::string, Expr> dt_override;
  // Optional lower-triangle entries, checked against a12 / b12 for symmetry.
  std::map<std::string, Expr> transpose;

  static CoefficientSet defaults(int dim);
  const Expr& get(const std::string& key) const;
  void set(const std::string& key, const Expr& e);
  void set(const std::string& key, const std::string& text) { set(key, Expr::parse(text)); }
  // Time derivative: explicit override if given, otherwise symbolic.
  Expr dt(const std::string& key) const;
  // Copy with every coefficient replaced by its time derivative.
  CoefficientSet time_derivative() const;
};

struct SampledCoefficients {
  GridPtr grid;
  std::array<std::vector<double>, kNodalCoefs> c;  // each nt * nodes, level-major
  std::vector<double> p, q;                       // each nt * boundary entries

  SampledCoefficients() = default;
  explicit SampledCoefficients(GridPtr g);  // all zero
  double at(Coef k, int node, int level) const { return c[k][static_cast<size_t>(level) * grid->nodes() + node]; }
  double& at(Coef k, int node, int level) { return c[k][static_cast<size_t>(level) * grid->nodes() + node]; }
  const double* level(Coef k, int n) const { return c[k].data() + static_cast<size_t>(n) * grid->nodes(); }
  double p_at(int e, int n) const { return p[static_cast<size_t>(n) * grid->boundary_size() + e]; }
  double q_at(int e, int n) const { return q[static_cast<size_t>(n) * grid->boundary_size() + e]; }
  double& p_at(int e, int n) { return p[static_cast<size_t>(n) * grid->boundary_size() + e]; }
  double& q_at(int e, int n) { return q[static_cast<size_t>(n) * grid->boundary_size() + e]; }
  bool coupling_zero() const;  // c0 and all k are identically zero
};

SampledCoefficients sample(const CoefficientSet& cs, const GridPtr& g);
SampledCoefficients sample_time_derivative(const CoefficientSet& cs, const GridPtr& g);

struct CoefficientReport {
  double chi_a = 0.0;  // smallest eigenvalue of [a_ij] over nodes
  double chi_b = 0.0;
  double chi = 0.0;
  double max_asymmetry = 0.0;
  double M = 0.0;   // max |coefficient|
  double M0 = 0.0;  // max |time derivative of a coefficient|
};

// Throws ConfigError on asymmetry or loss of ellipticity.
CoefficientReport validate(const CoefficientSet& cs, const GridPtr& g);
// Report on already-sampled data (no symmetry information).
CoefficientReport validate(const SampledCoefficients& sc);

}  // namespace mfglab
