#pragma once

#include <map>
#include <string>
#include <vector>

#include "mfglab/nonlinear.hpp"
#include "mfglab/solver.hpp"

namespace mfglab {

struct EpsEntry {
  double eps = 0.0;
  double lhs_u = 0.0, lhs_v = 0.0;  // H^{2,1} norms over Omega x (eps, T - eps)
  double lhs = 0.0;
  double ratio = 0.0;
};

struct StateReport {
  std::string mode;  // "linear" or "nonlinear"
  std::vector<EpsEntry> eps;
  std::map<std::string, double> rhs_terms;
  double rhs = 0.0;
  bool eps_monotone = true;  // lhs non-increasing as eps grows

  // nonlinear mode
  double M1 = 0.0;                 // admitted bound
  std::vector<double> M1_observed;  // per experiment: ||u||_{W2,inf} + ||v||_{W1,inf}, sup over t
  bool in_hypothesis = true;
  double M2 = 0.0;                       // bound on the coefficients of the difference system
  std::vector<double> residuals;         // nonlinear residuals of both experiments
  double linear_ratio = 0.0;             // same difference data through the kappa = 0 system (first eps)
};

// Theorem-1 data norm of a difference (dF, dG, du, dv, dg, dh): L2(Q) sources, H1 traces on
// Gamma x (0, T), d_t g / d_t h on the unobserved part, L2(0, T; H^{1/2}) of g / h.
std::map<std::string, double> linear_data_terms(const BoundaryPartition& part, const SystemData& d, const ScalarField& u,
                                                const ScalarField& v);

// The difference of two linear experiments solves the system with differenced data; it is
// computed directly from that system.
StateReport state_linear(const SampledCoefficients& c, const BoundaryPartition& part, const SystemData& d1,
                         const SystemData& d2, const std::vector<double>& eps, const SolveOptions& opts);

StateReport state_nonlinear(const NonlinearCoefficients& nc, const BoundaryPartition& part, const NonlinearData& d1,
                            const NonlinearData& d2, const std::vector<double>& eps, double M1,
                            const SolveOptions& opts);

}  // namespace mfglab
