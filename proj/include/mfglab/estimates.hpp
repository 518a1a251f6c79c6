#pragma once

#include <map>
#include <string>
#include <vector>

#include "mfglab/coefficients.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/operators.hpp"
#include "mfglab/weights.hpp"

namespace mfglab {

enum class EstimateKind { Lemma1, Lemma2, Lemma4, Theorem3, Prop1, Lemma5, Lemma6 };

const char* estimate_name(EstimateKind k);
EstimateKind parse_estimate(const std::string& name);

// Fields and data entering an estimate. Empty optional fields (no grid) are replaced by
// second-order time differences of the corresponding field.
struct EstimateInput {
  BoundaryPartition part;
  SampledCoefficients coef;
  SampledCoefficients dcoef;  // time derivatives of the coefficients (Prop1 only)
  Which which = Which::A;     // single-equation estimates: A -> d_t u + A u = F, B -> d_t u - B u = F
  ScalarField u, v, F, G;
  BoundaryTrace g, h;
  ScalarField ut, vt, Ft, Gt;  // optional
  BoundaryTrace gt, ht;        // optional
  double m = 0.0;              // exponent of the scaled estimate
  double r = 0.0;              // exponent of the trace inequality
  double residual_tol = 5e-2;  // relative equation residual accepted as "u satisfies the system"
};

struct EstimateTerm {
  std::string name;
  bool lhs = true;
  bool weighted = true;  // weighted values are normalized by e^{-2 s alpha_max}
  double value = 0.0;
};

struct EstimateRecord {
  double s = 0.0;
  double log_scale = 0.0;  // 2 s alpha_max
  std::vector<EstimateTerm> terms;
  double log_lhs = 0.0;  // natural logs of the true (unnormalized) totals
  double log_rhs = 0.0;
  bool ratio_defined = false;
  double ratio = 0.0;
  double log_ratio = 0.0;  // log_lhs - log_rhs, usable where ratio underflows
  std::map<std::string, double> diagnostics;
};

// Relative residuals of the equations the estimate presupposes; throws InvariantViolation
// when any exceeds in.residual_tol.
std::map<std::string, double> check_estimate_input(EstimateKind kind, const EstimateInput& in);

// One evaluation at the s carried by w.
EstimateRecord evaluate_estimate(EstimateKind kind, const EstimateInput& in, const CarlemanWeights& w);

}  // namespace mfglab
