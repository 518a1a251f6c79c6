#pragma once

#include "mfglab/coefficients.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/weights.hpp"

namespace mfglab {

// Conjugation of the forward principal operator Lw = d_t w - sum a_ij d_i d_j w by the
// Carleman weight, P w = e^{s alpha} L(e^{-s alpha} w). Only a_ij of the coefficient
// set is used. Values on the first and last time level are set to 0 (weight limit).
struct ConjugateResult {
  ScalarField direct;   // term-by-term expansion with discrete derivatives of w
  ScalarField numeric;  // stencil applied to e^{-s alpha} w, rescaled in log space
};

ConjugateResult conjugate_P(const ScalarField& w, const CarlemanWeights& wt, const SampledCoefficients& c);

struct SplitResult {
  ScalarField L1, L2, H;
};

// source is the right-hand side of the principal equation satisfied by u = e^{-s alpha} w.
SplitResult decompose_L1_L2(const ScalarField& w, const ScalarField& source, const CarlemanWeights& wt,
                            const SampledCoefficients& c);

// Plain principal operator d_t w - sum a_ij d_i d_j w.
ScalarField principal_operator(const ScalarField& w, const SampledCoefficients& c);

// alpha sampled on the grid (-inf on the end levels).
ScalarField sample_alpha(const CarlemanWeights& wt);

}  // namespace mfglab
