#pragma once

#include <utility>

#include "mfglab/grid.hpp"

namespace mfglab {

// Levels covering [eps, T - eps]; throws ConfigError if fewer than 3 levels remain.
std::pair<int, int> interior_levels(const SpaceTimeGrid& g, double eps);
// Levels covering the closed window [t0, t1].
std::pair<int, int> window_levels(const SpaceTimeGrid& g, double t0, double t1);

// L2 norm over Omega x [t_l0, t_l1].
double norm_L2(const ScalarField& f, int l0 = 0, int l1 = -1);

// (sum_{|gamma| <= 2} ||d^gamma f||^2 + ||d_t f||^2)^{1/2} over Omega x [eps, T - eps].
double norm_H21(const ScalarField& f, double eps = 0.0);

// H^2(Omega) norm of one time level.
double norm_H2_level(const ScalarField& f, int level);

// H^{1/2}(boundary) norm of one level of a trace (values per boundary entry).
// 1D: the boundary is two points and the norm is the Euclidean one. 2D: L2 part plus the
// Slobodecki seminorm double sum over entry pairs at distinct points.
double norm_H12_boundary(const SpaceTimeGrid& g, const double* trace);
double seminorm_H12_boundary(const SpaceTimeGrid& g, const double* trace);

// L2(t_l0, t_l1; H^{1/2}(boundary)).
double norm_L2_H12(const BoundaryTrace& f, int l0 = 0, int l1 = -1);
// H^1(t_l0, t_l1; L2(segment)).
double norm_H1_L2(const BoundaryTrace& f, const BoundaryPartition& part, Segment seg, int l0 = 0, int l1 = -1);

// ||g||_* = H^1(L2(unobserved part)) + L2(H^{1/2}(whole boundary)).
double norm_star(const BoundaryTrace& g, const BoundaryPartition& part, int l0 = 0, int l1 = -1);
// Same without the H^{1/2} part (first term only).
double norm_star_h1_part(const BoundaryTrace& g, const BoundaryPartition& part, int l0 = 0, int l1 = -1);

// H^1(Gamma x window) of the restriction of u: value, time derivative and tangential derivative.
double norm_H1_gamma(const ScalarField& u, const BoundaryPartition& part, int l0 = 0, int l1 = -1);

}  // namespace mfglab
