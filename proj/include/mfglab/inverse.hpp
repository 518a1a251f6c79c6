#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfglab/coefficients.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/solver.hpp"

namespace mfglab {

// Snapshot level (nearest to the requested t0) and observation window I = [t(l0), t(l1)]
// (levels l0 < level < l1).
struct ObservationWindow {
  int level = 0;
  int l0 = 0, l1 = 0;
};

ObservationWindow make_window(const SpaceTimeGrid& g, double t0, double t_begin, double t_end);

// Sources F = q1 f1, G = q2 f2 with known q1, q2 added to fixed data.
struct SourceProblem {
  GridPtr grid;
  BoundaryPartition part;
  SampledCoefficients coef;
  ScalarField q1, q2;
  SystemData base;  // fixed F, G, g, h, uT, v0
  ObservationWindow win;
  SolveOptions opts;
  double q_min = 1e-3;
};

// Throws InvariantViolation naming the first node where |q_i(x, t0)| < q_min.
void check_positivity(const SourceProblem& p);

struct SourcePair {
  std::vector<double> f1, f2;  // nodal values
};

SourcePair zero_sources(const SpaceTimeGrid& g);
std::vector<double> stack(const SourcePair& f);
SourcePair unstack(const std::vector<double>& x, int nodes);
// sqrt(||f1||^2 + ||f2||^2) with the trapezoid rule.
double source_norm(const SpaceTimeGrid& g, const SourcePair& f);

// f1 = [d_t u + A u - c0 v] / q1, f2 = [d_t v - B v - A0 u] / q2 at the snapshot level, with the
// fixed parts of F and G subtracted. Time derivatives are fourth-order centered differences
// unless given.
SourcePair direct_source_formula(const SourceProblem& p, const ScalarField& u, const ScalarField& v,
                                 const std::vector<double>* ut = nullptr, const std::vector<double>* vt = nullptr);

// Measured channels.
struct ObservationBundle {
  std::vector<double> u_gamma, v_gamma;  // (level - l0) * observed entries + i
  std::vector<double> u_snap, v_snap;    // nodes at the snapshot level
  BoundaryTrace g, h;                    // Robin data (known)
};

// Observed entries, side by side in position order.
std::vector<int> observed_entries(const BoundaryPartition& part);

ObservationBundle observe(const SourceProblem& p, const ScalarField& u, const ScalarField& v, const SystemData& d);
SystemData source_data(const SourceProblem& p, const SourcePair& f);
ObservationBundle simulate(const SourceProblem& p, const LinearizedSolver& solver, const SourcePair& f);

// Data-side norms: H1(Gamma x I) of u, v, d_t u, d_t v, H2 snapshots, starred norms of
// g, h, d_t g, d_t h over I.
struct DataNorms {
  double u_gamma = 0, v_gamma = 0, ut_gamma = 0, vt_gamma = 0;
  double u_snap = 0, v_snap = 0;
  double g_star = 0, h_star = 0, gt_star = 0, ht_star = 0;
  double total(bool with_star) const;
};

// Feature vector whose block norms are the measurement norms of DataNorms (star terms excluded).
std::vector<double> features(const SourceProblem& p, const ObservationBundle& b);
DataNorms data_norms(const SourceProblem& p, const ObservationBundle& b);

// Sources at boundary nodes never enter the scheme (those rows carry the Robin condition), so
// the unknowns are the interior nodal values of f1 and f2; boundary values are filled by
// linear extrapolation along the axes.
struct ForwardMap {
  Eigen::MatrixXd M;         // features x (2 * interior nodes)
  Eigen::VectorXd offset;    // features of the f = 0 experiment
  Eigen::VectorXd mass;      // trapezoid weights of the unknowns
  std::vector<int> unknowns;  // interior node indices
  GridPtr grid;
};

std::vector<int> interior_nodes(const SpaceTimeGrid& g);
SourcePair expand_sources(const SpaceTimeGrid& g, const std::vector<int>& unknowns, const Eigen::VectorXd& x);

// One coupled solve per interior nodal basis function and per source; columns in parallel.
ForwardMap assemble_forward_map(const SourceProblem& p, const LinearizedSolver& solver, int workers = 1);

struct Reconstruction {
  SourcePair f;
  double beta = 0.0;
  double residual = 0.0;   // || M x + offset - y ||
  double solution = 0.0;   // sqrt(x' W x)
  double condition = 0.0;  // of the normal matrix
};

// min || M x + offset - y ||^2 + beta x' W x. beta = 0 with a singular normal matrix throws.
Reconstruction reconstruct_tikhonov(const ForwardMap& fm, const Eigen::VectorXd& y, double beta);

// Objective and gradient of the Tikhonov functional through the assembled map.
double tikhonov_objective(const ForwardMap& fm, const Eigen::VectorXd& y, double beta, const Eigen::VectorXd& x);
Eigen::VectorXd tikhonov_gradient(const ForwardMap& fm, const Eigen::VectorXd& y, double beta,
                                  const Eigen::VectorXd& x);

struct GradientCheck {
  std::vector<double> rel_errors;
  double max_rel_error = 0.0;
};

// Central differences of the objective evaluated with fresh forward solves, against the
// assembled gradient, along `directions` random unit directions.
GradientCheck gradient_check(const SourceProblem& p, const LinearizedSolver& solver, const ForwardMap& fm,
                             const Eigen::VectorXd& y, double beta, int directions, std::uint64_t seed);

struct LCurve {
  std::vector<double> beta, residual, solution;
  int corner = 0;
};

// 12-point geometric grid between beta_min and beta_max; corner of maximum curvature.
LCurve l_curve(const ForwardMap& fm, const Eigen::VectorXd& y, double beta_min = 1e-12, double beta_max = 1e-1,
               int points = 12);

// Deterministic uniform draws in [-1, 1).
class UniformNoise {
 public:
  explicit UniformNoise(std::uint64_t seed);
  double next();

 private:
  std::uint64_t state_;
};

// Adds amp * max|channel| * U(-1, 1) to the measured channels (u, v traces and snapshots).
void add_noise(ObservationBundle& b, double amp, UniformNoise& rng);

struct LipschitzTrial {
  double D = 0.0, E = 0.0, ratio = 0.0;
  bool used = false;  // 0/0 trials are excluded
};

struct LipschitzReport {
  std::string mode;  // "pairs" or "noise"
  std::vector<LipschitzTrial> trials;
  std::vector<double> amplitudes;   // noise mode
  std::vector<double> mean_errors;  // noise mode: mean relative L2 error per amplitude
  double slope = 0.0, slope_residual = 0.0;
  double C_emp = 0.0;
  double C_emp_homogeneous = 0.0;  // pairs mode: trials with g = h = 0, star norms dropped
  std::vector<LipschitzTrial> homogeneous_trials;
  bool monotone = true;             // noise mode: E non-decreasing in amplitude
  double beta = 0.0;
};

// Random pairs of experiments differing in sources (and, for the full trials, in Robin data).
// Each difference is scaled by 10^U(-2, 1) so D spans several decades.
LipschitzReport lipschitz_pairs(const SourceProblem& p, const LinearizedSolver& solver, int trials, std::uint64_t seed);

// Reconstructions from noisy observations of a fixed experiment; E is the relative L2 error,
// averaged over `repeats` draws per amplitude.
LipschitzReport lipschitz_noise(const SourceProblem& p, const LinearizedSolver& solver, const ForwardMap& fm,
                                const SourcePair& truth, const std::vector<double>& amplitudes, double beta,
                                int repeats, std::uint64_t seed);

// Least-squares slope of log y against log x and the RMS residual of the fit.
std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mfglab
