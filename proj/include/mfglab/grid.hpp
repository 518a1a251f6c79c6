#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace mfglab {

enum class Side { X0 = 0, X1 = 1, Y0 = 2, Y1 = 3 };
enum class Segment { Observed, Unobserved, All };

const char* side_name(Side s);
Side parse_side(const std::string& name);

// One (node, side) pair on the boundary. Corner nodes of a rectangle appear once per side.
struct BoundaryEntry {
  int node = 0;
  Side side = Side::X0;
  std::array<double, 2> normal{0.0, 0.0};
  double arc_weight = 1.0;  // trapezoid weight along the side (1 in 1D)
  double sigma = 0.0;       // arc-length position along the side
  int pos = 0;              // index along the side
};

class SpaceTimeGrid;
using GridPtr = std::shared_ptr<const SpaceTimeGrid>;

class SpaceTimeGrid {
 public:
  // extents/counts have one entry per spatial axis.
  static GridPtr build(const std::vector<double>& extents, const std::vector<int>& counts, double T, int nt);

  int dim() const { return dim_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nt() const { return nt_; }
  int nodes() const { return nx_ * ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double T() const { return T_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double tau() const { return tau_; }

  int node(int i, int j = 0) const { return i + nx_ * j; }
  int ix(int k) const { return k % nx_; }
  int jy(int k) const { return k / nx_; }
  double x(int k) const { return ix(k) * hx_; }
  double y(int k) const { return dim_ == 2 ? jy(k) * hy_ : 0.0; }
  double t(int n) const { return n * tau_; }
  bool on_boundary(int k) const;

  const std::vector<BoundaryEntry>& boundary() const { return boundary_; }
  int boundary_size() const { return static_cast<int>(boundary_.size()); }
  std::vector<Side> sides() const;
  // Entry indices belonging to one side, ordered by position.
  const std::vector<int>& side_entries(Side s) const { return side_entries_[static_cast<int>(s)]; }
  double side_length(Side s) const;
  // Entry indices touching node k (two at 2D corners).
  const std::vector<int>& entries_at(int k) const { return entries_at_[k]; }

  // Trapezoid weights over Omega and over [t_l0, t_l1].
  const std::vector<double>& space_weights() const { return space_weights_; }
  std::vector<double> time_weights(int l0, int l1) const;
  double measure() const { return dim_ == 2 ? lx_ * ly_ : lx_; }
  double boundary_measure() const;

 private:
  SpaceTimeGrid() = default;
  int dim_ = 1, nx_ = 0, ny_ = 1, nt_ = 0;
  double lx_ = 0, ly_ = 0, T_ = 0, hx_ = 0, hy_ = 0, tau_ = 0;
  std::vector<BoundaryEntry> boundary_;
  std::array<std::vector<int>, 4> side_entries_;
  std::vector<std::vector<int>> entries_at_;
  std::vector<double> space_weights_;
};

class BoundaryPartition {
 public:
  BoundaryPartition() = default;
  BoundaryPartition(GridPtr grid, const std::vector<Side>& observed);

  const GridPtr& grid() const { return grid_; }
  bool side_observed(Side s) const { return observed_[static_cast<int>(s)]; }
  bool entry_observed(int e) const;
  bool in_segment(int e, Segment seg) const;
  // A node is observed if any side through it is observed.
  bool node_observed(int k) const;
  std::vector<Side> observed_sides() const;

 private:
  GridPtr grid_;
  std::array<bool, 4> observed_{false, false, false, false};
};

// Values on nodes x levels, stored level-major: v[level * nodes + node].
struct ScalarField {
  GridPtr grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(GridPtr g, double fill = 0.0);
  double& at(int node, int level) { return v[static_cast<size_t>(level) * stride() + node]; }
  double at(int node, int level) const { return v[static_cast<size_t>(level) * stride() + node]; }
  double* level(int n) { return v.data() + static_cast<size_t>(n) * stride(); }
  const double* level(int n) const { return v.data() + static_cast<size_t>(n) * stride(); }
  int stride() const { return grid->nodes(); }
  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double c);
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double c, ScalarField a);

// Values on boundary entries x levels: v[level * boundary_size + entry].
struct BoundaryTrace {
  GridPtr grid;
  std::vector<double> v;

  BoundaryTrace() = default;
  explicit BoundaryTrace(GridPtr g, double fill = 0.0);
  double& at(int entry, int level) { return v[static_cast<size_t>(level) * stride() + entry]; }
  double at(int entry, int level) const { return v[static_cast<size_t>(level) * stride() + entry]; }
  int stride() const { return grid->boundary_size(); }
  BoundaryTrace& operator+=(const BoundaryTrace& o);
  BoundaryTrace& operator-=(const BoundaryTrace& o);
  BoundaryTrace& operator*=(double c);
};

BoundaryTrace operator-(BoundaryTrace a, const BoundaryTrace& b);
BoundaryTrace operator*(double c, BoundaryTrace a);

// Restriction of a field to the boundary entries.
BoundaryTrace trace_of(const ScalarField& f);

// Trapezoid quadrature over Omega x [t_l0, t_l1] (defaults to all of Q).
double integrate_interior(const ScalarField& f, int l0 = 0, int l1 = -1);
// Trapezoid quadrature of a single level over Omega.
double integrate_space(const SpaceTimeGrid& g, const double* values);
// Time trapezoid times arc-length trapezoid on the selected part of the boundary.
double integrate_boundary(const BoundaryTrace& f, const BoundaryPartition& part, Segment seg, int l0 = 0,
                          int l1 = -1);

void require_finite(const std::vector<double>& v, const char* what);

// CSV with one leading "# ..." provenance line and header x[,y],t,value.
void write_field_csv(const std::string& path, const ScalarField& f, const std::string& provenance);
void write_trace_csv(const std::string& path, const BoundaryTrace& f, const std::string& provenance);

}  // namespace mfglab
