#include "mfglab/grid.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "mfglab/errors.hpp"

namespace mfglab {

const char* side_name(Side s) {
  switch (s) {
    case Side::X0: return "x0";
    case Side::X1: return "x1";
    case Side::Y0: return "y0";
    case Side::Y1: return "y1";
  }
  return "?";
}

Side parse_side(const std::string& name) {
  if (name == "x0") return Side::X0;
  if (name == "x1") return Side::X1;
  if (name == "y0") return Side::Y0;
  if (name == "y1") return Side::Y1;
  throw ConfigError(fmt::format("unknown boundary side '{}' (expected x0, x1, y0, y1)", name));
}

GridPtr SpaceTimeGrid::build(const std::vector<double>& extents, const std::vector<int>& counts, double T,
                             int nt) {
  if (extents.empty() || extents.size() > 2 || counts.size() != extents.size())
    throw ConfigError("grid: need one extent and one node count per axis (1 or 2 axes)");
  for (double e : extents)
    if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("grid: extents must be positive");
  for (int c : counts)
    if (c < 3) throw ConfigError(fmt::format("grid: node count {} < 3", c));
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("grid: T must be positive");
  if (nt < 3) throw ConfigError(fmt::format("grid: time level count {} < 3", nt));

  std::shared_ptr<SpaceTimeGrid> g(new SpaceTimeGrid());
  g->dim_ = static_cast<int>(extents.size());
  g->nx_ = counts[0];
  g->lx_ = extents[0];
  g->hx_ = g->lx_ / (g->nx_ - 1);
  if (g->dim_ == 2) {
    g->ny_ = counts[1];
    g->ly_ = extents[1];
    g->hy_ = g->ly_ / (g->ny_ - 1);
  } else {
    g->ny_ = 1;
    g->ly_ = 0.0;
    g->hy_ = 1.0;
  }
  g->T_ = T;
  g->nt_ = nt;
  g->tau_ = T / (nt - 1);

  auto add = [&](int node, Side side, double nx, double ny, double w, double sigma, int pos) {
    BoundaryEntry e;
    e.node = node;
    e.side = side;
    e.normal = {nx, ny};
    e.arc_weight = w;
    e.sigma = sigma;
    e.pos = pos;
    g->side_entries_[static_cast<int>(side)].push_back(static_cast<int>(g->boundary_.size()));
    g->boundary_.push_back(e);
  };
  if (g->dim_ == 1) {
    add(0, Side::X0, -1.0, 0.0, 1.0, 0.0, 0);
    add(g->nx_ - 1, Side::X1, 1.0, 0.0, 1.0, 0.0, 0);
  } else {
    const int nx = g->nx_, ny = g->ny_;
    for (int j = 0; j < ny; ++j) {
      double w = (j == 0 || j == ny - 1) ? 0.5 * g->hy_ : g->hy_;
      add(g->node(0, j), Side::X0, -1.0, 0.0, w, j * g->hy_, j);
    }
    for (int j = 0; j < ny; ++j) {
      double w = (j == 0 || j == ny - 1) ? 0.5 * g->hy_ : g->hy_;
      add(g->node(nx - 1, j), Side::X1, 1.0, 0.0, w, j * g->hy_, j);
    }
    for (int i = 0; i < nx; ++i) {
      double w = (i == 0 || i == nx - 1) ? 0.5 * g->hx_ : g->hx_;
      add(g->node(i, 0), Side::Y0, 0.0, -1.0, w, i * g->hx_, i);
    }
    for (int i = 0; i < nx; ++i) {
      double w = (i == 0 || i == nx - 1) ? 0.5 * g->hx_ : g->hx_;
      add(g->node(i, ny - 1), Side::Y1, 0.0, 1.0, w, i * g->hx_, i);
    }
  }
  g->entries_at_.assign(g->nodes(), {});
  for (int e = 0; e < g->boundary_size(); ++e) g->entries_at_[g->boundary_[e].node].push_back(e);

  g->space_weights_.assign(g->nodes(), 0.0);
  for (int k = 0; k < g->nodes(); ++k) {
    int i = g->ix(k), j = g->jy(k);
    double wx = (i == 0 || i == g->nx_ - 1) ? 0.5 * g->hx_ : g->hx_;
    double wy = 1.0;
    if (g->dim_ == 2) wy = (j == 0 || j == g->ny_ - 1) ? 0.5 * g->hy_ : g->hy_;
    g->space_weights_[k] = wx * wy;
  }
  return g;
}

bool SpaceTimeGrid::on_boundary(int k) const { return !entries_at_[k].empty(); }

std::vector<Side> SpaceTimeGrid::sides() const {
  if (dim_ == 1) return {Side::X0, Side::X1};
  return {Side::X0, Side::X1, Side::Y0, Side::Y1};
}

double SpaceTimeGrid::side_length(Side s) const {
  if (dim_ == 1) return 1.0;
  return (s == Side::X0 || s == Side::X1) ? ly_ : lx_;
}

std::vector<double> SpaceTimeGrid::time_weights(int l0, int l1) const {
  std::vector<double> w(nt_, 0.0);
  if (l1 == l0) {
    return w;
  }
  for (int n = l0; n <= l1; ++n) w[n] = (n == l0 || n == l1) ? 0.5 * tau_ : tau_;
  return w;
}

double SpaceTimeGrid::boundary_measure() const {
  if (dim_ == 1) return 2.0;
  return 2.0 * (lx_ + ly_);
}

BoundaryPartition::BoundaryPartition(GridPtr grid, const std::vector<Side>& observed) : grid_(std::move(grid)) {
  for (Side s : observed) {
    if (grid_->dim() == 1 && (s == Side::Y0 || s == Side::Y1))
      throw ConfigError(fmt::format("side '{}' does not exist on a 1D grid", side_name(s)));
    observed_[static_cast<int>(s)] = true;
  }
  if (observed_sides().empty()) throw ConfigError("observed boundary part must be non-empty");
}

bool BoundaryPartition::entry_observed(int e) const { return side_observed(grid_->boundary()[e].side); }

bool BoundaryPartition::in_segment(int e, Segment seg) const {
  switch (seg) {
    case Segment::All: return true;
    case Segment::Observed: return entry_observed(e);
    case Segment::Unobserved: return !entry_observed(e);
  }
  return false;
}

bool BoundaryPartition::node_observed(int k) const {
  for (int e : grid_->entries_at(k))
    if (entry_observed(e)) return true;
  return false;
}

std::vector<Side> BoundaryPartition::observed_sides() const {
  std::vector<Side> out;
  for (int s = 0; s < 4; ++s)
    if (observed_[s]) out.push_back(static_cast<Side>(s));
  return out;
}

ScalarField::ScalarField(GridPtr g, double fill) : grid(std::move(g)) {
  v.assign(static_cast<size_t>(grid->nodes()) * grid->nt(), fill);
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
  return *this;
}
ScalarField& ScalarField::operator-=(const ScalarField& o) {
  for (size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
  return *this;
}
ScalarField& ScalarField::operator*=(double c) {
  for (double& x : v) x *= c;
  return *this;
}
ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double c, ScalarField a) { return a *= c; }

BoundaryTrace::BoundaryTrace(GridPtr g, double fill) : grid(std::move(g)) {
  v.assign(static_cast<size_t>(grid->boundary_size()) * grid->nt(), fill);
}
BoundaryTrace& BoundaryTrace::operator+=(const BoundaryTrace& o) {
  for (size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
  return *this;
}
BoundaryTrace& BoundaryTrace::operator-=(const BoundaryTrace& o) {
  for (size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
  return *this;
}
BoundaryTrace& BoundaryTrace::operator*=(double c) {
  for (double& x : v) x *= c;
  return *this;
}
BoundaryTrace operator-(BoundaryTrace a, const BoundaryTrace& b) { return a -= b; }
BoundaryTrace operator*(double c, BoundaryTrace a) { return a *= c; }

BoundaryTrace trace_of(const ScalarField& f) {
  BoundaryTrace out(f.grid);
  const auto& b = f.grid->boundary();
  for (int n = 0; n < f.grid->nt(); ++n)
    for (int e = 0; e < static_cast<int>(b.size()); ++e) out.at(e, n) = f.at(b[e].node, n);
  return out;
}

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw InvariantViolation(fmt::format("{}: non-finite value", what));
}

double integrate_space(const SpaceTimeGrid& g, const double* values) {
  const auto& w = g.space_weights();
  double acc = 0.0;
  for (int k = 0; k < g.nodes(); ++k) acc += w[k] * values[k];
  return acc;
}

double integrate_interior(const ScalarField& f, int l0, int l1) {
  require_finite(f.v, "integrate_interior");
  const auto& g = *f.grid;
  if (l1 < 0) l1 = g.nt() - 1;
  auto tw = g.time_weights(l0, l1);
  double acc = 0.0;
  for (int n = l0; n <= l1; ++n) acc += tw[n] * integrate_space(g, f.level(n));
  return acc;
}

double integrate_boundary(const BoundaryTrace& f, const BoundaryPartition& part, Segment seg, int l0, int l1) {
  require_finite(f.v, "integrate_boundary");
  const auto& g = *f.grid;
  if (l1 < 0) l1 = g.nt() - 1;
  bool any = false;
  for (int e = 0; e < g.boundary_size(); ++e) any = any || part.in_segment(e, seg);
  if (!any) throw ConfigError("integrate_boundary: selected boundary segment has no nodes");
  auto tw = g.time_weights(l0, l1);
  const auto& b = g.boundary();
  double acc = 0.0;
  for (int n = l0; n <= l1; ++n) {
    double s = 0.0;
    for (int e = 0; e < g.boundary_size(); ++e)
      if (part.in_segment(e, seg)) s += b[e].arc_weight * f.at(e, n);
    acc += tw[n] * s;
  }
  return acc;
}

void write_field_csv(const std::string& path, const ScalarField& f, const std::string& provenance) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  const auto& g = *f.grid;
  os << "# " << provenance << "\n";
  os << (g.dim() == 2 ? "x,y,t,value\n" : "x,t,value\n");
  for (int n = 0; n < g.nt(); ++n)
    for (int k = 0; k < g.nodes(); ++k) {
      if (g.dim() == 2)
        os << fmt::format("{:.10g},{:.10g},{:.10g},{:.17g}\n", g.x(k), g.y(k), g.t(n), f.at(k, n));
      else
        os << fmt::format("{:.10g},{:.10g},{:.17g}\n", g.x(k), g.t(n), f.at(k, n));
    }
}

void write_trace_csv(const std::string& path, const BoundaryTrace& f, const std::string& provenance) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  const auto& g = *f.grid;
  os << "# " << provenance << "\n";
  os << (g.dim() == 2 ? "side,x,y,t,value\n" : "side,x,t,value\n");
  const auto& b = g.boundary();
  for (int n = 0; n < g.nt(); ++n)
    for (int e = 0; e < g.boundary_size(); ++e) {
      int k = b[e].node;
      if (g.dim() == 2)
        os << fmt::format("{},{:.10g},{:.10g},{:.10g},{:.17g}\n", side_name(b[e].side), g.x(k), g.y(k), g.t(n),
                          f.at(e, n));
      else
        os << fmt::format("{},{:.10g},{:.10g},{:.17g}\n", side_name(b[e].side), g.x(k), g.t(n), f.at(e, n));
    }
}

}  // namespace mfglab
