#include "mfglab/sweep.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "mfglab/errors.hpp"
#include "mfglab/parallel.hpp"

namespace mfglab {

namespace {

void check_grid(const std::vector<double>& s) {
  if (s.size() < 4) throw ConfigError(fmt::format("s-grid needs at least 4 points, got {}", s.size()));
  if (!(s[0] > 0.0)) throw ConfigError("s-grid must be positive");
  const double q = s[1] / s[0];
  if (!(q > 1.0)) throw ConfigError("s-grid must be increasing");
  for (size_t i = 1; i < s.size(); ++i)
    if (std::fabs(s[i] / s[i - 1] - q) > 1e-9 * q)
      throw ConfigError(fmt::format("s-grid is not geometric at s = {}", s[i]));
}

// JSON has no representation for inf/nan; they become null.
nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace

std::string EstimateReport::label() const {
  if (kind == EstimateKind::Lemma2) return fmt::format("{}(m={})", estimate_name(kind), m);
  if (kind == EstimateKind::Lemma5) return fmt::format("{}(r={})", estimate_name(kind), r);
  return estimate_name(kind);
}

EstimateReport sweep_s(EstimateKind kind, const EstimateInput& in, const CarlemanWeights& base,
                       const std::vector<double>& s_grid, int workers) {
  check_grid(s_grid);
  EstimateReport rep;
  rep.kind = kind;
  rep.m = in.m;
  rep.r = in.r;
  rep.lambda = base.lambda();
  rep.s_grid = s_grid;
  rep.input_residuals = check_estimate_input(kind, in);

  const int n = static_cast<int>(s_grid.size());
  rep.records.resize(n);
  parallel_for(n, workers, [&](int i) { rep.records[i] = evaluate_estimate(kind, in, base.with_s(s_grid[i])); });

  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : rep.records) {
    if (!r.ratio_defined) continue;
    rep.any_defined = true;
    best = std::max(best, r.log_ratio);
    rep.C_emp = std::max(rep.C_emp, r.ratio);
  }
  rep.log_C_emp = rep.any_defined ? best : 0.0;

  // Log ratios; undefined records count as -inf (0/0 never grows).
  std::vector<double> lr(n);
  for (int i = 0; i < n; ++i)
    lr[i] = rep.records[i].ratio_defined ? rep.records[i].log_ratio : -std::numeric_limits<double>::infinity();
  const double slack = 1e-12;
  int start = n - 1;
  while (start > 0 && !(lr[start] > lr[start - 1] + slack)) --start;
  rep.s0 = s_grid[start];

  const int top = n / 2;
  const double q = s_grid[1] / s_grid[0];
  const double grow = std::log2(q) * std::log(1.05);
  bool all_grow = true;
  for (int i = top; i + 1 < n; ++i) {
    if (lr[i + 1] > lr[i] + slack) rep.tail_nonincreasing = false;
    if (!(lr[i + 1] - lr[i] > grow)) all_grow = false;
  }
  rep.violation = all_grow;
  return rep;
}

double c_emp_drift(const EstimateReport& coarse, const EstimateReport& fine) {
  if (!coarse.any_defined && !fine.any_defined) return 0.0;
  if (!coarse.any_defined || !fine.any_defined) return std::numeric_limits<double>::infinity();
  return std::fabs(std::expm1(fine.log_C_emp - coarse.log_C_emp));
}

nlohmann::json to_json(const EstimateReport& rep) {
  nlohmann::json j;
  j["estimate"] = rep.label();
  j["lambda"] = rep.lambda;
  j["s_range"] = {rep.s_grid.front(), rep.s_grid.back()};
  j["C_emp"] = rep.C_emp;
  j["log_C_emp"] = rep.log_C_emp;
  j["s0"] = rep.s0;
  j["tail_nonincreasing"] = rep.tail_nonincreasing;
  j["violation"] = rep.violation;
  j["input_residuals"] = rep.input_residuals;
  auto& recs = j["records"] = nlohmann::json::array();
  for (const auto& r : rep.records) {
    nlohmann::json jr;
    jr["s"] = r.s;
    jr["log_lhs"] = num(r.log_lhs);
    jr["log_rhs"] = num(r.log_rhs);
    jr["lhs"] = num(std::exp(r.log_lhs));
    jr["rhs"] = num(std::exp(r.log_rhs));
    jr["ratio_defined"] = r.ratio_defined;
    jr["ratio"] = r.ratio;
    jr["log_ratio"] = num(r.log_ratio);
    jr["log_scale"] = r.log_scale;
    auto& terms = jr["terms"] = nlohmann::json::array();
    for (const auto& t : r.terms)
      terms.push_back({{"name", t.name}, {"side", t.lhs ? "lhs" : "rhs"}, {"weighted", t.weighted}, {"value", t.value}});
    if (!r.diagnostics.empty()) {
      nlohmann::json d;
      for (const auto& [k, v] : r.diagnostics) d[k] = num(v);
      jr["diagnostics"] = d;
    }
    recs.push_back(std::move(jr));
  }
  return j;
}

void write_csv(const EstimateReport& rep, std::ostream& os, bool header) {
  if (header) os << "estimate,s,side,term,weighted,value,log_scale,ratio\n";
  const std::string label = rep.label();
  for (const auto& r : rep.records)
    for (const auto& t : r.terms)
      os << fmt::format("\"{}\",{},{},{},{},{:.12e},{:.12e},{:.12e}\n", label, r.s, t.lhs ? "lhs" : "rhs", t.name,
                        t.weighted ? 1 : 0, t.value, t.weighted ? r.log_scale : 0.0, r.ratio);
}

}  // namespace mfglab
