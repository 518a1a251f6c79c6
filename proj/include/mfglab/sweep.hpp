#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfglab/estimates.hpp"

namespace mfglab {

struct EstimateReport {
  EstimateKind kind = EstimateKind::Lemma1;
  double m = 0.0;
  double r = 0.0;
  double lambda = 1.0;
  std::vector<double> s_grid;
  std::vector<EstimateRecord> records;  // sorted by s
  std::map<std::string, double> input_residuals;
  bool any_defined = false;
  double C_emp = 0.0;      // max ratio over defined records
  double log_C_emp = 0.0;  // max log ratio (finite even when C_emp underflows)
  double s0 = 0.0;         // first sweep point after which the ratio is non-increasing
  bool tail_nonincreasing = true;  // over the top half of the sweep
  bool violation = false;          // ratio grows > 5% per doubling over the top half

  std::string label() const;  // e.g. "lemma2(m=-1)"
};

// s_grid must be geometric with at least 4 points. Evaluations run on `workers` threads.
EstimateReport sweep_s(EstimateKind kind, const EstimateInput& in, const CarlemanWeights& base,
                       const std::vector<double>& s_grid, int workers = 1);

// Relative change of C_emp between two reports, computed from the log constants.
double c_emp_drift(const EstimateReport& coarse, const EstimateReport& fine);

nlohmann::json to_json(const EstimateReport& rep);
// One row per (s, term): estimate,s,side,term,weighted,value,log_scale,ratio
void write_csv(const EstimateReport& rep, std::ostream& os, bool header = true);

}  // namespace mfglab
