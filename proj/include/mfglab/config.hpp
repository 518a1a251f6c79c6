#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfglab/coefficients.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/solver.hpp"

namespace mfglab {

enum class ExperimentKind { Solve, Manufacture, EstimateSweep, InverseSource, StateDetermination, WeightCheck,
                            OperatorIdentity };

const char* kind_name(ExperimentKind k);
ExperimentKind parse_kind(const std::string& s);

// Validated configuration with every default materialized. Sections stay in JSON form and
// are read through the typed helpers below.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Solve;
  std::uint64_t seed = 0;
  nlohmann::json doc;  // full materialized document (what gets echoed and hashed)
  std::string source_path;

  const nlohmann::json& section(const std::string& key) const { return doc.at(key); }
  std::string hash() const;  // 16 hex digits of FNV-1a over the canonical dump
};

// Reads YAML (a JSON document is valid YAML too). Throws ConfigError listing unknown keys or
// naming the missing required keys of the experiment kind.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

// FNV-1a, 64 bit.
std::uint64_t fnv1a(const std::string& bytes);

// Typed readers. Expressions may be written as numbers or strings.
Expr expr_at(const nlohmann::json& j, const std::string& key);
GridPtr build_grid(const nlohmann::json& grid);
CoefficientSet build_coefficients(const ExperimentConfig& c, int dim);
BoundaryPartition build_partition(const ExperimentConfig& c, const GridPtr& g);
SolveOptions build_solve_options(const ExperimentConfig& c);
// Robin data: one expression for every side, or a map side -> expression (missing sides 0).
std::array<Expr, 4> side_exprs(const nlohmann::json& j);
// F, G, g, h, uT, v0 sampled on the grid.
SystemData build_data(const nlohmann::json& data, const GridPtr& g);

}  // namespace mfglab
