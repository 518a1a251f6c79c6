#include "mfglab/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "mfglab/errors.hpp"
#include "mfglab/manufacture.hpp"

namespace mfglab {

using nlohmann::json;

namespace {

constexpr const char* kKinds[] = {"solve", "manufacture", "estimate-sweep", "inverse-source", "state-determination",
                                  "weight-check", "operator-identity"};

json scalar_to_json(const std::string& s) {
  if (s == "true" || s == "True") return true;
  if (s == "false" || s == "False") return false;
  if (s == "null" || s == "~") return nullptr;
  long long iv = 0;
  auto [p1, e1] = std::from_chars(s.data(), s.data() + s.size(), iv);
  if (e1 == std::errc() && p1 == s.data() + s.size()) return iv;
  double dv = 0.0;
  auto [p2, e2] = std::from_chars(s.data(), s.data() + s.size(), dv);
  if (e2 == std::errc() && p2 == s.data() + s.size()) return dv;
  return s;
}

json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      // Quoted scalars stay strings.
      if (n.Tag() == "!") return n.Scalar();
      return scalar_to_json(n.Scalar());
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& e : n) a.push_back(yaml_to_json(e));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return o;
    }
  }
  return nullptr;
}

json data_defaults() {
  return {{"F", "0"}, {"G", "0"}, {"g", "0"}, {"h", "0"}, {"uT", "0"}, {"v0", "0"}};
}

json ladder_entry() { return {{"counts", json::array()}, {"nt", 0}}; }

json kind_defaults(ExperimentKind k) {
  json d;
  switch (k) {
    case ExperimentKind::Solve:
      d["data"] = data_defaults();
      d["checks"] = {{"max_discrete_residual", 1e-6}};
      break;
    case ExperimentKind::Manufacture:
      d["exact"] = {{"u", nullptr}, {"v", nullptr}};
      d["ladder"] = json::array();
      d["checks"] = {{"min_order", 1.8}, {"max_picard_ratio", 0.5}};
      break;
    case ExperimentKind::EstimateSweep:
      d["exact"] = {{"u", nullptr}, {"v", "0"}};
      d["weights"] = {{"lambda", 1.0}, {"s", {4, 8, 16, 32, 64}}};
      d["estimates"] = json::array({{{"name", "lemma1"}},
                                    {{"name", "lemma2"}, {"m", -1}},
                                    {{"name", "lemma2"}, {"m", 0}},
                                    {{"name", "lemma2"}, {"m", 1}},
                                    {{"name", "lemma4"}},
                                    {{"name", "theorem3"}},
                                    {{"name", "prop1"}},
                                    {{"name", "lemma5"}, {"r", 0}}});
      d["refine"] = ladder_entry();
      d["checks"] = {{"max_drift", 0.1}, {"residual_tol", 5e-2}};
      break;
    case ExperimentKind::InverseSource:
      d["source"] = {{"q1", "1"}, {"q2", "1"}, {"f1", nullptr}, {"f2", "0"}, {"t0", 0.5},
                     {"window", {0.25, 0.75}}, {"q_min", 1e-3}};
      d["data"] = data_defaults();
      d["exact"] = {{"u", nullptr}, {"v", nullptr}};
      d["inverse"] = {{"tasks", {"direct", "reconstruct", "gradient", "noise", "pairs"}},
                      {"beta", 1e-10},
                      {"lcurve", {{"min", 1e-12}, {"max", 1e-1}, {"points", 12}}},
                      {"noise", {{"amplitudes", {1e-4, 1e-3, 1e-2, 1e-1}}, {"repeats", 3}}},
                      {"pairs", 10},
                      {"gradient_directions", 10}};
      d["checks"] = {{"max_error", 0.02},     {"max_direct_error", 0.005}, {"slope_min", 0.9},
                     {"slope_max", 1.1},      {"gradient_tol", 1e-6}};
      break;
    case ExperimentKind::StateDetermination:
      d["mode"] = "linear";
      d["eps"] = json::array();
      d["experiments"] = json::array();
      d["scales"] = {1.0};
      d["nonlinear"] = {{"a", "1"}, {"kappa", "0"}, {"c0", "0"}, {"M1", 100.0}};
      d["checks"] = {{"max_scaling_deviation", 1e-10}, {"max_linear_deviation", 0.1}};
      break;
    case ExperimentKind::WeightCheck:
      d["weights"] = {{"lambda", 1.0}, {"s", {1, 2, 4, 8}}};
      d["rho"] = {-2, -1, 0, 1, 2, 3};
      break;
    case ExperimentKind::OperatorIdentity:
      d["exact"] = {{"u", "cos(pi*x)*(1+t) + x"}};
      d["weights"] = {{"lambda", 1.0}, {"s", {2, 8}}};
      d["ladder"] = json::array();
      d["checks"] = {{"min_order", 1.8}, {"max_s0_error", 1e-10}};
      break;
  }
  return d;
}

// Element schemas of object-valued lists.
json list_schema(const std::string& path) {
  if (path == "ladder") return ladder_entry();
  if (path == "estimates") return {{"name", nullptr}, {"m", 0}, {"r", 0}};
  if (path == "experiments") return data_defaults();
  return nullptr;
}

bool open_map(const std::string& path) { return path == "coefficient_dt"; }

// A value whose default is a Robin-data expression may also be a side map.
bool side_map_allowed(const std::string& path) {
  auto ends = [&](const char* s) { return path.size() >= 2 && path.substr(path.size() - 2) == s; };
  return ends(".g") || ends(".h");
}

void merge(json& target, const json& given, const std::string& path, std::vector<std::string>& unknown) {
  if (!given.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = it.key();
    const std::string sub = path.empty() ? key : path + "." + key;
    if (!target.contains(key)) {
      unknown.push_back(sub);
      continue;
    }
    json& t = target[key];
    const json& v = it.value();
    if (t.is_object() && !open_map(sub)) {
      if (!v.is_object()) throw ConfigError(fmt::format("config key '{}' must be a mapping", sub));
      merge(t, v, sub, unknown);
    } else if (t.is_array() || (t.is_null() && v.is_array())) {
      if (!v.is_array()) throw ConfigError(fmt::format("config key '{}' must be a list", sub));
      json schema = list_schema(sub);
      if (schema.is_object()) {
        json out = json::array();
        for (size_t i = 0; i < v.size(); ++i) {
          if (!v[i].is_object()) throw ConfigError(fmt::format("entries of '{}' must be mappings", sub));
          json e = schema;
          merge(e, v[i], fmt::format("{}[{}]", sub, i), unknown);
          out.push_back(e);
        }
        t = out;
      } else {
        t = v;
      }
    } else if (v.is_object() && side_map_allowed(sub)) {
      json sides = {{"x0", "0"}, {"x1", "0"}, {"y0", "0"}, {"y1", "0"}};
      merge(sides, v, sub, unknown);
      t = sides;
    } else {
      t = v;
    }
  }
}

void require(const json& doc, const std::vector<std::string>& paths, const std::string& kind) {
  std::vector<std::string> missing;
  for (const auto& p : paths) {
    const json* cur = &doc;
    std::stringstream ss(p);
    std::string part;
    bool ok = true;
    while (std::getline(ss, part, '.')) {
      if (!cur->is_object() || !cur->contains(part) || (*cur)[part].is_null()) {
        ok = false;
        break;
      }
      cur = &(*cur)[part];
    }
    if (!ok) missing.push_back(p);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ConfigError(fmt::format("experiment kind '{}' requires: {}", kind, list));
  }
}

}  // namespace

const char* kind_name(ExperimentKind k) { return kKinds[static_cast<int>(k)]; }

ExperimentKind parse_kind(const std::string& s) {
  for (int i = 0; i < 7; ++i)
    if (s == kKinds[i]) return static_cast<ExperimentKind>(i);
  throw ConfigError(fmt::format("unknown experiment kind '{}' (expected solve, manufacture, estimate-sweep, "
                                "inverse-source, state-determination, weight-check, operator-identity)",
                                s));
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::hash() const {
  json d = doc;
  d.erase("output");  // where results go does not change them
  return fmt::format("{:016x}", fnv1a(d.dump()));
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  json given;
  try {
    given = yaml_to_json(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("{}: malformed config: {}", origin, e.what()));
  }
  if (!given.is_object()) throw ConfigError(fmt::format("{}: config must be a mapping", origin));
  if (!given.contains("kind") || !given["kind"].is_string())
    throw ConfigError(fmt::format("{}: missing required key 'kind'", origin));

  ExperimentConfig cfg;
  cfg.source_path = origin;
  cfg.kind = parse_kind(given["kind"].get<std::string>());

  int dim = 1;
  if (given.contains("grid") && given["grid"].is_object() && given["grid"].contains("extents") &&
      given["grid"]["extents"].is_array())
    dim = static_cast<int>(given["grid"]["extents"].size());
  if (dim != 1 && dim != 2) throw ConfigError("grid.extents must have 1 or 2 entries");

  json doc;
  doc["kind"] = kind_name(cfg.kind);
  doc["seed"] = 0;
  doc["grid"] = dim == 1 ? json{{"extents", {1.0}}, {"counts", {64}}, {"T", 1.0}, {"nt", 128}}
                         : json{{"extents", {1.0, 1.0}}, {"counts", {24, 24}}, {"T", 1.0}, {"nt", 64}};
  json coef = json::object();
  CoefficientSet cs = CoefficientSet::defaults(dim);
  for (const auto& [k, e] : cs.expr) coef[k] = e.str();
  if (dim == 2) {
    coef["a21"] = nullptr;
    coef["b21"] = nullptr;
  }
  doc["coefficients"] = coef;
  doc["coefficient_dt"] = json::object();
  doc["observed"] = {"x1"};
  doc["solver"] = {{"theta", 0.5}, {"picard_tol", 1e-8}, {"picard_max", 50}, {"linear_tol", 1e-10}};
  doc["output"] = {{"dir", "out"}};
  doc.update(kind_defaults(cfg.kind));

  std::vector<std::string> unknown;
  merge(doc, given, "", unknown);
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw ConfigError(fmt::format("{}: unknown config keys: {}", origin, list));
  }
  const auto keys = coefficient_keys(dim);
  for (auto it = doc["coefficient_dt"].begin(); it != doc["coefficient_dt"].end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw ConfigError(fmt::format("{}: unknown config keys: coefficient_dt.{}", origin, it.key()));

  const std::string kn = kind_name(cfg.kind);
  switch (cfg.kind) {
    case ExperimentKind::Manufacture: require(doc, {"exact.u", "exact.v"}, kn); break;
    case ExperimentKind::EstimateSweep: require(doc, {"exact.u"}, kn); break;
    case ExperimentKind::InverseSource: require(doc, {"source.f1"}, kn); break;
    case ExperimentKind::StateDetermination:
      if (doc["experiments"].size() != 2)
        throw ConfigError(fmt::format("experiment kind '{}' requires: experiments (exactly 2 data sets)", kn));
      break;
    default: break;
  }
  for (const auto& e : doc.value("estimates", json::array()))
    if (e["name"].is_null()) throw ConfigError(fmt::format("experiment kind '{}' requires: estimates[].name", kn));
  if (!doc["seed"].is_number_integer() || doc["seed"].get<long long>() < 0)
    throw ConfigError("seed must be a non-negative integer");
  cfg.seed = doc["seed"].get<std::uint64_t>();
  cfg.doc = doc;
  // Fail early on malformed expressions, grid or solver settings.
  GridPtr g = build_grid(doc["grid"]);
  validate(build_coefficients(cfg, g->dim()), g);
  build_partition(cfg, g);
  build_solve_options(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

Expr expr_at(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(fmt::format("missing expression '{}'", key));
  const json& v = j.at(key);
  try {
    if (v.is_number()) return Expr::constant(v.get<double>());
    if (v.is_string()) return Expr::parse(v.get<std::string>());
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("expression '{}': {}", key, e.what()));
  }
  throw ConfigError(fmt::format("'{}' must be an expression", key));
}

GridPtr build_grid(const json& grid) {
  try {
    auto ext = grid.at("extents").get<std::vector<double>>();
    auto counts = grid.at("counts").get<std::vector<int>>();
    return SpaceTimeGrid::build(ext, counts, grid.at("T").get<double>(), grid.at("nt").get<int>());
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("grid: {}", e.what()));
  }
}

CoefficientSet build_coefficients(const ExperimentConfig& c, int dim) {
  CoefficientSet cs = CoefficientSet::defaults(dim);
  const json& j = c.doc.at("coefficients");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.value().is_null()) continue;
    if (it.key() == "a21" || it.key() == "b21")
      cs.transpose[it.key()] = expr_at(j, it.key());
    else
      cs.set(it.key(), expr_at(j, it.key()));
  }
  const json& dt = c.doc.at("coefficient_dt");
  for (auto it = dt.begin(); it != dt.end(); ++it) cs.dt_override[it.key()] = expr_at(dt, it.key());
  return cs;
}

BoundaryPartition build_partition(const ExperimentConfig& c, const GridPtr& g) {
  std::vector<Side> sides;
  for (const auto& s : c.doc.at("observed")) {
    if (!s.is_string()) throw ConfigError("observed must list side names");
    Side sd = parse_side(s.get<std::string>());
    if (g->dim() == 1 && (sd == Side::Y0 || sd == Side::Y1)) throw ConfigError("1D grids have only sides x0, x1");
    sides.push_back(sd);
  }
  if (sides.empty()) throw ConfigError("observed must name at least one side");
  return BoundaryPartition(g, sides);
}

SolveOptions build_solve_options(const ExperimentConfig& c) {
  const json& s = c.doc.at("solver");
  SolveOptions o;
  try {
    o.theta = s.at("theta").get<double>();
    o.picard_tol = s.at("picard_tol").get<double>();
    o.picard_max = s.at("picard_max").get<int>();
    o.linear_tol = s.at("linear_tol").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("solver: {}", e.what()));
  }
  o.validate();
  return o;
}

std::array<Expr, 4> side_exprs(const json& j) {
  std::array<Expr, 4> out;
  if (j.is_object()) {
    for (Side s : {Side::X0, Side::X1, Side::Y0, Side::Y1})
      if (j.contains(side_name(s))) out[static_cast<int>(s)] = expr_at(j, side_name(s));
  } else {
    json w = {{"v", j}};
    Expr e = expr_at(w, "v");
    out.fill(e);
  }
  return out;
}

SystemData build_data(const json& data, const GridPtr& g) {
  SystemData d = SystemData::zeros(g);
  d.F = sample_field(expr_at(data, "F"), g);
  d.G = sample_field(expr_at(data, "G"), g);
  d.g = sample_trace(side_exprs(data.at("g")), g);
  d.h = sample_trace(side_exprs(data.at("h")), g);
  d.uT = sample_level(expr_at(data, "uT"), *g, g->T());
  d.v0 = sample_level(expr_at(data, "v0"), *g, 0.0);
  return d;
}

}  // namespace mfglab
