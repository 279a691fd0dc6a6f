#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "searchlight/allocator.hpp"
#include "searchlight/alternative_plans.hpp"
#include "searchlight/composite.hpp"
#include "searchlight/config.hpp"
#include "searchlight/detection.hpp"
#include "searchlight/errors.hpp"
#include "searchlight/evaluator.hpp"
#include "searchlight/oracle.hpp"
#include "searchlight/plan.hpp"
#include "searchlight/prior.hpp"
#include "searchlight/schedule.hpp"
#include "searchlight/space.hpp"
#include "searchlight/validate.hpp"

namespace searchlight {

inline constexpr int kScenarioVersion = 1;

/// How to build one search plan from a scenario.
struct PlanRequest {
  enum class Type { optimal, clairvoyant, composite, two_cell_offset, counterexample_ring };
  Type type = Type::optimal;
  std::optional<Prior> prior;  // optimal: build on this prior instead of the scenario's
  double shift = 0.0;          // two_cell_offset
  double sigma = 0.0;          // counterexample_ring
};

/// Expected values the `examples` command checks a scenario against.
struct ReferenceCheck {
  std::string id;
  std::map<std::string, double> params;
  double tolerance = 1e-10;  // max |curve - closed form|
  double from = 0.0;         // closed-form comparison only for t >= from
  std::vector<std::string> expect;
  std::optional<double> mean_subjective;
  std::optional<double> mean_true;
  double mean_tolerance = 1e-6;
  bool mean_true_divergent = false;
  bool paper_mode = false;  // evaluate with the moment-matched composite prior
};

struct TimeRange {
  double start = 0.0;
  double end = 1.0;
  std::size_t samples = 400;
  std::vector<double> snapshots;
};

struct ScenarioConfig {
  int version = kScenarioVersion;
  std::string name;
  std::string description;
  SearchSpace space = SearchSpace::discrete(1);
  Prior prior = DiscretePmf{{1.0}};
  DetectionModel detection = DetectionModel::exponential(1.0);
  EffortSchedule schedule = EffortSchedule::linear(1.0);
  GroundTruth truth = GroundTruth::cell(SearchSpace::discrete(1), 1);
  PlanRequest plan;
  std::optional<PlanRequest> alternative;
  TimeRange time;
  std::vector<std::string> outputs;
  Tolerances tolerances;
  HorizonPolicy horizon;
  std::uint64_t seed = 0;
  std::optional<ReferenceCheck> reference;
  std::vector<std::string> notes;  // validation notes, e.g. renormalisation
  bool truth_has_mass = true;
};

namespace detail {

using nlohmann::json;

inline void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path + ": expected an object");
}

/// Strict mode: every key must be known.
inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  require_object(j, path);
  std::set<std::string> ok(allowed.begin(), allowed.end());
  std::vector<std::string> bad;
  for (const auto& [k, v] : j.items()) {
    if (!ok.contains(k)) bad.push_back(path + ": unknown key '" + k + "'");
  }
  if (!bad.empty()) throw ValidationError(bad);
}

inline const json& need(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(path + ": missing required key '" + key + "'");
  return *it;
}

inline double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path + ": expected a number");
  return j.get<double>();
}

inline double num(const json& j, const char* key, const std::string& path) {
  return num(need(j, key, path), path + "." + key);
}

inline double num_or(const json& j, const char* key, double fallback, const std::string& path) {
  return j.contains(key) ? num(j.at(key), path + "." + key) : fallback;
}

inline std::string str(const json& j, const char* key, const std::string& path) {
  const json& v = need(j, key, path);
  if (!v.is_string()) throw ValidationError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline std::vector<double> num_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(num(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::size_t count_of(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 1) throw ValidationError(path + ": expected a positive integer");
  return static_cast<std::size_t>(j.get<long long>());
}

inline SearchSpace parse_space(const json& j) {
  const std::string path = "space";
  require_object(j, path);
  const std::string type = str(j, "type", path);
  if (type == "discrete") {
    check_keys(j, path, {"type", "cells"});
    return SearchSpace::discrete(count_of(need(j, "cells", path), path + ".cells"));
  }
  if (type == "grid") {
    check_keys(j, path, {"type", "lower", "upper", "resolution", "cells"});
    const auto lo = num_array(need(j, "lower", path), path + ".lower");
    const auto hi = num_array(need(j, "upper", path), path + ".upper");
    if (lo.size() != hi.size() || lo.empty() || lo.size() > 2) {
      throw ValidationError(path + ": lower and upper need 1 or 2 matching coordinates");
    }
    if (j.contains("resolution") == j.contains("cells")) {
      throw ValidationError(path + ": give exactly one of 'resolution' or 'cells'");
    }
    double h = 0.0;
    if (j.contains("resolution")) {
      h = num(j, "resolution", path);
    } else {
      h = (hi[0] - lo[0]) / static_cast<double>(count_of(j.at("cells"), path + ".cells"));
    }
    if (lo.size() == 1) return SearchSpace::grid_1d(lo[0], hi[0], h);
    return SearchSpace::grid_2d({lo[0], lo[1]}, {hi[0], hi[1]}, h);
  }
  if (type == "centered_grid") {
    check_keys(j, path, {"type", "half_extent", "resolution"});
    return SearchSpace::centered_grid_2d(num(j, "half_extent", path), num(j, "resolution", path));
  }
  throw ValidationError(path + ".type: unknown space type '" + type + "'");
}

inline Prior parse_prior(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string type = str(j, "type", path);
  if (type == "pmf") {
    check_keys(j, path, {"type", "weights"});
    return DiscretePmf{num_array(need(j, "weights", path), path + ".weights")};
  }
  if (type == "gaussian2d") {
    check_keys(j, path, {"type", "sigma"});
    return Gaussian2D{num(j, "sigma", path)};
  }
  if (type == "uniform_disc") {
    check_keys(j, path, {"type", "radius"});
    return UniformDisc{num(j, "radius", path)};
  }
  if (type == "uniform_interval") {
    check_keys(j, path, {"type", "a", "b"});
    return UniformInterval{num(j, "a", path), num(j, "b", path)};
  }
  if (type == "grid_density") {
    check_keys(j, path, {"type", "values"});
    return GridDensity{num_array(need(j, "values", path), path + ".values")};
  }
  if (type == "mixture") {
    check_keys(j, path, {"type", "components", "weights"});
    const json& comps = need(j, "components", path);
    if (!comps.is_array() || comps.empty()) throw ValidationError(path + ".components: expected a non-empty array");
    Mixture m;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      m.components.push_back(parse_prior(comps[i], path + ".components[" + std::to_string(i) + "]"));
    }
    m.weights = num_array(need(j, "weights", path), path + ".weights");
    return m;
  }
  throw ValidationError(path + ".type: unknown prior type '" + type + "'");
}

inline DetectionModel parse_detection(const json& j, const SearchSpace& space) {
  const std::string path = "detection";
  require_object(j, path);
  const std::string type = str(j, "type", path);
  if (type == "exponential") {
    check_keys(j, path, {"type", "rate", "rates", "rate_coordinate"});
    const int forms = static_cast<int>(j.contains("rate")) + static_cast<int>(j.contains("rates")) +
                      static_cast<int>(j.contains("rate_coordinate"));
    if (forms != 1) throw ValidationError(path + ": give exactly one of 'rate', 'rates', 'rate_coordinate'");
    if (j.contains("rate")) return DetectionModel::exponential(num(j, "rate", path));
    if (j.contains("rates")) {
      auto rates = num_array(j.at("rates"), path + ".rates");
      if (rates.size() != space.size()) throw ValidationError(path + ".rates: need one rate per cell");
      for (double r : rates) {
        if (!(r > 0.0)) throw ValidationError(path + ".rates: rates must be positive");
      }
      std::ostringstream label;
      label << "exponential(rates=[";
      for (std::size_t i = 0; i < rates.size(); ++i) label << (i ? "," : "") << rates[i];
      label << "])";
      return DetectionModel::exponential([rates](const Site& x) { return rates[x.index]; }, label.str());
    }
    const json& flag = j.at("rate_coordinate");
    if (!flag.is_boolean() || !flag.get<bool>()) throw ValidationError(path + ".rate_coordinate: expected true");
    if (!space.is_grid() || space.dimension() != 1 || !(space.lower()[0] > 0.0)) {
      throw ValidationError(path + ".rate_coordinate: needs a 1-D grid on positive coordinates");
    }
    return DetectionModel::exponential([](const Site& x) { return x.coord[0]; }, "exponential(rate=x)");
  }
  if (type == "saturating") {
    check_keys(j, path, {"type", "ceiling", "rate"});
    return DetectionModel::saturating(num(j, "ceiling", path), num(j, "rate", path));
  }
  throw ValidationError(path + ".type: unknown detection type '" + type + "'");
}

inline EffortSchedule parse_schedule(const json& j) {
  const std::string path = "schedule";
  require_object(j, path);
  const std::string type = str(j, "type", path);
  if (type == "linear") {
    check_keys(j, path, {"type", "rate"});
    return EffortSchedule::linear(num(j, "rate", path));
  }
  if (type == "affine") {
    check_keys(j, path, {"type", "offset", "rate"});
    return EffortSchedule::affine(num(j, "offset", path), num(j, "rate", path));
  }
  if (type == "table") {
    check_keys(j, path, {"type", "points"});
    const json& pts = need(j, "points", path);
    if (!pts.is_array()) throw ValidationError(path + ".points: expected an array of [t, E] pairs");
    std::vector<std::pair<double, double>> points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto pair = num_array(pts[i], path + ".points[" + std::to_string(i) + "]");
      if (pair.size() != 2) throw ValidationError(path + ".points: each entry must be [t, E]");
      points.emplace_back(pair[0], pair[1]);
    }
    return EffortSchedule::table(std::move(points));
  }
  throw ValidationError(path + ".type: unknown schedule type '" + type + "'");
}

inline GroundTruth parse_truth(const json& j, const SearchSpace& space) {
  const std::string path = "truth";
  check_keys(j, path, {"cell", "point"});
  if (j.contains("cell") == j.contains("point")) throw ValidationError(path + ": give exactly one of 'cell' or 'point'");
  if (j.contains("cell")) {
    if (space.is_grid()) throw ValidationError(path + ".cell: grid spaces take a 'point'");
    return GroundTruth::cell(space, count_of(j.at("cell"), path + ".cell"));
  }
  if (!space.is_grid()) throw ValidationError(path + ".point: discrete spaces take a 'cell'");
  const auto p = num_array(j.at("point"), path + ".point");
  if (static_cast<int>(p.size()) != space.dimension()) throw ValidationError(path + ".point: wrong dimension");
  return GroundTruth::point(space, {p[0], p.size() > 1 ? p[1] : 0.0});
}

inline PlanRequest parse_plan(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string type = str(j, "type", path);
  PlanRequest r;
  if (type == "optimal") {
    check_keys(j, path, {"type", "prior"});
    r.type = PlanRequest::Type::optimal;
    if (j.contains("prior")) r.prior = parse_prior(j.at("prior"), path + ".prior");
  } else if (type == "clairvoyant") {
    check_keys(j, path, {"type"});
    r.type = PlanRequest::Type::clairvoyant;
  } else if (type == "composite") {
    check_keys(j, path, {"type"});
    r.type = PlanRequest::Type::composite;
  } else if (type == "two_cell_offset") {
    check_keys(j, path, {"type", "shift"});
    r.type = PlanRequest::Type::two_cell_offset;
    r.shift = num(j, "shift", path);
  } else if (type == "counterexample_ring") {
    check_keys(j, path, {"type", "sigma"});
    r.type = PlanRequest::Type::counterexample_ring;
    r.sigma = num(j, "sigma", path);
  } else {
    throw ValidationError(path + ".type: unknown plan type '" + type + "'");
  }
  return r;
}

inline TimeRange parse_time(const json& j) {
  const std::string path = "time";
  check_keys(j, path, {"start", "end", "samples", "snapshots"});
  TimeRange t;
  t.start = num_or(j, "start", 0.0, path);
  t.end = num(j, "end", path);
  if (j.contains("samples")) t.samples = count_of(j.at("samples"), path + ".samples");
  if (!(t.start >= 0.0) || !(t.end > t.start)) throw ValidationError(path + ": need 0 <= start < end");
  if (t.samples < 2) throw ValidationError(path + ".samples: need at least 2");
  if (j.contains("snapshots")) {
    t.snapshots = num_array(j.at("snapshots"), path + ".snapshots");
  } else {
    t.snapshots = {t.start, 0.5 * (t.start + t.end), t.end};
  }
  for (double s : t.snapshots) {
    if (!(s >= 0.0)) throw ValidationError(path + ".snapshots: times must be >= 0");
  }
  return t;
}

inline Tolerances parse_tolerances(const json& j) {
  const std::string path = "tolerances";
  check_keys(j, path,
             {"prior_mass", "mixture_weights", "budget", "kkt", "lambda_solve", "max_bisection", "inverse_identity",
              "feasibility", "truncation_sigmas"});
  Tolerances t;
  t.prior_mass = num_or(j, "prior_mass", t.prior_mass, path);
  t.mixture_weights = num_or(j, "mixture_weights", t.mixture_weights, path);
  t.budget = num_or(j, "budget", t.budget, path);
  t.kkt = num_or(j, "kkt", t.kkt, path);
  t.lambda_solve = num_or(j, "lambda_solve", t.lambda_solve, path);
  if (j.contains("max_bisection")) t.max_bisection = static_cast<int>(count_of(j.at("max_bisection"), path));
  t.inverse_identity = num_or(j, "inverse_identity", t.inverse_identity, path);
  t.feasibility = num_or(j, "feasibility", t.feasibility, path);
  t.truncation_sigmas = num_or(j, "truncation_sigmas", t.truncation_sigmas, path);
  return t;
}

inline HorizonPolicy parse_horizon(const json& j) {
  const std::string path = "mean_time";
  check_keys(j, path,
             {"initial_horizon", "decay_threshold", "divergence_threshold", "hard_cap", "abs_tolerance", "max_depth"});
  HorizonPolicy p;
  p.initial_horizon = num_or(j, "initial_horizon", p.initial_horizon, path);
  p.decay_threshold = num_or(j, "decay_threshold", p.decay_threshold, path);
  p.divergence_threshold = num_or(j, "divergence_threshold", p.divergence_threshold, path);
  p.hard_cap = num_or(j, "hard_cap", p.hard_cap, path);
  p.abs_tolerance = num_or(j, "abs_tolerance", p.abs_tolerance, path);
  if (j.contains("max_depth")) p.max_depth = static_cast<int>(count_of(j.at("max_depth"), path));
  if (!(p.initial_horizon > 0.0) || !(p.hard_cap >= p.initial_horizon)) {
    throw ValidationError(path + ": need 0 < initial_horizon <= hard_cap");
  }
  return p;
}

inline ReferenceCheck parse_reference(const json& j) {
  const std::string path = "reference";
  check_keys(j, path,
             {"id", "params", "tolerance", "from", "expect", "mean_subjective", "mean_true", "mean_tolerance",
              "mean_true_divergent", "paper_mode"});
  ReferenceCheck r;
  r.id = str(j, "id", path);
  if (j.contains("params")) {
    require_object(j.at("params"), path + ".params");
    for (const auto& [k, v] : j.at("params").items()) r.params[k] = num(v, path + ".params." + k);
  }
  const auto known = reference_defaults(r.id);
  for (const auto& [k, v] : r.params) {
    if (!known.contains(k)) throw ValidationError(path + ".params: reference '" + r.id + "' has no parameter '" + k + "'");
  }
  r.tolerance = num_or(j, "tolerance", r.tolerance, path);
  r.from = num_or(j, "from", r.from, path);
  if (j.contains("expect")) {
    const json& e = j.at("expect");
    if (!e.is_array()) throw ValidationError(path + ".expect: expected an array of strings");
    for (const auto& item : e) {
      if (!item.is_string()) throw ValidationError(path + ".expect: expected an array of strings");
      r.expect.push_back(item.get<std::string>());
    }
  }
  if (j.contains("mean_subjective")) r.mean_subjective = num(j, "mean_subjective", path);
  if (j.contains("mean_true")) r.mean_true = num(j, "mean_true", path);
  r.mean_tolerance = num_or(j, "mean_tolerance", r.mean_tolerance, path);
  if (j.contains("mean_true_divergent")) {
    if (!j.at("mean_true_divergent").is_boolean()) throw ValidationError(path + ".mean_true_divergent: expected a boolean");
    r.mean_true_divergent = j.at("mean_true_divergent").get<bool>();
  }
  if (j.contains("paper_mode")) {
    if (!j.at("paper_mode").is_boolean()) throw ValidationError(path + ".paper_mode: expected a boolean");
    r.paper_mode = j.at("paper_mode").get<bool>();
  }
  return r;
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline const std::vector<std::string>& known_outputs() {
  static const std::vector<std::string> outputs{"plan", "curves", "compare", "mean_time"};
  return outputs;
}

/// Parses and validates a scenario document. `origin` names the source in
/// error messages.
inline ScenarioConfig parse_scenario(const std::string& text, const std::string& origin = "<scenario>") {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::ostringstream msg;
    msg << origin << ":" << line << ":" << col << ": JSON parse error: " << e.what();
    throw ValidationError(msg.str());
  }
  try {
    detail::check_keys(root, "scenario",
                       {"version", "name", "description", "space", "prior", "detection", "schedule", "truth", "plan",
                        "alternative_plan", "time", "outputs", "tolerances", "mean_time", "seed", "reference"});
    ScenarioConfig c;
    const json& version = detail::need(root, "version", "scenario");
    if (!version.is_number_integer() || version.get<int>() != kScenarioVersion) {
      throw ValidationError("scenario.version: expected " + std::to_string(kScenarioVersion));
    }
    c.name = detail::str(root, "name", "scenario");
    if (root.contains("description")) c.description = detail::str(root, "description", "scenario");
    if (root.contains("tolerances")) c.tolerances = detail::parse_tolerances(root.at("tolerances"));
    c.space = detail::parse_space(detail::need(root, "space", "scenario"));
    c.prior = detail::parse_prior(detail::need(root, "prior", "scenario"), "prior");
    c.detection = detail::parse_detection(detail::need(root, "detection", "scenario"), c.space);
    c.schedule = detail::parse_schedule(detail::need(root, "schedule", "scenario"));
    c.truth = detail::parse_truth(detail::need(root, "truth", "scenario"), c.space);
    c.plan = detail::parse_plan(detail::need(root, "plan", "scenario"), "plan");
    if (root.contains("alternative_plan")) c.alternative = detail::parse_plan(root.at("alternative_plan"), "alternative_plan");
    c.time = detail::parse_time(detail::need(root, "time", "scenario"));
    if (root.contains("outputs")) {
      const json& o = root.at("outputs");
      if (!o.is_array()) throw ValidationError("scenario.outputs: expected an array of strings");
      for (const auto& item : o) {
        const std::string name = item.is_string() ? item.get<std::string>() : "";
        if (std::find(known_outputs().begin(), known_outputs().end(), name) == known_outputs().end()) {
          throw ValidationError("scenario.outputs: unknown output '" + item.dump() + "'");
        }
        c.outputs.push_back(name);
      }
    }
    if (root.contains("mean_time")) c.horizon = detail::parse_horizon(root.at("mean_time"));
    if (root.contains("seed")) {
      const json& s = root.at("seed");
      if (!s.is_number_unsigned()) throw ValidationError("scenario.seed: expected a non-negative integer");
      c.seed = s.get<std::uint64_t>();
    }
    if (root.contains("reference")) c.reference = detail::parse_reference(root.at("reference"));

    ValidationReport report = validate(c.space, c.prior, c.detection, c.schedule, c.tolerances);
    if (c.plan.prior) {
      const auto extra = validate(c.space, *c.plan.prior, c.detection, c.schedule, c.tolerances);
      for (const auto& v : extra.violations) report.fail("plan.prior: " + v);
    }
    if (c.alternative && c.alternative->prior) {
      const auto extra = validate(c.space, *c.alternative->prior, c.detection, c.schedule, c.tolerances);
      for (const auto& v : extra.violations) report.fail("alternative_plan.prior: " + v);
    }
    if (!report.ok) throw ValidationError(report.violations);
    c.notes = report.notes;
    const auto target = TargetDistribution::discretize(c.prior, c.space, c.tolerances);
    c.truth_has_mass = target.mass(c.truth.index()) > 0.0;
    if (!c.truth_has_mass) c.notes.push_back("warning: the true location has zero prior probability");
    return c;
  } catch (const ValidationError& e) {
    std::vector<std::string> v;
    for (const auto& item : e.violations()) v.push_back(origin + ": " + item);
    throw ValidationError(v);
  }
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

/// The prior used for subjective probabilities. In paper mode a mixture of
/// circular Gaussians is replaced by its moment-matched Gaussian.
inline Prior subjective_prior(const ScenarioConfig& c, bool paper_mode) {
  if (paper_mode) {
    if (const auto* m = c.prior.get_if<Mixture>()) {
      const bool gaussian = std::all_of(m->components.begin(), m->components.end(),
                                        [](const Prior& p) { return p.get_if<Gaussian2D>() != nullptr; });
      if (gaussian) return moment_matched_gaussian(m->components, m->weights, c.tolerances);
    }
  }
  return c.prior;
}

inline SearchPlan build_plan(const ScenarioConfig& c, const PlanRequest& r, bool paper_mode) {
  switch (r.type) {
    case PlanRequest::Type::optimal: {
      const Prior prior = r.prior ? *r.prior : subjective_prior(c, paper_mode);
      return uniformly_optimal_plan(TargetDistribution::discretize(prior, c.space, c.tolerances), c.detection,
                                    c.schedule, c.tolerances);
    }
    case PlanRequest::Type::clairvoyant:
      return clairvoyant_plan(c.truth, c.space, c.schedule);
    case PlanRequest::Type::composite: {
      const auto* m = c.prior.get_if<Mixture>();
      if (!m) throw ValidationError("composite plan needs a mixture prior");
      std::vector<SearchPlan> parts;
      for (const auto& comp : m->components) {
        parts.push_back(uniformly_optimal_plan(TargetDistribution::discretize(comp, c.space, c.tolerances),
                                               c.detection, c.schedule, c.tolerances));
      }
      return composite_plan(std::move(parts), m->weights, c.tolerances);
    }
    case PlanRequest::Type::two_cell_offset:
      return two_cell_offset_plan(c.space, c.schedule, r.shift);
    case PlanRequest::Type::counterexample_ring:
      return counterexample_ring_plan(c.space, c.schedule, r.sigma);
  }
  throw Error("unhandled plan type");
}

}  // namespace searchlight
