#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "searchlight/evaluator.hpp"
#include "searchlight/oracle.hpp"
#include "searchlight/scenario.hpp"

namespace searchlight {

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_validation = 2,
  exit_convergence = 3,
  exit_divergent = 4,
};

struct RunOptions {
  std::filesystem::path out_dir = ".";
  bool paper_mode = false;
  std::optional<std::uint64_t> seed;
  bool allow_divergent = false;
};

/// Output directory: the explicit flag, else $SEARCHLIGHT_OUT_DIR, else ".".
inline std::filesystem::path default_out_dir(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("SEARCHLIGHT_OUT_DIR"); env && *env) return env;
  return ".";
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes to a temporary sibling, then renames over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string curves_csv(const std::vector<double>& t, const std::vector<std::vector<double>>& columns,
                              const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "t";
  for (const auto& n : names) out << "," << n;
  out << "\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    out << fmt17(t[k]);
    for (const auto& c : columns) out << "," << fmt17(c[k]);
    out << "\n";
  }
  return out.str();
}

struct Evaluated {
  std::vector<double> t;
  DetectionCurve subjective;
  DetectionCurve true_curve;
  std::optional<DetectionCurve> alt_subjective;
  std::optional<DetectionCurve> alt_true;
};

inline bool all_gaussian_mixture(const Prior& p) {
  const auto* m = p.get_if<Mixture>();
  if (!m) return false;
  return std::all_of(m->components.begin(), m->components.end(),
                     [](const Prior& c) { return c.get_if<Gaussian2D>() != nullptr; });
}

inline Evaluated evaluate_curves(const ScenarioConfig& c, bool paper_mode) {
  Evaluated e;
  e.t = uniform_time_grid(c.time.start, c.time.end, c.time.samples);
  const auto target = TargetDistribution::discretize(subjective_prior(c, paper_mode), c.space, c.tolerances);
  const SearchPlan plan = build_plan(c, c.plan, paper_mode);
  auto [s, tr] = detection_curves(plan, target, c.truth, c.detection, e.t);
  e.subjective = std::move(s);
  e.true_curve = std::move(tr);
  if (c.alternative) {
    const SearchPlan alt = build_plan(c, *c.alternative, paper_mode);
    auto [as, at] = detection_curves(alt, target, c.truth, c.detection, e.t);
    e.alt_subjective = std::move(as);
    e.alt_true = std::move(at);
  }
  return e;
}

inline std::string evaluated_csv(const Evaluated& e) {
  std::vector<std::vector<double>> cols{e.subjective.values, e.true_curve.values};
  std::vector<std::string> names{"P_subjective", "P_true"};
  if (e.alt_subjective) {
    cols.push_back(e.alt_subjective->values);
    cols.push_back(e.alt_true->values);
    names.push_back("P_subjective_alt");
    names.push_back("P_true_alt");
  }
  return curves_csv(e.t, cols, names);
}

inline nlohmann::json metadata(const ScenarioConfig& c, const std::string& command, const RunOptions& o) {
  nlohmann::json j;
  j["scenario"] = c.name;
  j["command"] = command;
  j["space"] = c.space.describe();
  j["prior"] = c.prior.describe();
  j["detection"] = c.detection.describe();
  j["schedule"] = c.schedule.describe();
  j["paper_mode"] = o.paper_mode;
  j["seed"] = o.seed.value_or(c.seed);
  j["rng"] = "mt19937_64";
  j["notes"] = c.notes;
  return j;
}

inline nlohmann::json mean_time_json(const MeanTime& m) {
  nlohmann::json j;
  j["divergent"] = m.divergent;
  if (m.divergent) j["value"] = nullptr;
  else j["value"] = m.value;
  j["horizon"] = m.horizon;
  j["tail"] = m.tail;
  j["miss_at_horizon"] = m.miss_at_horizon;
  j["evaluations"] = m.evaluations;
  return j;
}

inline std::filesystem::path output_path(const RunOptions& o, const ScenarioConfig& c, const std::string& suffix) {
  return o.out_dir / (c.name + suffix);
}

}  // namespace detail

/// Curves of the scenario's plan (and alternative plan) on its time grid.
inline int run_curves(const ScenarioConfig& c, const RunOptions& o) {
  const auto e = detail::evaluate_curves(c, o.paper_mode);
  detail::write_atomic(detail::output_path(o, c, "_curves.csv"), detail::evaluated_csv(e));
  auto meta = detail::metadata(c, "curves", o);
  meta["samples"] = e.t.size();
  detail::write_atomic(detail::output_path(o, c, "_curves.json"), meta.dump(2) + "\n");
  return exit_ok;
}

/// The two-strategy comparison: phi* on the composite prior against the
/// composite plan phi_c. Needs a mixture prior.
inline int run_compare(const ScenarioConfig& c, const RunOptions& o) {
  const auto* m = c.prior.get_if<Mixture>();
  if (!m) throw ValidationError(c.name + ": compare needs a mixture prior");
  const bool matched = o.paper_mode && detail::all_gaussian_mixture(c.prior);
  const auto t = uniform_time_grid(c.time.start, c.time.end, c.time.samples);
  const auto cmp = compare_strategies(m->components, m->weights, c.space, c.detection, c.schedule, c.truth, t,
                                      matched ? CompositeMode::moment_matched : CompositeMode::exact_mixture,
                                      c.tolerances);
  const std::string csv = detail::curves_csv(
      t,
      {cmp.optimal_subjective.values, cmp.optimal_true.values, cmp.composite_subjective.values,
       cmp.composite_true.values, cmp.true_difference},
      {"P_subjective", "P_true", "P_subjective_alt", "P_true_alt", "P_true_difference"});
  detail::write_atomic(detail::output_path(o, c, "_compare.csv"), csv);
  auto meta = detail::metadata(c, "compare", o);
  meta["composite_prior"] = cmp.composite_prior.describe();
  meta["composite_mode"] = matched ? "moment_matched" : "exact_mixture";
  double min_diff = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] > 0.0) min_diff = std::min(min_diff, cmp.true_difference[k]);
  }
  meta["min_true_difference_for_t_positive"] = min_diff;
  meta["composite_plan_wins_everywhere"] = min_diff > 0.0;
  if (o.paper_mode && !matched) meta["notes"].push_back("paper mode applies only to Gaussian mixtures");
  detail::write_atomic(detail::output_path(o, c, "_compare.json"), meta.dump(2) + "\n");
  return exit_ok;
}

/// Mean times mu and mu# of the plan (and alternative). Divergence returns
/// exit_divergent unless allowed.
inline int run_mean_time(const ScenarioConfig& c, const RunOptions& o) {
  const auto target = TargetDistribution::discretize(subjective_prior(c, o.paper_mode), c.space, c.tolerances);
  auto meta = detail::metadata(c, "mean-time", o);
  bool divergent = false;
  const auto add = [&](const char* key, const SearchPlan& plan) {
    const MeanTime mu = mean_time_subjective(plan, target, c.detection, c.horizon);
    const MeanTime mu_true = mean_time_true(plan, c.truth, c.detection, c.horizon);
    divergent = divergent || mu.divergent || mu_true.divergent;
    meta[key]["mu"] = detail::mean_time_json(mu);
    meta[key]["mu_true"] = detail::mean_time_json(mu_true);
  };
  add("plan", build_plan(c, c.plan, o.paper_mode));
  if (c.alternative) add("alternative_plan", build_plan(c, *c.alternative, o.paper_mode));
  meta["divergent"] = divergent;
  detail::write_atomic(detail::output_path(o, c, "_mean_time.json"), meta.dump(2) + "\n");
  if (divergent && !o.allow_divergent) {
    std::cerr << c.name << ": mean time diverges (rerun with --allow-divergent to accept)\n";
    return exit_divergent;
  }
  return exit_ok;
}

/// Allocation snapshots at the configured times, one row per cell.
inline int run_plan(const ScenarioConfig& c, const RunOptions& o) {
  const SearchPlan plan = build_plan(c, c.plan, o.paper_mode);
  std::ostringstream out;
  out << "t,cell,x,y,effort\n";
  for (double t : c.time.snapshots) {
    const Allocation a = plan.at(t);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const Point p = c.space.center(i);
      out << detail::fmt17(t) << "," << i + 1 << "," << detail::fmt17(p[0]) << "," << detail::fmt17(p[1]) << ","
          << detail::fmt17(a[i]) << "\n";
    }
  }
  detail::write_atomic(detail::output_path(o, c, "_plan.csv"), out.str());
  const auto report = feasibility_check(plan, c.schedule, c.time.snapshots, c.tolerances.feasibility);
  auto meta = detail::metadata(c, "plan", o);
  meta["family"] = plan.family();
  meta["feasible"] = report.feasible;
  meta["max_budget_residual"] = report.max_residual;
  meta["snapshots"] = c.time.snapshots;
  detail::write_atomic(detail::output_path(o, c, "_plan.json"), meta.dump(2) + "\n");
  return exit_ok;
}

/// One acceptance check of the examples suite.
struct CheckResult {
  std::string scenario;
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace detail {

inline CheckResult max_error_check(const std::string& scenario, const std::string& name,
                                   const std::vector<double>& t, const std::vector<double>& got,
                                   const std::function<std::optional<double>(double)>& want, double from,
                                   double tol) {
  double worst = 0.0, at = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < from) continue;
    const auto w = want(t[k]);
    if (!w) continue;
    ++used;
    const double err = std::abs(got[k] - *w);
    if (err > worst) {
      worst = err;
      at = t[k];
    }
  }
  std::ostringstream msg;
  msg << "max abs error " << worst << " at t=" << at << " (tolerance " << tol << ", " << used << " samples)";
  return {scenario, name, used > 0 && worst <= tol, msg.str()};
}

inline CheckResult dominance_check(const std::string& scenario, const std::string& name,
                                   const std::vector<double>& t, const std::vector<double>& hi,
                                   const std::vector<double>& lo) {
  double worst = std::numeric_limits<double>::infinity();
  double at = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!(t[k] > 0.0)) continue;
    const double gap = hi[k] - lo[k];
    if (gap < worst) {
      worst = gap;
      at = t[k];
    }
  }
  std::ostringstream msg;
  msg << "smallest gap " << worst << " at t=" << at;
  return {scenario, name, worst > 0.0, msg.str()};
}

}  // namespace detail

/// Runs every check attached to one scenario; writes its curve CSV.
inline std::vector<CheckResult> check_scenario(const ScenarioConfig& c, const RunOptions& o) {
  std::vector<CheckResult> results;
  if (!c.reference) return results;
  const ReferenceCheck& ref = *c.reference;
  const bool paper = o.paper_mode || ref.paper_mode;
  const auto e = detail::evaluate_curves(c, paper);
  RunOptions local = o;
  local.paper_mode = paper;
  detail::write_atomic(detail::output_path(local, c, "_curves.csv"), detail::evaluated_csv(e));
  const auto value = [&](double t) { return closed_form_reference(ref.id, t, ref.params); };
  const std::string& n = c.name;
  const ReferenceValues probe = value(e.t.back());
  if (probe.subjective) {
    results.push_back(detail::max_error_check(n, "P matches closed form", e.t, e.subjective.values,
                                              [&](double t) { return value(t).subjective; }, ref.from,
                                              ref.tolerance));
  }
  if (probe.true_prob) {
    results.push_back(detail::max_error_check(n, "P# matches closed form", e.t, e.true_curve.values,
                                              [&](double t) { return value(t).true_prob; }, ref.from,
                                              ref.tolerance));
  }
  if (e.alt_subjective && probe.alt_subjective) {
    results.push_back(detail::max_error_check(n, "alternative P matches closed form", e.t, e.alt_subjective->values,
                                              [&](double t) { return value(t).alt_subjective; }, ref.from,
                                              ref.tolerance));
  }
  if (e.alt_true && probe.alt_true) {
    results.push_back(detail::max_error_check(n, "alternative P# matches closed form", e.t, e.alt_true->values,
                                              [&](double t) { return value(t).alt_true; }, ref.from,
                                              ref.tolerance));
  }
  for (const auto& what : ref.expect) {
    if (what == "P_equals_P_true") {
      double worst = 0.0;
      for (std::size_t k = 0; k < e.t.size(); ++k) {
        worst = std::max(worst, std::abs(e.subjective.values[k] - e.true_curve.values[k]));
      }
      std::ostringstream msg;
      msg << "max |P - P#| " << worst << " (tolerance " << ref.tolerance << ")";
      results.push_back({n, what, worst <= ref.tolerance, msg.str()});
    } else if (what == "optimal_P_beats_alternative") {
      if (!e.alt_subjective) throw ValidationError(n + ": '" + what + "' needs an alternative plan");
      results.push_back(detail::dominance_check(n, what, e.t, e.subjective.values, e.alt_subjective->values));
    } else if (what == "alternative_P_true_beats_optimal") {
      if (!e.alt_true) throw ValidationError(n + ": '" + what + "' needs an alternative plan");
      results.push_back(detail::dominance_check(n, what, e.t, e.alt_true->values, e.true_curve.values));
    } else if (what == "P_true_nondecreasing") {
      bool ok = true;
      for (std::size_t k = 1; k < e.t.size(); ++k) ok = ok && e.true_curve.values[k] >= e.true_curve.values[k - 1];
      results.push_back({n, what, ok, ok ? "nondecreasing on every sample" : "decreases between samples"});
    } else if (what == "plan_feasible") {
      const SearchPlan plan = build_plan(c, c.plan, paper);
      const auto rep = feasibility_check(plan, c.schedule, e.t, c.tolerances.feasibility);
      std::ostringstream msg;
      msg << "max budget residual " << rep.max_residual << " at t=" << rep.worst_t;
      results.push_back({n, what, rep.feasible, msg.str()});
    } else if (what == "plan_monotone") {
      const SearchPlan plan = build_plan(c, c.plan, paper);
      const bool ok = plan.monotone_on(e.t);
      results.push_back({n, what, ok, ok ? "phi(x, t) nondecreasing on the grid" : "phi(x, t) decreases"});
    } else {
      throw ValidationError(n + ": unknown expectation '" + what + "'");
    }
  }
  if (ref.mean_subjective || ref.mean_true || ref.mean_true_divergent) {
    const auto target = TargetDistribution::discretize(subjective_prior(c, paper), c.space, c.tolerances);
    const SearchPlan plan = build_plan(c, c.plan, paper);
    if (ref.mean_subjective) {
      const auto mu = mean_time_subjective(plan, target, c.detection, c.horizon);
      const double err = mu.divergent ? std::numeric_limits<double>::infinity() : std::abs(mu.value - *ref.mean_subjective);
      std::ostringstream msg;
      msg << "mu=" << detail::fmt17(mu.value) << " expected " << *ref.mean_subjective << " (tolerance "
          << ref.mean_tolerance << ")";
      results.push_back({n, "mean time mu", err <= ref.mean_tolerance, msg.str()});
    }
    if (ref.mean_true || ref.mean_true_divergent) {
      const auto mu = mean_time_true(plan, c.truth, c.detection, c.horizon);
      if (ref.mean_true_divergent) {
        std::ostringstream msg;
        msg << "miss probability " << mu.miss_at_horizon << " at horizon " << mu.horizon;
        results.push_back({n, "mean time mu# divergent", mu.divergent, msg.str()});
      } else {
        const double err = mu.divergent ? std::numeric_limits<double>::infinity() : std::abs(mu.value - *ref.mean_true);
        std::ostringstream msg;
        msg << "mu#=" << detail::fmt17(mu.value) << " expected " << *ref.mean_true << " (tolerance "
            << ref.mean_tolerance << ")";
        results.push_back({n, "mean time mu#", err <= ref.mean_tolerance, msg.str()});
      }
    }
  }
  return results;
}

/// Runs the checks of every scenario and writes examples_report.txt and
/// examples_report.json. Returns exit_failure if any check fails.
inline int run_examples(const std::vector<ScenarioConfig>& scenarios, const RunOptions& o) {
  std::vector<CheckResult> all;
  for (const auto& c : scenarios) {
    auto r = check_scenario(c, o);
    if (r.empty()) r.push_back({c.name, "scenario has reference checks", false, "no 'reference' block"});
    all.insert(all.end(), r.begin(), r.end());
  }
  std::ostringstream text;
  nlohmann::json j = nlohmann::json::array();
  std::size_t failed = 0;
  for (const auto& r : all) {
    text << (r.pass ? "PASS" : "FAIL") << "  " << r.scenario << ": " << r.name << " -- " << r.detail << "\n";
    j.push_back({{"scenario", r.scenario}, {"check", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    if (!r.pass) ++failed;
  }
  text << all.size() - failed << "/" << all.size() << " checks passed\n";
  detail::write_atomic(o.out_dir / "examples_report.txt", text.str());
  detail::write_atomic(o.out_dir / "examples_report.json", j.dump(2) + "\n");
  std::cout << text.str();
  return failed == 0 ? exit_ok : exit_failure;
}

/// Dispatches one CLI command, mapping errors to exit codes.
inline int run_command(const std::string& command, const std::vector<ScenarioConfig>& scenarios,
                       const RunOptions& o) {
  try {
    if (command == "examples") return run_examples(scenarios, o);
    if (scenarios.size() != 1) throw ValidationError(command + " takes exactly one scenario");
    ScenarioConfig c = scenarios.front();
    if (o.seed) c.seed = *o.seed;
    if (command == "plan") return run_plan(c, o);
    if (command == "curves") return run_curves(c, o);
    if (command == "compare") return run_compare(c, o);
    if (command == "mean-time") return run_mean_time(c, o);
    throw ValidationError("unknown command '" + command + "'");
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << "validation error: " << v << "\n";
    return exit_validation;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return exit_convergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace searchlight
