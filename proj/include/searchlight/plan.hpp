#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "searchlight/allocation.hpp"
#include "searchlight/errors.hpp"
#include "searchlight/schedule.hpp"

namespace searchlight {

/// Time-indexed family of allocations t -> phi(., t).
///
/// A parametric plan is a callable; a sampled plan stores allocations on a
/// t-grid and interpolates linearly between samples. `schedule()` is set when
/// the plan was constructed to satisfy C[phi(., t)] = E(t) for that schedule.
class SearchPlan {
 public:
  using Generator = std::function<Allocation(double)>;
  /// Effort at one cell, for callers that only need phi(x0, t).
  using PointGenerator = std::function<double(double, std::size_t)>;

  struct Parametric {
    std::string family;
    std::map<std::string, double> parameters;
    Generator generate;
    PointGenerator point;  // optional
  };

  struct Sampled {
    std::vector<double> t_grid;
    std::vector<Allocation> allocations;
  };

  static SearchPlan parametric(SearchSpace space, Parametric p, std::optional<EffortSchedule> schedule) {
    if (!p.generate) throw ValidationError("parametric plan needs a generator");
    return SearchPlan(std::move(space), Body(std::move(p)), std::move(schedule));
  }

  static SearchPlan sampled(std::vector<double> t_grid, std::vector<Allocation> allocations,
                            std::optional<EffortSchedule> schedule) {
    if (t_grid.empty() || t_grid.size() != allocations.size()) {
      throw ValidationError("sampled plan needs one allocation per time sample");
    }
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
      if (!(t_grid[i] > t_grid[i - 1])) throw ValidationError("plan time grid must be strictly increasing");
    }
    SearchSpace space = allocations.front().space();
    for (const auto& a : allocations) {
      if (!(a.space() == space)) throw ValidationError("sampled plan mixes search spaces");
    }
    return SearchPlan(std::move(space), Body(Sampled{std::move(t_grid), std::move(allocations)}),
                      std::move(schedule));
  }

  const SearchSpace& space() const noexcept { return space_; }
  const std::optional<EffortSchedule>& schedule() const noexcept { return schedule_; }
  bool is_sampled() const noexcept { return std::holds_alternative<Sampled>(*body_); }
  const Sampled* samples() const noexcept { return std::get_if<Sampled>(body_.get()); }
  const Parametric* parametric_body() const noexcept { return std::get_if<Parametric>(body_.get()); }

  std::string family() const {
    if (const auto* p = parametric_body()) return p->family;
    return "sampled";
  }

  Allocation at(double t) const {
    if (const auto* p = parametric_body()) return p->generate(t);
    const auto& s = std::get<Sampled>(*body_);
    const auto [lo, w] = bracket(s, t);
    if (w == 0.0) return s.allocations[lo];
    const auto a = s.allocations[lo].effort();
    const auto b = s.allocations[lo + 1].effort();
    std::vector<double> mixed(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) mixed[i] = (1.0 - w) * a[i] + w * b[i];
    return Allocation(space_, std::move(mixed));
  }

  double effort_at(double t, std::size_t cell) const {
    if (const auto* p = parametric_body()) {
      if (p->point) return p->point(t, cell);
      return p->generate(t)[cell];
    }
    const auto& s = std::get<Sampled>(*body_);
    const auto [lo, w] = bracket(s, t);
    if (w == 0.0) return s.allocations[lo][cell];
    return (1.0 - w) * s.allocations[lo][cell] + w * s.allocations[lo + 1][cell];
  }

  /// phi(x, .) nondecreasing on consecutive samples of t_grid (up to tol).
  bool monotone_on(std::span<const double> t_grid, double tol = 1e-12) const {
    std::optional<Allocation> prev;
    for (double t : t_grid) {
      Allocation cur = at(t);
      if (prev) {
        for (std::size_t i = 0; i < cur.size(); ++i) {
          if (cur[i] < (*prev)[i] - tol * std::max(1.0, (*prev)[i])) return false;
        }
      }
      prev = std::move(cur);
    }
    return true;
  }

 private:
  using Body = std::variant<Parametric, Sampled>;

  SearchPlan(SearchSpace space, Body body, std::optional<EffortSchedule> schedule)
      : space_(std::move(space)),
        body_(std::make_shared<const Body>(std::move(body))),
        schedule_(std::move(schedule)) {}

  static std::pair<std::size_t, double> bracket(const Sampled& s, double t) {
    const auto& g = s.t_grid;
    if (t < g.front() || t > g.back()) throw ValidationError("time outside the sampled plan's grid");
    auto it = std::upper_bound(g.begin(), g.end(), t);
    if (it == g.end()) return {g.size() - 1, 0.0};
    const std::size_t hi = static_cast<std::size_t>(it - g.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - g[lo]) / (g[hi] - g[lo]);
    return {lo, w};
  }

  SearchSpace space_;
  std::shared_ptr<const Body> body_;
  std::optional<EffortSchedule> schedule_;
};

}  // namespace searchlight
