#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <variant>

#include "searchlight/errors.hpp"
#include "searchlight/space.hpp"

namespace searchlight {

using RateFunction = std::function<double(const Site&)>;
using SiteCurve = std::function<double(const Site&, double)>;

/// d(x, y) = 1 - exp(-alpha(x) * y).
struct ExponentialRate {
  RateFunction rate;
  bool homogeneous = false;
  std::string label;
};

/// A general regular detection function given by its value, effort
/// derivative and (optionally) the inverse of that derivative. Without an
/// analytic inverse, DetectionModel inverts the derivative by bisection,
/// O(log(1/tol)) derivative evaluations per call.
struct RegularTriple {
  SiteCurve value;
  SiteCurve deriv;
  SiteCurve deriv_inverse;  // may be empty
  bool homogeneous = false;
  std::string label;
};

class DetectionModel {
 public:
  static DetectionModel exponential(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("detection rate must be positive");
    std::ostringstream label;
    label << "exponential(rate=" << rate << ")";
    return DetectionModel(ExponentialRate{[rate](const Site&) { return rate; }, true, label.str()});
  }

  static DetectionModel exponential(RateFunction rate, std::string label) {
    if (!rate) throw ValidationError("exponential detection needs a rate function");
    return DetectionModel(ExponentialRate{std::move(rate), false, std::move(label)});
  }

  static DetectionModel regular(RegularTriple triple) {
    if (!triple.value || !triple.deriv) throw ValidationError("regular detection needs value and derivative");
    return DetectionModel(std::move(triple));
  }

  /// d(x, y) = ceiling * (1 - exp(-rate * y)): regular, but its limit is below 1
  /// when ceiling < 1.
  static DetectionModel saturating(double ceiling, double rate) {
    if (!(ceiling > 0.0 && ceiling <= 1.0)) throw ValidationError("saturating ceiling must lie in (0, 1]");
    if (!(rate > 0.0)) throw ValidationError("detection rate must be positive");
    std::ostringstream label;
    label << "saturating(ceiling=" << ceiling << ", rate=" << rate << ")";
    RegularTriple t;
    t.value = [=](const Site&, double y) { return -ceiling * std::expm1(-rate * y); };
    t.deriv = [=](const Site&, double y) { return ceiling * rate * std::exp(-rate * y); };
    t.deriv_inverse = [=](const Site&, double lambda) {
      return std::max(0.0, std::log(ceiling * rate / lambda) / rate);
    };
    t.homogeneous = true;
    t.label = label.str();
    return regular(std::move(t));
  }

  bool is_exponential() const noexcept { return std::holds_alternative<ExponentialRate>(*model_); }
  const ExponentialRate* exponential_rate() const noexcept { return std::get_if<ExponentialRate>(model_.get()); }
  bool homogeneous() const noexcept {
    return std::visit([](const auto& m) { return m.homogeneous; }, *model_);
  }
  std::string describe() const {
    return std::visit([](const auto& m) { return m.label; }, *model_);
  }

  double rate(const Site& x) const {
    const auto* e = exponential_rate();
    if (!e) throw Error("rate() is only defined for exponential detection");
    return e->rate(x);
  }

  double value(const Site& x, double y) const {
    if (const auto* e = exponential_rate()) return -std::expm1(-e->rate(x) * y);
    return std::get<RegularTriple>(*model_).value(x, y);
  }

  /// 1 - d(x, y), without cancellation for the exponential family.
  double miss(const Site& x, double y) const {
    if (const auto* e = exponential_rate()) return std::exp(-e->rate(x) * y);
    return 1.0 - std::get<RegularTriple>(*model_).value(x, y);
  }

  double deriv(const Site& x, double y) const {
    if (const auto* e = exponential_rate()) {
      const double a = e->rate(x);
      return a * std::exp(-a * y);
    }
    return std::get<RegularTriple>(*model_).deriv(x, y);
  }

  bool has_analytic_inverse() const noexcept {
    if (is_exponential()) return true;
    return static_cast<bool>(std::get<RegularTriple>(*model_).deriv_inverse);
  }

  /// Effort y >= 0 with deriv(x, y) == slope; 0 when slope >= deriv(x, 0).
  double deriv_inverse(const Site& x, double slope) const {
    if (!(slope > 0.0)) throw ValidationError("derivative inverse needs a positive slope");
    if (const auto* e = exponential_rate()) {
      const double a = e->rate(x);
      return std::max(0.0, std::log(a / slope) / a);
    }
    const auto& t = std::get<RegularTriple>(*model_);
    if (t.deriv_inverse) return std::max(0.0, t.deriv_inverse(x, slope));
    return bisect_inverse(t, x, slope);
  }

 private:
  using Model = std::variant<ExponentialRate, RegularTriple>;

  explicit DetectionModel(Model m) : model_(std::make_shared<const Model>(std::move(m))) {}

  static double bisect_inverse(const RegularTriple& t, const Site& x, double slope) {
    if (t.deriv(x, 0.0) <= slope) return 0.0;
    double lo = 0.0;
    double hi = 1.0;
    int grow = 0;
    while (t.deriv(x, hi) > slope) {
      lo = hi;
      hi *= 2.0;
      if (++grow > 1100) throw ConvergenceError("derivative inverse: no bracket for slope");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (t.deriv(x, mid) > slope) lo = mid;
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  std::shared_ptr<const Model> model_;
};

}  // namespace searchlight
