#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "searchlight/config.hpp"
#include "searchlight/errors.hpp"
#include "searchlight/space.hpp"

namespace searchlight {

class Prior;

struct DiscretePmf {
  std::vector<double> weights;
};

/// Zero-mean circular bivariate normal.
struct Gaussian2D {
  double sigma = 1.0;
};

/// Uniform on the disc of the given radius centred at the origin.
struct UniformDisc {
  double radius = 1.0;
};

/// Uniform on the open interval (a, b) of a 1-D grid.
struct UniformInterval {
  double a = 0.0;
  double b = 1.0;
};

/// Explicit density per grid cell (row-major).
struct GridDensity {
  std::vector<double> values;
};

struct Mixture {
  std::vector<Prior> components;
  std::vector<double> weights;
};

/// Target distribution as the analyst specifies it. Turn it into per-cell
/// probabilities with TargetDistribution::discretize.
class Prior {
 public:
  using Variant = std::variant<DiscretePmf, Gaussian2D, UniformDisc, UniformInterval, GridDensity, Mixture>;

  Prior(DiscretePmf v) : value_(std::move(v)) {}
  Prior(Gaussian2D v) : value_(v) {}
  Prior(UniformDisc v) : value_(v) {}
  Prior(UniformInterval v) : value_(v) {}
  Prior(GridDensity v) : value_(std::move(v)) {}
  Prior(Mixture v) : value_(std::move(v)) {}

  const Variant& value() const noexcept { return value_; }

  template <class T>
  const T* get_if() const noexcept {
    return std::get_if<T>(&value_);
  }

  std::string describe() const {
    std::ostringstream out;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, DiscretePmf>) {
            out << "pmf(" << p.weights.size() << " cells)";
          } else if constexpr (std::is_same_v<T, Gaussian2D>) {
            out << "gaussian2d(sigma=" << p.sigma << ")";
          } else if constexpr (std::is_same_v<T, UniformDisc>) {
            out << "uniform_disc(r=" << p.radius << ")";
          } else if constexpr (std::is_same_v<T, UniformInterval>) {
            out << "uniform_interval(" << p.a << ", " << p.b << ")";
          } else if constexpr (std::is_same_v<T, GridDensity>) {
            out << "grid_density(" << p.values.size() << " cells)";
          } else {
            out << "mixture(";
            for (std::size_t i = 0; i < p.components.size(); ++i) {
              if (i) out << ", ";
              out << p.weights[i] << "*" << p.components[i].describe();
            }
            out << ")";
          }
        },
        value_);
    return out.str();
  }

 private:
  Variant value_;
};

/// A prior laid onto a SearchSpace: probability mass per cell, summing to 1.
///
/// Continuous priors use midpoint quadrature (density at the cell centre times
/// the cell volume). Truncated or indicator-type priors are renormalised; the
/// pre-normalisation quadrature mass is kept in raw_mass().
class TargetDistribution {
 public:
  static TargetDistribution discretize(const Prior& prior, const SearchSpace& space,
                                       const Tolerances& tol = {}) {
    TargetDistribution out(prior, space);
    std::visit([&](const auto& p) { out.fill(p, tol); }, prior.value());
    double total = 0.0;
    for (double m : out.mass_) total += m;
    if (!(total > 0.0)) throw ValidationError("prior is degenerate: no cell carries probability");
    if (std::abs(total - 1.0) > tol.prior_mass) {
      std::ostringstream msg;
      msg << "prior mass " << total << " ≠ 1";
      throw ValidationError(msg.str());
    }
    return out;
  }

  const Prior& prior() const noexcept { return prior_; }
  const SearchSpace& space() const noexcept { return space_; }
  std::size_t size() const noexcept { return mass_.size(); }
  std::span<const double> masses() const noexcept { return mass_; }
  double mass(std::size_t i) const { return mass_[i]; }

  /// pi(x): the pmf value for discrete spaces, the density for grids.
  double density(std::size_t i) const { return mass_[i] / space_.cell_volume(); }

  double raw_mass() const noexcept { return raw_mass_; }
  bool renormalized() const noexcept { return renormalized_; }

  /// Probability mass dropped by truncating the support to the grid (and by
  /// quadrature), before renormalisation.
  double truncated_mass() const noexcept { return 1.0 - raw_mass_; }

 private:
  TargetDistribution(Prior prior, SearchSpace space)
      : prior_(std::move(prior)), space_(std::move(space)), mass_(space_.size(), 0.0) {}

  void renormalize() {
    double total = 0.0;
    for (double m : mass_) total += m;
    raw_mass_ = total;
    if (!(total > 0.0)) throw ValidationError("prior has no mass on the grid");
    for (double& m : mass_) m /= total;
    renormalized_ = true;
  }

  void fill(const DiscretePmf& p, const Tolerances&) {
    if (space_.is_grid()) throw ValidationError("pmf prior needs a discrete space");
    if (p.weights.size() != space_.size()) {
      throw ValidationError("pmf has " + std::to_string(p.weights.size()) + " weights for " +
                            std::to_string(space_.size()) + " cells");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      if (!(p.weights[i] >= 0.0) || !std::isfinite(p.weights[i])) {
        throw ValidationError("pmf weight " + std::to_string(i + 1) + " is negative or not finite");
      }
      mass_[i] = p.weights[i];
      total += p.weights[i];
    }
    raw_mass_ = total;
  }

  void fill(const Gaussian2D& g, const Tolerances&) {
    if (!space_.is_grid() || space_.dimension() != 2) throw ValidationError("gaussian2d prior needs a 2-D grid");
    if (!(g.sigma > 0.0)) throw ValidationError("gaussian2d sigma must be positive");
    const double s2 = g.sigma * g.sigma;
    const double norm = space_.cell_volume() / (2.0 * std::numbers::pi * s2);
    for (std::size_t i = 0; i < mass_.size(); ++i) {
      const Point c = space_.center(i);
      mass_[i] = norm * std::exp(-(c[0] * c[0] + c[1] * c[1]) / (2.0 * s2));
    }
    renormalize();
  }

  void fill(const UniformDisc& d, const Tolerances&) {
    if (!space_.is_grid() || space_.dimension() != 2) throw ValidationError("uniform_disc prior needs a 2-D grid");
    if (!(d.radius > 0.0)) throw ValidationError("uniform_disc radius must be positive");
    const double r2 = d.radius * d.radius;
    const double dens = space_.cell_volume() / (std::numbers::pi * r2);
    for (std::size_t i = 0; i < mass_.size(); ++i) {
      const Point c = space_.center(i);
      mass_[i] = (c[0] * c[0] + c[1] * c[1] <= r2) ? dens : 0.0;
    }
    renormalize();
  }

  void fill(const UniformInterval& u, const Tolerances&) {
    if (!space_.is_grid() || space_.dimension() != 1) {
      throw ValidationError("uniform_interval prior needs a 1-D grid");
    }
    if (!(u.a < u.b)) throw ValidationError("uniform_interval needs a < b");
    const double dens = space_.cell_volume() / (u.b - u.a);
    for (std::size_t i = 0; i < mass_.size(); ++i) {
      const double x = space_.center(i)[0];
      mass_[i] = (x > u.a && x < u.b) ? dens : 0.0;
    }
    renormalize();
  }

  void fill(const GridDensity& g, const Tolerances&) {
    if (!space_.is_grid()) throw ValidationError("grid_density prior needs a grid space");
    if (g.values.size() != space_.size()) {
      throw ValidationError("grid_density has " + std::to_string(g.values.size()) + " values for " +
                            std::to_string(space_.size()) + " cells");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      if (!(g.values[i] >= 0.0) || !std::isfinite(g.values[i])) {
        throw ValidationError("grid_density value is negative or not finite");
      }
      mass_[i] = g.values[i] * space_.cell_volume();
      total += mass_[i];
    }
    raw_mass_ = total;
  }

  void fill(const Mixture& m, const Tolerances& tol) {
    if (m.components.empty() || m.components.size() != m.weights.size()) {
      throw ValidationError("mixture needs one weight per component");
    }
    double wsum = 0.0;
    for (double w : m.weights) {
      if (!(w >= 0.0)) throw ValidationError("mixture weights must be non-negative");
      wsum += w;
    }
    if (std::abs(wsum - 1.0) > tol.mixture_weights) {
      std::ostringstream msg;
      msg << "mixture weights sum to " << wsum << " ≠ 1";
      throw ValidationError(msg.str());
    }
    raw_mass_ = 0.0;
    for (std::size_t k = 0; k < m.components.size(); ++k) {
      const auto part = discretize(m.components[k], space_, tol);
      for (std::size_t i = 0; i < mass_.size(); ++i) mass_[i] += m.weights[k] * part.mass_[i];
      raw_mass_ += m.weights[k] * part.raw_mass_;
      renormalized_ = renormalized_ || part.renormalized_;
    }
  }

  Prior prior_;
  SearchSpace space_;
  std::vector<double> mass_;
  double raw_mass_ = 1.0;
  bool renormalized_ = false;
};

}  // namespace searchlight
