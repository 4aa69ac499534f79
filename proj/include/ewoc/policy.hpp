#pragma once

// Feasibility-bound schedules and dose-scheme (continuous / discrete grid) policies.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ewoc/errors.hpp"
#include "ewoc/model.hpp"

namespace ewoc {

enum class ScheduleKind { Fixed, Increasing, Conditional };

inline std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Fixed: return "fixed";
    case ScheduleKind::Increasing: return "increasing";
    case ScheduleKind::Conditional: return "conditional";
  }
  return "unknown";
}

/// F(alpha0), I(alpha0, step) or C(alpha0, step), capped at `cap`.
struct FeasibilitySchedule {
  ScheduleKind kind = ScheduleKind::Conditional;
  double alpha0 = 0.25;
  double step = 0.05;
  double cap = 0.5;

  static FeasibilitySchedule fixed(double alpha) { return {ScheduleKind::Fixed, alpha, 0.0, 0.5}; }
  static FeasibilitySchedule increasing(double alpha0, double step, double cap = 0.5) {
    return {ScheduleKind::Increasing, alpha0, step, cap};
  }
  static FeasibilitySchedule conditional(double alpha0, double step, double cap = 0.5) {
    return {ScheduleKind::Conditional, alpha0, step, cap};
  }

  std::string label() const {
    char buf[64];
    if (kind == ScheduleKind::Fixed) {
      std::snprintf(buf, sizeof buf, "F(%g)", alpha0);
    } else {
      std::snprintf(buf, sizeof buf, "%c(%g, %g)", kind == ScheduleKind::Increasing ? 'I' : 'C', alpha0, step);
    }
    return buf;
  }

  friend bool operator==(const FeasibilitySchedule&, const FeasibilitySchedule&) = default;
};

inline double feasibility_alpha(const FeasibilitySchedule& s, std::span<const ToxicityRecord> history) {
  switch (s.kind) {
    case ScheduleKind::Fixed:
      return s.alpha0;
    case ScheduleKind::Increasing:
      return std::min(s.cap, s.alpha0 + s.step * static_cast<double>(history.size()));
    case ScheduleKind::Conditional: {
      // alpha moves up one step after every patient without a DLT and holds after a DLT.
      const auto no_dlt = std::count_if(history.begin(), history.end(), [](const auto& r) { return r.dlt == 0; });
      return std::min(s.cap, s.alpha0 + s.step * static_cast<double>(no_dlt));
    }
  }
  return s.alpha0;
}

enum class SchemeKind { Continuous, Discrete };
enum class Rounding { Down, Nearest };

inline std::string to_string(Rounding r) { return r == Rounding::Down ? "down" : "nearest"; }

inline constexpr double kDoseTolerance = 1e-9;

struct DoseScheme {
  SchemeKind kind = SchemeKind::Continuous;
  std::vector<double> grid;  ///< strictly increasing; discrete only
  Rounding rounding = Rounding::Nearest;
  bool no_skip = true;

  static DoseScheme continuous() { return {}; }

  static DoseScheme discrete(std::vector<double> grid, Rounding rounding = Rounding::Nearest, bool no_skip = true) {
    return {SchemeKind::Discrete, std::move(grid), rounding, no_skip};
  }

  /// Equally spaced grid x_min, x_min + spacing, ..., x_max. The spacing must
  /// divide the range into a whole number of steps.
  static DoseScheme equally_spaced(double x_min, double x_max, double spacing, Rounding rounding = Rounding::Nearest,
                                   bool no_skip = true) {
    if (!(spacing > 0.0)) throw DomainError("grid spacing must be positive");
    const double steps = (x_max - x_min) / spacing;
    const double whole = std::round(steps);
    if (whole < 1.0 || std::abs(steps - whole) > 1e-9 * std::max(1.0, steps))
      throw DomainError("grid spacing does not divide the dose range evenly");
    const auto m = static_cast<std::size_t>(whole);
    std::vector<double> grid(m + 1);
    for (std::size_t i = 0; i <= m; ++i)
      grid[i] = x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(m);
    return discrete(std::move(grid), rounding, no_skip);
  }

  bool is_discrete() const noexcept { return kind == SchemeKind::Discrete; }

  /// Index of the grid dose equal to `dose` (within kDoseTolerance), if any.
  std::optional<std::size_t> index_of(double dose) const {
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (std::abs(grid[i] - dose) <= kDoseTolerance) return i;
    return std::nullopt;
  }

  /// "continuous", or "D<spacing>" for equally spaced grids, else "grid<N>".
  std::string label() const {
    if (!is_discrete()) return "continuous";
    if (grid.size() >= 2) {
      const double spacing = grid[1] - grid[0];
      bool equal = true;
      for (std::size_t i = 2; i < grid.size(); ++i)
        if (std::abs(grid[i] - grid[i - 1] - spacing) > 1e-9) equal = false;
      if (equal) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "D%.2f", spacing);
        return buf;
      }
    }
    return "grid" + std::to_string(grid.size());
  }

  friend bool operator==(const DoseScheme&, const DoseScheme&) = default;
};

/// Round onto the grid without the no-skip constraint.
inline double round_to_grid(double dose, const DoseScheme& scheme) {
  const auto& g = scheme.grid;
  if (g.empty()) return dose;
  if (scheme.rounding == Rounding::Down) {
    double out = g.front();
    for (double d : g)
      if (d <= dose + kDoseTolerance) out = d;
    return out;
  }
  // Nearest; exact midpoints go to the lower dose.
  double best = g.front();
  double best_dist = std::abs(dose - best);
  for (double d : g) {
    const double dist = std::abs(dose - d);
    if (dist < best_dist - 1e-12) {
      best = d;
      best_dist = dist;
    }
  }
  return best;
}

/// Map the continuous EWOC dose onto what is administered.
///
/// Discrete schemes round per the scheme's policy, then (with no_skip) cap the
/// dose one grid step above the most recently administered dose. That cap is
/// never above one step over the highest dose given so far; de-escalation is
/// unrestricted. With an empty history the cap is the lowest grid dose.
inline double apply_dose_policy(double continuous_dose, const DoseScheme& scheme,
                                std::span<const ToxicityRecord> history) {
  if (!scheme.is_discrete()) return continuous_dose;
  const auto& g = scheme.grid;
  double dose = round_to_grid(continuous_dose, scheme);
  if (!scheme.no_skip) return dose;
  if (history.empty()) return std::min(dose, g.front());
  const double last = history.back().dose;
  std::size_t last_index = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g[i] <= last + kDoseTolerance) last_index = i;
  const double cap = g[std::min(last_index + 1, g.size() - 1)];
  return std::min(dose, cap);
}

}  // namespace ewoc
