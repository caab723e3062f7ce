#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "cmpfill/error.hpp"
#include "cmpfill/grid.hpp"

namespace cmpfill {

/// Density-dependent polish parameters.
struct CmpParams {
  double z0 = 0;     ///< initial film thickness over features, nm
  double z1 = 0;     ///< initial step height, nm
  double rate = 0;   ///< blanket removal rate K, nm/min
  double time = 0;   ///< polish time t, min
  double density_floor = 0.01;

  void validate() const {
    if (!(z0 > z1 && z1 >= 0)) throw ConfigError("CMP parameters need z0 > z1 >= 0");
    if (!(rate > 0)) throw ConfigError("removal rate must be positive");
    if (!(time >= 0)) throw ConfigError("polish time must be nonnegative");
    if (!(density_floor > 0 && density_floor <= 1)) {
      throw ConfigError("density floor must lie in (0, 1]");
    }
  }
  /// True if the blanket removal K*t exceeds the initial film thickness.
  bool polishes_through() const { return z0 - rate * time < 0; }
};

/// Post-polish thickness over features for local density `rho`.
///
/// Before the step is planarized (t < rho*z1/K) the raised areas polish at
/// K/rho; afterwards the surface is flat and polishes at K:
///   z = z0 - K t / rho                     for t < rho z1 / K
///   z = z0 - z1 - K t + rho z1             otherwise
inline double post_cmp_thickness(double rho, const CmpParams& p) {
  const double kt = p.rate * p.time;
  if (kt < rho * p.z1) return p.z0 - kt / rho;
  return p.z0 - p.z1 - kt + rho * p.z1;
}

struct ThicknessResult {
  Grid thickness;               ///< kind Thickness, nm
  std::size_t floored_cells = 0;
  bool clamped = false;         ///< polish-through: negative values clamped to 0
};

inline ThicknessResult post_cmp_thickness(const Grid& effective, const CmpParams& p) {
  p.validate();
  if (effective.kind != GridKind::Effective) {
    throw ConfigError("thickness model needs an effective-density grid");
  }
  ThicknessResult r;
  r.thickness = effective.like(GridKind::Thickness);
  for (std::size_t i = 0; i < effective.size(); ++i) {
    double rho = effective.values[i];
    if (rho < p.density_floor) {
      rho = p.density_floor;
      ++r.floored_cells;
    }
    double z = post_cmp_thickness(rho, p);
    if (z < 0) {
      z = 0;
      r.clamped = true;
    }
    r.thickness.values[i] = z;
  }
  if (p.polishes_through()) r.clamped = true;
  return r;
}

struct CellLocation {
  int ix = 0;
  int iy = 0;
  double x_nm = 0;
  double y_nm = 0;
  double value = 0;
};

struct PolishTargetReport {
  double median = 0;
  double mean = 0;
  CellLocation metrology;
  double offset = 0;              ///< metrology - median
  double spec_target = 0;
  double recommended_target = 0;  ///< spec_target + offset
  CellLocation min;
  CellLocation max;

  /// key=value lines, one per field.
  std::string to_key_values() const {
    std::ostringstream os;
    os.precision(17);
    auto loc = [&](const char* name, const CellLocation& l) {
      os << name << "_value=" << l.value << "\n"
         << name << "_ix=" << l.ix << "\n" << name << "_iy=" << l.iy << "\n"
         << name << "_x_nm=" << l.x_nm << "\n" << name << "_y_nm=" << l.y_nm << "\n";
    };
    os << "median=" << median << "\n" << "mean=" << mean << "\n";
    loc("metrology", metrology);
    os << "offset=" << offset << "\n" << "spec_target=" << spec_target << "\n"
       << "recommended_target=" << recommended_target << "\n";
    loc("min", min);
    loc("max", max);
    return os.str();
  }

  std::string to_text() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "Post-CMP thickness distribution\n"
       << "  median            " << median << " nm\n"
       << "  mean              " << mean << " nm\n"
       << "  thinnest          " << min.value << " nm at (" << min.x_nm << ", " << min.y_nm << ")\n"
       << "  thickest          " << max.value << " nm at (" << max.x_nm << ", " << max.y_nm << ")\n"
       << "Metrology site\n"
       << "  thickness         " << metrology.value << " nm at (" << metrology.x_nm << ", " << metrology.y_nm << ")\n"
       << "  offset vs median  " << offset << " nm\n"
       << "  spec target       " << spec_target << " nm\n"
       << "  polish to         " << recommended_target << " nm at the metrology site\n";
    return os.str();
  }
};

/// Aligns the center of the thickness distribution with the specification
/// target by translating it to a target at the metrology site.
inline PolishTargetReport recommend_polish_target(const Grid& tm, Point metrology_point,
                                                  double spec_target) {
  if (tm.values.empty()) throw ConfigError("empty thickness map");
  const Rect ext = tm.extent();
  if (!ext.contains(metrology_point)) throw ConfigError("metrology point is outside the die");
  auto loc = [&](int ix, int iy) {
    auto [cx, cy] = tm.center(ix, iy);
    return CellLocation{ix, iy, cx, cy, tm.at(ix, iy)};
  };
  PolishTargetReport r;
  std::vector<double> sorted = tm.values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double s = 0;
  for (double v : tm.values) s += v;
  r.mean = s / static_cast<double>(n);
  r.metrology = loc(static_cast<int>((metrology_point.x - tm.origin.x) / tm.cell_size),
                    static_cast<int>((metrology_point.y - tm.origin.y) / tm.cell_size));
  r.offset = r.metrology.value - r.median;
  r.spec_target = spec_target;
  r.recommended_target = spec_target + r.offset;
  std::size_t imin = 0, imax = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (tm.values[i] < tm.values[imin]) imin = i;
    if (tm.values[i] > tm.values[imax]) imax = i;
  }
  r.min = loc(static_cast<int>(imin % tm.nx), static_cast<int>(imin / tm.nx));
  r.max = loc(static_cast<int>(imax % tm.nx), static_cast<int>(imax / tm.nx));
  return r;
}

}  // namespace cmpfill
