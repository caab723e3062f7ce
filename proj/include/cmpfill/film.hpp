#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cmpfill/distance.hpp"
#include "cmpfill/error.hpp"
#include "cmpfill/raster.hpp"

namespace cmpfill {

enum class Polarity {
  Raised,     ///< features are metal lines; step = metal thickness
  TrenchSti,  ///< features are active areas; step = trench depth
};

/// Step geometry under the dielectric.
struct StepSpec {
  Nm step_height = 0;
  Polarity polarity = Polarity::Raised;

  void validate() const {
    if (step_height <= 0) throw ConfigError("step height must be positive");
  }
};

enum class FilmKind {
  Layout,     ///< mask area fraction (elevation = step on every feature pixel)
  Conformal,  ///< sidewall thickness equals deposition thickness
  Hdp,        ///< faceted high-density-plasma profile
  Composite,  ///< HDP followed by a conformal CVD layer
};

inline const char* to_string(FilmKind k) {
  switch (k) {
    case FilmKind::Layout: return "layout";
    case FilmKind::Conformal: return "conformal";
    case FilmKind::Hdp: return "hdp";
    case FilmKind::Composite: return "composite";
  }
  return "?";
}

/// Deposition parameters. The deposition-to-etch ratio is carried as
/// metadata only; the facet angle is the calibration input of the HDP model.
struct FilmStack {
  FilmKind kind = FilmKind::Hdp;
  Nm t_conf = 0;
  double facet_angle_deg = 45.0;
  double dep_etch_ratio = 4.0;

  void validate() const {
    if ((kind == FilmKind::Conformal || kind == FilmKind::Composite) &&
        t_conf <= 0) {
      throw ConfigError("conformal thickness must be positive");
    }
    if (!(facet_angle_deg > 0.0 && facet_angle_deg < 90.0)) {
      throw ConfigError("facet angle must lie strictly between 0 and 90 degrees");
    }
    if (!(dep_etch_ratio > 0.0)) {
      throw ConfigError("deposition-to-etch ratio must be positive");
    }
  }

  double tan_facet() const {
    return std::tan(facet_angle_deg * std::numbers::pi / 180.0);
  }

  /// Horizontal distance (nm) over which a feature edge influences elevation.
  Nm reach(const StepSpec& step) const {
    const auto hdp = [&] {
      return static_cast<Nm>(std::ceil(static_cast<double>(step.step_height) / tan_facet()));
    };
    switch (kind) {
      case FilmKind::Layout: return 0;
      case FilmKind::Conformal: return t_conf;
      case FilmKind::Hdp: return hdp();
      case FilmKind::Composite: return hdp() + t_conf;
    }
    return 0;
  }

  /// Margin pixels a tile needs for this film at the given pixel size.
  int halo_pixels(const StepSpec& step, Nm pixel) const {
    const Nm r = reach(step);
    if (r == 0) return 0;
    return static_cast<int>((r + pixel - 1) / pixel + 2);
  }
};

/// Per-pixel dielectric elevation above the open-field surface, in nm.
struct ElevationTile {
  Point origin;
  Nm pixel = 1;
  int width = 0;
  int height = 0;
  int halo = 0;
  Nm step_height = 0;
  /// Model reach already consumed from the halo.
  Nm reach_used = 0;
  std::vector<double> elevation;

  double at(int i, int j) const {
    return elevation[static_cast<std::size_t>(j) * width + i];
  }
};

namespace detail {

template <class Map>
ElevationTile elevation_like(const Map& m, Nm step) {
  ElevationTile e;
  e.origin = m.origin;
  e.pixel = m.pixel;
  e.width = m.width;
  e.height = m.height;
  e.halo = m.halo;
  e.step_height = step;
  e.elevation.assign(static_cast<std::size_t>(m.width) * m.height, 0.0);
  return e;
}

// Sliding-window maximum of half-width r (van Herk / Gil-Werman). Values
// outside the row count as 0, the open-field level.
inline void max_filter_1d(const double* in, int n, int r, double* out,
                          std::vector<double>& scratch) {
  if (r == 0) {
    std::copy(in, in + n, out);
    return;
  }
  const int k = 2 * r + 1;
  const int m = ((n + 2 * r + k - 1) / k) * k;
  scratch.assign(static_cast<std::size_t>(3) * m, 0.0);
  double* a = scratch.data();
  double* pre = a + m;
  double* suf = pre + m;
  std::copy(in, in + n, a + r);
  for (int b = 0; b < m; b += k) {
    pre[b] = a[b];
    for (int i = b + 1; i < b + k; ++i) pre[i] = std::max(pre[i - 1], a[i]);
    suf[b + k - 1] = a[b + k - 1];
    for (int i = b + k - 2; i >= b; --i) suf[i] = std::max(suf[i + 1], a[i]);
  }
  for (int x = 0; x < n; ++x) out[x] = std::max(suf[x], pre[x + k - 1]);
}

}  // namespace detail

/// Layout (mask) elevation: the full step on every feature pixel.
inline ElevationTile elevation_layout(const RasterTile& features,
                                      const StepSpec& spec) {
  spec.validate();
  ElevationTile e = detail::elevation_like(features, spec.step_height);
  for (std::size_t k = 0; k < features.bits.size(); ++k) {
    e.elevation[k] = features.bits[k] ? static_cast<double>(spec.step_height) : 0.0;
  }
  return e;
}

/// Conformal film: the step is raised wherever the pixel is a feature or lies
/// within `t_dep` of a feature edge. Gaps no wider than 2 * t_dep close.
///
/// Edge distance is the center-to-center distance minus half a pixel.
inline ElevationTile elevation_conformal(const DistanceMap& exterior,
                                         const StepSpec& spec, Nm t_dep) {
  spec.validate();
  if (t_dep < 0) throw ConfigError("negative deposition thickness");
  require_halo(exterior.halo, exterior.pixel, t_dep);
  ElevationTile e = detail::elevation_like(exterior, spec.step_height);
  e.reach_used = t_dep;
  const Nm p = exterior.pixel;
  // (d - p/2) <= t  <=>  4 p^2 d_sq <= (2t + p)^2
  const __int128 lim = static_cast<__int128>(2 * t_dep + p) * (2 * t_dep + p);
  const __int128 scale = static_cast<__int128>(4) * p * p;
  const double step = static_cast<double>(spec.step_height);
  for (std::size_t k = 0; k < exterior.sq.size(); ++k) {
    const auto d = exterior.sq[k];
    if (d == DistanceMap::kNoSite) continue;
    if (d == 0 || scale * d <= lim) e.elevation[k] = step;
  }
  return e;
}

/// HDP film: each height slice z is the feature eroded by z / tan(angle), so
/// elevation = min(step, edge_distance * tan(angle)) on feature pixels.
inline ElevationTile elevation_hdp(const DistanceMap& interior,
                                   const StepSpec& spec,
                                   double facet_angle_deg) {
  spec.validate();
  FilmStack fs{FilmKind::Hdp, 0, facet_angle_deg};
  fs.validate();
  const double tan_t = fs.tan_facet();
  const Nm reach = fs.reach(spec);
  require_halo(interior.halo, interior.pixel, reach);
  ElevationTile e = detail::elevation_like(interior, spec.step_height);
  e.reach_used = reach;
  const double p = static_cast<double>(interior.pixel);
  const double step = static_cast<double>(spec.step_height);
  for (std::size_t k = 0; k < interior.sq.size(); ++k) {
    const auto d = interior.sq[k];
    if (d == 0) continue;
    if (d == DistanceMap::kNoSite) {
      e.elevation[k] = step;
      continue;
    }
    const double edge = std::sqrt(static_cast<double>(d)) * p - 0.5 * p;
    e.elevation[k] = std::min(step, edge * tan_t);
  }
  return e;
}

/// Offsets of the flat disk used by the composite model: pixel offsets
/// (dx, dy) whose center distance minus half a pixel is within `radius`.
/// Returns the half-width of the disk row for each |dy| = 0..R.
inline std::vector<int> disk_half_widths(Nm radius, Nm pixel) {
  const __int128 lim = static_cast<__int128>(2 * radius + pixel) * (2 * radius + pixel);
  const __int128 scale = static_cast<__int128>(4) * pixel * pixel;
  std::vector<int> hw;
  for (std::int64_t dy = 0;; ++dy) {
    if (scale * dy * dy > lim) break;
    std::int64_t dx = 0;
    while (scale * ((dx + 1) * (dx + 1) + dy * dy) <= lim) ++dx;
    hw.push_back(static_cast<int>(dx));
  }
  return hw;
}

/// Composite stack: flat-disk grayscale dilation of the HDP surface by the
/// conformal thickness, clamped to the step.
inline ElevationTile elevation_composite(const ElevationTile& hdp, Nm t_conf) {
  if (t_conf < 0) throw ConfigError("negative conformal thickness");
  require_halo(hdp.halo, hdp.pixel, hdp.reach_used + t_conf);
  ElevationTile e = hdp;
  e.reach_used = hdp.reach_used + t_conf;
  if (t_conf == 0) return e;
  const auto hw = disk_half_widths(t_conf, hdp.pixel);
  const int R = static_cast<int>(hw.size()) - 1;
  const int w = hdp.width, h = hdp.height;
  std::fill(e.elevation.begin(), e.elevation.end(), 0.0);
  std::vector<double> filtered(w), scratch;
  for (int ys = 0; ys < h; ++ys) {
    const double* src = hdp.elevation.data() + static_cast<std::size_t>(ys) * w;
    if (std::all_of(src, src + w, [](double v) { return v == 0.0; })) continue;
    for (int dy = 0; dy <= R; ++dy) {
      const int y_lo = ys - dy, y_hi = ys + dy;
      if (y_lo < 0 && y_hi >= h) continue;
      detail::max_filter_1d(src, w, hw[dy], filtered.data(), scratch);
      for (int y : {y_lo, y_hi}) {
        if (y < 0 || y >= h) continue;
        double* dst = e.elevation.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) dst[x] = std::max(dst[x], filtered[x]);
        if (dy == 0) break;
      }
    }
  }
  const double step = static_cast<double>(hdp.step_height);
  for (double& v : e.elevation) v = std::min(v, step);
  return e;
}

/// Elevation for any film kind from a feature bitmap.
inline ElevationTile film_elevation(const RasterTile& features,
                                    const FilmStack& film,
                                    const StepSpec& spec) {
  film.validate();
  spec.validate();
  switch (film.kind) {
    case FilmKind::Layout:
      return elevation_layout(features, spec);
    case FilmKind::Conformal:
      return elevation_conformal(
          distance_transform(features, DtMode::Exterior, film.t_conf), spec,
          film.t_conf);
    case FilmKind::Hdp:
      return elevation_hdp(
          distance_transform(features, DtMode::Interior, film.reach(spec)),
          spec, film.facet_angle_deg);
    case FilmKind::Composite: {
      auto hdp = elevation_hdp(
          distance_transform(features, DtMode::Interior, film.reach(spec)),
          spec, film.facet_angle_deg);
      return elevation_composite(hdp, film.t_conf);
    }
  }
  throw ConfigError("unknown film kind");
}

/// Volumetric pattern density of one cell: dielectric volume above the open
/// field divided by (step height x cell area). Only pixels whose centers lie
/// in `cell` contribute, and the cell area is their count times the pixel
/// area.
inline double cell_pattern_density(const ElevationTile& tile,
                                   const StepSpec& spec, const Rect& cell) {
  spec.validate();
  const Nm p = tile.pixel;
  const Nm i0 = std::max<Nm>(0, detail::ceil_div(2 * (cell.x0 - tile.origin.x) - p, 2 * p));
  const Nm i1 = std::min<Nm>(tile.width, detail::ceil_div(2 * (cell.x1 - tile.origin.x) - p, 2 * p));
  const Nm j0 = std::max<Nm>(0, detail::ceil_div(2 * (cell.y0 - tile.origin.y) - p, 2 * p));
  const Nm j1 = std::min<Nm>(tile.height, detail::ceil_div(2 * (cell.y1 - tile.origin.y) - p, 2 * p));
  if (i1 <= i0 || j1 <= j0) throw ConfigError("empty density window");
  double sum = 0.0;
  for (Nm j = j0; j < j1; ++j) {
    const double* row = tile.elevation.data() + static_cast<std::size_t>(j) * tile.width;
    double rs = 0.0;
    for (Nm i = i0; i < i1; ++i) rs += row[i];
    sum += rs;
  }
  const double count = static_cast<double>((i1 - i0) * (j1 - j0));
  const double rho = sum / (static_cast<double>(spec.step_height) * count);
  return std::clamp(rho, 0.0, 1.0);
}

}  // namespace cmpfill
