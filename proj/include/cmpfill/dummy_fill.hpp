#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmpfill/density_engine.hpp"
#include "cmpfill/error.hpp"
#include "cmpfill/geometry.hpp"
#include "cmpfill/grid.hpp"
#include "cmpfill/layout_io.hpp"

namespace cmpfill {

/// Dummy placement rules. Dummies are squares on a uniform site lattice
/// anchored at the die origin.
struct FillRules {
  Nm min_spacing = 3000;
  Nm dummy_size = 1000;
  Nm dummy_pitch = 2000;
  std::vector<int> exclusion_layers;
  int fill_layer = 100;

  double max_density() const {
    const double r = static_cast<double>(dummy_size) / static_cast<double>(dummy_pitch);
    return r * r;
  }

  void validate(Nm cell_size) const {
    if (min_spacing < 0) throw ConfigError("minimum spacing must be nonnegative");
    if (dummy_size <= 0 || dummy_size > dummy_pitch) {
      throw ConfigError("dummy size must be positive and at most the dummy pitch");
    }
    if (dummy_pitch > cell_size) throw ConfigError("dummy pitch exceeds the density cell size");
    if (cell_size % dummy_pitch != 0) {
      throw ConfigError("dummy pitch must divide the density cell size");
    }
    if (fill_layer < 0) throw ConfigError("fill layer must be nonnegative");
  }
};

/// True if a dummy square at `site` would violate spacing to `feature`:
/// the two overlap, or their Euclidean gap is below the minimum spacing.
inline bool spacing_violation(const Rect& site, const Rect& feature, Nm min_spacing) {
  if (site.overlaps(feature)) return true;
  return rect_gap_sq(site, feature) < min_spacing * min_spacing;
}

/// Open dummy sites per cell. Cells with identical surroundings share one
/// site bitmap.
class FillSites {
 public:
  FillSites(const RectIndex& blockers, const Rect& die, const Grid& grid, const FillRules& rules)
      : grid_(grid.like(GridKind::Cap)), die_(die), rules_(rules) {
    rules_.validate(grid.cell_size);
    per_side_ = static_cast<int>(grid.cell_size / rules.dummy_pitch);
    const auto classes = detail::classify_tiles(grid_, die, blockers, rules.min_spacing);
    cell_class_ = classes.cell_class;
    open_.resize(classes.keys.size());
    open_count_.resize(classes.keys.size());
    for (std::size_t c = 0; c < classes.keys.size(); ++c) {
      const auto& key = classes.keys[c];
      const Rect clip{key[0], key[1], key[2], key[3]};
      const auto rects = detail::key_rects(key);
      auto& bits = open_[c];
      bits.assign(static_cast<std::size_t>(per_side_) * per_side_, 0);
      std::size_t n = 0;
      for (int j = 0; j < per_side_; ++j) {
        for (int i = 0; i < per_side_; ++i) {
          const Rect s = local_site(i, j);
          if (!clip.contains(s)) continue;
          bool ok = true;
          for (const Rect& r : rects) {
            if (spacing_violation(s, r, rules.min_spacing)) {
              ok = false;
              break;
            }
          }
          if (ok) {
            bits[static_cast<std::size_t>(j) * per_side_ + i] = 1;
            ++n;
          }
        }
      }
      open_count_[c] = n;
    }
    for (std::size_t k = 0; k < grid_.size(); ++k) {
      grid_.values[k] = rules.max_density() * static_cast<double>(open_count_[cell_class_[k]]) /
                        static_cast<double>(sites_per_cell());
    }
  }

  /// Per-cell fill capacity: max_density x open-site fraction.
  const Grid& caps() const { return grid_; }
  const FillRules& rules() const { return rules_; }
  const Rect& die() const { return die_; }
  std::size_t sites_per_cell() const { return static_cast<std::size_t>(per_side_) * per_side_; }
  int sites_per_side() const { return per_side_; }
  std::size_t open_count(std::size_t cell) const { return open_count_[cell_class_[cell]]; }
  std::size_t unique_classes() const { return open_.size(); }
  bool is_open(std::size_t cell, int i, int j) const {
    return open_[cell_class_[cell]][static_cast<std::size_t>(j) * per_side_ + i] != 0;
  }

  /// Site square relative to its cell origin.
  Rect local_site(int i, int j) const {
    const Nm off = (rules_.dummy_pitch - rules_.dummy_size) / 2;
    const Nm x0 = i * rules_.dummy_pitch + off, y0 = j * rules_.dummy_pitch + off;
    return {x0, y0, x0 + rules_.dummy_size, y0 + rules_.dummy_size};
  }
  /// Layout density added by one dummy in a full cell.
  double site_quantum() const { return rules_.max_density() / static_cast<double>(sites_per_cell()); }

 private:
  Grid grid_;
  Rect die_;
  FillRules rules_;
  int per_side_ = 0;
  std::vector<std::uint32_t> cell_class_;
  std::vector<std::vector<std::uint8_t>> open_;
  std::vector<std::size_t> open_count_;
};

/// Blocking geometry for fill: analyzed layers plus exclusion layers.
inline RectIndex fill_blockers(const LayoutDB& db, std::span<const int> layers,
                               const FillRules& rules, Nm bin) {
  std::vector<int> ids(layers.begin(), layers.end());
  ids.insert(ids.end(), rules.exclusion_layers.begin(), rules.exclusion_layers.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return RectIndex(layer_rects(db, ids), db.die, bin);
}

/// Per-cell requested dummy density (layout area fraction).
struct FillPlan {
  Grid density;  ///< kind Plan

  /// Sum of d(c) x in-die cell area, nm^2.
  double added_area(const Rect& die) const {
    double a = 0;
    for (int iy = 0; iy < density.ny; ++iy) {
      for (int ix = 0; ix < density.nx; ++ix) {
        const double area = static_cast<double>(density.cell_rect(ix, iy).intersect(die).area());
        a += density.at(ix, iy) * area;
      }
    }
    return a;
  }
};

inline FillPlan zero_plan(const Grid& caps) { return {caps.like(GridKind::Plan)}; }

/// Fixed dummy density clipped to each cell's capacity.
inline FillPlan conventional_fill(const Grid& caps, double d_fixed) {
  if (d_fixed < 0) throw ConfigError("fixed dummy density must be nonnegative");
  FillPlan p = zero_plan(caps);
  for (std::size_t k = 0; k < caps.size(); ++k) p.density.values[k] = std::min(d_fixed, caps.values[k]);
  return p;
}

struct SmartFillOptions {
  double lambda = 0.0;
  /// Uniformity target; defaults to the pre-fill maximum effective density.
  std::optional<double> target;
  /// Film pattern density contributed per unit of dummy layout density.
  double gain = 1.0;
  int max_iterations = 100000;
  double tolerance = 1e-8;
};

struct SmartFillResult {
  FillPlan plan;
  double objective = 0;
  double objective_at_zero = 0;
  double target = 0;
  int iterations = 0;
  bool converged = false;
};

/// Objective of a fill plan:
///   J(d) = sum_c max(0, T - (E(raw + g d))(c))^2 + lambda sum_c d(c)
class FillObjective {
 public:
  FillObjective(const Grid& raw, const EffectiveOperator& op, double target, double lambda, double gain)
      : op_(op), target_(target), lambda_(lambda), gain_(gain), eraw_(op.apply(raw.values)) {}

  const std::vector<double>& effective_raw() const { return eraw_; }

  /// J given E d (linearity: E(raw + g d) = E raw + g E d).
  double value_from(std::span<const double> d, std::span<const double> ed) const {
    double j = 0, s = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double r = std::max(0.0, target_ - (eraw_[i] + gain_ * ed[i]));
      j += r * r;
      s += d[i];
    }
    return j + lambda_ * s;
  }
  double value(std::span<const double> d) const { return value_from(d, op_.apply(d)); }

  std::vector<double> gradient_from(std::span<const double> ed) const {
    std::vector<double> r(ed.size());
    for (std::size_t i = 0; i < ed.size(); ++i) {
      r[i] = std::max(0.0, target_ - (eraw_[i] + gain_ * ed[i]));
    }
    auto g = op_.adjoint(r);
    for (double& v : g) v = -2.0 * gain_ * v + lambda_;
    return g;
  }

  /// Lipschitz bound of the gradient: 2 g^2 ||E||_1 ||E||_inf, and rows of E
  /// sum to one.
  double lipschitz() const {
    std::vector<double> ones(op_.size(), 1.0);
    const auto col = op_.adjoint(ones);
    const double norm1 = *std::max_element(col.begin(), col.end());
    return 2.0 * gain_ * gain_ * norm1;
  }

 private:
  const EffectiveOperator& op_;
  double target_, lambda_, gain_;
  std::vector<double> eraw_;
};

/// Upper bound per cell: capacity, and no cell driven above full density.
inline std::vector<double> fill_upper_bounds(const Grid& raw, const Grid& caps, double gain) {
  std::vector<double> ub(caps.size());
  for (std::size_t k = 0; k < caps.size(); ++k) {
    ub[k] = std::clamp(std::min(caps.values[k], (1.0 - raw.values[k]) / gain), 0.0, caps.values[k]);
  }
  return ub;
}

/// Highest uniform level every window can reach: the pre-fill maximum,
/// lowered to the weakest window's value with every cell filled to its bound.
/// Past that level the shortfall term can only be paid by saturating caps.
inline double reachable_target(const Grid& raw, const Grid& caps, const EffectiveOperator& op, double gain) {
  const auto eraw = op.apply(raw.values);
  const auto ub = fill_upper_bounds(raw, caps, gain);
  std::vector<double> full(raw.size());
  for (std::size_t k = 0; k < full.size(); ++k) full[k] = raw.values[k] + gain * ub[k];
  const auto efull = op.apply(full);
  return std::min(*std::max_element(eraw.begin(), eraw.end()), *std::min_element(efull.begin(), efull.end()));
}

/// Locally optimized dummy density: minimizes J(d) subject to
/// 0 <= d <= min(cap, (1 - raw) / g) by accelerated projected gradient with
/// a fixed step 1/L, restarted on function increase or when momentum opposes
/// the step. Deterministic.
inline SmartFillResult smart_fill(const Grid& raw, const Grid& caps, const EffectiveOperator& op,
                                  const SmartFillOptions& opt) {
  if (!raw.same_geometry(caps)) throw ConfigError("raw density and caps must share a grid");
  if (op.nx() != raw.nx || op.ny() != raw.ny) throw ConfigError("operator does not match the grid");
  if (!(opt.gain > 0)) throw ConfigError("dummy gain must be positive");
  if (opt.lambda < 0) throw ConfigError("dummy penalty must be nonnegative");
  const std::size_t n = raw.size();
  SmartFillResult res;
  const auto eraw = op.apply(raw.values);
  res.target = opt.target ? *opt.target : *std::max_element(eraw.begin(), eraw.end());
  FillObjective J(raw, op, res.target, opt.lambda, opt.gain);
  const auto ub = fill_upper_bounds(raw, caps, opt.gain);
  const double step = 1.0 / J.lipschitz();

  std::vector<double> x(n, 0.0), ex(n, 0.0), y = x, ey = ex;
  double jx = J.value_from(x, ex);
  res.objective_at_zero = jx;
  double t = 1.0;
  int quiet = 0;
  std::vector<double> xn(n);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    res.iterations = it;
    auto g = J.gradient_from(ey);
    for (std::size_t i = 0; i < n; ++i) xn[i] = std::clamp(y[i] - step * g[i], 0.0, ub[i]);
    auto exn = op.apply(xn);
    double jn = J.value_from(xn, exn);
    if (jn > jx) {
      // Momentum overshot: restart from x with a plain projected step.
      t = 1.0;
      g = J.gradient_from(ex);
      for (std::size_t i = 0; i < n; ++i) xn[i] = std::clamp(x[i] - step * g[i], 0.0, ub[i]);
      exn = op.apply(xn);
      jn = J.value_from(xn, exn);
    }
    const double change = std::fabs(jx - jn);
    // Gradient restart: drop momentum once it points against the step.
    double dot = 0;
    for (std::size_t i = 0; i < n; ++i) dot += (y[i] - xn[i]) * (xn[i] - x[i]);
    if (dot > 0) t = 1.0;
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / tn;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = xn[i] + beta * (xn[i] - x[i]);
      ey[i] = exn[i] + beta * (exn[i] - ex[i]);
    }
    t = tn;
    x.swap(xn);
    ex.swap(exn);
    const double prev = jx;
    jx = jn;
    if (change <= opt.tolerance * std::max(std::fabs(prev), std::numeric_limits<double>::min())) {
      if (++quiet >= 10) {
        res.converged = true;
        break;
      }
    } else {
      quiet = 0;
    }
  }
  res.objective = jx;
  res.plan = zero_plan(caps);
  res.plan.density.values = x;
  return res;
}

/// Realizes a plan: in each cell, the first round(d x sites / max_density)
/// open sites in row-major order (bottom row first).
inline FillGeometry realize_geometry(const FillPlan& plan, const FillSites& sites) {
  const Grid& caps = sites.caps();
  if (!plan.density.same_geometry(caps)) throw ConfigError("plan and sites must share a grid");
  const double md = sites.rules().max_density();
  FillGeometry fg;
  fg.layer = sites.rules().fill_layer;
  const int side = sites.sites_per_side();
  for (int iy = 0; iy < caps.ny; ++iy) {
    for (int ix = 0; ix < caps.nx; ++ix) {
      const std::size_t k = caps.index(ix, iy);
      const double d = plan.density.values[k];
      if (d < 0 || d > caps.values[k] + 1e-12) {
        throw Error("internal error: plan density " + std::to_string(d) + " exceeds cell capacity " +
                    std::to_string(caps.values[k]));
      }
      std::size_t want = static_cast<std::size_t>(
          std::llround(d * static_cast<double>(sites.sites_per_cell()) / md));
      want = std::min(want, sites.open_count(k));
      if (want == 0) continue;
      const Rect cell = caps.cell_rect(ix, iy);
      for (int j = 0; j < side && want > 0; ++j) {
        for (int i = 0; i < side && want > 0; ++i) {
          if (!sites.is_open(k, i, j)) continue;
          fg.squares.push_back(sites.local_site(i, j).translated(cell.x0, cell.y0));
          --want;
        }
      }
    }
  }
  return fg;
}

/// Layout density of the fill squares per cell.
inline Grid measured_fill_density(const FillGeometry& fg, const Grid& geometry) {
  Grid g = geometry.like(GridKind::Plan);
  for (const Rect& r : fg.squares) {
    const int ix = static_cast<int>((r.x0 - g.origin.x) / g.cell_size);
    const int iy = static_cast<int>((r.y0 - g.origin.y) / g.cell_size);
    if (ix < 0 || iy < 0 || ix >= g.nx || iy >= g.ny) continue;
    g.at(ix, iy) += static_cast<double>(r.area());
  }
  const double ca = static_cast<double>(g.cell_size) * static_cast<double>(g.cell_size);
  for (double& v : g.values) v /= ca;
  return g;
}

struct SpacingViolation {
  Rect dummy;
  Rect other;
  std::string reason;
};

/// Exact check of emitted fill: every square inside the die and inside one
/// density cell, no two squares overlapping, and every square at least
/// `min_spacing` (Euclidean) from every blocking shape.
inline std::optional<SpacingViolation> verify_fill(const FillGeometry& fg, const RectIndex& blockers,
                                                   const Rect& die, const Grid& geometry,
                                                   Nm min_spacing) {
  std::vector<std::uint32_t> hits;
  for (const Rect& s : fg.squares) {
    if (!die.contains(s)) return SpacingViolation{s, die, "outside die"};
    const int ix = static_cast<int>((s.x0 - geometry.origin.x) / geometry.cell_size);
    const int iy = static_cast<int>((s.y0 - geometry.origin.y) / geometry.cell_size);
    if (!geometry.cell_rect(ix, iy).contains(s)) return SpacingViolation{s, geometry.cell_rect(ix, iy), "crosses a cell boundary"};
    blockers.query(s.expanded(min_spacing), hits);
    for (auto id : hits) {
      const Rect& b = blockers.rects()[id];
      if (spacing_violation(s, b, min_spacing)) return SpacingViolation{s, b, "spacing"};
    }
  }
  // Overlap among squares: bin by the largest square edge; overlapping squares
  // fall in the same or adjacent bins.
  Nm edge = 1;
  for (const Rect& s : fg.squares) edge = std::max({edge, s.width(), s.height()});
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> bins;
  auto key = [](std::int64_t bx, std::int64_t by) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(bx)) << 32) |
           static_cast<std::uint32_t>(by);
  };
  for (std::uint32_t i = 0; i < fg.squares.size(); ++i) {
    const Rect& s = fg.squares[i];
    const std::int64_t bx = (s.x0 - die.x0) / edge, by = (s.y0 - die.y0) / edge;
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        auto it = bins.find(key(bx + dx, by + dy));
        if (it == bins.end()) continue;
        for (auto j : it->second) {
          if (fg.squares[j].overlaps(s)) return SpacingViolation{s, fg.squares[j], "dummy overlap"};
        }
      }
    }
    bins[key(bx, by)].push_back(i);
  }
  return std::nullopt;
}

/// Film density gained per unit of dummy layout density: the film density of
/// a fully populated dummy lattice divided by the lattice's layout density.
inline double dummy_film_gain(const FillRules& rules, const FilmStack& film, const StepSpec& spec,
                              Nm pixel) {
  // One lattice period tile with enough lattice around it for the film reach.
  const Nm pitch = rules.dummy_pitch;
  const Nm reach = film.reach(spec);
  const Nm span = ((reach + pitch - 1) / pitch + 2) * pitch;
  std::vector<Rect> squares;
  const Nm off = (pitch - rules.dummy_size) / 2;
  for (Nm y = -span; y < pitch + span; y += pitch) {
    for (Nm x = -span; x < pitch + span; x += pitch) {
      squares.push_back({x + off, y + off, x + off + rules.dummy_size, y + off + rules.dummy_size});
    }
  }
  if (pitch % pixel != 0) throw ConfigError("pixel size must divide the dummy pitch");
  const int halo = film.halo_pixels(spec, pixel);
  const auto tile = rasterize_rects(squares, {0, 0, pitch, pitch}, pixel, halo);
  const auto elev = film_elevation(tile, film, spec);
  const double rho = cell_pattern_density(elev, spec, {0, 0, pitch, pitch});
  return rho / rules.max_density();
}

}  // namespace cmpfill
