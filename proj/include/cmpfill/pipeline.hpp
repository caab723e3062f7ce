#pragma once

// Batch commands behind the command-line tool. Each command reads the layout
// named by the config, writes its artifacts into `out_dir` and returns an
// exit code plus the list of written files. Output bytes depend only on the
// config and the input layout.

#include <algorithm>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cmpfill/cmp_model.hpp"
#include "cmpfill/config.hpp"
#include "cmpfill/density_engine.hpp"
#include "cmpfill/dummy_fill.hpp"
#include "cmpfill/export.hpp"
#include "cmpfill/grid.hpp"
#include "cmpfill/layout_io.hpp"

namespace cmpfill {

namespace exit_code {
constexpr int ok = 0;
constexpr int error = 1;
constexpr int usage = 2;
constexpr int not_converged = 3;
constexpr int verification_failed = 4;
}  // namespace exit_code

struct RunResult {
  int code = exit_code::ok;
  std::vector<std::string> artifacts;
  std::vector<std::string> warnings;
};

namespace detail {

class ArtifactWriter {
 public:
  ArtifactWriter(const std::string& dir, RunResult& r) : dir_(dir), r_(r) {
    std::filesystem::create_directories(dir_);
  }
  void put(const std::string& name, std::string_view data) {
    const auto p = (dir_ / name).string();
    write_file(p, data);
    r_.artifacts.push_back(p);
  }
  void put(const std::string& name, const std::vector<std::uint8_t>& data) {
    put(name, std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
  }

 private:
  std::filesystem::path dir_;
  RunResult& r_;
};

// key=value lines at round-trip precision.
class KvReport {
 public:
  KvReport& add(const std::string& k, double v) { return raw(k, format_double(v)); }
  KvReport& add(const std::string& k, std::size_t v) { return raw(k, std::to_string(v)); }
  KvReport& add(const std::string& k, int v) { return raw(k, std::to_string(v)); }
  KvReport& add(const std::string& k, bool v) { return raw(k, v ? "true" : "false"); }
  KvReport& add(const std::string& k, const char* v) { return raw(k, v); }
  KvReport& add(const std::string& k, const std::string& v) { return raw(k, v); }
  KvReport& raw(const std::string& k, const std::string& v) {
    s_ += k + "=" + v + "\n";
    return *this;
  }
  const std::string& str() const { return s_; }

 private:
  std::string s_;
};

inline LayoutDB load_input(const RunConfig& c) {
  if (c.input.empty()) throw ConfigError("config has no input layout");
  gds::ReadOptions o;
  if (!c.top_cell.empty()) o.top_cell = c.top_cell;
  o.die_layer = c.die_layer;
  return read_layout_file(c.input, c.input_format, o);
}

inline void grid_stats(KvReport& kv, const std::string& prefix, const Grid& g) {
  std::size_t imin = 0, imax = 0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (g.values[i] < g.values[imin]) imin = i;
    if (g.values[i] > g.values[imax]) imax = i;
  }
  auto loc = [&](const std::string& name, std::size_t i) {
    const int ix = static_cast<int>(i % g.nx), iy = static_cast<int>(i / g.nx);
    auto [cx, cy] = g.center(ix, iy);
    kv.add(prefix + "_" + name, g.values[i]);
    kv.add(prefix + "_" + name + "_ix", ix).add(prefix + "_" + name + "_iy", iy);
    kv.add(prefix + "_" + name + "_x_nm", cx).add(prefix + "_" + name + "_y_nm", cy);
  };
  loc("min", imin);
  loc("max", imax);
  kv.add(prefix + "_mean", mean(g));
  kv.add(prefix + "_spread", g.values[imax] - g.values[imin]);
  double var = 0;
  const double m = mean(g);
  for (double v : g.values) var += (v - m) * (v - m);
  kv.add(prefix + "_stddev", std::sqrt(var / static_cast<double>(g.size())));
}

struct DensityMaps {
  Grid raw;
  Grid effective;
  DensityStats stats;
};

inline DensityMaps density_maps(const LayoutDB& db, const RunConfig& c, const FilmStack& film) {
  DensityMaps m;
  m.raw = raw_density_map(db, c.layers, film, c.step, c.cell_size, c.raster, &m.stats);
  m.effective = effective_density(m.raw, c.window, c.convolution);
  return m;
}

inline std::string film_label(const RunConfig& c) { return to_string(c.film.kind); }

}  // namespace detail

/// Raw and effective density maps, heatmaps, histogram and a statistics
/// report; with compare_films also the layout / HDP / conformal comparison.
inline RunResult cmd_density(const RunConfig& c) {
  RunResult r;
  const LayoutDB db = detail::load_input(c);
  detail::ArtifactWriter out(c.out_dir, r);
  const auto m = detail::density_maps(db, c, c.film);
  out.put("raw_density.csv", grid_to_csv(m.raw));
  out.put("raw_density.svg", grid_to_svg(m.raw, "raw pattern density (" + detail::film_label(c) + ")"));
  out.put("effective_density.csv", grid_to_csv(m.effective));
  out.put("effective_density.svg",
          grid_to_svg(m.effective, "effective pattern density (" + detail::film_label(c) + ")"));
  out.put("effective_histogram.csv", histogram_to_csv(histogram(m.effective.values, c.histogram_bins)));

  detail::KvReport kv;
  kv.add("film", detail::film_label(c));
  kv.add("die", std::to_string(db.die.x0) + "," + std::to_string(db.die.y0) + "," +
                    std::to_string(db.die.x1) + "," + std::to_string(db.die.y1));
  kv.add("cell_size_nm", static_cast<double>(c.cell_size));
  kv.add("nx", m.raw.nx).add("ny", m.raw.ny);
  kv.add("unique_tiles", m.stats.unique_tiles).add("computed_tiles", m.stats.computed_tiles);
  detail::grid_stats(kv, "raw", m.raw);
  detail::grid_stats(kv, "effective", m.effective);

  if (c.compare_films) {
    const FilmKind kinds[] = {FilmKind::Layout, FilmKind::Hdp, FilmKind::Conformal};
    std::vector<Grid> effs;
    for (FilmKind k : kinds) {
      FilmStack f = c.film;
      f.kind = k;
      if (k == FilmKind::Conformal && f.t_conf <= 0) f.t_conf = c.step.step_height;
      const auto cm = detail::density_maps(db, c, f);
      const std::string p = std::string("compare_") + to_string(k);
      detail::grid_stats(kv, p + "_raw", cm.raw);
      detail::grid_stats(kv, p + "_effective", cm.effective);
      effs.push_back(cm.effective);
    }
    // Shared bins so the three distributions overlay.
    double lo = 1, hi = 0;
    for (const auto& g : effs) {
      auto [a, b] = min_max(g);
      lo = std::min(lo, a);
      hi = std::max(hi, b);
    }
    std::vector<Histogram> hs;
    for (const auto& g : effs) hs.push_back(histogram(g.values, c.histogram_bins, std::pair{lo, hi}));
    std::string csv = "bin_lo,bin_hi,layout,hdp,conformal\n";
    for (int b = 0; b < c.histogram_bins; ++b) {
      csv += format_double(hs[0].edges[b]) + "," + format_double(hs[0].edges[b + 1]);
      for (const auto& h : hs) csv += "," + std::to_string(h.counts[b]);
      csv += "\n";
    }
    out.put("film_comparison_histogram.csv", csv);
  }
  out.put("density_stats.txt", kv.str());
  return r;
}

/// Post-polish thickness map, heatmap, histogram, X and Y line profiles and
/// the polish-target recommendation.
inline RunResult cmd_thickness(const RunConfig& c) {
  if (!c.cmp) throw ConfigError("thickness needs CMP parameters (cmp_z0_nm, cmp_rate_nm_per_min, cmp_time_min)");
  RunResult r;
  const LayoutDB db = detail::load_input(c);
  detail::ArtifactWriter out(c.out_dir, r);
  const auto m = detail::density_maps(db, c, c.film);
  const auto th = post_cmp_thickness(m.effective, *c.cmp);
  const Grid& tm = th.thickness;
  out.put("thickness.csv", grid_to_csv(tm));
  out.put("thickness.svg", grid_to_svg(tm, "post-CMP thickness (nm)"));
  out.put("thickness_histogram.csv", histogram_to_csv(histogram(tm.values, c.histogram_bins)));

  const Rect ext = tm.extent();
  const Nm cy = c.profile_y ? *c.profile_y : (ext.y0 + ext.y1) / 2;
  const Nm cx = c.profile_x ? *c.profile_x : (ext.x0 + ext.x1) / 2;
  out.put("profile_x.csv", profile_to_csv(line_profile(tm, Axis::X, cy), "thickness_nm"));
  out.put("profile_y.csv", profile_to_csv(line_profile(tm, Axis::Y, cx), "thickness_nm"));

  const Point mp = c.metrology ? *c.metrology : Point{cx, cy};
  const double blanket = c.cmp->z0 - c.cmp->rate * c.cmp->time;
  const auto rep = recommend_polish_target(tm, mp, c.spec_target ? *c.spec_target : blanket);
  std::string kv = rep.to_key_values();
  kv += "floored_cells=" + std::to_string(th.floored_cells) + "\n";
  kv += std::string("polish_through=") + (th.clamped ? "true" : "false") + "\n";
  out.put("polish_target.txt", kv);
  out.put("polish_target_summary.txt", rep.to_text());
  if (th.clamped) r.warnings.push_back("polish time removes the whole film in some cells; thickness clamped at 0");
  if (th.floored_cells) {
    r.warnings.push_back(std::to_string(th.floored_cells) + " cells below the density floor");
  }
  return r;
}

/// Per-variant post-fill statistics.
struct FillVariant {
  std::string name;
  double d_fixed = -1;  ///< conventional variants only
  FillPlan plan;
  Grid effective;
  double added_area = 0;
};

namespace detail {

/// Post-fill effective density: dummies add `gain` film density per unit of
/// dummy layout density, capped at full density.
inline Grid post_fill_effective(const Grid& raw, const FillPlan& plan, const EffectiveOperator& op,
                                double gain) {
  std::vector<double> x(raw.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = std::min(1.0, raw.values[k] + gain * plan.density.values[k]);
  }
  Grid e = raw.like(GridKind::Effective);
  e.values = op.apply(x);
  return e;
}

inline double spread_of(const Grid& g) {
  auto [a, b] = min_max(g);
  return b - a;
}

}  // namespace detail

/// Fixed density whose added area matches `area` (bisection; area is
/// nondecreasing in the fixed density).
inline double conventional_matching_area(const Grid& caps, const Rect& die, double area, double d_max) {
  auto area_at = [&](double d) { return conventional_fill(caps, d).added_area(die); };
  if (area_at(d_max) <= area) return d_max;
  double lo = 0, hi = d_max;
  for (int i = 0; i < 100 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (area_at(mid) < area ? lo : hi) = mid;
  }
  return hi;
}

/// Smallest fixed density on a grid of `steps` levels whose spread is at most
/// `spread`; the spread-minimizing level if none reaches it.
inline double conventional_matching_spread(const Grid& raw, const Grid& caps, const EffectiveOperator& op,
                                           double gain, double spread, double d_max, int steps = 1000) {
  double best_d = 0, best_s = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    const double d = d_max * static_cast<double>(i) / steps;
    const double s = detail::spread_of(detail::post_fill_effective(raw, conventional_fill(caps, d), op, gain));
    if (s <= spread) return d;
    if (s < best_s) {
      best_s = s;
      best_d = d;
    }
  }
  return best_d;
}

/// Dummy fill: capacities, smart and conventional plans, comparison report,
/// realized fill geometry (spacing verified before writing).
inline RunResult cmd_fill(const RunConfig& c) {
  RunResult r;
  const LayoutDB db = detail::load_input(c);
  detail::ArtifactWriter out(c.out_dir, r);
  const FillRules& rules = c.fill_rules;
  const auto m = detail::density_maps(db, c, c.film);
  const RectIndex blockers = fill_blockers(db, c.layers, rules, c.cell_size);
  const FillSites sites(blockers, db.die, m.raw, rules);
  const Grid& caps = sites.caps();
  const EffectiveOperator op(m.raw.nx, m.raw.ny, build_kernel(c.window, c.cell_size), c.convolution);
  const double gain = dummy_film_gain(rules, c.film, c.step, c.raster.pixel);

  SmartFillOptions so;
  so.gain = gain;
  so.max_iterations = c.fill_max_iterations;
  so.tolerance = c.fill_tolerance;
  const auto& kw = op.kernel().weights;
  so.lambda = c.fill_lambda ? *c.fill_lambda : 1e-3 * *std::max_element(kw.begin(), kw.end());
  if (!c.fill_target) so.target = reachable_target(m.raw, caps, op, gain);
  else if (!std::isnan(*c.fill_target)) so.target = c.fill_target;
  const auto smart = smart_fill(m.raw, caps, op, so);

  const double md = rules.max_density();
  const double d_fixed = c.fill_d_fixed ? *c.fill_d_fixed : md;
  std::vector<FillVariant> vars;
  auto add_variant = [&](std::string name, FillPlan plan, double d) {
    FillVariant v;
    v.name = std::move(name);
    v.d_fixed = d;
    v.effective = detail::post_fill_effective(m.raw, plan, op, gain);
    v.added_area = plan.added_area(db.die);
    v.plan = std::move(plan);
    vars.push_back(std::move(v));
  };
  add_variant("none", zero_plan(caps), -1);
  add_variant("conventional", conventional_fill(caps, d_fixed), d_fixed);
  add_variant("smart", smart.plan, -1);
  const double smart_area = vars.back().added_area;
  const double smart_spread = detail::spread_of(vars.back().effective);
  if (c.fill_tune_conventional) {
    const double da = conventional_matching_area(caps, db.die, smart_area, md);
    add_variant("conventional_area_matched", conventional_fill(caps, da), da);
    const double ds = conventional_matching_spread(m.raw, caps, op, gain, smart_spread, md);
    add_variant("conventional_spread_matched", conventional_fill(caps, ds), ds);
  }

  const FillPlan& chosen = c.fill_mode == FillMode::Smart ? smart.plan : vars[1].plan;
  const FillGeometry geo = realize_geometry(chosen, sites);
  const auto violation = verify_fill(geo, blockers, db.die, m.raw, rules.min_spacing);

  if (c.fill_verify_realized && !violation) {
    LayoutDB merged = db;
    for (const Rect& s : geo.squares) merged.add(make_rect_polygon(s, rules.fill_layer));
    std::vector<int> layers = c.layers;
    if (std::find(layers.begin(), layers.end(), rules.fill_layer) == layers.end()) {
      layers.push_back(rules.fill_layer);
    }
    const Grid raw2 = raw_density_map(merged, layers, c.film, c.step, c.cell_size, c.raster);
    FillVariant v;
    v.name = std::string(c.fill_mode == FillMode::Smart ? "smart" : "conventional") + "_realized";
    v.plan = zero_plan(caps);
    v.effective = raw2.like(GridKind::Effective);
    v.effective.values = op.apply(raw2.values);
    v.added_area = 0;
    for (const Rect& s : geo.squares) v.added_area += static_cast<double>(s.area());
    vars.push_back(std::move(v));
  }

  out.put("fill_caps.csv", grid_to_csv(caps));
  out.put("fill_plan.csv", grid_to_csv(chosen.density));
  out.put("fill_plan.svg", grid_to_svg(chosen.density, "dummy density plan"));
  out.put("fill_plan_conventional.csv", grid_to_csv(vars[1].plan.density));
  out.put("fill_plan_smart.csv", grid_to_csv(smart.plan.density));

  const double base_mean = mean(vars[0].effective);
  std::string csv = "variant,d_fixed,min,max,spread,mean,mean_increase,added_area_nm2\n";
  double lo = 1, hi = 0;
  for (const auto& v : vars) {
    auto [a, b] = min_max(v.effective);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
    csv += v.name + "," + (v.d_fixed >= 0 ? format_double(v.d_fixed) : std::string()) + "," +
           format_double(a) + "," + format_double(b) + "," + format_double(b - a) + "," +
           format_double(mean(v.effective)) + "," + format_double(mean(v.effective) - base_mean) +
           "," + format_double(v.added_area) + "\n";
  }
  out.put("fill_report.csv", csv);
  std::string hcsv = "bin_lo,bin_hi";
  std::vector<Histogram> hs;
  for (const auto& v : vars) {
    hcsv += "," + v.name;
    hs.push_back(histogram(v.effective.values, c.histogram_bins, std::pair{lo, hi}));
  }
  hcsv += "\n";
  for (int b = 0; b < c.histogram_bins; ++b) {
    hcsv += format_double(hs[0].edges[b]) + "," + format_double(hs[0].edges[b + 1]);
    for (const auto& h : hs) hcsv += "," + std::to_string(h.counts[b]);
    hcsv += "\n";
  }
  out.put("fill_histograms.csv", hcsv);
  for (const auto& v : vars) {
    out.put("fill_effective_" + v.name + ".svg", grid_to_svg(v.effective, "effective density, " + v.name));
  }

  detail::KvReport kv;
  kv.add("film", detail::film_label(c));
  kv.add("max_dummy_density", md).add("dummy_film_gain", gain);
  kv.add("sites_per_cell", sites.sites_per_cell()).add("site_classes", sites.unique_classes());
  kv.add("lambda", so.lambda).add("target", smart.target);
  kv.add("objective", smart.objective).add("objective_at_zero", smart.objective_at_zero);
  kv.add("iterations", smart.iterations).add("converged", smart.converged);
  kv.add("realized_variant", c.fill_mode == FillMode::Smart ? "smart" : "conventional");
  kv.add("dummy_count", geo.squares.size());
  kv.add("spacing_verified", !violation);
  out.put("fill_summary.txt", kv.str());

  if (violation) {
    std::ostringstream os;
    os << "fill verification failed (" << violation->reason << "): dummy [" << violation->dummy.x0 << ","
       << violation->dummy.y0 << "," << violation->dummy.x1 << "," << violation->dummy.y1 << "] vs ["
       << violation->other.x0 << "," << violation->other.y0 << "," << violation->other.x1 << ","
       << violation->other.y1 << "]";
    r.warnings.push_back(os.str());
    r.code = exit_code::verification_failed;
    return r;
  }
  const std::string ext = c.fill_output_format == LayoutFormat::Gds ? "gds" : "txt";
  FillGeometry fg = geo;
  out.put("fill_layout." + ext, write_fill(db, fg, c.fill_output_format, c.fill_allow_layer_merge));
  if (!smart.converged) {
    r.warnings.push_back("smart fill stopped at the iteration cap without converging");
    if (c.fill_strict_convergence) r.code = exit_code::not_converged;
  }
  return r;
}

}  // namespace cmpfill
