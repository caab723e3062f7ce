#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cmpfill/film.hpp"
#include "cmpfill/geometry.hpp"
#include "cmpfill/grid.hpp"
#include "cmpfill/parallel.hpp"
#include "cmpfill/raster.hpp"

namespace cmpfill {

struct RasterOptions {
  Nm pixel = 25;
  int threads = 0;
};

struct DensityStats {
  std::size_t cells = 0;
  std::size_t unique_tiles = 0;
  std::size_t computed_tiles = 0;  ///< unique tiles that needed a film evaluation
};

namespace detail {

struct VecHash {
  std::size_t operator()(const std::vector<Nm>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (Nm x : v) {
      h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

// Groups cells whose surroundings (window grown by `margin`) hold the same
// clipped geometry relative to the cell origin. key layout:
//   [cell x0, y0, x1, y1 (local, clipped to die), then 4 Nm per rect].
struct TileClasses {
  std::vector<std::uint32_t> cell_class;       // per cell
  std::vector<std::vector<Nm>> keys;           // per class
};

inline TileClasses classify_tiles(const Grid& g, const Rect& die,
                                  const RectIndex& index, Nm margin) {
  TileClasses tc;
  tc.cell_class.resize(g.size());
  std::unordered_map<std::vector<Nm>, std::uint32_t, VecHash> seen;
  std::vector<std::uint32_t> hits;
  std::vector<Rect> local;
  std::vector<Nm> key;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const Rect cell = g.cell_rect(ix, iy);
      const Rect win = cell.expanded(margin);
      index.query(win, hits);
      local.clear();
      for (auto id : hits) {
        const Rect c = index.rects()[id].intersect(win);
        if (c.empty()) continue;
        local.push_back(c.translated(-cell.x0, -cell.y0));
      }
      std::sort(local.begin(), local.end());
      local.erase(std::unique(local.begin(), local.end()), local.end());
      const Rect clip = cell.intersect(die).translated(-cell.x0, -cell.y0);
      key.clear();
      key.insert(key.end(), {clip.x0, clip.y0, clip.x1, clip.y1});
      for (const Rect& r : local) key.insert(key.end(), {r.x0, r.y0, r.x1, r.y1});
      auto [it, inserted] = seen.try_emplace(key, static_cast<std::uint32_t>(tc.keys.size()));
      if (inserted) tc.keys.push_back(key);
      tc.cell_class[g.index(ix, iy)] = it->second;
    }
  }
  return tc;
}

inline std::vector<Rect> key_rects(const std::vector<Nm>& key) {
  std::vector<Rect> out;
  for (std::size_t k = 4; k + 3 < key.size(); k += 4) {
    out.push_back({key[k], key[k + 1], key[k + 2], key[k + 3]});
  }
  return out;
}

}  // namespace detail

/// Raw pattern-density grid of the given rectangles under a film model.
///
/// Each density cell is rasterized as its own tile with a halo wide enough
/// for the film's reach, so the result is independent of the tiling. Cells
/// whose neighborhoods hold identical geometry (after translation) are
/// evaluated once.
inline Grid raw_density_map(const RectIndex& index, const Rect& die,
                            const FilmStack& film, const StepSpec& spec,
                            Nm cell_size, const RasterOptions& opt,
                            DensityStats* stats = nullptr) {
  film.validate();
  spec.validate();
  if (opt.pixel <= 0) throw ConfigError("pixel size must be positive");
  if (cell_size % opt.pixel != 0) {
    throw ConfigError("pixel size must divide the density cell size");
  }
  Grid g = Grid::covering(die, cell_size, GridKind::Raw);
  const int halo = film.halo_pixels(spec, opt.pixel);
  const Nm margin = halo * opt.pixel;
  const auto classes = detail::classify_tiles(g, die, index, margin);

  std::vector<double> class_density(classes.keys.size(), 0.0);
  std::vector<std::uint32_t> todo;
  const Rect local_win{-margin, -margin, cell_size + margin, cell_size + margin};
  for (std::uint32_t c = 0; c < classes.keys.size(); ++c) {
    const auto& key = classes.keys[c];
    const std::size_t nrects = (key.size() - 4) / 4;
    if (nrects == 0) continue;
    if (nrects == 1 && key[4] == local_win.x0 && key[5] == local_win.y0 &&
        key[6] == local_win.x1 && key[7] == local_win.y1) {
      class_density[c] = 1.0;  // solid neighborhood
      continue;
    }
    todo.push_back(c);
  }
  parallel_for(todo.size(), opt.threads, [&](std::size_t t) {
    const auto& key = classes.keys[todo[t]];
    const auto rects = detail::key_rects(key);
    const RasterTile tile = rasterize_rects(rects, {0, 0, cell_size, cell_size}, opt.pixel, halo);
    const ElevationTile elev = film_elevation(tile, film, spec);
    class_density[todo[t]] = cell_pattern_density(elev, spec, {key[0], key[1], key[2], key[3]});
  });
  for (std::size_t i = 0; i < g.size(); ++i) g.values[i] = class_density[classes.cell_class[i]];
  if (stats) {
    stats->cells = g.size();
    stats->unique_tiles = classes.keys.size();
    stats->computed_tiles = todo.size();
  }
  return g;
}

/// Raw density of selected layout layers.
inline Grid raw_density_map(const LayoutDB& db, std::span<const int> layers,
                            const FilmStack& film, const StepSpec& spec,
                            Nm cell_size, const RasterOptions& opt,
                            DensityStats* stats = nullptr) {
  RectIndex index(layer_rects(db, layers), db.die, cell_size);
  return raw_density_map(index, db.die, film, spec, cell_size, opt, stats);
}

}  // namespace cmpfill
