#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cmpfill/error.hpp"
#include "cmpfill/geometry.hpp"

namespace cmpfill {

/// Occupancy bitmap of one raster window. Pixel (i, j) has its center at
/// (origin.x + (i + 1/2) * pixel, origin.y + (j + 1/2) * pixel); row j = 0 is
/// the bottom row. `halo` is the number of margin pixels on each side that
/// belong to neighboring tiles.
struct RasterTile {
  Point origin;
  Nm pixel = 1;
  int width = 0;
  int height = 0;
  int halo = 0;
  std::vector<std::uint8_t> bits;

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * width + i;
  }
  bool at(int i, int j) const { return bits[index(i, j)] != 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  /// The window covered by the tile, halo included.
  Rect window() const {
    return {origin.x, origin.y, origin.x + width * pixel,
            origin.y + height * pixel};
  }

  friend bool operator==(const RasterTile&, const RasterTile&) = default;
};

namespace detail {

inline Nm ceil_div(Nm a, Nm b) {
  // b > 0
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

}  // namespace detail

/// Sets every pixel whose center lies in some rectangle. A center on a lower
/// or left rectangle edge is inside; on an upper or right edge it is outside.
inline void paint_rects(RasterTile& tile, std::span<const Rect> rects) {
  const Nm p = tile.pixel;
  const Rect win = tile.window();
  for (const Rect& r : rects) {
    const Rect c = r.intersect(win);
    if (c.empty()) continue;
    const Nm i0 = std::max<Nm>(0, detail::ceil_div(2 * (c.x0 - win.x0) - p, 2 * p));
    const Nm i1 = std::min<Nm>(tile.width, detail::ceil_div(2 * (c.x1 - win.x0) - p, 2 * p));
    const Nm j0 = std::max<Nm>(0, detail::ceil_div(2 * (c.y0 - win.y0) - p, 2 * p));
    const Nm j1 = std::min<Nm>(tile.height, detail::ceil_div(2 * (c.y1 - win.y0) - p, 2 * p));
    for (Nm j = j0; j < j1; ++j) {
      auto* row = tile.bits.data() + static_cast<std::size_t>(j) * tile.width;
      std::fill(row + i0, row + std::max(i0, i1), std::uint8_t{1});
    }
  }
}

/// Rasterizes pre-decomposed rectangles into `window` (plus `halo` pixels of
/// margin on every side).
inline RasterTile rasterize_rects(std::span<const Rect> rects,
                                  const Rect& window, Nm pixel, int halo = 0) {
  if (pixel <= 0) throw ConfigError("pixel size must be positive");
  if (window.empty()) throw ConfigError("raster window is empty");
  if (window.width() % pixel != 0 || window.height() % pixel != 0) {
    throw ConfigError("pixel size " + std::to_string(pixel) +
                      " nm does not divide the tile dimensions");
  }
  if (halo < 0) throw ConfigError("negative halo");
  RasterTile t;
  t.pixel = pixel;
  t.halo = halo;
  t.origin = {window.x0 - halo * pixel, window.y0 - halo * pixel};
  t.width = static_cast<int>(window.width() / pixel) + 2 * halo;
  t.height = static_cast<int>(window.height() / pixel) + 2 * halo;
  t.bits.assign(static_cast<std::size_t>(t.width) * t.height, 0);
  paint_rects(t, rects);
  return t;
}

/// Center-sampling rasterization of one layer. An unknown layer yields an
/// empty tile.
inline RasterTile rasterize_tile(const LayoutDB& db, int layer,
                                 const Rect& window, Nm pixel, int halo = 0) {
  const int ids[] = {layer};
  const auto rects = layer_rects(db, ids);
  return rasterize_rects(rects, window, pixel, halo);
}

}  // namespace cmpfill
