#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cmpfill/error.hpp"
#include "cmpfill/raster.hpp"

namespace cmpfill {

enum class DtMode {
  Interior,  ///< set pixels: distance to the nearest background pixel
  Exterior,  ///< background pixels: distance to the nearest set pixel
};

/// Per-pixel squared Euclidean distance, in squared pixel units, between
/// pixel centers. Pixels that are their own nearest site hold 0; pixels with
/// no site anywhere in the tile hold kNoSite.
struct DistanceMap {
  static constexpr std::int64_t kNoSite = std::numeric_limits<std::int64_t>::max();

  Point origin;
  Nm pixel = 1;
  int width = 0;
  int height = 0;
  int halo = 0;
  std::vector<std::int64_t> sq;

  std::int64_t at(int i, int j) const {
    return sq[static_cast<std::size_t>(j) * width + i];
  }
  /// Center-to-center distance in nm (infinity for kNoSite).
  double nm(int i, int j) const {
    const auto d = at(i, j);
    if (d == kNoSite) return std::numeric_limits<double>::infinity();
    return std::sqrt(static_cast<double>(d)) * static_cast<double>(pixel);
  }
};

/// Throws ContractViolation unless `halo` pixels cover `reach` nm plus one
/// pixel.
inline void require_halo(int halo, Nm pixel, Nm reach) {
  if (reach <= 0) return;
  const Nm needed = (reach + pixel - 1) / pixel + 1;
  if (halo < needed) {
    throw ContractViolation("halo of " + std::to_string(halo) +
                            " pixels cannot support a model reach of " +
                            std::to_string(reach) + " nm (needs " +
                            std::to_string(needed) + " pixels)");
  }
}

/// Exact squared Euclidean distance transform (Meijster, Roerdink and
/// Hesselink two-pass algorithm, integer arithmetic throughout).
///
/// If `max_reach` is positive the tile's halo must support it; distances up
/// to that reach are then exact regardless of what lies beyond the tile.
inline DistanceMap distance_transform(const RasterTile& tile, DtMode mode,
                                      Nm max_reach = 0) {
  require_halo(tile.halo, tile.pixel, max_reach);
  const int w = tile.width, h = tile.height;
  DistanceMap out;
  out.origin = tile.origin;
  out.pixel = tile.pixel;
  out.width = w;
  out.height = h;
  out.halo = tile.halo;
  out.sq.assign(static_cast<std::size_t>(w) * h, 0);
  if (w == 0 || h == 0) return out;

  const std::uint8_t site_value = mode == DtMode::Interior ? 0 : 1;
  const std::int64_t inf = static_cast<std::int64_t>(w) + h;

  // Column pass: g = vertical distance to the nearest site in the column.
  std::vector<std::int64_t> g(static_cast<std::size_t>(w) * h);
  for (int x = 0; x < w; ++x) {
    auto site = [&](int y) { return tile.bits[static_cast<std::size_t>(y) * w + x] == site_value; };
    auto G = [&](int y) -> std::int64_t& { return g[static_cast<std::size_t>(y) * w + x]; };
    G(0) = site(0) ? 0 : inf;
    for (int y = 1; y < h; ++y) G(y) = site(y) ? 0 : std::min(inf, 1 + G(y - 1));
    for (int y = h - 2; y >= 0; --y) {
      if (G(y + 1) < G(y)) G(y) = 1 + G(y + 1);
    }
  }

  // Row pass: lower envelope of parabolas f(x, i) = (x - i)^2 + g(i)^2.
  std::vector<int> s(w), t(w);
  std::vector<std::int64_t> gr(w);
  const std::int64_t inf_sq = inf * inf;
  auto floor_div = [](std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) gr[x] = g[static_cast<std::size_t>(y) * w + x];
    auto f = [&](std::int64_t x, int i) {
      return (x - i) * (x - i) + gr[i] * gr[i];
    };
    auto sep = [&](int i, int u) {
      return floor_div(static_cast<std::int64_t>(u) * u -
                           static_cast<std::int64_t>(i) * i + gr[u] * gr[u] -
                           gr[i] * gr[i],
                       2 * static_cast<std::int64_t>(u - i));
    };
    int q = 0;
    s[0] = 0;
    t[0] = 0;
    for (int u = 1; u < w; ++u) {
      while (q >= 0 && f(t[q], s[q]) > f(t[q], u)) --q;
      if (q < 0) {
        q = 0;
        s[0] = u;
      } else {
        const std::int64_t wpos = 1 + sep(s[q], u);
        if (wpos < w) {
          ++q;
          s[q] = u;
          t[q] = static_cast<int>(wpos);
        }
      }
    }
    for (int u = w - 1; u >= 0; --u) {
      const std::int64_t d = f(u, s[q]);
      out.sq[static_cast<std::size_t>(y) * w + u] = d >= inf_sq ? DistanceMap::kNoSite : d;
      if (u == t[q]) --q;
    }
  }
  return out;
}

}  // namespace cmpfill
