#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "cmpfill/error.hpp"

namespace cmpfill {

/// Length in integer nanometers. Every layout coordinate is one of these.
using Nm = std::int64_t;

struct Point {
  Nm x = 0;
  Nm y = 0;

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

/// Axis-aligned rectangle [x0, x1) x [y0, y1).
struct Rect {
  Nm x0 = 0;
  Nm y0 = 0;
  Nm x1 = 0;
  Nm y1 = 0;

  Nm width() const { return x1 - x0; }
  Nm height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  std::int64_t area() const { return empty() ? 0 : width() * height(); }

  bool contains(const Rect& o) const {
    return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1;
  }
  bool contains(Point p) const {
    return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1;
  }
  /// Positive-area overlap.
  bool overlaps(const Rect& o) const {
    return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
  }
  Rect intersect(const Rect& o) const {
    return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1),
            std::min(y1, o.y1)};
  }
  Rect expanded(Nm d) const { return {x0 - d, y0 - d, x1 + d, y1 + d}; }
  Rect translated(Nm dx, Nm dy) const {
    return {x0 + dx, y0 + dy, x1 + dx, y1 + dy};
  }

  friend bool operator==(const Rect&, const Rect&) = default;
  friend auto operator<=>(const Rect&, const Rect&) = default;
};

/// Squared Euclidean gap between two rectangles (0 when they touch or overlap).
inline std::int64_t rect_gap_sq(const Rect& a, const Rect& b) {
  const Nm dx = std::max<Nm>({0, a.x0 - b.x1, b.x0 - a.x1});
  const Nm dy = std::max<Nm>({0, a.y0 - b.y1, b.y0 - a.y1});
  return dx * dx + dy * dy;
}

/// Rectilinear polygon. The ring is implicitly closed: the last vertex is not
/// repeated.
struct Polygon {
  std::vector<Point> vertices;
  int layer = 0;

  friend bool operator==(const Polygon&, const Polygon&) = default;
};

namespace detail {

inline __int128 twice_signed_area(std::span<const Point> v) {
  __int128 acc = 0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    acc += static_cast<__int128>(a.x) * b.y - static_cast<__int128>(b.x) * a.y;
  }
  return acc;
}

// Axis-parallel segments [a,b] and [c,d]; true if they share any point.
inline bool segments_touch(Point a, Point b, Point c, Point d) {
  const Nm ax0 = std::min(a.x, b.x), ax1 = std::max(a.x, b.x);
  const Nm ay0 = std::min(a.y, b.y), ay1 = std::max(a.y, b.y);
  const Nm cx0 = std::min(c.x, d.x), cx1 = std::max(c.x, d.x);
  const Nm cy0 = std::min(c.y, d.y), cy1 = std::max(c.y, d.y);
  return ax0 <= cx1 && cx0 <= ax1 && ay0 <= cy1 && cy0 <= ay1;
}

}  // namespace detail

inline Rect bbox(const Polygon& p) {
  Rect r{p.vertices.front().x, p.vertices.front().y, p.vertices.front().x,
         p.vertices.front().y};
  for (const Point& v : p.vertices) {
    r.x0 = std::min(r.x0, v.x);
    r.y0 = std::min(r.y0, v.y);
    r.x1 = std::max(r.x1, v.x);
    r.y1 = std::max(r.y1, v.y);
  }
  return r;
}

/// Throws ValidationError unless the ring is a simple rectilinear polygon with
/// at least four vertices and nonzero area.
inline void validate(const Polygon& p) {
  const auto& v = p.vertices;
  const std::size_t n = v.size();
  if (p.layer < 0) throw ValidationError("negative layer id");
  if (n < 4) {
    throw ValidationError("polygon has " + std::to_string(n) +
                          " vertices; at least 4 required");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % n];
    if (a == b) throw ValidationError("repeated vertex in polygon ring");
    if (a.x != b.x && a.y != b.y) {
      throw ValidationError("non-rectilinear edge from (" +
                            std::to_string(a.x) + "," + std::to_string(a.y) +
                            ") to (" + std::to_string(b.x) + "," +
                            std::to_string(b.y) + ")");
    }
  }
  if (detail::twice_signed_area(v) == 0) {
    throw ValidationError("polygon has zero area");
  }
  // Non-adjacent edges must not touch; adjacent edges may only share their
  // common vertex (no backtracking onto the previous edge).
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = v[i], b = v[(i + 1) % n];
    const Point c = v[(i + 1) % n], d = v[(i + 2) % n];
    const bool same_axis = (a.x == b.x) == (c.x == d.x);
    if (same_axis) {
      // Collinear continuation is fine, reversal is not.
      const Nm d1 = (b.x - a.x) + (b.y - a.y);
      const Nm d2 = (d.x - c.x) + (d.y - c.y);
      if ((d1 > 0) != (d2 > 0)) {
        throw ValidationError("polygon edge folds back on itself");
      }
    }
  }
  if (n <= 4096) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (detail::segments_touch(v[i], v[(i + 1) % n], v[j],
                                   v[(j + 1) % n])) {
          throw ValidationError("self-intersecting polygon");
        }
      }
    }
  }
}

/// Exact shoelace area in nm^2; always positive for a valid polygon.
inline std::int64_t polygon_area(const Polygon& p) {
  validate(p);
  __int128 a = detail::twice_signed_area(p.vertices);
  if (a < 0) a = -a;
  return static_cast<std::int64_t>(a / 2);
}

/// Canonical vertex order: collinear vertices removed, counterclockwise,
/// starting at the lexicographically smallest (x, y) vertex.
inline Polygon canonical(Polygon p) {
  auto& v = p.vertices;
  // Drop exact duplicates and collinear interior vertices until stable.
  bool changed = true;
  while (changed && v.size() >= 3) {
    changed = false;
    std::vector<Point> out;
    out.reserve(v.size());
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& prev = v[(i + n - 1) % n];
      const Point& cur = v[i];
      const Point& next = v[(i + 1) % n];
      const bool dup = cur == prev;
      const bool collinear = (prev.x == cur.x && cur.x == next.x) ||
                             (prev.y == cur.y && cur.y == next.y);
      if (dup || collinear) {
        changed = true;
        continue;
      }
      out.push_back(cur);
    }
    if (changed) v = std::move(out);
  }
  if (v.size() < 3) return p;
  if (detail::twice_signed_area(v) < 0) std::reverse(v.begin(), v.end());
  auto first = std::min_element(v.begin(), v.end());
  std::rotate(v.begin(), first, v.end());
  return p;
}

inline Polygon make_rect_polygon(const Rect& r, int layer) {
  return Polygon{{{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}},
                 layer};
}

/// If the polygon is an axis-aligned rectangle, returns it.
inline bool as_rect(const Polygon& p, Rect& out) {
  if (p.vertices.size() != 4) return false;
  const Rect b = bbox(p);
  for (const Point& v : p.vertices) {
    if ((v.x != b.x0 && v.x != b.x1) || (v.y != b.y0 && v.y != b.y1)) {
      return false;
    }
  }
  out = b;
  return !b.empty();
}

/// Splits a rectilinear polygon into disjoint half-open rectangles by
/// horizontal slabs; vertically adjacent slabs with identical spans are merged.
inline std::vector<Rect> decompose_rects(const Polygon& p) {
  Rect single;
  if (as_rect(p, single)) return {single};

  const auto& v = p.vertices;
  const std::size_t n = v.size();
  std::vector<Nm> ys;
  ys.reserve(n);
  for (const Point& pt : v) ys.push_back(pt.y);
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  struct Open {
    Nm x0, x1, y0;
  };
  std::vector<Open> open;
  std::vector<Rect> out;
  std::vector<Nm> xs;
  for (std::size_t s = 0; s + 1 < ys.size(); ++s) {
    const Nm ya = ys[s];
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = v[i];
      const Point& b = v[(i + 1) % n];
      if (a.x != b.x) continue;
      const Nm lo = std::min(a.y, b.y), hi = std::max(a.y, b.y);
      if (lo <= ya && ya < hi) xs.push_back(a.x);
    }
    std::sort(xs.begin(), xs.end());
    std::vector<Open> next;
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const Nm x0 = xs[k], x1 = xs[k + 1];
      if (x0 == x1) continue;
      auto it = std::find_if(open.begin(), open.end(), [&](const Open& o) {
        return o.x0 == x0 && o.x1 == x1;
      });
      if (it != open.end()) {
        next.push_back(*it);
        open.erase(it);
      } else {
        next.push_back({x0, x1, ya});
      }
    }
    for (const Open& o : open) out.push_back({o.x0, o.y0, o.x1, ya});
    open = std::move(next);
  }
  if (!open.empty()) {
    for (const Open& o : open) out.push_back({o.x0, o.y0, o.x1, ys.back()});
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Layered rectilinear polygon database. Coordinates are integer nanometers;
/// nm_per_db records the source file's database unit.
struct LayoutDB {
  double nm_per_db = 1.0;
  Rect die;
  std::map<int, std::vector<Polygon>> layers;

  void add(Polygon p) { layers[p.layer].push_back(std::move(p)); }

  std::size_t polygon_count() const {
    std::size_t n = 0;
    for (const auto& [id, polys] : layers) n += polys.size();
    return n;
  }
  std::size_t vertex_count() const {
    std::size_t n = 0;
    for (const auto& [id, polys] : layers) {
      for (const auto& p : polys) n += p.vertices.size();
    }
    return n;
  }
  bool has_layer(int layer) const {
    auto it = layers.find(layer);
    return it != layers.end() && !it->second.empty();
  }

  /// Canonical vertex order per polygon and polygons sorted by
  /// (bbox x0, bbox y0, vertices) within each layer.
  void canonicalize() {
    for (auto& [id, polys] : layers) {
      for (auto& p : polys) p = canonical(std::move(p));
      std::sort(polys.begin(), polys.end(),
                [](const Polygon& a, const Polygon& b) {
                  const Rect ra = bbox(a), rb = bbox(b);
                  return std::tie(ra.x0, ra.y0, a.vertices) <
                         std::tie(rb.x0, rb.y0, b.vertices);
                });
    }
    std::erase_if(layers, [](const auto& kv) { return kv.second.empty(); });
  }

  /// Validates every polygon and checks it lies inside the die.
  void validate() const {
    if (die.empty()) throw ValidationError("die bounding box is empty");
    for (const auto& [id, polys] : layers) {
      for (const auto& p : polys) {
        cmpfill::validate(p);
        if (p.layer != id) throw ValidationError("polygon layer mismatch");
        if (!die.contains(bbox(p))) {
          throw ValidationError("polygon on layer " + std::to_string(id) +
                                " lies outside the die");
        }
      }
    }
  }

  friend bool operator==(const LayoutDB&, const LayoutDB&) = default;
};

/// All polygons on the given layers, decomposed to rectangles.
inline std::vector<Rect> layer_rects(const LayoutDB& db,
                                     std::span<const int> layer_ids) {
  std::vector<Rect> out;
  for (int id : layer_ids) {
    auto it = db.layers.find(id);
    if (it == db.layers.end()) continue;
    for (const Polygon& p : it->second) {
      auto rs = decompose_rects(p);
      out.insert(out.end(), rs.begin(), rs.end());
    }
  }
  return out;
}

/// Uniform-bin spatial index over rectangles.
class RectIndex {
 public:
  RectIndex() = default;

  RectIndex(std::vector<Rect> rects, const Rect& bounds, Nm bin)
      : rects_(std::move(rects)), bounds_(bounds), bin_(bin) {
    if (bin_ <= 0) throw ConfigError("spatial index bin must be positive");
    nbx_ = static_cast<int>((bounds_.width() + bin_ - 1) / bin_);
    nby_ = static_cast<int>((bounds_.height() + bin_ - 1) / bin_);
    nbx_ = std::max(nbx_, 1);
    nby_ = std::max(nby_, 1);
    bins_.assign(static_cast<std::size_t>(nbx_) * nby_, {});
    for (std::uint32_t i = 0; i < rects_.size(); ++i) {
      auto [bx0, by0, bx1, by1] = bin_range(rects_[i]);
      for (int by = by0; by <= by1; ++by) {
        for (int bx = bx0; bx <= bx1; ++bx) {
          bins_[static_cast<std::size_t>(by) * nbx_ + bx].push_back(i);
        }
      }
    }
  }

  const std::vector<Rect>& rects() const { return rects_; }

  /// Indices of rectangles whose closed extent meets the closed window,
  /// sorted ascending and unique.
  void query(const Rect& window, std::vector<std::uint32_t>& out) const {
    out.clear();
    if (rects_.empty()) return;
    auto [bx0, by0, bx1, by1] = bin_range(window);
    for (int by = by0; by <= by1; ++by) {
      for (int bx = bx0; bx <= bx1; ++bx) {
        for (std::uint32_t i : bins_[static_cast<std::size_t>(by) * nbx_ + bx]) {
          const Rect& r = rects_[i];
          if (r.x0 <= window.x1 && window.x0 <= r.x1 && r.y0 <= window.y1 &&
              window.y0 <= r.y1) {
            out.push_back(i);
          }
        }
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }

 private:
  std::tuple<int, int, int, int> bin_range(const Rect& r) const {
    auto clampx = [&](Nm x) {
      return static_cast<int>(
          std::clamp<Nm>((x - bounds_.x0) / bin_, 0, nbx_ - 1));
    };
    auto clampy = [&](Nm y) {
      return static_cast<int>(
          std::clamp<Nm>((y - bounds_.y0) / bin_, 0, nby_ - 1));
    };
    return {clampx(r.x0), clampy(r.y0), clampx(r.x1), clampy(r.y1)};
  }

  std::vector<Rect> rects_;
  Rect bounds_;
  Nm bin_ = 1;
  int nbx_ = 0;
  int nby_ = 0;
  std::vector<std::vector<std::uint32_t>> bins_;
};

}  // namespace cmpfill
