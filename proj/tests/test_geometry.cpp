#include <gtest/gtest.h>

#include <random>

#include "cmpfill/distance.hpp"
#include "cmpfill/geometry.hpp"
#include "cmpfill/raster.hpp"
#include "oracles.hpp"

using namespace cmpfill;

namespace {

Polygon poly(std::initializer_list<Point> pts, int layer = 1) { return Polygon{pts, layer}; }

// Random rectilinear polygon: union-free staircase built from a random
// monotone profile above a base line.
Polygon random_staircase(std::mt19937_64& rng) {
  const int steps = 1 + static_cast<int>(rng() % 6);
  std::vector<Point> top;
  Nm x = 0;
  for (int i = 0; i < steps; ++i) {
    const Nm h = 1 + static_cast<Nm>(rng() % 50);
    const Nm w = 1 + static_cast<Nm>(rng() % 50);
    top.push_back({x, h});
    top.push_back({x + w, h});
    x += w;
  }
  std::vector<Point> v{{0, 0}, {x, 0}};
  for (auto it = top.rbegin(); it != top.rend(); ++it) v.push_back(*it);
  return canonical(Polygon{v, 1});
}

}  // namespace

TEST(Rect, BasicOps) {
  Rect a{0, 0, 10, 5};
  EXPECT_EQ(a.width(), 10);
  EXPECT_EQ(a.height(), 5);
  EXPECT_EQ(a.area(), 50);
  EXPECT_FALSE(a.empty());
  EXPECT_TRUE((Rect{3, 3, 3, 9}).empty());
  EXPECT_TRUE(a.contains(Rect{1, 1, 10, 5}));
  EXPECT_FALSE(a.contains(Rect{1, 1, 11, 5}));
  EXPECT_TRUE(a.overlaps(Rect{9, 4, 20, 20}));
  EXPECT_FALSE(a.overlaps(Rect{10, 0, 20, 5}));  // shared edge only
  EXPECT_EQ(a.intersect(Rect{5, 2, 20, 20}), (Rect{5, 2, 10, 5}));
}

TEST(Rect, GapSquared) {
  const Rect a{0, 0, 10, 10};
  EXPECT_EQ(rect_gap_sq(a, Rect{5, 5, 6, 6}), 0);
  EXPECT_EQ(rect_gap_sq(a, Rect{13, 0, 20, 10}), 9);
  EXPECT_EQ(rect_gap_sq(a, Rect{13, 14, 20, 20}), 9 + 16);
  EXPECT_EQ(rect_gap_sq(a, Rect{10, 10, 20, 20}), 0);  // corner touch
}

TEST(Polygon, ValidateRejects) {
  EXPECT_THROW(validate(poly({{0, 0}, {10, 0}, {10, 10}})), ValidationError);
  EXPECT_THROW(validate(poly({{0, 0}, {10, 0}, {10, 10}, {5, 12}})), ValidationError);
  EXPECT_THROW(validate(poly({{0, 0}, {10, 0}, {10, 0}, {0, 0}})), ValidationError);
  // zero area: collapsed rectangle
  EXPECT_THROW(validate(poly({{0, 0}, {10, 0}, {20, 0}, {5, 0}})), ValidationError);
  // bow-tie made of rectilinear edges: self-crossing
  EXPECT_THROW(validate(poly({{0, 0}, {10, 0}, {10, 10}, {5, 10}, {5, -5}, {0, -5}})), ValidationError);
  EXPECT_NO_THROW(validate(poly({{0, 0}, {10, 0}, {10, 10}, {0, 10}})));
}

TEST(Polygon, CanonicalForm) {
  // clockwise, starting elsewhere, with a collinear vertex
  const auto c = canonical(poly({{10, 10}, {10, 0}, {5, 0}, {0, 0}, {0, 10}}));
  const std::vector<Point> want{{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  EXPECT_EQ(c.vertices, want);
  EXPECT_EQ(canonical(c), c);
}

TEST(Polygon, AreaMatchesCompressionOracle) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto p = random_staircase(rng);
    ASSERT_NO_THROW(validate(p));
    EXPECT_EQ(polygon_area(p), oracle::area(p));
  }
  const auto L = poly({{0, 0}, {30, 0}, {30, 10}, {10, 10}, {10, 40}, {0, 40}});
  EXPECT_EQ(polygon_area(L), 30 * 10 + 10 * 30);
  EXPECT_EQ(oracle::area(L), 600);
}

TEST(Polygon, DecompositionCoversExactly) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_staircase(rng);
    const auto rs = decompose_rects(p);
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      sum += rs[i].area();
      for (std::size_t j = i + 1; j < rs.size(); ++j) EXPECT_FALSE(rs[i].overlaps(rs[j]));
    }
    EXPECT_EQ(sum, oracle::area(p));
    // every sample point inside the polygon is covered by some rect
    const Rect b = bbox(p);
    for (Nm y = b.y0; y < b.y1; y += 3)
      for (Nm x = b.x0; x < b.x1; x += 3) {
        const bool in = oracle::inside(p, x + 0.5, y + 0.5);
        bool cov = false;
        for (const Rect& r : rs) cov |= r.contains(Point{x, y}) ;
        EXPECT_EQ(in, cov);
      }
  }
}

TEST(RectIndex, QueryMatchesScan) {
  std::mt19937_64 rng(3);
  std::vector<Rect> rects;
  for (int i = 0; i < 500; ++i) {
    const Nm x = rng() % 10000, y = rng() % 10000;
    rects.push_back({x, y, x + 1 + Nm(rng() % 800), y + 1 + Nm(rng() % 800)});
  }
  RectIndex idx(rects, {0, 0, 11000, 11000}, 700);
  std::vector<std::uint32_t> got;
  for (int q = 0; q < 200; ++q) {
    const Nm x = rng() % 11000, y = rng() % 11000;
    const Rect w{x, y, x + Nm(rng() % 2000), y + Nm(rng() % 2000)};
    idx.query(w, got);
    std::vector<std::uint32_t> want;
    for (std::uint32_t i = 0; i < rects.size(); ++i) {
      const Rect& r = rects[i];
      if (r.x0 <= w.x1 && w.x0 <= r.x1 && r.y0 <= w.y1 && w.y0 <= r.y1) want.push_back(i);
    }
    EXPECT_EQ(got, want);
  }
}

TEST(Raster, CenterSamplingTieRule) {
  // pixel 10: centers at 5, 15, ...; a rect [5, 15) covers the pixel centered at 5 only
  const std::vector<Rect> rs{{5, 5, 15, 15}};
  const auto t = rasterize_rects(rs, {0, 0, 40, 40}, 10);
  EXPECT_EQ(t.count(), 1u);
  EXPECT_TRUE(t.at(0, 0));
}

TEST(Raster, MatchesPerPixelOracle) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<Rect> rs;
    for (int i = 0; i < 8; ++i) {
      const Nm x = Nm(rng() % 700) - 100, y = Nm(rng() % 700) - 100;
      rs.push_back({x, y, x + 1 + Nm(rng() % 300), y + 1 + Nm(rng() % 300)});
    }
    const Nm p = 10 + Nm(rng() % 3) * 5;  // 10, 15, 20
    const int halo = static_cast<int>(rng() % 4);
    const Rect win{0, 0, 30 * p, 20 * p};
    const auto tile = rasterize_rects(rs, win, p, halo);
    EXPECT_EQ(tile.bits, oracle::raster(rs, tile.origin, p, tile.width, tile.height));
  }
}

TEST(Raster, RejectsNonDividingPixel) {
  const std::vector<Rect> rs;
  EXPECT_THROW(rasterize_rects(rs, {0, 0, 105, 100}, 10), ConfigError);
  EXPECT_THROW(rasterize_rects(rs, {0, 0, 100, 100}, 0), ConfigError);
}

TEST(Raster, SinglePixelSquare) {
  LayoutDB db;
  db.die = {0, 0, 100, 100};
  db.add(make_rect_polygon({30, 30, 35, 35}, 1));
  const auto t = rasterize_tile(db, 1, {0, 0, 100, 100}, 5);
  EXPECT_EQ(t.count(), 1u);
  EXPECT_TRUE(t.at(6, 6));
  EXPECT_EQ(rasterize_tile(db, 2, {0, 0, 100, 100}, 5).count(), 0u);
}

TEST(Distance, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 30; ++t) {
    const int w = 1 + static_cast<int>(rng() % 40), h = 1 + static_cast<int>(rng() % 40);
    RasterTile tile;
    tile.width = w;
    tile.height = h;
    tile.bits.resize(static_cast<std::size_t>(w) * h);
    const unsigned density = 1 + rng() % 60;
    for (auto& b : tile.bits) b = (rng() % 100) < density;
    for (auto mode : {DtMode::Interior, DtMode::Exterior}) {
      const auto dm = distance_transform(tile, mode);
      const auto want = oracle::edt(tile.bits, w, h, mode == DtMode::Interior ? 0 : 1);
      for (std::size_t k = 0; k < want.size(); ++k) {
        const auto got = dm.sq[k];
        EXPECT_EQ(got == DistanceMap::kNoSite ? oracle::kNone : got, want[k]);
      }
    }
  }
}

TEST(Distance, EmptyAndFullTiles) {
  RasterTile tile;
  tile.width = 5;
  tile.height = 4;
  tile.bits.assign(20, 0);
  auto ext = distance_transform(tile, DtMode::Exterior);
  for (auto v : ext.sq) EXPECT_EQ(v, DistanceMap::kNoSite);
  auto in = distance_transform(tile, DtMode::Interior);
  for (auto v : in.sq) EXPECT_EQ(v, 0);
}

TEST(Distance, IsolatedPixelExterior) {
  RasterTile tile;
  tile.width = tile.height = 7;
  tile.bits.assign(49, 0);
  tile.bits[3 * 7 + 3] = 1;
  const auto dm = distance_transform(tile, DtMode::Exterior);
  EXPECT_EQ(dm.at(3, 3), 0);
  EXPECT_EQ(dm.at(0, 0), 18);
  EXPECT_EQ(dm.at(6, 3), 9);
}

TEST(Distance, HaloContract) {
  RasterTile tile;
  tile.pixel = 25;
  tile.width = tile.height = 10;
  tile.halo = 2;
  tile.bits.assign(100, 0);
  EXPECT_THROW(distance_transform(tile, DtMode::Exterior, 500), ContractViolation);
  EXPECT_NO_THROW(distance_transform(tile, DtMode::Exterior, 25));
}
