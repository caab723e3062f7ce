#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "cmpfill/density_engine.hpp"
#include "cmpfill/export.hpp"
#include "cmpfill/fixtures.hpp"
#include "cmpfill/grid.hpp"
#include "oracles.hpp"

using namespace cmpfill;

namespace {

Grid random_grid(std::mt19937_64& rng, int nx, int ny, Nm cell = 1000) {
  Grid g;
  g.cell_size = cell;
  g.nx = nx;
  g.ny = ny;
  g.kind = GridKind::Raw;
  g.values.resize(static_cast<std::size_t>(nx) * ny);
  for (auto& v : g.values) v = static_cast<double>(rng() % 1000001) / 1e6;
  return g;
}

}  // namespace

TEST(Kernel, SingleCellAtTwoCells) {
  const auto k = build_kernel({2000}, 1000);
  EXPECT_EQ(k.radius, 0);
  ASSERT_EQ(k.weights.size(), 1u);
  EXPECT_EQ(k.weights[0], 1.0);
  EXPECT_THROW(build_kernel({1999}, 1000), ConfigError);
}

TEST(Kernel, DefaultWindowSize) {
  const auto k = build_kernel({}, 40'000);
  EXPECT_EQ(k.dim(), 63);
  long double s = 0;
  for (double w : k.weights) s += w;
  EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-12);
  // symmetric, peak at the center, zero in the corners
  EXPECT_EQ(k.at(5, 7), k.at(-7, 5));
  EXPECT_EQ(*std::max_element(k.weights.begin(), k.weights.end()), k.at(0, 0));
  EXPECT_EQ(k.at(31, 31), 0.0);
}

TEST(Kernel, FlatLimitIsUniformOnDisk) {
  WindowSpec w;
  w.diameter = 9000;
  w.flat = true;
  const auto k = build_kernel(w, 1000);
  double v = -1;
  int n = 0;
  for (int dy = -k.radius; dy <= k.radius; ++dy)
    for (int dx = -k.radius; dx <= k.radius; ++dx) {
      const bool in = 4 * (dx * dx + dy * dy) * 1000 * 1000 < 9000 * 9000;
      if (!in) {
        EXPECT_EQ(k.at(dx, dy), 0.0);
        continue;
      }
      ++n;
      if (v < 0) v = k.at(dx, dy);
      EXPECT_DOUBLE_EQ(k.at(dx, dy), v);
    }
  EXPECT_NEAR(v * n, 1.0, 1e-12);
}

TEST(Effective, UniformStaysUniform) {
  std::mt19937_64 rng1(1);
  Grid g = random_grid(rng1, 37, 23);
  for (auto& v : g.values) v = 0.4;
  for (auto m : {ConvolutionMethod::Fft, ConvolutionMethod::Direct}) {
    const auto e = effective_density(g, {9000}, m);
    for (double v : e.values) EXPECT_NEAR(v, 0.4, 1e-12);
  }
}

TEST(Effective, MatchesRenormalizedDirectOracle) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const int nx = 16 + static_cast<int>(rng() % 49), ny = 16 + static_cast<int>(rng() % 49);
    const Grid g = random_grid(rng, nx, ny);
    const WindowSpec w{Nm(3000 + rng() % 12000)};
    const auto k = build_kernel(w, 1000);
    const auto want = oracle::window_average(g.values, nx, ny, k.weights, k.radius);
    for (auto m : {ConvolutionMethod::Fft, ConvolutionMethod::Direct}) {
      const auto e = effective_density(g, w, m);
      for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(e.values[i], want[i], 1e-9 * std::max(1e-3, want[i]));
    }
  }
}

TEST(Effective, DeltaResponseIsKernelImage) {
  std::mt19937_64 rng2(2);
  Grid g = random_grid(rng2, 41, 41);
  std::fill(g.values.begin(), g.values.end(), 0.0);
  g.at(20, 20) = 1.0;
  const WindowSpec w{11000};
  const auto k = build_kernel(w, 1000);
  const auto e = effective_density(g, w);
  // interior cells: full kernel support, so the response is the kernel itself
  for (int dy = -k.radius; dy <= k.radius; ++dy)
    for (int dx = -k.radius; dx <= k.radius; ++dx) EXPECT_NEAR(e.at(20 + dx, 20 + dy), k.at(dx, dy), 1e-14);
  const auto prof = line_profile(e, Axis::X, 20'500);
  for (int dx = -k.radius; dx <= k.radius; ++dx) EXPECT_NEAR(prof[20 + dx].value, k.at(dx, 0), 1e-14);
}

TEST(Effective, ConvexCombinationAndMonotone) {
  std::mt19937_64 rng(5);
  const Grid g = random_grid(rng, 30, 20);
  const auto e = effective_density(g, {7000});
  auto [lo, hi] = min_max(g);
  for (double v : e.values) {
    EXPECT_GE(v, lo);
    EXPECT_LE(v, hi);
  }
  Grid g2 = g;
  g2.at(3, 4) += 0.2;
  const auto e2 = effective_density(g2, {7000});
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_GE(e2.values[i], e.values[i] - 1e-15);
}

TEST(Effective, SymmetricLayoutSymmetricMap) {
  std::mt19937_64 rng3(3);
  Grid g = random_grid(rng3, 24, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 12; ++x) g.at(23 - x, y) = g.at(x, y);
  const auto e = effective_density(g, {9000});
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 12; ++x) EXPECT_NEAR(e.at(x, y), e.at(23 - x, y), 1e-12);
}

TEST(Effective, AdjointIsTranspose) {
  std::mt19937_64 rng(6);
  const int nx = 13, ny = 9;
  EffectiveOperator op(nx, ny, build_kernel({5000}, 1000));
  std::vector<double> x(nx * ny), y(nx * ny);
  for (auto& v : x) v = static_cast<double>(rng() % 1000) / 1000;
  for (auto& v : y) v = static_cast<double>(rng() % 1000) / 1000;
  const auto ax = op.apply(x), aty = op.adjoint(y);
  double l = 0, r = 0;
  for (int i = 0; i < nx * ny; ++i) {
    l += ax[i] * y[i];
    r += x[i] * aty[i];
  }
  EXPECT_NEAR(l, r, 1e-12);
}

TEST(Histogram, Examples) {
  const std::vector<double> v{0.25, 0.25, 0.75, 0.75};
  const auto h = histogram(v, 2, std::pair{0.0, 1.0});
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{2, 2}));
  const std::vector<double> same(10, 0.3);
  const auto hs = histogram(same, 5);
  EXPECT_EQ(std::count_if(hs.counts.begin(), hs.counts.end(), [](auto c) { return c > 0; }), 1);
  // boundary values go up, except the top edge
  const std::vector<double> edges{0.0, 0.5, 1.0};
  const auto hb = histogram(edges, 2, std::pair{0.0, 1.0});
  EXPECT_EQ(hb.counts, (std::vector<std::size_t>{1, 2}));
  const std::vector<double> none;
  EXPECT_THROW(histogram(none, 3), ConfigError);
  EXPECT_THROW(histogram(v, 0), ConfigError);
}

TEST(Histogram, MatchesNaiveScan) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(1 + rng() % 500);
    for (auto& x : v) x = static_cast<double>(rng() % 97) / 96.0;
    const int bins = 1 + static_cast<int>(rng() % 20);
    const auto h = histogram(v, bins);
    EXPECT_EQ(h.counts, oracle::histogram(v, h.edges));
    EXPECT_EQ(h.total(), v.size());
  }
}

TEST(Profile, RampAndErrors) {
  std::mt19937_64 rng4(4);
  Grid g = random_grid(rng4, 5, 3);
  g.origin = {100, 200};
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) g.at(x, y) = x;
  const auto p = line_profile(g, Axis::X, 1200);
  ASSERT_EQ(p.size(), 5u);
  for (int x = 0; x < 5; ++x) {
    EXPECT_EQ(p[x].value, x);
    EXPECT_EQ(p[x].position, 100 + 500 + 1000 * x);
  }
  EXPECT_EQ(line_profile(g, Axis::Y, 4099).size(), 3u);
  EXPECT_THROW(line_profile(g, Axis::X, 3200), ConfigError);
  EXPECT_THROW(line_profile(g, Axis::Y, 99), ConfigError);
}

TEST(Export, CsvRoundTrip) {
  std::mt19937_64 rng(10);
  Grid g = random_grid(rng, 2, 2);
  g.origin = {-5, 7};
  g.values = {0.1, 1.0 / 3.0, 2e-17, 1.0};
  const auto csv = grid_to_csv(g);
  EXPECT_EQ(csv.rfind("# -5 7 1000 2 2 raw\n", 0), 0u);
  const auto back = grid_from_csv(csv);
  EXPECT_TRUE(back.same_geometry(g));
  EXPECT_EQ(back.values, g.values);
  EXPECT_EQ(back.kind, g.kind);
  EXPECT_THROW(grid_from_csv("# 0 0 1 2 1 raw\n1,2,3\n"), TextParseError);
  EXPECT_THROW(grid_from_csv("0 0 1 1 1 raw\n"), TextParseError);
}

TEST(Export, SvgHeatmap) {
  std::mt19937_64 rng1(1);
  Grid g = random_grid(rng1, 2, 2);
  const auto svg = grid_to_svg(g);
  std::size_t n = 0;
  for (std::size_t p = svg.find("class=\"cell\""); p != std::string::npos; p = svg.find("class=\"cell\"", p + 1)) ++n;
  EXPECT_EQ(n, 4u);
  EXPECT_NE(svg.find("class=\"legend\""), std::string::npos);
  std::fill(g.values.begin(), g.values.end(), 0.5);
  const auto flat = grid_to_svg(g);
  EXPECT_NE(flat.find("min 0.5"), std::string::npos);
  EXPECT_NE(flat.find("max 0.5"), std::string::npos);
  std::set<std::string> fills;
  for (std::size_t p = flat.find("fill=\"#"); p != std::string::npos; p = flat.find("fill=\"#", p + 1)) {
    fills.insert(flat.substr(p, 14));
  }
  EXPECT_EQ(fills.size(), 1u);
}

TEST(Engine, MatchesPerCellTiles) {
  // Every cell computed independently with its own halo must equal the
  // deduplicated engine result.
  const auto db = fixtures::checkerboard(3000, 6);
  LayoutDB d2 = db;
  d2.add(make_rect_polygon({1234, 4321, 2345, 9876}, 1));
  d2.add(make_rect_polygon({7000, 500, 7100, 17000}, 1));
  d2.canonicalize();
  const StepSpec spec{500};
  const int ids[] = {1};
  for (const auto& film : {FilmStack{FilmKind::Hdp}, FilmStack{FilmKind::Conformal, 400},
                           FilmStack{FilmKind::Composite, 200}, FilmStack{FilmKind::Layout}}) {
    DensityStats st;
    const auto g = raw_density_map(d2, ids, film, spec, 2000, {25, 0}, &st);
    EXPECT_EQ(st.cells, 81u);
    const auto rects = layer_rects(d2, ids);
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix) {
        const Rect cell = g.cell_rect(ix, iy);
        const auto tile = rasterize_rects(rects, cell, 25, film.halo_pixels(spec, 25) + 7);
        const double want = cell_pattern_density(film_elevation(tile, film, spec), spec, cell.intersect(d2.die));
        EXPECT_NEAR(g.at(ix, iy), want, 1e-15) << ix << "," << iy;
      }
  }
}

TEST(Engine, PeriodicLayoutDeduplicates) {
  const auto db = fixtures::line_array_sweep({2000}, 200'000);
  const int ids[] = {1};
  DensityStats st;
  const auto g = raw_density_map(db, ids, {FilmKind::Hdp}, {500}, 20'000, {25, 0}, &st);
  EXPECT_EQ(st.cells, 100u);
  EXPECT_LE(st.unique_tiles, 9u);
  for (double v : g.values) EXPECT_LE(v, 0.5);
}

TEST(Engine, EmptyLayerGivesZero) {
  const auto db = fixtures::empty_die();
  const int ids[] = {1};
  const auto g = raw_density_map(db, ids, {FilmKind::Hdp}, {500}, 40'000, {});
  for (double v : g.values) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(raw_density_map(db, ids, {FilmKind::Hdp}, {500}, 40'010, {}), ConfigError);
}

TEST(Engine, ThreadCountDoesNotChangeResult) {
  const auto db = fixtures::mixed_pitch_chip(3, 800'000, 800'000, 200'000);
  const int ids[] = {1};
  const auto a = raw_density_map(db, ids, {FilmKind::Hdp}, {500}, 40'000, {50, 1});
  const auto b = raw_density_map(db, ids, {FilmKind::Hdp}, {500}, 40'000, {50, 4});
  EXPECT_EQ(a.values, b.values);
}
