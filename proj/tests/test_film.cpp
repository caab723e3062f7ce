#include <gtest/gtest.h>

#include <random>

#include "cmpfill/film.hpp"
#include "oracles.hpp"

using namespace cmpfill;

namespace {

// Density of one period-wide cell of an infinite vertical line array.
double array_density(Nm pitch, Nm width, const FilmStack& film, Nm step, Nm pixel, Nm cell_h = 1000) {
  const StepSpec spec{step, Polarity::Raised};
  const int halo = film.halo_pixels(spec, pixel);
  const Rect cell{0, 0, pitch, cell_h};
  const Nm margin = halo * pixel + pitch;
  std::vector<Rect> lines;
  for (Nm x = -margin - pitch; x < pitch + margin; x += pitch) {
    lines.push_back({x, -margin, x + width, cell_h + margin});
  }
  const auto tile = rasterize_rects(lines, cell, pixel, halo);
  return cell_pattern_density(film_elevation(tile, film, spec), spec, cell);
}

FilmStack conformal(Nm t) { return {FilmKind::Conformal, t}; }
FilmStack hdp(double angle = 45) { return {FilmKind::Hdp, 0, angle}; }

}  // namespace

TEST(Film, ConformalLineArrayExamples) {
  EXPECT_NEAR(array_density(4000, 2000, conformal(500), 500, 25), 0.75, 1e-12);
  EXPECT_NEAR(array_density(2000, 1000, conformal(500), 500, 25), 1.0, 1e-12);
}

TEST(Film, HdpAnalyticVolumes) {
  // trapezoid: t (w - t / tan) over t * pitch
  EXPECT_NEAR(array_density(4000, 2000, hdp(), 500, 20), 0.375, 0.375 * 0.01);
  // triangle: w^2 tan / 4 over t * pitch
  EXPECT_NEAR(array_density(1200, 600, hdp(), 500, 20), 0.15, 0.15 * 0.01);
  // steeper facets keep more volume
  EXPECT_GT(array_density(4000, 2000, hdp(60), 500, 20), array_density(4000, 2000, hdp(45), 500, 20));
}

TEST(Film, RefinementConverges) {
  const double coarse = array_density(4000, 2000, hdp(), 500, 50);
  const double fine = array_density(4000, 2000, hdp(), 500, 10);
  // perimeter error bound: two edges per pitch, half a pixel each
  EXPECT_LT(std::fabs(coarse - fine), 2 * 50.0 / 4000);
  EXPECT_NEAR(fine, 0.375, 0.002);
}

TEST(Film, OpenFieldAndPlateau) {
  const StepSpec spec{500, Polarity::Raised};
  const std::vector<Rect> none;
  const auto empty = rasterize_rects(none, {0, 0, 2000, 2000}, 25, 40);
  for (const auto& f : {conformal(500), hdp(), FilmStack{FilmKind::Composite, 300}}) {
    const auto e = film_elevation(empty, f, spec);
    for (double v : e.elevation) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(cell_pattern_density(e, spec, {0, 0, 2000, 2000}), 0.0);
  }
  const std::vector<Rect> full{{-5000, -5000, 7000, 7000}};
  const auto solid = rasterize_rects(full, {0, 0, 2000, 2000}, 25, 40);
  for (const auto& f : {conformal(500), hdp(), FilmStack{FilmKind::Composite, 300}}) {
    EXPECT_EQ(cell_pattern_density(film_elevation(solid, f, spec), spec, {0, 0, 2000, 2000}), 1.0);
  }
}

TEST(Film, HaloContract) {
  const StepSpec spec{500, Polarity::Raised};
  const std::vector<Rect> none;
  const auto thin = rasterize_rects(none, {0, 0, 1000, 1000}, 25, 2);
  EXPECT_THROW(film_elevation(thin, conformal(500), spec), ContractViolation);
  EXPECT_THROW(film_elevation(thin, hdp(), spec), ContractViolation);
  const auto e = film_elevation(rasterize_rects(none, {0, 0, 1000, 1000}, 25, 30), hdp(), spec);
  EXPECT_THROW(elevation_composite(e, 2000), ContractViolation);
}

TEST(Film, MaxFilterMatchesBrute) {
  std::mt19937_64 rng(8);
  std::vector<double> scratch;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(rng() % 50), r = static_cast<int>(rng() % 8);
    std::vector<double> in(n), out(n);
    for (auto& v : in) v = static_cast<double>(rng() % 1000);
    detail::max_filter_1d(in.data(), n, r, out.data(), scratch);
    for (int x = 0; x < n; ++x) {
      double m = 0;
      for (int d = -r; d <= r; ++d)
        if (x + d >= 0 && x + d < n) m = std::max(m, in[x + d]);
      EXPECT_EQ(out[x], m);
    }
  }
}

TEST(Film, CompositeMatchesBruteDilation) {
  std::mt19937_64 rng(4);
  const StepSpec spec{500, Polarity::Raised};
  for (int t = 0; t < 6; ++t) {
    const Nm p = 20;
    std::vector<Rect> rs;
    for (int i = 0; i < 4; ++i) {
      const Nm x = Nm(rng() % 1600), y = Nm(rng() % 1600);
      rs.push_back({x, y, x + 100 + Nm(rng() % 900), y + 100 + Nm(rng() % 900)});
    }
    const Nm t_conf = 100 + 20 * Nm(rng() % 10);
    const FilmStack f{FilmKind::Composite, t_conf};
    const int halo = f.halo_pixels(spec, p);
    const auto tile = rasterize_rects(rs, {0, 0, 2560 - 2 * halo * p, 2560 - 2 * halo * p}, p, halo);
    ASSERT_LE(tile.width, 128);
    const auto h = film_elevation(tile, hdp(), spec);
    const auto c = elevation_composite(h, t_conf);
    auto want = oracle::disk_dilate(h.elevation, h.width, h.height, t_conf, p);
    for (std::size_t k = 0; k < want.size(); ++k) {
      EXPECT_EQ(c.elevation[k], std::min(want[k], 500.0));
      EXPECT_LE(h.elevation[k], c.elevation[k]);
      EXPECT_LE(c.elevation[k], 500.0);
    }
  }
}

TEST(Film, CompositeZeroThicknessIsIdentity) {
  const StepSpec spec{500, Polarity::Raised};
  const std::vector<Rect> rs{{300, 300, 900, 1500}};
  const auto tile = rasterize_rects(rs, {0, 0, 2000, 2000}, 25, 30);
  const auto h = film_elevation(tile, hdp(), spec);
  EXPECT_EQ(elevation_composite(h, 0).elevation, h.elevation);
}

TEST(Film, OrderingOnRandomLayouts) {
  // HDP <= layout <= conformal for any layout
  std::mt19937_64 rng(12);
  const StepSpec spec{500, Polarity::Raised};
  for (int t = 0; t < 10; ++t) {
    std::vector<Rect> rs;
    for (int i = 0; i < 12; ++i) {
      const Nm x = Nm(rng() % 5000) - 500, y = Nm(rng() % 5000) - 500;
      rs.push_back({x, y, x + 50 + Nm(rng() % 2000), y + 50 + Nm(rng() % 2000)});
    }
    const Rect cell{0, 0, 4000, 4000};
    auto dens = [&](const FilmStack& f) {
      const auto tile = rasterize_rects(rs, cell, 25, f.halo_pixels(spec, 25));
      return cell_pattern_density(film_elevation(tile, f, spec), spec, cell);
    };
    const double lay = dens({FilmKind::Layout, 0});
    EXPECT_LE(dens(hdp()), lay + 1e-12);
    EXPECT_GE(dens(conformal(500)), lay - 1e-12);
    EXPECT_LE(dens(hdp()), dens({FilmKind::Composite, 200}) + 1e-12);
  }
}

TEST(Film, PitchSweepShape) {
  const std::vector<Nm> pitches{1000, 2000, 4000, 10000, 20000};
  double prev_h = -1, prev_c = 2;
  for (Nm p : pitches) {
    const double h = array_density(p, p / 2, hdp(), 500, 25);
    const double c = array_density(p, p / 2, conformal(500), 500, 25);
    EXPECT_GE(h, prev_h - 1e-12);
    EXPECT_LE(c, prev_c + 1e-12);
    EXPECT_LE(h, 0.5);
    EXPECT_GE(c, 0.5);
    prev_h = h;
    prev_c = c;
  }
}

TEST(Film, DiskHalfWidths) {
  // radius 50 at pixel 25: 4*625*(dx^2+dy^2) <= 125^2 -> dx^2+dy^2 <= 6.25
  const auto hw = disk_half_widths(50, 25);
  const std::vector<int> want{2, 2, 1};
  EXPECT_EQ(hw, want);
}

TEST(Film, Validation) {
  EXPECT_THROW((FilmStack{FilmKind::Conformal, 0}.validate()), ConfigError);
  EXPECT_THROW((FilmStack{FilmKind::Hdp, 0, 90}.validate()), ConfigError);
  EXPECT_THROW((StepSpec{0}.validate()), ConfigError);
  const StepSpec spec{500};
  const std::vector<Rect> none;
  const auto e = film_elevation(rasterize_rects(none, {0, 0, 100, 100}, 25, 0), {FilmKind::Layout, 0}, spec);
  EXPECT_THROW(cell_pattern_density(e, spec, {500, 500, 600, 600}), ConfigError);
}
