#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include "cmpfill/cmpfill.hpp"

using namespace cmpfill;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("cmpfill_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Writes the fixture layout and config into `dir`, returns the config path.
std::string materialize(const fixtures::Fixture& f, const fs::path& dir) {
  const auto bytes = gds::write_gds(f.layout);
  write_file((dir / (f.name + ".gds")).string(),
             std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  const auto cfg = (dir / (f.name + ".cfg")).string();
  write_file(cfg, f.config);
  return cfg;
}

std::map<std::string, std::string> key_values(const std::string& text) {
  std::map<std::string, std::string> m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

std::string read(const fs::path& p) { return read_file(p.string()); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CMPFILL_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(Config, ParsesKeysAndDefaults) {
  const auto c = parse_config(
      "# comment\n"
      "input = chip.gds\n"
      "layers = 1, 3\n"
      "film = conformal   # trailing comment\n"
      "t_conf_nm = 600\n"
      "step_height_nm = 400\n"
      "cmp_z0_nm = 1000\n"
      "cmp_rate_nm_per_min = 300\n"
      "cmp_time_min = 1\n",
      {}, "/base");
  EXPECT_EQ(c.input, "/base/chip.gds");
  EXPECT_EQ(c.input_format, LayoutFormat::Gds);
  EXPECT_EQ(c.layers, (std::vector<int>{1, 3}));
  EXPECT_EQ(c.film.kind, FilmKind::Conformal);
  EXPECT_EQ(c.film.t_conf, 600);
  ASSERT_TRUE(c.cmp.has_value());
  EXPECT_EQ(c.cmp->z1, 400.0);  // defaults to the step height
  EXPECT_EQ(c.cell_size, 40'000);
  EXPECT_EQ(c.window.diameter, 2'500'000);
  EXPECT_EQ(c.fill_rules.min_spacing, 3'000);
  EXPECT_EQ(c.out_dir, "/base/out");
}

TEST(Config, OverridesWinAndStayRelative) {
  const auto c = parse_config("input = a.txt\ncell_size_nm = 40000\n", {"cell_size_nm=20000", "out_dir=rel"}, "/base");
  EXPECT_EQ(c.cell_size, 20'000);
  EXPECT_EQ(c.out_dir, "rel");
  EXPECT_EQ(c.input_format, LayoutFormat::Text);
}

TEST(Config, FillTarget) {
  EXPECT_FALSE(parse_config("").fill_target);
  EXPECT_FALSE(parse_config("fill_target = reachable\n").fill_target);
  EXPECT_TRUE(std::isnan(*parse_config("fill_target = max\n").fill_target));
  EXPECT_EQ(*parse_config("fill_target = 0.625\n").fill_target, 0.625);
  EXPECT_THROW(parse_config("fill_target = highest\n"), ConfigError);
  EXPECT_THROW(parse_config("fill_target = 0.6x\n"), ConfigError);
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config("colour = blue\n"), ConfigError);
  EXPECT_THROW(parse_config("film = plasma\n"), ConfigError);
  EXPECT_THROW(parse_config("cell_size_nm = forty\n"), ConfigError);
  EXPECT_THROW(parse_config("cell_size_nm = 40000\ncell_size_nm = 20000\n"), TextParseError);
  EXPECT_THROW(parse_config("just words\n"), TextParseError);
  EXPECT_THROW(parse_config("cmp_z0_nm = 1000\n"), ConfigError);
  EXPECT_THROW(parse_config("pixel_nm = 30\n"), ConfigError);
  EXPECT_THROW(parse_config("metrology_x_nm = 5\n"), ConfigError);
  EXPECT_THROW(parse_config("fill_dummy_pitch_nm = 3000\n"), ConfigError);
  EXPECT_THROW(parse_config("", {"nonsense"}), ConfigError);
}

TEST(Pipeline, EmptyLayerGivesZeroMaps) {
  const auto dir = scratch("empty");
  auto c = load_config(materialize(fixtures::make_fixture("empty", 1), dir));
  const auto r = cmd_density(c);
  EXPECT_EQ(r.code, exit_code::ok);
  const auto raw = grid_from_csv(read(dir / "empty_out" / "raw_density.csv"));
  const auto eff = grid_from_csv(read(dir / "empty_out" / "effective_density.csv"));
  for (double v : raw.values) EXPECT_EQ(v, 0.0);
  for (double v : eff.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(raw.nx, 10);
}

TEST(Pipeline, SquareRunsAreByteIdentical) {
  const auto dir = scratch("square");
  const auto cfg = materialize(fixtures::make_fixture("square", 1), dir);
  auto a = load_config(cfg, {"out_dir=" + (dir / "a").string()});
  auto b = load_config(cfg, {"out_dir=" + (dir / "b").string()});
  b.raster.threads = 3;
  const auto ra = cmd_density(a);
  const auto rb = cmd_density(b);
  ASSERT_EQ(ra.artifacts.size(), rb.artifacts.size());
  for (std::size_t i = 0; i < ra.artifacts.size(); ++i) {
    EXPECT_EQ(fs::path(ra.artifacts[i]).filename(), fs::path(rb.artifacts[i]).filename());
    EXPECT_EQ(read_file(ra.artifacts[i]), read_file(rb.artifacts[i])) << ra.artifacts[i];
  }
  const auto kv = key_values(read(dir / "a" / "density_stats.txt"));
  EXPECT_EQ(kv.at("raw_max"), "1");
  EXPECT_EQ(kv.at("raw_min"), "0");
}

TEST(Pipeline, LineArrayFilmOrdering) {
  const auto dir = scratch("line");
  auto c = load_config(materialize(fixtures::make_fixture("line-array", 1), dir));
  ASSERT_EQ(cmd_density(c).code, 0);
  const auto kv = key_values(read(dir / "line-array_out" / "density_stats.txt"));
  const double hdp = std::stod(kv.at("compare_hdp_raw_mean"));
  const double lay = std::stod(kv.at("compare_layout_raw_mean"));
  const double conf = std::stod(kv.at("compare_conformal_raw_mean"));
  EXPECT_LE(hdp, lay);
  EXPECT_LE(lay, conf);
  EXPECT_NEAR(lay, 0.5, 1e-12);
  const auto rows = csv_rows(read(dir / "line-array_out" / "film_comparison_histogram.csv"));
  ASSERT_EQ(rows.size(), 21u);
  std::size_t n[3] = {0, 0, 0};
  for (std::size_t i = 1; i < rows.size(); ++i)
    for (int k = 0; k < 3; ++k) n[k] += std::stoul(rows[i][2 + k]);
  EXPECT_EQ(n[0], 112u);
  EXPECT_EQ(n[1], 112u);
  EXPECT_EQ(n[2], 112u);
}

TEST(Pipeline, BlanketThickness) {
  const auto dir = scratch("blanket");
  auto c = load_config(materialize(fixtures::make_fixture("blanket", 1), dir));
  ASSERT_EQ(cmd_thickness(c).code, 0);
  const auto t = grid_from_csv(read(dir / "blanket_out" / "thickness.csv"));
  for (double v : t.values) EXPECT_EQ(v, 1500 - 400 * 1.5);
  const auto h = csv_rows(read(dir / "blanket_out" / "thickness_histogram.csv"));
  int nonzero = 0;
  for (std::size_t i = 1; i < h.size(); ++i) nonzero += h[i][2] != "0";
  EXPECT_EQ(nonzero, 1);
  const auto p = csv_rows(read(dir / "blanket_out" / "profile_x.csv"));
  for (std::size_t i = 1; i < p.size(); ++i) EXPECT_EQ(p[i][1], "900");
  const auto kv = key_values(read(dir / "blanket_out" / "polish_target.txt"));
  EXPECT_EQ(kv.at("offset"), "0");
  EXPECT_EQ(kv.at("recommended_target"), "800");
}

TEST(Pipeline, CheckerboardProfileAlternates) {
  const auto dir = scratch("checker");
  auto c = load_config(materialize(fixtures::make_fixture("checkerboard", 1), dir), {"profile_y_nm=100000"});
  ASSERT_EQ(cmd_thickness(c).code, 0);
  const auto rows = csv_rows(read(dir / "checkerboard_out" / "profile_x.csv"));
  ASSERT_EQ(rows.size(), 41u);
  std::vector<double> v;
  for (std::size_t i = 1; i < rows.size(); ++i) v.push_back(std::stod(rows[i][1]));
  // squares are 5 cells wide: the period is 10 cells
  for (std::size_t i = 1; i + 10 < v.size() - 1; ++i) EXPECT_NEAR(v[i], v[i + 10], 1e-9) << i;
  EXPECT_GT(v[2], v[7]);   // over a square vs over a gap
  EXPECT_GT(v[12], v[17]);
  // profile cells sit where the thickness map says
  const auto t = grid_from_csv(read(dir / "checkerboard_out" / "thickness.csv"));
  for (int ix = 0; ix < 40; ++ix) EXPECT_EQ(v[ix], t.at(ix, 2));
}

TEST(Pipeline, FillOnEmptyDieAddsNothing) {
  const auto dir = scratch("fill_empty");
  auto c = load_config(materialize(fixtures::make_fixture("empty", 1), dir));
  const auto r = cmd_fill(c);
  EXPECT_EQ(r.code, exit_code::ok);
  const auto sum = key_values(read(dir / "empty_out" / "fill_summary.txt"));
  EXPECT_EQ(sum.at("dummy_count"), "0");
  EXPECT_EQ(sum.at("spacing_verified"), "true");
  const auto rows = csv_rows(read(dir / "empty_out" / "fill_report.csv"));
  ASSERT_GE(rows.size(), 4u);
  EXPECT_EQ(rows[3][0], "smart");
  EXPECT_EQ(rows[3][4], "0");  // spread
  EXPECT_EQ(rows[3][7], "0");  // added area
  const auto out = gds::parse_gds([&] {
    const auto s = read(dir / "empty_out" / "fill_layout.gds");
    return std::vector<std::uint8_t>(s.begin(), s.end());
  }());
  EXPECT_FALSE(out.has_layer(100));
}

TEST(Pipeline, FillGdsReingestMatchesPlan) {
  const auto dir = scratch("fill_square");
  auto c = load_config(materialize(fixtures::make_fixture("square", 1), dir),
                       {"fill_min_spacing_nm=3000", "fill_tune_conventional=false"});
  const auto r = cmd_fill(c);
  ASSERT_EQ(r.code, exit_code::ok);
  const auto plan = grid_from_csv(read(dir / "square_out" / "fill_plan.csv"));
  const auto s = read(dir / "square_out" / "fill_layout.gds");
  const auto db = gds::parse_gds(std::vector<std::uint8_t>(s.begin(), s.end()));
  ASSERT_TRUE(db.has_layer(100));
  FillGeometry fg{100, {}};
  const int fill_layer[] = {100};
  fg.squares = layer_rects(db, fill_layer);
  const auto measured = measured_fill_density(fg, plan);
  const double quantum = c.fill_rules.max_density() / 100.0;  // 10 x 10 sites per 20 um cell
  double total = 0;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    EXPECT_LE(std::fabs(measured.values[k] - plan.values[k]), quantum / 2 + 1e-12);
    total += plan.values[k];
  }
  EXPECT_GT(total, 0.0);
  // the original square survives unchanged
  const int layer1[] = {1};
  EXPECT_EQ(layer_rects(db, layer1), (std::vector<Rect>{{150'000, 150'000, 250'000, 250'000}}));
  const auto report = csv_rows(read(dir / "square_out" / "fill_report.csv"));
  const double spread_none = std::stod(report[1][4]), spread_smart = std::stod(report[3][4]);
  EXPECT_LE(spread_smart, spread_none);
}

TEST(Pipeline, StrictConvergenceExitCode) {
  const auto dir = scratch("strict");
  auto c = load_config(materialize(fixtures::make_fixture("square", 1), dir),
                       {"fill_max_iterations=2", "fill_strict_convergence=true", "fill_tune_conventional=false"});
  const auto r = cmd_fill(c);
  EXPECT_EQ(r.code, exit_code::not_converged);
  EXPECT_FALSE(r.warnings.empty());
  c.fill_strict_convergence = false;
  EXPECT_EQ(cmd_fill(c).code, exit_code::ok);
}

TEST(Pipeline, MissingCmpParameters) {
  const auto dir = scratch("nocmp");
  auto f = fixtures::make_fixture("empty", 1);
  f.config = "input = empty.gds\ncell_size_nm = 40000\nwindow_diameter_nm = 200000\n";
  auto c = load_config(materialize(f, dir));
  EXPECT_THROW(cmd_thickness(c), ConfigError);
}

TEST(Cli, EndToEnd) {
  const auto dir = scratch("cli");
  const std::string d = dir.string();
  ASSERT_EQ(run_cli("gen-fixture square --out " + d + " --seed 3"), 0);
  ASSERT_TRUE(fs::exists(dir / "square.gds"));
  ASSERT_TRUE(fs::exists(dir / "square.cfg"));
  EXPECT_EQ(run_cli("density --config " + d + "/square.cfg --out " + d + "/o1 --threads 2"), 0);
  EXPECT_TRUE(fs::exists(dir / "o1" / "effective_density.csv"));
  EXPECT_EQ(run_cli("thickness --config " + d + "/square.cfg --out " + d + "/o1 --set profile_y_nm=200000"), 0);
  EXPECT_TRUE(fs::exists(dir / "o1" / "polish_target.txt"));
  EXPECT_EQ(run_cli("density --config " + d + "/square.cfg --out " + d + "/o2 --layer 7"), 0);
  const auto raw = grid_from_csv(read(dir / "o2" / "raw_density.csv"));
  for (double v : raw.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(run_cli("convert " + d + "/square.gds " + d + "/square.txt"), 0);
  EXPECT_EQ(run_cli("convert " + d + "/square.txt " + d + "/back.gds"), 0);
  EXPECT_EQ(read(dir / "square.gds"), read(dir / "back.gds"));
  EXPECT_EQ(run_cli("density --config " + d + "/missing.cfg"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("density --config " + d + "/square.cfg --set bogus_key=1"), 1);
  EXPECT_EQ(run_cli("gen-fixture nosuch --out " + d), 1);
}
