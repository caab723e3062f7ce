#pragma once

// Flat `key = value` run configuration. '#' starts a comment. Every key is
// optional unless a command needs it; unknown keys are rejected. Relative
// paths resolve against the directory of the config file.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmpfill/cmp_model.hpp"
#include "cmpfill/density_engine.hpp"
#include "cmpfill/dummy_fill.hpp"
#include "cmpfill/error.hpp"
#include "cmpfill/export.hpp"
#include "cmpfill/film.hpp"
#include "cmpfill/grid.hpp"
#include "cmpfill/layout_io.hpp"

namespace cmpfill {

enum class FillMode { Smart, Conventional };

struct RunConfig {
  // input
  std::string input;
  LayoutFormat input_format = LayoutFormat::Gds;
  std::string top_cell;
  int die_layer = 255;
  std::vector<int> layers{1};

  // film and density
  StepSpec step{500, Polarity::Raised};
  FilmStack film;
  WindowSpec window;
  ConvolutionMethod convolution = ConvolutionMethod::Fft;
  Nm cell_size = 40'000;
  RasterOptions raster;
  int histogram_bins = 20;
  bool compare_films = false;

  // thickness
  std::optional<CmpParams> cmp;
  std::optional<Nm> profile_x;  ///< column for the Y profile
  std::optional<Nm> profile_y;  ///< row for the X profile
  std::optional<Point> metrology;
  std::optional<double> spec_target;

  // fill
  FillRules fill_rules;
  FillMode fill_mode = FillMode::Smart;
  std::optional<double> fill_d_fixed;
  std::optional<double> fill_lambda;
  /// Uniformity target: unset means reachable; NaN means pre-fill maximum.
  std::optional<double> fill_target;
  int fill_max_iterations = 100000;
  double fill_tolerance = 1e-8;
  bool fill_strict_convergence = false;
  bool fill_tune_conventional = true;
  bool fill_verify_realized = false;
  bool fill_allow_layer_merge = false;
  LayoutFormat fill_output_format = LayoutFormat::Gds;

  std::string out_dir = "out";

  void validate() const {
    if (layers.empty()) throw ConfigError("no layers selected");
    step.validate();
    film.validate();
    window.validate();
    if (cell_size <= 0) throw ConfigError("cell size must be positive");
    if (raster.pixel <= 0) throw ConfigError("pixel size must be positive");
    if (cell_size % raster.pixel != 0) throw ConfigError("pixel size must divide the cell size");
    if (histogram_bins < 1) throw ConfigError("histogram_bins must be at least 1");
    build_kernel(window, cell_size);
    if (cmp) cmp->validate();
    fill_rules.validate(cell_size);
    if (fill_d_fixed && (*fill_d_fixed < 0 || *fill_d_fixed > fill_rules.max_density())) {
      throw ConfigError("fill_d_fixed must lie in [0, max dummy density]");
    }
    if (fill_lambda && *fill_lambda < 0) throw ConfigError("fill_lambda must be nonnegative");
    if (fill_max_iterations < 1) throw ConfigError("fill_max_iterations must be at least 1");
    if (!(fill_tolerance > 0)) throw ConfigError("fill_tolerance must be positive");
  }
};

namespace detail {

class KeyValues {
 public:
  void set(const std::string& key, const std::string& value, std::size_t line) {
    values_[key] = {value, line};
  }
  bool has(const std::string& k) const { return values_.count(k) != 0; }

  std::optional<std::string> take(const std::string& k) {
    used_.insert(k);
    auto it = values_.find(k);
    if (it == values_.end()) return std::nullopt;
    return it->second.first;
  }

  template <class T>
  std::optional<T> number(const std::string& k) {
    auto s = take(k);
    if (!s) return std::nullopt;
    T v{};
    auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc() || p != s->data() + s->size()) fail(k, "expected a number");
    return v;
  }

  std::optional<bool> boolean(const std::string& k) {
    auto s = take(k);
    if (!s) return std::nullopt;
    if (*s == "true" || *s == "1" || *s == "yes") return true;
    if (*s == "false" || *s == "0" || *s == "no") return false;
    fail(k, "expected true or false");
  }

  std::optional<std::vector<int>> int_list(const std::string& k) {
    auto s = take(k);
    if (!s) return std::nullopt;
    std::vector<int> out;
    std::string item;
    std::istringstream in(*s);
    while (std::getline(in, item, ',')) {
      const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
      if (b == std::string::npos) {
        if (in.eof() && out.empty()) break;
        fail(k, "empty list element");
      }
      item = item.substr(b, e - b + 1);
      int v = 0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || p != item.data() + item.size()) fail(k, "expected integers");
      out.push_back(v);
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) {
        throw ConfigError("unknown config key '" + k + "'" +
                          (v.second ? " at line " + std::to_string(v.second) : std::string()));
      }
    }
  }

  [[noreturn]] void fail(const std::string& k, const std::string& what) const {
    auto it = values_.find(k);
    std::string where = it != values_.end() && it->second.second
                            ? " (line " + std::to_string(it->second.second) + ")"
                            : std::string();
    throw ConfigError("config key '" + k + "'" + where + ": " + what);
  }

 private:
  std::map<std::string, std::pair<std::string, std::size_t>> values_;
  std::set<std::string> used_;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

/// Parses config text. `overrides` are `key=value` strings applied on top.
/// `base_dir` anchors relative paths found in the text (not in overrides).
inline RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {},
                              const std::filesystem::path& base_dir = {}) {
  detail::KeyValues kv;
  std::set<std::string> from_file;
  std::size_t lineno = 0, pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw TextParseError(lineno, 1, "expected 'key = value'");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw TextParseError(lineno, 1, "missing key");
    if (kv.has(key)) throw TextParseError(lineno, 1, "duplicate key '" + key + "'");
    kv.set(key, detail::trim(std::string_view(t).substr(eq + 1)), lineno);
    from_file.insert(key);
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = detail::trim(std::string_view(o).substr(0, eq));
    kv.set(key, detail::trim(std::string_view(o).substr(eq + 1)), 0);
    from_file.erase(key);
  }
  auto path_of = [&](const std::string& key, const std::string& v) {
    std::filesystem::path p(v);
    if (p.is_relative() && from_file.count(key) && !base_dir.empty()) p = base_dir / p;
    return p.lexically_normal().string();
  };

  RunConfig c;
  if (auto v = kv.take("input")) c.input = path_of("input", *v);
  if (auto v = kv.take("input_format")) {
    c.input_format = layout_format_from_string(*v);
  } else if (!c.input.empty()) {
    c.input_format = layout_format_for_path(c.input);
  }
  if (auto v = kv.take("top_cell")) c.top_cell = *v;
  if (auto v = kv.number<int>("die_layer")) c.die_layer = *v;
  if (auto v = kv.int_list("layers")) c.layers = *v;

  if (auto v = kv.number<Nm>("step_height_nm")) c.step.step_height = *v;
  if (auto v = kv.take("polarity")) {
    if (*v == "raised") c.step.polarity = Polarity::Raised;
    else if (*v == "sti") c.step.polarity = Polarity::TrenchSti;
    else kv.fail("polarity", "expected raised or sti");
  }
  if (auto v = kv.take("film")) {
    if (*v == "layout") c.film.kind = FilmKind::Layout;
    else if (*v == "conformal") c.film.kind = FilmKind::Conformal;
    else if (*v == "hdp") c.film.kind = FilmKind::Hdp;
    else if (*v == "composite") c.film.kind = FilmKind::Composite;
    else kv.fail("film", "expected layout, conformal, hdp or composite");
  }
  if (auto v = kv.number<Nm>("t_conf_nm")) c.film.t_conf = *v;
  if (auto v = kv.number<double>("facet_angle_deg")) c.film.facet_angle_deg = *v;
  if (auto v = kv.number<double>("dep_etch_ratio")) c.film.dep_etch_ratio = *v;

  if (auto v = kv.number<Nm>("window_diameter_nm")) c.window.diameter = *v;
  if (auto v = kv.number<double>("window_sigma_nm")) c.window.sigma = *v;
  if (auto v = kv.boolean("window_flat")) c.window.flat = *v;
  if (auto v = kv.take("convolution")) {
    if (*v == "fft") c.convolution = ConvolutionMethod::Fft;
    else if (*v == "direct") c.convolution = ConvolutionMethod::Direct;
    else kv.fail("convolution", "expected fft or direct");
  }
  if (auto v = kv.number<Nm>("cell_size_nm")) c.cell_size = *v;
  if (auto v = kv.number<Nm>("pixel_nm")) c.raster.pixel = *v;
  if (auto v = kv.number<int>("threads")) c.raster.threads = *v;
  if (auto v = kv.number<int>("histogram_bins")) c.histogram_bins = *v;
  if (auto v = kv.boolean("compare_films")) c.compare_films = *v;

  {
    auto z0 = kv.number<double>("cmp_z0_nm");
    auto z1 = kv.number<double>("cmp_z1_nm");
    auto k = kv.number<double>("cmp_rate_nm_per_min");
    auto t = kv.number<double>("cmp_time_min");
    auto fl = kv.number<double>("cmp_density_floor");
    if (z0 || z1 || k || t || fl) {
      if (!z0 || !k || !t) throw ConfigError("CMP needs cmp_z0_nm, cmp_rate_nm_per_min and cmp_time_min");
      CmpParams p;
      p.z0 = *z0;
      p.z1 = z1 ? *z1 : static_cast<double>(c.step.step_height);
      p.rate = *k;
      p.time = *t;
      if (fl) p.density_floor = *fl;
      c.cmp = p;
    }
  }
  c.profile_x = kv.number<Nm>("profile_x_nm");
  c.profile_y = kv.number<Nm>("profile_y_nm");
  {
    auto mx = kv.number<Nm>("metrology_x_nm");
    auto my = kv.number<Nm>("metrology_y_nm");
    if (mx.has_value() != my.has_value()) throw ConfigError("metrology point needs both x and y");
    if (mx) c.metrology = Point{*mx, *my};
  }
  c.spec_target = kv.number<double>("spec_target_nm");

  if (auto v = kv.number<Nm>("fill_min_spacing_nm")) c.fill_rules.min_spacing = *v;
  if (auto v = kv.number<Nm>("fill_dummy_size_nm")) c.fill_rules.dummy_size = *v;
  if (auto v = kv.number<Nm>("fill_dummy_pitch_nm")) c.fill_rules.dummy_pitch = *v;
  if (auto v = kv.int_list("fill_exclusion_layers")) c.fill_rules.exclusion_layers = *v;
  if (auto v = kv.number<int>("fill_layer")) c.fill_rules.fill_layer = *v;
  if (auto v = kv.take("fill_mode")) {
    if (*v == "smart") c.fill_mode = FillMode::Smart;
    else if (*v == "conventional") c.fill_mode = FillMode::Conventional;
    else kv.fail("fill_mode", "expected smart or conventional");
  }
  c.fill_d_fixed = kv.number<double>("fill_d_fixed");
  c.fill_lambda = kv.number<double>("fill_lambda");
  if (auto v = kv.take("fill_target")) {
    double t = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), t);
    if (*v == "max") c.fill_target = std::numeric_limits<double>::quiet_NaN();
    else if (ec == std::errc() && p == v->data() + v->size() && std::isfinite(t)) c.fill_target = t;
    else if (*v != "reachable") kv.fail("fill_target", "expected reachable, max or a number");
  }
  if (auto v = kv.number<int>("fill_max_iterations")) c.fill_max_iterations = *v;
  if (auto v = kv.number<double>("fill_tolerance")) c.fill_tolerance = *v;
  if (auto v = kv.boolean("fill_strict_convergence")) c.fill_strict_convergence = *v;
  if (auto v = kv.boolean("fill_tune_conventional")) c.fill_tune_conventional = *v;
  if (auto v = kv.boolean("fill_verify_realized")) c.fill_verify_realized = *v;
  if (auto v = kv.boolean("fill_allow_layer_merge")) c.fill_allow_layer_merge = *v;
  if (auto v = kv.take("fill_output_format")) c.fill_output_format = layout_format_from_string(*v);

  if (auto v = kv.take("out_dir")) {
    c.out_dir = path_of("out_dir", *v);
  } else if (!base_dir.empty()) {
    c.out_dir = (base_dir / c.out_dir).lexically_normal().string();
  }

  kv.reject_unknown();
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  const std::string text = read_file(path);
  return parse_config(text, overrides, std::filesystem::path(path).parent_path());
}

}  // namespace cmpfill
