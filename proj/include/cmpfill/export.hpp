#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmpfill/error.hpp"
#include "cmpfill/grid.hpp"

namespace cmpfill {

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// CSV grid: a header line `# origin_x_nm origin_y_nm cell_size_nm nx ny kind`
/// with values, then ny rows (bottom row first) of nx comma-separated values.
inline std::string grid_to_csv(const Grid& g) {
  std::string out = "# " + std::to_string(g.origin.x) + " " + std::to_string(g.origin.y) +
                    " " + std::to_string(g.cell_size) + " " + std::to_string(g.nx) + " " +
                    std::to_string(g.ny) + " " + to_string(g.kind) + "\n";
  out.reserve(out.size() + g.size() * 20);
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      if (ix) out += ',';
      out += format_double(g.at(ix, iy));
    }
    out += '\n';
  }
  return out;
}

inline Grid grid_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw TextParseError(1, 1, "missing grid header");
  }
  Grid g;
  std::string kind;
  {
    std::istringstream hs(line.substr(2));
    if (!(hs >> g.origin.x >> g.origin.y >> g.cell_size >> g.nx >> g.ny >> kind)) {
      throw TextParseError(1, 3, "malformed grid header");
    }
    if (g.nx < 0 || g.ny < 0 || g.cell_size <= 0) throw TextParseError(1, 3, "invalid grid header");
  }
  g.kind = grid_kind_from_string(kind);
  g.values.reserve(g.size());
  for (int iy = 0; iy < g.ny; ++iy) {
    if (!std::getline(in, line)) throw TextParseError(iy + 2, 1, "missing grid row");
    std::size_t pos = 0;
    for (int ix = 0; ix < g.nx; ++ix) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      double v = 0;
      auto [p, ec] = std::from_chars(line.data() + pos, line.data() + end, v);
      if (ec != std::errc() || p != line.data() + end) {
        throw TextParseError(iy + 2, pos + 1, "bad grid value");
      }
      g.values.push_back(v);
      pos = end + 1;
    }
    if (pos <= line.size()) {
      throw TextParseError(iy + 2, pos + 1, "extra values in grid row");
    }
  }
  return g;
}

namespace detail {

// Blue -> cyan -> green -> yellow -> red.
inline std::string heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  static constexpr double stops[5][3] = {
      {49, 54, 149}, {69, 170, 209}, {120, 198, 121}, {254, 224, 76}, {215, 48, 39}};
  const double s = t * 4.0;
  const int i = std::min(3, static_cast<int>(s));
  const double f = s - i;
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(stops[i][c] + f * (stops[i + 1][c] - stops[i][c])));
  }
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

}  // namespace detail

/// Standalone SVG heatmap: one filled rectangle per cell (class "cell", top of
/// the die at the top of the image), a linear color scale and a min/max
/// legend.
inline std::string grid_to_svg(const Grid& g, const std::string& title = "") {
  if (g.values.empty()) throw ConfigError("empty grid");
  auto [lo, hi] = min_max(g);
  const int px = std::max(1, std::min(8, 800 / std::max(g.nx, g.ny)));
  const int w = g.nx * px, h = g.ny * px;
  const int legend_w = 140;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + legend_w + 20
     << "\" height=\"" << std::max(h, 200) + 40 << "\" shape-rendering=\"crispEdges\">\n";
  if (!title.empty()) os << "<title>" << title << "</title>\n";
  os << "<g transform=\"translate(10,30)\">\n";
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double t = hi > lo ? (g.at(ix, iy) - lo) / (hi - lo) : 0.5;
      os << "<rect class=\"cell\" x=\"" << ix * px << "\" y=\"" << (g.ny - 1 - iy) * px
         << "\" width=\"" << px << "\" height=\"" << px << "\" fill=\""
         << detail::heat_color(t) << "\"/>\n";
    }
  }
  os << "</g>\n";
  // Legend
  const int lx = w + 30;
  os << "<defs><linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n";
  for (int s = 0; s <= 4; ++s) {
    os << "<stop offset=\"" << s * 25 << "%\" stop-color=\""
       << detail::heat_color(hi > lo ? s / 4.0 : 0.5) << "\"/>\n";
  }
  os << "</linearGradient></defs>\n"
     << "<g class=\"legend\">\n"
     << "<rect class=\"legend-bar\" x=\"" << lx << "\" y=\"30\" width=\"20\" height=\"160\" fill=\"url(#scale)\"/>\n"
     << "<text class=\"legend-max\" x=\"" << lx + 26 << "\" y=\"40\" font-size=\"12\">max "
     << format_double(hi) << "</text>\n"
     << "<text class=\"legend-min\" x=\"" << lx + 26 << "\" y=\"190\" font-size=\"12\">min "
     << format_double(lo) << "</text>\n"
     << "<text x=\"" << lx << "\" y=\"20\" font-size=\"12\">" << to_string(g.kind) << "</text>\n"
     << "</g>\n</svg>\n";
  return os.str();
}

inline std::string histogram_to_csv(const Histogram& h) {
  std::string out = "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out += format_double(h.edges[i]) + "," + format_double(h.edges[i + 1]) + "," +
           std::to_string(h.counts[i]) + "\n";
  }
  return out;
}

inline std::string profile_to_csv(const std::vector<ProfilePoint>& prof,
                                  const std::string& value_name) {
  std::string out = "position_nm," + value_name + "\n";
  for (const auto& p : prof) out += format_double(p.position) + "," + format_double(p.value) + "\n";
  return out;
}

inline void write_file(const std::string& path, std::string_view data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw Error("write to '" + path + "' failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace cmpfill
