#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmpfill/error.hpp"
#include "cmpfill/export.hpp"
#include "cmpfill/gds.hpp"
#include "cmpfill/geometry.hpp"
#include "cmpfill/text_layout.hpp"

namespace cmpfill {

enum class LayoutFormat { Gds, Text };

inline LayoutFormat layout_format_from_string(const std::string& s) {
  if (s == "gds") return LayoutFormat::Gds;
  if (s == "text" || s == "txt") return LayoutFormat::Text;
  throw ConfigError("unknown layout format '" + s + "'");
}

/// Format implied by a file extension (.gds/.gds2/.gdsii or .txt/.layout).
inline LayoutFormat layout_format_for_path(const std::string& path) {
  auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "gds" || ext == "gds2" || ext == "gdsii" || ext == "GDS") return LayoutFormat::Gds;
  if (ext == "txt" || ext == "layout" || ext == "text") return LayoutFormat::Text;
  throw ConfigError("cannot infer layout format from '" + path + "'");
}

inline LayoutDB parse_layout(std::span<const std::uint8_t> bytes, LayoutFormat fmt,
                             const gds::ReadOptions& gopt = {}) {
  if (fmt == LayoutFormat::Gds) return gds::parse_gds(bytes, gopt);
  return parse_layout_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline LayoutDB read_layout_file(const std::string& path, LayoutFormat fmt,
                                 const gds::ReadOptions& gopt = {}) {
  const std::string data = read_file(path);
  return parse_layout(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()), fmt, gopt);
}

inline std::vector<std::uint8_t> serialize_layout(const LayoutDB& db, LayoutFormat fmt) {
  if (fmt == LayoutFormat::Gds) return gds::write_gds(db);
  const std::string t = write_layout_text(db);
  return {t.begin(), t.end()};
}

/// Axis-aligned dummy squares on one fill layer.
struct FillGeometry {
  int layer = 0;
  std::vector<Rect> squares;
};

/// The input layout plus the fill shapes on `fill.layer`, serialized. Writing
/// onto a layer that already holds input geometry requires `allow_layer_merge`.
inline std::vector<std::uint8_t> write_fill(const LayoutDB& db, const FillGeometry& fill,
                                            LayoutFormat fmt, bool allow_layer_merge = false) {
  if (db.has_layer(fill.layer) && !allow_layer_merge && !fill.squares.empty()) {
    throw ConfigError("fill layer " + std::to_string(fill.layer) +
                      " collides with an input layer; set the override to merge");
  }
  LayoutDB out = db;
  auto& polys = out.layers[fill.layer];
  polys.reserve(polys.size() + fill.squares.size());
  for (const Rect& r : fill.squares) {
    if (r.empty() || !db.die.contains(r)) throw ValidationError("fill shape outside the die");
    polys.push_back(make_rect_polygon(r, fill.layer));
  }
  out.canonicalize();
  return serialize_layout(out, fmt);
}

}  // namespace cmpfill
