#pragma once

// Line-oriented layout format:
//   unit nm
//   die  <x0> <y0> <x1> <y1>
//   rect <layer> <x0> <y0> <x1> <y1>
//   poly <layer> <x0> <y0> ... <xn> <yn>
// '#' starts a comment. Shapes must lie inside the die.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cmpfill/error.hpp"
#include "cmpfill/geometry.hpp"

namespace cmpfill {

namespace detail {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' && line[i] != '#') ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

inline std::int64_t parse_int(const Token& t, std::size_t line) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
  if (ec != std::errc() || p != t.text.data() + t.text.size()) {
    throw TextParseError(line, t.column, "expected an integer, got '" + std::string(t.text) + "'");
  }
  return v;
}

}  // namespace detail

inline LayoutDB parse_layout_text(std::string_view text) {
  LayoutDB db;
  bool have_unit = false, have_die = false;
  struct Pending {
    Polygon poly;
    std::size_t line;
  };
  std::vector<Pending> shapes;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    const auto tok = detail::tokenize(line);
    if (tok.empty()) continue;
    const std::string_view kw = tok[0].text;
    if (kw == "unit") {
      if (tok.size() != 2) throw TextParseError(lineno, tok[0].column, "'unit' takes one argument");
      if (tok[1].text != "nm") {
        throw TextParseError(lineno, tok[1].column, "unit mismatch: only 'nm' is supported");
      }
      if (have_unit) throw TextParseError(lineno, tok[0].column, "duplicate unit declaration");
      have_unit = true;
    } else if (kw == "die") {
      if (tok.size() != 5) throw TextParseError(lineno, tok[0].column, "'die' takes four coordinates");
      if (have_die) throw TextParseError(lineno, tok[0].column, "duplicate die declaration");
      db.die = {detail::parse_int(tok[1], lineno), detail::parse_int(tok[2], lineno),
                detail::parse_int(tok[3], lineno), detail::parse_int(tok[4], lineno)};
      if (db.die.empty()) throw TextParseError(lineno, tok[1].column, "die is empty");
      have_die = true;
    } else if (kw == "rect") {
      if (tok.size() != 6) throw TextParseError(lineno, tok[0].column, "'rect' takes a layer and four coordinates");
      const auto layer = detail::parse_int(tok[1], lineno);
      if (layer < 0 || layer > 65535) throw TextParseError(lineno, tok[1].column, "layer out of range");
      Rect r{detail::parse_int(tok[2], lineno), detail::parse_int(tok[3], lineno),
             detail::parse_int(tok[4], lineno), detail::parse_int(tok[5], lineno)};
      if (r.empty()) throw TextParseError(lineno, tok[2].column, "rectangle is empty or inverted");
      shapes.push_back({make_rect_polygon(r, static_cast<int>(layer)), lineno});
    } else if (kw == "poly") {
      if (tok.size() < 2) throw TextParseError(lineno, tok[0].column, "'poly' needs a layer");
      const auto layer = detail::parse_int(tok[1], lineno);
      if (layer < 0 || layer > 65535) throw TextParseError(lineno, tok[1].column, "layer out of range");
      if ((tok.size() - 2) % 2) {
        throw TextParseError(lineno, tok.back().column, "odd number of polygon coordinates");
      }
      Polygon p;
      p.layer = static_cast<int>(layer);
      for (std::size_t k = 2; k < tok.size(); k += 2) {
        p.vertices.push_back({detail::parse_int(tok[k], lineno), detail::parse_int(tok[k + 1], lineno)});
      }
      if (p.vertices.size() >= 2 && p.vertices.front() == p.vertices.back()) p.vertices.pop_back();
      try {
        validate(p);
      } catch (const ValidationError& e) {
        throw TextParseError(lineno, tok[0].column, e.what());
      }
      shapes.push_back({std::move(p), lineno});
    } else {
      throw TextParseError(lineno, tok[0].column, "unknown keyword '" + std::string(kw) + "'");
    }
  }
  if (!have_unit) throw TextParseError(1, 1, "missing 'unit nm' declaration");
  if (!have_die) throw TextParseError(1, 1, "missing 'die' declaration");
  for (auto& s : shapes) {
    if (!db.die.contains(bbox(s.poly))) throw TextParseError(s.line, 1, "shape lies outside the die");
    db.add(std::move(s.poly));
  }
  db.canonicalize();
  return db;
}

/// Canonical text: unit, die, then shapes by layer in canonical polygon order;
/// rectangles as `rect`, everything else as `poly` in canonical vertex order.
inline std::string write_layout_text(const LayoutDB& db) {
  LayoutDB c = db;
  c.canonicalize();
  std::string out = "unit nm\n";
  out += "die " + std::to_string(c.die.x0) + " " + std::to_string(c.die.y0) + " " +
         std::to_string(c.die.x1) + " " + std::to_string(c.die.y1) + "\n";
  for (const auto& [layer, polys] : c.layers) {
    for (const Polygon& p : polys) {
      Rect r;
      if (as_rect(p, r)) {
        out += "rect " + std::to_string(layer) + " " + std::to_string(r.x0) + " " +
               std::to_string(r.y0) + " " + std::to_string(r.x1) + " " + std::to_string(r.y1) + "\n";
      } else {
        out += "poly " + std::to_string(layer);
        for (const Point& v : p.vertices) out += " " + std::to_string(v.x) + " " + std::to_string(v.y);
        out += "\n";
      }
    }
  }
  return out;
}

}  // namespace cmpfill
