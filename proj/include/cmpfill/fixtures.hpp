#pragma once

// Synthetic layouts for tests, demos and acceptance runs. Block patterns keep
// an empty margin at block edges so cells near a block boundary only see
// their own block; with cell-aligned blocks and periods dividing the cell
// size, the density engine evaluates few distinct tiles.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cmpfill/error.hpp"
#include "cmpfill/geometry.hpp"

namespace cmpfill::fixtures {

constexpr Nm um = 1000;
constexpr Nm mm = 1'000'000;

/// Pattern placed inside one block.
struct Pattern {
  enum Kind { Empty, VLines, HLines, Islands, Pad } kind = Empty;
  Nm pitch = 0;
  Nm width = 0;  ///< line width or island edge
};

/// Adds `p` into `block` inset by `margin` on every side.
inline void emit_pattern(LayoutDB& db, int layer, const Rect& block, Nm margin, const Pattern& p) {
  const Rect in{block.x0 + margin, block.y0 + margin, block.x1 - margin, block.y1 - margin};
  if (in.empty()) return;
  switch (p.kind) {
    case Pattern::Empty:
      break;
    case Pattern::Pad:
      db.add(make_rect_polygon(in, layer));
      break;
    case Pattern::VLines:
      for (Nm x = in.x0; x + p.width <= in.x1; x += p.pitch) {
        db.add(make_rect_polygon({x, in.y0, x + p.width, in.y1}, layer));
      }
      break;
    case Pattern::HLines:
      for (Nm y = in.y0; y + p.width <= in.y1; y += p.pitch) {
        db.add(make_rect_polygon({in.x0, y, in.x1, y + p.width}, layer));
      }
      break;
    case Pattern::Islands:
      for (Nm y = in.y0; y + p.width <= in.y1; y += p.pitch) {
        for (Nm x = in.x0; x + p.width <= in.x1; x += p.pitch) {
          db.add(make_rect_polygon({x, y, x + p.width, y + p.width}, layer));
        }
      }
      break;
  }
}

// Seeded choice from the raw engine output (distribution objects are not
// portable across standard libraries).
inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

/// Blocks of size `block` tiling the die, each with a pattern drawn from
/// `table`.
inline LayoutDB block_chip(Nm width, Nm height, Nm block, Nm margin, const std::vector<Pattern>& table,
                           std::uint64_t seed, int layer = 1) {
  if (width % block || height % block) throw ConfigError("die must be a whole number of blocks");
  LayoutDB db;
  db.die = {0, 0, width, height};
  std::mt19937_64 rng(seed);
  for (Nm y = 0; y < height; y += block) {
    for (Nm x = 0; x < width; x += block) {
      emit_pattern(db, layer, {x, y, x + block, y + block}, margin, table[pick(rng, table.size())]);
    }
  }
  db.canonicalize();
  return db;
}

/// 50%-duty vertical line arrays side by side, one block per pitch.
inline LayoutDB line_array_sweep(const std::vector<Nm>& pitches, Nm block = 400 * um, int layer = 1) {
  LayoutDB db;
  db.die = {0, 0, block * static_cast<Nm>(pitches.size()), block};
  for (std::size_t i = 0; i < pitches.size(); ++i) {
    const Nm x0 = block * static_cast<Nm>(i);
    emit_pattern(db, layer, {x0, 0, x0 + block, block}, 0, {Pattern::VLines, pitches[i], pitches[i] / 2});
  }
  db.canonicalize();
  return db;
}

/// Interconnect-level chip mixing fine and coarse line arrays, islands, pads
/// and open field.
inline LayoutDB mixed_pitch_chip(std::uint64_t seed, Nm width = 4800 * um, Nm height = 4800 * um,
                                 Nm block = 800 * um) {
  const std::vector<Pattern> table = {
      {Pattern::VLines, 1 * um, 500},       {Pattern::HLines, 2 * um, 1 * um},
      {Pattern::VLines, 4 * um, 2 * um},    {Pattern::HLines, 10 * um, 3 * um},
      {Pattern::VLines, 20 * um, 14 * um},  {Pattern::Islands, 40 * um, 10 * um},
      {Pattern::Pad, 0, 0},                 {Pattern::Empty, 0, 0},
  };
  return block_chip(width, height, block, 5 * um, table, seed);
}

/// Active-area layer of an isolation level: dense and sparse active arrays,
/// large active pads and wide open trench field.
inline LayoutDB sti_chip(std::uint64_t seed, Nm width = 2200 * um, Nm height = 2800 * um,
                         Nm block = 200 * um) {
  const std::vector<Pattern> table = {
      {Pattern::VLines, 2 * um, 1500},      {Pattern::Islands, 4 * um, 2 * um},
      {Pattern::Islands, 20 * um, 5 * um},  {Pattern::HLines, 10 * um, 2 * um},
      {Pattern::Pad, 0, 0},                 {Pattern::Empty, 0, 0},
      {Pattern::Empty, 0, 0},               {Pattern::Islands, 10 * um, 6 * um},
  };
  return block_chip(width, height, block, 5 * um, table, seed);
}

/// Full-size interconnect chip, 22 x 22 mm in 1 mm blocks.
inline LayoutDB chip22(std::uint64_t seed) {
  const std::vector<Pattern> table = {
      {Pattern::VLines, 2 * um, 1 * um},    {Pattern::HLines, 4 * um, 2 * um},
      {Pattern::VLines, 10 * um, 3 * um},   {Pattern::HLines, 20 * um, 14 * um},
      {Pattern::Islands, 40 * um, 10 * um}, {Pattern::Pad, 0, 0},
      {Pattern::Empty, 0, 0},               {Pattern::VLines, 8 * um, 6 * um},
  };
  return block_chip(22 * mm, 22 * mm, 1 * mm, 5 * um, table, seed);
}

/// One square centered in a square die.
inline LayoutDB single_square(Nm die = 400 * um, Nm edge = 100 * um, int layer = 1) {
  LayoutDB db;
  db.die = {0, 0, die, die};
  const Nm a = (die - edge) / 2;
  db.add(make_rect_polygon({a, a, a + edge, a + edge}, layer));
  db.canonicalize();
  return db;
}

/// Checkerboard of solid and empty squares of edge `period`.
inline LayoutDB checkerboard(Nm period, int n, int layer = 1) {
  LayoutDB db;
  db.die = {0, 0, period * n, period * n};
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if ((i + j) % 2) continue;
      db.add(make_rect_polygon({i * period, j * period, (i + 1) * period, (j + 1) * period}, layer));
    }
  }
  db.canonicalize();
  return db;
}

/// Die fully covered by one shape.
inline LayoutDB blanket(Nm die = 400 * um, int layer = 1) {
  LayoutDB db;
  db.die = {0, 0, die, die};
  db.add(make_rect_polygon(db.die, layer));
  return db;
}

/// Die with no shapes on the analyzed layer.
inline LayoutDB empty_die(Nm die = 400 * um) {
  LayoutDB db;
  db.die = {0, 0, die, die};
  return db;
}

struct Fixture {
  std::string name;
  LayoutDB layout;
  std::string config;  ///< config text; `input` refers to <name>.gds next to it
};

inline std::string fixture_names() {
  return "line-array, mixed-pitch, sti, chip22, square, checkerboard, blanket, empty";
}

/// Layout plus a ready-to-run config for a named fixture.
inline Fixture make_fixture(const std::string& name, std::uint64_t seed) {
  const std::string cmp =
      "cmp_z0_nm = 1500\n"
      "cmp_rate_nm_per_min = 400\n"
      "cmp_time_min = 1.5\n"
      "spec_target_nm = 800\n";
  const std::string ild =
      "step_height_nm = 500\n"
      "film = hdp\n"
      "t_conf_nm = 500\n"
      "facet_angle_deg = 45\n";
  Fixture f;
  f.name = name;
  std::string body;
  if (name == "line-array") {
    f.layout = line_array_sweep({1 * um, 2 * um, 4 * um, 10 * um, 20 * um, 50 * um, 100 * um});
    body = ild + "cell_size_nm = 100000\nwindow_diameter_nm = 400000\ncompare_films = true\n" + cmp;
  } else if (name == "mixed-pitch") {
    f.layout = mixed_pitch_chip(seed);
    body = ild + "cell_size_nm = 40000\npixel_nm = 50\ncompare_films = true\n" + cmp;
  } else if (name == "sti") {
    f.layout = sti_chip(seed);
    body =
        "# isolation level: 400 nm trench, 600 nm conformal oxide, 3 um dummy spacing\n"
        "polarity = sti\n"
        "step_height_nm = 400\n"
        "film = conformal\n"
        "t_conf_nm = 600\n"
        "cell_size_nm = 20000\n"
        "pixel_nm = 50\n"
        "window_diameter_nm = 500000\n"
        "fill_min_spacing_nm = 3000\n"
        "fill_dummy_size_nm = 1000\n"
        "fill_dummy_pitch_nm = 2000\n"
        "fill_layer = 100\n"
        "cmp_z0_nm = 1000\n"
        "cmp_rate_nm_per_min = 300\n"
        "cmp_time_min = 1.5\n"
        "spec_target_nm = 500\n";
  } else if (name == "chip22") {
    f.layout = chip22(seed);
    body = ild +
           "cell_size_nm = 40000\n"
           "pixel_nm = 50\n"
           "fill_min_spacing_nm = 3000\n"
           "fill_dummy_size_nm = 10000\n"
           "fill_dummy_pitch_nm = 20000\n"
           "fill_layer = 100\n" +
           cmp;
  } else if (name == "square") {
    f.layout = single_square();
    body = ild + "cell_size_nm = 20000\nwindow_diameter_nm = 200000\n" + cmp;
  } else if (name == "checkerboard") {
    f.layout = checkerboard(200 * um, 8);
    body = "step_height_nm = 500\nfilm = layout\ncell_size_nm = 40000\n"
           "window_diameter_nm = 160000\nwindow_flat = true\n" + cmp;
  } else if (name == "blanket") {
    f.layout = blanket();
    body = "step_height_nm = 500\nfilm = layout\ncell_size_nm = 40000\n"
           "window_diameter_nm = 200000\n" + cmp;
  } else if (name == "empty") {
    f.layout = empty_die();
    body = ild + "cell_size_nm = 40000\nwindow_diameter_nm = 200000\n" + cmp;
  } else {
    throw ConfigError("unknown fixture '" + name + "' (known: " + fixture_names() + ")");
  }
  f.config = "# generated fixture '" + name + "', seed " + std::to_string(seed) + "\n" +
             "input = " + name + ".gds\n" + "layers = 1\n" + body + "out_dir = " + name + "_out\n";
  return f;
}

}  // namespace cmpfill::fixtures
