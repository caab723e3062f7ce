#pragma once

// GDSII stream subset: geometry extraction with reference flattening.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cmpfill/error.hpp"
#include "cmpfill/geometry.hpp"

namespace cmpfill::gds {

enum class ErrorKind {
  Truncated,
  OddLength,
  BadLength,
  UnknownRecord,
  BadDataType,
  UnexpectedRecord,
  NonOrthogonalAngle,
  Magnification,
  MultipleTopCells,
  NoTopCell,
  NonRectilinear,
  InvalidPolygon,
  UnsupportedPath,
  UnresolvedReference,
  RecursiveReference,
  NonIntegralUnits,
  CoordinateOverflow,
  FlattenLimit,
  EmptyLayout,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Truncated: return "truncated record";
    case ErrorKind::OddLength: return "odd record length";
    case ErrorKind::BadLength: return "bad record length";
    case ErrorKind::UnknownRecord: return "unknown record";
    case ErrorKind::BadDataType: return "bad data type";
    case ErrorKind::UnexpectedRecord: return "unexpected record";
    case ErrorKind::NonOrthogonalAngle: return "non-orthogonal angle";
    case ErrorKind::Magnification: return "magnification not 1";
    case ErrorKind::MultipleTopCells: return "multiple top cells";
    case ErrorKind::NoTopCell: return "no top cell";
    case ErrorKind::NonRectilinear: return "non-rectilinear boundary";
    case ErrorKind::InvalidPolygon: return "invalid polygon";
    case ErrorKind::UnsupportedPath: return "unsupported path";
    case ErrorKind::UnresolvedReference: return "unresolved reference";
    case ErrorKind::RecursiveReference: return "recursive reference";
    case ErrorKind::NonIntegralUnits: return "non-integral database unit";
    case ErrorKind::CoordinateOverflow: return "coordinate overflow";
    case ErrorKind::FlattenLimit: return "flattened polygon limit exceeded";
    case ErrorKind::EmptyLayout: return "empty layout";
  }
  return "?";
}

class GdsError : public Error {
 public:
  GdsError(ErrorKind kind, std::size_t offset, const std::string& detail)
      : Error(std::string(to_string(kind)) + " at byte " + std::to_string(offset) +
              (detail.empty() ? "" : ": " + detail)),
        kind_(kind),
        offset_(offset) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ErrorKind kind_;
  std::size_t offset_;
};

namespace rec {
inline constexpr std::uint8_t HEADER = 0x00, BGNLIB = 0x01, LIBNAME = 0x02, UNITS = 0x03,
                              ENDLIB = 0x04, BGNSTR = 0x05, STRNAME = 0x06, ENDSTR = 0x07,
                              BOUNDARY = 0x08, PATH = 0x09, SREF = 0x0A, AREF = 0x0B,
                              TEXT = 0x0C, LAYER = 0x0D, DATATYPE = 0x0E, WIDTH = 0x0F,
                              XY = 0x10, ENDEL = 0x11, SNAME = 0x12, COLROW = 0x13,
                              NODE = 0x15, STRANS = 0x1A, MAG = 0x1B, ANGLE = 0x1C,
                              PATHTYPE = 0x21, BOX = 0x2D, BOXTYPE = 0x2E;
}  // namespace rec

namespace dt {
inline constexpr std::uint8_t None = 0, Bits = 1, Int2 = 2, Int4 = 3, Real4 = 4, Real8 = 5,
                              Ascii = 6;
}  // namespace dt

namespace detail {

// Expected data type per record type; -1 marks record numbers this reader
// does not know.
inline int expected_datatype(std::uint8_t type) {
  static constexpr int table[] = {
      2, 2, 6, 5, 0, 2, 6, 0, 0, 0, 0, 0, 0, 2, 2, 3,   // 0x00-0x0F
      3, 0, 6, 2, 0, 0, 2, 1, -1, 6, 1, 5, 5, -1, -1, 6,  // 0x10-0x1F
      6, 2, 2, 6, 6, 2, 1, 3, -1, -1, 2, 2, 6, 0, 2, 3,   // 0x20-0x2F
      3, 3, 2, 2, 1, 3, 2, 6, 0, 2, 6, 2,                 // 0x30-0x3B
  };
  if (type >= std::size(table)) return -1;
  return table[type];
}

// Records carrying no geometry that may appear anywhere and are skipped.
inline bool skippable(std::uint8_t type) {
  switch (type) {
    case 0x14: case 0x16: case 0x17: case 0x19: case 0x1F: case 0x20: case 0x22:
    case 0x23: case 0x24: case 0x25: case 0x26: case 0x27: case 0x2A: case 0x2B:
    case 0x2C: case 0x2E: case 0x2F: case 0x30: case 0x31: case 0x32: case 0x33:
    case 0x34: case 0x35: case 0x36: case 0x37: case 0x38: case 0x39: case 0x3A:
    case 0x3B:
      return true;
    default:
      return false;
  }
}

struct Record {
  std::size_t offset = 0;
  std::uint8_t type = 0;
  std::uint8_t datatype = 0;
  std::span<const std::uint8_t> payload;

  std::int16_t i16(std::size_t k) const {
    return static_cast<std::int16_t>((payload[2 * k] << 8) | payload[2 * k + 1]);
  }
  std::int32_t i32(std::size_t k) const {
    const auto* p = payload.data() + 4 * k;
    return static_cast<std::int32_t>((std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                                     (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]));
  }
  std::string ascii() const {
    std::string s(payload.begin(), payload.end());
    while (!s.empty() && s.back() == '\0') s.pop_back();
    return s;
  }
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool at_end() const { return pos_ >= bytes_.size(); }
  std::size_t pos() const { return pos_; }

  Record next() {
    Record r;
    r.offset = pos_;
    if (bytes_.size() - pos_ < 4) {
      throw GdsError(ErrorKind::Truncated, pos_, "record header needs 4 bytes");
    }
    const std::size_t len = (std::size_t(bytes_[pos_]) << 8) | bytes_[pos_ + 1];
    r.type = bytes_[pos_ + 2];
    r.datatype = bytes_[pos_ + 3];
    if (len < 4) throw GdsError(ErrorKind::BadLength, pos_, "length " + std::to_string(len));
    if (len % 2) throw GdsError(ErrorKind::OddLength, pos_, "length " + std::to_string(len));
    if (len > bytes_.size() - pos_) {
      throw GdsError(ErrorKind::Truncated, pos_,
                     "record declares " + std::to_string(len) + " bytes, " +
                         std::to_string(bytes_.size() - pos_) + " remain");
    }
    const int expect = expected_datatype(r.type);
    if (expect < 0) {
      throw GdsError(ErrorKind::UnknownRecord, pos_, "record type " + std::to_string(r.type));
    }
    if (r.datatype != expect) {
      throw GdsError(ErrorKind::BadDataType, pos_,
                     "record type " + std::to_string(r.type) + " has data type " +
                         std::to_string(r.datatype));
    }
    r.payload = bytes_.subspan(pos_ + 4, len - 4);
    static constexpr std::size_t unit[] = {1, 2, 2, 4, 4, 8, 1};
    if (r.payload.size() % unit[r.datatype] != 0) {
      throw GdsError(ErrorKind::BadLength, pos_, "payload not a whole number of items");
    }
    pos_ += len;
    return r;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline void need_items(const Record& r, std::size_t item, std::size_t count) {
  if (r.payload.size() < item * count) {
    throw GdsError(ErrorKind::BadLength, r.offset, "record payload too short");
  }
}

// 2x2 integer matrix (entries in {-1, 0, 1}) plus translation.
struct Affine {
  int a = 1, b = 0, c = 0, d = 1;
  std::int64_t tx = 0, ty = 0;

  Point apply(Point p) const {
    return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty};
  }
  Affine then(const Affine& outer) const {
    Affine r;
    r.a = outer.a * a + outer.b * c;
    r.b = outer.a * b + outer.b * d;
    r.c = outer.c * a + outer.d * c;
    r.d = outer.c * b + outer.d * d;
    const Point t = outer.apply({tx, ty});
    r.tx = t.x;
    r.ty = t.y;
    return r;
  }
};

struct Ref {
  std::size_t offset = 0;
  std::string name;
  bool reflect = false;
  int quarter_turns = 0;
  bool is_array = false;
  int cols = 1, rows = 1;
  std::vector<Point> xy;
};

struct Cell {
  std::size_t offset = 0;
  std::vector<Polygon> polygons;  // database units
  std::vector<std::size_t> polygon_offsets;
  std::vector<Rect> die_boxes;
  std::vector<Ref> refs;
};

}  // namespace detail

/// IBM excess-64 base-16 8-byte real.
inline double decode_real8(std::span<const std::uint8_t> b) {
  std::uint64_t mant = 0;
  for (int i = 1; i < 8; ++i) mant = (mant << 8) | b[i];
  const bool neg = b[0] & 0x80;
  const int exp = (b[0] & 0x7F) - 64;
  const long double v = std::ldexp(static_cast<long double>(mant), 4 * exp - 56);
  return static_cast<double>(neg ? -v : v);
}

inline std::array<std::uint8_t, 8> encode_real8(double v) {
  std::array<std::uint8_t, 8> out{};
  if (v == 0.0 || !std::isfinite(v)) return out;
  const bool neg = v < 0;
  double m = std::fabs(v);
  int exp = 0;
  while (m >= 1.0) {
    m /= 16.0;
    ++exp;
  }
  while (m < 1.0 / 16.0) {
    m *= 16.0;
    --exp;
  }
  std::uint64_t mant = static_cast<std::uint64_t>(std::llround(std::ldexp(m, 56)));
  if (mant >> 56) {  // rounding carried into a new hex digit
    mant >>= 4;
    ++exp;
  }
  out[0] = static_cast<std::uint8_t>((neg ? 0x80 : 0) | ((exp + 64) & 0x7F));
  for (int i = 7; i >= 1; --i) {
    out[i] = static_cast<std::uint8_t>(mant & 0xFF);
    mant >>= 8;
  }
  return out;
}

struct ReadOptions {
  /// Top structure to flatten; auto-detected when unset.
  std::optional<std::string> top_cell;
  /// BOX elements on this layer define the die and are not geometry. When no
  /// such box exists, the die is the bounding box of all geometry.
  std::optional<int> die_layer = 255;
  /// Round coordinates to the nearest nm when the database unit is not an
  /// integer number of nanometers.
  bool snap_units = false;
  std::uint64_t max_polygons = 50'000'000;
};

struct ParseInfo {
  std::string top_cell;
  std::size_t skipped_text = 0;
  std::size_t skipped_node = 0;
  std::size_t structures = 0;
};

namespace detail {

class Parser {
 public:
  Parser(std::span<const std::uint8_t> bytes, const ReadOptions& opt, ParseInfo& info)
      : rd_(bytes), opt_(opt), info_(info) {}

  LayoutDB run() {
    parse_stream();
    return flatten();
  }

 private:
  Record expect(std::uint8_t type) {
    Record r = next_significant();
    if (r.type != type) {
      throw GdsError(ErrorKind::UnexpectedRecord, r.offset,
                     "record type " + std::to_string(r.type) + ", expected " + std::to_string(type));
    }
    return r;
  }

  Record next_significant() {
    for (;;) {
      Record r = rd_.next();
      if (!skippable(r.type)) return r;
    }
  }

  void parse_stream() {
    expect(rec::HEADER);
    expect(rec::BGNLIB);
    expect(rec::LIBNAME);
    Record units = expect(rec::UNITS);
    need_items(units, 8, 2);
    const double meters_per_db = decode_real8(units.payload.subspan(8, 8));
    nm_per_db_ = meters_per_db * 1e9;
    if (!(nm_per_db_ > 0) || !std::isfinite(nm_per_db_)) {
      throw GdsError(ErrorKind::NonIntegralUnits, units.offset, "database unit is not positive");
    }
    const double rounded = std::round(nm_per_db_);
    if (rounded >= 1 && std::fabs(nm_per_db_ - rounded) <= 1e-9 * rounded) {
      scale_ = static_cast<std::int64_t>(rounded);
    } else if (!opt_.snap_units) {
      throw GdsError(ErrorKind::NonIntegralUnits, units.offset,
                     std::to_string(nm_per_db_) + " nm per database unit");
    }
    for (;;) {
      Record r = next_significant();
      if (r.type == rec::ENDLIB) return;
      if (r.type != rec::BGNSTR) {
        throw GdsError(ErrorKind::UnexpectedRecord, r.offset, "expected BGNSTR or ENDLIB");
      }
      parse_structure(r.offset);
    }
  }

  void parse_structure(std::size_t offset) {
    Record name = expect(rec::STRNAME);
    Cell cell;
    cell.offset = offset;
    const std::string cname = name.ascii();
    for (;;) {
      Record r = next_significant();
      switch (r.type) {
        case rec::ENDSTR:
          if (!cells_.emplace(cname, std::move(cell)).second) {
            throw GdsError(ErrorKind::UnexpectedRecord, name.offset, "duplicate structure '" + cname + "'");
          }
          ++info_.structures;
          return;
        case rec::BOUNDARY: parse_boundary(cell, r.offset, false); break;
        case rec::BOX: parse_boundary(cell, r.offset, true); break;
        case rec::PATH: parse_path(cell, r.offset); break;
        case rec::SREF: parse_ref(cell, r.offset, false); break;
        case rec::AREF: parse_ref(cell, r.offset, true); break;
        case rec::TEXT:
          skip_element();
          ++info_.skipped_text;
          break;
        case rec::NODE:
          skip_element();
          ++info_.skipped_node;
          break;
        default:
          throw GdsError(ErrorKind::UnexpectedRecord, r.offset,
                         "record type " + std::to_string(r.type) + " inside structure");
      }
    }
  }

  void skip_element() {
    for (;;) {
      Record r = rd_.next();
      if (r.type == rec::ENDEL) return;
      if (r.type == rec::ENDSTR || r.type == rec::ENDLIB || r.type == rec::BGNSTR) {
        throw GdsError(ErrorKind::UnexpectedRecord, r.offset, "element not terminated by ENDEL");
      }
    }
  }

  std::vector<Point> read_xy(const Record& r) {
    std::vector<Point> pts;
    const std::size_t n = r.payload.size() / 8;
    pts.reserve(n);
    for (std::size_t k = 0; k < n; ++k) pts.push_back({r.i32(2 * k), r.i32(2 * k + 1)});
    return pts;
  }

  void parse_boundary(Cell& cell, std::size_t offset, bool is_box) {
    std::optional<int> layer;
    std::vector<Point> xy;
    for (;;) {
      Record r = next_significant();
      if (r.type == rec::ENDEL) break;
      switch (r.type) {
        case rec::LAYER: need_items(r, 2, 1); layer = r.i16(0); break;
        case rec::DATATYPE: break;
        case rec::XY: xy = read_xy(r); break;
        default:
          throw GdsError(ErrorKind::UnexpectedRecord, r.offset,
                         "record type " + std::to_string(r.type) + " in boundary");
      }
    }
    if (!layer || xy.empty()) {
      throw GdsError(ErrorKind::InvalidPolygon, offset, "boundary without LAYER or XY");
    }
    if (*layer < 0) throw GdsError(ErrorKind::InvalidPolygon, offset, "negative layer");
    if (xy.size() < 5 || xy.front() != xy.back()) {
      throw GdsError(ErrorKind::InvalidPolygon, offset, "boundary ring is not closed");
    }
    xy.pop_back();
    for (std::size_t i = 0; i < xy.size(); ++i) {
      const Point& a = xy[i];
      const Point& b = xy[(i + 1) % xy.size()];
      if (a.x != b.x && a.y != b.y) {
        throw GdsError(ErrorKind::NonRectilinear, offset,
                       "edge (" + std::to_string(a.x) + "," + std::to_string(a.y) + ")-(" +
                           std::to_string(b.x) + "," + std::to_string(b.y) + ")");
      }
    }
    Polygon p{std::move(xy), *layer};
    p = canonical(std::move(p));
    try {
      validate(p);
    } catch (const ValidationError& e) {
      throw GdsError(ErrorKind::InvalidPolygon, offset, e.what());
    }
    if (is_box && opt_.die_layer && *layer == *opt_.die_layer) {
      cell.die_boxes.push_back(bbox(p));
      return;
    }
    cell.polygons.push_back(std::move(p));
    cell.polygon_offsets.push_back(offset);
  }

  void parse_path(Cell& cell, std::size_t offset) {
    std::optional<int> layer;
    int pathtype = 0;
    std::int64_t width = 0;
    std::vector<Point> xy;
    for (;;) {
      Record r = next_significant();
      if (r.type == rec::ENDEL) break;
      switch (r.type) {
        case rec::LAYER: need_items(r, 2, 1); layer = r.i16(0); break;
        case rec::DATATYPE: break;
        case rec::PATHTYPE: need_items(r, 2, 1); pathtype = r.i16(0); break;
        case rec::WIDTH: need_items(r, 4, 1); width = r.i32(0); break;
        case rec::XY: xy = read_xy(r); break;
        default:
          throw GdsError(ErrorKind::UnexpectedRecord, r.offset,
                         "record type " + std::to_string(r.type) + " in path");
      }
    }
    if (!layer || *layer < 0 || xy.size() < 2) {
      throw GdsError(ErrorKind::UnsupportedPath, offset, "path without LAYER or two XY points");
    }
    if (pathtype != 0 && pathtype != 2) {
      throw GdsError(ErrorKind::UnsupportedPath, offset, "pathtype " + std::to_string(pathtype));
    }
    if (width <= 0) {
      throw GdsError(ErrorKind::UnsupportedPath, offset, "path width must be positive");
    }
    if (width % 2) {
      throw GdsError(ErrorKind::UnsupportedPath, offset, "odd path width");
    }
    const std::int64_t half = width / 2;
    const std::int64_t ext = pathtype == 2 ? half : 0;
    for (std::size_t i = 0; i + 1 < xy.size(); ++i) {
      const Point a = xy[i], b = xy[i + 1];
      if (a == b) continue;
      Rect r;
      if (a.y == b.y) {
        r = {std::min(a.x, b.x) - ext, a.y - half, std::max(a.x, b.x) + ext, a.y + half};
      } else if (a.x == b.x) {
        r = {a.x - half, std::min(a.y, b.y) - ext, a.x + half, std::max(a.y, b.y) + ext};
      } else {
        throw GdsError(ErrorKind::UnsupportedPath, offset, "non-orthogonal path segment");
      }
      cell.polygons.push_back(make_rect_polygon(r, *layer));
      cell.polygon_offsets.push_back(offset);
    }
  }

  void parse_ref(Cell& cell, std::size_t offset, bool is_array) {
    Ref ref;
    ref.offset = offset;
    ref.is_array = is_array;
    bool have_name = false;
    for (;;) {
      Record r = next_significant();
      if (r.type == rec::ENDEL) break;
      switch (r.type) {
        case rec::SNAME:
          ref.name = r.ascii();
          have_name = true;
          break;
        case rec::STRANS: {
          need_items(r, 2, 1);
          const std::uint16_t bits = static_cast<std::uint16_t>(r.i16(0));
          ref.reflect = bits & 0x8000;
          if (bits & 0x0006) {
            throw GdsError(ErrorKind::UnexpectedRecord, r.offset, "absolute magnification/angle not supported");
          }
          break;
        }
        case rec::MAG: {
          need_items(r, 8, 1);
          const double mag = decode_real8(r.payload.subspan(0, 8));
          if (std::fabs(mag - 1.0) > 1e-12) {
            throw GdsError(ErrorKind::Magnification, r.offset, "magnification " + std::to_string(mag));
          }
          break;
        }
        case rec::ANGLE: {
          need_items(r, 8, 1);
          const double ang = decode_real8(r.payload.subspan(0, 8));
          const double q = ang / 90.0;
          const double qr = std::round(q);
          if (!std::isfinite(q) || std::fabs(q - qr) > 1e-9) {
            throw GdsError(ErrorKind::NonOrthogonalAngle, r.offset, "angle " + std::to_string(ang));
          }
          ref.quarter_turns = static_cast<int>(std::fmod(std::fmod(qr, 4.0) + 4.0, 4.0));
          break;
        }
        case rec::COLROW:
          need_items(r, 2, 2);
          ref.cols = r.i16(0);
          ref.rows = r.i16(1);
          break;
        case rec::XY: ref.xy = read_xy(r); break;
        default:
          throw GdsError(ErrorKind::UnexpectedRecord, r.offset,
                         "record type " + std::to_string(r.type) + " in reference");
      }
    }
    if (!have_name) throw GdsError(ErrorKind::UnresolvedReference, offset, "reference without SNAME");
    if (ref.xy.size() != (is_array ? 3u : 1u)) {
      throw GdsError(ErrorKind::UnexpectedRecord, offset, "reference has wrong XY count");
    }
    if (is_array && (ref.cols <= 0 || ref.rows <= 0)) {
      throw GdsError(ErrorKind::UnexpectedRecord, offset, "array reference needs positive COLROW");
    }
    cell.refs.push_back(std::move(ref));
  }

  // Polygons plus placed instances of a fully flattened cell, saturating at
  // the limit; bounds the work of emit().
  std::uint64_t flat_count(const std::string& name, std::size_t offset) {
    if (auto it = counts_.find(name); it != counts_.end()) return it->second;
    auto cit = cells_.find(name);
    if (cit == cells_.end()) throw GdsError(ErrorKind::UnresolvedReference, offset, "structure '" + name + "'");
    if (!visiting_.insert(name).second) {
      throw GdsError(ErrorKind::RecursiveReference, offset, "structure '" + name + "'");
    }
    if (visiting_.size() > 4096) throw GdsError(ErrorKind::FlattenLimit, offset, "hierarchy too deep");
    const std::uint64_t limit = opt_.max_polygons + 1;
    std::uint64_t n = cit->second.polygons.size() + cit->second.die_boxes.size();
    for (const Ref& r : cit->second.refs) {
      const std::uint64_t child = flat_count(r.name, r.offset);
      const std::uint64_t inst = static_cast<std::uint64_t>(r.cols) * r.rows;
      const std::uint64_t per = std::min(limit, child + 1);
      const std::uint64_t add = inst > limit / per ? limit : per * inst;
      n = std::min(limit, n + add);
    }
    visiting_.erase(name);
    counts_[name] = n;
    return n;
  }

  std::string find_top() {
    if (opt_.top_cell) {
      if (!cells_.count(*opt_.top_cell)) {
        throw GdsError(ErrorKind::NoTopCell, rd_.pos(), "structure '" + *opt_.top_cell + "' not found");
      }
      return *opt_.top_cell;
    }
    std::set<std::string> referenced;
    for (const auto& [name, cell] : cells_) {
      for (const Ref& r : cell.refs) referenced.insert(r.name);
    }
    std::vector<std::string> tops;
    for (const auto& [name, cell] : cells_) {
      if (!referenced.count(name)) tops.push_back(name);
    }
    if (tops.empty()) throw GdsError(ErrorKind::NoTopCell, rd_.pos(), "every structure is referenced");
    if (tops.size() > 1) {
      std::string names;
      for (const auto& t : tops) names += (names.empty() ? "" : ", ") + t;
      throw GdsError(ErrorKind::MultipleTopCells, rd_.pos(), names);
    }
    return tops.front();
  }

  Nm to_nm(std::int64_t v, std::size_t offset) const {
    if (scale_ > 0) {
      const __int128 s = static_cast<__int128>(v) * scale_;
      if (s > std::numeric_limits<std::int32_t>::max() * __int128{1000} ||
          s < std::numeric_limits<std::int32_t>::min() * __int128{1000}) {
        throw GdsError(ErrorKind::CoordinateOverflow, offset, "coordinate out of range");
      }
      return static_cast<Nm>(s);
    }
    const double d = std::round(static_cast<double>(v) * nm_per_db_);
    if (std::fabs(d) > 2.0e12) throw GdsError(ErrorKind::CoordinateOverflow, offset, "coordinate out of range");
    return static_cast<Nm>(d);
  }

  void emit(const std::string& name, const Affine& t, LayoutDB& db, std::vector<Rect>& die_boxes) {
    const Cell& cell = cells_.at(name);
    for (std::size_t k = 0; k < cell.polygons.size(); ++k) {
      const Polygon& src = cell.polygons[k];
      const std::size_t off = cell.polygon_offsets[k];
      Polygon p;
      p.layer = src.layer;
      p.vertices.reserve(src.vertices.size());
      for (const Point& v : src.vertices) {
        const Point w = t.apply(v);
        p.vertices.push_back({to_nm(w.x, off), to_nm(w.y, off)});
      }
      p = canonical(std::move(p));
      try {
        validate(p);
      } catch (const ValidationError& e) {
        throw GdsError(ErrorKind::InvalidPolygon, off, e.what());
      }
      db.add(std::move(p));
    }
    for (const Rect& b : cell.die_boxes) {
      const Point a = t.apply({b.x0, b.y0}), c = t.apply({b.x1, b.y1});
      die_boxes.push_back({to_nm(std::min(a.x, c.x), cell.offset), to_nm(std::min(a.y, c.y), cell.offset),
                           to_nm(std::max(a.x, c.x), cell.offset), to_nm(std::max(a.y, c.y), cell.offset)});
    }
    for (const Ref& r : cell.refs) {
      Affine local;
      if (r.reflect) local.d = -1;
      Affine rot;
      static constexpr int cs[4] = {1, 0, -1, 0}, sn[4] = {0, 1, 0, -1};
      rot.a = cs[r.quarter_turns];
      rot.b = -sn[r.quarter_turns];
      rot.c = sn[r.quarter_turns];
      rot.d = cs[r.quarter_turns];
      local = local.then(rot);
      if (!r.is_array) {
        Affine place = local;
        place.tx = r.xy[0].x;
        place.ty = r.xy[0].y;
        emit(r.name, place.then(t), db, die_boxes);
        continue;
      }
      const Point o = r.xy[0];
      const std::int64_t cdx = r.xy[1].x - o.x, cdy = r.xy[1].y - o.y;
      const std::int64_t rdx = r.xy[2].x - o.x, rdy = r.xy[2].y - o.y;
      if (cdx % r.cols || cdy % r.cols || rdx % r.rows || rdy % r.rows) {
        throw GdsError(ErrorKind::UnexpectedRecord, r.offset, "array pitch is not integral");
      }
      for (int row = 0; row < r.rows; ++row) {
        for (int col = 0; col < r.cols; ++col) {
          Affine place = local;
          place.tx = o.x + col * (cdx / r.cols) + row * (rdx / r.rows);
          place.ty = o.y + col * (cdy / r.cols) + row * (rdy / r.rows);
          emit(r.name, place.then(t), db, die_boxes);
        }
      }
    }
  }

  LayoutDB flatten() {
    const std::string top = find_top();
    info_.top_cell = top;
    if (flat_count(top, cells_.at(top).offset) > opt_.max_polygons) {
      throw GdsError(ErrorKind::FlattenLimit, cells_.at(top).offset,
                     "more than " + std::to_string(opt_.max_polygons) + " polygons");
    }
    LayoutDB db;
    db.nm_per_db = nm_per_db_;
    std::vector<Rect> die_boxes;
    emit(top, Affine{}, db, die_boxes);
    db.canonicalize();
    bool first = true;
    Rect die;
    auto grow = [&](const Rect& r) {
      if (first) {
        die = r;
        first = false;
      } else {
        die = {std::min(die.x0, r.x0), std::min(die.y0, r.y0), std::max(die.x1, r.x1), std::max(die.y1, r.y1)};
      }
    };
    if (!die_boxes.empty()) {
      for (const Rect& b : die_boxes) grow(b);
    } else {
      for (const auto& [id, polys] : db.layers) {
        for (const auto& p : polys) grow(bbox(p));
      }
    }
    if (first || die.empty()) throw GdsError(ErrorKind::EmptyLayout, cells_.at(top).offset, "no geometry and no die box");
    db.die = die;
    for (const auto& [id, polys] : db.layers) {
      for (const auto& p : polys) {
        if (!die.contains(bbox(p))) {
          throw GdsError(ErrorKind::InvalidPolygon, cells_.at(top).offset,
                         "polygon on layer " + std::to_string(id) + " outside the die box");
        }
      }
    }
    return db;
  }

  Reader rd_;
  const ReadOptions& opt_;
  ParseInfo& info_;
  double nm_per_db_ = 1.0;
  std::int64_t scale_ = 0;
  std::map<std::string, Cell> cells_;
  std::map<std::string, std::uint64_t> counts_;
  std::set<std::string> visiting_;
};

}  // namespace detail

/// Parses a GDSII stream and flattens its top structure into integer-nm
/// polygons. Throws GdsError (with the byte offset) on any malformed or
/// out-of-subset input.
inline LayoutDB parse_gds(std::span<const std::uint8_t> bytes, const ReadOptions& opt = {},
                          ParseInfo* info = nullptr) {
  ParseInfo local;
  detail::Parser parser(bytes, opt, info ? *info : local);
  return parser.run();
}

struct WriteOptions {
  std::string library = "CMPFILL";
  std::string cell = "TOP";
  /// Layer of the BOX element recording the die; unset omits it.
  std::optional<int> die_layer = 255;
};

namespace detail {

class Writer {
 public:
  void record(std::uint8_t type, std::uint8_t datatype, std::span<const std::uint8_t> payload = {}) {
    const std::size_t len = 4 + payload.size();
    if (len > 0xFFFF) throw Error("GDS record too long");
    out.push_back(static_cast<std::uint8_t>(len >> 8));
    out.push_back(static_cast<std::uint8_t>(len & 0xFF));
    out.push_back(type);
    out.push_back(datatype);
    out.insert(out.end(), payload.begin(), payload.end());
  }
  void int2(std::uint8_t type, std::initializer_list<std::int16_t> vals) {
    std::vector<std::uint8_t> p;
    for (auto v : vals) {
      p.push_back(static_cast<std::uint8_t>((static_cast<std::uint16_t>(v) >> 8) & 0xFF));
      p.push_back(static_cast<std::uint8_t>(static_cast<std::uint16_t>(v) & 0xFF));
    }
    record(type, dt::Int2, p);
  }
  void ascii(std::uint8_t type, std::string s) {
    if (s.size() % 2) s.push_back('\0');
    record(type, dt::Ascii, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }
  void xy(std::span<const Point> pts) {
    std::vector<std::uint8_t> p;
    p.reserve(pts.size() * 8);
    auto put = [&](Nm v) {
      if (v > std::numeric_limits<std::int32_t>::max() || v < std::numeric_limits<std::int32_t>::min()) {
        throw Error("coordinate " + std::to_string(v) + " does not fit a GDS 32-bit integer");
      }
      const auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
      for (int s = 24; s >= 0; s -= 8) p.push_back(static_cast<std::uint8_t>((u >> s) & 0xFF));
    };
    for (const Point& q : pts) {
      put(q.x);
      put(q.y);
    }
    record(rec::XY, dt::Int4, p);
  }

  std::vector<std::uint8_t> out;
};

}  // namespace detail

/// Serializes the layout as one flat structure with a 1 nm database unit.
/// Polygons are written per layer in the database's canonical order.
inline std::vector<std::uint8_t> write_gds(const LayoutDB& db, const WriteOptions& opt = {}) {
  detail::Writer w;
  w.int2(rec::HEADER, {600});
  // Fixed timestamps keep output byte-identical across runs.
  w.int2(rec::BGNLIB, {2000, 1, 1, 0, 0, 0, 2000, 1, 1, 0, 0, 0});
  w.ascii(rec::LIBNAME, opt.library);
  std::vector<std::uint8_t> units;
  for (double v : {1e-3, 1e-9}) {
    auto b = encode_real8(v);
    units.insert(units.end(), b.begin(), b.end());
  }
  w.record(rec::UNITS, dt::Real8, units);
  w.int2(rec::BGNSTR, {2000, 1, 1, 0, 0, 0, 2000, 1, 1, 0, 0, 0});
  w.ascii(rec::STRNAME, opt.cell);
  if (opt.die_layer) {
    w.record(rec::BOX, dt::None);
    w.int2(rec::LAYER, {static_cast<std::int16_t>(*opt.die_layer)});
    w.int2(rec::BOXTYPE, {0});
    const Rect& d = db.die;
    const Point ring[] = {{d.x0, d.y0}, {d.x1, d.y0}, {d.x1, d.y1}, {d.x0, d.y1}, {d.x0, d.y0}};
    w.xy(ring);
    w.record(rec::ENDEL, dt::None);
  }
  std::vector<Point> ring;
  for (const auto& [layer, polys] : db.layers) {
    if (layer > std::numeric_limits<std::int16_t>::max()) throw Error("layer id does not fit GDS");
    for (const Polygon& p : polys) {
      if (p.vertices.size() + 1 > 8191) throw Error("polygon has too many vertices for one GDS XY record");
      w.record(rec::BOUNDARY, dt::None);
      w.int2(rec::LAYER, {static_cast<std::int16_t>(layer)});
      w.int2(rec::DATATYPE, {0});
      ring.assign(p.vertices.begin(), p.vertices.end());
      ring.push_back(p.vertices.front());
      w.xy(ring);
      w.record(rec::ENDEL, dt::None);
    }
  }
  w.record(rec::ENDSTR, dt::None);
  w.record(rec::ENDLIB, dt::None);
  return std::move(w.out);
}

}  // namespace cmpfill::gds
