#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmpfill/error.hpp"
#include "cmpfill/fft.hpp"
#include "cmpfill/geometry.hpp"

namespace cmpfill {

enum class GridKind { Raw, Effective, Thickness, Plan, Cap };

inline const char* to_string(GridKind k) {
  switch (k) {
    case GridKind::Raw: return "raw";
    case GridKind::Effective: return "effective";
    case GridKind::Thickness: return "thickness";
    case GridKind::Plan: return "plan";
    case GridKind::Cap: return "cap";
  }
  return "?";
}

inline GridKind grid_kind_from_string(const std::string& s) {
  if (s == "raw") return GridKind::Raw;
  if (s == "effective") return GridKind::Effective;
  if (s == "thickness") return GridKind::Thickness;
  if (s == "plan") return GridKind::Plan;
  if (s == "cap") return GridKind::Cap;
  throw ConfigError("unknown grid kind '" + s + "'");
}

/// Row-major grid of cell values; row iy = 0 is the bottom of the die.
/// Density-like kinds hold values in [0,1]; thickness holds nm.
struct Grid {
  Point origin;
  Nm cell_size = 1;
  int nx = 0;
  int ny = 0;
  GridKind kind = GridKind::Raw;
  std::vector<double> values;

  static Grid covering(const Rect& die, Nm cell_size, GridKind kind) {
    if (cell_size <= 0) throw ConfigError("cell size must be positive");
    if (die.empty()) throw ConfigError("die is empty");
    Grid g;
    g.origin = {die.x0, die.y0};
    g.cell_size = cell_size;
    g.nx = static_cast<int>((die.width() + cell_size - 1) / cell_size);
    g.ny = static_cast<int>((die.height() + cell_size - 1) / cell_size);
    g.kind = kind;
    g.values.assign(g.size(), 0.0);
    return g;
  }

  Grid like(GridKind k, double fill = 0.0) const {
    Grid g = *this;
    g.kind = k;
    g.values.assign(size(), fill);
    return g;
  }

  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * nx + ix;
  }
  double& at(int ix, int iy) { return values[index(ix, iy)]; }
  double at(int ix, int iy) const { return values[index(ix, iy)]; }

  Rect cell_rect(int ix, int iy) const {
    return {origin.x + ix * cell_size, origin.y + iy * cell_size,
            origin.x + (ix + 1) * cell_size, origin.y + (iy + 1) * cell_size};
  }
  Rect extent() const {
    return {origin.x, origin.y, origin.x + nx * cell_size,
            origin.y + ny * cell_size};
  }
  /// Cell center in nm (may be fractional for odd cell sizes).
  std::pair<double, double> center(int ix, int iy) const {
    return {static_cast<double>(origin.x) + (ix + 0.5) * static_cast<double>(cell_size),
            static_cast<double>(origin.y) + (iy + 0.5) * static_cast<double>(cell_size)};
  }
  bool same_geometry(const Grid& o) const {
    return origin == o.origin && cell_size == o.cell_size && nx == o.nx &&
           ny == o.ny;
  }

  void validate() const {
    if (cell_size <= 0) throw ValidationError("grid cell size must be positive");
    if (values.size() != size()) throw ValidationError("grid value count mismatch");
    for (double v : values) {
      if (!std::isfinite(v)) throw ValidationError("non-finite grid value");
      if (kind != GridKind::Thickness && (v < 0.0 || v > 1.0)) {
        throw ValidationError("density value outside [0,1]");
      }
    }
  }
};

inline std::pair<double, double> min_max(const Grid& g) {
  if (g.values.empty()) throw ConfigError("empty grid");
  auto [lo, hi] = std::minmax_element(g.values.begin(), g.values.end());
  return {*lo, *hi};
}

inline double mean(const Grid& g) {
  if (g.values.empty()) throw ConfigError("empty grid");
  double s = 0.0;
  for (double v : g.values) s += v;
  return s / static_cast<double>(g.values.size());
}

/// Circular planarization window with Gaussian weighting.
struct WindowSpec {
  WindowSpec() = default;
  WindowSpec(Nm d) : diameter(d) {}

  Nm diameter = 2'500'000;
  /// Defaults to diameter / 4 when unset.
  std::optional<double> sigma;
  /// Uniform weights over the disk (the infinite-sigma limit).
  bool flat = false;

  double sigma_nm() const {
    return sigma ? *sigma : static_cast<double>(diameter) / 4.0;
  }
  void validate() const {
    if (diameter <= 0) throw ConfigError("window diameter must be positive");
    if (!flat && !(sigma_nm() > 0.0)) throw ConfigError("window sigma must be positive");
  }
};

/// Odd-sized square weight array; `radius` cells on each side of the center.
struct Kernel {
  int radius = 0;
  std::vector<double> weights;

  int dim() const { return 2 * radius + 1; }
  double at(int dx, int dy) const {
    return weights[static_cast<std::size_t>(dy + radius) * dim() + (dx + radius)];
  }
};

/// Truncated Gaussian over the cells whose centers lie strictly inside the
/// window circle, normalized to sum 1.
inline Kernel build_kernel(const WindowSpec& w, Nm cell_size) {
  w.validate();
  if (cell_size <= 0) throw ConfigError("cell size must be positive");
  if (w.diameter < 2 * cell_size) {
    throw ConfigError("window diameter must be at least two cells");
  }
  // Offset (dx, dy) is inside iff 4 (dx^2 + dy^2) cell^2 < diameter^2.
  const __int128 d2 = static_cast<__int128>(w.diameter) * w.diameter;
  const __int128 c2 = static_cast<__int128>(4) * cell_size * cell_size;
  int radius = 0;
  while (c2 * (radius + 1) * (radius + 1) < d2) ++radius;
  Kernel k;
  k.radius = radius;
  k.weights.assign(static_cast<std::size_t>(k.dim()) * k.dim(), 0.0);
  const double sigma = w.sigma_nm();
  const double cs = static_cast<double>(cell_size);
  double sum = 0.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const std::int64_t r2 = static_cast<std::int64_t>(dx) * dx + static_cast<std::int64_t>(dy) * dy;
      if (c2 * r2 >= d2) continue;
      const double rr = static_cast<double>(r2) * cs * cs;
      const double v = w.flat ? 1.0 : std::exp(-rr / (2.0 * sigma * sigma));
      k.weights[static_cast<std::size_t>(dy + radius) * k.dim() + (dx + radius)] = v;
      sum += v;
    }
  }
  for (double& v : k.weights) v /= sum;
  return k;
}

enum class ConvolutionMethod { Fft, Direct };

/// The effective-density operator E on an nx x ny grid:
///   (E x)(c) = sum_k K(k) x(c + k) / N(c),  N(c) = sum_{k : c+k in die} K(k),
/// i.e. window averaging renormalized over in-die cells. E is linear, rows of
/// E sum to 1, and all entries are nonnegative.
class EffectiveOperator {
 public:
  EffectiveOperator(int nx, int ny, Kernel kernel,
                    ConvolutionMethod method = ConvolutionMethod::Fft)
      : nx_(nx), ny_(ny), kernel_(std::move(kernel)), method_(method) {
    if (nx <= 0 || ny <= 0) throw ConfigError("empty grid");
    if (method_ == ConvolutionMethod::Fft) {
      const int R = kernel_.radius;
      rows_ = fft::good_size(ny_ + 2 * R);
      cols_ = fft::good_size(nx_ + 2 * R);
      std::vector<double> kbuf(static_cast<std::size_t>(rows_) * cols_, 0.0);
      for (int dy = -R; dy <= R; ++dy) {
        for (int dx = -R; dx <= R; ++dx) {
          const int r = (dy + rows_) % rows_, c = (dx + cols_) % cols_;
          kbuf[static_cast<std::size_t>(r) * cols_ + c] = kernel_.at(dx, dy);
        }
      }
      conv_ = std::make_shared<fft::CyclicConvolver>(rows_, cols_, kbuf);
    }
    std::vector<double> ones(size(), 1.0);
    norm_ = convolve(ones);
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }
  const Kernel& kernel() const { return kernel_; }
  ConvolutionMethod method() const { return method_; }
  /// In-die kernel mass N(c) per cell.
  const std::vector<double>& norm() const { return norm_; }

  /// Symmetric-kernel window sum (no renormalization), zero outside the grid.
  std::vector<double> convolve(std::span<const double> x) const {
    if (x.size() != size()) throw ConfigError("operator size mismatch");
    std::vector<double> out(size(), 0.0);
    const int R = kernel_.radius;
    if (method_ == ConvolutionMethod::Direct) {
      for (int y = 0; y < ny_; ++y) {
        for (int xx = 0; xx < nx_; ++xx) {
          double acc = 0.0;
          for (int dy = std::max(-R, -y); dy <= std::min(R, ny_ - 1 - y); ++dy) {
            const double* row = x.data() + static_cast<std::size_t>(y + dy) * nx_;
            for (int dx = std::max(-R, -xx); dx <= std::min(R, nx_ - 1 - xx); ++dx) {
              acc += kernel_.at(dx, dy) * row[xx + dx];
            }
          }
          out[static_cast<std::size_t>(y) * nx_ + xx] = acc;
        }
      }
      return out;
    }
    std::vector<double> buf(static_cast<std::size_t>(rows_) * cols_, 0.0);
    for (int y = 0; y < ny_; ++y) {
      std::copy_n(x.data() + static_cast<std::size_t>(y) * nx_, nx_,
                  buf.data() + static_cast<std::size_t>(y) * cols_);
    }
    conv_->convolve(buf);
    for (int y = 0; y < ny_; ++y) {
      std::copy_n(buf.data() + static_cast<std::size_t>(y) * cols_, nx_,
                  out.data() + static_cast<std::size_t>(y) * nx_);
    }
    return out;
  }

  /// E x.
  std::vector<double> apply(std::span<const double> x) const {
    auto out = convolve(x);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= norm_[i];
    return out;
  }

  /// E^T y = K * (y / N) (the kernel is symmetric).
  std::vector<double> adjoint(std::span<const double> y) const {
    if (y.size() != size()) throw ConfigError("operator size mismatch");
    std::vector<double> scaled(size());
    for (std::size_t i = 0; i < size(); ++i) scaled[i] = y[i] / norm_[i];
    return convolve(scaled);
  }

 private:
  int nx_, ny_;
  Kernel kernel_;
  ConvolutionMethod method_;
  int rows_ = 0, cols_ = 0;
  std::shared_ptr<fft::CyclicConvolver> conv_;
  std::vector<double> norm_;
};

/// Window-averaged (effective) density of a raw grid. Results are clamped to
/// the raw value range, which bounds any convex combination of raw values.
inline Grid effective_density(const Grid& raw, const WindowSpec& w,
                              ConvolutionMethod method = ConvolutionMethod::Fft) {
  if (raw.kind != GridKind::Raw) throw ConfigError("effective density needs a raw grid");
  EffectiveOperator op(raw.nx, raw.ny, build_kernel(w, raw.cell_size), method);
  Grid out = raw.like(GridKind::Effective);
  out.values = op.apply(raw.values);
  auto [lo, hi] = min_max(raw);
  for (double& v : out.values) v = std::clamp(v, lo, hi);
  return out;
}

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 edges
  std::vector<std::size_t> counts;

  std::size_t total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
};

/// Equal-width histogram over [lo, hi] (data range when not given). A value
/// on an interior edge goes to the upper bin; the top edge belongs to the last
/// bin; values outside the range are counted in the end bins.
inline Histogram histogram(std::span<const double> values, int bins,
                           std::optional<std::pair<double, double>> range = {}) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  if (values.empty()) throw ConfigError("histogram of an empty grid");
  double lo, hi;
  if (range) {
    std::tie(lo, hi) = *range;
    if (!(hi >= lo)) throw ConfigError("histogram range is inverted");
  } else {
    auto [a, b] = std::minmax_element(values.begin(), values.end());
    lo = *a;
    hi = *b;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) {
    h.edges[i] = i == bins ? hi : lo + (hi - lo) * static_cast<double>(i) / bins;
  }
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto it = std::upper_bound(h.edges.begin(), h.edges.end() - 1, v);
    const long b = std::clamp<long>(static_cast<long>(it - h.edges.begin()) - 1, 0, bins - 1);
    ++h.counts[b];
  }
  return h;
}

enum class Axis { X, Y };

struct ProfilePoint {
  double position;  ///< cell-center coordinate along the axis, nm
  double value;
};

/// Samples the row (Axis::X) or column (Axis::Y) of cells containing
/// `coordinate`, in increasing position order.
inline std::vector<ProfilePoint> line_profile(const Grid& g, Axis axis, Nm coordinate) {
  const Rect ext = g.extent();
  std::vector<ProfilePoint> out;
  if (axis == Axis::X) {
    if (coordinate < ext.y0 || coordinate >= ext.y1) {
      throw ConfigError("profile y coordinate " + std::to_string(coordinate) + " is outside the die");
    }
    const int iy = static_cast<int>((coordinate - g.origin.y) / g.cell_size);
    for (int ix = 0; ix < g.nx; ++ix) out.push_back({g.center(ix, iy).first, g.at(ix, iy)});
  } else {
    if (coordinate < ext.x0 || coordinate >= ext.x1) {
      throw ConfigError("profile x coordinate " + std::to_string(coordinate) + " is outside the die");
    }
    const int ix = static_cast<int>((coordinate - g.origin.x) / g.cell_size);
    for (int iy = 0; iy < g.ny; ++iy) out.push_back({g.center(ix, iy).second, g.at(ix, iy)});
  }
  return out;
}

}  // namespace cmpfill
