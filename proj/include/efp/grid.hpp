#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "efp/random.hpp"

namespace efp {

/// Whether the second grid axis is a spatial y (Poisson) or time treated as a
/// spatial coordinate (heat, Burgers).
enum class GridKind { Spatial2D, SpaceTime1Dp1 };

inline const char* to_string(GridKind kind) {
  return kind == GridKind::Spatial2D ? "spatial2d" : "spacetime1dp1";
}

/// Uniform structured grid on [0,1] x [0,Y], row-major with x fastest.
///
/// Spatial2D grids constrain all four edges. SpaceTime1Dp1 grids constrain the
/// bottom edge (initial condition) and both lateral edges; the top edge is free.
class GridSpec {
 public:
  GridSpec(GridKind kind, std::size_t nx, std::size_t ny, double y_extent)
      : kind_(kind), nx_(nx), ny_(ny), y_extent_(y_extent) {
    if (nx < 3 || ny < 3) {
      throw std::invalid_argument("grid needs at least 3 nodes per axis, got " +
                                  std::to_string(nx) + "x" + std::to_string(ny));
    }
    if (!(y_extent > 0.0) || !std::isfinite(y_extent)) {
      throw std::invalid_argument("grid y extent must be positive and finite");
    }
    hx_ = 1.0 / static_cast<double>(nx - 1);
    hy_ = y_extent / static_cast<double>(ny - 1);

    boundary_.assign(nx * ny, 0);
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        bool on_edge = (i == 0 || i == nx - 1 || j == 0);
        if (kind == GridKind::Spatial2D) on_edge = on_edge || j == ny - 1;
        boundary_[index(i, j)] = on_edge ? 1 : 0;
      }
    }
  }

  GridKind kind() const { return kind_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return nx_ * ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double y_extent() const { return y_extent_; }

  double x(std::size_t i) const { return static_cast<double>(i) * hx_; }
  double y(std::size_t j) const { return static_cast<double>(j) * hy_; }

  std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }

  bool is_boundary(std::size_t k) const { return boundary_[k] != 0; }
  bool is_boundary(std::size_t i, std::size_t j) const { return is_boundary(index(i, j)); }

  std::span<const std::uint8_t> boundary_mask() const { return boundary_; }

  std::size_t boundary_count() const {
    return static_cast<std::size_t>(std::accumulate(boundary_.begin(), boundary_.end(), 0u));
  }

  bool operator==(const GridSpec& other) const {
    return kind_ == other.kind_ && nx_ == other.nx_ && ny_ == other.ny_ &&
           y_extent_ == other.y_extent_;
  }

 private:
  GridKind kind_;
  std::size_t nx_;
  std::size_t ny_;
  double y_extent_;
  double hx_ = 0.0;
  double hy_ = 0.0;
  std::vector<std::uint8_t> boundary_;
};

using GridPtr = std::shared_ptr<const GridSpec>;

inline GridPtr make_grid(GridKind kind, std::size_t nx, std::size_t ny, double y_extent = 1.0) {
  return std::make_shared<const GridSpec>(kind, nx, ny, y_extent);
}

/// Node values over a grid. Grids are shared, values are owned.
class Field {
 public:
  explicit Field(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}
  Field(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size()) {
      throw std::invalid_argument("field length " + std::to_string(values_.size()) +
                                  " does not match grid size " + std::to_string(grid_->size()));
    }
  }

  const GridSpec& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& at(std::size_t i, std::size_t j) { return values_[grid_->index(i, j)]; }
  double at(std::size_t i, std::size_t j) const { return values_[grid_->index(i, j)]; }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_grid(const Field& other) const {
    return grid_ == other.grid_ || *grid_ == *other.grid_;
  }

  bool operator==(const Field& other) const {
    return same_grid(other) && values_ == other.values_;
  }

  Field& operator+=(const Field& other) {
    check_grid(other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
    return *this;
  }
  Field& operator-=(const Field& other) {
    check_grid(other);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
    return *this;
  }
  Field& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }

  /// this += a * x
  void axpy(double a, const Field& x) {
    check_grid(x);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += a * x.values_[k];
  }

  void check_grid(const Field& other) const {
    if (!same_grid(other)) throw std::invalid_argument("field grid mismatch");
  }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }

/// Inner product with four interleaved partial sums (fixed order, so results
/// are reproducible).
inline double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t n4 = n - n % 4;
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (std::size_t k = 0; k < n4; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (std::size_t k = n4; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

inline double dot(const Field& a, const Field& b) {
  a.check_grid(b);
  return dot(a.values(), b.values());
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }
inline double norm2(const Field& a) { return norm2(a.values()); }

inline double max_abs(const Field& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

/// Fill a field by evaluating fn(x, y) at every node.
template <class Fn>
Field sample(const GridPtr& grid, Fn&& fn) {
  Field out(grid);
  for (std::size_t j = 0; j < grid->ny(); ++j) {
    for (std::size_t i = 0; i < grid->nx(); ++i) out.at(i, j) = fn(grid->x(i), grid->y(j));
  }
  return out;
}

/// I.i.d. N(0, sigma^2) node values; a pure function of (grid, sigma, seed).
inline Field random_field(const GridPtr& grid, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("random_field sigma must be finite and >= 0");
  }
  Field out(grid);
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (double& v : out.values()) v = sigma * rng.normal();
  return out;
}

}  // namespace efp
