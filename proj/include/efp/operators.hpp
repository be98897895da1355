#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "efp/grid.hpp"

namespace efp {

// Operators are applied as stencils, never assembled. Every operator writes
// zero at constrained nodes; constraints are imposed by projection in the
// solver. Adjoints are the exact transposes, written in gather form over a
// zero-padded copy of the input restricted to the unconstrained nodes.

namespace kernel {

/// Last row holding unconstrained nodes: the top edge is free on space-time grids.
inline std::size_t last_free_row(const GridSpec& g) {
  return g.kind() == GridKind::SpaceTime1Dp1 ? g.ny() - 1 : g.ny() - 2;
}

/// Zero every constrained node: O(nx + ny), no mask lookups.
inline void zero_constrained(const GridSpec& g, std::span<double> v) {
  const std::size_t nx = g.nx();
  const std::size_t last = last_free_row(g);
  std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nx), 0.0);
  for (std::size_t j = 1; j <= last; ++j) {
    v[j * nx] = 0.0;
    v[j * nx + nx - 1] = 0.0;
  }
  std::fill(v.begin() + static_cast<std::ptrdiff_t>((last + 1) * nx), v.end(), 0.0);
}

/// Copy of `in` with constrained nodes zeroed, embedded in `pad` zeros on each side.
inline std::vector<double> padded_free(const GridSpec& g, std::span<const double> in, std::size_t pad) {
  std::vector<double> z(in.size() + 2 * pad);
  std::fill(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(pad), 0.0);
  std::fill(z.end() - static_cast<std::ptrdiff_t>(pad), z.end(), 0.0);
  std::copy(in.begin(), in.end(), z.begin() + static_cast<std::ptrdiff_t>(pad));
  zero_constrained(g, std::span<double>(z.data() + pad, in.size()));
  return z;
}

/// Five-point Laplacian with weight 1/h^2 on interior nodes.
struct Laplacian {
  std::size_t nx, ny;
  double w;

  void apply(std::span<const double> in, std::span<double> out, const GridSpec& g) const {
    for (std::size_t j = 1; j + 1 < ny; ++j) {
      for (std::size_t k = j * nx + 1; k < (j + 1) * nx - 1; ++k) {
        out[k] = w * (in[k + 1] + in[k - 1] + in[k + nx] + in[k - nx] - 4.0 * in[k]);
      }
    }
    zero_constrained(g, out);
  }

  void adjoint(std::span<const double> in, std::span<double> out, const GridSpec& g) const {
    const std::size_t pad = nx + 1;
    const auto z = padded_free(g, in, pad);
    const double* zc = z.data() + pad;
    for (std::size_t m = 0; m < out.size(); ++m) {
      out[m] = w * (zc[m + 1] + zc[m - 1] + zc[m + nx] + zc[m - nx] - 4.0 * zc[m]);
    }
  }
};

/// Space-time operator
///   D_y v + slope (.) v + lin (.) (D_x v) + diffusion * (v_{i+1} - 2 v_i + v_{i-1}) / hx^2
/// with D_y the second-order backward difference (first order on row 1) and
/// D_x the central difference. Heat uses no lin/slope; the Burgers Jacobian
/// uses both; the Burgers residual is lin = u without slope, applied to u.
struct SpaceTime {
  std::size_t nx, ny;
  std::vector<double> c0, c1, c2;  // D_y weights of rows j, j-1, j-2 in the equation on row j
  double cxx;                      // diffusion coefficient / hx^2
  double cx;                       // 1 / (2 hx)
  std::shared_ptr<const std::vector<double>> lin;  // padded by 2 nx + 1 zeros on each side
  std::shared_ptr<const std::vector<double>> slope;

  void set_linearization(std::span<const double> u) {
    auto padded = std::make_shared<std::vector<double>>(u.size() + 2 * (2 * nx + 1), 0.0);
    std::copy(u.begin(), u.end(), padded->begin() + static_cast<std::ptrdiff_t>(2 * nx + 1));
    lin = std::move(padded);
  }

  SpaceTime(const GridSpec& g, double diffusion)
      : nx(g.nx()), ny(g.ny()), c0(g.ny() + 2, 0.0), c1(g.ny() + 2, 0.0), c2(g.ny() + 2, 0.0),
        cxx(diffusion / (g.hx() * g.hx())), cx(0.5 / g.hx()) {
    const double inv = 1.0 / g.hy();
    c0[1] = inv;
    c1[1] = -inv;
    for (std::size_t j = 2; j < ny; ++j) {
      c0[j] = 1.5 * inv;
      c1[j] = -2.0 * inv;
      c2[j] = 0.5 * inv;
    }
  }

  void apply(std::span<const double> in, std::span<double> out, const GridSpec& g) const {
    if (lin && slope) {
      apply_impl<true, true>(in, out);
    } else if (lin) {
      apply_impl<true, false>(in, out);
    } else {
      apply_impl<false, false>(in, out);
    }
    zero_constrained(g, out);
  }

  void adjoint(std::span<const double> in, std::span<double> out, const GridSpec& g) const {
    if (lin && slope) return adjoint_impl<true, true>(in, out, g);
    if (lin) return adjoint_impl<true, false>(in, out, g);
    return adjoint_impl<false, false>(in, out, g);
  }

 private:
  template <bool HasLin, bool HasSlope>
  void apply_impl(std::span<const double> in, std::span<double> out) const {
    const double* L = HasLin ? lin->data() + 2 * nx + 1 : nullptr;
    const double* S = HasSlope ? slope->data() : nullptr;
    for (std::size_t j = 1; j < ny; ++j) {
      const double a0 = c0[j], a1 = c1[j], a2 = c2[j];
      const std::size_t row = j * nx;
      const double* __restrict v = in.data() + row;
      const double* __restrict v1 = v - nx;
      const double* __restrict v2 = j >= 2 ? v - 2 * nx : v1;  // a2 == 0 on row 1
      double* __restrict o = out.data() + row;
      for (std::size_t i = 1; i + 1 < nx; ++i) {
        double s = a0 * v[i] + a1 * v1[i] + a2 * v2[i] + cxx * (v[i + 1] - 2.0 * v[i] + v[i - 1]);
        if constexpr (HasSlope) s += S[row + i] * v[i];
        if constexpr (HasLin) s += L[row + i] * cx * (v[i + 1] - v[i - 1]);
        o[i] = s;
      }
    }
  }

  template <bool HasLin, bool HasSlope>
  void adjoint_impl(std::span<const double> in, std::span<double> out, const GridSpec& g) const {
    const std::size_t pad = 2 * nx + 1;
    const auto z = padded_free(g, in, pad);
    const double* __restrict zc = z.data() + pad;
    const double* lc = HasLin ? lin->data() + pad : nullptr;
    const double* S = HasSlope ? slope->data() : nullptr;
    double* __restrict o = out.data();
    for (std::size_t j = 0; j < ny; ++j) {
      const double a0 = c0[j], a1 = c1[j + 1], a2 = c2[j + 2];
      for (std::size_t m = j * nx; m < (j + 1) * nx; ++m) {
        double s = a0 * zc[m] + a1 * zc[m + nx] + a2 * zc[m + 2 * nx] + cxx * (zc[m + 1] - 2.0 * zc[m] + zc[m - 1]);
        if constexpr (HasSlope) s += S[m] * zc[m];
        if constexpr (HasLin) s += cx * (lc[m - 1] * zc[m - 1] - lc[m + 1] * zc[m + 1]);
        o[m] = s;
      }
    }
  }
};

}  // namespace kernel

/// A linear map on fields over one grid together with its exact adjoint.
class LinearOperator {
 public:
  using Kernel = std::function<void(std::span<const double>, std::span<double>)>;

  LinearOperator(GridPtr grid, Kernel apply, Kernel adjoint)
      : grid_(std::move(grid)), apply_(std::move(apply)), adjoint_(std::move(adjoint)) {}

  const GridSpec& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  void apply_into(std::span<const double> in, std::span<double> out) const { apply_(in, out); }
  void apply_adjoint_into(std::span<const double> in, std::span<double> out) const { adjoint_(in, out); }

  Field apply(const Field& u) const {
    check(u);
    Field out(grid_);
    apply_(u.values(), out.values());
    return out;
  }

  Field apply_adjoint(const Field& v) const {
    check(v);
    Field out(grid_);
    adjoint_(v.values(), out.values());
    return out;
  }

 private:
  void check(const Field& u) const {
    if (!(u.grid() == *grid_)) throw std::invalid_argument("operator applied to field on a different grid");
  }

  GridPtr grid_;
  Kernel apply_;
  Kernel adjoint_;
};

namespace detail {

template <class Kernel>
LinearOperator from_kernel(const GridPtr& grid, Kernel k) {
  auto shared = std::make_shared<const Kernel>(std::move(k));
  auto apply = [shared, grid](std::span<const double> in, std::span<double> out) { shared->apply(in, out, *grid); };
  auto adjoint = [shared, grid](std::span<const double> in, std::span<double> out) {
    shared->adjoint(in, out, *grid);
  };
  return LinearOperator(grid, std::move(apply), std::move(adjoint));
}

inline void require_space_time(const GridSpec& g, const char* what) {
  if (g.kind() != GridKind::SpaceTime1Dp1) {
    throw std::invalid_argument(std::string(what) + " requires a space-time grid");
  }
}

}  // namespace detail

/// Five-point Laplacian on the interior of a Spatial2D grid with hx == hy.
inline LinearOperator laplacian_2d(const GridPtr& grid) {
  if (grid->kind() != GridKind::Spatial2D) {
    throw std::invalid_argument("laplacian_2d requires a Spatial2D grid");
  }
  if (std::abs(grid->hx() - grid->hy()) > 1e-12 * grid->hx()) {
    throw std::invalid_argument("laplacian_2d requires equal spacing along x and y");
  }
  return detail::from_kernel(grid, kernel::Laplacian{grid->nx(), grid->ny(), 1.0 / (grid->hx() * grid->hx())});
}

/// Space-time heat operator u_y - alpha u_xx.
inline LinearOperator heat_operator(const GridPtr& grid, double alpha) {
  detail::require_space_time(*grid, "heat_operator");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("heat diffusivity must be > 0");
  return detail::from_kernel(grid, kernel::SpaceTime(*grid, -alpha));
}

/// Column restriction op . P, where P zeroes the constrained nodes. Its
/// adjoint is P . op^*. Used to keep implicit updates off the constrained set.
inline LinearOperator restrict_to_free(const LinearOperator& op) {
  auto grid = op.grid_ptr();
  auto apply = [grid, op](std::span<const double> in, std::span<double> out) {
    std::vector<double> masked(in.begin(), in.end());
    kernel::zero_constrained(*grid, masked);
    op.apply_into(masked, out);
  };
  auto adjoint = [grid, op](std::span<const double> in, std::span<double> out) {
    op.apply_adjoint_into(in, out);
    kernel::zero_constrained(*grid, out);
  };
  return LinearOperator(grid, std::move(apply), std::move(adjoint));
}

/// v -> v + dtau * op^*(op v). Self-adjoint and bounded below by the identity.
inline LinearOperator normal_operator(const LinearOperator& op, double dtau) {
  if (!(dtau > 0.0) || !std::isfinite(dtau)) throw std::invalid_argument("normal_operator needs dtau > 0");
  auto apply = [op, dtau](std::span<const double> in, std::span<double> out) {
    std::unique_ptr<double[]> buf(new double[in.size()]);
    std::span<double> tmp(buf.get(), in.size());
    op.apply_into(in, tmp);
    op.apply_adjoint_into(tmp, out);
    for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] + dtau * out[k];
  };
  return LinearOperator(op.grid_ptr(), apply, apply);
}

/// Space-time viscous Burgers operator F(u) = D_y u + u (D_x u) - nu D_xx u.
class BurgersOperator {
 public:
  BurgersOperator(GridPtr grid, double nu) : grid_(std::move(grid)), nu_(nu) {
    detail::require_space_time(*grid_, "burgers_operator");
    if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("Burgers viscosity must be > 0");
  }

  double nu() const { return nu_; }
  const GridSpec& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  Field apply_F(const Field& u) const {
    check(u);
    kernel::SpaceTime k(*grid_, -nu_);
    k.set_linearization(u.values());
    Field out(grid_);
    k.apply(u.values(), out.values(), *grid_);
    return out;
  }

  Field apply_J(const Field& u, const Field& v) const { return jacobian(u).apply(v); }
  Field apply_Jt(const Field& u, const Field& w) const { return jacobian(u).apply_adjoint(w); }

  /// Jacobian frozen at u: v -> D_y v + (D_x u) v + u (D_x v) - nu D_xx v.
  LinearOperator jacobian(const Field& u) const {
    check(u);
    kernel::SpaceTime k(*grid_, -nu_);
    const auto lin = u.values();
    auto slope = std::make_shared<std::vector<double>>(grid_->size(), 0.0);
    const std::size_t nx = grid_->nx();
    for (std::size_t j = 1; j < grid_->ny(); ++j) {
      for (std::size_t m = j * nx + 1; m < (j + 1) * nx - 1; ++m) {
        (*slope)[m] = k.cx * (lin[m + 1] - lin[m - 1]);
      }
    }
    k.set_linearization(lin);
    k.slope = std::move(slope);
    return detail::from_kernel(grid_, std::move(k));
  }

 private:
  void check(const Field& u) const {
    if (!(u.grid() == *grid_)) throw std::invalid_argument("Burgers operator applied on a different grid");
  }

  GridPtr grid_;
  double nu_;
};

inline BurgersOperator burgers_operator(const GridPtr& grid, double nu) { return BurgersOperator(grid, nu); }

}  // namespace efp
