#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "efp/grid.hpp"
#include "efp/operators.hpp"

namespace efp {

enum class ProblemKind { Poisson, Heat, Burgers };

inline const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Poisson: return "poisson";
    case ProblemKind::Heat: return "heat";
    case ProblemKind::Burgers: return "burgers";
  }
  return "unknown";
}

inline ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "poisson") return ProblemKind::Poisson;
  if (name == "heat") return ProblemKind::Heat;
  if (name == "burgers") return ProblemKind::Burgers;
  throw std::invalid_argument("unknown problem '" + name + "' (expected poisson, heat or burgers)");
}

inline constexpr double kDefaultAlpha = 0.1;
inline constexpr double kBurgersFrontOffset = 0.25;
inline constexpr double kBurgersWaveSpeed = 0.5;

/// Everything the solver may see about a PDE instance. The reference solution
/// lives only in ProblemSpec.
struct ProblemData {
  ProblemKind kind;
  GridPtr grid;
  double alpha = 0.0;  // heat diffusivity
  double nu = 0.0;     // Burgers viscosity
  Field source_f;
  Field boundary_g;  // meaningful only on constrained nodes

  const GridSpec& grid_ref() const { return *grid; }
};

struct ProblemSpec {
  ProblemData data;
  Field exact_u;

  ProblemKind kind() const { return data.kind; }
  const GridPtr& grid() const { return data.grid; }
};

namespace detail {

inline Field masked_copy(const Field& src, bool keep_boundary) {
  Field out = src;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out.grid().is_boundary(k) != keep_boundary) out[k] = 0.0;
  }
  return out;
}

inline ProblemSpec assemble(ProblemKind kind, const GridPtr& grid, double alpha, double nu, const Field& f,
                            Field exact) {
  Field g = masked_copy(exact, /*keep_boundary=*/true);
  return ProblemSpec{ProblemData{kind, grid, alpha, nu, masked_copy(f, false), std::move(g)}, std::move(exact)};
}

}  // namespace detail

/// -Lap u = f on [0,1]^2 with u = 0 on the boundary; u* = sin(pi x) sin(pi y).
inline ProblemSpec make_poisson(const GridPtr& grid) {
  if (grid->kind() != GridKind::Spatial2D) throw std::invalid_argument("poisson requires a Spatial2D grid");
  using std::numbers::pi;
  auto exact = sample(grid, [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); });
  auto f = sample(grid, [](double x, double y) { return 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y); });
  // sin(pi) is not exactly zero in floating point
  for (std::size_t k = 0; k < exact.size(); ++k) {
    if (grid->is_boundary(k)) exact[k] = 0.0;
  }
  return detail::assemble(ProblemKind::Poisson, grid, 0.0, 0.0, f, std::move(exact));
}

/// u_y - alpha u_xx = 0 with u* = exp(-alpha pi^2 y) sin(pi x).
inline ProblemSpec make_heat(const GridPtr& grid, double alpha = kDefaultAlpha) {
  if (grid->kind() != GridKind::SpaceTime1Dp1) throw std::invalid_argument("heat requires a space-time grid");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("heat diffusivity alpha must be > 0");
  using std::numbers::pi;
  auto exact = sample(grid, [alpha](double x, double y) { return std::exp(-alpha * pi * pi * y) * std::sin(pi * x); });
  for (std::size_t j = 0; j < grid->ny(); ++j) {
    exact.at(0, j) = 0.0;
    exact.at(grid->nx() - 1, j) = 0.0;
  }
  return detail::assemble(ProblemKind::Heat, grid, alpha, 0.0, Field(grid), std::move(exact));
}

/// Burgers traveling front u* = (1 - tanh((x - y/2 - x0) / (4 nu))) / 2 with f = 0.
inline double burgers_front(double x, double y, double nu) {
  return 0.5 * (1.0 - std::tanh((x - kBurgersWaveSpeed * y - kBurgersFrontOffset) / (4.0 * nu)));
}

inline ProblemSpec make_burgers(const GridPtr& grid, double nu) {
  if (grid->kind() != GridKind::SpaceTime1Dp1) throw std::invalid_argument("burgers requires a space-time grid");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("Burgers viscosity nu must be > 0");
  auto exact = sample(grid, [nu](double x, double y) { return burgers_front(x, y, nu); });
  return detail::assemble(ProblemKind::Burgers, grid, 0.0, nu, Field(grid), std::move(exact));
}

/// The residual map r(u) of a problem: an affine operator for Poisson and heat,
/// F(u) - f for Burgers. Holds the operators so they are built once per solve.
class ResidualModel {
 public:
  explicit ResidualModel(const ProblemData& problem) : problem_(problem) {
    switch (problem.kind) {
      case ProblemKind::Poisson: linear_.emplace(laplacian_2d(problem.grid)); break;
      case ProblemKind::Heat: linear_.emplace(heat_operator(problem.grid, problem.alpha)); break;
      case ProblemKind::Burgers: burgers_.emplace(problem.grid, problem.nu); break;
    }
  }

  const ProblemData& problem() const { return problem_; }

  Field residual(const Field& u) const {
    check(u);
    switch (problem_.kind) {
      case ProblemKind::Poisson: {
        Field r = linear_->apply(u);
        r *= -1.0;
        r -= problem_.source_f;
        return r;
      }
      case ProblemKind::Heat: return linear_->apply(u) - problem_.source_f;
      case ProblemKind::Burgers: return burgers_->apply_F(u) - problem_.source_f;
    }
    throw std::logic_error("unreachable");
  }

  double energy(const Field& u) const {
    const Field r = residual(u);
    return 0.5 * dot(r, r);
  }

  /// Derivative of the residual at u, as a linear operator on perturbations.
  LinearOperator linearization(const Field& u) const {
    if (burgers_) return burgers_->jacobian(u);
    if (problem_.kind == ProblemKind::Poisson) {
      const LinearOperator lap = *linear_;
      auto neg = [lap](std::span<const double> in, std::span<double> out) {
        lap.apply_into(in, out);
        for (double& v : out) v = -v;
      };
      auto neg_adj = [lap](std::span<const double> in, std::span<double> out) {
        lap.apply_adjoint_into(in, out);
        for (double& v : out) v = -v;
      };
      return LinearOperator(problem_.grid, neg, neg_adj);
    }
    return *linear_;
  }

  /// Poisson: Lap^*(Lap u + f); heat: A^*(Au - f); Burgers: J(u)^*(F(u) - f).
  Field gradient(const Field& u) const {
    check(u);
    switch (problem_.kind) {
      case ProblemKind::Poisson: {
        Field inner = linear_->apply(u) + problem_.source_f;
        return linear_->apply_adjoint(inner);
      }
      case ProblemKind::Heat: return linear_->apply_adjoint(linear_->apply(u) - problem_.source_f);
      case ProblemKind::Burgers: return burgers_->apply_Jt(u, burgers_->apply_F(u) - problem_.source_f);
    }
    throw std::logic_error("unreachable");
  }

 private:
  void check(const Field& u) const {
    if (!(u.grid() == *problem_.grid)) throw std::invalid_argument("field grid does not match problem grid");
  }

  ProblemData problem_;
  std::optional<LinearOperator> linear_;
  std::optional<BurgersOperator> burgers_;
};

inline Field residual(const ProblemData& problem, const Field& u) { return ResidualModel(problem).residual(u); }
inline double energy(const ProblemData& problem, const Field& u) { return ResidualModel(problem).energy(u); }
inline Field energy_gradient(const ProblemData& problem, const Field& u) {
  return ResidualModel(problem).gradient(u);
}

inline Field residual(const ProblemSpec& problem, const Field& u) { return residual(problem.data, u); }
inline double energy(const ProblemSpec& problem, const Field& u) { return energy(problem.data, u); }
inline Field energy_gradient(const ProblemSpec& problem, const Field& u) { return energy_gradient(problem.data, u); }

}  // namespace efp
