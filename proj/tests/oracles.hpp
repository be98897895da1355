#pragma once

// Dense reference constructions. Everything here is built directly from the
// stencil definitions, independent of the production kernels.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>

#include "efp/grid.hpp"
#include "efp/operators.hpp"
#include "efp/problems.hpp"

namespace efp::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd to_vec(const Field& f) {
  VectorXd v(static_cast<Eigen::Index>(f.size()));
  for (std::size_t k = 0; k < f.size(); ++k) v[static_cast<Eigen::Index>(k)] = f[k];
  return v;
}

inline Field to_field(const GridPtr& g, const VectorXd& v) {
  Field f(g);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = v[static_cast<Eigen::Index>(k)];
  return f;
}

/// Column k = map(e_k).
inline MatrixXd assemble(const GridPtr& g, const std::function<Field(const Field&)>& map) {
  const auto n = static_cast<Eigen::Index>(g->size());
  MatrixXd m(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Field e(g);
    e[static_cast<std::size_t>(k)] = 1.0;
    m.col(k) = to_vec(map(e));
  }
  return m;
}

inline MatrixXd assemble(const LinearOperator& op) {
  return assemble(op.grid_ptr(), [&](const Field& e) { return op.apply(e); });
}

inline MatrixXd assemble_adjoint(const LinearOperator& op) {
  return assemble(op.grid_ptr(), [&](const Field& e) { return op.apply_adjoint(e); });
}

/// Laplacian with rows on interior nodes only; columns cover every node.
inline MatrixXd laplacian_matrix(const GridSpec& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  MatrixXd m = MatrixXd::Zero(n, n);
  const double h2 = g.hx() * g.hx();
  auto put = [&](std::size_t row, std::size_t i, std::size_t j, double w) {
    m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(g.index(i, j))) += w;
  };
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (g.is_boundary(i, j)) continue;
      const std::size_t row = g.index(i, j);
      put(row, i, j, -4.0 / h2);
      put(row, i + 1, j, 1.0 / h2);
      put(row, i - 1, j, 1.0 / h2);
      put(row, i, j + 1, 1.0 / h2);
      put(row, i, j - 1, 1.0 / h2);
    }
  }
  return m;
}

/// Time-derivative coefficients on rows j, j-1, j-2: first-order backward at
/// j = 1, three-point backward beyond.
inline void dy_coefficients(const GridSpec& g, std::size_t j, double c[3]) {
  const double hy = g.hy();
  if (j == 1) {
    c[0] = 1.0 / hy;
    c[1] = -1.0 / hy;
    c[2] = 0.0;
  } else {
    c[0] = 1.5 / hy;
    c[1] = -2.0 / hy;
    c[2] = 0.5 / hy;
  }
}

/// D_y, D_x, D_xx as dense matrices: rows on defined nodes, all columns.
struct SpaceTimeParts {
  MatrixXd dy, dx, dxx;
};

inline SpaceTimeParts space_time_parts(const GridSpec& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  SpaceTimeParts p{MatrixXd::Zero(n, n), MatrixXd::Zero(n, n), MatrixXd::Zero(n, n)};
  const double hx = g.hx();
  auto put = [&](MatrixXd& m, std::size_t row, std::size_t i, std::size_t j, double w) {
    m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(g.index(i, j))) += w;
  };
  for (std::size_t j = 1; j < g.ny(); ++j) {
    for (std::size_t i = 1; i + 1 < g.nx(); ++i) {
      const std::size_t row = g.index(i, j);
      double c[3];
      dy_coefficients(g, j, c);
      put(p.dy, row, i, j, c[0]);
      put(p.dy, row, i, j - 1, c[1]);
      if (j >= 2) put(p.dy, row, i, j - 2, c[2]);
      put(p.dx, row, i + 1, j, 0.5 / hx);
      put(p.dx, row, i - 1, j, -0.5 / hx);
      put(p.dxx, row, i + 1, j, 1.0 / (hx * hx));
      put(p.dxx, row, i, j, -2.0 / (hx * hx));
      put(p.dxx, row, i - 1, j, 1.0 / (hx * hx));
    }
  }
  return p;
}

inline MatrixXd heat_matrix(const GridSpec& g, double alpha) {
  const auto p = space_time_parts(g);
  return p.dy - alpha * p.dxx;
}

/// J(u) = D_y + diag(D_x u) + diag(u) D_x - nu D_xx on defined rows.
inline MatrixXd burgers_jacobian_matrix(const GridSpec& g, const Field& u, double nu) {
  const auto p = space_time_parts(g);
  const VectorXd uv = to_vec(u);
  const VectorXd slope = p.dx * uv;
  MatrixXd diag_u = MatrixXd::Zero(uv.size(), uv.size());
  for (Eigen::Index k = 0; k < uv.size(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    if (!g.is_boundary(idx)) diag_u(k, k) = uv[k];
  }
  MatrixXd m = p.dy + diag_u * p.dx - nu * p.dxx;
  for (Eigen::Index k = 0; k < uv.size(); ++k) {
    if (!g.is_boundary(static_cast<std::size_t>(k))) m(k, k) += slope[k];
  }
  return m;
}

/// Dense least-squares minimizer of the linear residual with boundary values
/// fixed to g: minimize ||A_free u_free + A_all g_part - f||.
inline Field linear_minimizer(const ProblemSpec& problem) {
  const auto& grid = problem.grid();
  const auto& g = *grid;
  MatrixXd full;
  VectorXd rhs;
  if (problem.kind() == ProblemKind::Poisson) {
    // r = -L u - f; boundary values are zero.
    full = -laplacian_matrix(g);
    rhs = to_vec(problem.data.source_f);
  } else {
    const auto p = space_time_parts(g);
    full = p.dy - problem.data.alpha * p.dxx;
    rhs = to_vec(problem.data.source_f);
  }
  VectorXd lifted = VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
  std::vector<Eigen::Index> free_cols;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.is_boundary(k)) lifted[static_cast<Eigen::Index>(k)] = problem.data.boundary_g[k];
    else free_cols.push_back(static_cast<Eigen::Index>(k));
  }
  const VectorXd b = rhs - full * lifted;
  MatrixXd a(full.rows(), static_cast<Eigen::Index>(free_cols.size()));
  for (std::size_t c = 0; c < free_cols.size(); ++c) a.col(static_cast<Eigen::Index>(c)) = full.col(free_cols[c]);
  const VectorXd x = a.colPivHouseholderQr().solve(b);
  VectorXd u = lifted;
  for (std::size_t c = 0; c < free_cols.size(); ++c) u[free_cols[c]] = x[static_cast<Eigen::Index>(c)];
  return to_field(grid, u);
}

}  // namespace efp::oracle
