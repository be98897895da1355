#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "efp/grid.hpp"
#include "efp/metrics.hpp"
#include "efp/operators.hpp"
#include "efp/problems.hpp"
#include "efp/random.hpp"

namespace efp {

/// Raised when an iterate stops being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Conjugate gradient
// ---------------------------------------------------------------------------

struct CgResult {
  Field x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Matrix-free CG for a symmetric positive-definite operator. Stops when
/// ||b - A x|| <= tol * ||b||; at the iteration cap the best iterate seen so far
/// is returned with converged = false.
inline CgResult cg_solve(const LinearOperator& op, const Field& rhs, const Field& x0, double tol, int max_iters) {
  rhs.check_grid(x0);
  const std::size_t n = rhs.size();
  const auto b = rhs.values();

  CgResult out{x0, 0, 0.0, false};
  auto x = out.x.values();

  const double b_norm = norm2(b);
  if (b_norm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    out.converged = true;
    return out;
  }
  if (!std::isfinite(b_norm)) throw NumericalError("cg_solve: right-hand side is not finite");

  std::vector<double> r(n), p(n), q(n);
  op.apply_into(x, q);
  for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - q[k];
  double rr = dot(r, r);
  const double target = tol * b_norm;

  std::vector<double> best(x.begin(), x.end());
  double best_norm = std::sqrt(rr);

  if (best_norm <= target) {
    out.relative_residual = best_norm / b_norm;
    out.converged = true;
    return out;
  }

  p = r;
  for (int it = 1; it <= max_iters; ++it) {
    op.apply_into(p, q);
    const double pq = dot(p, q);
    if (!std::isfinite(pq)) throw NumericalError("cg_solve: non-finite curvature at iteration " + std::to_string(it));
    if (pq <= 0.0) throw NumericalError("cg_solve: operator is not positive definite");
    const double alpha = rr / pq;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * q[k];
    }
    const double rr_next = dot(r, r);
    if (!std::isfinite(rr_next)) throw NumericalError("cg_solve: residual became non-finite");
    out.iterations = it;

    const double res = std::sqrt(rr_next);
    if (res <= target) {
      out.relative_residual = res / b_norm;
      out.converged = true;
      return out;
    }
    if (res < best_norm) {
      best_norm = res;
      std::copy(x.begin(), x.end(), best.begin());
    }

    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * p[k];
  }

  std::copy(best.begin(), best.end(), x.begin());
  out.relative_residual = best_norm / b_norm;
  return out;
}

// ---------------------------------------------------------------------------
// Smoothing and boundary projection
// ---------------------------------------------------------------------------

/// Normalized 1D Gaussian weights w_k for |k| <= ceil(3 sigma), index k + radius.
inline std::vector<double> gaussian_weights(double sigma) {
  const auto radius = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  std::vector<double> w(2 * radius + 1);
  double sum = 0.0;
  for (std::size_t t = 0; t < w.size(); ++t) {
    const double k = static_cast<double>(t) - static_cast<double>(radius);
    w[t] = std::exp(-k * k / (2.0 * sigma * sigma));
    sum += w[t];
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Separable Gaussian convolution, x pass then y pass. Taps falling outside
/// the grid are dropped and the remaining weights renormalized.
inline Field gaussian_smooth(const Field& u, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("smoothing sigma must be >= 0");
  if (sigma == 0.0) return u;

  const auto& g = u.grid();
  const auto w = gaussian_weights(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(w.size() / 2);
  const auto nx = static_cast<std::ptrdiff_t>(g.nx());
  const auto ny = static_cast<std::ptrdiff_t>(g.ny());

  auto pass = [&](const Field& in, bool along_x) {
    Field out(in.grid_ptr());
    const std::ptrdiff_t len = along_x ? nx : ny;
    for (std::ptrdiff_t j = 0; j < ny; ++j) {
      for (std::ptrdiff_t i = 0; i < nx; ++i) {
        const std::ptrdiff_t pos = along_x ? i : j;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(-radius, -pos);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(radius, len - 1 - pos);
        double acc = 0.0;
        double wsum = 0.0;
        for (std::ptrdiff_t k = lo; k <= hi; ++k) {
          const double wk = w[static_cast<std::size_t>(k + radius)];
          const double v = along_x ? in.at(static_cast<std::size_t>(i + k), static_cast<std::size_t>(j))
                                   : in.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j + k));
          acc += wk * v;
          wsum += wk;
        }
        out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc / wsum;
      }
    }
    return out;
  };
  return pass(pass(u, true), false);
}

/// Overwrite every constrained node with its prescribed value.
inline Field enforce_boundary(Field u, const ProblemData& problem) {
  if (!(u.grid() == *problem.grid)) throw std::invalid_argument("enforce_boundary: grid mismatch");
  const auto& g = *problem.grid;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (g.is_boundary(k)) u[k] = problem.boundary_g[k];
  }
  return u;
}

// ---------------------------------------------------------------------------
// Iteration
// ---------------------------------------------------------------------------

struct SolverConfig {
  double dtau = 1.0;
  double eps0 = 1e-4;
  double eps_decay = 0.95;
  double sigma_init = 1.0;
  double sigma_smooth = 1.0;
  /// Per-iteration factor on the smoothing width; 1 keeps it fixed.
  double smooth_decay = 0.95;
  bool smoothing_enabled = true;
  bool boundary_enabled = true;
  int max_iters = 200;
  double residual_tol = 1e-8;
  double cg_tol = 1e-10;
  int cg_max_iters = 0;  // 0: 10 * node count
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("solver config: " + msg); };
    if (!(dtau > 0.0) || !std::isfinite(dtau)) fail("dtau must be > 0");
    if (!(eps0 >= 0.0) || !std::isfinite(eps0)) fail("eps0 must be >= 0");
    if (!(eps_decay >= 0.0 && eps_decay < 1.0)) fail("eps_decay must lie in [0, 1)");
    if (!(sigma_init >= 0.0) || !std::isfinite(sigma_init)) fail("sigma_init must be >= 0");
    if (!(sigma_smooth >= 0.0) || !std::isfinite(sigma_smooth)) fail("sigma_smooth must be >= 0");
    if (!(smooth_decay >= 0.0 && smooth_decay <= 1.0)) fail("smooth_decay must lie in [0, 1]");
    if (max_iters < 1) fail("max_iters must be >= 1");
    if (!(residual_tol >= 0.0)) fail("residual_tol must be >= 0");
    if (!(cg_tol > 0.0)) fail("cg_tol must be > 0");
    if (cg_max_iters < 0) fail("cg_max_iters must be >= 0");
  }

  int effective_cg_max_iters(const GridSpec& g) const {
    return cg_max_iters > 0 ? cg_max_iters : static_cast<int>(10 * g.size());
  }
};

struct IterationRecord {
  int iter = 0;
  double energy = 0.0;
  double residual_norm = 0.0;
  double rel_l2_error = std::numeric_limits<double>::quiet_NaN();  // percent
  double eps = 0.0;
  double sigma_smooth = 0.0;
  int cg_iterations = 0;
};

enum class StopReason { Tolerance, IterationCap };

inline const char* to_string(StopReason r) { return r == StopReason::Tolerance ? "tolerance" : "iteration_cap"; }

struct SolveResult {
  Field final_u;
  std::vector<IterationRecord> history;
  bool converged = false;
  StopReason reason = StopReason::IterationCap;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  double initial_energy = 0.0;
  double initial_residual_norm = 0.0;
  long total_cg_iterations = 0;
  int cg_cap_hits = 0;
};

/// Thrown when the iteration produces non-finite values. Carries the last
/// finite iterate and the history up to it.
class SolverAborted : public std::runtime_error {
 public:
  SolverAborted(const std::string& what, SolveResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SolveResult& partial() const { return partial_; }

 private:
  SolveResult partial_;
};

struct StepResult {
  Field u;
  int cg_iterations = 0;
  bool cg_converged = true;
};

/// One stochastic semi-implicit update.
///
/// With M the residual linearization at u_n (restricted to the free nodes
/// when boundary handling is on, so prescribed values enter the right side),
/// solves
///   (I + dtau M^* M) u = u_n - dtau M^* (r(u_n) - M u_n) + sqrt(2 eps dtau) xi.
/// For Poisson and heat this is the exact implicit Euler step of the energy
/// gradient flow; for Burgers it is the damped Gauss-Newton step.
inline StepResult implicit_step(const ResidualModel& model, const Field& u_n, double eps_n, const SolverConfig& config,
                                Rng& rng) {
  const auto& problem = model.problem();
  if (!(u_n.grid() == *problem.grid)) throw std::invalid_argument("implicit_step: grid mismatch");
  if (!(eps_n >= 0.0)) throw std::invalid_argument("implicit_step: eps must be >= 0");

  const LinearOperator full = model.linearization(u_n);
  const LinearOperator lin = config.boundary_enabled ? restrict_to_free(full) : full;

  Field shifted = model.residual(u_n) - lin.apply(u_n);
  Field rhs = u_n;
  rhs.axpy(-config.dtau, lin.apply_adjoint(shifted));
  if (eps_n > 0.0) {
    const double amp = std::sqrt(2.0 * eps_n * config.dtau);
    for (double& v : rhs.values()) v += amp * rng.normal();
  }

  const LinearOperator normal = normal_operator(lin, config.dtau);
  CgResult cg = cg_solve(normal, rhs, u_n, config.cg_tol, config.effective_cg_max_iters(*problem.grid));
  return StepResult{std::move(cg.x), cg.iterations, cg.converged};
}

inline StepResult implicit_step(const ProblemData& problem, const Field& u_n, double eps_n, const SolverConfig& config,
                                Rng& rng) {
  return implicit_step(ResidualModel(problem), u_n, eps_n, config, rng);
}

/// Optional per-iterate error metric (percent); history stores NaN without one.
using ErrorMetric = std::function<double(const Field&)>;

/// Seed of the noise stream for a run; independent of the initial field stream.
inline std::uint64_t noise_seed(std::uint64_t seed) { return seed ^ 0xd1b54a32d192ed03ULL; }

/// Iterate from a given start: boundary projection, then per iteration
/// implicit update, smoothing, boundary projection, record.
inline SolveResult run_solver_from(const ProblemData& problem, const SolverConfig& config, Field start_u,
                                   const ErrorMetric& metric = {}) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const ResidualModel model(problem);
  const auto& grid = problem.grid;

  SolveResult result{Field(grid), {}, false, StopReason::IterationCap, config.seed};
  result.history.reserve(static_cast<std::size_t>(config.max_iters));

  Field u = enforce_boundary(std::move(start_u), problem);
  Rng noise(noise_seed(config.seed));

  {
    const Field r0 = model.residual(u);
    result.initial_residual_norm = norm2(r0);
    result.initial_energy = 0.5 * dot(r0, r0);
  }
  const double f_norm = norm2(problem.source_f);
  double scale = f_norm > 0.0 ? f_norm : result.initial_residual_norm;
  if (!(scale > 0.0)) scale = 1.0;

  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  double eps = config.eps0;
  double sigma = config.sigma_smooth;
  for (int n = 0; n < config.max_iters; ++n) {
    std::optional<StepResult> attempt;
    try {
      attempt.emplace(implicit_step(model, u, eps, config, noise));
    } catch (const NumericalError& e) {
      result.final_u = u;
      result.wall_time = elapsed();
      throw SolverAborted(std::string("iteration ") + std::to_string(n + 1) + ": " + e.what(), std::move(result));
    }
    StepResult& step = *attempt;
    Field next = std::move(step.u);
    if (config.smoothing_enabled) next = gaussian_smooth(next, sigma);
    if (config.boundary_enabled) next = enforce_boundary(std::move(next), problem);

    const Field r = model.residual(next);
    IterationRecord rec;
    rec.iter = n + 1;
    rec.residual_norm = norm2(r);
    rec.energy = 0.5 * rec.residual_norm * rec.residual_norm;
    rec.eps = eps;
    rec.sigma_smooth = config.smoothing_enabled ? sigma : 0.0;
    rec.cg_iterations = step.cg_iterations;

    if (!next.all_finite() || !std::isfinite(rec.residual_norm)) {
      result.final_u = u;
      result.wall_time = elapsed();
      throw SolverAborted("iteration " + std::to_string(n + 1) + " produced non-finite values", std::move(result));
    }
    if (metric) rec.rel_l2_error = metric(next);

    u = std::move(next);
    result.history.push_back(rec);
    result.total_cg_iterations += step.cg_iterations;
    if (!step.cg_converged) ++result.cg_cap_hits;

    if (rec.residual_norm / scale < config.residual_tol) {
      result.converged = true;
      result.reason = StopReason::Tolerance;
      break;
    }
    eps *= config.eps_decay;
    sigma *= config.smooth_decay;
  }

  result.final_u = std::move(u);
  result.wall_time = elapsed();
  return result;
}

/// Random start of amplitude sigma_init from config.seed.
inline SolveResult run_solver(const ProblemData& problem, const SolverConfig& config, const ErrorMetric& metric = {}) {
  config.validate();
  return run_solver_from(problem, config, random_field(problem.grid, config.sigma_init, config.seed), metric);
}

inline ErrorMetric error_against(const ProblemSpec& problem) {
  return [&exact = problem.exact_u](const Field& u) { return relative_l2_error(u, exact); };
}

/// Solve a problem, tracking the relative error against its reference
/// solution. The solver itself only sees problem.data.
inline SolveResult run_solver(const ProblemSpec& problem, const SolverConfig& config) {
  return run_solver(problem.data, config, error_against(problem));
}

}  // namespace efp
