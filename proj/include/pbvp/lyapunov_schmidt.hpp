#pragma once
/*
 * lyapunov_schmidt.hpp: the weakly nonlinear layer
 *
 *     dφ/dt = -iH₀φ + εZ(φ, t, ε),      φ(0) - φ(w) = α.
 *
 * Around a solution φ₀(·, c̄) of the ε = 0 problem, persistence is governed by
 * the equation for generating amplitudes
 *
 *     F(c̄) = U₀(w) ∫₀ʷ U⁻¹(τ) Z(φ₀(τ, c̄), τ, 0) dτ = 0,
 *
 * an equation on the resonant subspace. Its Jacobian B₀ = F′(c⁰) at a root
 * decides the local structure: the orthogonal complement of range(B₀) carries
 * the obstructions no amplitude shift can remove, and rank deficiency of B₀
 * signals a continuum of roots (each kernel direction is a tangent to the
 * root set).
 *
 * Solutions for small ε are produced by a two-level fixed-point scheme. With
 * v the correction to φ₀ and A₁(t) the state derivative of Z along φ₀:
 *
 *     v̄_{k+1} = ε G[ Z(φ₀ + v_k, ·, ε) ]           (Green solve, homogeneous
 *                                                   boundary data; see below)
 *     c_k     = -B₀⁺ U₀(w) ∫₀ʷ U⁻¹(τ) { Z(φ₀,τ,0) + A₁(τ)v̄_k + 𝓡(v_k,τ,ε) } dτ
 *     v_{k+1} = U(t) U₀(w) c_k + v̄_{k+1},           v₀ = v̄₀ = 0,
 *
 * with the remainder 𝓡(v,t,ε) = Z(φ₀+v,t,ε) - Z(φ₀,t,0) - A₁(t)v. Because
 * φ₀ already absorbs the boundary gap α, the correction must close up
 * (v(0) = v(w)); the Green solve therefore runs at homogeneous boundary data,
 * and the projected part of its input is removed in the co-rotating frame
 * (subtracting (1/w) U(t) U₀(w)∫U⁻¹Z rather than projecting pointwise), which
 * keeps the removal exact for the boundary relation without distorting
 * nonresonant content. The Z(φ₀,τ,0) term in the amplitude update vanishes
 * at an exact root of F and pins the iteration to the root otherwise; with it,
 * the update is exactly a chord-Newton step on the amplitudes.
 *
 * Convergence is declared only when both the increment ‖v_{k+1} - v_k‖ is
 * below tolerance and the projected defect ε‖U₀(w)∫U⁻¹Z‖/w is small: the
 * iteration can stall with a finite defect when started from amplitudes that
 * are not near a root of F, and that situation must be reported as failure,
 * not convergence.
 */

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pbvp/linalg.hpp"
#include "pbvp/linear_bvp.hpp"
#include "pbvp/spectral.hpp"

namespace pbvp {

// ── Right-hand sides ───────────────────────────────────────────────────────

// Nonlinear perturbation Z(state, t, ε), with an optional analytic state
// derivative at ε = 0 (a dense 2N×2N matrix in the interleaved coordinate
// order x₁, y₁, x₂, y₂, …). When the derivative is absent, directional
// finite differences stand in for it.
struct NonlinearRHS {
  std::function<PhaseVector(const PhaseVector&, double, double)> Z;
  std::function<Matrix(const PhaseVector&, double)> state_jacobian;
  bool time_continuous = true;
  bool state_c1 = true;
};

namespace detail {

inline void require_rhs(const NonlinearRHS& rhs) {
  if (!rhs.Z) throw std::invalid_argument("NonlinearRHS: evaluation function is empty");
}

inline Vector flatten(const PhaseVector& v) {
  Vector out(2 * static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    out(2 * static_cast<Eigen::Index>(k)) = v[k].x;
    out(2 * static_cast<Eigen::Index>(k) + 1) = v[k].y;
  }
  return out;
}

inline PhaseVector unflatten(const Vector& v) {
  PhaseVector out(static_cast<std::size_t>(v.size()) / 2);
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = {v(2 * static_cast<Eigen::Index>(k)), v(2 * static_cast<Eigen::Index>(k) + 1)};
  return out;
}

// A₁(t)v, analytically when the Jacobian is supplied, otherwise by a central
// directional difference of Z at ε = 0.
inline PhaseVector apply_state_derivative(const NonlinearRHS& rhs, const PhaseVector& base,
                                          double t, const PhaseVector& v,
                                          double fd_step = 1e-6) {
  if (rhs.state_jacobian) return unflatten(rhs.state_jacobian(base, t) * flatten(v));
  const double scale = max_mode_abs(v);
  if (scale == 0.0) return PhaseVector::zero(v.size());
  const double d = fd_step / scale;
  const PhaseVector plus = rhs.Z(base + d * v, t, 0.0);
  const PhaseVector minus = rhs.Z(base - d * v, t, 0.0);
  return (1.0 / (2.0 * d)) * (plus - minus);
}

}  // namespace detail

// ── Resonant coordinates ───────────────────────────────────────────────────

inline std::vector<std::size_t> resonant_indices(const std::vector<bool>& flags) {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < flags.size(); ++k)
    if (flags[k]) idx.push_back(k);
  return idx;
}

// Coordinates of the resonant pairs as a flat vector (x, y per listed mode).
inline Vector restrict_to_modes(const PhaseVector& v, const std::vector<std::size_t>& idx) {
  Vector out(2 * static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out(2 * static_cast<Eigen::Index>(i)) = v[idx[i]].x;
    out(2 * static_cast<Eigen::Index>(i) + 1) = v[idx[i]].y;
  }
  return out;
}

inline PhaseVector embed_from_modes(const Vector& r, const std::vector<std::size_t>& idx,
                                    std::size_t n_modes) {
  PhaseVector out(n_modes);
  for (std::size_t i = 0; i < idx.size(); ++i)
    out[idx[i]] = {r(2 * static_cast<Eigen::Index>(i)),
                   r(2 * static_cast<Eigen::Index>(i) + 1)};
  return out;
}

// ── Equation for generating amplitudes ─────────────────────────────────────

// F(c̄) = U₀(w) ∫₀ʷ U⁻¹(τ) Z(φ₀(τ, c̄), τ, 0) dτ. The generating trajectory
// φ₀(·, c̄) is the linear solution for the problem's own data; an unsolvable
// generating problem propagates as UnsolvableError.
inline PhaseVector generating_F(const BVPProblem& problem, const NonlinearRHS& rhs,
                                const PhaseVector& cbar, std::size_t grid_size,
                                double solve_tol = 1e-8, double resonance_tol = 1e-9) {
  detail::require_rhs(rhs);
  const Trajectory phi0 = solve_linear(problem, cbar, grid_size, solve_tol, resonance_tol);
  const std::size_t m = phi0.grid_size();
  std::vector<PhaseVector> vals;
  vals.reserve(m + 1);
  for (std::size_t j = 0; j <= m; ++j) {
    const PhaseVector z = rhs.Z(phi0.states[j], phi0.times[j], 0.0);
    PhaseVector co(z.size());
    for (std::size_t k = 0; k < z.size(); ++k)
      co[k] = Block::rotation(-problem.op.frequency(k) * phi0.times[j]).apply(z[k]);
    vals.push_back(std::move(co));
  }
  const PhaseVector integral =
      detail::simpson_full(problem.w / static_cast<double>(m), vals);
  return detail::project_resonant(integral,
                                  resonance_flags(problem.op, problem.w, resonance_tol));
}

// F in the flat resonant coordinates, for root finding.
inline Vector generating_F_restricted(const BVPProblem& problem, const NonlinearRHS& rhs,
                                      const Vector& c_res,
                                      const std::vector<std::size_t>& idx,
                                      std::size_t grid_size, double solve_tol = 1e-8,
                                      double resonance_tol = 1e-9) {
  const PhaseVector cbar = embed_from_modes(c_res, idx, problem.op.n_modes());
  const PhaseVector f = generating_F(problem, rhs, cbar, grid_size, solve_tol, resonance_tol);
  return restrict_to_modes(f, idx);
}

// ── B₀ = F′(c⁰) ────────────────────────────────────────────────────────────

// Raised when the finite-difference and analytic forms of B₀ disagree beyond
// tolerance, a symptom of an inconsistent state_jacobian.
class DerivativeMismatchError : public std::runtime_error {
 public:
  explicit DerivativeMismatchError(const std::string& what) : std::runtime_error(what) {}
};

struct B0Result {
  Matrix fd;                      // central-difference Jacobian on resonant coordinates
  std::optional<Matrix> analytic; // U₀∫U⁻¹ A₁(τ) U(τ)·dτ restricted, when A₁ is supplied
  double agreement = 0.0;         // max-abs difference between the two forms
  std::vector<std::size_t> resonant;
};

// Jacobian of the generating map restricted to the resonant coordinates,
// by central differences with step h; cross-checked against the analytic
// form when the right-hand side carries a state derivative. The derivative
// of the generating trajectory in a resonant direction e is U(τ)e, so the
// analytic column is U₀ ∫ U⁻¹(τ) A₁(τ) U(τ) e dτ.
inline B0Result b0_matrix(const BVPProblem& problem, const NonlinearRHS& rhs,
                          const PhaseVector& c0, double h, std::size_t grid_size,
                          double solve_tol = 1e-8, double resonance_tol = 1e-9,
                          double check_tol = 1e-6) {
  detail::require_rhs(rhs);
  if (!(h > 0.0)) throw std::invalid_argument("b0_matrix: step must be positive");
  const std::vector<bool> flags = resonance_flags(problem.op, problem.w, resonance_tol);
  B0Result out;
  out.resonant = resonant_indices(flags);
  const Eigen::Index d = 2 * static_cast<Eigen::Index>(out.resonant.size());
  out.fd = Matrix::Zero(d, d);

  const Vector base = restrict_to_modes(c0, out.resonant);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector up = base, dn = base;
    up(i) += h;
    dn(i) -= h;
    const Vector fu = generating_F_restricted(problem, rhs, up, out.resonant, grid_size,
                                              solve_tol, resonance_tol);
    const Vector fd_ = generating_F_restricted(problem, rhs, dn, out.resonant, grid_size,
                                               solve_tol, resonance_tol);
    out.fd.col(i) = (fu - fd_) / (2.0 * h);
  }

  if (rhs.state_jacobian && d > 0) {
    const Trajectory phi0 = solve_linear(problem, c0, grid_size, solve_tol, resonance_tol);
    const std::size_t m = phi0.grid_size();
    Matrix analytic = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      Vector e = Vector::Zero(d);
      e(i) = 1.0;
      const PhaseVector dir = embed_from_modes(e, out.resonant, problem.op.n_modes());
      std::vector<PhaseVector> vals;
      vals.reserve(m + 1);
      for (std::size_t j = 0; j <= m; ++j) {
        const PhaseVector moving = evolve(problem.op, phi0.times[j], dir);
        const PhaseVector dz =
            detail::unflatten(rhs.state_jacobian(phi0.states[j], phi0.times[j]) *
                              detail::flatten(moving));
        PhaseVector co(dz.size());
        for (std::size_t k = 0; k < dz.size(); ++k)
          co[k] = Block::rotation(-problem.op.frequency(k) * phi0.times[j]).apply(dz[k]);
        vals.push_back(std::move(co));
      }
      const PhaseVector col =
          detail::simpson_full(problem.w / static_cast<double>(m), vals);
      analytic.col(i) = restrict_to_modes(detail::project_resonant(col, flags), out.resonant);
    }
    out.analytic = analytic;
    out.agreement = (out.fd - analytic).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, out.fd.cwiseAbs().maxCoeff());
    if (out.agreement > check_tol * scale)
      throw DerivativeMismatchError(
          "b0_matrix: finite-difference and analytic Jacobians disagree by " +
          std::to_string(out.agreement) + " (tolerance " + std::to_string(check_tol * scale) +
          "); the supplied state derivative is inconsistent with Z");
  }
  return out;
}

// ── Sufficient-condition diagnostics ───────────────────────────────────────

struct SufficientConditionReport {
  Eigen::Index rank = 0;
  Eigen::Index dimension = 0;
  double sigma_max = 0.0;
  double sigma_min_kept = 0.0;       // smallest retained singular value
  double condition_number = 0.0;     // σ_max / σ_min_kept (0 when rank 0)
  bool pseudoinvertible = true;      // always, in finite dimensions
  double norm_null_proj_monodromy = 0.0;  // ‖P_{N(B₀ᵀ)} · U(w)|res‖₂
  double norm_null_proj_projector = 0.0;  // ‖P_{N(B₀ᵀ)} · U₀(w)|res‖₂
  bool holds_with_monodromy = false;
  bool holds_with_projector = false;
  bool agree = true;
  bool satisfied = false;
  std::string note;
};

// Diagnostic on a candidate B₀: effective rank and conditioning, plus the
// second sufficient condition in both printed variants (the null-space
// projector of B₀ᵀ composed with the restricted monodromy and with the
// restricted averaged projector). The two are reported side by side and a
// warning is raised when they disagree on pass/fail; no silent choice is
// made between them.
inline SufficientConditionReport check_sufficient_conditions(const Matrix& b0,
                                                             const Matrix& u_res,
                                                             const Matrix& u0_res,
                                                             double rank_tol = 1e-10,
                                                             double cond_tol = 1e-8) {
  if (b0.rows() != b0.cols())
    throw std::invalid_argument("check_sufficient_conditions: B0 must be square");
  if (u_res.rows() != b0.rows() || u0_res.rows() != b0.rows())
    throw std::invalid_argument("check_sufficient_conditions: restricted maps must match B0");

  SufficientConditionReport rep;
  rep.dimension = b0.rows();
  const SvdPinv s = svd_pinv(b0, rank_tol);
  rep.rank = s.rank;
  rep.sigma_max = s.singular_values.size() ? s.singular_values(0) : 0.0;
  rep.sigma_min_kept = s.rank > 0 ? s.singular_values(s.rank - 1) : 0.0;
  rep.condition_number = s.rank > 0 ? rep.sigma_max / rep.sigma_min_kept : 0.0;

  const Matrix p = left_null_projector(b0, rank_tol);
  rep.norm_null_proj_monodromy = spectral_norm(p * u_res);
  rep.norm_null_proj_projector = spectral_norm(p * u0_res);
  rep.holds_with_monodromy = rep.norm_null_proj_monodromy <= cond_tol;
  rep.holds_with_projector = rep.norm_null_proj_projector <= cond_tol;
  rep.agree = rep.holds_with_monodromy == rep.holds_with_projector;
  rep.satisfied = rep.holds_with_monodromy && rep.holds_with_projector;
  if (!rep.agree)
    rep.note = "the two variants of the second condition disagree on pass/fail";
  else if (!rep.satisfied)
    rep.note = "sufficient conditions not satisfied; iteration attempted anyway";
  return rep;
}

// Convenience overload building the restricted monodromy and projector from
// the operator itself.
inline SufficientConditionReport check_sufficient_conditions(const Matrix& b0,
                                                             const SpectralOperator& op,
                                                             double w,
                                                             double resonance_tol = 1e-9,
                                                             double rank_tol = 1e-10,
                                                             double cond_tol = 1e-8) {
  const std::vector<std::size_t> idx =
      resonant_indices(resonance_flags(op, w, resonance_tol));
  const Eigen::Index d = 2 * static_cast<Eigen::Index>(idx.size());
  Matrix u_res = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Block b = Block::rotation(mode_angle(op, idx[i], w));
    const Eigen::Index r = 2 * static_cast<Eigen::Index>(i);
    u_res(r, r) = b.a11;
    u_res(r, r + 1) = b.a12;
    u_res(r + 1, r) = b.a21;
    u_res(r + 1, r + 1) = b.a22;
  }
  return check_sufficient_conditions(b0, u_res, Matrix::Identity(d, d), rank_tol, cond_tol);
}

// ── Errors and roots ───────────────────────────────────────────────────────

// One step of the corrective iteration, as recorded in the run history.
struct IterationState {
  int k = 0;
  Trajectory v;
  PhaseVector c;
  Trajectory phi;                      // φ₀ + v pointwise
  double boundary_residual = 0.0;      // of φ against the problem's α
  double increment_norm = 0.0;         // sup over the grid of |v_{k+1} - v_k|
  double obstruction_defect = 0.0;     // ε‖U₀(w)∫U⁻¹Z(φ_k)‖/w
  double range_obstruction = 0.0;      // part of the defect inside range(B₀)
  double correction_boundary_gap = 0.0;  // ‖v̄(0) - v̄(w)‖
  bool q_exceeded = false;
};

// Raised when root finding or the corrective iteration fails to converge;
// carries whatever history exists at the point of failure.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double last_residual_, int iterations_,
                      std::vector<IterationState> history_ = {})
      : std::runtime_error(what),
        last_residual(last_residual_),
        iterations(iterations_),
        history(std::move(history_)) {}
  double last_residual;
  int iterations;
  std::vector<IterationState> history;
};

struct NewtonResult {
  Vector c;
  double residual = 0.0;
  int iterations = 0;
  Matrix jacobian;  // finite-difference Jacobian at the last evaluated point
};

// Pseudoinverse-Newton iteration c ← c - J⁺F(c) with a finite-difference
// Jacobian; rank-deficient J yields the minimum-norm step, so the iteration
// walks onto root manifolds instead of stalling at them.
inline NewtonResult newton_roots(const std::function<Vector(const Vector&)>& f,
                                 const Vector& c_init, double tol = 1e-12,
                                 int max_iter = 50, double rank_tol = 1e-10) {
  if (!f) throw std::invalid_argument("newton_roots: map is empty");
  NewtonResult out;
  out.c = c_init;
  const Eigen::Index n = c_init.size();
  for (int it = 0; it < max_iter; ++it) {
    const Vector fval = f(out.c);
    out.residual = fval.norm();
    out.iterations = it;
    if (out.residual <= tol) return out;
    Matrix jac(fval.size(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(out.c(j)));
      Vector up = out.c, dn = out.c;
      up(j) += h;
      dn(j) -= h;
      jac.col(j) = (f(up) - f(dn)) / (2.0 * h);
    }
    out.jacobian = jac;
    out.c -= svd_pinv(jac, rank_tol).pinv * fval;
  }
  out.residual = f(out.c).norm();
  if (out.residual <= tol) {
    out.iterations = max_iter;
    return out;
  }
  throw NonConvergenceError("newton_roots: no convergence within " +
                                std::to_string(max_iter) + " iterations (residual " +
                                std::to_string(out.residual) + ")",
                            out.residual, max_iter);
}

// A root of the generating equation together with its local diagnostics.
struct GeneratingRoot {
  PhaseVector c0;            // projected onto the resonant subspace
  double F_residual = 0.0;
  Matrix B0;                 // finite-difference Jacobian on resonant coordinates
  Eigen::Index B0_rank = 0;
  double condition2_norm = 0.0;  // ‖P_{N(B₀ᵀ)} U(w)|res‖₂
  SufficientConditionReport conditions;
  std::vector<std::size_t> resonant;
};

struct RootOptions {
  std::size_t grid_size = 512;
  double fd_step = 1e-5;
  double solve_tol = 1e-8;
  double resonance_tol = 1e-9;
  double rank_tol = 1e-10;
  double jacobian_check_tol = 1e-6;
};

// Assembles the root record at a candidate amplitude: residual, B₀ (with the
// analytic cross-check when available), and the sufficient-condition report.
inline GeneratingRoot make_generating_root(const BVPProblem& problem, const NonlinearRHS& rhs,
                                           const PhaseVector& c0,
                                           const RootOptions& opts = {}) {
  GeneratingRoot root;
  const std::vector<bool> flags =
      resonance_flags(problem.op, problem.w, opts.resonance_tol);
  root.resonant = resonant_indices(flags);
  root.c0 = detail::project_resonant(c0, flags);
  root.F_residual = norm(generating_F(problem, rhs, root.c0, opts.grid_size, opts.solve_tol,
                                      opts.resonance_tol));
  B0Result b0 = b0_matrix(problem, rhs, root.c0, opts.fd_step, opts.grid_size, opts.solve_tol,
                          opts.resonance_tol, opts.jacobian_check_tol);
  root.B0 = std::move(b0.fd);
  root.B0_rank = svd_pinv(root.B0, opts.rank_tol).rank;
  root.conditions = check_sufficient_conditions(root.B0, problem.op, problem.w,
                                                opts.resonance_tol, opts.rank_tol);
  root.condition2_norm = root.conditions.norm_null_proj_monodromy;
  return root;
}

// ── Remainder ──────────────────────────────────────────────────────────────

// 𝓡(v, t, ε) = Z(φ₀+v, t, ε) - Z(φ₀, t, 0) - A₁(t)v, evaluated pointwise on
// the grid. Vanishes identically for linear ε-independent Z and is O(‖v‖²)
// for smooth Z.
inline Trajectory remainder_R(const NonlinearRHS& rhs, const Trajectory& phi0,
                              const Trajectory& v, double eps) {
  detail::require_rhs(rhs);
  detail::require_same_size(phi0.states.size(), v.states.size(), "remainder_R");
  Trajectory out;
  out.times = phi0.times;
  out.states.reserve(phi0.states.size());
  for (std::size_t j = 0; j < phi0.states.size(); ++j) {
    const double t = phi0.times[j];
    const PhaseVector full = rhs.Z(phi0.states[j] + v.states[j], t, eps);
    const PhaseVector base = rhs.Z(phi0.states[j], t, 0.0);
    const PhaseVector lin = detail::apply_state_derivative(rhs, phi0.states[j], t, v.states[j]);
    out.states.push_back(full - base - lin);
  }
  return out;
}

// Central-difference verification against the perturbed equation
// φ' = -iH₀φ + f + εZ(φ, t, ε); the linear overload checks the ε = 0 form.
inline VerificationReport verify_trajectory(const BVPProblem& problem, const NonlinearRHS& rhs,
                                            double eps, const Trajectory& traj) {
  detail::require_rhs(rhs);
  if (traj.times.size() < 3)
    throw std::invalid_argument("verify_trajectory: need at least three grid points");
  detail::require_same_size(problem.op.n_modes(), traj.n_modes(), "verify_trajectory");
  const std::size_t m = traj.times.size() - 1;
  const std::vector<PhaseVector> fvals = detail::forcing_on_grid(problem, m);
  const double h = traj.times[1] - traj.times[0];

  VerificationReport rep;
  for (std::size_t j = 1; j < m; ++j) {
    const PhaseVector diff = (1.0 / (2.0 * h)) * (traj.states[j + 1] - traj.states[j - 1]);
    const PhaseVector z = rhs.Z(traj.states[j], traj.times[j], eps);
    PhaseVector total(traj.n_modes());
    for (std::size_t k = 0; k < total.size(); ++k) {
      const double om = problem.op.frequency(k);
      const Pair s = traj.states[j][k];
      total[k] = Pair{om * s.y, -om * s.x} + fvals[j][k] + eps * z[k];
    }
    rep.ode_residual = std::max(rep.ode_residual, norm(diff - total));
  }
  rep.boundary_residual = norm(traj.states.front() - traj.states.back() - problem.alpha);
  return rep;
}

// ── The corrective iteration ───────────────────────────────────────────────

struct IterationOptions {
  double eps = 0.0;
  double tol = 1e-10;
  int max_iter = 200;
  std::size_t grid_size = 1024;
  double eps_max = 0.1;          // admissible ε range is [0, eps_max]
  double defect_tol = 2e-4;      // bound on the projected defect at convergence
  double q_bound = 1.0;          // monitored neighborhood radius for ‖v‖
  double solve_tol = 1e-8;
  double resonance_tol = 1e-9;
  double rank_tol = 1e-10;
  double range_assert_tol = 1e-8;  // removal check on the range(B₀) part
  bool literal_boundary_data = false;  // carry the problem's α into the v̄ solve
  bool include_generating_term = true; // keep Z(φ₀,τ,0) in the amplitude update
};

struct LSResult {
  Trajectory phi;
  std::vector<IterationState> history;
  bool converged = false;
  std::string warning;
};

// Runs the corrective iteration at the given root. Returns the corrected
// trajectory and the full history; throws NonConvergenceError when the
// increments grow for five consecutive steps or max_iter passes without
// meeting both convergence checks.
inline LSResult ls_iterate(const BVPProblem& problem, const NonlinearRHS& rhs,
                           const GeneratingRoot& root, const IterationOptions& opts) {
  detail::require_rhs(rhs);
  if (!(opts.eps >= 0.0) || !(opts.eps <= opts.eps_max))
    throw std::domain_error("ls_iterate: eps must lie in [0, " +
                            std::to_string(opts.eps_max) + "]");
  if (opts.max_iter < 1) throw std::invalid_argument("ls_iterate: max_iter must be >= 1");

  const std::size_t m = opts.grid_size;
  const Trajectory phi0 = solve_linear(problem, root.c0, m, opts.solve_tol, opts.resonance_tol);
  const std::vector<double>& ts = phi0.times;
  const double h = problem.w / static_cast<double>(m);
  const std::vector<bool> flags =
      resonance_flags(problem.op, problem.w, opts.resonance_tol);
  const std::vector<std::size_t>& idx = root.resonant;
  const Eigen::Index d = 2 * static_cast<Eigen::Index>(idx.size());

  LSResult result;
  if (opts.eps == 0.0) {
    IterationState s;
    s.phi = phi0;
    s.v.times = ts;
    s.v.states.assign(m + 1, PhaseVector::zero(problem.op.n_modes()));
    s.c = PhaseVector::zero(problem.op.n_modes());
    s.boundary_residual = verify_trajectory(problem, phi0).boundary_residual;
    result.history.push_back(std::move(s));
    result.phi = phi0;
    result.converged = true;
    return result;
  }

  const SvdPinv b0p = svd_pinv(root.B0, opts.rank_tol);

  std::vector<PhaseVector> v(m + 1, PhaseVector::zero(problem.op.n_modes()));
  std::vector<PhaseVector> vbar = v;
  double inc_prev = -1.0;
  int growth_streak = 0;

  for (int k = 0; k < opts.max_iter; ++k) {
    // Z along the current iterate, in lab and co-rotating frames.
    std::vector<PhaseVector> co(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
      const PhaseVector z = rhs.Z(phi0.states[j] + v[j], ts[j], opts.eps);
      PhaseVector cz(z.size());
      for (std::size_t q = 0; q < z.size(); ++q)
        cz[q] = Block::rotation(-problem.op.frequency(q) * ts[j]).apply(z[q]);
      co[j] = std::move(cz);
    }
    const PhaseVector big_j = detail::simpson_full(h, co);
    const PhaseVector j_res = detail::project_resonant(big_j, flags);
    const double defect = opts.eps * norm(j_res) / problem.w;
    double range_part = 0.0;
    if (d > 0) {
      const Vector jr = restrict_to_modes(j_res, idx);
      range_part = opts.eps * (root.B0 * (b0p.pinv * jr)).norm() / problem.w;
    }

    // Correction solve in the co-rotating frame: remove the projected mean,
    // integrate, close the boundary with the nonresonant Green inverse.
    for (std::size_t j = 0; j <= m; ++j)
      co[j] = co[j] - (1.0 / problem.w) * j_res;
    PhaseVector g_tilde = monodromy(problem.op, problem.w).apply(opts.eps * (big_j - j_res));
    if (opts.literal_boundary_data) g_tilde = g_tilde + problem.alpha;
    const PhaseVector c_hat =
        green_pseudoinverse(problem.op, problem.w, g_tilde, opts.resonance_tol);
    const std::vector<PhaseVector> prefix = detail::prefix_integrals(h, co);
    std::vector<PhaseVector> vbar_next(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
      PhaseVector s(problem.op.n_modes());
      for (std::size_t q = 0; q < s.size(); ++q)
        s[q] = Block::rotation(problem.op.frequency(q) * ts[j])
                   .apply(c_hat[q] + opts.eps * prefix[j][q]);
      vbar_next[j] = std::move(s);
    }

    // Amplitude update: base term + A₁v̄_k + remainder of v_k, projected.
    PhaseVector c_full = PhaseVector::zero(problem.op.n_modes());
    Vector ck = Vector::Zero(d);
    if (d > 0) {
      std::vector<PhaseVector> integrand(m + 1);
      for (std::size_t j = 0; j <= m; ++j) {
        const PhaseVector lin_bar =
            detail::apply_state_derivative(rhs, phi0.states[j], ts[j], vbar[j]);
        const PhaseVector lin_v =
            detail::apply_state_derivative(rhs, phi0.states[j], ts[j], v[j]);
        const PhaseVector full = rhs.Z(phi0.states[j] + v[j], ts[j], opts.eps);
        PhaseVector val = lin_bar + full - lin_v;
        if (!opts.include_generating_term) {
          val = val - rhs.Z(phi0.states[j], ts[j], 0.0);
        }
        PhaseVector cz(val.size());
        for (std::size_t q = 0; q < val.size(); ++q)
          cz[q] = Block::rotation(-problem.op.frequency(q) * ts[j]).apply(val[q]);
        integrand[j] = std::move(cz);
      }
      const PhaseVector q_int = detail::simpson_full(h, integrand);
      const Vector q_res = restrict_to_modes(detail::project_resonant(q_int, flags), idx);
      ck = -(b0p.pinv * q_res);
      c_full = embed_from_modes(ck, idx, problem.op.n_modes());
    }

    std::vector<PhaseVector> v_next(m + 1);
    double inc = 0.0;
    for (std::size_t j = 0; j <= m; ++j) {
      v_next[j] = evolve(problem.op, ts[j], c_full) + vbar_next[j];
      inc = std::max(inc, max_mode_abs(v_next[j] - v[j]));
    }

    IterationState state;
    state.k = k;
    state.v.times = ts;
    state.v.states = v_next;
    state.c = c_full;
    state.phi.times = ts;
    state.phi.states.reserve(m + 1);
    for (std::size_t j = 0; j <= m; ++j) state.phi.states.push_back(phi0.states[j] + v_next[j]);
    state.boundary_residual =
        norm(state.phi.states.front() - state.phi.states.back() - problem.alpha);
    state.increment_norm = inc;
    state.obstruction_defect = defect;
    state.range_obstruction = range_part;
    state.correction_boundary_gap = norm(vbar_next.front() - vbar_next.back());
    double vmax = 0.0;
    for (const PhaseVector& s : v_next) vmax = std::max(vmax, max_mode_abs(s));
    state.q_exceeded = vmax > opts.q_bound;
    if (state.q_exceeded && result.warning.empty())
      result.warning = "correction norm " + std::to_string(vmax) +
                       " left the configured neighborhood (q = " +
                       std::to_string(opts.q_bound) + ") at iteration " + std::to_string(k);
    result.history.push_back(std::move(state));

    if (inc_prev >= 0.0 && inc > inc_prev) {
      if (++growth_streak >= 5)
        throw NonConvergenceError(
            "ls_iterate: increments grew over five consecutive steps (last " +
                std::to_string(inc) + "); the iteration is diverging",
            inc, k + 1, std::move(result.history));
    } else {
      growth_streak = 0;
    }

    v = std::move(v_next);
    vbar = std::move(vbar_next);
    inc_prev = inc;

    if (inc <= opts.tol && defect <= opts.defect_tol) {
      if (range_part > opts.range_assert_tol)
        throw std::logic_error(
            "ls_iterate: converged while the range(B0) part of the obstruction (" +
            std::to_string(range_part) + ") was not removed by the amplitude update");
      result.phi = result.history.back().phi;
      result.converged = true;
      return result;
    }
  }

  const double last_inc = result.history.empty() ? 0.0 : result.history.back().increment_norm;
  const double last_defect =
      result.history.empty() ? 0.0 : result.history.back().obstruction_defect;
  throw NonConvergenceError("ls_iterate: no convergence within " +
                                std::to_string(opts.max_iter) + " iterations (last increment " +
                                std::to_string(last_inc) + ", defect " +
                                std::to_string(last_defect) + ")",
                            last_inc, opts.max_iter, std::move(result.history));
}

}  // namespace pbvp
