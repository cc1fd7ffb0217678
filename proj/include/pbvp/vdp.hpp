#pragma once
/*
 * vdp.hpp: a chain of van der Pol oscillators with shared damping
 *
 *     u_k'' + ω_k² u_k = ε (1 - Σ_j u_j²) u_k',      k = 1 … N,
 *
 * with ω_k = 2πk/w, so every mode is resonant over the period w. In the
 * phase-pair variables (x_k = u_k, y_k = u_k'/ω_k) the perturbation is
 *
 *     Z(φ)_k = (0, ω_k (1 - Σ_j x_j²) y_k),
 *
 * time-independent and ε-independent. The generating amplitudes obey, up to
 * one shared scalar per mode, the cubic system
 *
 *     (c₁ᵏ)³ + 2 Σ_{j≠k} ( c₁ᵏ(c₁ʲ)² + c₁ᵏ(c₂ʲ)² ) + c₁ᵏ(c₂ᵏ)² - 4 c₁ᵏ = 0
 *
 * (and the same with slots 1, 2 exchanged). Its nonzero solutions with s
 * active modes all sit at the common radius 2/√(2s-1); rotating any active
 * pair leaves the system invariant, so the roots form tori. The averaged
 * Jacobian B₀ at such a root is rank-deficient with kernel dimension equal
 * to the number of active modes, one direction per free phase.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbvp/linear_bvp.hpp"
#include "pbvp/lyapunov_schmidt.hpp"
#include "pbvp/spectral.hpp"

namespace pbvp {

struct VdPConfig {
  std::size_t n_modes = 1;
  double w = two_pi;
  double eps = 0.0;
  std::vector<std::size_t> support;  // 1-based mode labels; empty means all modes
};

struct VdPSystem {
  BVPProblem problem;
  NonlinearRHS rhs;
};

namespace detail {

inline std::vector<std::size_t> normalized_support(const VdPConfig& cfg) {
  std::vector<std::size_t> s = cfg.support;
  if (s.empty()) {
    s.resize(cfg.n_modes);
    for (std::size_t k = 0; k < cfg.n_modes; ++k) s[k] = k + 1;
    return s;
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  for (std::size_t label : s)
    if (label < 1 || label > cfg.n_modes)
      throw std::invalid_argument("vdp: support label " + std::to_string(label) +
                                  " outside 1.." + std::to_string(cfg.n_modes));
  return s;
}

}  // namespace detail

// The van der Pol perturbation for arbitrary mode frequencies, with its
// analytic state derivative at ε = 0.
inline NonlinearRHS make_vdp_rhs(std::vector<double> omegas) {
  NonlinearRHS rhs;
  rhs.Z = [omegas](const PhaseVector& state, double, double) {
    double s = 0.0;
    for (std::size_t j = 0; j < state.size(); ++j) s += state[j].x * state[j].x;
    PhaseVector out(state.size());
    for (std::size_t k = 0; k < state.size(); ++k)
      out[k] = {0.0, omegas[k] * (1.0 - s) * state[k].y};
    return out;
  };
  rhs.state_jacobian = [omegas](const PhaseVector& state, double) {
    const Eigen::Index n = 2 * static_cast<Eigen::Index>(state.size());
    double s = 0.0;
    for (std::size_t j = 0; j < state.size(); ++j) s += state[j].x * state[j].x;
    Matrix jac = Matrix::Zero(n, n);
    for (std::size_t k = 0; k < state.size(); ++k) {
      const Eigen::Index row = 2 * static_cast<Eigen::Index>(k) + 1;
      for (std::size_t j = 0; j < state.size(); ++j)
        jac(row, 2 * static_cast<Eigen::Index>(j)) =
            omegas[k] * (-2.0 * state[j].x) * state[k].y;
      jac(row, row) += omegas[k] * (1.0 - s);
    }
    return jac;
  };
  return rhs;
}

inline VdPSystem build_vdp_problem(const VdPConfig& cfg) {
  if (cfg.n_modes < 1) throw std::invalid_argument("vdp: n_modes must be >= 1");
  if (!(cfg.w > 0.0) || !std::isfinite(cfg.w))
    throw std::invalid_argument("vdp: period must be positive and finite");
  if (!(cfg.eps >= 0.0)) throw std::invalid_argument("vdp: eps must be >= 0");
  detail::normalized_support(cfg);

  std::vector<double> lambdas(cfg.n_modes);
  std::vector<double> omegas(cfg.n_modes);
  for (std::size_t k = 0; k < cfg.n_modes; ++k) {
    omegas[k] = two_pi * static_cast<double>(k + 1) / cfg.w;
    lambdas[k] = omegas[k] * omegas[k];
  }
  SpectralOperator op(lambdas);
  BVPProblem problem(op, cfg.w, PhaseVector::zero(cfg.n_modes),
                     ForcingFunction::zero(cfg.n_modes));
  return {std::move(problem), make_vdp_rhs(std::move(omegas))};
}

// The ε = 0 trajectory generated by a pair vector: each mode rotates rigidly
// at its own frequency.
inline Trajectory generating_solution(const VdPConfig& cfg, const PhaseVector& pairs,
                                      std::size_t grid_size) {
  const VdPSystem sys = build_vdp_problem(cfg);
  return solve_linear(sys.problem, pairs, grid_size);
}

// The cubic amplitude system, written out literally, one value per slot.
inline std::vector<double> amplitude_system(const PhaseVector& pairs) {
  const std::size_t n = pairs.size();
  std::vector<double> out(2 * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double c1 = pairs[k].x;
    const double c2 = pairs[k].y;
    double cross = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k) continue;
      cross += pairs[j].x * pairs[j].x + pairs[j].y * pairs[j].y;
    }
    out[2 * k] = c1 * c1 * c1 + 2.0 * c1 * cross + c1 * c2 * c2 - 4.0 * c1;
    out[2 * k + 1] = c2 * c2 * c2 + 2.0 * c2 * cross + c2 * c1 * c1 - 4.0 * c2;
  }
  return out;
}

// Common radius of a torus with the given number of active modes.
inline double torus_radius(std::size_t active_modes) {
  if (active_modes < 1) throw std::domain_error("torus_radius: needs at least one active mode");
  return 2.0 / std::sqrt(2.0 * static_cast<double>(active_modes) - 1.0);
}

inline std::vector<double> mode_radii(const PhaseVector& pairs) {
  std::vector<double> r(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) r[k] = std::hypot(pairs[k].x, pairs[k].y);
  return r;
}

// ── Root finding with support pinning ──────────────────────────────────────

struct VdPRoot {
  PhaseVector pairs;
  std::vector<std::size_t> support;  // 1-based labels actually freed
  NewtonResult newton;
  std::vector<double> radii;
};

struct VdPRootOptions {
  std::size_t grid_size = 512;
  double tol = 1e-12;
  int max_iter = 50;
  double rank_tol = 1e-10;
  // Starting pair per supported mode; by default (1, 0) everywhere, which the
  // pinned Newton flow carries radially onto the torus.
  std::vector<Pair> start;
};

// Finds a root of the generating equation with the unsupported modes pinned
// at zero. Pinning removes the phase degeneracies of the excluded modes, and
// the pseudoinverse step handles the remaining phase freedom of the supported
// ones.
inline VdPRoot vdp_newton_root(const VdPConfig& cfg, const VdPRootOptions& opts = {}) {
  const VdPSystem sys = build_vdp_problem(cfg);
  const std::vector<std::size_t> labels = detail::normalized_support(cfg);
  std::vector<std::size_t> idx(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) idx[i] = labels[i] - 1;

  if (!opts.start.empty() && opts.start.size() != labels.size())
    throw std::invalid_argument("vdp_newton_root: start must list one pair per supported mode");

  const auto f = [&](const Vector& c_supp) {
    const PhaseVector cbar = embed_from_modes(c_supp, idx, cfg.n_modes);
    const PhaseVector fval = generating_F(sys.problem, sys.rhs, cbar, opts.grid_size);
    return Vector(restrict_to_modes(fval, idx));
  };

  Vector c0(2 * static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Pair p = opts.start.empty() ? Pair{1.0, 0.0} : opts.start[i];
    c0(2 * static_cast<Eigen::Index>(i)) = p.x;
    c0(2 * static_cast<Eigen::Index>(i) + 1) = p.y;
  }

  VdPRoot root;
  root.support = labels;
  root.newton = newton_roots(f, c0, opts.tol, opts.max_iter, opts.rank_tol);
  root.pairs = embed_from_modes(root.newton.c, idx, cfg.n_modes);
  root.radii = mode_radii(root.pairs);
  return root;
}

// ── Torus verification ─────────────────────────────────────────────────────

struct TorusReport {
  std::vector<std::size_t> support;  // 1-based labels of modes judged active
  std::vector<double> radii;         // per active mode
  double shared_radius = 0.0;        // mean over active modes
  double expected_radius = 0.0;      // 2/√(2s-1) for s active modes
  double radius_spread = 0.0;        // max |rᵢ - shared_radius|
  double system_residual = 0.0;      // ‖amplitude system‖_∞ at the pairs
  bool matches_formula = true;
};

// Checks whether a pair vector sits on the predicted torus: all active radii
// equal, matching the closed-form radius for their count, and the cubic
// system satisfied. A vector with no active modes passes vacuously. A mode is
// judged active when its radius exceeds 1e-6.
inline TorusReport verify_torus(const PhaseVector& pairs, double tol = 1e-8) {
  constexpr double activity_threshold = 1e-6;
  TorusReport rep;
  const std::vector<double> all = mode_radii(pairs);
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (all[k] > activity_threshold) {
      rep.support.push_back(k + 1);
      rep.radii.push_back(all[k]);
    }
  }
  const std::vector<double> sys = amplitude_system(pairs);
  for (double v : sys) rep.system_residual = std::max(rep.system_residual, std::abs(v));
  if (rep.support.empty()) return rep;

  double sum = 0.0;
  for (double r : rep.radii) sum += r;
  rep.shared_radius = sum / static_cast<double>(rep.radii.size());
  rep.expected_radius = torus_radius(rep.support.size());
  for (double r : rep.radii)
    rep.radius_spread = std::max(rep.radius_spread, std::abs(r - rep.shared_radius));
  rep.matches_formula = rep.radius_spread <= tol &&
                        std::abs(rep.shared_radius - rep.expected_radius) <= tol &&
                        rep.system_residual <= tol;
  return rep;
}

// ── Cross-check of the averaged map against the cubic system ───────────────

struct ModeRatio {
  std::size_t mode = 0;  // 1-based
  double mean_ratio = 0.0;
  double rel_std = 0.0;
  std::size_t samples_used = 0;
};

struct CrossCheckReport {
  std::vector<ModeRatio> modes;
  double worst_rel_std = 0.0;
  bool consistent = false;
  std::string note;
};

namespace detail {

// Deterministic uniform double in [0, 1); the raw-bit route keeps the stream
// identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Deterministic sample amplitudes for the cross-check: supported modes get
// radii in [0.2, 0.6] and free phases, the rest stay at zero. The radii stay
// clear of zeros of the cubic factors, so ratios are well-conditioned.
inline std::vector<PhaseVector> sample_amplitudes(const VdPConfig& cfg, std::size_t n_samples,
                                                  std::uint64_t seed) {
  const std::vector<std::size_t> labels = detail::normalized_support(cfg);
  std::mt19937_64 rng(seed);
  std::vector<PhaseVector> out;
  out.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    PhaseVector c = PhaseVector::zero(cfg.n_modes);
    for (std::size_t label : labels) {
      const double r = 0.2 + 0.4 * detail::uniform01(rng);
      const double psi = two_pi * detail::uniform01(rng);
      c[label - 1] = {r * std::cos(psi), r * std::sin(psi)};
    }
    out.push_back(std::move(c));
  }
  return out;
}

// Evaluates the averaged map and the cubic system at the given sample
// amplitudes and pools, per mode, the slotwise ratios of the two. Slots where
// the cubic value is below the conditioning floor are skipped. Reports the
// per-mode mean and relative standard deviation; never throws on
// inconsistency, only reports it.
inline CrossCheckReport cross_check_F(const VdPConfig& cfg,
                                      const std::vector<PhaseVector>& samples,
                                      std::size_t grid_size = 512,
                                      double consistency_tol = 1e-8) {
  constexpr double floor = 1e-6;
  const VdPSystem sys = build_vdp_problem(cfg);
  CrossCheckReport rep;
  std::vector<std::vector<double>> ratios(cfg.n_modes);
  for (const PhaseVector& c : samples) {
    const PhaseVector f = generating_F(sys.problem, sys.rhs, c, grid_size);
    const std::vector<double> alg = amplitude_system(c);
    for (std::size_t k = 0; k < cfg.n_modes; ++k) {
      if (std::abs(alg[2 * k]) > floor) ratios[k].push_back(f[k].x / alg[2 * k]);
      if (std::abs(alg[2 * k + 1]) > floor) ratios[k].push_back(f[k].y / alg[2 * k + 1]);
    }
  }
  rep.consistent = true;
  for (std::size_t k = 0; k < cfg.n_modes; ++k) {
    if (ratios[k].empty()) continue;
    ModeRatio mr;
    mr.mode = k + 1;
    mr.samples_used = ratios[k].size();
    double sum = 0.0;
    for (double r : ratios[k]) sum += r;
    mr.mean_ratio = sum / static_cast<double>(ratios[k].size());
    double var = 0.0;
    for (double r : ratios[k]) var += (r - mr.mean_ratio) * (r - mr.mean_ratio);
    var /= static_cast<double>(ratios[k].size());
    mr.rel_std = mr.mean_ratio != 0.0 ? std::sqrt(var) / std::abs(mr.mean_ratio)
                                      : std::sqrt(var);
    rep.worst_rel_std = std::max(rep.worst_rel_std, mr.rel_std);
    if (mr.rel_std > consistency_tol) rep.consistent = false;
    rep.modes.push_back(mr);
  }
  if (!rep.consistent)
    rep.note = "per-mode ratios between the averaged map and the cubic system scatter "
               "beyond tolerance";
  return rep;
}

}  // namespace pbvp
